"""Depth-map triangulation and forward warping into a target camera.

A depth map is meshed as two triangles per 2x2 pixel cell. Triangles that
span an occlusion edge (a depth jump larger than a few fusion-band widths)
or touch invalid depth are dropped; the rest are transformed to the target
camera and rasterized with perspective-correct interpolation, streaming
fragments straight into a FusionBuffer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import get_num_threads

from . import _kernels
from .fusion import DepthErrorModel, FusionBuffer
from .geometry import Intrinsics, Pose, relative_pose

DEFAULT_EDGE_LAMBDA = 3.0

_zero_feats_cache: dict = {}


def _zero_features(shape):
    feats = _zero_feats_cache.get(shape)
    if feats is None:
        feats = np.zeros(shape + (8,), dtype=np.float32)
        _zero_feats_cache[shape] = feats
    return feats


@dataclass
class DepthMesh:
    """Implicit grid triangulation of a depth map.

    valid[r, c, k] flags triangle k of the cell with top-left pixel (r, c):
    k=0 is (P00, P01, P10), k=1 is (P10, P01, P11).
    """

    depth: np.ndarray       # (H, W) float32, 0 = invalid
    valid: np.ndarray       # (H-1, W-1, 2) bool
    intrinsics: Intrinsics

    @property
    def valid_triangle_count(self) -> int:
        return int(self.valid.sum())


def triangulate(depth: np.ndarray, K: Intrinsics, model: DepthErrorModel,
                edge_lambda: float = DEFAULT_EDGE_LAMBDA) -> DepthMesh:
    """Mesh a depth map, marking occlusion-edge and invalid-depth triangles.

    A triangle is valid iff all three vertex depths are > 0 and the max
    pairwise depth difference stays within edge_lambda fusion-band widths
    evaluated at the mean vertex depth.
    """
    depth = np.ascontiguousarray(depth, dtype=np.float32)
    d00 = depth[:-1, :-1]
    d01 = depth[:-1, 1:]
    d10 = depth[1:, :-1]
    d11 = depth[1:, 1:]

    valid = np.empty((depth.shape[0] - 1, depth.shape[1] - 1, 2), dtype=bool)
    for k, (a, b, c) in enumerate([(d00, d01, d10), (d10, d01, d11)]):
        pos = (a > 0) & (b > 0) & (c > 0)
        spread = np.maximum(np.abs(a - b), np.maximum(np.abs(a - c), np.abs(b - c)))
        mean = (a + b + c) / 3.0
        with np.errstate(invalid="ignore"):
            flat = spread <= edge_lambda * model.band(mean)
        valid[:, :, k] = pos & flat
    return DepthMesh(depth=depth, valid=valid, intrinsics=K)


def _center_distance_grid(K: Intrinsics) -> np.ndarray:
    u = np.arange(K.width, dtype=np.float32)[None, :] - K.cx
    v = np.arange(K.height, dtype=np.float32)[:, None] - K.cy
    return np.sqrt(u * u + v * v).astype(np.float32)


def project_grid_to_target(mesh: DepthMesh, source_pose: Pose, target_pose: Pose,
                           target_K: Intrinsics):
    """Transform the mesh's vertex grid into target screen space.

    Returns (vx, vy, vz) float64 arrays of screen x, screen y, and target
    camera z per source pixel, plus the source camera center in target
    camera coordinates.
    """
    K = mesh.intrinsics
    rel = relative_pose(source_pose, target_pose)  # source cam -> target cam
    h, w = mesh.depth.shape
    u = np.arange(w, dtype=np.float64)[None, :]
    v = np.arange(h, dtype=np.float64)[:, None]
    d = mesh.depth.astype(np.float64)
    x = (u - K.cx) * d / K.fx
    y = (v - K.cy) * d / K.fy
    R = rel.rotation
    t = rel.translation
    px = R[0, 0] * x + R[0, 1] * y + R[0, 2] * d + t[0]
    py = R[1, 0] * x + R[1, 1] * y + R[1, 2] * d + t[1]
    pz = R[2, 0] * x + R[2, 1] * y + R[2, 2] * d + t[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        vx = target_K.fx * px / pz + target_K.cx
        vy = target_K.fy * py / pz + target_K.cy
    return vx, vy, pz, t.copy()


def rasterize(mesh: DepthMesh, features: np.ndarray, source_pose: Pose,
              target_pose: Pose, target_K: Intrinsics, buf: FusionBuffer,
              model: DepthErrorModel, tile_size: int = 64,
              parallel: bool | None = None) -> None:
    """Warp one source view into the fusion buffer.

    features: (H, W, 8) float32 source feature planes. Fragments are fused
    in place; fragment order is triangle-index order, so repeated calls are
    bit-reproducible.
    """
    if features.shape[:2] != mesh.depth.shape:
        raise ValueError("feature map does not match depth resolution")
    feats = np.ascontiguousarray(features, dtype=np.float32)
    vx, vy, vz, src_center = project_grid_to_target(mesh, source_pose, target_pose, target_K)
    cdist = _center_distance_grid(mesh.intrinsics)
    cmax = mesh.intrinsics.center_distance_max()
    if parallel is None:
        parallel = get_num_threads() > 1
    args = (
        float(target_K.fx), float(target_K.fy), float(target_K.cx), float(target_K.cy),
        target_K.width, target_K.height,
    )
    mparams = (model.a, model.b, model.c, model.band_kappa, model.strict_paper_mode, cmax)
    bufs = (buf.d, buf.w, buf.f, buf.n)
    if parallel:
        entries, offsets = _kernels.bin_triangles(
            vx, vy, vz, mesh.valid, target_K.width, target_K.height, tile_size
        )
        _kernels.raster_fuse_tiles(
            entries, offsets, vx, vy, vz, feats, cdist, src_center,
            *args, tile_size, *mparams, *bufs, True,
        )
    else:
        _kernels.raster_fuse_seq(
            vx, vy, vz, feats, cdist, mesh.valid, src_center,
            *args, *mparams, *bufs, True,
        )


def rasterize_depth_only(mesh: DepthMesh, source_pose: Pose, target_pose: Pose,
                         target_K: Intrinsics, buf: FusionBuffer,
                         model: DepthErrorModel, tile_size: int = 64,
                         parallel: bool | None = None) -> None:
    """Depth/weight-only warp (stage 1 of deferred mode).

    Produces d, w, n bit-identical to `rasterize` with the same inputs; the
    feature planes are left untouched.
    """
    vx, vy, vz, src_center = project_grid_to_target(mesh, source_pose, target_pose, target_K)
    cdist = _center_distance_grid(mesh.intrinsics)
    cmax = mesh.intrinsics.center_distance_max()
    feats = _zero_features(mesh.depth.shape)
    if parallel is None:
        parallel = get_num_threads() > 1
    args = (
        float(target_K.fx), float(target_K.fy), float(target_K.cx), float(target_K.cy),
        target_K.width, target_K.height,
    )
    mparams = (model.a, model.b, model.c, model.band_kappa, model.strict_paper_mode, cmax)
    bufs = (buf.d, buf.w, buf.f, buf.n)
    if parallel:
        entries, offsets = _kernels.bin_triangles(
            vx, vy, vz, mesh.valid, target_K.width, target_K.height, tile_size
        )
        _kernels.raster_fuse_tiles(
            entries, offsets, vx, vy, vz, feats, cdist, src_center,
            *args, tile_size, *mparams, *bufs, False,
        )
    else:
        _kernels.raster_fuse_seq(
            vx, vy, vz, feats, cdist, mesh.valid, src_center,
            *args, *mparams, *bufs, False,
        )
