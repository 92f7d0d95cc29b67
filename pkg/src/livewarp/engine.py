"""Render orchestration: selection, encoding, warping, fusion, composition.

The Renderer owns the per-session mutable state (feature cache, mesh cache,
temporal feedback) and reads keyframes through store snapshots, so SLAM-style
pose updates can land concurrently without tearing a frame.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .compose import ComposedFrame, TemporalState, compose, visualize_confidence, visualize_depth
from .encoder import DEFERRED, EncoderBudget, FeatureCache, FeatureMap
from .fusion import DepthErrorModel, FusionBuffer
from .geometry import Intrinsics, Pose, relative_pose
from .raster import DepthMesh, rasterize, rasterize_depth_only, triangulate
from .store import KeyframeStore, SnapshotEntry
from .viewselect import ViewSelection, select_views

MODES = ("color", "depth", "confidence")
WARP_MODES = ("forward", "deferred")


@dataclass(frozen=True)
class RenderConfig:
    num_views: int = 15
    tile_size: int = 32               # view-selection coverage tiles
    coverage_downsample: int = 8
    raster_tile: int = 64             # rasterizer ownership tiles
    cache_capacity: int = 64
    encode_budget: int = 2
    temporal_blend: float = 0.1
    conf_k: float = 0.05
    depth_near: float = 0.2
    depth_far: float = 6.0
    edge_lambda: float = 3.0
    model: DepthErrorModel = field(default_factory=DepthErrorModel)
    parallel: bool | None = None      # None = auto by numba thread count


@dataclass
class RenderResult:
    image: np.ndarray                 # (H, W, 3) uint8 in the requested mode
    buffer: FusionBuffer
    selection: ViewSelection
    timings: dict[str, float]
    frame_index: int


class Renderer:
    def __init__(self, store: KeyframeStore, target_K: Intrinsics,
                 config: RenderConfig | None = None):
        self.store = store
        self.target_K = target_K
        self.config = config or RenderConfig()
        self.cache = FeatureCache(capacity=self.config.cache_capacity)
        self.budget = EncoderBudget(max_encodes_per_frame=self.config.encode_budget)
        self.temporal = TemporalState(blend=self.config.temporal_blend)
        self._meshes: dict[int, DepthMesh] = {}
        self._frame_index = 0

    def reset_temporal(self):
        self.temporal.reset()

    def mesh_for(self, entry: SnapshotEntry) -> DepthMesh:
        """Triangulation cached per keyframe id; depth is immutable."""
        mesh = self._meshes.get(entry.id)
        if mesh is None:
            mesh = triangulate(
                entry.frame.depth, entry.frame.intrinsics,
                self.config.model, self.config.edge_lambda,
            )
            self._meshes[entry.id] = mesh
        return mesh

    def _gather_features(self, entries: list[SnapshotEntry]) -> dict[int, FeatureMap]:
        """Encode in ascending id order so cache eviction is reproducible."""
        out: dict[int, FeatureMap] = {}
        for entry in sorted(entries, key=lambda e: e.id):
            fm = self.cache.get_or_encode(
                entry.id, entry.frame.color, entry.frame.depth, self.budget
            )
            if fm is not DEFERRED:
                out[entry.id] = fm
        return out

    def fuse_forward(self, target_pose: Pose, entries: list[SnapshotEntry],
                     features: dict[int, FeatureMap],
                     timings: dict[str, float] | None = None) -> FusionBuffer:
        """Rasterize each source's feature-textured mesh into a fresh buffer."""
        cfg = self.config
        buf = FusionBuffer(self.target_K.height, self.target_K.width)
        t0 = time.perf_counter()
        for entry in entries:
            fm = features.get(entry.id)
            if fm is None:
                continue
            rasterize(
                self.mesh_for(entry), fm.channels, entry.pose, target_pose,
                self.target_K, buf, cfg.model, cfg.raster_tile, cfg.parallel,
            )
        if timings is not None:
            timings["feature_warp"] = time.perf_counter() - t0
        return buf

    def fuse_deferred(self, target_pose: Pose, depth_entries: list[SnapshotEntry],
                      feature_entries: list[SnapshotEntry],
                      features: dict[int, FeatureMap],
                      timings: dict[str, float] | None = None) -> FusionBuffer:
        """Two stages: fuse depth from all depth sources, then back-sample features."""
        cfg = self.config
        buf = FusionBuffer(self.target_K.height, self.target_K.width)
        t0 = time.perf_counter()
        for entry in depth_entries:
            rasterize_depth_only(
                self.mesh_for(entry), entry.pose, target_pose,
                self.target_K, buf, cfg.model, cfg.raster_tile, cfg.parallel,
            )
        t1 = time.perf_counter()

        accum_w = np.zeros(buf.d.shape, dtype=np.float32)
        accum_f = np.zeros(buf.f.shape, dtype=np.float32)
        accum_n = np.zeros(buf.d.shape, dtype=np.int32)
        model = cfg.model
        for entry in feature_entries:
            fm = features.get(entry.id)
            if fm is None:
                continue
            K = entry.frame.intrinsics
            rel = relative_pose(target_pose, entry.pose)  # target cam -> source cam
            _kernels.deferred_sample_source(
                buf.d, buf.n,
                float(self.target_K.fx), float(self.target_K.fy),
                float(self.target_K.cx), float(self.target_K.cy),
                np.ascontiguousarray(rel.rotation), np.ascontiguousarray(rel.translation),
                entry.frame.depth, fm.channels, fm.confidence > 0.5,
                float(K.fx), float(K.fy), float(K.cx), float(K.cy),
                model.a, model.b, model.c, model.band_kappa, model.strict_paper_mode,
                K.center_distance_max(),
                accum_w, accum_f, accum_n,
            )
        has_features = accum_w > 0
        buf.f[has_features] = accum_f[has_features] / accum_w[has_features, None]
        buf.w[has_features] = accum_w[has_features]
        buf.n = np.where(has_features, accum_n, 0).astype(np.int32)
        buf.d[~has_features] = np.inf
        if timings is not None:
            timings["depth_warp"] = t1 - t0
            timings["feature_warp"] = time.perf_counter() - t1
        return buf

    def render(self, target_pose: Pose, mode: str = "color", warp: str = "forward",
               snapshot: list[SnapshotEntry] | None = None,
               selection: ViewSelection | None = None) -> RenderResult:
        if mode not in MODES:
            raise ValueError(f"unknown render mode {mode!r}")
        if warp not in WARP_MODES:
            raise ValueError(f"unknown warp mode {warp!r}")
        cfg = self.config
        timings: dict[str, float] = {
            "view_select": 0.0, "encode": 0.0, "depth_warp": 0.0,
            "feature_warp": 0.0, "fusion": 0.0, "compose": 0.0,
        }
        t_start = time.perf_counter()
        if snapshot is None:
            snapshot = self.store.snapshot()
        by_id = {e.id: e for e in snapshot}

        t0 = time.perf_counter()
        if selection is None:
            selection = select_views(
                target_pose, self.target_K, snapshot, cfg.num_views,
                cfg.model, cfg.tile_size, cfg.coverage_downsample,
            )
        timings["view_select"] = time.perf_counter() - t0

        selected = [by_id[i] for i in selection.ids if i in by_id]
        t0 = time.perf_counter()
        self.budget.start_frame()
        features = self._gather_features(selected)
        timings["encode"] = time.perf_counter() - t0

        if warp == "forward":
            buf = self.fuse_forward(target_pose, selected, features, timings)
        else:
            depth_entries = snapshot
            buf = self.fuse_deferred(target_pose, depth_entries, selected, features, timings)

        t0 = time.perf_counter()
        if mode == "color":
            composed = compose(buf, self.temporal, self._frame_index)
            image = composed.rgb
        elif mode == "depth":
            gray = visualize_depth(buf, cfg.depth_near, cfg.depth_far)
            image = np.repeat(gray[..., None], 3, axis=2)
        else:
            image = visualize_confidence(buf, cfg.conf_k)
        timings["compose"] = time.perf_counter() - t0
        timings["total"] = time.perf_counter() - t_start

        result = RenderResult(
            image=image, buffer=buf, selection=selection,
            timings=timings, frame_index=self._frame_index,
        )
        self._frame_index += 1
        return result
