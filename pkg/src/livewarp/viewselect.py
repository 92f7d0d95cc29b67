"""Tile-coverage-based selection of the best N source keyframes for a target.

Each candidate's depth map is forward-projected at low resolution into the
target; samples vote for the 32 px tile they land in, weighted by the
fragment weighting scheme. A greedy set cover then picks views until every
tile is seen or the budget is spent, preferring views with good warping
weights.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .fusion import DepthErrorModel
from .geometry import Intrinsics, Pose, relative_pose
from .store import SnapshotEntry

DEFAULT_TILE_SIZE = 32
DEFAULT_COVERAGE_DOWNSAMPLE = 8
DEFAULT_NUM_VIEWS = 15
EXACT_COVER_LIMIT = 12  # max candidates for the exact-cover fallback


@dataclass
class CoverageEstimate:
    """Per-tile weight contributions of one candidate in the target view."""

    keyframe_id: int
    sum_w: np.ndarray     # (nty, ntx) accumulated fragment weights
    count: np.ndarray     # (nty, ntx) samples landed per tile
    global_mean_weight: float

    @property
    def covered(self) -> np.ndarray:
        return self.count >= 1

    def representative_weight(self) -> np.ndarray:
        """Mean sample weight per tile; 0 where the tile got no samples."""
        out = np.zeros_like(self.sum_w)
        mask = self.count >= 1
        out[mask] = self.sum_w[mask] / self.count[mask]
        return out


@dataclass
class ViewSelection:
    ids: list[int]                    # ordered by descending global mean weight
    tile_cover: np.ndarray            # (nty, ntx) covering keyframe id, -1 = uncovered
    coverage_estimates: int = 0       # number of per-candidate estimates performed


def tile_grid_shape(K: Intrinsics, tile_size: int = DEFAULT_TILE_SIZE) -> tuple[int, int]:
    return (
        (K.height + tile_size - 1) // tile_size,
        (K.width + tile_size - 1) // tile_size,
    )


def estimate_coverage(entry: SnapshotEntry, target_pose: Pose, target_K: Intrinsics,
                      model: DepthErrorModel, tile_size: int = DEFAULT_TILE_SIZE,
                      downsample: int = DEFAULT_COVERAGE_DOWNSAMPLE) -> CoverageEstimate:
    """Splat the candidate's downsampled depth map into the target tile grid."""
    K = entry.frame.intrinsics
    nty, ntx = tile_grid_shape(target_K, tile_size)
    sum_w = np.zeros((nty, ntx), dtype=np.float64)
    count = np.zeros((nty, ntx), dtype=np.int64)

    d = entry.frame.depth[::downsample, ::downsample].astype(np.float64)
    h, w = d.shape
    u = (np.arange(w) * downsample).astype(np.float64)[None, :]
    v = (np.arange(h) * downsample).astype(np.float64)[:, None]
    valid = d > 0
    if not valid.any():
        return CoverageEstimate(entry.id, sum_w, count, 0.0)

    rel = relative_pose(entry.pose, target_pose)  # source cam -> target cam
    x = (u - K.cx) * d / K.fx
    y = (v - K.cy) * d / K.fy
    R, t = rel.rotation, rel.translation
    px = R[0, 0] * x + R[0, 1] * y + R[0, 2] * d + t[0]
    py = R[1, 0] * x + R[1, 1] * y + R[1, 2] * d + t[1]
    pz = R[2, 0] * x + R[2, 1] * y + R[2, 2] * d + t[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        tu = target_K.fx * px / pz + target_K.cx
        tv = target_K.fy * py / pz + target_K.cy
    inside = valid & (pz > 0) & (tu >= 0) & (tu <= target_K.width - 1) \
        & (tv >= 0) & (tv <= target_K.height - 1)
    if not inside.any():
        return CoverageEstimate(entry.id, sum_w, count, 0.0)

    pxv = px[inside]; pyv = py[inside]; pzv = pz[inside]
    # view-direction weight: both directions expressed in target camera space
    norm_t = np.sqrt(pxv * pxv + pyv * pyv + pzv * pzv)
    dsx = pxv - t[0]; dsy = pyv - t[1]; dsz = pzv - t[2]
    norm_s = np.sqrt(dsx * dsx + dsy * dsy + dsz * dsz)
    with np.errstate(invalid="ignore", divide="ignore"):
        w_v = np.maximum(0.0, (pxv * dsx + pyv * dsy + pzv * dsz) / (norm_t * norm_s))
    w_v[~np.isfinite(w_v)] = 0.0
    cdist = np.sqrt((u - K.cx) ** 2 + (v - K.cy) ** 2)
    cd = np.broadcast_to(cdist, d.shape)[inside]
    w_i = np.maximum(0.0, 1.0 - cd / K.center_distance_max())
    w_d = model.depth_weight(pzv)
    w_f = (w_d * w_v * w_i) ** 5

    tx = (tu[inside] / tile_size).astype(np.int64)
    ty = (tv[inside] / tile_size).astype(np.int64)
    np.add.at(sum_w, (ty, tx), w_f)
    np.add.at(count, (ty, tx), 1)
    return CoverageEstimate(entry.id, sum_w, count, float(np.mean(w_f)))


def select_views(target_pose: Pose, target_K: Intrinsics,
                 candidates: list[SnapshotEntry], n: int,
                 model: DepthErrorModel, tile_size: int = DEFAULT_TILE_SIZE,
                 downsample: int = DEFAULT_COVERAGE_DOWNSAMPLE) -> ViewSelection:
    """Greedy set cover over target tiles, then fill the budget by weight.

    Deterministic: ties break by higher mean representative weight over the
    newly covered tiles, then by lower keyframe id. If greedy leaves
    coverable tiles uncovered within budget and the candidate set is small,
    an exact minimum-cover search replaces the greedy pick.
    """
    if n < 1:
        raise ValueError("view budget must be >= 1")
    nty, ntx = tile_grid_shape(target_K, tile_size)
    tile_cover = np.full((nty, ntx), -1, dtype=np.int64)
    if not candidates:
        return ViewSelection(ids=[], tile_cover=tile_cover, coverage_estimates=0)

    estimates = [
        estimate_coverage(e, target_pose, target_K, model, tile_size, downsample)
        for e in candidates
    ]
    by_id = {est.keyframe_id: est for est in estimates}
    rep = {est.keyframe_id: est.representative_weight() for est in estimates}

    picked = _greedy_cover(by_id, rep, sorted(by_id), n, tile_cover)

    coverable = np.zeros((nty, ntx), dtype=bool)
    for est in estimates:
        coverable |= est.covered
    if (coverable & (tile_cover < 0)).any() and len(by_id) <= EXACT_COVER_LIMIT:
        exact = _exact_min_cover(by_id, coverable, n)
        if exact is not None:
            tile_cover.fill(-1)
            picked = _greedy_cover(by_id, rep, exact, n, tile_cover)

    # spend any leftover budget on the globally best remaining candidates
    remaining = set(by_id) - set(picked)
    fill = sorted(remaining, key=lambda i: (-by_id[i].global_mean_weight, i))
    picked.extend(fill[: n - len(picked)])

    picked.sort(key=lambda i: (-by_id[i].global_mean_weight, i))
    return ViewSelection(ids=picked, tile_cover=tile_cover, coverage_estimates=len(estimates))


def _greedy_cover(by_id, rep, ids, n, tile_cover) -> list[int]:
    """Greedy picks among `ids`, writing covering ids into tile_cover."""
    picked: list[int] = []
    remaining = list(ids)
    uncovered = tile_cover < 0
    while len(picked) < n and uncovered.any() and remaining:
        best_id = None
        best_key = None
        for kf_id in remaining:
            gain_mask = by_id[kf_id].covered & uncovered
            gain = int(gain_mask.sum())
            if gain == 0:
                continue
            mean_w = float(rep[kf_id][gain_mask].mean())
            key = (gain, mean_w, -kf_id)
            if best_key is None or key > best_key:
                best_key = key
                best_id = kf_id
        if best_id is None:
            break
        newly = by_id[best_id].covered & uncovered
        tile_cover[newly] = best_id
        uncovered &= ~by_id[best_id].covered
        picked.append(best_id)
        remaining.remove(best_id)
    return picked


def _exact_min_cover(by_id, coverable, n) -> list[int] | None:
    """Smallest subset (within budget) whose union covers all coverable tiles.

    Among minimum covers, the one with the highest total global mean weight
    wins; remaining ties go to the lexicographically smallest id tuple.
    """
    ids = sorted(by_id)
    target = int(coverable.sum())
    for r in range(1, min(n, len(ids)) + 1):
        best = None
        for combo in itertools.combinations(ids, r):
            union = np.zeros_like(coverable)
            for kf_id in combo:
                union |= by_id[kf_id].covered
            if int((union & coverable).sum()) == target:
                weight = sum(by_id[k].global_mean_weight for k in combo)
                key = (-weight, combo)
                if best is None or key < best[0]:
                    best = (key, list(combo))
        if best is not None:
            return best[1]
    return None
