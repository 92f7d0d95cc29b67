"""RGB-D dataset loading, motion scoring, and keyframe selection.

Dataset layout on disk:

    color/<timestamp>.png   8-bit RGB
    depth/<timestamp>.png   16-bit grayscale, meters = value / 5000
    trajectory.txt          lines: timestamp tx ty tz qx qy qz qw (cam-to-world)
    intrinsics.txt          fx fy cx cy width height
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
from PIL import Image

from .geometry import Intrinsics, Pose, relative_pose

log = logging.getLogger(__name__)

DEPTH_SCALE = 5000.0
POSE_MATCH_TOLERANCE = 0.020  # seconds
MIN_VALID_FRACTION = 0.2
KEYFRAME_WINDOW = 1.0  # seconds
MOTION_SCORE_STEP = 4  # sample every Nth pixel in each axis


class DatasetError(RuntimeError):
    pass


@dataclass
class InputFrame:
    color: np.ndarray        # (H, W, 3) uint8
    depth: np.ndarray        # (H, W) float32 meters, 0 = invalid
    timestamp: float
    pose: Pose
    intrinsics: Intrinsics

    def __post_init__(self):
        h, w = self.depth.shape
        if self.color.shape[:2] != (h, w):
            raise ValueError("color and depth dimensions differ")
        if (h, w) != (self.intrinsics.height, self.intrinsics.width):
            raise ValueError("frame dimensions do not match intrinsics")
        if np.any(self.depth < 0):
            raise ValueError("negative depth values")


@dataclass
class MotionScore:
    value: float             # mean motion-vector length, pixels
    valid_fraction: float    # fraction of sampled pixels that contributed

    @property
    def undefined(self) -> bool:
        return self.valid_fraction == 0.0


def load_intrinsics(path: Path) -> Intrinsics:
    if not path.exists():
        raise DatasetError(f"missing intrinsics file: {path}")
    parts = path.read_text().split()
    if len(parts) != 6:
        raise DatasetError(f"{path}: expected 'fx fy cx cy width height', got {len(parts)} fields")
    fx, fy, cx, cy = map(float, parts[:4])
    w, h = int(parts[4]), int(parts[5])
    return Intrinsics(fx=fx, fy=fy, cx=cx, cy=cy, width=w, height=h)


def load_trajectory(path: Path) -> list[tuple[float, Pose]]:
    if not path.exists():
        raise DatasetError(f"missing trajectory file: {path}")
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 8:
                raise DatasetError(
                    f"{path}:{lineno}: expected 8 fields "
                    f"'timestamp tx ty tz qx qy qz qw', got {len(parts)}"
                )
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
            q_norm = math.sqrt(sum(v * v for v in vals[4:8]))
            if abs(q_norm - 1.0) > 1e-3:
                raise DatasetError(f"{path}:{lineno}: quaternion norm {q_norm:.6f} not unit")
            rows.append((vals[0], Pose.from_quaternion(*vals[1:8])))
    rows.sort(key=lambda r: r[0])
    return rows


def load_color_png(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise DatasetError(f"unreadable image {path}: {exc}") from exc


def load_depth_png(path: Path, scale: float = DEPTH_SCALE) -> np.ndarray:
    try:
        with Image.open(path) as img:
            raw = np.asarray(img)
    except OSError as exc:
        raise DatasetError(f"unreadable image {path}: {exc}") from exc
    return (raw.astype(np.float32) / scale).astype(np.float32)


def _nearest_pose(ts: float, rows: Sequence[tuple[float, Pose]]) -> Pose | None:
    times = [r[0] for r in rows]
    i = int(np.searchsorted(times, ts))
    best = None
    best_dt = POSE_MATCH_TOLERANCE
    for j in (i - 1, i):
        if 0 <= j < len(rows):
            dt = abs(rows[j][0] - ts)
            if dt <= best_dt:
                best_dt = dt
                best = rows[j][1]
    return best


def load_stream(root: str | Path, depth_scale: float = DEPTH_SCALE) -> list[InputFrame]:
    """Load all frames of a dataset directory in timestamp order.

    Frames without a pose within 20 ms in the trajectory are dropped with a
    warning.
    """
    root = Path(root)
    K = load_intrinsics(root / "intrinsics.txt")
    trajectory = load_trajectory(root / "trajectory.txt")
    color_dir = root / "color"
    depth_dir = root / "depth"
    if not color_dir.is_dir() or not depth_dir.is_dir():
        raise DatasetError(f"{root}: expected color/ and depth/ subdirectories")

    by_ts = sorted((float(p.stem), p.name) for p in color_dir.glob("*.png"))
    frames: list[InputFrame] = []
    for ts, name in by_ts:
        pose = _nearest_pose(ts, trajectory)
        if pose is None:
            log.warning("dropping frame %s: no pose within %.0f ms", name, POSE_MATCH_TOLERANCE * 1e3)
            continue
        depth_path = depth_dir / name
        if not depth_path.exists():
            raise DatasetError(f"missing depth image for {name}")
        frames.append(
            InputFrame(
                color=load_color_png(color_dir / name),
                depth=load_depth_png(depth_path, depth_scale),
                timestamp=ts,
                pose=pose,
                intrinsics=K,
            )
        )
    return frames


def save_color_png(path: Path, color: np.ndarray):
    Image.fromarray(color, mode="RGB").save(path)


def save_depth_png(path: Path, depth: np.ndarray, scale: float = DEPTH_SCALE):
    raw = np.clip(np.round(depth * scale), 0, 65535).astype(np.uint16)
    Image.fromarray(raw).save(path)


def write_dataset(root: str | Path, frames: Iterable[InputFrame]):
    """Write frames in the on-disk layout (used by the synthetic generator)."""
    root = Path(root)
    (root / "color").mkdir(parents=True, exist_ok=True)
    (root / "depth").mkdir(parents=True, exist_ok=True)
    lines = []
    K = None
    for fr in frames:
        name = f"{fr.timestamp:.6f}.png"
        save_color_png(root / "color" / name, fr.color)
        save_depth_png(root / "depth" / name, fr.depth)
        row = fr.pose.to_quaternion()
        lines.append(f"{fr.timestamp:.6f} " + " ".join(f"{v:.9f}" for v in row))
        K = fr.intrinsics
    if K is None:
        raise ValueError("no frames to write")
    (root / "trajectory.txt").write_text("\n".join(lines) + "\n")
    (root / "intrinsics.txt").write_text(f"{K.fx} {K.fy} {K.cx} {K.cy} {K.width} {K.height}\n")


def motion_score(prev: InputFrame, cur: InputFrame, step: int = MOTION_SCORE_STEP) -> MotionScore:
    """Mean per-pixel motion-vector length between consecutive frames.

    Each sampled pixel of `prev` with valid depth is unprojected, carried
    through the relative pose, and projected into `cur`; the score is the
    mean displacement over pixels that land inside the image. Computed on a
    subsampled grid (every `step`-th pixel) for speed.
    """
    if prev.timestamp >= cur.timestamp:
        raise ValueError("frames must be in increasing timestamp order")
    K = prev.intrinsics
    d = prev.depth[::step, ::step].astype(np.float64)
    h, w = d.shape
    u = (np.arange(w) * step).astype(np.float64)[None, :]
    v = (np.arange(h) * step).astype(np.float64)[:, None]
    valid_depth = d > 0

    rel = relative_pose(prev.pose, cur.pose)
    x = (u - K.cx) * d / K.fx
    y = (v - K.cy) * d / K.fy
    R, t = rel.rotation, rel.translation
    px = R[0, 0] * x + R[0, 1] * y + R[0, 2] * d + t[0]
    py = R[1, 0] * x + R[1, 1] * y + R[1, 2] * d + t[1]
    pz = R[2, 0] * x + R[2, 1] * y + R[2, 2] * d + t[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        pu = K.fx * px / pz + K.cx
        pv = K.fy * py / pz + K.cy
    in_bounds = (pz > 0) & (pu >= 0) & (pu <= K.width - 1) & (pv >= 0) & (pv <= K.height - 1)
    contributing = valid_depth & in_bounds
    total = d.size
    count = int(contributing.sum())
    if count == 0:
        return MotionScore(value=math.inf, valid_fraction=0.0)
    du = pu[contributing] - np.broadcast_to(u, d.shape)[contributing]
    dv = pv[contributing] - np.broadcast_to(v, d.shape)[contributing]
    value = float(np.mean(np.hypot(du, dv)))
    return MotionScore(value=value, valid_fraction=count / total)


def select_keyframes(frames: Iterable[InputFrame],
                     window: float = KEYFRAME_WINDOW,
                     min_valid_fraction: float = MIN_VALID_FRACTION,
                     step: int = MOTION_SCORE_STEP) -> Iterator[InputFrame]:
    """Emit one keyframe per 1 s window: the frame with the lowest motion score.

    Windows are anchored at the first frame's timestamp. The first frame is
    always emitted. Scores are computed against each frame's predecessor;
    frames with too little valid overlap are never selected; ties break to
    the earliest frame.
    """

    first_ts = None
    prev: InputFrame | None = None
    window_end = None
    best: tuple[float, InputFrame] | None = None
    emitted_first = False

    def flush():
        nonlocal best
        if best is not None and math.isfinite(best[0]):
            frame = best[1]
            best = None
            return frame
        best = None
        return None

    for frame in frames:
        if prev is not None and frame.timestamp <= prev.timestamp:
            raise ValueError("timestamps must be strictly increasing")
        if first_ts is None:
            first_ts = frame.timestamp
            window_end = first_ts + window
            emitted_first = True
            yield frame
            prev = frame
            continue
        while frame.timestamp >= window_end:
            out = flush()
            if out is not None and not (emitted_first and out.timestamp == first_ts):
                yield out
            window_end += window
        score = motion_score(prev, frame, step=step)
        eligible = (not score.undefined) and score.valid_fraction >= min_valid_fraction
        key = score.value if eligible else math.inf
        if best is None or key < best[0]:
            best = (key, frame)
        prev = frame
    out = flush()
    if out is not None and not (emitted_first and out.timestamp == first_ts):
        yield out
