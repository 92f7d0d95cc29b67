"""Analytic textured-room scene for hermetic ground-truth tests.

A camera inside an axis-aligned box room is ray-cast against the six walls;
each wall carries a smooth procedural texture plus a softened checkerboard.
Color and linear depth are exact, which makes the scene usable as ground
truth for end-to-end warping and fusion checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import InputFrame
from .geometry import Intrinsics, Pose

DEFAULT_INTRINSICS = Intrinsics(fx=300.0, fy=300.0, cx=159.5, cy=119.5, width=320, height=240)

_FACE_BASE = np.array(
    [
        [0.85, 0.45, 0.35],  # +x wall
        [0.35, 0.65, 0.85],  # -x wall
        [0.80, 0.80, 0.70],  # +y floor
        [0.55, 0.75, 0.50],  # -y ceiling
        [0.75, 0.55, 0.80],  # +z wall
        [0.90, 0.80, 0.40],  # -z wall
    ]
)


@dataclass(frozen=True)
class BoxRoomScene:
    """Axis-aligned box interior with per-face procedural textures."""

    half_extents: tuple[float, float, float] = (2.0, 1.5, 2.5)

    def face_color(self, face: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Texture as a function of the two in-plane world coordinates."""
        base = _FACE_BASE[face]
        wave = (
            0.16 * np.sin(2.3 * a + 0.7) * np.cos(1.9 * b)
            + 0.10 * np.sin(5.1 * b + 0.3 * face)
        )
        checker = 0.12 * np.tanh(2.5 * np.sin(np.pi * 1.5 * a) * np.sin(np.pi * 1.5 * b))
        rgb = base + (wave + checker)[..., None]
        return np.clip(rgb, 0.0, 1.0)

    def render(self, pose: Pose, K: Intrinsics) -> tuple[np.ndarray, np.ndarray]:
        """Ray-cast color (uint8) and exact linear depth for a camera pose."""
        h, w = K.height, K.width
        u = np.arange(w, dtype=np.float64)[None, :]
        v = np.arange(h, dtype=np.float64)[:, None]
        # camera-space directions with z = 1, so the ray parameter is linear depth
        dx = (u - K.cx) / K.fx * np.ones((h, 1))
        dy = (v - K.cy) / K.fy * np.ones((1, w))
        dz = np.ones((h, w))
        dirs_cam = np.stack([dx, dy, dz], axis=-1)
        dirs = dirs_cam @ pose.rotation.T
        origin = pose.translation

        ext = np.asarray(self.half_extents)
        best_t = np.full((h, w), np.inf)
        best_face = np.zeros((h, w), dtype=np.int64)
        for axis in range(3):
            for si, sign in enumerate((1.0, -1.0)):
                denom = dirs[..., axis]
                with np.errstate(divide="ignore", invalid="ignore"):
                    t = (sign * ext[axis] - origin[axis]) / denom
                t = np.where((denom * sign > 0) & (t > 1e-9), t, np.inf)
                closer = t < best_t
                best_t = np.where(closer, t, best_t)
                best_face = np.where(closer, axis * 2 + si, best_face)

        pts = origin + dirs * best_t[..., None]
        in_plane = [(1, 2), (1, 2), (0, 2), (0, 2), (0, 1), (0, 1)]
        a = np.empty((h, w))
        b = np.empty((h, w))
        for face in range(6):
            mask = best_face == face
            ia, ib = in_plane[face]
            a[mask] = pts[mask][:, ia]
            b[mask] = pts[mask][:, ib]
        rgb = self.face_color(best_face, a, b)
        color = (rgb * 255.0 + 0.5).astype(np.uint8)
        depth = best_t.astype(np.float32)
        return color, depth


def look_at(eye, target, world_down=(0.0, 1.0, 0.0)) -> Pose:
    """Camera-to-world pose with +z toward `target` (y-down convention)."""
    eye = np.asarray(eye, dtype=np.float64)
    f = np.asarray(target, dtype=np.float64) - eye
    f = f / np.linalg.norm(f)
    down = np.asarray(world_down, dtype=np.float64)
    x = np.cross(down, f)
    nx = np.linalg.norm(x)
    if nx < 1e-9:
        x = np.array([1.0, 0.0, 0.0])
    else:
        x = x / nx
    y = np.cross(f, x)
    rot = np.stack([x, y, f], axis=1)
    return Pose(rot, eye)


def orbit_poses(count: int, radius: float = 0.6, height: float = 0.0,
                look_radius: float = 4.0, phase: float = 0.0) -> list[Pose]:
    """Cameras on a circle looking outward at the room walls."""
    poses = []
    for i in range(count):
        ang = phase + 2.0 * np.pi * i / count
        eye = np.array([radius * np.cos(ang), height, radius * np.sin(ang)])
        target = np.array([look_radius * np.cos(ang), height * 0.5, look_radius * np.sin(ang)])
        poses.append(look_at(eye, target))
    return poses


def make_frames(poses: list[Pose], K: Intrinsics = DEFAULT_INTRINSICS,
                scene: BoxRoomScene | None = None, fps: float = 30.0,
                t0: float = 0.0) -> list[InputFrame]:
    scene = scene or BoxRoomScene()
    frames = []
    for i, pose in enumerate(poses):
        color, depth = scene.render(pose, K)
        frames.append(
            InputFrame(color=color, depth=depth, timestamp=t0 + i / fps, pose=pose, intrinsics=K)
        )
    return frames


def keyframe_holdout_split(total: int = 70, holdout_every: int = 7,
                           K: Intrinsics = DEFAULT_INTRINSICS,
                           scene: BoxRoomScene | None = None):
    """Orbit split into input keyframes and interleaved held-out poses."""
    scene = scene or BoxRoomScene()
    poses = orbit_poses(total)
    frames = make_frames(poses, K, scene)
    holdout = [f for i, f in enumerate(frames) if i % holdout_every == holdout_every // 2]
    inputs = [f for i, f in enumerate(frames) if i % holdout_every != holdout_every // 2]
    return inputs, holdout
