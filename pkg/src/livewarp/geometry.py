"""Pinhole camera math and rigid poses.

Conventions used everywhere in this package:

- Poses are camera-to-world: ``X_world = R @ X_cam + t``, with ``t`` the
  camera center in world coordinates.
- Depth is metric linear depth (z in camera space), never disparity.
- Pixel sample locations sit at integer coordinates: the depth/color value
  stored at row v, column u corresponds to the continuous image point (u, v).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation


class GeometryError(ValueError):
    """Invalid geometric input (behind camera, bad depth, degenerate vector)."""


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside image "
                f"{self.width}x{self.height}"
            )

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def center_distance_max(self) -> float:
        """Distance from the principal point to the farthest image corner (px)."""
        dx = max(self.cx, self.width - 1 - self.cx)
        dy = max(self.cy, self.height - 1 - self.cy)
        return math.hypot(dx, dy)

    def scaled(self, factor: float) -> "Intrinsics":
        """Intrinsics for an image resized by `factor` in both axes."""
        return Intrinsics(
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=self.cx * factor,
            cy=self.cy * factor,
            width=max(1, int(round(self.width * factor))),
            height=max(1, int(round(self.height * factor))),
        )


@dataclass
class Pose:
    """Rigid camera-to-world transform."""

    rotation: np.ndarray  # 3x3, orthonormal, det +1
    translation: np.ndarray  # (3,) camera center in world, meters

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if self.rotation.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {self.rotation.shape}")
        err = np.abs(self.rotation.T @ self.rotation - np.eye(3)).max()
        if err > 1e-6:
            raise ValueError(f"rotation not orthonormal (max deviation {err:.2e})")
        if abs(np.linalg.det(self.rotation) - 1.0) > 1e-6:
            raise ValueError("rotation determinant must be +1 (no reflections)")

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_quaternion(cls, tx, ty, tz, qx, qy, qz, qw) -> "Pose":
        """Build from a trajectory-file row (camera-to-world, unit quaternion)."""
        q = np.array([qx, qy, qz, qw], dtype=np.float64)
        n = np.linalg.norm(q)
        if n == 0:
            raise ValueError("zero quaternion")
        rot = Rotation.from_quat(q / n).as_matrix()
        return cls(rot, np.array([tx, ty, tz], dtype=np.float64))

    def to_quaternion(self) -> np.ndarray:
        """(tx ty tz qx qy qz qw) row."""
        q = Rotation.from_matrix(self.rotation).as_quat()
        return np.concatenate([self.translation, q])

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply `other` first, then `self`."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Apply the camera-to-world transform to (..., 3) points."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def copy(self) -> "Pose":
        return Pose(self.rotation.copy(), self.translation.copy())

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return np.allclose(self.rotation, other.rotation, atol=atol) and np.allclose(
            self.translation, other.translation, atol=atol
        )


def relative_pose(a: Pose, b: Pose) -> Pose:
    """Transform taking points from a's camera space to b's camera space.

    ``x_b = R_b^T (R_a x_a + t_a - t_b)``
    """
    rb_t = b.rotation.T
    return Pose(rb_t @ a.rotation, rb_t @ (a.translation - b.translation))


def project(p, K: Intrinsics):
    """Project a camera-space point to a pixel (u, v, depth).

    Raises GeometryError for z <= 0 (behind camera).
    """
    x, y, z = p
    if z <= 0:
        raise GeometryError(f"point behind camera (z={z})")
    return (K.fx * x / z + K.cx, K.fy * y / z + K.cy, z)


def unproject(px, K: Intrinsics):
    """Inverse of project: pixel (u, v, depth) to a camera-space point."""
    u, v, d = px
    if d <= 0:
        raise GeometryError(f"invalid depth {d}")
    return ((u - K.cx) * d / K.fx, (v - K.cy) * d / K.fy, d)


def project_points(points: np.ndarray, K: Intrinsics):
    """Vectorized projection of (..., 3) camera-space points.

    Returns (u, v, z, valid) where valid marks z > 0 and in-bounds pixels.
    Points with z <= 0 give undefined u, v.
    """
    pts = np.asarray(points, dtype=np.float64)
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = K.fx * x / z + K.cx
        v = K.fy * y / z + K.cy
    valid = (z > 0) & (u >= 0) & (u <= K.width - 1) & (v >= 0) & (v <= K.height - 1)
    return u, v, z, valid


def unproject_grid(depth: np.ndarray, K: Intrinsics) -> np.ndarray:
    """Unproject a full depth map to an (H, W, 3) camera-space point grid.

    Pixels with depth <= 0 yield (0, 0, depth).
    """
    h, w = depth.shape
    u = np.arange(w, dtype=np.float64)[None, :]
    v = np.arange(h, dtype=np.float64)[:, None]
    d = depth.astype(np.float64)
    x = (u - K.cx) * d / K.fx
    y = (v - K.cy) * d / K.fy
    return np.stack([x, y, d], axis=-1)


def view_direction(p_world, camera_center) -> np.ndarray:
    """Unit vector from a camera center toward a surface point."""
    d = np.asarray(p_world, dtype=np.float64) - np.asarray(camera_center, dtype=np.float64)
    n = np.linalg.norm(d)
    if n == 0:
        raise GeometryError("degenerate view direction (point equals camera center)")
    return d / n
