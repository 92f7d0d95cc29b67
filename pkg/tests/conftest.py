import numpy as np
import pytest

from livewarp.dataset import InputFrame
from livewarp.geometry import Intrinsics, Pose
from livewarp.synthetic import BoxRoomScene, DEFAULT_INTRINSICS, make_frames, orbit_poses


def random_pose(rng: np.random.Generator, translation_scale: float = 1.0) -> Pose:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return Pose.from_quaternion(*(rng.normal(size=3) * translation_scale), *q)


def constant_depth_frame(depth_value: float, pose: Pose, K: Intrinsics,
                         timestamp: float = 0.0, color_value: int = 128) -> InputFrame:
    color = np.full((K.height, K.width, 3), color_value, dtype=np.uint8)
    depth = np.full((K.height, K.width), depth_value, dtype=np.float32)
    return InputFrame(color=color, depth=depth, timestamp=timestamp, pose=pose, intrinsics=K)


@pytest.fixture(scope="session")
def small_K() -> Intrinsics:
    return Intrinsics(fx=100.0, fy=100.0, cx=39.5, cy=29.5, width=80, height=60)


@pytest.fixture(scope="session")
def room_frames():
    """Orbit views of the synthetic room, 15 degrees apart so that adjacent
    views overlap (the camera FOV is about 56 degrees)."""
    return make_frames(orbit_poses(24), DEFAULT_INTRINSICS, BoxRoomScene())


@pytest.fixture(scope="session")
def room_scene():
    return BoxRoomScene()
