"""Keyframe store with mutable poses and snapshot isolation.

All geometry lives in keyframe-local space, so a late pose correction (loop
closure) only swaps the pose; nothing cached per keyframe is invalidated.
Readers take point-in-time snapshots; a pose-update batch is atomic with
respect to those snapshots.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from .dataset import InputFrame
from .geometry import Pose


class StoreError(KeyError):
    pass


@dataclass
class Keyframe:
    id: int
    frame: InputFrame
    pose: Pose
    generation: int = 0


@dataclass(frozen=True)
class SnapshotEntry:
    id: int
    pose: Pose
    generation: int
    frame: InputFrame  # shared reference; color/depth are immutable by contract


class KeyframeStore:
    def __init__(self):
        self._lock = threading.Lock()
        self._keyframes: dict[int, Keyframe] = {}
        self._next_id = 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._keyframes)

    def insert(self, frame: InputFrame, kf_id: int | None = None) -> int:
        """Insert a keyframe; assigns the next id unless one is given.

        The initial pose is the frame's trajectory pose. Duplicate explicit
        ids are rejected.
        """
        with self._lock:
            if kf_id is None:
                kf_id = self._next_id
            elif kf_id in self._keyframes:
                raise StoreError(f"keyframe id {kf_id} already present")
            self._keyframes[kf_id] = Keyframe(id=kf_id, frame=frame, pose=frame.pose.copy())
            self._next_id = max(self._next_id, kf_id + 1)
            return kf_id

    def get(self, kf_id: int) -> Keyframe:
        with self._lock:
            try:
                return self._keyframes[kf_id]
            except KeyError:
                raise StoreError(f"unknown keyframe id {kf_id}") from None

    def apply_pose_updates(self, batch: list[tuple[int, Pose]]) -> None:
        """Replace poses atomically; the whole batch is rejected on any bad id."""
        with self._lock:
            for kf_id, _ in batch:
                if kf_id not in self._keyframes:
                    raise StoreError(f"unknown keyframe id {kf_id}; batch rejected")
            for kf_id, pose in batch:
                kf = self._keyframes[kf_id]
                kf.pose = pose.copy()
                kf.generation += 1

    def snapshot(self) -> list[SnapshotEntry]:
        """Consistent point-in-time view, ordered by id.

        Poses are copied: later updates never mutate a snapshot.
        """
        with self._lock:
            return [
                SnapshotEntry(id=kf.id, pose=kf.pose.copy(), generation=kf.generation, frame=kf.frame)
                for kf in sorted(self._keyframes.values(), key=lambda k: k.id)
            ]
