"""Keyframe feature encoding: pluggable encoder, LRU cache, per-frame budget.

The reference encoder is a deterministic stand-in for a learned network:
channels 0-3 carry the raw RGB-D input and channels 4-7 carry luminance
gradients, a Laplacian, and local contrast. A learned encoder can replace it
behind the same interface; everything downstream only sees 8 float planes
and a confidence plane.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from scipy.ndimage import correlate, uniform_filter

FEATURE_CHANNELS = 8

# Sobel kernels scaled so a unit step edge responds with exactly 1.0
SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float32) / 4.0
SOBEL_Y = SOBEL_X.T.copy()
LAPLACE = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float32)


@dataclass
class FeatureMap:
    channels: np.ndarray    # (H, W, 8) float32
    confidence: np.ndarray  # (H, W) float32 in [0, 1]
    keyframe_id: int


class Encoder(Protocol):
    def __call__(self, color: np.ndarray, depth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(H,W,3) uint8 color + (H,W) depth -> (channels, confidence)."""
        ...


def luminance(color01: np.ndarray) -> np.ndarray:
    return (
        0.299 * color01[..., 0] + 0.587 * color01[..., 1] + 0.114 * color01[..., 2]
    ).astype(np.float32)


def encode_reference(color: np.ndarray, depth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic 8-channel encoding of an RGB-D frame.

    Channels: 0-2 RGB in [0,1], 3 linear depth (m), 4/5 horizontal/vertical
    luminance gradient, 6 luminance Laplacian, 7 local 5x5 luminance std.
    Confidence is 1 where depth is valid, 0 elsewhere.
    """
    h, w = depth.shape
    rgb = color.astype(np.float32) / 255.0
    lum = luminance(rgb)
    out = np.empty((h, w, FEATURE_CHANNELS), dtype=np.float32)
    out[..., 0:3] = rgb
    out[..., 3] = depth
    out[..., 4] = correlate(lum, SOBEL_X, mode="nearest")
    out[..., 5] = correlate(lum, SOBEL_Y, mode="nearest")
    out[..., 6] = correlate(lum, LAPLACE, mode="nearest")
    mean = uniform_filter(lum, size=5, mode="nearest")
    mean_sq = uniform_filter(lum * lum, size=5, mode="nearest")
    out[..., 7] = np.sqrt(np.maximum(mean_sq - mean * mean, 0.0))
    conf = (depth > 0).astype(np.float32)
    return out, conf


@dataclass
class EncoderBudget:
    """Caps how many cache misses may be encoded within one rendered frame."""

    max_encodes_per_frame: int = 2
    encodes_used_this_frame: int = 0

    def start_frame(self):
        self.encodes_used_this_frame = 0

    def try_consume(self) -> bool:
        if self.encodes_used_this_frame >= self.max_encodes_per_frame:
            return False
        self.encodes_used_this_frame += 1
        return True


DEFERRED = "deferred"


class FeatureCache:
    """LRU cache of encoded feature maps, keyed by keyframe id only.

    Poses are not part of the key: geometry lives in keyframe-local space,
    so pose updates never invalidate an entry.
    """

    def __init__(self, capacity: int = 64, encoder: Encoder = encode_reference):
        if capacity < 1:
            raise ValueError("cache capacity must be >= 1")
        self.capacity = capacity
        self.encoder = encoder
        self._entries: OrderedDict[int, FeatureMap] = OrderedDict()
        self.hits = 0
        self.misses = 0
        self.evictions = 0

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, kf_id: int) -> bool:
        return kf_id in self._entries

    def get_or_encode(self, kf_id: int, color: np.ndarray, depth: np.ndarray,
                      budget: EncoderBudget | None = None) -> FeatureMap | str:
        """Return the cached map, or encode within budget, or DEFERRED.

        A deferred view is simply skipped for this frame; the target view
        builds up over the following frames as the budget allows.
        """
        entry = self._entries.get(kf_id)
        if entry is not None:
            self._entries.move_to_end(kf_id)
            self.hits += 1
            return entry
        self.misses += 1
        if budget is not None and not budget.try_consume():
            return DEFERRED
        channels, conf = self.encoder(color, depth)
        entry = FeatureMap(channels=channels, confidence=conf, keyframe_id=kf_id)
        self._entries[kf_id] = entry
        if len(self._entries) > self.capacity:
            self._entries.popitem(last=False)
            self.evictions += 1
        return entry

    def cached_ids(self) -> list[int]:
        """Ids in LRU order (least recent first)."""
        return list(self._entries.keys())

    def stats(self) -> dict:
        return {
            "hits": self.hits,
            "misses": self.misses,
            "evictions": self.evictions,
            "size": len(self._entries),
            "capacity": self.capacity,
        }
