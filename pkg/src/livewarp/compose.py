"""Turns a fusion buffer into displayable frames with a temporal feedback blend."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fusion import FusionBuffer, colorize_confidence, confidence_map

DEFAULT_TEMPORAL_BLEND = 0.1


@dataclass
class TemporalState:
    """Previous composed frame kept in real precision for the feedback blend."""

    blend: float = DEFAULT_TEMPORAL_BLEND
    previous: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.blend <= 1.0:
            raise ValueError("temporal blend factor must lie in [0, 1]")

    def reset(self):
        self.previous = None


@dataclass
class ComposedFrame:
    rgb: np.ndarray        # (H, W, 3) uint8
    frame_index: int


def compose(buf: FusionBuffer, state: TemporalState, frame_index: int = 0) -> ComposedFrame:
    """Fused feature channels 0-2 -> RGB, blended with the previous output.

    The fused feature is already a weighted mean, so no renormalization
    happens here. Holes come out black. The previous frame is blended in
    without reprojection; the first frame uses blend 0.
    """
    rgb_raw = buf.f[..., 0:3].astype(np.float64)
    rgb_raw[~buf.valid_mask()] = 0.0
    rgb_raw = np.clip(rgb_raw, 0.0, 1.0)
    if state.previous is None:
        blended = rgb_raw
    else:
        blended = (1.0 - state.blend) * rgb_raw + state.blend * state.previous
    state.previous = blended
    rgb = (blended * 255.0 + 0.5).astype(np.uint8)
    return ComposedFrame(rgb=rgb, frame_index=frame_index)


def visualize_depth(buf: FusionBuffer, near: float = 0.2, far: float = 6.0) -> np.ndarray:
    """Grayscale depth: near -> white, far -> black, holes -> black."""
    if far <= near:
        raise ValueError("far must exceed near")
    d = buf.d.astype(np.float64)
    t = np.clip((far - d) / (far - near), 0.0, 1.0)
    t[~buf.valid_mask()] = 0.0
    return (t * 255.0 + 0.5).astype(np.uint8)


def visualize_confidence(buf: FusionBuffer, k: float = 0.05) -> np.ndarray:
    """Green-white-red confidence overlay image."""
    return colorize_confidence(confidence_map(buf, k))
