"""Case-based screen-space surface fusion with incremental weighted averaging.

Per target pixel we track a running linear depth d, accumulated weight w,
an 8-vector feature f, and a fused-fragment count n. An incoming fragment
either starts a new surface in front, is discarded behind, or is averaged
into the running state, depending on where its depth falls relative to the
fusion band around d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FEATURE_CHANNELS = 8


class ModelConfigError(ValueError):
    """Depth error model is not positive over the configured depth range."""


@dataclass(frozen=True)
class DepthErrorModel:
    """Sensor depth error curve and the fusion band derived from it.

    ``delta(d) = 1 / (a d^2 + b d + c)`` models depth accuracy; it feeds the
    fragment weight. The fusion band, which must *widen* with distance,
    defaults to ``band(d) = band_kappa * d^2`` (1 cm at 1 m for the default
    kappa). With ``strict_paper_mode`` the band reuses delta(d) directly.
    """

    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    band_kappa: float = 0.01
    strict_paper_mode: bool = False
    d_min: float = 0.1
    d_max: float = 20.0

    def __post_init__(self):
        d = np.linspace(self.d_min, self.d_max, 256)
        denom = self.a * d * d + self.b * d + self.c
        if np.any(denom <= 0):
            raise ModelConfigError(
                f"a d^2 + b d + c must stay positive on [{self.d_min}, {self.d_max}]"
            )
        if np.any(self.band(d) <= 0):
            raise ModelConfigError("fusion band must be positive over the depth range")

    def delta(self, d):
        """Depth error in meters at linear depth d."""
        return 1.0 / (self.a * d * d + self.b * d + self.c)

    def band(self, d):
        """Half-width of the fusion interval around a running depth d."""
        if self.strict_paper_mode:
            return self.delta(d)
        return self.band_kappa * d * d

    def depth_weight(self, d_f):
        """w_d term: delta clamped to [0, 1] so the product stays dimensionless."""
        return np.clip(self.delta(d_f), 0.0, 1.0)


def fragment_weight(d_f, v_s, v_t, c_dist, c_max, model: DepthErrorModel):
    """Combined fragment weight ``(w_d * w_v * w_i)^5``.

    w_d: depth accuracy at the fragment depth.
    w_v: clamped dot product of unit source/target view directions.
    w_i: linear vignetting falloff with distance to the source image center.
    """
    w_d = model.depth_weight(d_f)
    w_v = max(0.0, float(np.dot(v_s, v_t)))
    w_i = 1.0 - c_dist / c_max
    return (w_d * w_v * w_i) ** 5


@dataclass
class FusionPixel:
    """Running state of one target pixel."""

    d: float = math.inf
    w: float = 0.0
    f: np.ndarray = field(default_factory=lambda: np.zeros(FEATURE_CHANNELS))
    n: int = 0


@dataclass
class Fragment:
    """One rasterized sample landing on a target pixel."""

    d_f: float
    w_f: float
    f_f: np.ndarray
    source_id: int = -1


def fuse_fragment(px: FusionPixel, frag: Fragment, model: DepthErrorModel) -> FusionPixel:
    """Apply the three-case fusion rule to one pixel; returns the new state.

    Band boundaries belong to the averaging case. An empty pixel (n == 0)
    is always overwritten. Zero-combined-weight fragments are discarded.
    """
    if frag.d_f <= 0:
        raise ValueError(f"fragment depth must be positive, got {frag.d_f}")
    if px.n == 0:
        return FusionPixel(frag.d_f, frag.w_f, np.array(frag.f_f, dtype=float), 1)
    band = model.band(px.d)
    if frag.d_f < px.d - band:
        # new surface in front: overwrite
        return FusionPixel(frag.d_f, frag.w_f, np.array(frag.f_f, dtype=float), 1)
    if frag.d_f > px.d + band:
        # behind the current surface: discard
        return px
    wsum = px.w + frag.w_f
    if wsum == 0.0:
        return px
    alpha = px.w / wsum
    return FusionPixel(
        d=alpha * px.d + (1.0 - alpha) * frag.d_f,
        w=wsum,
        f=alpha * px.f + (1.0 - alpha) * np.asarray(frag.f_f, dtype=float),
        n=px.n + 1,
    )


class FusionBuffer:
    """H x W array of fusion pixels stored as planes for kernel access."""

    def __init__(self, height: int, width: int):
        self.height = height
        self.width = width
        self.d = np.full((height, width), np.inf, dtype=np.float32)
        self.w = np.zeros((height, width), dtype=np.float32)
        self.f = np.zeros((height, width, FEATURE_CHANNELS), dtype=np.float32)
        self.n = np.zeros((height, width), dtype=np.int32)

    def clear(self):
        self.d.fill(np.inf)
        self.w.fill(0.0)
        self.f.fill(0.0)
        self.n.fill(0)

    def valid_mask(self) -> np.ndarray:
        return self.n >= 1

    def pixel(self, v: int, u: int) -> FusionPixel:
        return FusionPixel(
            float(self.d[v, u]), float(self.w[v, u]), self.f[v, u].astype(float), int(self.n[v, u])
        )

    def set_pixel(self, v: int, u: int, px: FusionPixel):
        self.d[v, u] = px.d
        self.w[v, u] = px.w
        self.f[v, u] = px.f
        self.n[v, u] = px.n

    def fuse(self, v: int, u: int, frag: Fragment, model: DepthErrorModel):
        self.set_pixel(v, u, fuse_fragment(self.pixel(v, u), frag, model))

    def mean_weight(self) -> np.ndarray:
        """Per-pixel mean fused fragment weight, 0 for holes."""
        out = np.zeros((self.height, self.width), dtype=np.float32)
        mask = self.n >= 1
        out[mask] = self.w[mask] / self.n[mask]
        return out


def confidence_map(buf: FusionBuffer, k: float = 0.05) -> np.ndarray:
    """Tone-mapped per-pixel confidence in [0, 1]; 0 at holes.

    conf = wbar / (wbar + k), a monotone curve of the mean fused weight.
    """
    wbar = buf.mean_weight()
    return wbar / (wbar + k)


def colorize_confidence(conf: np.ndarray) -> np.ndarray:
    """Green (good) over white (normal) to red (bad), as uint8 RGB."""
    c = np.clip(conf, 0.0, 1.0)[..., None]
    red = np.array([1.0, 0.15, 0.15])
    white = np.array([1.0, 1.0, 1.0])
    green = np.array([0.15, 0.8, 0.15])
    lo = red + (white - red) * (2.0 * c)  # conf in [0, 0.5]
    hi = white + (green - white) * (2.0 * c - 1.0)  # conf in (0.5, 1]
    rgb = np.where(c <= 0.5, lo, hi)
    return (np.clip(rgb, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
