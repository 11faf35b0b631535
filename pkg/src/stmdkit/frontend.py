"""Early-vision stages shared by all detectors.

Retina: separable Gaussian smoothing. Lamina: temporal filtering, either a
plain one-frame difference or a fractional backward difference
(Grunwald-Letnikov weights), which keeps a decaying memory of past
brightness changes. ON/OFF splitting half-wave rectifies the lamina output.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import (
    FrameRing,
    Kernel1D,
    OnOffSignals,
    convolve_separable,
    gaussian_kernel,
    rectify_pair,
)

PLAIN_DIFF = "plain_diff"
FRACTIONAL = "fractional"


@dataclass(frozen=True)
class RetinaConfig:
    sigma: float = 1.0
    radius: int = 2

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"retina sigma must be positive, got {self.sigma}")
        if self.radius < 1:
            raise ValueError(f"retina radius must be >= 1, got {self.radius}")

    @cached_property
    def kernel(self) -> Kernel1D:
        return gaussian_kernel(self.sigma, self.radius)


@dataclass(frozen=True)
class LaminaConfig:
    """Temporal filter: plain one-frame difference or fractional difference.

    In fractional mode the filter is sum_k w_k * I(t-k) over ``memory``
    frames with w_0 = 1 and w_k = w_{k-1} * (k - 1 - frac_order) / k.
    """

    mode: str = PLAIN_DIFF
    frac_order: float = 0.8
    memory: int = 10

    def __post_init__(self):
        if self.mode not in (PLAIN_DIFF, FRACTIONAL):
            raise ValueError(f"unknown lamina mode {self.mode!r}")
        if not 0.0 < self.frac_order <= 1.0:
            raise ValueError(f"frac_order must be in (0, 1], got {self.frac_order}")
        if self.memory < 2:
            raise ValueError(f"lamina memory must be >= 2, got {self.memory}")

    @cached_property
    def weights(self) -> np.ndarray:
        return fractional_weights(self.frac_order, self.memory)

    @property
    def horizon(self) -> int:
        """Frames of history the filter needs before producing output."""
        return self.memory if self.mode == FRACTIONAL else 2

    @property
    def warmup_frames(self) -> int:
        return self.horizon - 1


def fractional_weights(order: float, memory: int) -> np.ndarray:
    """Grunwald-Letnikov backward-difference weights w_0..w_{memory-1}.

    w_0 = 1 and all later weights are negative for order in (0, 1); the
    infinite sum is 0, so a constant input leaves only a small residue.
    """
    if not 0.0 < order <= 1.0:
        raise ValueError(f"fractional order must be in (0, 1], got {order}")
    w = np.empty(memory, dtype=np.float64)
    w[0] = 1.0
    for k in range(1, memory):
        w[k] = w[k - 1] * (k - 1 - order) / k
    return w


def retina_smooth(frame: np.ndarray, cfg: RetinaConfig) -> np.ndarray:
    """Gaussian-smooth one luminance frame."""
    return convolve_separable(frame, cfg.kernel, cfg.kernel)


def lamina_filter(history: FrameRing, cfg: LaminaConfig) -> np.ndarray:
    """Temporal filter over the newest frames of ``history``.

    With insufficient depth the output is all zero (warm-up semantics).
    """
    newest = history.delayed(0)
    if history.depth < cfg.horizon:
        return np.zeros_like(newest)
    if cfg.mode == PLAIN_DIFF:
        return newest - history.delayed(1)
    acc = np.zeros(newest.shape, dtype=np.float64)
    for k, w_k in enumerate(cfg.weights):
        acc += w_k * history.delayed(k)
    return acc.astype(newest.dtype)


def split_on_off(lamina_out: np.ndarray) -> OnOffSignals:
    """Named ON/OFF tap point; identical to rectify_pair."""
    return rectify_pair(lamina_out)


class EarlyVision:
    """Stateful retina -> lamina -> ON/OFF front end with owned history rings.

    One instance drives one sequential frame loop; ``on_off_ring`` keeps the
    last ``depth`` ON/OFF pairs for downstream delay-and-correlate stages.
    """

    def __init__(self, retina: RetinaConfig, lamina: LaminaConfig, depth: int = 1):
        self.retina = retina
        self.lamina = lamina
        self.input_ring = FrameRing(lamina.horizon)
        self.on_off_ring = FrameRing(max(depth, 1))
        self.frames_seen = 0

    @property
    def warmup_frames(self) -> int:
        return self.lamina.warmup_frames

    def step(self, frame: np.ndarray) -> OnOffSignals:
        index = self.frames_seen
        self.frames_seen += 1
        smoothed = retina_smooth(frame, self.retina)
        self.input_ring.push(index, smoothed)
        signals = split_on_off(lamina_filter(self.input_ring, self.lamina))
        self.on_off_ring.push(index, signals)
        return signals
