"""Delay-and-correlate reference detectors.

HR (multiplicative enhancement), BL (divisive suppression) and the combined
HR/BL elementary motion detectors correlate a luminance sample with a
delayed, spatially offset one. ESTMD correlates ON against delayed OFF at
the same pixel; DSTMD correlates across a set of directional offsets and
reads direction from the argmax. These serve as the comparison arm for
every benchmark experiment.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .frontend import EarlyVision, LaminaConfig, RetinaConfig, retina_smooth
from .grid import (
    DirectionField,
    FrameResult,
    FrameRing,
    WarmUpError,
    sample_shifted,
    wrap_angle,
)


@dataclass(frozen=True)
class EmdConfig:
    """Delays and sample offsets for the HR / BL / HR-BL detectors.

    Offsets are (dx, dy) displacements of the delayed sample relative to the
    output pixel; division_guard keeps the BL denominators off zero.
    """

    delay_tau: int = 4
    offset: tuple[int, int] = (-1, 0)
    second_delay: int = 4
    second_offset: tuple[int, int] = (-2, 0)
    division_guard: float = 1e-3

    def __post_init__(self):
        if self.delay_tau < 1 or self.second_delay < 1:
            raise ValueError("EMD delays must be >= 1")
        if self.division_guard <= 0:
            raise ValueError("division guard must be positive")


@dataclass(frozen=True)
class DstmdConfig:
    """Directional correlation geometry: ``directions`` offsets of length
    ``alpha_sep`` pixels (nearest-pixel rounded) and three delay taps."""

    directions: int = 8
    alpha_sep: float = 2.0
    tau1: int = 1
    tau3: int = 4
    delay_tau: int = 4

    def __post_init__(self):
        if self.directions < 2:
            raise ValueError("DSTMD needs at least 2 directions")
        if self.alpha_sep < 1:
            raise ValueError("alpha_sep must be >= 1 pixel")
        if min(self.tau1, self.tau3, self.delay_tau) < 1:
            raise ValueError("DSTMD delays must be >= 1")

    def angles(self) -> np.ndarray:
        return np.arange(self.directions) * (2.0 * math.pi / self.directions)

    def offsets(self) -> list[tuple[int, int]]:
        return [
            (int(np.rint(self.alpha_sep * math.cos(t))), int(np.rint(self.alpha_sep * math.sin(t))))
            for t in self.angles()
        ]


def hr_detect(history: FrameRing, cfg: EmdConfig) -> np.ndarray:
    """O(z,t) = I(z + offset, t - tau) * I(z, t); zeros during warm-up."""
    current = history.delayed(0)
    try:
        past = history.delayed(cfg.delay_tau)
    except WarmUpError:
        return np.zeros_like(current)
    dx, dy = cfg.offset
    return sample_shifted(past, dx, dy) * current


def bl_detect(history: FrameRing, cfg: EmdConfig) -> np.ndarray:
    """O(z,t) = I(z, t) / (I(z + offset, t - tau) + guard)."""
    current = history.delayed(0)
    try:
        past = history.delayed(cfg.delay_tau)
    except WarmUpError:
        return np.zeros_like(current)
    dx, dy = cfg.offset
    return current / (sample_shifted(past, dx, dy) + cfg.division_guard)


def hrbl_detect(history: FrameRing, cfg: EmdConfig) -> np.ndarray:
    """O(z,t) = I(z', t-tau1) * I(z, t) / (I(z'', t-tau2) + guard)."""
    current = history.delayed(0)
    try:
        past1 = history.delayed(cfg.delay_tau)
        past2 = history.delayed(cfg.second_delay)
    except WarmUpError:
        return np.zeros_like(current)
    dx1, dy1 = cfg.offset
    dx2, dy2 = cfg.second_offset
    numerator = sample_shifted(past1, dx1, dy1) * current
    return numerator / (sample_shifted(past2, dx2, dy2) + cfg.division_guard)


def estmd_detect(on_off_history: FrameRing, tau: int) -> np.ndarray:
    """O(z,t) = ON(z,t) * OFF(z,t-tau): same-pixel coincidence of a fresh
    brightness increase with a brightness decrease tau frames earlier."""
    current = on_off_history.delayed(0)
    try:
        past = on_off_history.delayed(tau)
    except WarmUpError:
        return np.zeros_like(current.on)
    return current.on * past.off


def dstmd_detect(
    on_off_history: FrameRing, cfg: DstmdConfig
) -> tuple[np.ndarray, DirectionField]:
    """Directional correlation stack plus its argmax direction field.

    O(z,t,theta) = ON(z,t) * OFF(z',t-tau3) * [ON(z,t-tau1) + OFF(z',t-tau)]
    with z' = z + alpha_sep*(cos theta, sin theta) rounded to the nearest
    pixel. Per pixel, direction = argmax_theta O and magnitude = that max.
    """
    current = on_off_history.delayed(0)
    h, w = current.on.shape
    try:
        past1 = on_off_history.delayed(cfg.tau1)
        past3 = on_off_history.delayed(cfg.tau3)
        past_t = on_off_history.delayed(cfg.delay_tau)
    except WarmUpError:
        stack = np.zeros((cfg.directions, h, w), dtype=current.on.dtype)
        return stack, _argmax_direction(stack, cfg.angles())
    stack = np.empty((cfg.directions, h, w), dtype=current.on.dtype)
    for k, (dx, dy) in enumerate(cfg.offsets()):
        off3 = sample_shifted(past3.off, dx, dy)
        off_t = sample_shifted(past_t.off, dx, dy)
        stack[k] = current.on * off3 * (past1.on + off_t)
    return stack, _argmax_direction(stack, cfg.angles())


def _argmax_direction(stack: np.ndarray, angles: np.ndarray) -> DirectionField:
    best = np.argmax(stack, axis=0)
    magnitude = np.max(stack, axis=0)
    defined = magnitude > 0
    angle = np.where(defined, wrap_angle(angles[best]), 0.0)
    return DirectionField(
        angle=angle.astype(stack.dtype),
        magnitude=np.where(defined, magnitude, 0).astype(stack.dtype),
        defined_mask=defined,
    )


class _CountingDetector:
    """Shared bookkeeping: per-stage operation counters and frame count."""

    name = "base"

    def __init__(self):
        self.op_counts: Counter = Counter()
        self.frames_seen = 0

    def reset_op_counts(self) -> None:
        self.op_counts.clear()


class EmdDetector(_CountingDetector):
    """Driver for the HR / BL / HR-BL family over retina-smoothed luminance."""

    def __init__(self, kind: str, retina: RetinaConfig, cfg: EmdConfig):
        super().__init__()
        if kind not in ("hr", "bl", "hrbl"):
            raise ValueError(f"unknown EMD kind {kind!r}")
        self.name = kind
        self.retina = retina
        self.cfg = cfg
        depth = cfg.delay_tau if kind != "hrbl" else max(cfg.delay_tau, cfg.second_delay)
        self.ring = FrameRing(depth + 1)
        self._fn = {"hr": hr_detect, "bl": bl_detect, "hrbl": hrbl_detect}[kind]

    @property
    def warmup_frames(self) -> int:
        if self.name == "hrbl":
            return max(self.cfg.delay_tau, self.cfg.second_delay)
        return self.cfg.delay_tau

    def step(self, frame: np.ndarray) -> FrameResult:
        self.ring.push(self.frames_seen, retina_smooth(frame, self.retina))
        self.frames_seen += 1
        response = self._fn(self.ring, self.cfg)
        if self.frames_seen > self.warmup_frames:
            self.op_counts["correlations"] += response.size
        return FrameResult(response)


class EstmdDetector(_CountingDetector):
    """ESTMD backbone: retina + lamina + ON/OFF + same-pixel correlation."""

    name = "estmd"

    def __init__(self, retina: RetinaConfig, lamina: LaminaConfig, tau: int = 4):
        super().__init__()
        if tau < 1:
            raise ValueError("estmd tau must be >= 1")
        self.tau = tau
        self.early = EarlyVision(retina, lamina, depth=tau + 1)

    @property
    def warmup_frames(self) -> int:
        return self.early.warmup_frames + self.tau

    def step(self, frame: np.ndarray) -> FrameResult:
        self.early.step(frame)
        self.frames_seen += 1
        response = estmd_detect(self.early.on_off_ring, self.tau)
        if self.frames_seen > self.warmup_frames:
            self.op_counts["correlations"] += response.size
        return FrameResult(response)


class DstmdDetector(_CountingDetector):
    """DSTMD backbone: directional multi-offset correlation with argmax readout."""

    name = "dstmd"

    def __init__(self, retina: RetinaConfig, lamina: LaminaConfig, cfg: DstmdConfig):
        super().__init__()
        self.cfg = cfg
        depth = max(cfg.tau1, cfg.tau3, cfg.delay_tau) + 1
        self.early = EarlyVision(retina, lamina, depth=depth)

    @property
    def warmup_frames(self) -> int:
        return self.early.warmup_frames + max(
            self.cfg.tau1, self.cfg.tau3, self.cfg.delay_tau
        )

    def step(self, frame: np.ndarray) -> FrameResult:
        self.early.step(frame)
        self.frames_seen += 1
        stack, field = dstmd_detect(self.early.on_off_ring, self.cfg)
        if self.frames_seen > self.warmup_frames:
            self.op_counts["directional_correlations"] += stack[0].size * self.cfg.directions
        return FrameResult(field.magnitude, field)


def per_frame_op_counts(detector, frames: int) -> dict[str, float]:
    """Average operation counts per frame for an instrumented run."""
    if frames <= 0:
        raise ValueError("frames must be positive")
    return {stage: count / frames for stage, count in detector.op_counts.items()}
