"""Dual-dynamics small-target pipeline.

Instead of correlating a signal with a fixed-delay copy of itself, each
ON/OFF channel charges a leaky membrane potential. Excitation comes from
the same channel; the Gaussian-pooled opposite channel raises the leak
conductance (shunting inhibition), so extended objects and textured
backgrounds drain their own potentials. The two potentials are multiplied
pointwise to locate a target, and their guarded ratio forms a shared
per-pixel code whose neighborhood vector sum decodes motion direction.
A feedback variant subtracts a blurred copy of the recent output to
suppress anything that revisits the same place frame after frame.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .frontend import EarlyVision, LaminaConfig, RetinaConfig
from .grid import (
    DirectionField,
    FrameResult,
    FrameRing,
    OnOffSignals,
    WarmUpError,
    convolve_separable,
    gaussian_kernel,
    sample_shifted,
    wrap_angle,
)


class NumericRunawayError(RuntimeError):
    """Membrane potentials exceeded the stability ceiling."""


@dataclass(frozen=True)
class MedullaConfig:
    """Leaky-integrator parameters for the dual membrane potentials.

    decay_g is the base leak conductance per frame; inhib_gain scales how
    much pooled opposite-channel activity adds to that leak; excit_gain
    scales same-channel drive. Explicit Euler with step_dt requires
    decay_g * step_dt < 1 for stability at zero inhibition.
    """

    decay_g: float = 0.5
    inhib_gain: float = 2.0
    inhib_sigma: float = 3.0
    step_dt: float = 1.0
    excit_gain: float = 1.0
    ceiling: float = 1e6

    def __post_init__(self):
        if self.decay_g <= 0 or self.step_dt <= 0 or self.excit_gain <= 0:
            raise ValueError("decay_g, step_dt and excit_gain must be positive")
        if self.decay_g * self.step_dt >= 1.0:
            raise ValueError(
                f"unstable explicit-Euler step: decay_g*step_dt = "
                f"{self.decay_g * self.step_dt} >= 1"
            )
        if self.inhib_gain < 0 or self.inhib_sigma < 0:
            raise ValueError("inhib_gain and inhib_sigma must be >= 0")


@dataclass(frozen=True)
class LdfcConfig:
    """Guarded-ratio encoding and neighborhood decoding parameters."""

    guard_eps: float = 1e-3
    noise_floor: float = 1e-3
    decode_radius: int = 1

    def __post_init__(self):
        if self.guard_eps <= 0:
            raise ValueError("guard_eps must be positive")
        if self.decode_radius < 1:
            raise ValueError("decode_radius must be >= 1")


@dataclass(frozen=True)
class FeedbackConfig:
    """Delayed, blurred self-subtraction applied to the locating output."""

    fb_gain: float = 1.0
    fb_delay: int = 1
    fb_sigma: float = 5.0

    def __post_init__(self):
        if not 0.0 <= self.fb_gain <= 1.0:
            raise ValueError("fb_gain must be in [0, 1]")
        if self.fb_delay < 1:
            raise ValueError("fb_delay must be >= 1")
        if self.fb_sigma < 0:
            raise ValueError("fb_sigma must be >= 0")


@dataclass(frozen=True)
class DualDynamics:
    """Paired non-negative membrane-potential grids, one per channel."""

    v_on: np.ndarray
    v_off: np.ndarray

    @classmethod
    def zeros(cls, height: int, width: int, dtype=np.float32) -> "DualDynamics":
        return cls(
            v_on=np.zeros((height, width), dtype=dtype),
            v_off=np.zeros((height, width), dtype=dtype),
        )


def _pool(grid: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian surround pooling; radius 3*sigma, capped to fit the grid."""
    if sigma <= 0:
        return grid
    h, w = grid.shape
    radius = min(int(math.ceil(3.0 * sigma)), (h - 1) // 2, (w - 1) // 2)
    if radius < 1:
        return grid
    k = gaussian_kernel(sigma, radius)
    return convolve_separable(grid, k, k)


def medulla_step(
    signals: OnOffSignals, state: DualDynamics, cfg: MedullaConfig
) -> DualDynamics:
    """One explicit-Euler update of both membrane potentials.

    v_on <- v_on + dt * (-(g + k*pool(S_off)) * v_on + e * S_on), clamped at
    0, and symmetrically for v_off with pool(S_on). Inhibition only raises
    the leak term; it never injects negative drive.
    """
    pooled_off = _pool(signals.off, cfg.inhib_sigma)
    pooled_on = _pool(signals.on, cfg.inhib_sigma)
    dt = cfg.step_dt
    leak_on = cfg.decay_g + cfg.inhib_gain * pooled_off
    leak_off = cfg.decay_g + cfg.inhib_gain * pooled_on
    v_on = state.v_on + dt * (cfg.excit_gain * signals.on - leak_on * state.v_on)
    v_off = state.v_off + dt * (cfg.excit_gain * signals.off - leak_off * state.v_off)
    np.maximum(v_on, 0, out=v_on)
    np.maximum(v_off, 0, out=v_off)
    peak = max(float(v_on.max(initial=0.0)), float(v_off.max(initial=0.0)))
    if not math.isfinite(peak) or peak > cfg.ceiling:
        raise NumericRunawayError(
            f"membrane potential reached {peak:g} (ceiling {cfg.ceiling:g}) with "
            f"decay_g={cfg.decay_g}, inhib_gain={cfg.inhib_gain}, "
            f"step_dt={cfg.step_dt}, excit_gain={cfg.excit_gain}"
        )
    return DualDynamics(v_on=v_on, v_off=v_off)


def lobula_locate(dd: DualDynamics) -> np.ndarray:
    """Pointwise correlation of the two potentials: one multiply per pixel."""
    return dd.v_on * dd.v_off


def ldfc_encode(dd: DualDynamics, cfg: LdfcConfig) -> np.ndarray:
    """Shared directional code: one guarded division per spatial location.

    code(z) = [v_on + v_off > noise_floor] * v_off(z) / (v_on(z) + eps).
    The fresh opposite-polarity trace leads the located response along the
    motion path, so the code rises from the wake toward the heading side.
    """
    active = (dd.v_on + dd.v_off) > cfg.noise_floor
    ratio = dd.v_off / (dd.v_on + cfg.guard_eps)
    return np.where(active, ratio, 0).astype(dd.v_on.dtype)


def _decode_offset_pairs(radius: int) -> list[tuple[int, int, float, float]]:
    """One representative of each +-d offset pair in the Chebyshev box."""
    offs = []
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if (dy, dx) <= (0, 0):
                continue
            norm = math.hypot(dx, dy)
            offs.append((dx, dy, dx / norm, dy / norm))
    return offs


def direction_decode(
    ldfc: np.ndarray, locate: np.ndarray, cfg: LdfcConfig
) -> DirectionField:
    """Vector-sum readout of the shared code around each located pixel.

    V(z) = sum_d code(z+d) * d/|d| over the (2r+1)^2-1 neighborhood,
    normalized by the neighborhood code sum where that sum beats the guard.
    Opposite offsets are accumulated as differences so a symmetric
    neighborhood cancels exactly. Direction is defined only where
    locate > 0 and V is nonzero.
    """
    vx = np.zeros_like(ldfc)
    vy = np.zeros_like(ldfc)
    total = np.zeros_like(ldfc)
    for dx, dy, ux, uy in _decode_offset_pairs(cfg.decode_radius):
        ahead = sample_shifted(ldfc, dx, dy)
        behind = sample_shifted(ldfc, -dx, -dy)
        diff = ahead - behind
        vx += ux * diff
        vy += uy * diff
        total += ahead + behind
    scale = np.where(total > cfg.guard_eps, total, 1.0)
    vx = vx / scale
    vy = vy / scale
    magnitude = np.hypot(vx, vy)
    defined = (locate > 0) & (magnitude > 0)
    angle = np.where(defined, wrap_angle(np.arctan2(vy, vx)), 0.0)
    return DirectionField(
        angle=angle.astype(ldfc.dtype),
        magnitude=np.where(defined, magnitude, 0).astype(ldfc.dtype),
        defined_mask=defined,
    )


def feedback_apply(
    raw_locate: np.ndarray, fb_history: FrameRing, cfg: FeedbackConfig
) -> np.ndarray:
    """Subtract a blurred, delayed copy of the final output, clamped at 0.

    ``fb_history`` holds previous final outputs, newest = previous frame;
    with too little history the feedback term is zero.
    """
    try:
        past = fb_history.delayed(cfg.fb_delay - 1)
    except WarmUpError:
        return raw_locate
    return np.maximum(raw_locate - cfg.fb_gain * _pool(past, cfg.fb_sigma), 0)


class StmdNetDetector:
    """Four-layer pipeline sharing the dual dynamics between the locating
    branch (pointwise product) and the orienting branch (guarded ratio plus
    neighborhood decode)."""

    name = "stmdnet"

    def __init__(
        self,
        retina: RetinaConfig | None = None,
        lamina: LaminaConfig | None = None,
        medulla: MedullaConfig | None = None,
        ldfc: LdfcConfig | None = None,
    ):
        self.retina = retina or RetinaConfig()
        self.lamina = lamina or LaminaConfig(mode="fractional")
        self.medulla = medulla or MedullaConfig()
        self.ldfc = ldfc or LdfcConfig()
        self.early = EarlyVision(self.retina, self.lamina, depth=1)
        self.state: DualDynamics | None = None
        self.op_counts: Counter = Counter()
        self.frames_seen = 0

    @property
    def warmup_frames(self) -> int:
        # lamina history plus three membrane time constants of settling
        settle = int(math.ceil(3.0 / (self.medulla.decay_g * self.medulla.step_dt)))
        return self.early.warmup_frames + settle

    def reset_op_counts(self) -> None:
        self.op_counts.clear()

    def step(self, frame: np.ndarray) -> FrameResult:
        signals = self.early.step(frame)
        self.frames_seen += 1
        if self.state is None:
            h, w = signals.on.shape
            self.state = DualDynamics.zeros(h, w, dtype=signals.on.dtype)
        self.state = medulla_step(signals, self.state, self.medulla)
        npix = signals.on.size
        self.op_counts["medulla_updates"] += 2 * npix
        locate = lobula_locate(self.state)
        self.op_counts["locate_correlations"] += npix
        code = ldfc_encode(self.state, self.ldfc)
        self.op_counts["ldfc_divisions"] += npix
        field = direction_decode(code, locate, self.ldfc)
        return self._finish(locate, field)

    def _finish(self, locate: np.ndarray, field: DirectionField) -> FrameResult:
        return FrameResult(locate, field)


class StmdNetFDetector(StmdNetDetector):
    """StmdNetDetector with delayed blurred self-subtraction on the locating
    output; the orienting branch is untouched."""

    name = "stmdnet-f"

    def __init__(self, *args, feedback: FeedbackConfig | None = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.feedback = feedback or FeedbackConfig()
        self.fb_ring = FrameRing(self.feedback.fb_delay)

    def _finish(self, locate: np.ndarray, field: DirectionField) -> FrameResult:
        out = feedback_apply(locate, self.fb_ring, self.feedback)
        self.op_counts["feedback_updates"] += locate.size
        self.fb_ring.push(self.frames_seen - 1, out)
        return FrameResult(out, field)
