"""Core grid containers and stateless 2D operations shared by every stage.

Grids are plain numpy arrays (row-major; float32 in the pipeline, float64
in test oracles). Temporal history lives in FrameRing. All functions here
are pure; grids are treated as immutable once produced.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d


class WarmUpError(RuntimeError):
    """A temporal operator was asked for more history than has been stored.

    Callers treat this as "output is all zero" during pipeline warm-up.
    """


@dataclass(frozen=True)
class Kernel1D:
    """Odd-length 1D filter, centered at index ``radius``."""

    radius: int
    taps: np.ndarray

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if self.radius < 0:
            raise ValueError(f"kernel radius must be >= 0, got {self.radius}")
        if taps.ndim != 1 or taps.size != 2 * self.radius + 1:
            raise ValueError(
                f"kernel taps must have length 2*radius+1 = {2 * self.radius + 1}, "
                f"got {taps.size}"
            )
        object.__setattr__(self, "taps", taps)


@dataclass(frozen=True)
class OnOffSignals:
    """Non-negative brightness-increase (on) and -decrease (off) channels."""

    on: np.ndarray
    off: np.ndarray


@dataclass(frozen=True)
class DirectionField:
    """Per-pixel motion direction decoded from a response field.

    angle is in [0, 2*pi), measured from +x toward +y (row-down image
    coordinates); magnitude is exactly 0 wherever defined_mask is False.
    """

    angle: np.ndarray
    magnitude: np.ndarray
    defined_mask: np.ndarray

    def direction_at(self, x: int, y: int) -> float | None:
        if not self.defined_mask[y, x]:
            return None
        return float(self.angle[y, x])


@dataclass(frozen=True)
class FrameResult:
    """One detector step: a response grid plus an optional direction field."""

    response: np.ndarray
    direction: DirectionField | None = None


def gaussian_kernel(sigma: float, radius: int) -> Kernel1D:
    """Unit-sum Gaussian taps exp(-i^2 / 2*sigma^2) for i in [-radius, radius]."""
    if sigma <= 0:
        raise ValueError(f"gaussian sigma must be positive, got {sigma}")
    if radius < 1:
        raise ValueError(f"gaussian radius must be >= 1, got {radius}")
    i = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-(i * i) / (2.0 * sigma * sigma))
    return Kernel1D(radius, taps / taps.sum())


def delta_kernel() -> Kernel1D:
    return Kernel1D(0, np.ones(1))


def convolve_separable(grid: np.ndarray, kx: Kernel1D, ky: Kernel1D) -> np.ndarray:
    """Convolve with the outer product ky (x) kx, borders edge-replicated.

    out(y, x) = sum_{j,i} ky[j+ry]*kx[i+rx] * grid(clamp(y-j), clamp(x-i)).
    Accumulation happens in 64-bit; the output keeps the input dtype.
    """
    h, w = grid.shape
    if kx.taps.size > w or ky.taps.size > h:
        raise ValueError(
            f"kernel ({ky.taps.size}x{kx.taps.size}) wider than grid ({h}x{w})"
        )
    out = convolve1d(grid, kx.taps, axis=1, mode="nearest")
    return convolve1d(out, ky.taps, axis=0, mode="nearest")


def rectify_pair(grid: np.ndarray) -> OnOffSignals:
    """Half-wave rectify into ON = [grid]+ and OFF = [-grid]+.

    ON - OFF reconstructs the input exactly; ON*OFF is 0 at every pixel.
    """
    return OnOffSignals(on=np.maximum(grid, 0), off=np.maximum(-grid, 0))


def sample_shifted(grid: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Sample grid at (x+dx, y+dy); out-of-bounds positions read as 0."""
    h, w = grid.shape
    y0, y1 = max(0, -dy), min(h, h - dy)
    x0, x1 = max(0, -dx), min(w, w - dx)
    out = np.zeros_like(grid)
    if y0 < y1 and x0 < x1:
        out[y0:y1, x0:x1] = grid[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
    return out


class FrameRing:
    """Bounded history of (frame_index, payload) pairs, newest last.

    Push indices must be strictly increasing. Delayed queries past the
    stored depth raise WarmUpError; callers treat that as an all-zero
    response while the pipeline warms up.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"ring capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._entries: deque = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def depth(self) -> int:
        return len(self._entries)

    def push(self, index: int, payload) -> None:
        if self._entries and index <= self._entries[-1][0]:
            raise ValueError(
                f"frame indices must increase: got {index} after {self._entries[-1][0]}"
            )
        self._entries.append((index, payload))

    def newest_index(self) -> int:
        if not self._entries:
            raise WarmUpError("ring is empty")
        return self._entries[-1][0]

    def delayed(self, delay: int):
        """Payload pushed ``delay`` steps before the newest one."""
        if delay < 0:
            raise ValueError(f"delay must be >= 0, got {delay}")
        if delay >= len(self._entries):
            raise WarmUpError(
                f"delay {delay} exceeds stored depth {len(self._entries)}"
            )
        return self._entries[-1 - delay][1]

    def indices(self) -> list[int]:
        return [i for i, _ in self._entries]


def wrap_angle(theta: float | np.ndarray):
    """Map an angle in radians onto [0, 2*pi)."""
    return np.mod(theta, 2.0 * math.pi)
