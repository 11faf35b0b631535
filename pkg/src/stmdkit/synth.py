"""Deterministic synthetic benchmark sequences.

A periodic textured background (random-width stripes or octave-filtered
value noise) pans with wraparound while a small solid rectangle follows a
linear or circular path, composited at subpixel positions via exact area
coverage. Ground truth is emitted per frame. Sequences round-trip through
8-bit PGM files plus a line-delimited track file.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import convolve1d

from .grid import gaussian_kernel


@dataclass(frozen=True)
class TrackPoint:
    """Ground truth for one frame: subpixel center, velocity and heading."""

    frame_index: int
    x: float
    y: float
    vx: float
    vy: float
    heading: float


@dataclass(frozen=True)
class LinearPath:
    start: tuple[float, float]
    velocity: tuple[float, float]


@dataclass(frozen=True)
class CircularPath:
    center: tuple[float, float]
    radius: float
    angular_speed: float
    phase: float = 0.0


@dataclass(frozen=True)
class SynthConfig:
    width: int = 470
    height: int = 310
    frames: int = 300
    seed: int = 0
    bg_velocity: tuple[float, float] = (0.25, 0.0)
    bg_texture: str = "stripes"
    target_size: tuple[float, float] = (5.0, 5.0)
    target_luminance: float = 0.1
    bg_mean_luminance: float = 0.55
    path: LinearPath | CircularPath = LinearPath((40.0, 155.0), (1.0, 0.0))
    base_rate_hz: float = 1000.0

    def __post_init__(self):
        if self.bg_texture not in ("stripes", "filtered_noise"):
            raise ValueError(f"unknown bg_texture {self.bg_texture!r}")
        if not (0.0 <= self.target_luminance <= 1.0):
            raise ValueError("target_luminance must be in [0, 1]")
        if not (0.0 <= self.bg_mean_luminance <= 1.0):
            raise ValueError("bg_mean_luminance must be in [0, 1]")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if min(self.target_size) <= 0:
            raise ValueError("target_size must be positive")


def make_track(cfg: SynthConfig) -> list[TrackPoint]:
    """Exact per-frame centers, velocities and headings for the target path.

    Velocity is the per-frame displacement for linear paths and the
    instantaneous tangent for circular ones; heading = atan2(vy, vx), which
    for a circular path equals phase + omega*n + pi/2 (omega > 0).
    """
    points = []
    path = cfg.path
    for n in range(cfg.frames):
        if isinstance(path, LinearPath):
            x = path.start[0] + n * path.velocity[0]
            y = path.start[1] + n * path.velocity[1]
            vx, vy = path.velocity
        else:
            theta = path.phase + n * path.angular_speed
            x = path.center[0] + path.radius * math.cos(theta)
            y = path.center[1] + path.radius * math.sin(theta)
            vx = -path.radius * path.angular_speed * math.sin(theta)
            vy = path.radius * path.angular_speed * math.cos(theta)
        heading = math.atan2(vy, vx) % (2.0 * math.pi)
        points.append(TrackPoint(n, x, y, vx, vy, heading))
    return points


def _validate_in_frame(cfg: SynthConfig, track: list[TrackPoint]) -> None:
    tw, th = cfg.target_size
    for p in track:
        if (
            p.x - tw / 2 < 0
            or p.x + tw / 2 > cfg.width
            or p.y - th / 2 < 0
            or p.y + th / 2 > cfg.height
        ):
            raise ValueError(
                f"target leaves the frame at frame {p.frame_index}: "
                f"center=({p.x:.2f}, {p.y:.2f}), size=({tw}, {th}), "
                f"frame={cfg.width}x{cfg.height}"
            )


def _periodic_blur(field: np.ndarray, sigma: float) -> np.ndarray:
    k = gaussian_kernel(sigma, int(math.ceil(3 * sigma)))
    out = convolve1d(field, k.taps, axis=1, mode="wrap")
    return convolve1d(out, k.taps, axis=0, mode="wrap")


def build_panorama(cfg: SynthConfig) -> np.ndarray:
    """Seeded periodic background texture, frame-sized, values in [0, 1]."""
    rng = np.random.default_rng(cfg.seed)
    h, w = cfg.height, cfg.width
    if cfg.bg_texture == "stripes":
        row = np.empty(w, dtype=np.float64)
        x = 0
        while x < w:
            width = int(rng.integers(2, 10))
            lum = cfg.bg_mean_luminance + rng.uniform(-0.25, 0.25)
            row[x : x + width] = lum
            x += width
        pano = np.broadcast_to(row, (h, w)).copy()
    else:
        pano = np.zeros((h, w), dtype=np.float64)
        for sigma, weight in ((2.0, 1.0), (4.0, 0.7), (8.0, 0.5)):
            pano += weight * _periodic_blur(rng.standard_normal((h, w)), sigma)
        std = pano.std()
        if std > 0:
            pano = cfg.bg_mean_luminance + 0.18 * (pano - pano.mean()) / std
    return np.clip(pano, 0.0, 1.0).astype(np.float32)


def _wrap_sample(pano: np.ndarray, ox: float, oy: float) -> np.ndarray:
    """Bilinear sample of the periodic panorama shifted by (ox, oy)."""
    h, w = pano.shape
    x0 = math.floor(ox)
    y0 = math.floor(oy)
    fx = np.float32(ox - x0)
    fy = np.float32(oy - y0)
    a = np.roll(pano, (-y0, -x0), axis=(0, 1))
    b = np.roll(a, -1, axis=1)
    c = np.roll(a, -1, axis=0)
    d = np.roll(c, -1, axis=1)
    one = np.float32(1.0)
    return (
        a * (one - fx) * (one - fy)
        + b * fx * (one - fy)
        + c * (one - fx) * fy
        + d * fx * fy
    )


def _coverage(lo: float, hi: float, n: int) -> np.ndarray:
    """Per-cell overlap of the interval [lo, hi] with unit cells [i, i+1)."""
    idx = np.arange(n, dtype=np.float64)
    return np.clip(np.minimum(hi, idx + 1.0) - np.maximum(lo, idx), 0.0, 1.0)


def render_frame(cfg: SynthConfig, pano: np.ndarray, point: TrackPoint) -> np.ndarray:
    """Composite the target over the panned background for one track point."""
    n = point.frame_index
    bg = _wrap_sample(pano, cfg.bg_velocity[0] * n, cfg.bg_velocity[1] * n)
    tw, th = cfg.target_size
    cov_x = _coverage(point.x - tw / 2, point.x + tw / 2, cfg.width)
    cov_y = _coverage(point.y - th / 2, point.y + th / 2, cfg.height)
    cov = np.outer(cov_y, cov_x).astype(np.float32)
    frame = bg * (1.0 - cov) + np.float32(cfg.target_luminance) * cov
    # float32 bilinear weights can overshoot [0, 1] by an ulp
    return np.clip(frame, 0.0, 1.0).astype(np.float32)


def generate_sequence(cfg: SynthConfig) -> tuple[list[np.ndarray], list[TrackPoint]]:
    """Render the whole sequence; bit-identical for a fixed config."""
    track = make_track(cfg)
    _validate_in_frame(cfg, track)
    pano = build_panorama(cfg)
    frames = [render_frame(cfg, pano, p) for p in track]
    return frames, track


def downsample_rate(
    frames: list[np.ndarray], track: list[TrackPoint], factor: int
) -> tuple[list[np.ndarray], list[TrackPoint]]:
    """Keep every factor-th frame; velocities scale up by the factor."""
    if factor < 1:
        raise ValueError(f"downsample factor must be >= 1, got {factor}")
    if factor >= len(frames):
        raise ValueError(
            f"downsample factor {factor} >= sequence length {len(frames)}"
        )
    frames2 = frames[::factor]
    track2 = [
        replace(p, frame_index=i, vx=p.vx * factor, vy=p.vy * factor)
        for i, p in enumerate(track[::factor])
    ]
    return frames2, track2


# ---------------------------------------------------------------------------
# File formats: 8-bit grayscale PGM frames and a plain-text track file.

def write_pgm(path: str, grid: np.ndarray) -> None:
    data = np.clip(np.rint(grid * 255.0), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    if magic == b"P5":
        data = np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=pos + 1)
    elif magic == b"P2":
        data = np.array(raw[pos:].split()[: w * h], dtype=np.uint8)
    else:
        raise ValueError(f"{path}: not a PGM file (magic {magic!r})")
    return (data.reshape(h, w).astype(np.float32)) / np.float32(255.0)


def read_frame(path: str) -> np.ndarray:
    """Load one frame as float32 luminance in [0, 1]; PGM native, PNG via PIL."""
    if path.lower().endswith(".pgm"):
        return read_pgm(path)
    from PIL import Image

    with Image.open(path) as img:
        data = np.asarray(img.convert("L"), dtype=np.float32)
    return data / np.float32(255.0)


def write_sequence(dirpath: str, frames: list[np.ndarray]) -> list[str]:
    os.makedirs(dirpath, exist_ok=True)
    paths = []
    for i, frame in enumerate(frames):
        p = os.path.join(dirpath, f"frame_{i:06d}.pgm")
        write_pgm(p, frame)
        paths.append(p)
    return paths


TRACK_HEADER = "# frame x y vx vy heading_radians"


def write_track(path: str, track: list[TrackPoint]) -> None:
    with open(path, "w") as f:
        f.write(TRACK_HEADER + "\n")
        for p in track:
            f.write(
                f"{p.frame_index} {p.x:.9f} {p.y:.9f} "
                f"{p.vx:.9f} {p.vy:.9f} {p.heading:.9f}\n"
            )


def read_track(path: str) -> list[TrackPoint]:
    points = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ValueError(f"{path}: malformed track line {line!r}")
            points.append(
                TrackPoint(
                    int(parts[0]),
                    float(parts[1]),
                    float(parts[2]),
                    float(parts[3]),
                    float(parts[4]),
                    float(parts[5]),
                )
            )
    return points
