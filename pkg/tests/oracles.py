"""Independent 64-bit scalar oracles for the detector equations and filters.

Everything here is a deliberately naive per-pixel transliteration, kept
free of the package's vectorized code paths so the two can check each
other.
"""

import numpy as np


def sample(grid, x, y):
    """Read grid[y][x] with zero outside the bounds."""
    h, w = grid.shape
    if 0 <= y < h and 0 <= x < w:
        return float(grid[y, x])
    return 0.0


def oracle_hr(seq, t, tau, offset):
    cur = np.asarray(seq[t], dtype=np.float64)
    past = np.asarray(seq[t - tau], dtype=np.float64)
    h, w = cur.shape
    dx, dy = offset
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = sample(past, x + dx, y + dy) * cur[y, x]
    return out


def oracle_bl(seq, t, tau, offset, guard):
    cur = np.asarray(seq[t], dtype=np.float64)
    past = np.asarray(seq[t - tau], dtype=np.float64)
    h, w = cur.shape
    dx, dy = offset
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = cur[y, x] / (sample(past, x + dx, y + dy) + guard)
    return out


def oracle_hrbl(seq, t, tau1, off1, tau2, off2, guard):
    cur = np.asarray(seq[t], dtype=np.float64)
    past1 = np.asarray(seq[t - tau1], dtype=np.float64)
    past2 = np.asarray(seq[t - tau2], dtype=np.float64)
    h, w = cur.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            num = sample(past1, x + off1[0], y + off1[1]) * cur[y, x]
            out[y, x] = num / (sample(past2, x + off2[0], y + off2[1]) + guard)
    return out


def oracle_estmd(on_seq, off_seq, t, tau):
    on = np.asarray(on_seq[t], dtype=np.float64)
    off = np.asarray(off_seq[t - tau], dtype=np.float64)
    h, w = on.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = on[y, x] * off[y, x]
    return out


def oracle_dstmd(on_seq, off_seq, t, directions, alpha, tau1, tau3, tau):
    """Stack of directional responses, one 2D slice per angle."""
    on_now = np.asarray(on_seq[t], dtype=np.float64)
    on_1 = np.asarray(on_seq[t - tau1], dtype=np.float64)
    off_3 = np.asarray(off_seq[t - tau3], dtype=np.float64)
    off_t = np.asarray(off_seq[t - tau], dtype=np.float64)
    h, w = on_now.shape
    out = np.zeros((directions, h, w))
    for k in range(directions):
        theta = 2.0 * np.pi * k / directions
        dx = int(np.rint(alpha * np.cos(theta)))
        dy = int(np.rint(alpha * np.sin(theta)))
        for y in range(h):
            for x in range(w):
                out[k, y, x] = (
                    on_now[y, x]
                    * sample(off_3, x + dx, y + dy)
                    * (on_1[y, x] + sample(off_t, x + dx, y + dy))
                )
    return out


def conv2d_replicated(grid, kx_taps, ky_taps):
    """Direct 2D convolution with the outer-product kernel, edges clamped."""
    grid = np.asarray(grid, dtype=np.float64)
    h, w = grid.shape
    rx = (len(kx_taps) - 1) // 2
    ry = (len(ky_taps) - 1) // 2
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for j in range(-ry, ry + 1):
                for i in range(-rx, rx + 1):
                    yy = min(max(y - j, 0), h - 1)
                    xx = min(max(x - i, 0), w - 1)
                    acc += ky_taps[j + ry] * kx_taps[i + rx] * grid[yy, xx]
            out[y, x] = acc
    return out


def trapezoid_auc(points, fppi_max):
    """Scalar recall-over-FPPI integral: 0 before the first point, linear
    between unique points (max recall per FPPI), flat after the last."""
    env = {}
    for fppi, recall in points:
        env[fppi] = max(env.get(fppi, 0.0), recall)
    xs = sorted(env)
    def recall_at(f):
        if f < xs[0]:
            return 0.0
        if f >= xs[-1]:
            return env[xs[-1]]
        for a, b in zip(xs, xs[1:]):
            if a <= f <= b:
                t = 0.0 if b == a else (f - a) / (b - a)
                return env[a] + t * (env[b] - env[a])
        raise AssertionError
    knots = sorted({0.0, fppi_max, *[x for x in xs if 0.0 <= x <= fppi_max]})
    area = 0.0
    for a, b in zip(knots, knots[1:]):
        area += 0.5 * (recall_at(a) + recall_at(b)) * (b - a)
    return area / fppi_max
