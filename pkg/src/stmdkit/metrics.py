"""Detection extraction, ground-truth matching and metric computation.

Responses become point detections via local maxima plus greedy NMS; a
detection within match_radius of the single ground-truth center is a true
positive (closest wins). Quality is summarized as the AUC of the
recall-FPPI curve over [0, fppi_max], average precision, best F1 over the
threshold sweep, and the mean wrapped angular error of directed TPs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter

from .grid import wrap_angle
from .synth import TrackPoint

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Detection:
    frame_index: int
    x: float
    y: float
    score: float
    direction: float | None = None


@dataclass(frozen=True)
class MatchingConfig:
    match_radius: float = 5.0
    nms_radius: float = 5.0
    threshold_count: int = 50
    fppi_max: float = 5.0
    top_k: int = 64

    def __post_init__(self):
        if self.match_radius < 1 or self.nms_radius < 1:
            raise ValueError("matching radii must be >= 1 pixel")
        if self.threshold_count < 2:
            raise ValueError("threshold_count must be >= 2")
        if self.fppi_max <= 0:
            raise ValueError("fppi_max must be positive")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass
class MetricsReport:
    auc: float
    ap: float
    f1: float
    mean_angular_error: float | None
    median_angular_error: float | None
    time_per_frame_ms: float
    op_counts: dict[str, float]
    curve: list[tuple[float, float]]
    frames_evaluated: int = 0
    fppi_max: float = 5.0
    extra: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [
            f"frames_evaluated: {self.frames_evaluated}",
            f"fppi_max: {self.fppi_max}",
            f"auc: {self.auc:.6f}",
            f"ap: {self.ap:.6f}",
            f"f1: {self.f1:.6f}",
        ]
        if self.mean_angular_error is not None:
            lines.append(f"mean_angular_error_deg: {math.degrees(self.mean_angular_error):.3f}")
            lines.append(f"median_angular_error_deg: {math.degrees(self.median_angular_error):.3f}")
        lines.append(f"time_per_frame_ms: {self.time_per_frame_ms:.4f}")
        for stage, count in sorted(self.op_counts.items()):
            lines.append(f"ops.{stage}: {count:.1f}")
        for key, value in sorted(self.extra.items()):
            lines.append(f"{key}: {value}")
        lines.append("curve (fppi, recall):")
        for fppi, recall in self.curve:
            lines.append(f"  {fppi:.6f} {recall:.6f}")
        return "\n".join(lines) + "\n"

    def curve_csv_rows(self) -> list[str]:
        rows = ["fppi,recall"]
        rows += [f"{fppi:.9f},{recall:.9f}" for fppi, recall in self.curve]
        return rows


def extract_detections(
    response: np.ndarray,
    threshold: float,
    cfg: MatchingConfig,
    frame_index: int = 0,
) -> list[Detection]:
    """Positive local maxima >= threshold, greedily NMS-pruned.

    Candidates are visited by descending score (ties row-major) and kept if
    no stronger accepted detection lies within nms_radius; at most top_k
    detections are returned.
    """
    if not np.all(np.isfinite(response)):
        raise ValueError("response grid contains non-finite values")
    peaks = maximum_filter(response, size=3, mode="constant", cval=-np.inf)
    mask = (response >= peaks) & (response >= threshold) & (response > 0)
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return []
    scores = response[ys, xs]
    order = np.lexsort((xs, ys, -scores.astype(np.float64)))
    kept_y: list[float] = []
    kept_x: list[float] = []
    out: list[Detection] = []
    r2 = cfg.nms_radius * cfg.nms_radius
    for i in order:
        y, x = float(ys[i]), float(xs[i])
        if kept_y:
            dy = np.asarray(kept_y) - y
            dx = np.asarray(kept_x) - x
            if np.any(dy * dy + dx * dx <= r2):
                continue
        kept_y.append(y)
        kept_x.append(x)
        out.append(Detection(frame_index, x, y, float(scores[i])))
        if len(out) >= cfg.top_k:
            break
    return out


def closest_match(dets: list[Detection], truth: TrackPoint, cfg: MatchingConfig) -> int | None:
    """Index of the detection matched to the single truth, or None."""
    best = None
    best_d2 = cfg.match_radius * cfg.match_radius
    for i, d in enumerate(dets):
        d2 = (d.x - truth.x) ** 2 + (d.y - truth.y) ** 2
        if d2 <= best_d2:
            best = i
            best_d2 = d2
    return best


def match_frame(
    dets: list[Detection], truth: TrackPoint, cfg: MatchingConfig
) -> tuple[int, int, int]:
    """(tp, fp, fn) for one frame with a single ground-truth target."""
    matched = closest_match(dets, truth, cfg)
    tp = 1 if matched is not None else 0
    return tp, len(dets) - tp, 1 - tp


def recall_fppi_auc(
    counts: list[tuple[int, int, int]], n_frames: int, fppi_max: float
) -> tuple[list[tuple[float, float]], float]:
    """Recall-over-FPPI curve and its normalized area on [0, fppi_max].

    Recall is 0 below the lowest observed FPPI, linearly interpolated
    between points, and held flat beyond the highest one; the trapezoidal
    integral is divided by fppi_max.
    """
    if not counts:
        raise ValueError("empty threshold sweep")
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    pts = []
    for tp, fp, fn in counts:
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        pts.append((fp / n_frames, recall))
    pts.sort()
    curve = pts
    # collapse duplicate fppi values to their max recall for integration
    uniq: dict[float, float] = {}
    for fppi, recall in pts:
        uniq[fppi] = max(uniq.get(fppi, 0.0), recall)
    xs = np.array(sorted(uniq.keys()), dtype=np.float64)
    rs = np.array([uniq[x] for x in xs], dtype=np.float64)
    grid = np.unique(np.concatenate([xs, [0.0, fppi_max]]))
    grid = grid[(grid >= 0.0) & (grid <= fppi_max)]
    vals = np.interp(grid, xs, rs, left=0.0, right=rs[-1])
    auc = float(np.trapezoid(vals, grid) / fppi_max)
    return curve, auc


def precision_recall_f1(tp: int, fp: int, fn: int) -> float:
    p = tp / (tp + fp) if tp + fp > 0 else 0.0
    r = tp / (tp + fn) if tp + fn > 0 else 0.0
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def f1_best(counts: list[tuple[int, int, int]]) -> float:
    """Max F1 over the threshold sweep."""
    if not counts:
        return 0.0
    return max(precision_recall_f1(*c) for c in counts)


def average_precision(
    dets_per_frame: list[list[Detection]],
    truth: list[TrackPoint],
    cfg: MatchingConfig,
) -> float:
    """Step-sum AP over all detections sorted by descending score."""
    if not truth:
        raise ValueError("no ground-truth instances")
    labeled: list[tuple[float, bool]] = []
    for dets, point in zip(dets_per_frame, truth):
        matched = closest_match(dets, point, cfg)
        for i, d in enumerate(dets):
            labeled.append((d.score, i == matched))
    labeled.sort(key=lambda t: -t[0])
    ap = 0.0
    tp = 0
    prev_recall = 0.0
    for rank, (_, is_tp) in enumerate(labeled, start=1):
        if is_tp:
            tp += 1
            recall = tp / len(truth)
            ap += (recall - prev_recall) * (tp / rank)
            prev_recall = recall
    return ap


def angular_error(
    pairs: list[tuple[float, float]]
) -> tuple[float, float]:
    """Mean and median wrapped |angle - heading| over matched detections."""
    if not pairs:
        raise ValueError("no directed true positives")
    errs = []
    for angle, heading in pairs:
        diff = abs(float(wrap_angle(angle - heading)))
        errs.append(min(diff, TWO_PI - diff))
    arr = np.array(errs)
    return float(arr.mean()), float(np.median(arr))


def quantile_thresholds(per_frame_peaks: list[float], count: int) -> np.ndarray:
    """Threshold sweep: ``count`` quantiles of the per-frame peak scores."""
    peaks = np.asarray([p for p in per_frame_peaks if p > 0], dtype=np.float64)
    if peaks.size == 0:
        return np.zeros(1)
    return np.quantile(peaks, np.linspace(0.0, 1.0, count))


def timing_run(make_detector, frames: list[np.ndarray], skip: int = 10) -> float:
    """Mean wall-clock milliseconds per frame, first ``skip`` frames excluded.

    Frames must already be in memory; the detector runs on one thread.
    """
    if len(frames) < max(skip + 1, 200):
        raise ValueError(f"timing needs >= 200 frames, got {len(frames)}")
    det = make_detector()
    elapsed = []
    for frame in frames:
        t0 = time.perf_counter()
        det.step(frame)
        elapsed.append(time.perf_counter() - t0)
    return float(np.mean(elapsed[skip:]) * 1000.0)
