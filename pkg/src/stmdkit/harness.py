"""Drive detectors over frame sequences and score them against tracks.

The run loop streams: each frame is stepped through the detector, positive
local maxima are extracted once (threshold 0, NMS, top_k), directions are
sampled from the detector's direction field, and the per-frame detection
lists are kept instead of the full response grids. The threshold sweep for
recall/FPPI/F1 then filters those scored detections.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .classical import DstmdConfig, DstmdDetector, EmdConfig, EmdDetector, EstmdDetector
from .dualdyn import (
    FeedbackConfig,
    LdfcConfig,
    MedullaConfig,
    StmdNetDetector,
    StmdNetFDetector,
)
from .frontend import LaminaConfig, RetinaConfig
from .metrics import (
    Detection,
    MatchingConfig,
    MetricsReport,
    average_precision,
    angular_error,
    closest_match,
    extract_detections,
    f1_best,
    match_frame,
    precision_recall_f1,
    quantile_thresholds,
    recall_fppi_auc,
)
from .synth import TrackPoint

DETECTOR_NAMES = ("hr", "bl", "hrbl", "estmd", "dstmd", "stmdnet", "stmdnet-f")


def build_detector(name: str, cfg: dict):
    """Instantiate a detector by CLI name from a nested config mapping."""
    retina = RetinaConfig(**cfg.get("retina", {}))
    if name in ("hr", "bl", "hrbl"):
        emd = _emd_config(cfg.get("emd", {}))
        return EmdDetector(name, retina, emd)
    lamina_cfg = dict(cfg.get("lamina", {}))
    if name == "estmd":
        lamina = LaminaConfig(**{"mode": "plain_diff", **lamina_cfg})
        return EstmdDetector(retina, lamina, tau=int(cfg.get("estmd", {}).get("tau", 4)))
    if name == "dstmd":
        lamina = LaminaConfig(**{"mode": "plain_diff", **lamina_cfg})
        return DstmdDetector(retina, lamina, DstmdConfig(**cfg.get("dstmd", {})))
    if name == "stmdnet":
        lamina = LaminaConfig(**{"mode": "fractional", **lamina_cfg})
        return StmdNetDetector(
            retina,
            lamina,
            MedullaConfig(**cfg.get("medulla", {})),
            LdfcConfig(**cfg.get("ldfc", {})),
        )
    if name == "stmdnet-f":
        lamina = LaminaConfig(**{"mode": "fractional", **lamina_cfg})
        return StmdNetFDetector(
            retina,
            lamina,
            MedullaConfig(**cfg.get("medulla", {})),
            LdfcConfig(**cfg.get("ldfc", {})),
            feedback=FeedbackConfig(**cfg.get("feedback", {})),
        )
    raise ValueError(f"unknown detector {name!r}; expected one of {DETECTOR_NAMES}")


def _emd_config(section: dict) -> EmdConfig:
    kwargs = dict(section)
    for key in ("offset", "second_offset"):
        if key in kwargs:
            kwargs[key] = tuple(int(v) for v in kwargs[key])
    return EmdConfig(**kwargs)


@dataclass
class RunResult:
    """Per-frame detections (empty during warm-up) plus run bookkeeping."""

    detections: list[list[Detection]]
    warmup_frames: int
    frames_processed: int
    op_counts: dict[str, int]
    wall_seconds: float = 0.0

    def all_detections(self) -> list[Detection]:
        return [d for frame in self.detections for d in frame]


def run_sequence(detector, frames: list[np.ndarray], matching: MatchingConfig) -> RunResult:
    """Step the detector over the frames and extract scored detections."""
    per_frame: list[list[Detection]] = []
    warmup = detector.warmup_frames
    t0 = time.perf_counter()
    for i, frame in enumerate(frames):
        result = detector.step(frame)
        if i < warmup:
            per_frame.append([])
            continue
        dets = extract_detections(result.response, 0.0, matching, frame_index=i)
        if result.direction is not None:
            dets = [
                Detection(
                    d.frame_index,
                    d.x,
                    d.y,
                    d.score,
                    result.direction.direction_at(int(d.x), int(d.y)),
                )
                for d in dets
            ]
        per_frame.append(dets)
    wall = time.perf_counter() - t0
    return RunResult(
        detections=per_frame,
        warmup_frames=warmup,
        frames_processed=len(frames),
        op_counts=dict(detector.op_counts),
        wall_seconds=wall,
    )


def score_run(
    run: RunResult,
    track: list[TrackPoint],
    matching: MatchingConfig,
) -> MetricsReport:
    """Metrics over the post-warm-up frames of one single-target sequence."""
    if len(track) != len(run.detections):
        raise ValueError(
            f"track length {len(track)} != detection frames {len(run.detections)}"
        )
    start = min(run.warmup_frames, len(track))
    dets_per_frame = run.detections[start:]
    truth = track[start:]
    n_frames = len(truth)
    if n_frames == 0:
        raise ValueError("no frames left after warm-up")

    peaks = [max((d.score for d in dets), default=0.0) for dets in dets_per_frame]
    thresholds = quantile_thresholds(peaks, matching.threshold_count)
    counts = []
    for tau in thresholds:
        tp = fp = fn = 0
        for dets, point in zip(dets_per_frame, truth):
            kept = [d for d in dets if d.score >= tau]
            t, f, n = match_frame(kept, point, matching)
            tp += t
            fp += f
            fn += n
        counts.append((tp, fp, fn))
    curve, auc = recall_fppi_auc(counts, n_frames, matching.fppi_max)
    f1 = f1_best(counts)
    ap = average_precision(dets_per_frame, truth, matching)

    # angular error is read at the best-F1 operating point, i.e. over the
    # true positives a user would actually act on
    best_idx = max(
        range(len(counts)), key=lambda i: precision_recall_f1(*counts[i])
    )
    best_tau = thresholds[best_idx]
    pairs = []
    for dets, point in zip(dets_per_frame, truth):
        kept = [d for d in dets if d.score >= best_tau]
        matched = closest_match(kept, point, matching)
        if matched is not None and kept[matched].direction is not None:
            pairs.append((kept[matched].direction, point.heading))
    mean_err, median_err = angular_error(pairs) if pairs else (None, None)

    evaluated = max(run.frames_processed - run.warmup_frames, 1)
    per_frame_ops = {k: v / evaluated for k, v in run.op_counts.items()}
    return MetricsReport(
        auc=auc,
        ap=ap,
        f1=f1,
        mean_angular_error=mean_err,
        median_angular_error=median_err,
        time_per_frame_ms=1000.0 * run.wall_seconds / max(run.frames_processed, 1),
        op_counts=per_frame_ops,
        curve=curve,
        frames_evaluated=n_frames,
        fppi_max=matching.fppi_max,
    )


def evaluate_detector(
    name: str,
    cfg: dict,
    frames: list[np.ndarray],
    track: list[TrackPoint],
    matching: MatchingConfig | None = None,
) -> MetricsReport:
    """Build, run and score one detector on an in-memory sequence."""
    matching = matching or MatchingConfig(**cfg.get("matching", {}))
    det = build_detector(name, cfg)
    run = run_sequence(det, frames, matching)
    return score_run(run, track, matching)


def fppi_at_recall(curve: list[tuple[float, float]], recall_target: float) -> float:
    """Smallest observed FPPI whose recall reaches the target (inf if never)."""
    best = math.inf
    for fppi, recall in curve:
        if recall >= recall_target:
            best = min(best, fppi)
    return best
