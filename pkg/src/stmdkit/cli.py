"""Command-line front door: stmd synth | detect | eval | sweep | bench.

Subcommands are deterministic given (config, seed) apart from wall-clock
timing fields; every output records the resolved config hash. File writes
go through a temp-file-then-rename step so partial outputs never appear.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench":
        # keep numeric libraries on one thread for reproducible timing
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = "1"
    try:
        return args.func(args)
    except Exception as exc:  # CLI boundary: report and signal failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stmd", description="Small-target motion detection toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override synth seed")
        p.add_argument("--threads", type=int, default=1, help="worker pool size")
        p.add_argument("--detector", default=None, help="detector name")

    p = sub.add_parser("synth", help="generate a synthetic sequence + track file")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect", help="run a detector over a frame directory")
    common(p)
    p.add_argument("--input", required=True, help="directory of PGM/PNG frames")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score a detections file against a track file")
    common(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--track", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run a factorial parameter sweep to CSV")
    common(p)
    p.add_argument("--spec", required=True, help="YAML sweep specification")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="single-thread timing and op-count report")
    common(p)
    p.add_argument("--frames", type=int, default=250, help="frames to time")
    p.add_argument("--width", type=int, default=480)
    p.add_argument("--height", type=int, default=270)
    p.set_defaults(func=cmd_bench)
    return parser


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def _load(args):
    from .configio import config_hash, load_config

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["synth"]["seed"] = args.seed
    if args.detector is not None:
        cfg["run"]["detector"] = args.detector
    return cfg, config_hash(cfg)


def cmd_synth(args) -> int:
    from .configio import synth_config_from
    from .synth import generate_sequence, write_sequence, write_track

    cfg, digest = _load(args)
    scfg = synth_config_from(cfg)
    frames, track = generate_sequence(scfg)
    os.makedirs(args.out, exist_ok=True)
    frame_dir = os.path.join(args.out, "frames")
    write_sequence(frame_dir, frames)
    write_track(os.path.join(args.out, "track.txt"), track)
    print(
        f"synth: wrote {len(frames)} frames ({scfg.width}x{scfg.height}) to "
        f"{frame_dir} seed={scfg.seed} config={digest}"
    )
    return 0


def _list_frames(directory: str) -> list[str]:
    names = sorted(
        n for n in os.listdir(directory) if n.lower().endswith((".pgm", ".png"))
    )
    if not names:
        raise ValueError(f"no PGM/PNG frames found in {directory}")
    return [os.path.join(directory, n) for n in names]


def cmd_detect(args) -> int:
    from .harness import build_detector, run_sequence
    from .metrics import MatchingConfig
    from .synth import read_frame

    cfg, digest = _load(args)
    paths = _list_frames(args.input)
    frames = []
    for p in paths:
        try:
            frames.append(read_frame(p))
        except Exception as exc:
            raise ValueError(f"unreadable frame {p}: {exc}") from exc
    name = cfg["run"]["detector"]
    detector = build_detector(name, cfg)
    matching = MatchingConfig(**cfg["matching"])
    run = run_sequence(detector, frames, matching)

    lines = [
        json.dumps(
            {
                "type": "header",
                "detector": name,
                "config_hash": digest,
                "warmup_frames": run.warmup_frames,
                "frames": run.frames_processed,
                "op_counts": run.op_counts,
            },
            sort_keys=True,
        )
    ]
    for dets in run.detections:
        for d in dets:
            direction = None if d.direction is None else math.degrees(d.direction)
            lines.append(
                json.dumps(
                    {
                        "frame": d.frame_index,
                        "x": d.x,
                        "y": d.y,
                        "score": d.score,
                        "direction_deg": direction,
                    },
                    sort_keys=True,
                )
            )
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "detections.jsonl")
    _atomic_write(out_path, "\n".join(lines) + "\n")
    print(
        f"detect: {name} produced {sum(len(d) for d in run.detections)} detections "
        f"over {run.frames_processed} frames -> {out_path} config={digest}"
    )
    return 0


def read_detections(path: str):
    """Parse a detections JSONL file into (header, per-frame detections)."""
    from .metrics import Detection

    header = None
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("type") == "header":
                header = obj
            else:
                rows.append(obj)
    if header is None:
        raise ValueError(f"{path}: missing header line")
    per_frame = [[] for _ in range(int(header["frames"]))]
    for obj in rows:
        direction = obj.get("direction_deg")
        per_frame[int(obj["frame"])].append(
            Detection(
                int(obj["frame"]),
                float(obj["x"]),
                float(obj["y"]),
                float(obj["score"]),
                None if direction is None else math.radians(direction),
            )
        )
    return header, per_frame


def cmd_eval(args) -> int:
    from .harness import RunResult, score_run
    from .metrics import MatchingConfig
    from .synth import read_track

    cfg, digest = _load(args)
    header, per_frame = read_detections(args.detections)
    track = read_track(args.track)
    if len(track) != len(per_frame):
        raise ValueError(
            f"frame-count mismatch: detections cover {len(per_frame)} frames, "
            f"track file has {len(track)}"
        )
    matching = MatchingConfig(**cfg["matching"])
    run = RunResult(
        detections=per_frame,
        warmup_frames=int(header["warmup_frames"]),
        frames_processed=len(per_frame),
        op_counts={k: int(v) for k, v in header.get("op_counts", {}).items()},
    )
    report = score_run(run, track, matching)
    os.makedirs(args.out, exist_ok=True)
    head = (
        f"detector: {header['detector']}\n"
        f"detections_config: {header['config_hash']}\n"
        f"eval_config: {digest}\n"
    )
    _atomic_write(os.path.join(args.out, "report.txt"), head + report.to_text())
    _atomic_write(
        os.path.join(args.out, "curve.csv"), "\n".join(report.curve_csv_rows()) + "\n"
    )
    print(
        f"eval: auc={report.auc:.4f} ap={report.ap:.4f} f1={report.f1:.4f} "
        f"-> {os.path.join(args.out, 'report.txt')}"
    )
    return 0


SWEEP_AXES = (
    "velocity",
    "target_size",
    "contrast",
    "rate_factor",
    "tau",
    "decay_g",
    "inhib_gain",
    "frac_order",
)


def build_sweep_cells(spec: dict, base_cfg: dict) -> list[dict]:
    """Expand a sweep spec into an ordered list of cell descriptors."""
    from itertools import product

    from .configio import ConfigError, _merge

    detectors = spec.get("detectors", [base_cfg["run"]["detector"]])
    axes = spec.get("axes", {})
    for axis in axes:
        if axis not in SWEEP_AXES:
            raise ConfigError(
                f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}"
            )
    cfg = json.loads(json.dumps(base_cfg))
    if "base" in spec:
        _merge(cfg, spec["base"])
    names = list(axes.keys())
    cells = []
    for det in detectors:
        for values in product(*(axes[n] for n in names)):
            cells.append(
                {
                    "detector": det,
                    "axes": dict(zip(names, values)),
                    "config": cfg,
                }
            )
    budget = int(spec.get("budget", 512))
    if len(cells) > budget:
        raise ConfigError(
            f"sweep grid has {len(cells)} cells, over the budget of {budget}"
        )
    return cells


def _apply_axes(cell: dict) -> tuple[dict, dict, int]:
    """Resolve one cell into (config, synth overrides applied, rate factor)."""
    cfg = json.loads(json.dumps(cell["config"]))
    axes = cell["axes"]
    factor = int(axes.get("rate_factor", 1))
    synth = cfg["synth"]
    if "velocity" in axes:
        v = float(axes["velocity"])
        radius = min(synth["width"], synth["height"]) / 2.0 - 25.0
        synth["path"] = {
            "kind": "circular",
            "center": [synth["width"] / 2.0, synth["height"] / 2.0],
            "radius": radius,
            "angular_speed": v / radius,
            "phase": 0.0,
        }
    if "target_size" in axes:
        s = float(axes["target_size"])
        synth["target_size"] = [s, s]
    if "contrast" in axes:
        c = float(axes["contrast"])
        synth["target_luminance"] = max(0.0, synth["bg_mean_luminance"] - c)
    if "tau" in axes:
        tau = int(axes["tau"])
        cfg["estmd"]["tau"] = tau
        cfg["dstmd"]["delay_tau"] = tau
        cfg["dstmd"]["tau3"] = tau
        cfg["emd"]["delay_tau"] = tau
    if "decay_g" in axes:
        cfg["medulla"]["decay_g"] = float(axes["decay_g"])
    if "inhib_gain" in axes:
        cfg["medulla"]["inhib_gain"] = float(axes["inhib_gain"])
    if "frac_order" in axes:
        cfg["lamina"]["frac_order"] = float(axes["frac_order"])
    return cfg, synth, factor


def _sweep_cell_worker(cell: dict) -> dict:
    from .configio import synth_config_from
    from .harness import evaluate_detector
    from .metrics import MatchingConfig
    from .synth import downsample_rate, generate_sequence

    cfg, _, factor = _apply_axes(cell)
    scfg = synth_config_from(cfg)
    frames, track = generate_sequence(scfg)
    if factor > 1:
        frames, track = downsample_rate(frames, track, factor)
    matching = MatchingConfig(**cfg["matching"])
    report = evaluate_detector(cell["detector"], cfg, frames, track, matching)
    row = {"detector": cell["detector"], "seed": scfg.seed}
    for axis in SWEEP_AXES:
        row[axis] = cell["axes"].get(axis, "")
    row.update(
        auc=f"{report.auc:.6f}",
        ap=f"{report.ap:.6f}",
        f1=f"{report.f1:.6f}",
        mean_angular_error_deg=(
            "" if report.mean_angular_error is None
            else f"{math.degrees(report.mean_angular_error):.3f}"
        ),
        time_per_frame_ms=f"{report.time_per_frame_ms:.4f}",
    )
    for stage in ("correlations", "directional_correlations",
                  "locate_correlations", "ldfc_divisions"):
        row[f"ops_{stage}"] = f"{report.op_counts.get(stage, 0):.1f}"
    return row


def cmd_sweep(args) -> int:
    import yaml

    cfg, digest = _load(args)
    with open(args.spec) as f:
        spec = yaml.safe_load(f) or {}
    cells = build_sweep_cells(spec, cfg)
    if args.threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(_sweep_cell_worker, cells))
    else:
        rows = [_sweep_cell_worker(c) for c in cells]
    columns = list(rows[0].keys()) if rows else []
    lines = [",".join(columns)]
    lines += [",".join(str(r[c]) for c in columns) for r in rows]
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "sweep.csv")
    _atomic_write(out_path, "\n".join(lines) + f"\n# config={digest}\n")
    print(f"sweep: {len(rows)} cells -> {out_path} config={digest}")
    return 0


def cmd_bench(args) -> int:
    from .configio import synth_config_from
    from .harness import build_detector
    from .metrics import timing_run
    from .synth import generate_sequence

    cfg, digest = _load(args)
    synth = dict(cfg["synth"])
    scfg = synth_config_from(
        {
            "synth": {
                **synth,
                "width": args.width,
                "height": args.height,
                "frames": max(args.frames, 200),
                "path": {
                    "kind": "circular",
                    "center": [args.width / 2.0, args.height / 2.0],
                    "radius": min(args.width, args.height) / 2.0 - 20.0,
                    "angular_speed": 0.02,
                    "phase": 0.0,
                },
            }
        }
    )
    frames, _ = generate_sequence(scfg)
    name = cfg["run"]["detector"]
    ms = timing_run(lambda: build_detector(name, cfg), frames)
    print(f"bench: {name} {args.width}x{args.height} {ms:.3f} ms/frame config={digest}")

    # correlation ledger: per-frame op counts after warm-up, tiny run
    counts = {}
    for ledger_name in ("stmdnet", "dstmd"):
        det = build_detector(ledger_name, cfg)
        for frame in frames[: det.warmup_frames + 1]:
            det.step(frame)
        det.reset_op_counts()
        for frame in frames[det.warmup_frames + 1 : det.warmup_frames + 4]:
            det.step(frame)
        counts[ledger_name] = {k: v // 3 for k, v in det.op_counts.items()}
    for ledger_name, ops in counts.items():
        for stage, per_frame in sorted(ops.items()):
            print(f"bench: ops {ledger_name}.{stage} = {per_frame} per frame")
    dstmd_corr = counts["dstmd"]["directional_correlations"]
    net_div = counts["stmdnet"]["ldfc_divisions"]
    print(
        f"bench: directional correlation ratio dstmd:stmdnet = "
        f"{dstmd_corr // net_div}:1"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
