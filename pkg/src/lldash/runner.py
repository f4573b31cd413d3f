"""Experiment matrix runner and command-line interface.

Expands (algorithms x targets x profiles x runs) into sessions, executes them
(optionally on a worker pool), and writes per-run and aggregate CSVs, optional
per-run event logs, and optional mode-0 QoE export files. Identical config and
base seed always produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .media import StreamTimeline, default_ladder
from .metrics import aggregate, compute_run_metrics
from .netmodel import LinkParams, NetworkProfile, load_profile, save_profile
from .player import ALGORITHMS, PlayerConfig, run_session
from .profiles import DEFAULT_DURATION_S, SHAPES, builtin_profile, generate_profile
from .qoe import export_p1203, mos_for_log
from .sessionlog import SessionLog

RUN_CSV_COLUMNS = [
    "scenario_id",
    "algorithm",
    "profile",
    "target_s",
    "seed",
    "mean_bitrate_kbps",
    "stall_count",
    "stall_s",
    "median_dev_s",
    "unique_segs",
    "total_segs",
    "rerequest_pct",
    "mos",
]

AGG_SCALARS = ["mean_bitrate_kbps", "stall_s", "stall_count", "median_dev_s", "rerequest_pct", "mos"]


class ExperimentError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    algorithms: list[str] = field(default_factory=lambda: ["dynamic", "l2a_original", "lolp"])
    targets_s: list[float] = field(default_factory=lambda: [3.0, 5.5, 8.0, 15.0])
    profiles: list[str] = field(default_factory=lambda: ["A", "B", "C", "D"])
    runs_per_scenario: int = 20
    base_seed: int = 1
    total_segments: int = 390
    rtt_s: float = 0.05
    profile_jitter_max_s: float | None = None  # None: widest window the trace allows
    player: dict = field(default_factory=dict)  # PlayerConfig field overrides

    def __post_init__(self) -> None:
        if self.runs_per_scenario < 1:
            raise ExperimentError("runs_per_scenario must be >= 1")
        if self.total_segments < 1:
            raise ExperimentError("total_segments must be >= 1")
        for t in self.targets_s:
            if t <= 0:
                raise ExperimentError(f"latency targets must be > 0, got {t}")
        for alg in self.algorithms:
            if alg not in ALGORITHMS:
                raise ExperimentError(
                    f"unknown algorithm {alg!r} in experiment config, expected one of {ALGORITHMS}"
                )

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ExperimentError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class SessionSpec:
    scenario_id: str
    algorithm: str
    profile: str
    target_s: float
    seed: int
    run_index: int


def scenario_id(algorithm: str, profile: str, target_s: float) -> str:
    prof = os.path.splitext(os.path.basename(profile))[0]
    return f"{algorithm}_{prof}_t{target_s:g}".replace(".", "p")


def expand(config: ExperimentConfig) -> list[SessionSpec]:
    """Deterministic cartesian expansion; per-run seed = base seed + run index."""
    specs = []
    for alg in config.algorithms:
        for target in config.targets_s:
            for prof in config.profiles:
                sid = scenario_id(alg, prof, target)
                for run in range(config.runs_per_scenario):
                    specs.append(
                        SessionSpec(sid, alg, prof, target, config.base_seed + run, run)
                    )
    return specs


def _resolve_profile(name: str) -> NetworkProfile:
    if name.upper() in SHAPES and not os.path.exists(name):
        return builtin_profile(name)
    return load_profile(name)


def run_one(spec: SessionSpec, config: ExperimentConfig) -> SessionLog:
    """Execute a single session.

    The seed drives only the profile start offset; the session itself is
    deterministic.
    """
    base = _resolve_profile(spec.profile)
    timeline = StreamTimeline(total_segments=config.total_segments)
    # wall span = join offset + startup + playback budget; leave slack so the
    # shifted trace still covers the whole session with its varied region
    needed = spec.target_s + timeline.media_end_s + 10.0
    if config.profile_jitter_max_s is not None:
        jitter_max = config.profile_jitter_max_s
    else:
        jitter_max = max(0.0, base.duration_s - needed)
    offset = random.Random(spec.seed).uniform(0.0, jitter_max) if jitter_max > 0 else 0.0
    profile = base.shifted(offset)
    player_cfg = PlayerConfig(
        target_latency_s=spec.target_s, abr=spec.algorithm, **config.player
    )
    link = LinkParams(rtt_s=config.rtt_s)
    log = run_session(player_cfg, profile, timeline, default_ladder(), link, seed=spec.seed)
    log.meta["scenario_id"] = spec.scenario_id
    log.meta["profile"] = spec.profile
    log.meta["profile_offset_s"] = offset
    return log


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def row_for(spec: SessionSpec, log: SessionLog) -> dict:
    m = compute_run_metrics(log, spec.target_s)
    return {
        "scenario_id": spec.scenario_id,
        "algorithm": spec.algorithm,
        "profile": spec.profile,
        "target_s": spec.target_s,
        "seed": spec.seed,
        "mean_bitrate_kbps": m.mean_bitrate_kbps,
        "stall_count": m.stall_count,
        "stall_s": m.total_stall_s,
        "median_dev_s": m.median_dev_s,
        "unique_segs": m.unique_segments,
        "total_segs": m.total_segment_requests,
        "rerequest_pct": m.rerequest_pct,
        "mos": mos_for_log(log),
    }


def _execute(args: tuple) -> tuple[dict, str | None]:
    spec, config, out_dir, want_p1203, want_logs = args
    log = run_one(spec, config)
    row = row_for(spec, log)
    stem = f"{spec.scenario_id}_{spec.seed}"
    if want_logs:
        log.write_jsonl(os.path.join(out_dir, "logs", f"{stem}.jsonl"))
    if want_p1203:
        export_p1203(log, os.path.join(out_dir, "p1203", f"{stem}.p1203.json"))
    return row, stem


def run_all(
    config: ExperimentConfig,
    out_dir: str,
    export_qoe: bool = False,
    emit_logs: bool = False,
    workers: int = 1,
) -> list[dict]:
    """Run the whole matrix and write runs.csv plus aggregate.csv."""
    specs = expand(config)
    os.makedirs(out_dir, exist_ok=True)
    if emit_logs:
        os.makedirs(os.path.join(out_dir, "logs"), exist_ok=True)
    if export_qoe:
        os.makedirs(os.path.join(out_dir, "p1203"), exist_ok=True)

    jobs = [(spec, config, out_dir, export_qoe, emit_logs) for spec in specs]
    rows: list[dict | None] = [None] * len(jobs)
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for i, (row, _) in enumerate(pool.map(_execute, jobs, chunksize=4)):
                    rows[i] = row
        else:
            for i, job in enumerate(jobs):
                rows[i], _ = _execute(job)
    except Exception as exc:
        done = [r for r in rows if r is not None]
        if done:
            _write_runs_csv(done, os.path.join(out_dir, "runs.csv"))
        failed = specs[len(done)] if len(done) < len(specs) else specs[-1]
        raise ExperimentError(
            f"scenario {failed.scenario_id} seed {failed.seed}: {exc}"
        ) from exc

    final_rows = [r for r in rows if r is not None]
    _write_runs_csv(final_rows, os.path.join(out_dir, "runs.csv"))
    _write_aggregate_csv(final_rows, os.path.join(out_dir, "aggregate.csv"))
    return final_rows


def _write_runs_csv(rows: list[dict], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in RUN_CSV_COLUMNS])


def _write_aggregate_csv(rows: list[dict], path: str) -> None:
    by_scenario: dict[str, list[dict]] = {}
    order: list[str] = []
    for row in rows:
        sid = row["scenario_id"]
        if sid not in by_scenario:
            by_scenario[sid] = []
            order.append(sid)
        by_scenario[sid].append(row)
    header = ["scenario_id", "algorithm", "profile", "target_s", "n_runs"]
    for name in AGG_SCALARS:
        header.extend([f"{name}_mean", f"{name}_median", f"{name}_p5", f"{name}_p95"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for sid in order:
            group = by_scenario[sid]
            first = group[0]
            out = [sid, first["algorithm"], first["profile"], _fmt(first["target_s"]), len(group)]
            for name in AGG_SCALARS:
                agg = aggregate([float(r[name]) for r in group])
                out.extend([_fmt(agg.mean), _fmt(agg.median), _fmt(agg.p5), _fmt(agg.p95)])
            writer.writerow(out)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="lldash", description="Low-latency live streaming simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an experiment matrix")
    sim.add_argument("--config", required=False, help="experiment config JSON (defaults if omitted)")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--export-p1203", action="store_true", help="write per-run QoE model inputs")
    sim.add_argument("--emit-logs", action="store_true", help="write per-run event logs")
    sim.add_argument("--workers", type=int, default=1, help="parallel session workers")

    prof = sub.add_parser("profiles", help="bandwidth profile tools")
    prof_sub = prof.add_subparsers(dest="profiles_command", required=True)
    gen = prof_sub.add_parser("generate", help="synthesise a profile CSV")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--shape", required=True, choices=sorted(SHAPES))
    gen.add_argument("--out", required=True)
    gen.add_argument("--duration", type=float, default=DEFAULT_DURATION_S)

    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            config = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
            rows = run_all(
                config,
                args.out,
                export_qoe=args.export_p1203,
                emit_logs=args.emit_logs,
                workers=max(args.workers, 1),
            )
            print(f"wrote {len(rows)} runs to {os.path.join(args.out, 'runs.csv')}")
        elif args.command == "profiles":
            profile = generate_profile(args.shape, args.seed, args.duration)
            save_profile(profile, args.out)
            print(f"wrote profile shape {args.shape} seed {args.seed} to {args.out}")
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
