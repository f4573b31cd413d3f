"""The four figure kinds over simulator outputs.

heatmap    stall bars per algorithm overlaid on the bandwidth trace
boxplot    latency-deviation distributions per algorithm and target
band       mean video bitrate vs target with p5-p95 bands
qoe-curve  MOS vs target with p5-p95 bands
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

KINDS = ("heatmap", "boxplot", "band", "qoe-curve")

ALGO_COLOURS = {
    "dynamic": "tab:blue",
    "l2a_original": "tab:red",
    "l2a_modified": "tab:purple",
    "lolp": "tab:green",
}


class SchemaError(ValueError):
    """An input file does not match its documented schema."""


@dataclass
class PlotSpec:
    kind: str
    runs: str
    out: str
    aggregate: str | None = None
    profile: str | None = None
    logs: str | None = None  # defaults to <runs dir>/logs
    profile_name: str | None = None  # filter; defaults to the first seen
    target: float | None = None  # heatmap: which target lane set to draw

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}, expected one of {KINDS}")
        if self.logs is None:
            self.logs = os.path.join(os.path.dirname(os.path.abspath(self.runs)), "logs")


def read_runs(path: str) -> list[dict]:
    required = {"scenario_id", "algorithm", "profile", "target_s", "seed"}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = required - set(reader.fieldnames or ())
        if missing:
            raise SchemaError(f"{path}: missing columns {sorted(missing)}")
        return list(reader)


def read_aggregate(path: str) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if "scenario_id" not in (reader.fieldnames or ()):
            raise SchemaError(f"{path}: missing column 'scenario_id'")
        return list(reader)


def read_profile_csv(path: str) -> tuple[list[float], list[float]]:
    times, kbps = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["time_s", "bandwidth_kbps"]:
            raise SchemaError(f"{path}: expected header 'time_s,bandwidth_kbps'")
        for row in reader:
            if len(row) != 2:
                raise SchemaError(f"{path}: malformed row {row!r}")
            times.append(float(row[0]))
            kbps.append(float(row[1]))
    return times, kbps


def read_log(path: str) -> tuple[dict, list[dict]]:
    meta: dict = {}
    events: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("type") == "meta":
                meta = obj
            else:
                events.append(obj)
    if not meta:
        raise SchemaError(f"{path}: missing meta line")
    return meta, events


def log_path(logs_dir: str, scenario_id: str, seed: str | int) -> str:
    return os.path.join(logs_dir, f"{scenario_id}_{seed}.jsonl")


def nearest_rank(sorted_values: list[float], pct: float) -> float:
    n = len(sorted_values)
    rank = max(1, math.ceil(pct / 100.0 * n))
    return sorted_values[min(rank, n) - 1]


def box_stats(values: list[float]) -> dict:
    """bxp-style stats: nearest-rank quartiles, whiskers at 1.5 x IQR
    clamped to the most extreme data points inside the fences."""
    if not values:
        raise SchemaError("cannot compute box statistics of no samples")
    ordered = sorted(values)
    n = len(ordered)
    med = (ordered[n // 2] if n % 2 else 0.5 * (ordered[n // 2 - 1] + ordered[n // 2]))
    q1 = nearest_rank(ordered, 25)
    q3 = nearest_rank(ordered, 75)
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    whislo = min(v for v in ordered if v >= lo_fence)
    whishi = max(v for v in ordered if v <= hi_fence)
    fliers = [v for v in ordered if v < whislo or v > whishi]
    return {
        "med": med, "q1": q1, "q3": q3,
        "whislo": whislo, "whishi": whishi, "fliers": fliers,
    }


def _select_profile(rows: list[dict], wanted: str | None) -> tuple[str, list[dict]]:
    if not rows:
        raise SchemaError("runs file has no rows")
    name = wanted if wanted is not None else rows[0]["profile"]
    subset = [r for r in rows if r["profile"] == name]
    if not subset:
        raise SchemaError(f"no rows for profile {name!r} in runs file")
    return name, subset


def _targets(rows: list[dict]) -> list[float]:
    return sorted({float(r["target_s"]) for r in rows})


def _algorithms(rows: list[dict]) -> list[str]:
    seen: list[str] = []
    for r in rows:
        if r["algorithm"] not in seen:
            seen.append(r["algorithm"])
    return seen


def render(spec: PlotSpec) -> str:
    """Render one figure; returns the output path."""
    rows = read_runs(spec.runs)
    prof_name, rows = _select_profile(rows, spec.profile_name)
    if spec.kind == "heatmap":
        fig = _render_heatmap(spec, prof_name, rows)
    elif spec.kind == "boxplot":
        fig = _render_boxplot(spec, prof_name, rows)
    elif spec.kind == "band":
        fig = _render_band(spec, prof_name, rows, "mean_bitrate_kbps", "Mean video bitrate (kbps)")
    else:
        fig = _render_band(spec, prof_name, rows, "mos", "MOS")
        fig.axes[0].set_ylim(1.0, 5.0)
    fig.savefig(spec.out, dpi=110)
    plt.close(fig)
    return spec.out


def _render_heatmap(spec: PlotSpec, prof_name: str, rows: list[dict]):
    if spec.profile is None:
        raise SchemaError("heatmap needs --profile (the bandwidth trace CSV)")
    times, kbps = read_profile_csv(spec.profile)
    targets = _targets(rows)
    target = spec.target if spec.target is not None else targets[0]
    algos = _algorithms(rows)

    fig, ax = plt.subplots(figsize=(11, 4.5))
    # one run per algorithm (the lowest seed) so stall bars line up with the
    # exact trace window that session saw
    offset = 0.0
    span = None
    lanes = []
    for alg in algos:
        cand = [r for r in rows if r["algorithm"] == alg and float(r["target_s"]) == target]
        if not cand:
            raise SchemaError(f"no runs for algorithm {alg!r} at target {target:g}")
        row = min(cand, key=lambda r: int(r["seed"]))
        meta, events = read_log(log_path(spec.logs, row["scenario_id"], row["seed"]))
        offset = float(meta.get("profile_offset_s", 0.0))
        t0 = float(meta["t0"])
        span = float(meta["budget_s"])
        stalls = []
        open_t = None
        for e in events:
            if e["type"] == "stall_start":
                open_t = e["t"]
            elif e["type"] == "stall_end" and open_t is not None:
                stalls.append((open_t - t0, e["t"] - open_t))
                open_t = None
        lanes.append((alg, stalls))

    # bandwidth trace as seen by the plotted sessions
    xs, ys = [], []
    for i, t in enumerate(times):
        xs.append(t - offset)
        ys.append(kbps[i])
    ax.step(xs, ys, where="post", color="0.4", linewidth=1.0, label=f"profile {prof_name}")
    top = max(kbps) * 1.25
    for i, (alg, stalls) in enumerate(lanes):
        y = top * (0.97 - 0.06 * i)
        colour = ALGO_COLOURS.get(alg, f"C{i}")
        ax.broken_barh(stalls, (y, top * 0.04), color=colour, alpha=0.85, label=alg)
    ax.set_xlim(0, span if span else max(xs))
    ax.set_ylim(0, top * 1.05)
    ax.set_xlabel("Session time (s)")
    ax.set_ylabel("Bandwidth (kbps)")
    ax.set_title(f"Stalls over bandwidth, profile {prof_name}, target {target:g}s")
    ax.legend(loc="center right", fontsize=8)
    fig.tight_layout()
    return fig


def _render_boxplot(spec: PlotSpec, prof_name: str, rows: list[dict]):
    targets = _targets(rows)
    algos = _algorithms(rows)
    fig, ax = plt.subplots(figsize=(9, 4.5))
    stats, positions, colours = [], [], []
    width = 0.8 / max(len(algos), 1)
    for ti, target in enumerate(targets):
        for ai, alg in enumerate(algos):
            devs: list[float] = []
            for row in rows:
                if row["algorithm"] != alg or float(row["target_s"]) != target:
                    continue
                meta, events = read_log(log_path(spec.logs, row["scenario_id"], row["seed"]))
                t = float(meta["target_latency_s"])
                devs.extend(e["latency"] - t for e in events if e["type"] == "latency_sample")
            if not devs:
                raise SchemaError(f"no latency samples for {alg!r} at target {target:g}")
            stats.append(box_stats(devs))
            positions.append(ti + (ai - len(algos) / 2 + 0.5) * width)
            colours.append(ALGO_COLOURS.get(alg, f"C{ai}"))
    artists = ax.bxp(
        stats, positions=positions, widths=width * 0.85,
        showfliers=False, medianprops={"color": "tab:orange", "linewidth": 1.4},
    )
    for patch, colour in zip(artists["boxes"], colours):
        patch.set_color(colour)
    ax.set_xticks(range(len(targets)))
    ax.set_xticklabels([f"{t:g}s" for t in targets])
    ax.set_xlabel("Latency target")
    ax.set_ylabel("Latency deviation (s)")
    ax.set_title(f"Latency deviation from target, profile {prof_name}")
    handles = [plt.Line2D([], [], color=ALGO_COLOURS.get(a, f"C{i}"), label=a) for i, a in enumerate(algos)]
    ax.legend(handles=handles, fontsize=8)
    fig.tight_layout()
    return fig


def _aggregate_from_runs(rows: list[dict], column: str) -> dict[tuple[str, float], tuple[float, float, float]]:
    if rows and column not in rows[0]:
        raise SchemaError(f"runs file missing column {column!r}")
    grouped: dict[tuple[str, float], list[float]] = {}
    for r in rows:
        grouped.setdefault((r["algorithm"], float(r["target_s"])), []).append(float(r[column]))
    out = {}
    for key, vals in grouped.items():
        ordered = sorted(vals)
        out[key] = (
            sum(vals) / len(vals),
            nearest_rank(ordered, 5),
            nearest_rank(ordered, 95),
        )
    return out


def _render_band(spec: PlotSpec, prof_name: str, rows: list[dict], column: str, ylabel: str):
    if spec.aggregate:
        agg_rows = [r for r in read_aggregate(spec.aggregate) if r["profile"] == prof_name]
        if not agg_rows:
            raise SchemaError(f"no aggregate rows for profile {prof_name!r}")
        needed = {f"{column}_mean", f"{column}_p5", f"{column}_p95"}
        missing = needed - set(agg_rows[0])
        if missing:
            raise SchemaError(f"aggregate file missing columns {sorted(missing)}")
        series = {
            (r["algorithm"], float(r["target_s"])): (
                float(r[f"{column}_mean"]),
                float(r[f"{column}_p5"]),
                float(r[f"{column}_p95"]),
            )
            for r in agg_rows
        }
    else:
        series = _aggregate_from_runs(rows, column)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    algos = _algorithms(rows)
    targets = _targets(rows)
    for i, alg in enumerate(algos):
        xs = [t for t in targets if (alg, t) in series]
        if not xs:
            raise SchemaError(f"scenario for algorithm {alg!r} absent from aggregate data")
        means = [series[(alg, t)][0] for t in xs]
        lows = [series[(alg, t)][1] for t in xs]
        highs = [series[(alg, t)][2] for t in xs]
        colour = ALGO_COLOURS.get(alg, f"C{i}")
        ax.plot(xs, means, marker="o", color=colour, label=alg)
        ax.fill_between(xs, lows, highs, color=colour, alpha=0.2)
    ax.set_xlabel("Latency target (s)")
    ax.set_ylabel(ylabel)
    ax.set_title(f"{ylabel} vs latency target, profile {prof_name}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig
