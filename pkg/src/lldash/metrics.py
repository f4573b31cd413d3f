"""Session measurements: mean video bitrate, stalls, latency deviation,
segment accounting, and cross-run aggregation.

All functions are pure post-processing over session logs.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field

from .sessionlog import LogCorruptionError, SessionLog


class ZeroPlaybackError(ValueError):
    """No frame was ever rendered; the mean bitrate is undefined."""


@dataclass
class RunMetrics:
    mean_bitrate_kbps: float
    stall_count: int
    total_stall_s: float
    deviation_series: list[tuple[float, float]]  # (t, live_latency - target)
    median_dev_s: float
    unique_segments: int
    total_segment_requests: int
    rerequest_pct: float
    per_rung_counts: dict[int, int]
    total_playback_time_s: float
    segment_duration_s: float


@dataclass
class Aggregate:
    """Nearest-rank percentile summary of one scalar over a scenario's runs."""

    mean: float
    median: float
    p5: float
    p95: float
    n: int


def nearest_rank(sorted_values: list[float], pct: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * n)-th order statistic."""
    if not sorted_values:
        raise ValueError("no values")
    n = len(sorted_values)
    rank = max(1, math.ceil(pct / 100.0 * n))
    return sorted_values[min(rank, n) - 1]


def played_sequence(log: SessionLog) -> list[tuple[int, int]]:
    """(segment, rung) pairs in playout order, duplicates already resolved.

    The rung recorded at playout start is the representation retained for that
    segment: a replacement only counts if it finished before playout began.
    """
    return [(e["seg"], e["rep"]) for e in log.iter_type("segment_playout_start")]


def mean_bitrate(log: SessionLog) -> float:
    """Session-normalised mean video bitrate.

    segment_duration / total_playback_time x sum of per-rung bitrate x play
    counts, where total playback time runs from the first rendered frame to the
    session end (stall time included in the denominator).
    """
    seg_dur = float(log.meta["segment_duration_s"])
    ladder = log.meta["ladder_kbps"]
    plays = played_sequence(log)
    if not plays:
        raise ZeroPlaybackError("no segment ever started playing")
    first_render = next(log.iter_type("segment_playout_start"))["t"]
    session_end = log.t0 + log.budget_s
    playback_time = session_end - first_render
    if playback_time <= 0:
        raise ZeroPlaybackError("zero playback time")
    total = 0.0
    for _, rung in plays:
        if rung >= 0:
            total += ladder[rung]
    return seg_dur / playback_time * total


def per_rung_counts(log: SessionLog) -> dict[int, int]:
    counts: dict[int, int] = {}
    for _, rung in played_sequence(log):
        if rung >= 0:
            counts[rung] = counts.get(rung, 0) + 1
    return counts


def stall_summary(log: SessionLog) -> tuple[int, float, list[tuple[float, float, bool]]]:
    """(count, total seconds, [(start_t, duration, truncated)])."""
    stalls: list[tuple[float, float, bool]] = []
    open_start: float | None = None
    for e in log.iter_type("stall_start", "stall_end"):
        if e["type"] == "stall_start":
            if open_start is not None:
                raise LogCorruptionError("nested stall_start")
            open_start = e["t"]
        else:
            if open_start is None:
                raise LogCorruptionError("stall_end without stall_start")
            stalls.append((open_start, e["t"] - open_start, bool(e.get("truncated", False))))
            open_start = None
    if open_start is not None:
        raise LogCorruptionError("stall_start without stall_end or session-end marker")
    total = sum(d for _, d, _ in stalls)
    return len(stalls), total, stalls


@dataclass
class DeviationSummary:
    median: float
    q1: float
    q3: float
    iqr: float
    whisker_low: float
    whisker_high: float
    mean: float
    series: list[tuple[float, float]] = field(repr=False, default_factory=list)


def latency_deviation(log: SessionLog, target_s: float | None = None) -> DeviationSummary:
    """Per-sample deviation from the latency target with box-plot statistics.

    Whiskers extend to the most extreme samples within 1.5 x IQR of the
    quartiles; quartiles use the nearest-rank method.
    """
    if target_s is None:
        target_s = log.target_latency_s
    series = [(e["t"], e["latency"] - target_s) for e in log.iter_type("latency_sample")]
    if not series:
        raise LogCorruptionError("log has no latency samples")
    devs = sorted(d for _, d in series)
    q1 = nearest_rank(devs, 25)
    q3 = nearest_rank(devs, 75)
    iqr = q3 - q1
    lo_limit = q1 - 1.5 * iqr
    hi_limit = q3 + 1.5 * iqr
    whisker_low = min(d for d in devs if d >= lo_limit)
    whisker_high = max(d for d in devs if d <= hi_limit)
    return DeviationSummary(
        median=statistics.median(devs),
        q1=q1,
        q3=q3,
        iqr=iqr,
        whisker_low=whisker_low,
        whisker_high=whisker_high,
        mean=sum(devs) / len(devs),
        series=series,
    )


def segment_accounting(log: SessionLog) -> tuple[int, int, float]:
    """(unique, total, rerequest %) over video media requests (init excluded)."""
    segs = [
        e["seg"]
        for e in log.iter_type("request_issued")
        if e["kind"] == "video" and not e["is_init"]
    ]
    total = len(segs)
    unique = len(set(segs))
    pct = 0.0 if total == 0 else (total - unique) / total * 100.0
    return unique, total, pct


def integrate_rate(log: SessionLog) -> float:
    """Media seconds implied by the logged playback-rate trajectory."""
    t0 = log.t0
    end = t0 + log.budget_s
    rate = 0.0
    t_prev = t0
    played = 0.0
    for e in log.iter_type("rate_change"):
        t = min(e["t"], end)
        played += rate * (t - t_prev)
        t_prev = t
        rate = e["rate"]
    played += rate * (end - t_prev)
    return played


def compute_run_metrics(log: SessionLog, target_s: float | None = None) -> RunMetrics:
    if target_s is None:
        target_s = log.target_latency_s
    count, stall_total, _ = stall_summary(log)
    dev = latency_deviation(log, target_s)
    unique, total, pct = segment_accounting(log)
    first_render_events = list(log.iter_type("segment_playout_start"))
    session_end = log.t0 + log.budget_s
    playback_time = session_end - first_render_events[0]["t"] if first_render_events else 0.0
    return RunMetrics(
        mean_bitrate_kbps=mean_bitrate(log),
        stall_count=count,
        total_stall_s=stall_total,
        deviation_series=dev.series,
        median_dev_s=dev.median,
        unique_segments=unique,
        total_segment_requests=total,
        rerequest_pct=pct,
        per_rung_counts=per_rung_counts(log),
        total_playback_time_s=playback_time,
        segment_duration_s=float(log.meta["segment_duration_s"]),
    )


def aggregate(values: list[float]) -> Aggregate:
    """Mean, median and nearest-rank p5/p95 of one scalar over N runs."""
    if not values:
        raise ValueError("aggregate of no runs")
    ordered = sorted(values)
    return Aggregate(
        mean=sum(values) / len(values),
        median=statistics.median(values),
        p5=nearest_rank(ordered, 5),
        p95=nearest_rank(ordered, 95),
        n=len(values),
    )
