"""Session scoring: an internal comparator MOS plus metadata export for the
standardised mode-0 audiovisual quality model.

The internal score is deliberately not that standardised model; it shares its
structural terms (quality level, stalling, switching; no absolute-latency term)
so that cross-algorithm orderings are meaningful, while absolute values are
only comparable within this simulator. The export path writes the mode-0 input
surface so the reference model can be run externally on identical sessions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .metrics import stall_summary
from .sessionlog import SessionLog


@dataclass(frozen=True)
class QoeSegment:
    bitrate_kbps: float
    duration_s: float
    width: int
    height: int
    fps: float


@dataclass
class QoeInput:
    segments: list[QoeSegment]
    stalls: list[tuple[float, float]]  # (media position s, duration s)
    audio_kbps: float = 128.0


@dataclass(frozen=True)
class MosScore:
    value: float

    def __post_init__(self) -> None:
        if not 1.0 <= self.value <= 5.0:
            raise ValueError(f"MOS out of range: {self.value}")


def build_qoe_input(log: SessionLog) -> QoeInput:
    ladder = log.meta["ladder"]
    seg_dur = float(log.meta["segment_duration_s"])
    segments = []
    for e in log.iter_type("segment_playout_start"):
        rung = e["rep"]
        if rung < 0:
            continue
        entry = ladder[rung]
        segments.append(
            QoeSegment(entry["kbps"], seg_dur, entry["width"], entry["height"], entry["fps"])
        )
    _, _, stalls = stall_summary(log)
    playheads = {e["t"]: e["playhead"] for e in log.iter_type("stall_start")}
    stall_list = [(playheads.get(start, 0.0), duration) for start, duration, _ in stalls]
    return QoeInput(segments=segments, stalls=stall_list, audio_kbps=float(log.meta["audio_kbps"]))


def internal_mos(qin: QoeInput, ladder_kbps: list[float]) -> MosScore:
    """Comparator MOS on [1, 5].

    1 + 4 * max(0, U - 0.5*sqrt(stall_fraction) - 0.1*switch_rate), where U is
    the duration-weighted mean of log-normalised bitrate, stall_fraction is
    stall time over stall-plus-played time, and switch_rate is switches per
    minute normalised by 6.
    """
    if not qin.segments:
        raise ValueError("no played segments to score")
    b_min = ladder_kbps[0]
    b_max = ladder_kbps[-1]
    log_span = math.log(b_max / b_min)
    total_dur = sum(s.duration_s for s in qin.segments)
    u = sum(
        math.log(s.bitrate_kbps / b_min) / log_span * s.duration_s for s in qin.segments
    ) / total_dur
    stall_s = sum(d for _, d in qin.stalls)
    stall_fraction = stall_s / (stall_s + total_dur)
    switches = sum(
        1
        for a, b in zip(qin.segments, qin.segments[1:])
        if a.bitrate_kbps != b.bitrate_kbps
    )
    minutes = total_dur / 60.0
    switch_rate = (switches / minutes) / 6.0 if minutes > 0 else 0.0
    raw = 1.0 + 4.0 * max(0.0, u - 0.5 * math.sqrt(stall_fraction) - 0.1 * switch_rate)
    return MosScore(min(max(raw, 1.0), 5.0))


def mos_for_log(log: SessionLog) -> float:
    return internal_mos(build_qoe_input(log), log.meta["ladder_kbps"]).value


def export_p1203(log: SessionLog, path: str) -> None:
    """Write the mode-0 metadata input for one session.

    Video segment list (codec, bitrate, duration, fps, resolution), a single
    audio descriptor, and the stalling list as (media position, duration).
    """
    ladder = log.meta["ladder"]
    seg_dur = float(log.meta["segment_duration_s"])
    video_segments = []
    start = 0.0
    for e in log.iter_type("segment_playout_start"):
        rung = e["rep"]
        if rung < 0:
            continue
        entry = ladder[rung]
        video_segments.append(
            {
                "bitrate": entry["kbps"],
                "codec": "h264",
                "duration": seg_dur,
                "fps": entry["fps"],
                "resolution": f"{entry['width']}x{entry['height']}",
                "start": start,
            }
        )
        start += seg_dur
    _, _, stalls = stall_summary(log)
    playheads = {e["t"]: e["playhead"] for e in log.iter_type("stall_start")}
    stalling = [[playheads.get(s, 0.0), d] for s, d, _ in stalls]
    total_dur = seg_dur * len(video_segments)
    doc = {
        "IGen": {"device": "pc", "displaySize": "1920x1080", "viewingDistance": "150cm"},
        "I11": {
            "segments": [
                {
                    "bitrate": float(log.meta["audio_kbps"]),
                    "codec": "aaclc",
                    "duration": total_dur,
                    "start": 0.0,
                }
            ],
            "streamId": 42,
        },
        "I13": {"segments": video_segments, "streamId": 42},
        "I23": {"stalling": stalling, "streamId": 42},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
