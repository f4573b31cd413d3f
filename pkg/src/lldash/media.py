"""Encoding ladder, segment/chunk geometry, and the live availability timeline."""

from __future__ import annotations

from dataclasses import dataclass

VIDEO = "video"
AUDIO = "audio"

SEGMENT_DURATION_S = 3.84
CHUNKS_PER_SEGMENT = 4
CHUNK_DURATION_S = 0.96
INIT_SEGMENT_BYTES = 900  # tiny metadata-only segment, same size for every rung
AUDIO_BITRATE_KBPS = 128.0


@dataclass(frozen=True)
class Representation:
    index: int
    bitrate_kbps: float
    width: int
    height: int
    fps: float
    kind: str = VIDEO

    def __post_init__(self) -> None:
        if self.bitrate_kbps <= 0:
            raise ValueError("bitrate must be > 0")
        if self.kind not in (VIDEO, AUDIO):
            raise ValueError(f"unknown representation kind {self.kind!r}")

    @property
    def resolution(self) -> str:
        return f"{self.width}x{self.height}"


@dataclass(frozen=True)
class SegmentRef:
    """Identity of one downloadable object: media segment or init segment."""

    seg_index: int
    rep: Representation
    is_init: bool = False


@dataclass(frozen=True)
class StreamTimeline:
    """Live packaging timeline: when each chunk of each segment exists at the origin."""

    segment_duration_s: float = SEGMENT_DURATION_S
    chunks_per_segment: int = CHUNKS_PER_SEGMENT
    chunk_duration_s: float = CHUNK_DURATION_S
    total_segments: int = 390
    epoch_s: float = 0.0

    def __post_init__(self) -> None:
        if self.total_segments <= 0:
            raise ValueError("total_segments must be > 0")
        expected = self.chunks_per_segment * self.chunk_duration_s
        if abs(self.segment_duration_s - expected) > 1e-9:
            raise ValueError(
                f"segment duration {self.segment_duration_s} != "
                f"{self.chunks_per_segment} x {self.chunk_duration_s}"
            )

    @property
    def media_end_s(self) -> float:
        return self.total_segments * self.segment_duration_s


# Production-representative ladder: (width, height, bitrate_kbps, fps)
_VIDEO_LADDER = [
    (192, 108, 86, 25),
    (256, 144, 156, 25),
    (384, 216, 281, 25),
    (512, 288, 437, 25),
    (704, 396, 827, 50),
    (896, 504, 1374, 25),
    (704, 396, 1570, 50),
    (960, 540, 2811, 50),
    (1280, 720, 5468, 50),
]


def default_ladder() -> list[Representation]:
    """Built-in ladder: nine video rungs plus a single audio representation."""
    reps = [
        Representation(i, float(kbps), w, h, float(fps), VIDEO)
        for i, (w, h, kbps, fps) in enumerate(_VIDEO_LADDER)
    ]
    reps.append(Representation(0, AUDIO_BITRATE_KBPS, 0, 0, 0.0, AUDIO))
    return reps


def video_ladder(ladder: list[Representation]) -> list[Representation]:
    reps = [r for r in ladder if r.kind == VIDEO]
    if not reps:
        raise ValueError("ladder contains no video representations")
    for i in range(1, len(reps)):
        if reps[i].bitrate_kbps <= reps[i - 1].bitrate_kbps:
            raise ValueError("video ladder must be sorted ascending by bitrate")
        if reps[i].index != reps[i - 1].index + 1:
            raise ValueError("video ladder indices must be contiguous")
    return reps


def audio_rep(ladder: list[Representation]) -> Representation:
    for r in ladder:
        if r.kind == AUDIO:
            return r
    raise ValueError("ladder contains no audio representation")


def chunk_bytes(rep: Representation, timeline: StreamTimeline, is_init: bool = False) -> int:
    """Byte size of one chunk; CBR encoding makes it bitrate x chunk duration."""
    if is_init:
        return INIT_SEGMENT_BYTES
    return round(rep.bitrate_kbps * 1000.0 * timeline.chunk_duration_s / 8.0)


def chunk_available_at(timeline: StreamTimeline, seg_index: int, chunk_index: int) -> float:
    """Origin availability: a chunk exists once it is fully encoded."""
    if not 0 <= chunk_index < timeline.chunks_per_segment:
        raise ValueError(f"chunk_index {chunk_index} out of range")
    return (
        timeline.epoch_s
        + seg_index * timeline.segment_duration_s
        + (chunk_index + 1) * timeline.chunk_duration_s
    )


def presentation_interval(timeline: StreamTimeline, seg_index: int) -> tuple[float, float]:
    """Media-time interval [start, end) covered by a segment."""
    if not 0 <= seg_index < timeline.total_segments:
        raise IndexError(f"segment {seg_index} out of range [0, {timeline.total_segments})")
    start = seg_index * timeline.segment_duration_s
    return start, start + timeline.segment_duration_s
