"""Throughput estimation from chunk transfer timing.

Media segments are timed per chunk with live-edge idle gaps excluded, the way
chunked-transfer parsers measure them. Init segments are too small for that and
are timed at the request level (RTT included), which is why their estimates come
out far below the real link rate. Init samples never enter the averaging window,
but the most recent sample of any kind stays visible to callers that want it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .media import SegmentRef


class EmptyHistoryError(LookupError):
    """No media sample recorded yet; callers fall back to a bootstrap estimate."""


@dataclass(frozen=True)
class ThroughputSample:
    source: SegmentRef
    request_id: int
    bits: float
    active_transfer_s: float
    is_init: bool

    def __post_init__(self) -> None:
        if self.active_transfer_s <= 0:
            raise ValueError("active transfer duration must be > 0")

    @property
    def derived_kbps(self) -> float:
        return self.bits / self.active_transfer_s / 1000.0


@dataclass
class ThroughputHistory:
    """Sliding window over the last W media samples, plus the raw last sample."""

    window_size: int = 3
    window: deque = field(default_factory=deque)
    last_sample: ThroughputSample | None = None

    def record(self, sample: ThroughputSample) -> None:
        self.last_sample = sample
        if sample.is_init:
            return
        self.window.append(sample)
        while len(self.window) > self.window_size:
            self.window.popleft()

    def estimate_swma(self) -> float:
        """Arithmetic mean (kbps) of the media samples in the window."""
        if not self.window:
            raise EmptyHistoryError("no media throughput samples recorded")
        return sum(s.derived_kbps for s in self.window) / len(self.window)


def sample_from_transfer(
    source: SegmentRef,
    request_id: int,
    chunk_intervals: list[tuple[float, float]],
    chunk_sizes: list[int],
) -> ThroughputSample:
    """Build a media sample from gated-transfer chunk intervals.

    Only active transfer time counts: waiting for a chunk to exist at the
    origin is not bandwidth.
    """
    if len(chunk_intervals) != len(chunk_sizes):
        raise ValueError("intervals and sizes must align")
    bits = 8.0 * sum(chunk_sizes)
    active = sum(end - begin for begin, end in chunk_intervals)
    if active <= 0:
        raise ValueError("degenerate transfer: zero active duration")
    return ThroughputSample(source, request_id, bits, active, is_init=source.is_init)
