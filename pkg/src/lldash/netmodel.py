"""Trace-driven link model: piecewise-constant bandwidth with fixed per-request RTT.

Transfers are integrated analytically against the trace (no time stepping),
and chunked transfers at the live edge are gated on per-chunk availability.
"""

from __future__ import annotations

import csv
from bisect import bisect_right
from dataclasses import dataclass, field


class ProfileError(ValueError):
    """Malformed or invalid bandwidth trace."""


@dataclass
class LinkParams:
    """One round trip charged once per HTTP request, before the first byte."""

    rtt_s: float = 0.05

    def __post_init__(self) -> None:
        if self.rtt_s < 0:
            raise ValueError(f"rtt_s must be >= 0, got {self.rtt_s}")


@dataclass
class ChunkSchedule:
    """Per-chunk availability and size for one segment, in delivery order."""

    chunks: list[tuple[float, int]]  # (available_at_s, size_bytes)

    def __post_init__(self) -> None:
        if not self.chunks:
            raise ValueError("chunk schedule must be non-empty")
        prev = None
        for avail, size in self.chunks:
            if size <= 0:
                raise ValueError(f"chunk size must be > 0, got {size}")
            if prev is not None and avail < prev:
                raise ValueError("chunk availabilities must be non-decreasing")
            prev = avail


@dataclass
class NetworkProfile:
    """Step-function bandwidth trace.

    The value at t is the bandwidth of the latest breakpoint <= t
    (left-closed intervals: a breakpoint takes the new value at its own time),
    and the last value holds beyond duration_s.
    """

    times_s: list[float]
    bandwidths_bps: list[float]
    duration_s: float
    # cumulative bits delivered from t=0 up to each breakpoint time
    _cum_bits: list[float] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.times_s or len(self.times_s) != len(self.bandwidths_bps):
            raise ProfileError("profile needs matching, non-empty time/bandwidth lists")
        if self.times_s[0] != 0:
            raise ProfileError("first breakpoint must be at time 0")
        for i in range(1, len(self.times_s)):
            if self.times_s[i] <= self.times_s[i - 1]:
                raise ProfileError("breakpoint times must be strictly increasing")
        for bw in self.bandwidths_bps:
            if bw <= 0:
                raise ProfileError(f"bandwidth must be > 0, got {bw}")
        cum = [0.0]
        for i in range(1, len(self.times_s)):
            dt = self.times_s[i] - self.times_s[i - 1]
            cum.append(cum[-1] + self.bandwidths_bps[i - 1] * dt)
        self._cum_bits = cum

    def shifted(self, offset_s: float) -> "NetworkProfile":
        """Profile as seen from a later time origin (bandwidth(t) = self(t + offset))."""
        if offset_s < 0:
            raise ValueError("offset must be >= 0")
        if offset_s == 0:
            return self
        times = [0.0]
        bws = [bandwidth_at(self, offset_s)]
        for t, bw in zip(self.times_s, self.bandwidths_bps):
            if t > offset_s:
                times.append(t - offset_s)
                bws.append(bw)
        return NetworkProfile(times, bws, max(self.duration_s - offset_s, times[-1]))


def load_profile(path: str) -> NetworkProfile:
    """Load a `time_s,bandwidth_kbps` CSV into a profile (internal unit: bits/s)."""
    times: list[float] = []
    bws: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ProfileError(f"{path}: empty profile file")
        if [c.strip() for c in header] != ["time_s", "bandwidth_kbps"]:
            raise ProfileError(f"{path}: expected header 'time_s,bandwidth_kbps'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ProfileError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                t = float(row[0])
                kbps = float(row[1])
            except ValueError as exc:
                raise ProfileError(f"{path}:{lineno}: malformed row {row!r}") from exc
            if kbps <= 0:
                raise ProfileError(f"{path}:{lineno}: non-positive bandwidth {kbps}")
            if times and t <= times[-1]:
                raise ProfileError(f"{path}:{lineno}: times not strictly increasing")
            times.append(t)
            bws.append(kbps * 1000.0)
    if not times:
        raise ProfileError(f"{path}: no breakpoints")
    return NetworkProfile(times, bws, times[-1])


def save_profile(profile: NetworkProfile, path: str) -> None:
    """Write a profile back out in the CSV interchange format."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "bandwidth_kbps"])
        for t, bw in zip(profile.times_s, profile.bandwidths_bps):
            writer.writerow([f"{t:.6g}", f"{bw / 1000.0:.6g}"])


def bandwidth_at(profile: NetworkProfile, t: float) -> float:
    """Bandwidth in bits/s at time t (t >= 0); the last value holds forever."""
    idx = bisect_right(profile.times_s, t) - 1
    if idx < 0:
        idx = 0
    return profile.bandwidths_bps[idx]


def _bits_by(profile: NetworkProfile, t: float) -> float:
    """Cumulative bits deliverable on the link from time 0 to t."""
    idx = bisect_right(profile.times_s, t) - 1
    if idx < 0:
        idx = 0
    return profile._cum_bits[idx] + profile.bandwidths_bps[idx] * (t - profile.times_s[idx])


def _time_for_bits(profile: NetworkProfile, bits: float) -> float:
    """Inverse of _bits_by: earliest time by which `bits` have been delivered."""
    cum = profile._cum_bits
    idx = bisect_right(cum, bits) - 1
    if idx < 0:
        idx = 0
    if idx >= len(cum) - 1:
        idx = len(cum) - 1
    return profile.times_s[idx] + (bits - cum[idx]) / profile.bandwidths_bps[idx]


def transfer_finish_time(
    profile: NetworkProfile, start_t: float, payload_bytes: float, link: LinkParams
) -> float:
    """Completion time of a single request issued at start_t.

    The RTT is charged once before the first byte; the payload then drains at
    the trace rate. Exact piecewise-analytic integration.
    """
    if start_t < 0:
        raise ValueError("start_t must be >= 0")
    if payload_bytes < 0:
        raise ValueError("payload must be >= 0")
    first_byte = start_t + link.rtt_s
    if payload_bytes == 0:
        return first_byte
    target = _bits_by(profile, first_byte) + payload_bytes * 8.0
    return _time_for_bits(profile, target)


def delivered_bits(profile: NetworkProfile, t_begin: float, t_end: float) -> float:
    """Bits the link carries over [t_begin, t_end] (partial-transfer progress)."""
    if t_end < t_begin:
        raise ValueError("t_end must be >= t_begin")
    return _bits_by(profile, t_end) - _bits_by(profile, t_begin)


def gated_transfer(
    profile: NetworkProfile, start_t: float, schedule: ChunkSchedule, link: LinkParams
) -> list[tuple[float, float]]:
    """Per-chunk (first_byte_s, last_byte_s) intervals of one chunked request.

    A chunk's bytes cannot flow before the chunk exists at the origin or before
    the previous chunk has drained, so live-edge requests show idle gaps between
    chunk intervals. The RTT is charged once, at request start.
    """
    if start_t < 0:
        raise ValueError("start_t must be >= 0")
    intervals: list[tuple[float, float]] = []
    ready = start_t + link.rtt_s
    for avail, size in schedule.chunks:
        begin = max(ready, avail)
        end = _time_for_bits(profile, _bits_by(profile, begin) + size * 8.0)
        intervals.append((begin, end))
        ready = end
    return intervals
