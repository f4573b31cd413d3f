"""Deterministic trace-driven simulator of low-latency live DASH streaming."""

from .media import Representation, SegmentRef, StreamTimeline, default_ladder
from .netmodel import (
    ChunkSchedule,
    LinkParams,
    NetworkProfile,
    bandwidth_at,
    gated_transfer,
    load_profile,
    transfer_finish_time,
)
from .player import PlayerConfig, run_session
from .profiles import builtin_profile, generate_profile
from .sessionlog import SessionLog

__all__ = [
    "ChunkSchedule",
    "LinkParams",
    "NetworkProfile",
    "PlayerConfig",
    "Representation",
    "SegmentRef",
    "SessionLog",
    "StreamTimeline",
    "bandwidth_at",
    "builtin_profile",
    "default_ladder",
    "gated_transfer",
    "generate_profile",
    "load_profile",
    "run_session",
    "transfer_finish_time",
]
