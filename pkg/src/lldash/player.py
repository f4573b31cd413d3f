"""The discrete-event playback engine.

One session is a single-threaded deterministic event loop over a live chunked
stream: it schedules segment requests against the live edge, maintains the
buffer and playback clock, applies catch-up rate control and max-drift seeks,
detects stalls, optionally replaces buffered segments (FastSwitching), and
invokes the configured bitrate-decision rule at every scheduling opportunity.

Live latency is measured against the stream clock: the delay between a media
position's presentation offset at the origin and the moment it plays. The
client joins at its latency target, so deviation measures steady-state
behaviour from the first sample.

Two scheduler properties matter for fidelity and are deliberate:

* when the next segment's first chunk does not exist yet, the scheduler backs
  off in short timeout steps and re-invokes the decision rule on every step,
  passing whatever throughput sample is most recent (possibly a repeat or an
  init-segment sample);
* a switch to a representation that is not the one most recently initialised
  fetches that representation's init segment before the media request.

Together these reproduce the rapid repeated state updates, and the poisoning
by init-segment throughput estimates, that trip up the original variant of the
online-learning rule at low latency targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import abr as abr_mod
from .abr import (
    AbrContext,
    DynamicState,
    L2AState,
    LolpModel,
    SomGrid,
    dynamic_decide,
    l2a_decide,
    lolp_decide,
    make_bola_params,
)
from .media import (
    AUDIO,
    Representation,
    SegmentRef,
    StreamTimeline,
    audio_rep,
    chunk_available_at,
    chunk_bytes,
    video_ladder,
)
from .netmodel import (
    ChunkSchedule,
    LinkParams,
    NetworkProfile,
    delivered_bits,
    gated_transfer,
    transfer_finish_time,
)
from .sessionlog import SessionLog
from .throughput import EmptyHistoryError, ThroughputHistory, ThroughputSample, sample_from_transfer

ALGORITHMS = ("dynamic", "l2a_original", "l2a_modified", "lolp")

_EPS = 1e-9


class ConfigurationError(ValueError):
    pass


@dataclass
class PlayerConfig:
    target_latency_s: float
    abr: str = "dynamic"
    max_drift_s: float = 5.0
    max_playback_rate_delta: float = 0.17
    scheduler_timeout_s: float = 0.3
    stable_buffer_time_s: float = 12.0
    fast_switching: bool = False
    catchup: str | None = None  # resolved to "lolp" for the lolp rule, else "default"
    resume_buffer_s: float = 0.96
    # throughput estimation
    throughput_window: int = 3
    bootstrap_kbps: float = 86.0
    # catch-up control law; zero deadband lets latency converge exactly onto
    # the target instead of parking at an arbitrary in-band offset
    catchup_gain: float = 0.5
    catchup_deadband_s: float = 0.0
    # decision-rule knobs
    dynamic_switch_buffer_s: float = 10.0
    dynamic_hysteresis_s: float = 1.0
    throughput_safety: float = 0.9
    l2a_eta: float = 0.5
    l2a_latency_weight: float = 1.0
    lolp_bitrate_weight: float = 1.0
    lolp_rebuffer_weight: float = 1.0
    lolp_latency_weight: float = 0.5
    lolp_switch_weight: float = 0.5
    lolp_som: bool = False
    lolp_buffer_floor_s: float = 0.96
    fast_switch_threshold_factor: float = 1.5

    def __post_init__(self) -> None:
        if self.target_latency_s <= 0:
            raise ConfigurationError("target_latency_s must be > 0")
        if not 0 < self.max_playback_rate_delta < 1:
            raise ConfigurationError("max_playback_rate_delta must be in (0, 1)")
        if self.scheduler_timeout_s <= 0:
            raise ConfigurationError("scheduler_timeout_s must be > 0")
        if self.resume_buffer_s <= 0:
            raise ConfigurationError("resume_buffer_s must be > 0")
        if self.abr not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm id {self.abr!r}, expected one of {ALGORITHMS}")
        if self.catchup is None:
            self.catchup = "lolp" if self.abr == "lolp" else "default"
        if self.catchup not in ("default", "lolp"):
            raise ConfigurationError(f"unknown catchup mode {self.catchup!r}")


def default_catchup_rate(live_latency_s: float, config: PlayerConfig) -> float | None:
    """Playback rate for the current latency, or None to request a seek.

    Proportional law clamped to 1 +/- max delta, with a small deadband so the
    rate is exactly 1 at the target; deviations beyond max_drift_s seek instead.
    """
    dev = live_latency_s - config.target_latency_s
    if abs(dev) > config.max_drift_s:
        return None
    if abs(dev) <= config.catchup_deadband_s:
        return 1.0
    rate = 1.0 + config.catchup_gain * dev
    lo = 1.0 - config.max_playback_rate_delta
    hi = 1.0 + config.max_playback_rate_delta
    return min(max(rate, lo), hi)


def lolp_catchup_rate(live_latency_s: float, buffer_s: float, config: PlayerConfig) -> float | None:
    """Hybrid law: never speed up into a nearly empty buffer."""
    rate = default_catchup_rate(live_latency_s, config)
    if rate is None:
        return None
    if buffer_s < config.lolp_buffer_floor_s:
        rate = min(rate, 1.0)
    return rate


def fast_switch_check(
    playhead_s: float,
    frontier_s: float,
    buffered_reps: dict[int, int],
    decision: int,
    config: PlayerConfig,
    segment_duration_s: float,
) -> int | None:
    """Earliest buffered, not-yet-played segment upgradeable to `decision`.

    Only active when the buffer exceeds the replacement threshold
    (1.5 x segment duration by default).
    """
    if frontier_s - playhead_s <= config.fast_switch_threshold_factor * segment_duration_s:
        return None
    first = int(playhead_s / segment_duration_s) + 1
    last = int(math.ceil(frontier_s / segment_duration_s))
    for seg in range(first, last):
        rep = buffered_reps.get(seg)
        if rep is not None and rep < decision:
            return seg
    return None


@dataclass
class _Inflight:
    kind: str  # video | audio | video_init | audio_init
    req_id: int
    seg: int
    rep_idx: int
    purpose: str  # media | init | replacement
    issue_t: float
    chunk_events: list[tuple[float, int]]  # (completion time, chunk index or -1)
    intervals: list[tuple[float, float]] = field(default_factory=list)
    sizes: list[int] = field(default_factory=list)
    next_i: int = 0
    stale: bool = False  # superseded by a seek; completes but updates nothing

    @property
    def next_time(self) -> float:
        return self.chunk_events[self.next_i][0]


class _Session:
    """Mutable state of one run; `run()` drives it to the wall-clock budget."""

    MAX_EVENTS = 20_000_000  # hard safety valve against scheduling bugs

    def __init__(
        self,
        config: PlayerConfig,
        profile: NetworkProfile,
        timeline: StreamTimeline,
        ladder: list[Representation],
        link: LinkParams,
        seed: int,
    ):
        self.cfg = config
        self.profile = profile
        self.tl = timeline
        self.link = link
        self.video = video_ladder(ladder)
        self.audio = audio_rep(ladder)
        self.top_idx = len(self.video) - 1

        # the client joins at its latency target; the wall-clock budget is
        # anchored at the first rendered frame, so startup delay is measured
        # separately and never counts as rebuffering
        self.t_join = timeline.epoch_s + config.target_latency_s
        self.budget = timeline.media_end_s
        self.t0 = math.inf  # playback origin, set at first render
        self.end = math.inf
        self.prebuffer_deadline = self.t_join + self.budget
        self.rendered = False
        self.w = self.t_join
        self.p = 0.0
        self.rate = 0.0
        self.stalled = True
        self.stall_started = self.t_join
        self.stall_total = 0.0
        self.media_played = 0.0

        self.frontier = 0.0
        self.audio_frontier = 0.0
        self.next_vseg = 0
        self.next_aseg = 0
        self.next_playout_seg = 0
        self.seg_reps: dict[int, int] = {}

        self.inflight: _Inflight | None = None
        self.wake = self.t_join
        self.pending: tuple[str, int, int] | None = None
        self.req_counter = 0

        self.history = ThroughputHistory(config.throughput_window)
        self.last_abr_req: int | None = None
        self.last_decision = 0
        self.current_rep = 0
        self.last_initialized_rep: int | None = None
        self.audio_inited = False

        self.sample_k = 0
        self.max_sample_k = int(self.budget / 0.5)

        self._init_abr_state(seed)

        self.log = SessionLog(
            meta={
                "algorithm": config.abr,
                "target_latency_s": config.target_latency_s,
                "seed": seed,
                "t_join": self.t_join,
                "budget_s": self.budget,
                "total_segments": timeline.total_segments,
                "segment_duration_s": timeline.segment_duration_s,
                "chunk_duration_s": timeline.chunk_duration_s,
                "fast_switching": config.fast_switching,
                "catchup": config.catchup,
                "rtt_s": link.rtt_s,
                "ladder_kbps": [r.bitrate_kbps for r in self.video],
                "ladder": [
                    {"kbps": r.bitrate_kbps, "width": r.width, "height": r.height, "fps": r.fps}
                    for r in self.video
                ],
                "audio_kbps": self.audio.bitrate_kbps,
            }
        )
        self.log.add("session_start", self.t_join, playhead=self.p, rate=0.0)

    def _init_abr_state(self, seed: int) -> None:
        cfg = self.cfg
        buffer_target = min(cfg.target_latency_s, cfg.stable_buffer_time_s)
        self.dyn_state = DynamicState(
            bola=make_bola_params(self.video, buffer_target, self.tl.segment_duration_s),
            switch_buffer_s=cfg.dynamic_switch_buffer_s,
            hysteresis_s=cfg.dynamic_hysteresis_s,
            safety=cfg.throughput_safety,
        )
        self.l2a_state = L2AState.fresh(self.video, eta=cfg.l2a_eta, latency_weight=cfg.l2a_latency_weight)
        self.lolp_model = LolpModel(
            bitrate_weight=cfg.lolp_bitrate_weight,
            rebuffer_weight=cfg.lolp_rebuffer_weight,
            latency_weight=cfg.lolp_latency_weight,
            switch_weight=cfg.lolp_switch_weight,
            som=SomGrid.fresh(len(self.video)) if cfg.lolp_som else None,
        )

    # -- clocks and bookkeeping -------------------------------------------------

    @property
    def latency(self) -> float:
        return self.w - (self.tl.epoch_s + self.p)

    @property
    def buffer_s(self) -> float:
        return self.frontier - self.p

    def _advance(self, t: float) -> None:
        dt = t - self.w
        if dt > 0 and not self.stalled and self.rate > 0:
            seg_dur = self.tl.segment_duration_s
            new_p = self.p + self.rate * dt
            boundary = self.next_playout_seg * seg_dur
            # playout of a segment starts only once some of it is buffered
            while boundary <= new_p + _EPS and boundary < self.frontier - _EPS:
                t_cross = self.w + (boundary - self.p) / self.rate
                self._emit_playout(t_cross)
                boundary = self.next_playout_seg * seg_dur
            self.media_played += self.rate * dt
            self.p = new_p
        self.w = t

    def _emit_playout(self, t: float) -> None:
        seg = self.next_playout_seg
        self.log.add("segment_playout_start", t, seg=seg, rep=self.seg_reps.get(seg, -1))
        self.next_playout_seg += 1

    def _set_rate(self, rate: float) -> None:
        if rate != self.rate:
            self.rate = rate
            self.log.add("rate_change", self.w, rate=rate)

    # -- stalls and catch-up ----------------------------------------------------

    def _start_stall(self) -> None:
        self.p = min(self.p, self.frontier)
        self.stalled = True
        self.stall_started = self.w
        self._set_rate(0.0)
        self.log.add("stall_start", self.w, playhead=self.p)

    def _maybe_resume(self) -> None:
        if not self.stalled:
            return
        if self.frontier - self.p + _EPS < self.cfg.resume_buffer_s:
            return
        self.stalled = False
        if not self.rendered:
            # first frame: playback (and the session's wall budget) starts here
            self.rendered = True
            self.t0 = self.w
            self.end = self.w + self.budget
            self.log.add(
                "playback_start", self.w, playhead=self.p,
                startup_delay_s=self.w - self.t_join,
            )
            self.log.add("rate_change", self.w, rate=0.0)
        else:
            self.stall_total += self.w - self.stall_started
            self.log.add("stall_end", self.w, playhead=self.p, truncated=False)
        seg_dur = self.tl.segment_duration_s
        if self.next_playout_seg * seg_dur <= self.p + _EPS:
            self._emit_playout(self.w)
        self._eval_catchup()

    def _eval_catchup(self) -> None:
        if self.stalled:
            return
        if self.cfg.catchup == "lolp":
            rate = lolp_catchup_rate(self.latency, self.buffer_s, self.cfg)
        else:
            rate = default_catchup_rate(self.latency, self.cfg)
        if rate is None:
            self._seek_to_target()
        else:
            self._set_rate(rate)

    def _abort_inflight(self) -> None:
        """Drop the in-flight request (seek made it useless), keeping what the
        wire already told us: bytes delivered so far are a throughput sample."""
        fl = self.inflight
        assert fl is not None
        if fl.kind == "video" and fl.next_i < len(fl.intervals):
            begin, _ = fl.intervals[fl.next_i]
            if self.w > begin + 1e-6:
                bits = delivered_bits(self.profile, begin, self.w)
                if bits > 0:
                    self.history.record(
                        ThroughputSample(
                            SegmentRef(fl.seg, self.video[fl.rep_idx], is_init=False),
                            fl.req_id,
                            bits,
                            self.w - begin,
                            is_init=False,
                        )
                    )
        self.log.add(
            "request_aborted", self.w, req=fl.req_id, kind=fl.kind, seg=fl.seg,
            chunks_done=fl.next_i,
        )
        self.inflight = None
        self.wake = self.w

    def _seek_to_target(self) -> None:
        seg_dur = self.tl.segment_duration_s
        new_p = max(self.w - self.tl.epoch_s - self.cfg.target_latency_s, 0.0)
        if abs(new_p - self.p) < _EPS:
            self._set_rate(1.0)
            return
        self.log.add("seek", self.w, from_media=self.p, to_media=new_p)
        forward = new_p > self.p
        self.p = new_p
        containing = int(new_p / seg_dur + _EPS)
        if forward:
            fl = self.inflight
            if (
                fl is not None
                and fl.kind in ("video", "audio")
                and (fl.seg + 1) * seg_dur <= new_p + _EPS
            ):
                self._abort_inflight()
            if new_p > self.frontier + _EPS:
                self.frontier = new_p
                self.next_vseg = max(self.next_vseg, containing)
            if new_p > self.audio_frontier:
                self.audio_frontier = new_p
                self.next_aseg = max(self.next_aseg, containing)
        else:
            # backward seeks drop the buffer entirely and refetch
            self.frontier = new_p
            self.audio_frontier = new_p
            self.next_vseg = containing
            self.next_aseg = containing
            if self.inflight is not None:
                self.inflight.stale = True
        if abs(new_p - containing * seg_dur) < _EPS:
            self.next_playout_seg = containing
        else:
            self.next_playout_seg = containing + 1
        self.pending = None
        self._set_rate(1.0)

    # -- request issuing ---------------------------------------------------------

    def _next_req_id(self) -> int:
        self.req_counter += 1
        return self.req_counter

    def _issue_init(self, kind: str, rep: Representation, rep_idx: int) -> None:
        req = self._next_req_id()
        finish = transfer_finish_time(self.profile, self.w, chunk_bytes(rep, self.tl, is_init=True), self.link)
        self.log.add(
            "request_issued", self.w, req=req, kind=kind, seg=-1, rep=rep_idx,
            is_init=True, bytes=chunk_bytes(rep, self.tl, is_init=True), purpose="init",
        )
        self.inflight = _Inflight(
            kind=f"{kind}_init", req_id=req, seg=-1, rep_idx=rep_idx,
            purpose="init", issue_t=self.w, chunk_events=[(finish, -1)],
        )

    def _issue_video(self, seg: int, rep_idx: int, purpose: str) -> None:
        rep = self.video[rep_idx]
        req = self._next_req_id()
        size = chunk_bytes(rep, self.tl)
        sizes = [size] * self.tl.chunks_per_segment
        avails = [chunk_available_at(self.tl, seg, j) for j in range(self.tl.chunks_per_segment)]
        intervals = gated_transfer(self.profile, self.w, ChunkSchedule(list(zip(avails, sizes))), self.link)
        self.log.add(
            "request_issued", self.w, req=req, kind="video", seg=seg, rep=rep_idx,
            is_init=False, bytes=sum(sizes), purpose=purpose,
        )
        if purpose == "media" and rep_idx != self.current_rep:
            self.log.add("representation_switch", self.w, from_rep=self.current_rep, to_rep=rep_idx)
        if purpose == "media":
            self.current_rep = rep_idx
        self.inflight = _Inflight(
            kind="video", req_id=req, seg=seg, rep_idx=rep_idx, purpose=purpose,
            issue_t=self.w, chunk_events=[(end, j) for j, (_, end) in enumerate(intervals)],
            intervals=intervals, sizes=sizes,
        )

    def _issue_audio(self, seg: int) -> None:
        req = self._next_req_id()
        size = chunk_bytes(self.audio, self.tl)
        sizes = [size] * self.tl.chunks_per_segment
        avails = [chunk_available_at(self.tl, seg, j) for j in range(self.tl.chunks_per_segment)]
        intervals = gated_transfer(self.profile, self.w, ChunkSchedule(list(zip(avails, sizes))), self.link)
        self.log.add(
            "request_issued", self.w, req=req, kind="audio", seg=seg, rep=0,
            is_init=False, bytes=sum(sizes), purpose="media",
        )
        self.inflight = _Inflight(
            kind="audio", req_id=req, seg=seg, rep_idx=0, purpose="media",
            issue_t=self.w, chunk_events=[(intervals[-1][1], -1)],
            intervals=intervals, sizes=sizes,
        )

    # -- decision invocation -----------------------------------------------------

    def _invoke_abr(self) -> int:
        sample = self.history.last_sample
        try:
            swma = self.history.estimate_swma()
        except EmptyHistoryError:
            swma = self.cfg.bootstrap_kbps
        trigger = (
            abr_mod.SCHEDULER_REPEAT
            if sample is not None and sample.request_id == self.last_abr_req
            else abr_mod.NEW_SAMPLE
        )
        ctx = AbrContext(
            buffer_s=max(self.buffer_s, 0.0),
            live_latency_s=self.latency,
            target_latency_s=self.cfg.target_latency_s,
            last_sample=sample,
            swma_kbps=swma,
            ladder=self.video,
            previous_decision=self.last_decision,
            decision_trigger=trigger,
            segment_duration_s=self.tl.segment_duration_s,
        )
        updated = None
        if self.cfg.abr == "dynamic":
            decision = dynamic_decide(ctx, self.dyn_state)
        elif self.cfg.abr in ("l2a_original", "l2a_modified"):
            variant = abr_mod.L2A_ORIGINAL if self.cfg.abr == "l2a_original" else abr_mod.L2A_MODIFIED
            before = self.l2a_state.total_updates
            decision, _ = l2a_decide(self.l2a_state, ctx, variant)
            updated = self.l2a_state.total_updates > before
        else:
            decision = lolp_decide(ctx, self.lolp_model)
        event: dict = {
            "trigger": trigger,
            "sample_req": sample.request_id if sample else -1,
            "sample_is_init": bool(sample.is_init) if sample else False,
            "sample_kbps": sample.derived_kbps if sample else -1.0,
            "decision": decision,
            "buffer": ctx.buffer_s,
            "swma": swma,
        }
        if updated is not None:
            event["updated"] = updated
        self.log.add("abr_decision", self.w, **event)
        self.last_abr_req = sample.request_id if sample else None
        self.last_decision = decision
        return decision

    # -- scheduler ----------------------------------------------------------------

    def _first_chunk_available(self, seg: int) -> bool:
        return chunk_available_at(self.tl, seg, 0) <= self.w + _EPS

    def _fully_available(self, seg: int) -> bool:
        return chunk_available_at(self.tl, seg, self.tl.chunks_per_segment - 1) <= self.w + _EPS

    def _scheduler_tick(self) -> None:
        cfg = self.cfg
        if self.pending is not None:
            kind, seg, rep_idx = self.pending
            self.pending = None
            if kind == "media" and seg == self.next_vseg:
                if self._first_chunk_available(seg):
                    self._issue_video(seg, rep_idx, "media")
                    return
                # decision will be remade on the next tick, possibly from the
                # init-derived sample that just landed
                self.wake = self.w + cfg.scheduler_timeout_s
                return
            if kind == "replace" and seg * self.tl.segment_duration_s > self.p + _EPS:
                self._issue_video(seg, rep_idx, "replacement")
                return
            # pending target invalidated (seek or playout moved on): fall through

        # keep the audio track trailing right behind buffered video
        if (
            self.next_aseg * self.tl.segment_duration_s < self.frontier - _EPS
            and self._fully_available(self.next_aseg)
        ):
            if not self.audio_inited:
                self._issue_init("audio", self.audio, 0)
                return
            self._issue_audio(self.next_aseg)
            return

        seg = self.next_vseg
        throttled = self.buffer_s >= cfg.stable_buffer_time_s and self.current_rep < self.top_idx
        if throttled and not cfg.fast_switching:
            self.wake = self.w + cfg.scheduler_timeout_s
            return

        decision = self._invoke_abr()

        if cfg.fast_switching:
            target = fast_switch_check(
                self.p, self.frontier, self.seg_reps, decision, cfg, self.tl.segment_duration_s
            )
            if target is not None:
                self._dispatch_video(target, decision, "replacement")
                return

        if throttled:
            self.wake = self.w + cfg.scheduler_timeout_s
            return

        # a switch fetches the new representation's init segment immediately,
        # before the media segment's availability is even checked: if that
        # segment then turns out not to exist yet, the next tick re-runs the
        # decision rule against the init-derived throughput sample
        if decision != self.last_initialized_rep:
            self.pending = ("media", seg, decision)
            self._issue_init("video", self.video[decision], decision)
            return

        if not self._first_chunk_available(seg):
            # live edge wait: decision rule already ran this tick
            self.wake = self.w + cfg.scheduler_timeout_s
            return

        self._issue_video(seg, decision, "media")

    def _dispatch_video(self, seg: int, rep_idx: int, purpose: str) -> None:
        if rep_idx != self.last_initialized_rep:
            kind = "media" if purpose == "media" else "replace"
            self.pending = (kind, seg, rep_idx)
            self._issue_init("video", self.video[rep_idx], rep_idx)
            return
        self._issue_video(seg, rep_idx, purpose)

    # -- transfer completion -------------------------------------------------------

    def _handle_transfer_event(self) -> None:
        fl = self.inflight
        assert fl is not None
        t, chunk_idx = fl.chunk_events[fl.next_i]
        fl.next_i += 1

        if fl.kind in ("video_init", "audio_init"):
            self._complete_init(fl, t)
            return
        if fl.kind == "audio":
            self._complete_audio(fl, t)
            return

        seg_dur = self.tl.segment_duration_s
        if fl.purpose == "media" and not fl.stale:
            chunk_end_media = fl.seg * seg_dur + (chunk_idx + 1) * self.tl.chunk_duration_s
            self.frontier = max(self.frontier, chunk_end_media)
            # the played quality is fixed from the first chunk: playout may
            # enter this segment while later chunks are still in flight
            if fl.seg not in self.seg_reps:
                self.seg_reps[fl.seg] = fl.rep_idx
        self.log.add("chunk_received", t, req=fl.req_id, seg=fl.seg, chunk=chunk_idx)
        # chunk-delimiter parsing times every chunk individually, so each one
        # is a throughput observation in its own right
        begin, end = fl.intervals[chunk_idx]
        self.history.record(
            ThroughputSample(
                SegmentRef(fl.seg, self.video[fl.rep_idx], is_init=False),
                fl.req_id,
                fl.sizes[chunk_idx] * 8.0,
                end - begin,
                is_init=False,
            )
        )
        if fl.purpose == "media" and not fl.stale:
            self._maybe_resume()

        if fl.next_i < len(fl.chunk_events):
            return
        # whole segment done
        rep = self.video[fl.rep_idx]
        sample = sample_from_transfer(
            SegmentRef(fl.seg, rep, is_init=False), fl.req_id, fl.intervals, fl.sizes
        )
        installed = None
        if fl.stale:
            pass
        elif fl.purpose == "media":
            self.seg_reps[fl.seg] = fl.rep_idx
            self.next_vseg = max(self.next_vseg, fl.seg + 1)
        else:
            installed = fl.seg * seg_dur > self.p + _EPS
            if installed:
                self.seg_reps[fl.seg] = fl.rep_idx
        event: dict = {
            "req": fl.req_id, "kind": "video", "seg": fl.seg, "rep": fl.rep_idx,
            "is_init": False, "bytes": sum(fl.sizes),
            "active_s": sample.active_transfer_s, "kbps": sample.derived_kbps,
            "purpose": fl.purpose,
        }
        if installed is not None:
            event["installed"] = installed
        self.log.add("request_completed", t, **event)
        self.inflight = None

    def _complete_init(self, fl: _Inflight, t: float) -> None:
        bits = 8.0 * chunk_bytes(self.video[0], self.tl, is_init=True)
        duration = t - fl.issue_t  # request-level timing: RTT included
        if fl.kind == "video_init":
            rep = self.video[fl.rep_idx]
            sample = ThroughputSample(
                SegmentRef(-1, rep, is_init=True), fl.req_id, bits, duration, is_init=True
            )
            self.history.record(sample)
            self.last_initialized_rep = fl.rep_idx
        else:
            self.audio_inited = True
        self.log.add(
            "request_completed", t, req=fl.req_id, kind=fl.kind.split("_")[0], seg=-1,
            rep=fl.rep_idx, is_init=True, bytes=int(bits / 8), active_s=duration,
            kbps=bits / duration / 1000.0, purpose="init",
        )
        self.inflight = None

    def _complete_audio(self, fl: _Inflight, t: float) -> None:
        if not fl.stale:
            seg_end = (fl.seg + 1) * self.tl.segment_duration_s
            self.audio_frontier = max(self.audio_frontier, seg_end)
            self.next_aseg = max(self.next_aseg, fl.seg + 1)
        active = sum(end - begin for begin, end in fl.intervals)
        bits = 8.0 * sum(fl.sizes)
        self.log.add(
            "request_completed", t, req=fl.req_id, kind="audio", seg=fl.seg, rep=0,
            is_init=False, bytes=sum(fl.sizes), active_s=active,
            kbps=bits / active / 1000.0, purpose="media",
        )
        self.inflight = None

    # -- sampling -------------------------------------------------------------------

    def _sample_tick(self, t: float) -> None:
        # reported metrics carry millisecond resolution, like real client reports
        self.log.add(
            "latency_sample", t, latency=round(self.latency, 3), playhead=self.p,
            buffer=max(self.buffer_s, 0.0), stalled=self.stalled,
        )
        self.sample_k += 1
        if not self.stalled:
            self._eval_catchup()

    # -- main loop --------------------------------------------------------------------

    def run(self) -> SessionLog:
        inf = math.inf
        for _ in range(self.MAX_EVENTS):
            end = self.end if self.rendered else self.prebuffer_deadline
            t_inflight = self.inflight.next_time if self.inflight else inf
            t_sched = max(self.w, self.wake) if self.inflight is None else inf
            if self.rendered and self.sample_k <= self.max_sample_k:
                t_sample = self.t0 + 0.5 * self.sample_k
            else:
                t_sample = inf
            if not self.stalled and self.rate > 0:
                t_under = self.w + max(self.frontier - self.p, 0.0) / self.rate
            else:
                t_under = inf
            t = min(end, t_inflight, t_sched, t_sample, t_under)
            self._advance(t)

            if t_inflight <= t + _EPS and t_inflight <= end:
                self._handle_transfer_event()
            elif t_under <= t + _EPS and not self.stalled:
                self._start_stall()
            elif t_sample <= t + _EPS:
                self._sample_tick(t_sample)
            elif t >= end:
                break
            else:
                self._scheduler_tick()
        else:
            raise RuntimeError("event budget exhausted: scheduling bug")

        end = self.end if self.rendered else self.prebuffer_deadline
        if self.stalled and self.rendered:
            self.stall_total += end - self.stall_started
            self.log.add("stall_end", end, playhead=self.p, truncated=True)
        self.log.add(
            "session_end", end, playhead=self.p,
            media_played=self.media_played, stall_total=self.stall_total,
        )
        self.log.meta["t0"] = self.t0 if self.rendered else self.t_join
        self.log.meta["startup_delay_s"] = (self.t0 - self.t_join) if self.rendered else None
        return self.log


def run_session(
    config: PlayerConfig,
    profile: NetworkProfile,
    timeline: StreamTimeline,
    ladder: list[Representation],
    link: LinkParams,
    seed: int = 0,
) -> SessionLog:
    """Play one full session and return its event log.

    Deterministic: identical inputs produce an identical log. The seed is
    echoed into the log for provenance; stochastic variation between runs
    (profile start offsets) is applied by the experiment runner before the
    profile reaches this function.
    """
    return _Session(config, profile, timeline, ladder, link, seed).run()
