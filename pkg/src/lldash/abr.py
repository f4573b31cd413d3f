"""Bitrate decision rules: throughput rule, BOLA, the Dynamic hybrid,
the online-learning rule (original and modified update triggering), and the
QoE-score maximiser with its optional self-organising-map extension.

All deciders are pure functions over an explicit context; algorithms that
carry state take it as an argument and return/mutate it explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .media import Representation
from .throughput import ThroughputSample

NEW_SAMPLE = "new-sample"
SCHEDULER_REPEAT = "scheduler-repeat"

L2A_ORIGINAL = "original"
L2A_MODIFIED = "modified"


@dataclass
class AbrContext:
    buffer_s: float
    live_latency_s: float
    target_latency_s: float
    last_sample: ThroughputSample | None
    swma_kbps: float
    ladder: list[Representation]  # video rungs, ascending bitrate
    previous_decision: int
    decision_trigger: str = NEW_SAMPLE
    segment_duration_s: float = 3.84


def throughput_rule(swma_kbps: float, ladder: list[Representation], safety: float = 0.9) -> int:
    """Highest rung whose bitrate fits under safety x estimated throughput."""
    if swma_kbps <= 0:
        raise ValueError("swma_kbps must be > 0")
    cap = safety * swma_kbps
    choice = 0
    for rep in ladder:
        if rep.bitrate_kbps <= cap:
            choice = rep.index
    return choice


@dataclass(frozen=True)
class BolaParams:
    vp: float
    gp: float
    utilities: tuple[float, ...]
    segment_bytes: tuple[float, ...]


def make_bola_params(
    ladder: list[Representation], buffer_target_s: float, segment_duration_s: float = 3.84
) -> BolaParams:
    """Two-point calibration of the Lyapunov scores.

    gp is the smallest bias for which the lowest rung wins at an empty buffer
    (gp >= u_m*S_0/(S_m - S_0) for every rung, padded so the tie resolves down),
    and vp then places the top rung's win exactly at the buffer target:
    vp*(u_top + gp) = buffer_target - segment_duration.
    """
    sizes = tuple(r.bitrate_kbps * 1000.0 * segment_duration_s / 8.0 for r in ladder)
    utilities = tuple(math.log(s / sizes[0]) for s in sizes)
    if len(sizes) == 1:
        return BolaParams(vp=1.0, gp=1.0, utilities=utilities, segment_bytes=sizes)
    gp = max(
        utilities[m] * sizes[0] / (sizes[m] - sizes[0]) for m in range(1, len(sizes))
    ) * (1.0 + 1e-6)
    # a target below ~2 segments makes the calibration degenerate
    buffer_target_s = max(buffer_target_s, 2.0 * segment_duration_s)
    vp = (buffer_target_s - segment_duration_s) / (utilities[-1] + gp)
    return BolaParams(vp=vp, gp=gp, utilities=utilities, segment_bytes=sizes)


def bola_decide(buffer_s: float, ladder: list[Representation], params: BolaParams) -> int:
    """argmax over rungs of (vp*(u_m + gp) - buffer) / size_m, ties to the lower rung."""
    if buffer_s < 0:
        raise ValueError("buffer_s must be >= 0")
    best = 0
    best_score = None
    for m in range(len(ladder)):
        score = (params.vp * (params.utilities[m] + params.gp) - buffer_s) / params.segment_bytes[m]
        if best_score is None or score > best_score:
            best = m
            best_score = score
    return best


@dataclass
class DynamicState:
    """Hybrid rule state: which half is active, plus its calibration."""

    bola: BolaParams
    switch_buffer_s: float = 10.0
    hysteresis_s: float = 1.0
    safety: float = 0.9
    using_bola: bool = False


def dynamic_decide(ctx: AbrContext, state: DynamicState) -> int:
    """Throughput rule on short buffers, BOLA otherwise, with hysteresis.

    BOLA upswitches are capped by the throughput rule, as the production hybrid
    does: a deep buffer must not launch the bitrate past what the link carries.
    """
    if state.using_bola:
        if ctx.buffer_s < state.switch_buffer_s - state.hysteresis_s:
            state.using_bola = False
    elif ctx.buffer_s >= state.switch_buffer_s:
        state.using_bola = True

    if not state.using_bola:
        return throughput_rule(ctx.swma_kbps, ctx.ladder, state.safety)

    quality = bola_decide(ctx.buffer_s, ctx.ladder, state.bola)
    if quality > ctx.previous_decision:
        supported = throughput_rule(ctx.swma_kbps, ctx.ladder, state.safety)
        if quality > supported:
            quality = max(ctx.previous_decision, supported)
    return quality


def simplex_project(v: list[float]) -> list[float]:
    """Euclidean projection onto {x >= 0, sum x = 1} (sort-and-threshold)."""
    n = len(v)
    if n == 0:
        raise ValueError("cannot project an empty vector")
    u = sorted(v, reverse=True)
    css = 0.0
    theta = 0.0
    for j in range(n):
        css += u[j]
        t = (css - 1.0) / (j + 1)
        if u[j] - t > 0:
            theta = t
    return [max(x - theta, 0.0) for x in v]


@dataclass
class L2AState:
    """Weight vector over rungs plus the update-trigger bookkeeping.

    The modified variant consumes each throughput sample at most once and
    never consumes init-segment samples; the original variant updates on
    every invocation with whatever sample is most recent.
    """

    weights: list[float]
    cached_decision: int = 0
    last_consumed_request: int | None = None
    step_count: int = 0
    eta: float = 0.5
    latency_weight: float = 1.0
    # instrumentation for pathology analysis
    total_updates: int = 0
    init_updates: int = 0

    @classmethod
    def fresh(cls, ladder: list[Representation], eta: float = 0.5, latency_weight: float = 1.0) -> "L2AState":
        # all mass on the lowest rung: conservative cold start
        w = [0.0] * len(ladder)
        w[0] = 1.0
        return cls(weights=w, eta=eta, latency_weight=latency_weight)


def _expected_bitrate(weights: list[float], ladder: list[Representation]) -> float:
    return sum(w * r.bitrate_kbps for w, r in zip(weights, ladder))


def _decision_from_weights(weights: list[float], ladder: list[Representation]) -> int:
    expected = _expected_bitrate(weights, ladder)
    choice = 0
    for rep in ladder:
        if rep.bitrate_kbps <= expected:
            choice = rep.index
    return choice


def l2a_decide(
    state: L2AState, ctx: AbrContext, variant: str = L2A_MODIFIED
) -> tuple[int, L2AState]:
    """One decision step of the online-learning rule.

    The update is a projected gradient step on the weight vector against a loss
    that penalises an expected bitrate out of proportion to the most recent
    throughput sample, plus a hinge on projected latency overshoot. The decision
    is the highest rung at or below the expected bitrate.
    """
    if variant not in (L2A_ORIGINAL, L2A_MODIFIED):
        raise ValueError(f"unknown variant {variant!r}")
    sample = ctx.last_sample
    if sample is None:
        return state.cached_decision, state
    if variant == L2A_MODIFIED:
        if sample.is_init or sample.request_id == state.last_consumed_request:
            return state.cached_decision, state

    rate_kbps = sample.derived_kbps
    ladder = ctx.ladder
    b_top = ladder[-1].bitrate_kbps
    x = _expected_bitrate(state.weights, ladder)

    # d/dx of (x/r - 1) * x / b_top
    slope = (2.0 * x / rate_kbps - 1.0) / b_top
    grads = [slope * rep.bitrate_kbps for rep in ladder]
    # hinge: projected latency if the expected bitrate outruns the link
    overshoot = max(0.0, x / rate_kbps - 1.0) * ctx.segment_duration_s
    if overshoot > 0 and ctx.live_latency_s + overshoot > ctx.target_latency_s:
        for i, rep in enumerate(ladder):
            grads[i] += state.latency_weight * ctx.segment_duration_s * rep.bitrate_kbps / rate_kbps

    state.step_count += 1
    step = state.eta / math.sqrt(state.step_count)
    state.weights = simplex_project(
        [w - step * g for w, g in zip(state.weights, grads)]
    )
    state.cached_decision = _decision_from_weights(state.weights, ladder)
    state.last_consumed_request = sample.request_id
    state.total_updates += 1
    if sample.is_init:
        state.init_updates += 1
    return state.cached_decision, state


@dataclass
class SomGrid:
    """Tiny self-organising map over (throughput, buffer, latency) contexts.

    Each node remembers a context prototype and a preferred rung; the winning
    node's preference pulls scores toward rungs near it. Experimental and off
    by default.
    """

    nodes: list[list[float]]  # [f0, f1, f2, preferred_rung]
    learn_rate: float = 0.1
    strength: float = 0.3
    width: float = 1.5

    @classmethod
    def fresh(cls, n_rungs: int, n_nodes: int = 8) -> "SomGrid":
        nodes = []
        for i in range(n_nodes):
            frac = i / max(n_nodes - 1, 1)
            nodes.append([frac, frac, 1.0, frac * (n_rungs - 1)])
        return cls(nodes=nodes)

    def _features(self, ctx: AbrContext) -> list[float]:
        b_top = ctx.ladder[-1].bitrate_kbps
        return [
            min(ctx.swma_kbps / b_top, 2.0) if math.isfinite(ctx.swma_kbps) else 2.0,
            min(ctx.buffer_s / max(ctx.target_latency_s, 1e-9), 2.0),
            min(ctx.live_latency_s / max(ctx.target_latency_s, 1e-9), 2.0),
        ]

    def best_matching(self, ctx: AbrContext) -> list[float]:
        feats = self._features(ctx)
        return min(self.nodes, key=lambda n: sum((a - b) ** 2 for a, b in zip(n, feats)))

    def modulate(self, scores: list[float], ctx: AbrContext) -> list[float]:
        node = self.best_matching(ctx)
        pref = node[3]
        return [
            s + self.strength * math.exp(-((m - pref) ** 2) / (2.0 * self.width**2))
            for m, s in enumerate(scores)
        ]

    def learn(self, ctx: AbrContext, chosen: int) -> None:
        node = self.best_matching(ctx)
        feats = self._features(ctx)
        for i in range(3):
            node[i] += self.learn_rate * (feats[i] - node[i])
        node[3] += self.learn_rate * (chosen - node[3])


@dataclass
class LolpModel:
    """QoE-score weights: bitrate reward, rebuffer, latency and switch penalties."""

    bitrate_weight: float = 1.0
    rebuffer_weight: float = 1.0
    latency_weight: float = 0.5
    switch_weight: float = 0.5
    som: SomGrid | None = None

    def __post_init__(self) -> None:
        for w in (self.bitrate_weight, self.rebuffer_weight, self.latency_weight, self.switch_weight):
            if w < 0:
                raise ValueError("model weights must be >= 0")


def lolp_scores(ctx: AbrContext, model: LolpModel) -> list[float]:
    """Predicted per-rung QoE scores for the next segment.

    Reward and switch cost are both measured in log-bitrate units so they stay
    commensurate on ladders spanning two orders of magnitude; rebuffer and
    latency-overshoot predictions are in seconds.
    """
    ladder = ctx.ladder
    b0 = ladder[0].bitrate_kbps
    b_prev = ladder[ctx.previous_decision].bitrate_kbps
    scores = []
    for rep in ladder:
        if math.isfinite(ctx.swma_kbps) and ctx.swma_kbps > 0:
            download_s = rep.bitrate_kbps * ctx.segment_duration_s / ctx.swma_kbps
        else:
            download_s = 0.0
        rebuffer = max(0.0, download_s - ctx.buffer_s)
        # latency grows through stalls and, at the live edge, through any
        # download slower than real time (that deficit cannot be won back)
        deficit = max(0.0, download_s - ctx.segment_duration_s)
        predicted_latency = ctx.live_latency_s + rebuffer + deficit
        score = (
            model.bitrate_weight * math.log(rep.bitrate_kbps / b0)
            - model.rebuffer_weight * rebuffer
            - model.latency_weight * abs(predicted_latency - ctx.target_latency_s)
            - model.switch_weight * abs(math.log(rep.bitrate_kbps / b_prev))
        )
        scores.append(score)
    return scores


def lolp_decide(ctx: AbrContext, model: LolpModel) -> int:
    """argmax of the predicted QoE scores, ties to the lower rung."""
    scores = lolp_scores(ctx, model)
    if model.som is not None:
        scores = model.som.modulate(scores, ctx)
    best = 0
    best_score = scores[0]
    for m, s in enumerate(scores):
        if s > best_score:
            best = m
            best_score = s
    if model.som is not None:
        model.som.learn(ctx, best)
    return best
