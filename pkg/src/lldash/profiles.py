"""Seeded synthetic bandwidth profiles.

Four built-in shapes, A (most challenging) through D (least challenging),
emulate broadband session traces: a lognormal base level resampled every few
seconds, interrupted by periodic troughs. Shape A's mean sits below the middle
of the default ladder and its troughs drop under the lowest rung plus audio;
shape D's mean sits above the 2811 kbps rung with only mild dips.

Generation is fully determined by (shape, seed, duration); the built-in
profiles use fixed canonical seeds so every run sees identical traces.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache

from .netmodel import NetworkProfile

DEFAULT_DURATION_S = 1800.0


@dataclass(frozen=True)
class ShapeSpec:
    base_kbps: float
    sigma: float  # lognormal spread of the wandering base level
    clamp_kbps: tuple[float, float]
    trough_kbps: float
    trough_len_s: tuple[float, float]
    trough_gap_s: tuple[float, float]
    # optional second trough mode: brief dips mixed in with this probability
    trough_short_s: tuple[float, float] | None = None
    short_prob: float = 0.0


SHAPES: dict[str, ShapeSpec] = {
    "A": ShapeSpec(
        720.0, 0.25, (580.0, 1300.0), 100.0, (10.0, 18.0), (55.0, 95.0), (2.0, 3.0), 0.5
    ),
    "B": ShapeSpec(1300.0, 0.25, (600.0, 2400.0), 400.0, (3.0, 8.0), (90.0, 160.0)),
    "C": ShapeSpec(2300.0, 0.22, (1100.0, 4200.0), 900.0, (3.0, 6.0), (110.0, 200.0)),
    "D": ShapeSpec(4100.0, 0.12, (3000.0, 5200.0), 1800.0, (9.0, 14.0), (110.0, 200.0)),
}

# canonical seeds behind the bundled A-D profiles
BUILTIN_SEEDS = {"A": 101, "B": 102, "C": 103, "D": 104}


def generate_profile(shape: str, seed: int, duration_s: float = DEFAULT_DURATION_S) -> NetworkProfile:
    """Deterministically synthesise one profile of the given shape."""
    if shape not in SHAPES:
        raise ValueError(f"unknown shape {shape!r}, expected one of {sorted(SHAPES)}")
    spec = SHAPES[shape]
    # string seeding is hash-randomization-proof (int/str seeds are stable
    # across processes, tuple seeds are not)
    rng = random.Random(f"{shape}:{seed}")
    times: list[float] = []
    bws: list[float] = []
    t = 0.0
    next_trough = rng.uniform(*spec.trough_gap_s)
    while t < duration_s:
        if t >= next_trough:
            level = spec.trough_kbps * rng.uniform(0.8, 1.2)
            if spec.trough_short_s is not None and rng.random() < spec.short_prob:
                step = rng.uniform(*spec.trough_short_s)
            else:
                step = rng.uniform(*spec.trough_len_s)
            next_trough = t + step + rng.uniform(*spec.trough_gap_s)
        else:
            level = spec.base_kbps * rng.lognormvariate(0.0, spec.sigma)
            lo, hi = spec.clamp_kbps
            level = min(max(level, lo), hi)
            step = rng.uniform(4.0, 12.0)
            # never let the base step run through a scheduled trough
            step = min(step, max(next_trough - t, 0.5))
        times.append(t)
        bws.append(level * 1000.0)
        t += step
    return NetworkProfile(times, bws, duration_s)


@lru_cache(maxsize=None)
def builtin_profile(name: str) -> NetworkProfile:
    """One of the bundled profiles A-D at its canonical seed."""
    key = name.upper()
    if key not in BUILTIN_SEEDS:
        raise ValueError(f"unknown built-in profile {name!r}, expected A-D")
    return generate_profile(key, BUILTIN_SEEDS[key])
