import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lldash.netmodel import (
    ChunkSchedule,
    LinkParams,
    NetworkProfile,
    ProfileError,
    bandwidth_at,
    delivered_bits,
    gated_transfer,
    load_profile,
    save_profile,
    transfer_finish_time,
)


def write_csv(tmp_path, text):
    p = tmp_path / "prof.csv"
    p.write_text("time_s,bandwidth_kbps\n" + text)
    return str(p)


class TestLoadProfile:
    def test_two_breakpoints(self, tmp_path):
        prof = load_profile(write_csv(tmp_path, "0,1000\n10,2000\n"))
        assert bandwidth_at(prof, 5.0) == 1_000_000.0
        assert bandwidth_at(prof, 11.0) == 2_000_000.0

    def test_negative_bandwidth_rejected(self, tmp_path):
        with pytest.raises(ProfileError):
            load_profile(write_csv(tmp_path, "0,1000\n5,-100\n"))

    def test_single_row_constant(self, tmp_path):
        prof = load_profile(write_csv(tmp_path, "0,8000\n"))
        for t in (0.0, 1.0, 1e6):
            assert bandwidth_at(prof, t) == 8_000_000.0

    def test_unsorted_rejected(self, tmp_path):
        with pytest.raises(ProfileError):
            load_profile(write_csv(tmp_path, "0,1000\n10,2000\n5,1500\n"))

    def test_empty_rejected(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("")
        with pytest.raises(ProfileError):
            load_profile(str(p))

    def test_malformed_row_rejected(self, tmp_path):
        with pytest.raises(ProfileError):
            load_profile(write_csv(tmp_path, "0,abc\n"))

    def test_round_trip(self, tmp_path):
        prof = NetworkProfile([0.0, 12.5, 90.0], [500_000.0, 2_500_000.0, 750_000.0], 120.0)
        path = str(tmp_path / "rt.csv")
        save_profile(prof, path)
        back = load_profile(path)
        assert back.times_s == prof.times_s
        assert back.bandwidths_bps == prof.bandwidths_bps


class TestBandwidthAt:
    def test_step_function(self):
        prof = NetworkProfile([0.0, 10.0], [1e6, 2e6], 20.0)
        assert bandwidth_at(prof, 9.999) == 1e6
        # breakpoint intervals are left-closed: new value at the breakpoint
        assert bandwidth_at(prof, 10.0) == 2e6
        assert bandwidth_at(prof, 500.0) == 2e6

    def test_invariants_enforced(self):
        with pytest.raises(ProfileError):
            NetworkProfile([1.0], [1e6], 10.0)  # must start at 0
        with pytest.raises(ProfileError):
            NetworkProfile([0.0, 0.0], [1e6, 2e6], 10.0)
        with pytest.raises(ProfileError):
            NetworkProfile([0.0], [0.0], 10.0)


class TestTransferFinishTime:
    def test_constant_rate(self):
        prof = NetworkProfile([0.0], [8e6], 100.0)
        t = transfer_finish_time(prof, 0.0, 1_048_576, LinkParams(0.05))
        assert t == pytest.approx(1.098576, abs=1e-12)

    def test_piecewise(self):
        prof = NetworkProfile([0.0, 1.0], [1e6, 2e6], 100.0)
        t = transfer_finish_time(prof, 0.0, 187_500, LinkParams(0.0))
        assert t == pytest.approx(1.25, abs=1e-12)

    def test_zero_payload_rtt_only(self):
        prof = NetworkProfile([0.0], [1e6], 100.0)
        assert transfer_finish_time(prof, 3.0, 0, LinkParams(0.05)) == pytest.approx(3.05)

    @given(
        payload=st.integers(min_value=0, max_value=2_000_000),
        extra=st.integers(min_value=1, max_value=500_000),
        start=st.floats(min_value=0, max_value=50, allow_nan=False),
    )
    def test_monotone_in_payload(self, payload, extra, start):
        prof = NetworkProfile([0.0, 7.0, 31.0], [2e6, 5e5, 3e6], 60.0)
        link = LinkParams(0.02)
        t1 = transfer_finish_time(prof, start, payload, link)
        t2 = transfer_finish_time(prof, start, payload + extra, link)
        assert t2 > t1

    @given(
        start=st.floats(min_value=0, max_value=50, allow_nan=False),
        later=st.floats(min_value=0, max_value=20, allow_nan=False),
    )
    def test_monotone_in_start(self, start, later):
        prof = NetworkProfile([0.0, 7.0, 31.0], [2e6, 5e5, 3e6], 60.0)
        link = LinkParams(0.02)
        t1 = transfer_finish_time(prof, start, 300_000, link)
        t2 = transfer_finish_time(prof, start + later, 300_000, link)
        assert t2 >= t1


def brute_force_finish(times_ticks, bws, start_ticks, payload_bytes, dt=1e-4):
    """Independent oracle: fixed-step integration at 0.1 ms, stepping on an
    integer tick lattice shared with the breakpoints, with final-step
    interpolation."""
    need = payload_bytes * 8.0
    if need == 0:
        return start_ticks * dt
    bws = np.asarray(bws)
    horizon_ticks = start_ticks + int(need / bws.min() / dt) + 2
    grid = np.arange(start_ticks, horizon_ticks, dtype=np.int64)
    idx = np.searchsorted(np.asarray(times_ticks), grid, side="right") - 1
    idx = np.clip(idx, 0, len(bws) - 1)
    cum = np.cumsum(bws[idx] * dt)
    k = int(np.searchsorted(cum, need))
    prev = cum[k - 1] if k > 0 else 0.0
    return (start_ticks + k) * dt + (need - prev) / bws[idx[k]]


class TestTransferOracle:
    def test_against_brute_force_stepper(self):
        # breakpoints, starts and rtt all sit on the stepper's 0.1 ms grid, so
        # the stepper's only error source is floating-point accumulation
        rng = np.random.default_rng(42)
        dt = 1e-4
        for trial in range(1000):
            n = int(rng.integers(1, 6))
            ticks = sorted({0, *map(int, rng.integers(1, 300_000, size=n - 1))}) if n > 1 else [0]
            bws = [float(b) for b in rng.uniform(2e5, 2e7, size=len(ticks))]
            prof = NetworkProfile([t * dt for t in ticks], bws, ticks[-1] * dt + 1.0)
            start_ticks = int(rng.integers(0, 100_000))
            rtt_ticks = int(rng.integers(0, 2_000))
            payload = int(rng.integers(1, 400_000))
            exact = transfer_finish_time(
                prof, start_ticks * dt, payload, LinkParams(rtt_ticks * dt)
            )
            stepped = brute_force_finish(ticks, bws, start_ticks + rtt_ticks, payload)
            assert abs(exact - stepped) <= 1e-6 * max(stepped, 1.0), (
                f"trial {trial}: exact={exact} stepped={stepped}"
            )


class TestGatedTransfer:
    def test_live_edge_chunks(self):
        prof = NetworkProfile([0.0], [10e6], 100.0)
        sched = ChunkSchedule([(0.96, 120_000), (1.92, 120_000)])
        ivals = gated_transfer(prof, 0.0, sched, LinkParams(0.0))
        assert ivals[0] == (pytest.approx(0.96), pytest.approx(1.056))
        assert ivals[1] == (pytest.approx(1.92), pytest.approx(2.016))

    def test_back_to_back_when_available(self):
        prof = NetworkProfile([0.0], [10e6], 100.0)
        sched = ChunkSchedule([(0.0, 120_000), (0.0, 120_000)])
        ivals = gated_transfer(prof, 0.0, sched, LinkParams(0.0))
        assert ivals[0] == (pytest.approx(0.0), pytest.approx(0.096))
        assert ivals[1] == (pytest.approx(0.096), pytest.approx(0.192))

    def test_availability_dominates_rtt(self):
        prof = NetworkProfile([0.0], [10e6], 100.0)
        ivals = gated_transfer(prof, 0.0, ChunkSchedule([(5.0, 1000)]), LinkParams(0.05))
        assert ivals[0][0] == pytest.approx(5.0)

    def test_equals_single_transfer_when_all_available(self):
        prof = NetworkProfile([0.0, 3.0, 9.0], [2e6, 8e5, 4e6], 30.0)
        link = LinkParams(0.03)
        sizes = [120_000, 90_000, 55_000, 240_000]
        sched = ChunkSchedule([(0.0, s) for s in sizes])
        ivals = gated_transfer(prof, 1.0, sched, link)
        whole = transfer_finish_time(prof, 1.0, sum(sizes), link)
        assert ivals[-1][1] == pytest.approx(whole, abs=1e-9)
        # back-to-back continuity
        for (a0, a1), (b0, b1) in zip(ivals, ivals[1:]):
            assert b0 == pytest.approx(a1, abs=1e-12)

    def test_active_durations_sum_on_constant_link(self):
        prof = NetworkProfile([0.0], [5e6], 100.0)
        link = LinkParams(0.02)
        sizes = [100_000, 100_000, 100_000, 100_000]
        sched = ChunkSchedule([(0.96 * (j + 1), sizes[j]) for j in range(4)])
        ivals = gated_transfer(prof, 0.0, sched, link)
        active = sum(e - b for b, e in ivals)
        assert active == pytest.approx(sum(sizes) * 8 / 5e6, abs=1e-9)

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            ChunkSchedule([])
        with pytest.raises(ValueError):
            ChunkSchedule([(1.0, 100), (0.5, 100)])
        with pytest.raises(ValueError):
            ChunkSchedule([(0.0, 0)])


class TestShiftAndBits:
    def test_shifted_lookup(self):
        prof = NetworkProfile([0.0, 10.0, 20.0], [1e6, 2e6, 3e6], 30.0)
        shifted = prof.shifted(15.0)
        assert bandwidth_at(shifted, 0.0) == 2e6
        assert bandwidth_at(shifted, 5.0) == 3e6
        assert shifted.times_s[0] == 0.0

    def test_delivered_bits_matches_rate(self):
        prof = NetworkProfile([0.0, 1.0], [1e6, 2e6], 30.0)
        assert delivered_bits(prof, 0.5, 1.5) == pytest.approx(0.5e6 + 1e6)

    @given(off=st.floats(min_value=0, max_value=25, allow_nan=False))
    def test_shift_consistency(self, off):
        prof = NetworkProfile([0.0, 10.0, 20.0], [1e6, 2e6, 3e6], 30.0)
        shifted = prof.shifted(off)
        for t in (0.0, 1.0, 7.5, 14.0, 40.0):
            assert bandwidth_at(shifted, t) == bandwidth_at(prof, t + off)
