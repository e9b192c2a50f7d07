import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from logdos.bloom import RotatingFilterPair, random_words
from logdos.messages import digest_of
from logdos.strategies import (
    DynamicParams,
    RouterState,
    StrategyKind,
    Verdict,
    dynamic_advance,
    on_data,
    on_get,
    should_log,
)

K = StrategyKind
SID = bytes(range(16))


def router(kind, params=None, t0=0, m=1 << 14, cap=1000):
    pair = RotatingFilterPair(m, 3, cap, seed=1) if kind.uses_filters else None
    state = RouterState(kind=kind, run_seed=5, pair=pair, params=params)
    if kind is K.DYNAMIC:
        state.dyn.t0 = t0
    return state


class TestShouldLog:
    def test_odd_on_five_as_path(self):
        # arrival prefixes 0..4 at A..E; odd logging hits B and D
        assert [i for i in range(5) if should_log(K.ODD, i)] == [1, 3]

    def test_even_counts_empty_prefix(self):
        assert should_log(K.EVEN, 0)

    def test_comprehensive_and_off(self):
        assert all(should_log(K.COMPREHENSIVE, i) for i in range(10))
        assert not any(should_log(k, i) for k in (K.NO_DEFENSE, K.DPID) for i in range(10))

    @given(st.integers(1, 200))
    def test_parity_partition(self, n):
        odd = {i for i in range(n) if should_log(K.ODD, i)}
        even = {i for i in range(n) if should_log(K.EVEN, i)}
        assert len(odd) == n // 2 and len(even) == (n + 1) // 2
        assert odd | even == set(range(n)) and not odd & even

    def test_parse(self):
        assert K.parse("NoDefense") is K.NO_DEFENSE
        assert K.parse("Comprehensive") is K.COMPREHENSIVE
        with pytest.raises(ValueError):
            K.parse("bogus")


class TestStaticStrategies:
    @pytest.mark.parametrize("kind", [K.COMPREHENSIVE, K.ODD, K.EVEN])
    def test_logged_data_is_allowed(self, kind):
        # every AS on a 6-AS path logs its arrival prefix, then checks the stripped one
        pids = [11, 12, 13, 14, 15]
        states = [router(kind) for _ in range(6)]
        for i, st_ in enumerate(states):
            on_get(st_, SID, tuple(pids[:i]), 0)
        for i, st_ in enumerate(states):
            assert on_data(st_, SID, tuple(pids[:i]), 1).allowed
        logged = [st_.logged for st_ in states]
        assert logged == [int(should_log(kind, i)) for i in range(6)]

    def test_comprehensive_logs_once_per_as(self):
        states = [router(K.COMPREHENSIVE) for _ in range(4)]
        for i, st_ in enumerate(states):
            on_get(st_, SID, tuple(range(i)), 0)
        assert [s.pair.filters[s.pair.active].inserted for s in states] == [1, 1, 1, 1]

    def test_odd_skips_even_prefix(self):
        st_ = router(K.ODD)
        assert not on_get(st_, SID, (1, 2), 0)
        assert st_.logged == 0
        assert on_data(st_, SID, (1, 2), 0) is Verdict.PASS

    def test_unlogged_data_rejected(self):
        st_ = router(K.COMPREHENSIVE)
        assert on_data(st_, SID, (1,), 0) is Verdict.REJECT
        assert st_.rejected == 1

    def test_no_defense(self):
        assert on_data(router(K.NO_DEFENSE), SID, (1,), 0) is Verdict.PASS

    def test_dpid_epoch(self):
        st_ = router(K.DPID)
        assert on_data(st_, SID, (), 0, packet_epoch=3, current_epoch=3) is Verdict.ALLOW
        assert on_data(st_, SID, (), 0, packet_epoch=2, current_epoch=3) is Verdict.REJECT
        assert on_data(st_, SID, (), 0, packet_epoch=-1, current_epoch=0) is Verdict.REJECT

    def test_attack_pass_rate_matches_fill(self):
        # filter at design load: unlogged digests pass with the analytic FP rate
        pair = RotatingFilterPair.for_target(20_000, 0.05, 3, seed=2)
        rng = np.random.default_rng(0)
        pair.insert_many(random_words(rng, 20_000))
        st_ = RouterState(kind=K.COMPREHENSIVE, run_seed=9, pair=pair)
        sids = [rng.bytes(16) for _ in range(40_000)]
        passed = sum(on_data(st_, s, (7, 8), 0).allowed for s in sids)
        expected = pair.filters[0].expected_fp()
        sd = (expected * (1 - expected) / len(sids)) ** 0.5
        assert abs(passed / len(sids) - expected) < 4 * sd


def dyn_router(T0=100, S=50, delta=10, threshold=3, t0=0):
    return router(K.DYNAMIC, DynamicParams(initial=T0, silent=S, delta=delta, threshold=threshold), t0=t0)


class TestDynamic:
    def test_windows(self):
        st_ = dyn_router(t0=20)
        assert st_.logging_window() == (20, 120)
        assert st_.validation_window() == (30, 130)

    def test_outside_window_not_logged(self):
        st_ = dyn_router(t0=20)
        assert not on_get(st_, SID, (), 5)
        assert on_get(st_, SID, (), 20)
        assert not on_get(st_, SID, (), 120)

    def test_validation_only_in_shifted_window(self):
        st_ = dyn_router(t0=0)
        assert on_data(st_, SID, (1,), 5) is Verdict.PASS  # before t0 + delta
        assert on_data(st_, SID, (1,), 10) is Verdict.REJECT
        assert st_.dyn.c == 1

    def test_attack_extends_window(self):
        st_ = dyn_router(T0=100, delta=10, threshold=3)
        for t in range(20, 24):  # c = 4 > threshold
            on_data(st_, SID, (t,), t)
        dynamic_advance(st_, 110)
        assert st_.logging_window() == (0, 200)
        assert st_.dyn.c == 0

    def test_quiet_interval_goes_silent(self):
        st_ = dyn_router(T0=100, S=50, delta=10, threshold=3)
        for t in range(20, 23):  # c = 3, not above threshold
            on_data(st_, SID, (t,), t)
        dynamic_advance(st_, 110)
        assert st_.logging_window() == (150, 250)
        assert st_.dyn.c == 0

    def test_three_detections(self):
        T0 = 100
        st_ = dyn_router(T0=T0, S=50, delta=10, threshold=1)
        for _ in range(3):
            start, end = st_.validation_window()
            on_data(st_, SID, (1,), start)
            on_data(st_, SID, (2,), start + 1)
            dynamic_advance(st_, end)
        assert st_.dyn.T == 4 * T0
        assert st_.dyn.t0 == 0

    def test_rollover_resets_filters(self):
        st_ = dyn_router(T0=100, S=50, delta=10)
        on_get(st_, SID, (), 5)
        assert on_data(st_, SID, (), 15) is Verdict.ALLOW
        dynamic_advance(st_, 110)
        assert st_.pair.filters[0].inserted == 0
        # next window starts at 150, validation at 160
        assert on_data(st_, SID, (), 160) is Verdict.REJECT

    def test_catch_up_over_idle_periods(self):
        st_ = dyn_router(T0=100, S=50, delta=10)
        dynamic_advance(st_, 1000)
        # windows at 0, 150, 300, ... ; 1000 falls in the one starting at 900
        assert st_.logging_window() == (900, 1000)
        assert st_.dyn.rollovers == 6

    @given(
        T0=st.integers(1, 500),
        S=st.integers(0, 500),
        delta=st.integers(0, 100),
        ticks=st.lists(st.integers(0, 5000), max_size=30),
    )
    def test_window_shape(self, T0, S, delta, ticks):
        st_ = dyn_router(T0=T0, S=S, delta=delta)
        for t in sorted(ticks):
            on_data(st_, SID, (t,), t)
            lo, hi = st_.logging_window()
            vlo, vhi = st_.validation_window()
            assert hi - lo == vhi - vlo == st_.dyn.T >= T0
            assert vlo - lo == delta
            assert t < vhi
