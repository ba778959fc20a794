from collections import deque

import pytest
from hypothesis import given, strategies as st

from oracles import all_sequences, arf_reference, rram_reference
from mcastsim.channel import TARGET_SINR_DB
from mcastsim.rate_control import (
    ACK_COLLISION, FAILURE, ArfState, FixedRateController, LbArfController, OutcomeKind,
    RramController, RramNode, RramState, TxOutcome, arf_init, arf_on_outcome,
    receiver_ack_decision, rram_init, rram_on_outcome,
)

TIMER = 500_000
NODES = list(RramNode)


def valid_states():
    for node in NODES:
        for rate in range(8):
            for tpr in range(rate, 8):
                try:
                    yield RramState(node, rate, tpr)
                except ValueError:
                    pass


def outcomes_for(rate):
    hi = TARGET_SINR_DB[min(rate + 1, 7)] + 1.0
    lo = TARGET_SINR_DB[rate] - 1.0
    return [("success", TxOutcome.success(hi), hi), ("success", TxOutcome.success(lo), lo),
            ("failure", FAILURE, None), ("collision", ACK_COLLISION, None)]


# -- RRAM ------------------------------------------------------------------------


def test_rram_matches_reference_everywhere():
    checked = 0
    for s in valid_states():
        for kind, out, sinr in outcomes_for(s.rate):
            want = rram_reference(s.node.value, s.rate, s.tpr, kind, sinr)
            if want is None:
                with pytest.raises(ValueError):
                    rram_on_outcome(s, out)
                continue
            got = rram_on_outcome(s, out)
            assert (got.node.value, got.rate, got.tpr) == want, (s, kind)
            checked += 1
    assert checked > 200


def test_rram_reachable_states_keep_invariants():
    start = [rram_init(x) for x in (0.0, 12.0, 30.0)]
    seen = set(start)
    todo = deque(start)
    while todo:
        s = todo.popleft()
        assert s.tpr >= s.rate
        for kind, out, _ in outcomes_for(s.rate):
            if kind == "collision" and s.node not in (RramNode.S8, RramNode.S9):
                continue
            n = rram_on_outcome(s, out)
            assert n.tpr >= n.rate
            if n.rate > s.rate:
                assert s.node in (RramNode.S8, RramNode.S9) and n.node is RramNode.S10
                assert kind == "success" and n.rate == s.rate + 1
            if n.rate < s.rate:
                # the F2 step: second failure in a row
                assert kind == "failure" and s.node in (RramNode.F1, RramNode.S10)
                assert n.node is RramNode.BASE and n.rate == s.rate - 1
            if n not in seen:
                seen.add(n)
                todo.append(n)
    assert {s.rate for s in seen} == set(range(8))


def test_rram_init_uses_leader_sinr():
    assert rram_init(25.0).rate == 7
    assert rram_init(10.0).rate == 2
    assert rram_init(1.0).rate == 0


def test_rram_invalid_states_rejected():
    with pytest.raises(ValueError):
        RramState(RramNode.S1, 3, 4)
    with pytest.raises(ValueError):
        RramState(RramNode.S8, 4, 3)
    with pytest.raises(ValueError):
        RramState(RramNode.F2, 3, 3)
    with pytest.raises(ValueError):
        rram_on_outcome(RramState(RramNode.S1, 1, 1), TxOutcome(OutcomeKind.SUCCESS, None))


def test_rram_seven_successes_then_probe():
    s = rram_init(12.0)
    ok = TxOutcome.success(40.0)
    for _ in range(8):
        s = rram_on_outcome(s, ok)
    assert s.node is RramNode.S8 and s.tpr == s.rate + 1
    up = rram_on_outcome(s, ok)
    assert up.node is RramNode.S10 and up.rate == s.tpr


def test_receiver_ack_decision():
    assert receiver_ack_decision(3, 3, -50.0, True)
    assert not receiver_ack_decision(3, 3, 0.0, False)  # no probe
    assert receiver_ack_decision(4, 3, TARGET_SINR_DB[4] - 0.1, False)  # veto
    assert not receiver_ack_decision(4, 3, TARGET_SINR_DB[4] + 0.1, False)


def test_rram_controller_maps_stray_collision_to_failure():
    log = []
    c = RramController(3, log.append)
    c.on_outcome(ACK_COLLISION, 0)
    assert c.state.node is RramNode.F1
    c.on_leader_change(30.0, 1)
    assert c.rate == 7 and c.state.node is RramNode.INIT
    assert log[-1]["outcome"] == "leader-change"


def test_fixed_controller_never_moves():
    c = FixedRateController(0)
    for out in (FAILURE, TxOutcome.success(40.0), ACK_COLLISION):
        c.on_outcome(out, 0)
    c.on_leader_change(30, 0)
    assert (c.rate, c.tpr) == (0, 0)


# -- ARF -------------------------------------------------------------------------


def run_arf(start, seq, dt):
    st = arf_init(start, 0, TIMER)
    rates = []
    for i, ok in enumerate(seq):
        st = arf_on_outcome(st, ok, (i + 1) * dt, TIMER)
        rates.append(st.rate)
    return rates


@pytest.mark.parametrize("dt", [1_000, 90_000])
@pytest.mark.parametrize("start", [0, 3, 7])
def test_arf_matches_reference_all_short_sequences(start, dt):
    n = 0
    for seq in all_sequences(12):
        times = [(i + 1) * dt for i in range(len(seq))]
        assert run_arf(start, seq, dt) == arf_reference(start, seq, times, TIMER), seq
        n += 1
    assert n == 8191


def test_arf_basic_steps():
    st = arf_init(3, 0)
    st = arf_on_outcome(st, False, 1)
    assert st.rate == 3
    st = arf_on_outcome(st, False, 2)
    assert st.rate == 2
    for i in range(10):
        st = arf_on_outcome(st, True, 3 + i)
    assert st.rate == 3


def test_arf_timer_raises_rate():
    st = ArfState(2, 0, 0, 100)
    assert arf_on_outcome(st, True, 100).rate == 3
    assert arf_on_outcome(st, True, 99).rate == 2


def test_lbarf_collision_counts_as_loss():
    c = LbArfController(4, 0, TIMER)
    c.on_outcome(ACK_COLLISION, 1)
    c.on_outcome(ACK_COLLISION, 2)
    assert c.rate == 3 and c.tpr == 3


@given(st.lists(st.booleans(), max_size=60), st.integers(0, 7))
def test_arf_rate_in_range_and_moves_by_one(seq, start):
    st_ = arf_init(start, 0, TIMER)
    for i, ok in enumerate(seq):
        new = arf_on_outcome(st_, ok, i * 50_000, TIMER)
        assert 0 <= new.rate <= 7
        assert abs(new.rate - st_.rate) <= 1
        st_ = new
