import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import system_with
from samsim.engine import MsgKind
from samsim.mesh import NodeRef, Role, TileCoord
from samsim.monitoring import AssociativeCounterArray, KnowledgeBase, StatusRecord

A = NodeRef(TileCoord(0, 0), Role.MEM)
B = NodeRef(TileCoord(1, 0), Role.CPU)


def rec(node, at, free=4, util=0.0):
    return StatusRecord(node, free, util, at)


def test_status_record_rejects_bad_utilization():
    with pytest.raises(ValueError):
        rec(A, 0, util=1.5)


def test_merge_keeps_fresher_record():
    kb = KnowledgeBase(B)
    assert kb.merge([rec(A, 100, free=7)]) == 1
    assert kb.merge([rec(A, 90, free=1)]) == 0
    assert kb.get(A).observed_at == 100 and kb.get(A).free_frames == 7
    assert kb.merge([rec(A, 100, free=2)]) == 0  # equal age is not newer


def test_merge_ignores_own_record():
    kb = KnowledgeBase(A)
    kb.merge([rec(A, 5)])
    assert A not in kb and len(kb) == 0


def test_relayable_age_bound():
    kb = KnowledgeBase(B)
    kb.merge([rec(A, 0)])
    assert kb.relayable(2000, 2000) == [rec(A, 0)]
    assert kb.relayable(2001, 2000) == []


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 1000)), max_size=60))
def test_knowledge_is_monotone(updates):
    kb = KnowledgeBase(NodeRef(TileCoord(9, 9), Role.CPU))
    best: dict[int, int] = {}
    for x, at in updates:
        node = NodeRef(TileCoord(x, 0), Role.MEM)
        before = kb.get(node)
        kb.merge([rec(node, at)])
        after = kb.get(node)
        assert before is None or after.observed_at >= before.observed_at
        best[x] = max(best.get(x, -1), at)
    for x, at in best.items():
        assert kb.get(NodeRef(TileCoord(x, 0), Role.MEM)).observed_at == at


def test_counter_fires_on_the_threshold_bump_only():
    arr = AssociativeCounterArray(capacity=16, threshold=45)
    results = [arr.bump("r") for _ in range(50)]
    assert all(r is None for r in results[:44])
    assert results[44] is not None and results[44].count == 45
    assert all(r is None for r in results[45:])


def test_counter_eviction_takes_min_then_oldest():
    arr = AssociativeCounterArray(capacity=4, threshold=100)
    for key, n in (("a", 3), ("b", 1), ("c", 1), ("d", 2)):
        for _ in range(n):
            arr.bump(key)
    arr.bump("e")
    assert dict(arr.items()) == {"a": 3, "c": 1, "d": 2, "e": 1}
    arr.bump("f")  # c and e tie at 1; c is older
    assert "c" not in dict(arr.items()) and "e" in dict(arr.items())


def test_reset_clears_counts_and_fired_flags():
    arr = AssociativeCounterArray(capacity=2, threshold=2)
    arr.bump("x")
    assert arr.bump("x") is not None
    arr.reset()
    assert len(arr) == 0
    assert arr.bump("x") is None and arr.count("x") == 1
    assert arr.bump("x") is not None


def test_fired_flag_survives_eviction_until_reset():
    arr = AssociativeCounterArray(capacity=1, threshold=2)
    arr.bump("x")
    assert arr.bump("x") is not None
    arr.bump("y")  # evicts x
    arr.bump("x")  # evicts y, x restarts at 1
    assert arr.bump("x") is None


@given(st.lists(st.integers(0, 6), max_size=300), st.integers(1, 5), st.integers(1, 8))
def test_trigger_once_and_capacity(keys, capacity, threshold):
    arr = AssociativeCounterArray(capacity, threshold)
    fired = []
    for k in keys:
        hit = arr.bump(k)
        assert len(arr) <= capacity
        if hit is not None:
            fired.append(hit.key)
    assert len(fired) == len(set(fired))


def line_system(**cfg):
    sys = system_with({}, mesh_w=3, mesh_h=1, placement=("MCM",), monitoring=True,
                      emission_period=1000, **cfg)
    sys.start()
    return sys


def run_until(sys, cycle):
    sim = sys.sim
    while sim.next_time() is not None and sim.next_time() <= cycle:
        sim.step()


def test_two_hop_relay_on_a_line():
    sys = line_system()
    a, c = (sys.mesh.node_at(TileCoord(x, 0)) for x in (0, 2))
    run_until(sys, 1000)
    assert a not in sys.agent(c).kb  # one period covers only radius 1
    run_until(sys, 2000)
    assert a in sys.agent(c).kb


def test_radius_two_reaches_directly():
    sys = line_system(radius=2)
    a, c = (sys.mesh.node_at(TileCoord(x, 0)) for x in (0, 2))
    run_until(sys, 100)
    assert a in sys.agent(c).kb


@pytest.mark.parametrize("radius", [1, 2])
def test_status_messages_per_period(radius):
    sys = system_with({}, monitoring=True, radius=radius, emission_period=1000)
    sys.start()
    run_until(sys, 3 * 1000 - 1)
    per_period = sum(len(sys.mesh.neighborhood(n.coord, radius)) for n in sys.mesh.nodes)
    assert sys.sim.msg_counts[MsgKind.STATUS] == 3 * per_period


def test_empty_cache_sends_only_own_record():
    sys = line_system()
    b = sys.mesh.node_at(TileCoord(1, 0))
    payload = sys.agent(b).status_payload()
    assert [r.node for r in payload] == [b]
