import random
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltneg.alwayssync import (
    build_ta,
    commute,
    count_global_states,
    monotonize,
    normalize_delays,
    reach_always_sync,
    ta_edges_from,
    ta_to_dot,
)
from ltneg.explorer import bounded_reach, completeness_bound
from ltneg.fixtures import equal_count, random_negotiation
from ltneg.model import Constraint, Entry, Location, make_negotiation
from ltneg.semantics import (
    Reachable,
    Unreachable,
    initial_configuration,
    is_monotonic,
    replay,
    timestamps,
)

from conftest import parallel_chains, random_instances, random_run

C = Location("n3", "c")


@st.composite
def sync_runs(draw):
    rng = random.Random(draw(st.integers(0, 10 ** 6)))
    neg = random_negotiation(rng, sync="all")
    return neg, random_run(neg, rng, steps=draw(st.integers(1, 8)))


@settings(max_examples=150, deadline=None)
@given(sync_runs())
def test_normalize_keeps_run_feasible(case):
    neg, run = case
    norm = normalize_delays(neg, run)
    end = replay(neg, norm.start, norm.steps)
    assert norm.locations() == run.locations()
    assert end.marking == replay(neg, run.start, run.steps).marking


@settings(max_examples=150, deadline=None)
@given(sync_runs())
def test_commuting_independent_steps(case):
    neg, run = case
    norm = normalize_delays(neg, run)
    before = replay(neg, norm.start, norm.steps)
    for i in range(len(norm.steps) - 1):
        try:
            swapped = commute(neg, norm, i)
        except ValueError:
            continue
        after = replay(neg, swapped.start, swapped.steps)
        assert after == before


@st.composite
def shuffled_runs(draw):
    rng = random.Random(draw(st.integers(0, 10 ** 6)))
    neg = parallel_chains(rng)
    return neg, random_run(neg, rng, steps=12, cap=3)


def test_shuffled_runs_are_often_out_of_order():
    out_of_order = 0
    rng = random.Random(5)
    for _ in range(200):
        neg = parallel_chains(rng)
        out_of_order += not is_monotonic(neg, random_run(neg, rng, steps=12, cap=3))
    assert out_of_order >= 50


@settings(max_examples=200, deadline=None)
@given(st.one_of(sync_runs(), shuffled_runs()))
def test_monotonize(case):
    neg, run = case
    mono = monotonize(neg, run)
    replay(neg, mono.start, mono.steps)
    assert is_monotonic(neg, mono)
    assert Counter(mono.locations()) == Counter(run.locations())
    assert replay(neg, mono.start, mono.steps).marking == replay(neg, run.start, run.steps).marking


def test_monotonize_reorders_a_concrete_run():
    # p and q act alone; q's step happens earlier in time but later in the run
    delta = {
        ("p", "n0", "s"): Entry((), frozenset({"a", "b"}), frozenset()),
        ("q", "n0", "s"): Entry((), frozenset({"b"}), frozenset()),
        ("p", "a", "go"): Entry((), frozenset(), frozenset()),
        ("p", "b", "go"): Entry((), frozenset(), frozenset()),
        ("q", "b", "go"): Entry((), frozenset(), frozenset()),
    }
    neg = make_negotiation("pq", {"p": [], "q": []},
                           {"n0": "pq", "a": "p", "b": "pq"}, "n0", delta, ["n0", "a", "b"])
    from ltneg.semantics import SmallStep, Run

    one = Fraction(1)
    run = Run(initial_configuration(neg), (
        SmallStep((0, 0), Location("n0", "s")),
        SmallStep((2 * one, 0), Location("a", "go")),
    ))
    replay(neg, run.start, run.steps)
    assert timestamps(neg, run) == [0, 2]
    assert is_monotonic(neg, monotonize(neg, run))


def test_commute_rejects_shared_agents(fx):
    neg = fx["equal_count"]
    verdict = reach_always_sync(neg, C)
    run = verdict.witness
    with pytest.raises(ValueError):
        commute(neg, run, 0)  # st and the next step both involve p or q


def test_ta_edges_after_start(fx):
    neg = fx["equal_count"]
    cfg = initial_configuration(neg)
    (st_edge,) = list(ta_edges_from(neg, cfg.marking))
    assert st_edge.label == Location("n_in", "st")
    edges = {e.label: e for e in ta_edges_from(neg, st_edge.target)}
    assert set(edges) == {Location("n1", "a"), Location("n2", "b"), C}
    assert set(edges[C].guard) == {Constraint("x", "=", 1), Constraint("y", "=", 1)}
    assert edges[Location("n1", "a")].resets == frozenset({"x"})


def test_ta_of_single_node():
    delta = {("p", "n0", o): Entry((), frozenset({"n0"}), frozenset()) for o in "abc"}
    neg = make_negotiation("p", {"p": ["x"]}, {"n0": "p"}, "n0", delta, ["n0"])
    ta = build_ta(neg)
    assert len(ta.states) == 1
    assert len(ta.edges) == 3
    assert ta_to_dot(neg, ta) == ta_to_dot(neg, build_ta(neg))


def test_equal_count_reachable_with_uniform_witness(fx):
    neg = fx["equal_count"]
    verdict = reach_always_sync(neg, C)
    assert isinstance(verdict, Reachable)
    run = verdict.witness
    end = replay(neg, run.start, run.steps)
    assert len(set(end.refs)) == 1
    assert is_monotonic(neg, run)
    assert run.steps[-1].location == C


def test_equal_count_variants():
    # b needs y=2, but c can still fire at time 1 when neither loop is taken
    assert isinstance(reach_always_sync(equal_count(b_guard="y=2"), C), Reachable)
    # p leaves n1 only at even times, q reaches c only at even times with y=2,
    # while c needs x=1 at p's side: the two sides never agree
    odd_even = equal_count("x=2", "y=2", ("x=1", "y=2"))
    assert isinstance(reach_always_sync(odd_even, C), Unreachable)
    assert not isinstance(bounded_reach(odd_even, C, completeness_bound(odd_even)), Reachable)


def test_unknown_location_unreachable(fx):
    assert isinstance(reach_always_sync(fx["equal_count"], Location("n7", "z")), Unreachable)


def test_rejects_other_fragments(fx):
    with pytest.raises(ValueError):
        reach_always_sync(fx["atm"], Location("n4", "g_up"))


def test_agrees_with_oracle_on_a_sample():
    for neg in random_instances(60, seed=11, sync="all"):
        budget = completeness_bound(neg)
        for loc in neg.locations:
            engine = isinstance(reach_always_sync(neg, loc), Reachable)
            oracle = isinstance(bounded_reach(neg, loc, budget), Reachable)
            assert engine == oracle, (neg, loc)


def test_global_state_count_is_stable(fx):
    neg = fx["equal_count"]
    assert count_global_states(neg) == count_global_states(neg) > 0
