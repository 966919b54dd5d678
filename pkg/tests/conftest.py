import random
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import strategies as st

from ltneg.fixtures import fixtures, random_negotiation
from ltneg.model import Constraint, Entry, make_negotiation

CM_DIR = Path(__file__).parent / "cm"


@pytest.fixture(scope="session")
def fx():
    return fixtures()


def rationals(max_den=4, max_value=4):
    """Non-negative rationals with small denominators."""
    return st.builds(
        lambda den, num: Fraction(num, den),
        st.integers(1, max_den),
        st.integers(0, max_value * max_den),
    )


def random_instances(count, seed, **kw):
    rng = random.Random(seed)
    return [random_negotiation(rng, **kw) for _ in range(count)]


def random_run(neg, rng, steps=6, granularity=2, cap=2, tries=20):
    """A feasible run built by firing random enabled locations.

    Participants of the chosen node are delayed to a common firing time, so
    synchronizing nodes get a fair chance; other agents drift at random.
    """
    from ltneg.semantics import Run, SmallStep, apply_delay, enabled, fire, initial_configuration

    start = cfg = initial_configuration(neg)
    out = []
    for _ in range(steps):
        ready = [loc for loc in neg.locations
                 if all(loc.node in cfg.ready(neg, p) for p in neg.dom(loc.node))]
        if not ready:
            break
        for _ in range(tries):
            loc = rng.choice(ready)
            dom = neg.dom(loc.node)
            when = max(cfg.ref(neg, p) for p in dom) + Fraction(rng.randint(0, cap * granularity), granularity)
            delay = tuple(
                when - cfg.ref(neg, p) if p in dom
                else Fraction(rng.randint(0, cap * granularity), granularity)
                for p in neg.agents
            )
            mid = apply_delay(neg, cfg, delay)
            if enabled(neg, mid, loc):
                out.append(SmallStep(delay, loc))
                cfg = fire(neg, mid, loc)
                break
        else:
            break
    return Run(start, tuple(out))


def parallel_chains(rng):
    """Agents walk private chains, then meet at a joint node ``end``."""
    agents = [f"p{i}" for i in range(rng.randint(2, 3))]
    clocks = {p: [f"x_{p}"] for p in agents}
    nodes = {"n0": agents, "end": agents}
    delta = {}
    for p in agents:
        chain = [f"{p}_{k}" for k in range(rng.randint(1, 3))]
        for n in chain:
            nodes[n] = [p]
        for n, nxt in zip(chain, chain[1:] + ["end"]):
            guard = (Constraint(f"x_{p}", ">=", rng.randint(0, 2)),)
            delta[(p, n, "t")] = Entry(guard, frozenset({nxt}), frozenset({f"x_{p}"}))
        delta[(p, "n0", "s")] = Entry((), frozenset({chain[0]}), frozenset())
        delta[(p, "end", "e")] = Entry((), frozenset(), frozenset())
    return make_negotiation(agents, clocks, nodes, "n0", delta, list(nodes))
