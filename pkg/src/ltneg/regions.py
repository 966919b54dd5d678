"""Product-region abstraction and the reachability engine for sync-free negotiations.

Clocks are split into groups; each group carries a classical region over
its clocks.  For product regions a group is one agent's local clocks.  The
always-synchronizing engine reuses the same machinery with a single group
holding every clock.

A group region stores, for each clock in group order,

* ``ints[i]``: the integer part, or ``None`` when the value exceeds the bound;
* ``ranks[i]``: ``None`` when above the bound, ``0`` when the fractional part
  is zero, otherwise the 1-based position of its fractional part among the
  distinct positive fractional parts of the group.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .model import Fragment, Guard, Location, Negotiation, classify, max_constant
from .semantics import (
    Configuration,
    Reachable,
    Run,
    SmallStep,
    Unreachable,
    _fire_unchecked,
    apply_delay,
    initial_configuration,
    replay,
)


@dataclass(frozen=True)
class AgentRegion:
    ints: tuple
    ranks: tuple


@dataclass(frozen=True)
class ProductRegion:
    parts: tuple
    bound: int


class Layout:
    """Partition of clocks into region groups."""

    def __init__(self, groups: Sequence[Sequence[str]]):
        self.groups = tuple(tuple(g) for g in groups)
        self.position = {x: (g, i) for g, xs in enumerate(self.groups) for i, x in enumerate(xs)}

    @classmethod
    def per_agent(cls, neg: Negotiation) -> "Layout":
        return cls([neg.clocks[p] for p in neg.agents])

    @classmethod
    def single(cls, neg: Negotiation) -> "Layout":
        return cls([neg.all_clocks])


def _canonical(ints: Sequence, fracs: Sequence) -> AgentRegion:
    positive = sorted({f for i, f in zip(ints, fracs) if i is not None and f > 0})
    rank = {f: k + 1 for k, f in enumerate(positive)}
    ranks = tuple(
        None if i is None else (0 if f == 0 else rank[f]) for i, f in zip(ints, fracs)
    )
    return AgentRegion(tuple(ints), ranks)


def group_region(values: Sequence[Fraction], bound: int) -> AgentRegion:
    ints, fracs = [], []
    for v in values:
        if v > bound:
            ints.append(None)
            fracs.append(None)
        else:
            i = math.floor(v)
            ints.append(i)
            fracs.append(v - i)
    return _canonical(ints, fracs)


def region_of(neg: Negotiation, valuation, bound: int, layout: Layout = None) -> ProductRegion:
    """Product region of a valuation (a Configuration or a clock-name mapping)."""
    layout = layout or Layout.per_agent(neg)
    if isinstance(valuation, Configuration):
        valuation = valuation.valuation(neg)
    return ProductRegion(
        tuple(group_region([valuation[x] for x in g], bound) for g in layout.groups), bound
    )


def equiv_direct(neg: Negotiation, v: Mapping, w: Mapping, bound: int) -> bool:
    """Region equivalence evaluated clause by clause, independent of :func:`region_of`."""
    frac = lambda z: z - math.floor(z)  # noqa: E731
    for p in neg.agents:
        xs = neg.clocks[p]
        for x in xs:
            if not (math.floor(v[x]) == math.floor(w[x]) or (v[x] > bound and w[x] > bound)):
                return False
            # clauses 2 and 3 are read on both sides so the relation is symmetric
            if (v[x] <= bound or w[x] <= bound) and (frac(v[x]) == 0) != (frac(w[x]) == 0):
                return False
        for x in xs:
            for y in xs:
                low_v = v[x] <= bound and v[y] <= bound
                low_w = w[x] <= bound and w[y] <= bound
                if low_v or low_w:
                    if (frac(v[x]) <= frac(v[y])) != (frac(w[x]) <= frac(w[y])):
                        return False
    return True


def successor(r: AgentRegion, bound: int) -> AgentRegion:
    """Immediate time successor of a group region (itself when absorbing)."""
    live = [k for k, i in enumerate(r.ints) if i is not None]
    if not live:
        return r
    ints = list(r.ints)
    ranks = list(r.ranks)
    if any(ranks[k] == 0 for k in live):
        # zero-fraction clocks leave their integer; those at the bound go above
        for k in live:
            if ranks[k] == 0:
                if ints[k] == bound:
                    ints[k], ranks[k] = None, None
                else:
                    ranks[k] = 1
            else:
                ranks[k] += 1
    else:
        top = max(ranks[k] for k in live)
        for k in live:
            if ranks[k] == top:
                ints[k] += 1
                ranks[k] = 0
    return _renumber(ints, ranks)


def _renumber(ints, ranks) -> AgentRegion:
    distinct = sorted({q for q in ranks if q is not None and q > 0})
    remap = {q: k + 1 for k, q in enumerate(distinct)}
    return AgentRegion(
        tuple(ints), tuple(None if q is None else (0 if q == 0 else remap[q]) for q in ranks)
    )


def time_chain(r: AgentRegion, bound: int) -> tuple:
    """All time successors of ``r``, in order, ending at the absorbing region."""
    out = [r]
    while True:
        nxt = successor(out[-1], bound)
        if nxt == out[-1]:
            return tuple(out)
        out.append(nxt)


def delay_closure(r: ProductRegion) -> list:
    chains = [time_chain(part, r.bound) for part in r.parts]
    return [ProductRegion(parts, r.bound) for parts in itertools.product(*chains)]


def constraint_holds(integer, rank, op: str, c: int) -> bool:
    if integer is None:  # above the bound, and c <= bound
        return op in (">", ">=")
    exact = rank == 0
    if op == "<":
        return integer < c
    if op == "<=":
        return integer <= c if exact else integer < c
    if op == "=":
        return exact and integer == c
    if op == ">=":
        return integer >= c
    if op == ">":
        return integer > c if exact else integer >= c
    raise ValueError(op)


def region_satisfies(layout: Layout, r: ProductRegion, guard: Guard) -> bool:
    for c in guard:
        g, k = layout.position[c.clock]
        part = r.parts[g]
        if not constraint_holds(part.ints[k], part.ranks[k], c.op, c.bound):
            return False
    return True


def region_reset(layout: Layout, r: ProductRegion, clocks: Iterable[str]) -> ProductRegion:
    touched: dict[int, list] = {}
    for x in clocks:
        g, k = layout.position[x]
        touched.setdefault(g, []).append(k)
    if not touched:
        return r
    parts = list(r.parts)
    for g, ks in touched.items():
        ints, ranks = list(parts[g].ints), list(parts[g].ranks)
        for k in ks:
            ints[k], ranks[k] = 0, 0
        parts[g] = _renumber(ints, ranks)
    return ProductRegion(tuple(parts), r.bound)


def encode_region(layout: Layout, r: ProductRegion, names: Sequence[str] = None) -> str:
    """Stable text form, e.g. ``p{x=1,y=0+f1} q{z>2}``."""
    out = []
    for g, (xs, part) in enumerate(zip(layout.groups, r.parts)):
        cells = []
        for x, i, q in zip(xs, part.ints, part.ranks):
            if i is None:
                cells.append(f"{x}>{r.bound}")
            elif q == 0:
                cells.append(f"{x}={i}")
            else:
                cells.append(f"{x}={i}+f{q}")
        label = names[g] if names else f"g{g}"
        out.append(f"{label}{{{','.join(cells)}}}")
    return " ".join(out)


# -- counting ------------------------------------------------------------

def _fubini(k: int) -> int:
    """Number of weak orders on k elements."""
    a = [1]
    for n in range(1, k + 1):
        a.append(sum(math.comb(n, j) * a[n - j] for j in range(1, n + 1)))
    return a[k]


def region_count(n: int, bound: int) -> int:
    """Exact number of regions of ``n`` clocks with maximal constant ``bound``."""
    total = 0
    # each clock: above / integer value 0..bound / open interval (i, i+1), i < bound
    for kinds in itertools.product(("above", "int", "open"), repeat=n):
        n_int = kinds.count("int")
        n_open = kinds.count("open")
        total += (bound + 1) ** n_int * bound ** n_open * _fubini(n_open)
    return total


def region_bound(n: int, bound: int) -> int:
    """Closed-form upper bound |X|! * 2^|X| * (2M+1)^|X|."""
    return math.factorial(n) * 2 ** n * (2 * bound + 1) ** n


# -- witness realization ----------------------------------------------------

def simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """Fraction with the smallest denominator in the open interval (lo, hi)."""
    if not lo < hi:
        raise ValueError("empty interval")
    fl = math.floor(lo)
    if fl + 1 < hi:
        return Fraction(fl + 1)
    x, y = lo - fl, hi - fl
    if x == 0:
        return fl + Fraction(1, math.floor(1 / y) + 1)
    return fl + 1 / simplest_between(1 / y, 1 / x)


def realize_delay(values: Sequence[Fraction], target: AgentRegion, bound: int) -> Fraction:
    """Smallest-denominator delay moving ``values`` into the time-successor region ``target``."""
    crit = {Fraction(0)}
    for v in values:
        if v <= bound:
            for k in range(math.ceil(v), bound + 1):
                crit.add(k - v)
    points = sorted(crit)
    candidates = []
    for a, b in zip(points, points[1:]):
        candidates += [a, simplest_between(a, b)]
    candidates += [points[-1], math.floor(points[-1]) + 1]
    for d in candidates:
        if group_region([v + d for v in values], bound) == target:
            return Fraction(d)
    raise ValueError("target region is not a time successor")


def realize_path(neg: Negotiation, layout: Layout, path, bound: int, uniform: bool = False) -> Run:
    """Turn region moves ``[(delayed_region, location), ...]`` into a concrete run.

    With ``uniform`` (one group over all clocks) every agent receives the
    same delay.
    """
    cfg = initial_configuration(neg)
    steps = []
    for delayed, loc in path:
        if uniform:
            vals = cfg.valuation(neg)
            d = realize_delay([vals[x] for x in layout.groups[0]], delayed.parts[0], bound)
            delay = tuple(d for _ in neg.agents)
        else:
            vals = cfg.valuation(neg)
            delay = tuple(
                realize_delay([vals[x] for x in layout.groups[g]], delayed.parts[g], bound)
                for g in range(len(neg.agents))
            )
        step = SmallStep(delay, loc)
        cfg = apply_delay(neg, cfg, delay)
        assert region_of(neg, cfg, bound, layout) == delayed
        cfg = _fire_unchecked(neg, cfg, loc)
        steps.append(step)
    run = Run(initial_configuration(neg), tuple(steps))
    replay(neg, run.start, run.steps)
    return run


# -- product-region automaton ---------------------------------------------

def _region_moves(neg: Negotiation, layout: Layout, marking: tuple, region: ProductRegion):
    """Transitions of the product-region automaton from ``(marking, region)``.

    Yields ``(location, delayed_region, successor_state)`` with locations
    in lexicographic order and delayed regions in time order.
    """
    closure = delay_closure(region)
    ai = neg.agent_index
    for loc in neg.locations:
        entries = neg.entries(loc)
        if any(loc.node not in marking[ai[p]] for p, _ in entries):
            continue
        guard = neg.guard_of(loc)
        resets = neg.resets_of(loc)
        new_marking = list(marking)
        for p, e in entries:
            new_marking[ai[p]] = e.targets
        new_marking = tuple(new_marking)
        for delayed in closure:
            if region_satisfies(layout, delayed, guard):
                yield loc, delayed, (new_marking, region_reset(layout, delayed, resets))


def explore_regions(neg: Negotiation, target: Location = None):
    """BFS over the product-region automaton.

    Returns ``(parents, hit)`` where ``parents`` maps each visited state to
    ``(previous_state, delayed_region, location)`` and ``hit`` is the
    ``(state, delayed_region)`` at which ``target`` first fired.
    """
    bound = max_constant(neg)
    layout = Layout.per_agent(neg)
    cfg0 = initial_configuration(neg)
    start = (cfg0.marking, region_of(neg, cfg0, bound, layout))
    parents = {start: None}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        for loc, delayed, nxt in _region_moves(neg, layout, *state):
            if loc == target:
                return parents, (state, delayed)
            if nxt not in parents:
                parents[nxt] = (state, delayed, loc)
                queue.append(nxt)
    return parents, None


def _path_to(parents, state) -> list:
    path = []
    while parents[state] is not None:
        prev, delayed, loc = parents[state]
        path.append((delayed, loc))
        state = prev
    path.reverse()
    return path


def reach_sync_free(neg: Negotiation, target: Location):
    """Decide reachability of ``target``; Reachable carries a replayed witness."""
    if classify(neg) is not Fragment.SYNC_FREE:
        raise ValueError("region engine needs a synchronization-free negotiation")
    if target not in neg.locations:
        return Unreachable()
    parents, hit = explore_regions(neg, target)
    if hit is None:
        return Unreachable()
    state, delayed = hit
    path = _path_to(parents, state) + [(delayed, target)]
    return Reachable(realize_path(neg, Layout.per_agent(neg), path, max_constant(neg)))


def count_reachable_regions(neg: Negotiation) -> int:
    """Distinct product regions met (incl. delay successors) in the reachable automaton."""
    parents, _ = explore_regions(neg)
    seen = set()
    for _, region in parents:
        seen.update(delay_closure(region))
    return len(seen)


def dump_states(neg: Negotiation) -> str:
    """One line per reachable region state: ``<marking> | <region>``."""
    parents, _ = explore_regions(neg)
    layout = Layout.per_agent(neg)
    lines = []
    for marking, region in parents:
        mk = " ".join(f"{p}:{{{','.join(sorted(m))}}}" for p, m in zip(neg.agents, marking))
        lines.append(f"{mk} | {encode_region(layout, region, neg.agents)}")
    return "".join(line + "\n" for line in lines)
