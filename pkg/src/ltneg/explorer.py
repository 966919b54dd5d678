"""Bounded explicit-state exploration over concrete configurations.

This is the semi-decision procedure for mixed negotiations and the brute
force oracle the decidable-fragment engines are checked against.  Delays
are drawn from the grid ``{0, 1/d, 2/d, ...}`` and each single delay is at
most ``max_time``.

Two exact reductions keep the state space small without any region
reasoning:

* only agents whose clocks are read or written by the next firing delay;
  other delays are postponed to the agent's next relevant step;
* states are deduplicated on a key where local clock values above the
  maximal constant are collapsed, and reference clocks are kept up to a
  common shift (dropped entirely when no node synchronizes).

Always-synchronizing inputs are searched through monotonic runs only:
every firing happens at a grid time ``now + k/d`` no earlier than the
previous one, so the state reduces to the marking plus each clock read at
``now``.  Reordering a run by timestamps keeps it feasible in that
fragment, so no location is lost.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .model import Fragment, Location, Negotiation, classify, max_constant
from .regions import region_count
from .semantics import (
    Reachable,
    Run,
    SmallStep,
    Unknown,
    _fire_unchecked,
    apply_delay,
    initial_configuration,
    replay,
)


@dataclass(frozen=True)
class SearchBudget:
    max_steps: int
    granularity: int = 1          # delays are multiples of 1/granularity
    max_time: Fraction = Fraction(4)

    def __post_init__(self):
        if self.granularity < 1:
            raise ValueError("granularity must be >= 1")
        if self.max_steps < 0 or self.max_time < 0:
            raise ValueError("budget caps must be non-negative")
        object.__setattr__(self, "max_time", Fraction(self.max_time))


class NotComplete(ValueError):
    """No completeness bound exists for this negotiation."""


def completeness_bound(neg: Negotiation) -> SearchBudget:
    frag = classify(neg)
    if frag is Fragment.MIXED:
        raise NotComplete("mixed negotiations have no completeness bound")
    bound = max_constant(neg)
    markings = 2 ** sum(len(neg.nodes_of(p)) for p in neg.agents)
    if frag is Fragment.SYNC_FREE:
        regions = 1
        for p in neg.agents:
            regions *= region_count(len(neg.clocks[p]), bound)
    else:
        regions = region_count(len(neg.all_clocks), bound)
    steps = markings * regions
    return SearchBudget(steps, len(neg.all_clocks) + 1, Fraction((bound + 1) * steps))


class _Searcher:
    def __init__(self, neg: Negotiation, budget: SearchBudget, monotonic: bool = None):
        self.neg = neg
        self.budget = budget
        if monotonic is None:
            monotonic = classify(neg) is Fragment.ALWAYS_SYNC
        elif monotonic and classify(neg) is not Fragment.ALWAYS_SYNC:
            raise ValueError("monotonic search needs an always-synchronizing negotiation")
        self.monotonic = monotonic
        self.bound = max_constant(neg)
        self.observable_refs = bool(neg.sync)
        self.unit = Fraction(1, budget.granularity)
        ai = neg.agent_index
        self.plans = {}
        for loc in neg.locations:
            dom = [ai[p] for p in neg.dom(loc.node)]
            readers = {ai[neg.owner[c.clock]] for c in neg.guard_of(loc)}
            # constraints grouped by the agent owning the clock
            per_agent = {}
            for c in neg.guard_of(loc):
                per_agent.setdefault(ai[neg.owner[c.clock]], []).append(
                    (neg.clock_index[c.clock], c))
            synced = loc.node in neg.sync and len(dom) > 1
            free = sorted(readers.union(dom) - (set(dom) if synced else set()))
            self.plans[loc] = (dom, synced, free, per_agent)
        self.agent_clocks = [
            [neg.clock_index[x] for x in neg.clocks[p]] for p in neg.agents
        ]
        self.clock_agent = [ai[neg.owner[x]] for x in neg.all_clocks]

    def key(self, cfg, now=None):
        b = self.bound
        if self.monotonic:
            shifted = (v + now - cfg.refs[k] for v, k in zip(cfg.clocks, self.clock_agent))
            return cfg.marking, tuple(v if v <= b else None for v in shifted)
        clocks = tuple(v if v <= b else None for v in cfg.clocks)
        if self.observable_refs:
            low = min(cfg.refs) if cfg.refs else 0
            refs = tuple(t - low for t in cfg.refs)
        else:
            refs = None
        return cfg.marking, clocks, refs

    def _ok(self, cfg, k, d, per_agent):
        return all(c.holds(cfg.clocks[i] + d) for i, c in per_agent.get(k, ()))

    def agent_delays(self, cfg, k, per_agent):
        """Grid delays for agent ``k`` that satisfy its share of the guard."""
        out = []
        clocks = [cfg.clocks[i] for i in self.agent_clocks[k]]
        n = 0
        while True:
            d = n * self.unit
            if d > self.budget.max_time:
                break
            if self._ok(cfg, k, d, per_agent):
                out.append(d)
            if not self.observable_refs and all(v + d > self.bound for v in clocks):
                break  # later delays give the same state
            n += 1
        return out

    def delays(self, cfg, loc):
        dom, synced, free, per_agent = self.plans[loc]
        choices = []
        if synced:
            lo = max(cfg.refs[k] for k in dom)
            thetas = None
            for k in dom:
                t = cfg.refs[k]
                ok = {t + d for d in self.agent_delays(cfg, k, per_agent) if t + d >= lo}
                thetas = ok if thetas is None else thetas & ok
            choices.append((tuple(dom), [("sync", th) for th in sorted(thetas)]))
        for k in free:
            choices.append(((k,), [("free", d) for d in self.agent_delays(cfg, k, per_agent)]))
        n = len(self.neg.agents)
        for combo in itertools.product(*(c for _, c in choices)):
            delay = [Fraction(0)] * n
            for (ks, _), (kind, val) in zip(choices, combo):
                for k in ks:
                    delay[k] = val - cfg.refs[k] if kind == "sync" else val
            yield tuple(delay)

    def monotonic_successors(self, cfg, now):
        """Firings at a common time no earlier than ``now``, in time order per location."""
        n = len(self.neg.agents)
        for loc in self.neg.locations:
            dom, _, free, per_agent = self.plans[loc]
            if any(loc.node not in cfg.marking[k] for k in dom):
                continue
            moving = sorted(set(dom).union(free))
            # clocks of the moving agents read at ``now``
            base = {
                k: [(i, c, cfg.clocks[i] + now - cfg.refs[k]) for i, c in per_agent.get(k, ())]
                for k in moving
            }
            watched = [cfg.clocks[i] + now - cfg.refs[k] for k in moving for i in self.agent_clocks[k]]
            step = 0
            while True:
                gap = step * self.unit
                if gap > self.budget.max_time:
                    break
                if all(c.holds(v + gap) for k in moving for _, c, v in base[k]):
                    theta = now + gap
                    delay = [Fraction(0)] * n
                    for k in moving:
                        delay[k] = theta - cfg.refs[k]
                    delay = tuple(delay)
                    mid = apply_delay(self.neg, cfg, delay)
                    yield SmallStep(delay, loc), _fire_unchecked(self.neg, mid, loc), theta
                if all(v + gap > self.bound for v in watched):
                    break
                step += 1

    def successors(self, cfg, now=None):
        if self.monotonic:
            yield from self.monotonic_successors(cfg, now)
            return
        ai = self.neg.agent_index
        for loc in self.neg.locations:
            dom = self.plans[loc][0]
            if any(loc.node not in cfg.marking[k] for k in dom):
                continue
            for delay in self.delays(cfg, loc):
                mid = apply_delay(self.neg, cfg, delay)
                yield SmallStep(delay, loc), _fire_unchecked(self.neg, mid, loc), None

    def search(self, stop_at: Location = None):
        """BFS; returns ``{location: witness_steps}`` for the locations fired."""
        start = initial_configuration(self.neg)
        now0 = Fraction(0) if self.monotonic else None
        parents = {self.key(start, now0): None}
        found = {}
        queue = deque([(start, now0, 0)])
        while queue:
            cfg, now, depth = queue.popleft()
            if depth >= self.budget.max_steps:
                continue
            k0 = self.key(cfg, now)
            for step, nxt, later in self.successors(cfg, now):
                if step.location not in found:
                    found[step.location] = _trace(parents, k0) + [step]
                    if step.location == stop_at:
                        return found
                kn = self.key(nxt, later)
                if kn not in parents:
                    parents[kn] = (k0, step)
                    queue.append((nxt, later, depth + 1))
        return found


def _trace(parents, key) -> list:
    steps = []
    while parents[key] is not None:
        key, step = parents[key]
        steps.append(step)
    steps.reverse()
    return steps


def _as_run(neg: Negotiation, steps) -> Run:
    run = Run(initial_configuration(neg), tuple(steps))
    replay(neg, run.start, run.steps)
    return run


def bounded_reach(neg: Negotiation, target: Location, budget: SearchBudget, monotonic: bool = None):
    """Reachable(witness) if ``target`` fires within the budget, else Unknown.

    ``monotonic`` defaults to true exactly for always-synchronizing inputs.
    """
    found = _Searcher(neg, budget, monotonic).search(stop_at=target)
    if target in found:
        return Reachable(_as_run(neg, found[target]))
    return Unknown()


def bounded_reach_all(neg: Negotiation, budget: SearchBudget, monotonic: bool = None) -> dict:
    """Witness runs for every location that fires within the budget."""
    found = _Searcher(neg, budget, monotonic).search()
    return {loc: _as_run(neg, steps) for loc, steps in found.items()}


def feasible_word(neg: Negotiation, word, budget: SearchBudget):
    """A run firing exactly the locations of ``word`` in order, or None.

    Plain grid search (never monotonic); ``budget.max_steps`` is ignored.
    """
    searcher = _Searcher(neg, SearchBudget(len(word), budget.granularity, budget.max_time), False)
    start = initial_configuration(neg)
    layer = {searcher.key(start): (start, [])}
    for loc in word:
        nxt_layer = {}
        dom = searcher.plans[loc][0] if loc in searcher.plans else None
        if dom is None:
            return None
        for cfg, steps in layer.values():
            if any(loc.node not in cfg.marking[k] for k in dom):
                continue
            for delay in searcher.delays(cfg, loc):
                mid = apply_delay(neg, cfg, delay)
                nxt = _fire_unchecked(neg, mid, loc)
                key = searcher.key(nxt)
                if key not in nxt_layer:
                    nxt_layer[key] = (nxt, steps + [SmallStep(delay, loc)])
        if not nxt_layer:
            return None
        layer = nxt_layer
    _, steps = next(iter(layer.values()))
    return _as_run(neg, steps)
