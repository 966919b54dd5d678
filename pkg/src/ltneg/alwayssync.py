"""Always-synchronizing negotiations: monotonic runs and the timed-automaton engine."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .model import Fragment, Guard, Location, Negotiation, classify, guard_str, max_constant
from .regions import Layout, _path_to, delay_closure, realize_path, region_of, region_reset, region_satisfies
from .semantics import Reachable, Run, SmallStep, Unreachable, initial_configuration, timestamps


def _require_always_sync(neg: Negotiation) -> None:
    if classify(neg) is not Fragment.ALWAYS_SYNC:
        raise ValueError("expected an always-synchronizing negotiation")


def _relevant(neg: Negotiation, loc: Location) -> set:
    """Agents whose clocks are read or written when ``loc`` fires."""
    agents = set(neg.dom(loc.node))
    agents.update(neg.owner[c.clock] for c in neg.guard_of(loc))
    return agents


def normalize_delays(neg: Negotiation, run: Run) -> Run:
    """Postpone every delay of an agent to its next relevant step; drop trailing delays."""
    n = len(neg.agents)
    steps = list(run.steps)
    carried = [0] * n
    delays = [list(s.delay) for s in steps]
    for i, s in enumerate(steps):
        rel = _relevant(neg, s.location)
        for k, p in enumerate(neg.agents):
            if p in rel:
                delays[i][k] += carried[k]
                carried[k] = 0
            else:
                carried[k] += delays[i][k]
                delays[i][k] = 0
    return Run(run.start, tuple(SmallStep(tuple(d), s.location) for d, s in zip(delays, steps)))


def commute(neg: Negotiation, run: Run, i: int) -> Run:
    """Swap steps ``i`` and ``i+1``, whose locations must touch disjoint agents."""
    a, b = run.steps[i], run.steps[i + 1]
    if _relevant(neg, a.location) & _relevant(neg, b.location):
        raise ValueError(f"steps {i} and {i + 1} share an agent")
    steps = list(run.steps)
    steps[i], steps[i + 1] = b, a
    return Run(run.start, tuple(steps))


def monotonize(neg: Negotiation, run: Run) -> Run:
    """Reorder a feasible run so that firing timestamps never decrease."""
    _require_always_sync(neg)
    run = normalize_delays(neg, run)
    # after normalization a step's timestamp travels with it
    stamped = list(zip(timestamps(neg, run), run.steps))
    changed = True
    while changed:
        changed = False
        for i in range(len(stamped) - 1):
            if stamped[i + 1][0] < stamped[i][0]:
                run = commute(neg, Run(run.start, tuple(s for _, s in stamped)), i)
                stamped[i], stamped[i + 1] = stamped[i + 1], stamped[i]
                changed = True
    return Run(run.start, tuple(s for _, s in stamped))


@dataclass(frozen=True)
class TaEdge:
    source: tuple
    guard: Guard
    label: Location
    resets: frozenset
    target: tuple


@dataclass(frozen=True)
class TimedAutomatonView:
    states: tuple
    initial: tuple
    edges: tuple
    clocks: tuple


def ta_edges_from(neg: Negotiation, marking: tuple):
    ai = neg.agent_index
    for loc in neg.locations:
        entries = neg.entries(loc)
        if any(loc.node not in marking[ai[p]] for p, _ in entries):
            continue
        target = list(marking)
        for p, e in entries:
            target[ai[p]] = e.targets
        yield TaEdge(marking, neg.guard_of(loc), loc, neg.resets_of(loc), tuple(target))


def build_ta(neg: Negotiation) -> TimedAutomatonView:
    _require_always_sync(neg)
    initial = initial_configuration(neg).marking
    seen = {initial: None}
    queue = deque([initial])
    edges = []
    while queue:
        m = queue.popleft()
        for e in ta_edges_from(neg, m):
            edges.append(e)
            if e.target not in seen:
                seen[e.target] = None
                queue.append(e.target)
    return TimedAutomatonView(tuple(seen), initial, tuple(edges), neg.all_clocks)


def ta_to_dot(neg: Negotiation, ta: TimedAutomatonView) -> str:
    def name(m):
        return "; ".join(f"{p}:{','.join(sorted(s))}" for p, s in zip(neg.agents, m))

    index = {m: i for i, m in enumerate(ta.states)}
    lines = ["digraph ta {", "  rankdir=TB;"]
    for m, i in index.items():
        shape = "doublecircle" if m == ta.initial else "ellipse"
        lines.append(f'  s{i} [shape={shape}, label="{name(m)}"];')
    for e in ta.edges:
        resets = ",".join(sorted(e.resets))
        label = f"({e.label.node},{e.label.outcome}) [{guard_str(e.guard)}] {{{resets}}}"
        lines.append(f'  s{index[e.source]} -> s{index[e.target]} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def explore_global_regions(neg: Negotiation, target: Location = None):
    bound = max_constant(neg)
    layout = Layout.single(neg)
    cfg0 = initial_configuration(neg)
    start = (cfg0.marking, region_of(neg, cfg0, bound, layout))
    parents = {start: None}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        marking, region = state
        closure = delay_closure(region)
        for edge in ta_edges_from(neg, marking):
            for delayed in closure:
                if not region_satisfies(layout, delayed, edge.guard):
                    continue
                if edge.label == target:
                    return parents, (state, delayed)
                nxt = (edge.target, region_reset(layout, delayed, edge.resets))
                if nxt not in parents:
                    parents[nxt] = (state, delayed, edge.label)
                    queue.append(nxt)
    return parents, None


def reach_always_sync(neg: Negotiation, target: Location):
    _require_always_sync(neg)
    if target not in neg.locations:
        return Unreachable()
    parents, hit = explore_global_regions(neg, target)
    if hit is None:
        return Unreachable()
    state, delayed = hit
    path = _path_to(parents, state) + [(delayed, target)]
    run = realize_path(neg, Layout.single(neg), path, max_constant(neg), uniform=True)
    return Reachable(run)


def count_global_states(neg: Negotiation) -> int:
    parents, _ = explore_global_regions(neg)
    return len(parents)
