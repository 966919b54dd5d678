"""Static structure of local-timed negotiations.

A negotiation is a set of agents, each owning local clocks, that meet at
nodes and jointly pick outcomes.  Every agent also carries a reference
clock ``t_<agent>`` which measures its local time; reference clocks are
never reset and never appear in guards.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple

OPS = ("<", "<=", "=", ">=", ">")


def reference_clock(agent: str) -> str:
    """Name of the reference clock of ``agent``."""
    return f"t_{agent}"


@dataclass(frozen=True, order=True)
class Constraint:
    """Atomic constraint ``clock op bound``."""

    clock: str
    op: str
    bound: int

    def holds(self, value: Fraction) -> bool:
        op, c = self.op, self.bound
        if op == "<":
            return value < c
        if op == "<=":
            return value <= c
        if op == "=":
            return value == c
        if op == ">=":
            return value >= c
        if op == ">":
            return value > c
        raise ValueError(f"unknown operator {op!r}")

    def __str__(self) -> str:
        return f"{self.clock}{self.op}{self.bound}"


Guard = tuple  # tuple[Constraint, ...]; the empty tuple is "true"


def guard_str(guard: Guard) -> str:
    return "&".join(str(c) for c in guard) if guard else "true"


@dataclass(frozen=True)
class Entry:
    """What one agent does when a location fires."""

    guard: Guard = ()
    targets: frozenset = frozenset()
    resets: frozenset = frozenset()


class Location(NamedTuple):
    node: str
    outcome: str

    def __str__(self) -> str:
        return f"({self.node},{self.outcome})"


class Fragment(enum.Enum):
    SYNC_FREE = "sync-free"
    ALWAYS_SYNC = "always-sync"
    MIXED = "mixed"


@dataclass(frozen=True)
class Violation:
    rule: str
    ids: tuple
    message: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.message}"


@dataclass(frozen=True, eq=True)
class Negotiation:
    """A local-timed negotiation.

    ``agents`` and each clock tuple keep declaration order; that order is
    the agent order used for delay vectors and markings.  ``delta`` maps
    ``(agent, node, outcome)`` to an :class:`Entry`.
    """

    agents: tuple
    clocks: Mapping[str, tuple]
    nodes: tuple
    domains: Mapping[str, frozenset]
    initial: str
    delta: Mapping[tuple, Entry]
    sync: frozenset = field(default_factory=frozenset)

    __hash__ = None  # mappings inside

    @cached_property
    def all_clocks(self) -> tuple:
        return tuple(x for p in self.agents for x in self.clocks.get(p, ()))

    @cached_property
    def clock_index(self) -> dict:
        return {x: i for i, x in enumerate(self.all_clocks)}

    @cached_property
    def agent_index(self) -> dict:
        return {p: i for i, p in enumerate(self.agents)}

    @cached_property
    def owner(self) -> dict:
        return {x: p for p in self.agents for x in self.clocks.get(p, ())}

    @cached_property
    def locations(self) -> tuple:
        """All locations, sorted lexicographically on (node, outcome)."""
        return tuple(sorted({Location(n, a) for (_, n, a) in self.delta}))

    @cached_property
    def _location_entries(self) -> dict:
        table = {}
        for loc in self.locations:
            table[loc] = tuple(
                (p, self.delta[(p, loc.node, loc.outcome)])
                for p in self.agents
                if p in self.domains[loc.node]
            )
        return table

    def entries(self, loc: Location) -> tuple:
        """``(agent, Entry)`` pairs of ``loc`` in agent order."""
        return self._location_entries[loc]

    def dom(self, node: str) -> tuple:
        """Domain of ``node`` in agent order."""
        return tuple(p for p in self.agents if p in self.domains[node])

    def nodes_of(self, agent: str) -> frozenset:
        return frozenset(n for n in self.nodes if agent in self.domains[n])

    def outcomes(self, node: str) -> tuple:
        return tuple(loc.outcome for loc in self.locations if loc.node == node)

    def guard_of(self, loc: Location) -> Guard:
        return tuple(c for _, e in self.entries(loc) for c in e.guard)

    def resets_of(self, loc: Location) -> frozenset:
        return frozenset().union(*(e.resets for _, e in self.entries(loc)))


def make_negotiation(
    agents: Iterable[str],
    clocks: Mapping[str, Iterable[str]],
    nodes: Mapping[str, Iterable[str]],
    initial: str,
    delta: Mapping[tuple, Entry],
    sync: Iterable[str] = (),
) -> Negotiation:
    """Build a negotiation from plain containers; ``nodes`` maps node to domain."""
    agents = tuple(agents)
    return Negotiation(
        agents=agents,
        clocks={p: tuple(clocks.get(p, ())) for p in agents},
        nodes=tuple(nodes),
        domains={n: frozenset(d) for n, d in nodes.items()},
        initial=initial,
        delta=dict(delta),
        sync=frozenset(sync),
    )


def validate(neg: Negotiation) -> list[Violation]:
    """Check the well-formedness conditions; violations are returned, not raised."""
    out: list[Violation] = []
    agents = set(neg.agents)
    refs = {reference_clock(p) for p in neg.agents}
    seen_clock: dict[str, str] = {}
    for p, xs in neg.clocks.items():
        if p not in agents:
            out.append(Violation("unknown-agent", (p,), f"clocks declared for unknown agent {p}"))
        for x in xs:
            if x in refs:
                out.append(Violation("reserved-clock-name", (x,), f"{x} is a reference clock name"))
            if x in seen_clock:
                out.append(Violation(
                    "clock-owner", (x, seen_clock[x], p),
                    f"clock {x} owned by both {seen_clock[x]} and {p}"))
            seen_clock.setdefault(x, p)
    for n in neg.nodes:
        d = neg.domains.get(n, frozenset())
        if not d:
            out.append(Violation("empty-domain", (n,), f"node {n} has an empty domain"))
        for p in d - agents:
            out.append(Violation("unknown-agent", (n, p), f"node {n} mentions unknown agent {p}"))
    if neg.initial not in neg.domains:
        out.append(Violation("unknown-node", (neg.initial,), f"initial node {neg.initial} is undefined"))
    elif neg.domains[neg.initial] != agents:
        out.append(Violation(
            "initial-domain", (neg.initial,), "initial node must involve all agents"))
    for n in neg.sync - set(neg.nodes):
        out.append(Violation("unknown-node", (n,), f"sync node {n} is undefined"))

    by_loc: dict[tuple, set] = {}
    for (p, n, a), e in sorted(neg.delta.items(), key=lambda kv: kv[0]):
        if n not in neg.domains:
            out.append(Violation("unknown-node", (n,), f"transition at undefined node {n}"))
            continue
        if p not in neg.domains[n]:
            out.append(Violation(
                "agent-not-in-domain", (p, n, a), f"agent {p} is not in dom({n})"))
            continue
        by_loc.setdefault((n, a), set()).add(p)
        own_nodes = neg.nodes_of(p)
        for m in sorted(e.targets):
            if m not in neg.domains:
                out.append(Violation(
                    "unknown-node", (p, n, a, m), f"target {m} of {p} at ({n},{a}) is undefined"))
            elif m not in own_nodes:
                out.append(Violation(
                    "target-outside-agent", (p, n, a, m),
                    f"target {m} of {p} at ({n},{a}) is not a node of {p}"))
        own_clocks = set(neg.clocks.get(p, ()))
        for y in sorted(e.resets):
            if y in refs:
                out.append(Violation(
                    "reference-clock-in-reset", (p, n, a, y), f"reference clock {y} in reset"))
            elif y not in own_clocks:
                out.append(Violation(
                    "reset-outside-agent", (p, n, a, y),
                    f"reset of {y} at ({n},{a}) is not a clock of {p}"))
        for c in e.guard:
            if c.clock in refs:
                out.append(Violation(
                    "reference-clock-in-guard", (p, n, a, c.clock), "reference clock in guard"))
            elif c.clock not in seen_clock:
                out.append(Violation(
                    "unknown-clock", (p, n, a, c.clock), f"guard mentions undeclared clock {c.clock}"))
            if c.op not in OPS:
                out.append(Violation("bad-operator", (p, n, a, c.op), f"unknown operator {c.op}"))
            if not isinstance(c.bound, int) or isinstance(c.bound, bool) or c.bound < 0:
                out.append(Violation(
                    "bad-constant", (p, n, a, c.bound), f"constant {c.bound!r} is not a natural number"))
    for (n, a), ps in sorted(by_loc.items()):
        missing = neg.domains[n] - ps
        if missing:
            out.append(Violation(
                "partial-location", (n, a, *sorted(missing)),
                f"location ({n},{a}) is undefined for {', '.join(sorted(missing))}"))
    return out


def max_constant(neg: Negotiation) -> int:
    return max((c.bound for e in neg.delta.values() for c in e.guard), default=0)


def classify(neg: Negotiation) -> Fragment:
    if not neg.sync:
        return Fragment.SYNC_FREE
    if neg.sync >= set(neg.nodes):
        return Fragment.ALWAYS_SYNC
    return Fragment.MIXED
