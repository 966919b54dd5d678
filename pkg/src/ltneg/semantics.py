"""Exact operational semantics: configurations, local delays, firing, runs.

Time values are :class:`fractions.Fraction`.  A configuration stores its
marking and clock values as tuples aligned with ``neg.agents`` and
``neg.all_clocks`` so that configurations hash cheaply.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .model import Guard, Location, Negotiation

ZERO = Fraction(0)


@dataclass(frozen=True)
class Configuration:
    marking: tuple   # tuple[frozenset[str], ...], one entry per agent
    clocks: tuple    # tuple[Fraction, ...], aligned with neg.all_clocks
    refs: tuple      # tuple[Fraction, ...], aligned with neg.agents

    def ready(self, neg: Negotiation, agent: str) -> frozenset:
        return self.marking[neg.agent_index[agent]]

    def value(self, neg: Negotiation, clock: str) -> Fraction:
        return self.clocks[neg.clock_index[clock]]

    def ref(self, neg: Negotiation, agent: str) -> Fraction:
        return self.refs[neg.agent_index[agent]]

    def valuation(self, neg: Negotiation) -> dict:
        """Local clock values keyed by clock name."""
        return dict(zip(neg.all_clocks, self.clocks))

    def describe(self, neg: Negotiation) -> str:
        parts = []
        for p, ready, t in zip(neg.agents, self.marking, self.refs):
            xs = " ".join(f"{x}={fmt_rat(self.value(neg, x))}" for x in neg.clocks[p])
            parts.append(f"{p}:{{{','.join(sorted(ready))}}} t={fmt_rat(t)} {xs}".rstrip())
        return "; ".join(parts)


@dataclass(frozen=True)
class SmallStep:
    delay: tuple      # tuple[Fraction, ...], one entry per agent
    location: Location


@dataclass(frozen=True)
class Run:
    start: Configuration
    steps: tuple = ()

    def locations(self) -> list:
        return [s.location for s in self.steps]


class NotEnabled(Exception):
    """Firing was attempted where the location is not enabled.

    ``reason`` is one of ``"marking"``, ``"sync"``, ``"guard"``, checked in
    that order.
    """

    def __init__(self, loc: Location, reason: str):
        super().__init__(f"{loc} not enabled: {reason}")
        self.location = loc
        self.reason = reason


class Infeasible(Exception):
    def __init__(self, index: int, reason: str):
        super().__init__(f"step {index} infeasible: {reason}")
        self.index = index
        self.reason = reason


def rat(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def fmt_rat(x: Fraction) -> str:
    x = rat(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def make_configuration(
    neg: Negotiation,
    marking: Mapping[str, Iterable[str]],
    clocks: Mapping[str, object] = None,
    refs: Mapping[str, object] = None,
) -> Configuration:
    """Build a configuration from name-keyed maps; missing values are 0."""
    clocks = clocks or {}
    refs = refs or {}
    return Configuration(
        marking=tuple(frozenset(marking.get(p, ())) for p in neg.agents),
        clocks=tuple(rat(clocks.get(x, 0)) for x in neg.all_clocks),
        refs=tuple(rat(refs.get(p, 0)) for p in neg.agents),
    )


def initial_configuration(neg: Negotiation) -> Configuration:
    return Configuration(
        marking=tuple(frozenset([neg.initial]) for _ in neg.agents),
        clocks=tuple(ZERO for _ in neg.all_clocks),
        refs=tuple(ZERO for _ in neg.agents),
    )


def delay_vector(neg: Negotiation, delay) -> tuple:
    """Normalize a delay given as a mapping or a sequence to a Fraction tuple."""
    if isinstance(delay, Mapping):
        unknown = set(delay) - set(neg.agents)
        if unknown:
            raise KeyError(f"unknown agents in delay: {sorted(unknown)}")
        return tuple(rat(delay.get(p, 0)) for p in neg.agents)
    out = tuple(rat(d) for d in delay)
    if len(out) != len(neg.agents):
        raise ValueError("delay vector length differs from the number of agents")
    return out


def apply_delay(neg: Negotiation, cfg: Configuration, delay) -> Configuration:
    d = delay_vector(neg, delay)
    if any(x < 0 for x in d):
        raise ValueError("negative delay")
    if not any(d):
        return cfg
    owner_idx = _clock_owner_index(neg)
    return Configuration(
        marking=cfg.marking,
        clocks=tuple(v + d[i] for v, i in zip(cfg.clocks, owner_idx)),
        refs=tuple(t + x for t, x in zip(cfg.refs, d)),
    )


def _clock_owner_index(neg: Negotiation) -> tuple:
    cached = neg.__dict__.get("_owner_idx")
    if cached is None:
        cached = tuple(neg.agent_index[neg.owner[x]] for x in neg.all_clocks)
        neg.__dict__["_owner_idx"] = cached
    return cached


def satisfies(neg: Negotiation, cfg: Configuration, guard: Guard) -> bool:
    idx = neg.clock_index
    return all(c.holds(cfg.clocks[idx[c.clock]]) for c in guard)


def why_disabled(neg: Negotiation, cfg: Configuration, loc: Location):
    """First failed firing condition of ``loc`` at ``cfg``, or None."""
    entries = neg.entries(loc)
    ai = neg.agent_index
    if any(loc.node not in cfg.marking[ai[p]] for p, _ in entries):
        return "marking"
    if loc.node in neg.sync and len({cfg.refs[ai[p]] for p, _ in entries}) > 1:
        return "sync"
    if not all(satisfies(neg, cfg, e.guard) for _, e in entries):
        return "guard"
    return None


def enabled(neg: Negotiation, cfg: Configuration, loc: Location) -> bool:
    return why_disabled(neg, cfg, loc) is None


def fire(neg: Negotiation, cfg: Configuration, loc: Location) -> Configuration:
    if loc not in neg._location_entries:
        raise KeyError(f"unknown location {loc}")
    reason = why_disabled(neg, cfg, loc)
    if reason is not None:
        raise NotEnabled(loc, reason)
    return _fire_unchecked(neg, cfg, loc)


def _fire_unchecked(neg: Negotiation, cfg: Configuration, loc: Location) -> Configuration:
    marking = list(cfg.marking)
    resets = set()
    for p, e in neg.entries(loc):
        marking[neg.agent_index[p]] = e.targets
        resets |= e.resets
    clocks = cfg.clocks
    if resets:
        clocks = tuple(ZERO if x in resets else v for x, v in zip(neg.all_clocks, clocks))
    return Configuration(tuple(marking), clocks, cfg.refs)


def small_step(neg: Negotiation, cfg: Configuration, step: SmallStep) -> Configuration:
    return fire(neg, apply_delay(neg, cfg, step.delay), step.location)


def replay(neg: Negotiation, start: Configuration, steps: Sequence[SmallStep]) -> Configuration:
    """Execute ``steps`` from ``start``; raises :class:`Infeasible` at the first bad step."""
    cfg = start
    for i, step in enumerate(steps):
        try:
            cfg = small_step(neg, cfg, step)
        except NotEnabled as exc:
            raise Infeasible(i, exc.reason) from exc
        except (KeyError, ValueError) as exc:
            raise Infeasible(i, str(exc)) from exc
    return cfg


def configurations(neg: Negotiation, run: Run) -> list:
    """Configurations visited by ``run``, starting with ``run.start``."""
    out = [run.start]
    for step in run.steps:
        out.append(small_step(neg, out[-1], step))
    return out


def is_feasible(neg: Negotiation, run: Run) -> bool:
    try:
        replay(neg, run.start, run.steps)
    except Infeasible:
        return False
    return True


def timestamps(neg: Negotiation, run: Run) -> list:
    """Firing time of each step: the reference clock of the first participant after the delay."""
    out = []
    cfg = run.start
    for step in run.steps:
        cfg = apply_delay(neg, cfg, step.delay)
        p = neg.dom(step.location.node)[0]
        out.append(cfg.ref(neg, p))
        cfg = fire(neg, cfg, step.location)
    return out


def is_monotonic(neg: Negotiation, run: Run) -> bool:
    ts = timestamps(neg, run)
    return all(a <= b for a, b in zip(ts, ts[1:]))


# -- witness trace text format -------------------------------------------

def format_trace(neg: Negotiation, steps: Sequence[SmallStep]) -> str:
    lines = []
    for s in steps:
        lines.append("delay " + " ".join(f"{p}={fmt_rat(d)}" for p, d in zip(neg.agents, s.delay)))
        lines.append(f"fire {s.location.node} {s.location.outcome}")
    return "".join(line + "\n" for line in lines)


def parse_trace(neg: Negotiation, text: str) -> list:
    steps = []
    pending = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        if words[0] == "delay":
            if pending is not None:
                raise ValueError(f"line {lineno}: two delay lines in a row")
            d = {}
            for w in words[1:]:
                p, _, v = w.partition("=")
                if not v:
                    raise ValueError(f"line {lineno}: expected agent=value, got {w!r}")
                d[p] = Fraction(v)
            pending = delay_vector(neg, d)
        elif words[0] == "fire" and len(words) == 3:
            delay = pending if pending is not None else tuple(ZERO for _ in neg.agents)
            steps.append(SmallStep(delay, Location(words[1], words[2])))
            pending = None
        else:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}")
    if pending is not None:
        raise ValueError("trace ends with a delay that is not followed by fire")
    return steps


# -- verdicts shared by the engines ------------------------------------------

@dataclass(frozen=True)
class Reachable:
    witness: Run


@dataclass(frozen=True)
class Unreachable:
    pass


@dataclass(frozen=True)
class ExhaustedUnknown:
    """Bounded search ran out of budget without finding the target."""


Unknown = ExhaustedUnknown
