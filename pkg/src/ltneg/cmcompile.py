"""Two-counter machines and their compilation into local-timed negotiations.

Counter ``i`` is held by agents ``p_i, q_i, r_i`` as the difference
``t_p_i - t_q_i`` of reference clocks.  Agent ``r_i`` is an auxiliary that
keeps a copy of ``t_p_i`` during the zero test.

Gadget node names are suffixed with ``@<label>``.  Additions beyond the
textbook gadgets, all needed to land back on an encoding configuration:

* ``r_i`` leaves the zero-check with a zero-elapse guard ``x_r_i=0``;
* the decrement tail resets ``xprime_q_i`` together with ``x_q_i``;
* jump-on-zero uses two relay nodes ``z@l`` / ``nz@l`` so that ``r_i`` and
  the idle counter's agents learn which branch was taken and end up at a
  single instruction node.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .model import Constraint, Entry, Location, Negotiation, make_negotiation
from .semantics import Configuration, Run, SmallStep, replay


@dataclass(frozen=True)
class Inc:
    counter: int

    def __str__(self):
        return f"inc c{self.counter}"


@dataclass(frozen=True)
class Dec:
    counter: int

    def __str__(self):
        return f"dec c{self.counter}"


@dataclass(frozen=True)
class Jz:
    counter: int
    target: int

    def __str__(self):
        return f"jz c{self.counter} {self.target}"


@dataclass(frozen=True)
class Halt:
    def __str__(self):
        return "halt"


@dataclass(frozen=True)
class CmConfig:
    label: int
    c1: int = 0
    c2: int = 0

    def counter(self, i: int) -> int:
        return self.c1 if i == 1 else self.c2

    def with_counter(self, i: int, value: int, label: int) -> "CmConfig":
        return CmConfig(label, value, self.c2) if i == 1 else CmConfig(label, self.c1, value)


class Stop(enum.Enum):
    BLOCKED = "blocked"
    HALTED = "halted"


def check_program(program: Sequence) -> None:
    if not program:
        raise ValueError("empty program")
    halts = [i for i, ins in enumerate(program) if isinstance(ins, Halt)]
    if halts != [len(program) - 1]:
        raise ValueError("halt must appear exactly once, as the last instruction")
    for i, ins in enumerate(program):
        if not isinstance(ins, (Inc, Dec, Jz, Halt)):
            raise ValueError(f"instruction {i}: unknown instruction {ins!r}")
        if isinstance(ins, (Inc, Dec, Jz)) and ins.counter not in (1, 2):
            raise ValueError(f"instruction {i}: counter must be 1 or 2")
        if isinstance(ins, Jz) and not 0 <= ins.target < len(program):
            raise ValueError(f"instruction {i}: jump target {ins.target} out of range")


def cm_step(program: Sequence, cfg: CmConfig):
    """One step of the machine: a CmConfig, ``Stop.BLOCKED`` or ``Stop.HALTED``."""
    ins = program[cfg.label]
    if isinstance(ins, Halt):
        return Stop.HALTED
    c = cfg.counter(ins.counter)
    if isinstance(ins, Inc):
        return cfg.with_counter(ins.counter, c + 1, cfg.label + 1)
    if isinstance(ins, Dec):
        if c == 0:
            return Stop.BLOCKED
        return cfg.with_counter(ins.counter, c - 1, cfg.label + 1)
    if c == 0:
        return CmConfig(ins.target, cfg.c1, cfg.c2)
    return CmConfig(cfg.label + 1, cfg.c1, cfg.c2)


def cm_run(program: Sequence, max_steps: int, start: CmConfig = CmConfig(0)):
    """Configurations visited within ``max_steps`` steps, and how the run ended.

    The status is a :class:`Stop` or ``None`` when the step budget ran out.
    """
    trace = [start]
    for _ in range(max_steps):
        nxt = cm_step(program, trace[-1])
        if isinstance(nxt, Stop):
            return trace, nxt
        trace.append(nxt)
    if isinstance(program[trace[-1].label], Halt):
        return trace, Stop.HALTED
    return trace, None


# -- compilation ----------------------------------------------------------

AGENTS = ("p1", "q1", "r1", "p2", "q2", "r2")
CLOCKS = {
    "p1": ("x_p1",), "q1": ("x_q1", "xprime_q1"), "r1": ("x_r1",),
    "p2": ("x_p2",), "q2": ("x_q2", "xprime_q2"), "r2": ("x_r2",),
}
HALT_OUTCOME = "enter"


def node_for(program: Sequence, label: int) -> str:
    return "n_halt" if isinstance(program[label], Halt) else f"n_{label}"


def halt_location(program: Sequence) -> Location:
    return Location(node_for(program, len(program) - 1), HALT_OUTCOME)


def _eq(x, c):
    return Constraint(x, "=", c)


def _pinned(agent: str) -> tuple:
    """Guard forcing zero elapse: every local clock of ``agent`` is still 0."""
    return tuple(_eq(x, 0) for x in CLOCKS[agent])


def _trio(i: int):
    return f"p{i}", f"q{i}", f"r{i}"


class _Builder:
    def __init__(self):
        self.nodes: dict[str, tuple] = {}
        self.delta: dict[tuple, Entry] = {}
        self.sync: list[str] = []

    def node(self, name, agents, sync=False):
        self.nodes[name] = tuple(agents)
        if sync:
            self.sync.append(name)

    def trans(self, agent, node, outcome, guard=(), to=(), reset=()):
        self.delta[(agent, node, outcome)] = Entry(tuple(guard), frozenset(to), frozenset(reset))


def compile_program(program: Sequence) -> Negotiation:
    check_program(program)
    b = _Builder()
    for label in range(len(program)):
        b.node(node_for(program, label), AGENTS)
    for label, ins in enumerate(program):
        here = node_for(program, label)
        if isinstance(ins, Halt):
            for a in AGENTS:
                b.trans(a, here, HALT_OUTCOME)
            continue
        nxt = node_for(program, label + 1)
        i = ins.counter
        p, q, r = _trio(i)
        idle = _trio(3 - i)
        if isinstance(ins, Inc):
            for a in AGENTS:
                if a == p:
                    b.trans(a, here, "inc", [_eq(f"x_{p}", 1)], [nxt], [f"x_{p}"])
                else:
                    b.trans(a, here, "inc", _pinned(a), [nxt])
            continue
        _zero_check(b, program, label, ins, p, q, r, idle, nxt)
    return make_negotiation(AGENTS, CLOCKS, b.nodes, node_for(program, 0), b.delta, b.sync)


def _zero_check(b, program, label, ins, p, q, r, idle, nxt):
    here = node_for(program, label)
    xp, xq, xq2, xr = f"x_{p}", f"x_{q}", f"xprime_{q}", f"x_{r}"
    n1, n2, n3, n4 = (f"n{k}@{label}" for k in (1, 2, 3, 4))
    b.node(n1, (p, r), sync=True)
    b.node(n2, (p, q))
    b.node(n3, (q, r), sync=True)
    b.node(n4, (p, q, r))

    if isinstance(ins, Jz):
        jump = node_for(program, ins.target)
        z, nz = f"z@{label}", f"nz@{label}"
        idle_to = (z, nz)
    else:
        idle_to = (nxt,)

    # entry: p and r head to the synchronization with each other, q to the loop
    b.trans(p, here, "st", [_eq(xp, 0)], [n1])
    b.trans(q, here, "st", [_eq(xq, 0), _eq(xq2, 0)], [n2])
    b.trans(r, here, "st", [_eq(xr, 0)], [n1])
    for a in idle:
        b.trans(a, here, "st", _pinned(a), idle_to)

    # phase 1: r catches up with p, p does not move
    b.trans(p, n1, "sync", [_eq(xp, 0)], [n2])
    b.trans(r, n1, "sync", [], [n3], [xr])
    # phase 2: p and q advance one unit per loop
    b.trans(p, n2, "b", [_eq(xp, 1)], [n2], [xp])
    b.trans(q, n2, "b", [_eq(xq, 1)], [n2], [xq])
    b.trans(p, n2, "a", [_eq(xp, 0)], [n4])
    b.trans(q, n2, "a", [_eq(xq, 0)], [n3])
    # phase 3: q must have caught up with r exactly
    b.trans(q, n3, "c", [_eq(xq, 0)], [n4])
    b.trans(r, n3, "c", [_eq(xr, 0)], [n4])

    positive = Constraint(xq2, ">", 0)
    if isinstance(ins, Dec):
        n5, n6 = f"n5@{label}", f"n6@{label}"
        b.node(n5, (p, q, r))
        b.node(n6, (p, q))
        b.trans(p, n4, "pos", [_eq(xp, 0)], [n6])
        b.trans(q, n4, "pos", [_eq(xq, 0), positive], [n6])
        b.trans(r, n4, "pos", [_eq(xr, 0)], [nxt])
        b.trans(p, n4, "zero", [_eq(xp, 0)], [n5])
        b.trans(q, n4, "zero", [_eq(xq, 0), _eq(xq2, 0)], [n5])
        b.trans(r, n4, "zero", [_eq(xr, 0)], [n5])
        # block gadget: nothing can ever fire here
        b.trans(p, n5, "fin", [Constraint(xp, "<", 0)])
        b.trans(q, n5, "fin", [])
        b.trans(r, n5, "fin", [])
        # decrement tail: q elapses exactly one unit
        b.trans(p, n6, "dec", [_eq(xp, 0)], [nxt], [xp])
        b.trans(q, n6, "dec", [_eq(xq, 1)], [nxt], [xq, xq2])
    else:
        b.trans(p, n4, "zero", [_eq(xp, 0)], [jump])
        b.trans(q, n4, "zero", [_eq(xq, 0), _eq(xq2, 0)], [jump], [xq2])
        b.trans(r, n4, "zero", [_eq(xr, 0)], [z])
        b.trans(p, n4, "pos", [_eq(xp, 0)], [nxt])
        b.trans(q, n4, "pos", [_eq(xq, 0), positive], [nxt], [xq2])
        b.trans(r, n4, "pos", [_eq(xr, 0)], [nz])
        relay = (r,) + tuple(idle)
        b.node(z, relay)
        b.node(nz, relay)
        for a in relay:
            b.trans(a, z, "go", _pinned(a), [jump])
            b.trans(a, nz, "go", _pinned(a), [nxt])


# -- encoding and guided simulation -------------------------------------------

def encodes(neg: Negotiation, program: Sequence, cfg: Configuration, cm: CmConfig) -> bool:
    node = node_for(program, cm.label)
    if any(m != frozenset([node]) for m in cfg.marking):
        return False
    if any(v != 0 for v in cfg.clocks):
        return False
    for i, c in ((1, cm.c1), (2, cm.c2)):
        p, q, r = _trio(i)
        tp, tq, tr = cfg.ref(neg, p), cfg.ref(neg, q), cfg.ref(neg, r)
        if not (tr <= tq <= tp) or tp - tq != c:
            return False
    return True


def _delay(**kw) -> tuple:
    return tuple(Fraction(kw.get(a, 0)) for a in AGENTS)


def guided_big_step(
    neg: Negotiation, program: Sequence, cfg: Configuration, cm_from: CmConfig,
    cm_to: CmConfig, loops: int = None,
) -> Run:
    """Explicit run through the gadget of ``cm_from.label`` ending in an encoding of ``cm_to``.

    ``loops`` overrides the number of b-iterations of the zero-check; any
    value other than the counter makes the returned run infeasible.
    """
    if not encodes(neg, program, cfg, cm_from):
        raise ValueError("start configuration does not encode the source configuration")
    if cm_step(program, cm_from) != cm_to:
        raise ValueError("target is not the machine successor of the source")
    label = cm_from.label
    ins = program[label]
    here = node_for(program, label)
    i = ins.counter
    p, q, r = _trio(i)
    steps = []
    if isinstance(ins, Inc):
        steps.append(SmallStep(_delay(**{p: 1}), Location(here, "inc")))
    else:
        k = cm_from.counter(i) if loops is None else loops
        lag = cfg.ref(neg, p) - cfg.ref(neg, r)
        steps.append(SmallStep(_delay(), Location(here, "st")))
        steps.append(SmallStep(_delay(**{r: lag}), Location(f"n1@{label}", "sync")))
        steps += [SmallStep(_delay(**{p: 1, q: 1}), Location(f"n2@{label}", "b"))] * k
        steps.append(SmallStep(_delay(), Location(f"n2@{label}", "a")))
        steps.append(SmallStep(_delay(), Location(f"n3@{label}", "c")))
        branch = "zero" if cm_from.counter(i) == 0 else "pos"
        steps.append(SmallStep(_delay(), Location(f"n4@{label}", branch)))
        if isinstance(ins, Dec):
            steps.append(SmallStep(_delay(**{q: 1}), Location(f"n6@{label}", "dec")))
        else:
            relay = "z" if branch == "zero" else "nz"
            steps.append(SmallStep(_delay(), Location(f"{relay}@{label}", "go")))
    run = Run(cfg, tuple(steps))
    if loops is not None:
        return run  # left unchecked so callers can watch it fail
    end = replay(neg, cfg, run.steps)
    if not encodes(neg, program, end, cm_to):
        raise AssertionError("gadget run does not land on an encoding configuration")
    return run


def guided_run(neg: Negotiation, program: Sequence, max_steps: int):
    """Concatenated guided big steps along the machine run, plus the CM trace."""
    from .semantics import initial_configuration

    trace, status = cm_run(program, max_steps)
    cfg = initial_configuration(neg)
    steps = []
    for a, b in zip(trace, trace[1:]):
        big = guided_big_step(neg, program, cfg, a, b)
        steps += big.steps
        cfg = replay(neg, cfg, big.steps)
    return Run(initial_configuration(neg), tuple(steps)), trace, status
