"""Line-oriented text formats for negotiations (``.lneg``) and counter machines (``.cm``).

Negotiation grammar, one statement per line, ``#`` starts a comment::

    agents <id>+
    clock <agent> <clock>+
    node <id> agents=<id,...> [sync]
    init <node>
    trans agent=<a> node=<n> outcome=<o> [guard="<atom>&..."] [reset=<clock,...>] [to=<node,...>]

An atom is ``<clock><op><nat>`` with op one of ``< <= = >= >``.  An omitted
guard is ``true``, an omitted ``to`` is the empty target set.
"""

from __future__ import annotations

import re
import shlex

from .model import OPS, Constraint, Entry, Negotiation, make_negotiation, reference_clock

IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_@.\-]*$")
ATOM = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_@.\-]*)\s*(<=|>=|<|>|=)\s*(\S+?)\s*$")


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def _guard_start(raw: str) -> int:
    pos = raw.find("guard=")
    return pos + len("guard=") if pos >= 0 else 0


def _column(raw: str, token: str, start: int = 0) -> int:
    pos = raw.find(token, start)
    return pos + 1 if pos >= 0 else 1


def parse_guard(text: str, lineno: int = 0, raw: str = "") -> tuple:
    text = text.strip()
    if text in ("", "true"):
        return ()
    out = []
    at = _guard_start(raw)
    for part in text.split("&"):
        m = ATOM.match(part)
        if not m:
            raise ParseError(
                f"bad guard atom {part.strip()!r}", lineno, _column(raw, part.strip(), at))
        clock, op, num = m.groups()
        at = max(raw.find(clock, at), at)
        if not num.isdigit():
            raise ParseError(
                f"guard constant {num!r} is not a natural number", lineno, _column(raw, num, at))
        out.append(Constraint(clock, op, int(num)))
    return tuple(out)


def parse(src: str) -> Negotiation:
    agents: list[str] = []
    clocks: dict[str, list[str]] = {}
    clock_owner: dict[str, str] = {}
    nodes: dict[str, list[str]] = {}
    sync: list[str] = []
    initial = None
    delta: dict[tuple, Entry] = {}
    pending = []  # transitions, checked once all declarations are known

    for lineno, raw in enumerate(src.splitlines(), 1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        try:
            words = shlex.split(body)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
        head, args = words[0], words[1:]

        def need_ident(w):
            if not IDENT.match(w):
                raise ParseError(f"bad identifier {w!r}", lineno, _column(raw, w))
            return w

        if head == "agents":
            if not args:
                raise ParseError("agents needs at least one name", lineno)
            for a in args:
                need_ident(a)
                if a in agents:
                    raise ParseError(f"duplicate agent {a}", lineno, _column(raw, a))
                agents.append(a)
                clocks.setdefault(a, [])
        elif head == "clock":
            if len(args) < 2:
                raise ParseError("clock needs an agent and at least one clock", lineno)
            p = args[0]
            if p not in agents:
                raise ParseError(f"unknown agent {p}", lineno, _column(raw, p))
            for x in args[1:]:
                need_ident(x)
                if x in clock_owner:
                    raise ParseError(f"duplicate clock {x}", lineno, _column(raw, x))
                clock_owner[x] = p
                clocks[p].append(x)
        elif head == "node":
            if not args:
                raise ParseError("node needs a name", lineno)
            n = need_ident(args[0])
            if n in nodes:
                raise ParseError(f"duplicate node {n}", lineno, _column(raw, n))
            dom = None
            is_sync = False
            for w in args[1:]:
                if w == "sync":
                    is_sync = True
                elif w.startswith("agents="):
                    dom = [a for a in w[len("agents="):].split(",") if a]
                    for a in dom:
                        if a not in agents:
                            raise ParseError(f"unknown agent {a}", lineno, _column(raw, a))
                else:
                    raise ParseError(f"unexpected {w!r}", lineno, _column(raw, w))
            if not dom:
                raise ParseError(f"node {n} needs agents=...", lineno)
            nodes[n] = dom
            if is_sync:
                sync.append(n)
        elif head == "init":
            if len(args) != 1:
                raise ParseError("init takes exactly one node", lineno)
            if initial is not None:
                raise ParseError("duplicate init", lineno)
            initial = args[0]
            pending.append(("init", lineno, raw, args[0]))
        elif head == "trans":
            kv = {}
            for w in args:
                k, eq, v = w.partition("=")
                if not eq or k not in ("agent", "node", "outcome", "guard", "reset", "to"):
                    raise ParseError(f"unexpected {w!r}", lineno, _column(raw, w))
                if k in kv:
                    raise ParseError(f"duplicate key {k}", lineno, _column(raw, w))
                kv[k] = v
            for k in ("agent", "node", "outcome"):
                if k not in kv:
                    raise ParseError(f"trans needs {k}=", lineno)
            pending.append(("trans", lineno, raw, kv))
        else:
            raise ParseError(f"unknown statement {head!r}", lineno, _column(raw, head))

    refs = {reference_clock(p) for p in agents}
    for kind, lineno, raw, payload in pending:
        if kind == "init":
            if payload not in nodes:
                raise ParseError(f"unknown node {payload}", lineno, _column(raw, payload))
            continue
        kv = payload
        p, n, a = kv["agent"], kv["node"], kv["outcome"]
        if p not in agents:
            raise ParseError(f"unknown agent {p}", lineno, _column(raw, p))
        if n not in nodes:
            raise ParseError(f"unknown node {n}", lineno, _column(raw, n))
        if not IDENT.match(a):
            raise ParseError(f"bad identifier {a!r}", lineno, _column(raw, a))
        guard = parse_guard(kv.get("guard", ""), lineno, raw)
        for c in guard:
            if c.clock not in clock_owner and c.clock not in refs:
                raise ParseError(f"unknown clock {c.clock}", lineno,
                                 _column(raw, c.clock, _guard_start(raw)))
        resets = [y for y in kv.get("reset", "").split(",") if y]
        for y in resets:
            if y not in clock_owner and y not in refs:
                raise ParseError(f"unknown clock {y}", lineno, _column(raw, y))
        targets = [m for m in kv.get("to", "").split(",") if m]
        for m in targets:
            if m not in nodes:
                raise ParseError(f"unknown node {m}", lineno, _column(raw, m))
        if (p, n, a) in delta:
            raise ParseError(f"duplicate transition for {p} at ({n},{a})", lineno)
        delta[(p, n, a)] = Entry(guard, frozenset(targets), frozenset(resets))

    if not agents:
        raise ParseError("no agents declared", 1)
    if initial is None:
        raise ParseError("missing init", 1)
    return make_negotiation(agents, clocks, nodes, initial, delta, sync)


def serialize(neg: Negotiation) -> str:
    lines = ["agents " + " ".join(neg.agents)]
    for p in neg.agents:
        if neg.clocks.get(p):
            lines.append(f"clock {p} " + " ".join(neg.clocks[p]))
    for n in neg.nodes:
        line = f"node {n} agents={','.join(neg.dom(n))}"
        if n in neg.sync:
            line += " sync"
        lines.append(line)
    lines.append(f"init {neg.initial}")
    node_pos = {n: i for i, n in enumerate(neg.nodes)}
    order = sorted(neg.delta, key=lambda k: (node_pos[k[1]], k[2], neg.agent_index[k[0]]))
    for p, n, a in order:
        e = neg.delta[(p, n, a)]
        line = f"trans agent={p} node={n} outcome={a}"
        if e.guard:
            line += ' guard="' + "&".join(str(c) for c in e.guard) + '"'
        if e.resets:
            line += " reset=" + ",".join(_ordered(e.resets, neg.all_clocks))
        if e.targets:
            line += " to=" + ",".join(_ordered(e.targets, neg.nodes))
        lines.append(line)
    return "\n".join(lines) + "\n"


def _ordered(items, reference) -> list:
    pos = {x: i for i, x in enumerate(reference)}
    return sorted(items, key=lambda x: (pos.get(x, len(pos)), x))


# -- counter machines --------------------------------------------------------

CM_LINE = re.compile(
    r"^\s*(\d+)\s*:\s*(?:(inc|dec)\s+c([12])|(jz)\s+c([12])\s+(\d+)|(halt))\s*$"
)


def parse_cm(src: str) -> list:
    from .cmcompile import Dec, Halt, Inc, Jz

    program = []
    for lineno, raw in enumerate(src.splitlines(), 1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        m = CM_LINE.match(body)
        if not m:
            raise ParseError(f"cannot parse instruction {body.strip()!r}", lineno)
        label = int(m.group(1))
        if label != len(program):
            raise ParseError(f"expected label {len(program)}, got {label}", lineno)
        if m.group(2) == "inc":
            program.append(Inc(int(m.group(3))))
        elif m.group(2) == "dec":
            program.append(Dec(int(m.group(3))))
        elif m.group(4):
            program.append(Jz(int(m.group(5)), int(m.group(6))))
        else:
            program.append(Halt())
    return program


def serialize_cm(program) -> str:
    return "".join(f"{i}: {ins}\n" for i, ins in enumerate(program))
