"""Command-line interface.

Exit codes: 0 reachable (or success), 1 unreachable, 2 unknown after an
exhausted bounded search, 3 input error.
"""

from __future__ import annotations

import argparse
import random
import sys
from fractions import Fraction

from . import alwayssync, explorer, regions
from .cmcompile import compile_program
from .dot import to_dot
from .fixtures import NAMES, fixture_text
from .model import Fragment, Location, classify, max_constant, validate
from .semantics import (
    Reachable,
    Unreachable,
    apply_delay,
    enabled,
    fire,
    format_trace,
    initial_configuration,
    replay,
    SmallStep,
)
from .textio import ParseError, parse, parse_cm, serialize

EXIT_REACHABLE, EXIT_UNREACHABLE, EXIT_UNKNOWN, EXIT_INPUT = 0, 1, 2, 3

DEFAULT_STEPS = 20


class InputError(Exception):
    pass


def _load(path: str):
    try:
        with open(path) as fh:
            src = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    try:
        neg = parse(src)
    except ParseError as exc:
        raise InputError(f"{path}: {exc}") from exc
    problems = validate(neg)
    if problems:
        raise InputError("\n".join(f"{path}: {v}" for v in problems))
    return neg


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _rational(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text}") from exc
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _has_strict(neg) -> bool:
    return any(c.op in ("<", ">") for e in neg.delta.values() for c in e.guard)


def default_budget(neg, args) -> explorer.SearchBudget:
    """Budget for bounded runs: explicit flags win over the defaults.

    Defaults are the completeness bound on the decidable fragments and
    ``DEFAULT_STEPS`` steps on grid 1 (1/2 with strict guards) with
    per-step delays up to ``M+1`` otherwise.
    """
    if classify(neg) is Fragment.MIXED:
        base = explorer.SearchBudget(
            DEFAULT_STEPS, 2 if _has_strict(neg) else 1, Fraction(max_constant(neg) + 1))
    else:
        base = explorer.completeness_bound(neg)
    return explorer.SearchBudget(
        args.steps if args.steps is not None else base.max_steps,
        args.granularity if args.granularity is not None else base.granularity,
        args.time_cap if args.time_cap is not None else base.max_time,
    )


def _budget_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--steps", type=_positive_int, help="maximal number of small steps")
    p.add_argument("--granularity", type=int, help="delays are multiples of 1/GRANULARITY")
    p.add_argument("--time-cap", type=_rational, help="largest single delay per agent")


def _emit_witness(neg, run, out) -> int:
    replay(neg, run.start, run.steps)  # raises if the witness is broken
    out.write(format_trace(neg, run.steps))
    return EXIT_REACHABLE


def cmd_reach(args, out) -> int:
    neg = _load(args.file)
    target = Location(args.node, args.outcome)
    frag = classify(neg)
    engine = args.engine
    if engine == "auto":
        engine = {Fragment.SYNC_FREE: "region", Fragment.ALWAYS_SYNC: "ta"}.get(frag, "bounded")
    if engine == "region":
        if frag is not Fragment.SYNC_FREE:
            raise InputError(f"region engine needs a sync-free negotiation, got {frag.value}")
        verdict = regions.reach_sync_free(neg, target)
    elif engine == "ta":
        if frag is not Fragment.ALWAYS_SYNC:
            raise InputError(f"ta engine needs an always-sync negotiation, got {frag.value}")
        verdict = alwayssync.reach_always_sync(neg, target)
    else:
        if args.granularity is not None and args.granularity < 1:
            raise InputError("granularity must be at least 1")
        verdict = explorer.bounded_reach(neg, target, default_budget(neg, args))
    if isinstance(verdict, Reachable):
        return _emit_witness(neg, verdict.witness, out)
    if isinstance(verdict, Unreachable):
        out.write(f"unreachable {target}\n")
        return EXIT_UNREACHABLE
    out.write(f"unknown {target}\n")
    return EXIT_UNKNOWN


def cmd_oracle(args, out) -> int:
    neg = _load(args.file)
    if args.granularity is not None and args.granularity < 1:
        raise InputError("granularity must be at least 1")
    budget = default_budget(neg, args)
    out.write(f"# budget steps={budget.max_steps} granularity={budget.granularity} "
              f"time-cap={budget.max_time}\n")
    if args.node is not None or args.outcome is not None:
        if args.node is None or args.outcome is None:
            raise InputError("--node and --outcome go together")
        verdict = explorer.bounded_reach(neg, Location(args.node, args.outcome), budget)
        if isinstance(verdict, Reachable):
            return _emit_witness(neg, verdict.witness, out)
        out.write(f"unknown ({args.node},{args.outcome})\n")
        return EXIT_UNKNOWN
    found = explorer.bounded_reach_all(neg, budget)
    for loc in neg.locations:
        out.write(f"{loc} {'reachable' if loc in found else 'unknown'}\n")
    return EXIT_REACHABLE


def cmd_validate(args, out) -> int:
    _load(args.file)
    out.write("ok\n")
    return 0


def cmd_classify(args, out) -> int:
    out.write(classify(_load(args.file)).value + "\n")
    return 0


def cmd_simulate(args, out) -> int:
    neg = _load(args.file)
    rng = random.Random(args.seed)
    d = args.granularity or 1
    if d < 1:
        raise InputError("granularity must be at least 1")
    cap = args.time_cap if args.time_cap is not None else Fraction(max_constant(neg) + 1)
    slots = int(cap * d)
    cfg = initial_configuration(neg)
    steps = []
    for _ in range(args.steps):
        for _attempt in range(args.attempts):
            delay = tuple(Fraction(rng.randint(0, slots), d) for _ in neg.agents)
            mid = apply_delay(neg, cfg, delay)
            options = [loc for loc in neg.locations if enabled(neg, mid, loc)]
            if options:
                loc = rng.choice(options)
                steps.append(SmallStep(delay, loc))
                cfg = fire(neg, mid, loc)
                break
        else:
            break
    out.write(format_trace(neg, steps))
    if len(steps) < args.steps:
        out.write(f"# stopped after {len(steps)} steps: nothing enabled\n")
    return 0


def cmd_compile_cm(args, out) -> int:
    try:
        with open(args.file) as fh:
            program = parse_cm(fh.read())
        neg = compile_program(program)
    except OSError as exc:
        raise InputError(f"{args.file}: {exc.strerror}") from exc
    except (ParseError, ValueError) as exc:
        raise InputError(f"{args.file}: {exc}") from exc
    text = serialize(neg)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        out.write(text)
    return 0


def cmd_export_dot(args, out) -> int:
    neg = _load(args.file)
    if args.ta:
        if classify(neg) is not Fragment.ALWAYS_SYNC:
            raise InputError("--ta needs an always-sync negotiation")
        text = alwayssync.ta_to_dot(neg, alwayssync.build_ta(neg))
    else:
        text = to_dot(neg)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        out.write(text)
    return 0


def cmd_dump_states(args, out) -> int:
    neg = _load(args.file)
    if classify(neg) is not Fragment.SYNC_FREE:
        raise InputError("state dumps are available for sync-free negotiations only")
    out.write(regions.dump_states(neg))
    return 0


def cmd_fixture(args, out) -> int:
    if args.name is None:
        out.write("".join(n + "\n" for n in NAMES))
        return 0
    if args.name not in NAMES:
        raise InputError(f"unknown fixture {args.name}; choose from {', '.join(NAMES)}")
    out.write(fixture_text(args.name))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ltneg", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reach", help="decide or search reachability of a location")
    p.add_argument("file")
    p.add_argument("--node", required=True)
    p.add_argument("--outcome", required=True)
    p.add_argument("--engine", choices=("auto", "region", "ta", "bounded"), default="auto")
    _budget_flags(p)
    p.set_defaults(func=cmd_reach)

    p = sub.add_parser("oracle", help="bounded search over all locations, or one")
    p.add_argument("file")
    p.add_argument("--node")
    p.add_argument("--outcome")
    _budget_flags(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("validate", help="parse and check well-formedness")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("classify", help="print the fragment")
    p.add_argument("file")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", help="seeded random run")
    p.add_argument("file")
    p.add_argument("--steps", type=_positive_int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--granularity", type=int)
    p.add_argument("--time-cap", type=_rational)
    p.add_argument("--attempts", type=_positive_int, default=50,
                   help="random delays tried per step before giving up")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compile-cm", help="compile a two-counter machine")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_compile_cm)

    p = sub.add_parser("export-dot", help="Graphviz rendering")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p.add_argument("--ta", action="store_true", help="export the marking automaton instead")
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("dump-states", help="reachable region states of a sync-free negotiation")
    p.add_argument("file")
    p.set_defaults(func=cmd_dump_states)

    p = sub.add_parser("fixture", help="print a shipped fixture (or list them)")
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_fixture)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else 0
    try:
        return args.func(args, out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except explorer.NotComplete as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
