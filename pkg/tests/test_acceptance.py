"""The nine acceptance criteria, one test each.

Every test prints a ``PASS criterion N`` or ``FAIL criterion N`` line to the
terminal before asserting.
"""

import io
import itertools
import json
import os
import random
import subprocess
import sys
import time
from collections import Counter
from fractions import Fraction

import pytest

from ltneg import cli
from ltneg.alwayssync import monotonize, reach_always_sync
from ltneg.cmcompile import (
    Dec,
    Jz,
    Stop,
    compile_program,
    encodes,
    guided_big_step,
    guided_run,
    halt_location,
)
from ltneg.explorer import SearchBudget, bounded_reach, bounded_reach_all, completeness_bound, feasible_word
from ltneg.fixtures import NAMES, equal_count, fixture_text, random_negotiation, vendor
from ltneg.model import Location
from ltneg.regions import (
    Layout,
    count_reachable_regions,
    delay_closure,
    equiv_direct,
    reach_sync_free,
    realize_delay,
    region_bound,
    region_of,
    region_reset,
    region_satisfies,
)
from ltneg.semantics import (
    ExhaustedUnknown,
    Infeasible,
    NotEnabled,
    Reachable,
    apply_delay,
    enabled,
    fire,
    initial_configuration,
    is_monotonic,
    make_configuration,
    replay,
)
from ltneg.textio import parse, parse_cm

from conftest import CM_DIR, parallel_chains, random_instances, random_run


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return emit


# 1 -----------------------------------------------------------------------

def test_criterion_1_semantics(fx, report):
    neg = fx["atm"]
    v = make_configuration(neg, {"c": ["n1"], "a": ["n1"], "b": ["n2"]},
                           {"x": 2, "y": 3}, {"c": 2, "a": 1, "b": 3})
    w = apply_delay(neg, v, (1, 0, 2))
    delay_ok = (w.ref(neg, "c"), w.value(neg, "x"), w.ref(neg, "b"), w.value(neg, "y"), w.ref(neg, "a")) \
        == (3, 3, 5, 5, 1)
    c1 = make_configuration(neg, {"c": ["n4", "n6"], "a": ["n4"], "b": ["n6"]},
                            {"x": 5, "y": 1}, {"c": 10, "a": 20, "b": 5})
    c2 = fire(neg, c1, Location("n4", "e_otp"))
    fire_ok = (c2.marking == (frozenset({"n4", "n6"}), frozenset({"n6"}), frozenset({"n6"}))
               and c2.clocks == c1.clocks and c2.refs == c1.refs)
    report(1, delay_ok and fire_ok, f"delay example {delay_ok}, firing example {fire_ok}")


# 2 -----------------------------------------------------------------------

def _clock_negotiation(owners):
    from ltneg.model import make_negotiation

    agents = sorted(set(owners))
    clocks = {p: [f"x{i}" for i, o in enumerate(owners) if o == p] for p in agents}
    return make_negotiation(agents, clocks, {"n0": agents}, "n0", {})


def _rational(rng, bound):
    den = rng.randint(1, 4)
    return Fraction(rng.randint(0, (bound + 1) * den), den)


def test_criterion_2_region_properties(report):
    from ltneg.model import Constraint

    rng = random.Random(2024)
    trials, failures = 0, Counter()
    equal_pairs = 0
    for _ in range(2000):
        owners = [rng.choice("pqr") for _ in range(rng.randint(1, 4))]
        neg = _clock_negotiation(owners)
        layout = Layout.per_agent(neg)
        m = rng.randint(1, 3)
        xs = neg.all_clocks
        v = {x: _rational(rng, m) for x in xs}
        if rng.random() < 0.5:
            w = {x: _rational(rng, m) for x in xs}
        else:  # a nearby valuation, often equivalent
            w = {x: max(Fraction(0), val + Fraction(rng.choice((-1, 0, 0, 1)), 8)) for x, val in v.items()}
        rv, rw = region_of(neg, v, m), region_of(neg, w, m)
        equal_pairs += rv == rw
        if (rv == rw) != equiv_direct(neg, v, w, m):
            failures["equivalence"] += 1
        guard = tuple(Constraint(rng.choice(xs), rng.choice(("<", "<=", "=", ">=", ">")), rng.randint(0, m))
                      for _ in range(rng.randint(0, 3)))
        if region_satisfies(layout, rv, guard) != all(c.holds(v[c.clock]) for c in guard):
            failures["guard"] += 1
        ys = {x for x in xs if rng.random() < 0.5}
        after = {x: Fraction(0) if x in ys else val for x, val in v.items()}
        if region_reset(layout, rv, ys) != region_of(neg, after, m):
            failures["reset"] += 1
        if rv == rw:
            wafter = {x: Fraction(0) if x in ys else val for x, val in w.items()}
            if region_of(neg, after, m) != region_of(neg, wafter, m):
                failures["reset"] += 1
        closure = delay_closure(rv)
        delay = {p: _rational(rng, m) for p in neg.agents}
        moved = {x: v[x] + delay[neg.owner[x]] for x in xs}
        if region_of(neg, moved, m) not in closure:
            failures["closure"] += 1
        for target in closure:
            d = {p: realize_delay([v[x] for x in layout.groups[g]], target.parts[g], m)
                 for g, p in enumerate(neg.agents)}
            if region_of(neg, {x: v[x] + d[neg.owner[x]] for x in xs}, m) != target:
                failures["closure"] += 1
        trials += 1
    ok = not failures and trials >= 500 and equal_pairs > 100
    report(2, ok, f"{trials} random cases ({equal_pairs} equivalent pairs), failures {dict(failures)}")


# 3 -----------------------------------------------------------------------

def test_criterion_3_region_count_bound(report):
    worst = []
    checked = 0
    for neg in random_instances(400, seed=3, sync="none", max_clocks=3, max_bound=2):
        from ltneg.model import max_constant

        n, m = len(neg.all_clocks), max_constant(neg)
        count = count_reachable_regions(neg)
        checked += 1
        if count > region_bound(n, m):
            worst.append((count, region_bound(n, m)))
    # exhaustive guards-free loops reach every product region
    for owners in ("p", "pp", "pq", "ppp", "ppq", "pqr"):
        for m in (1, 2):
            neg = _loop(owners, m)
            checked += 1
            if count_reachable_regions(neg) > region_bound(len(owners), m):
                worst.append((owners, m))
    report(3, not worst, f"{checked} instances within the bound, violations {worst}")


def _loop(owners, m):
    from ltneg.model import Constraint, Entry, make_negotiation

    agents = sorted(set(owners))
    clocks = {p: [f"x{i}" for i, o in enumerate(owners) if o == p] for p in agents}
    delta = {}
    for p in agents:
        guard = tuple(Constraint(x, ">=", m) for x in clocks[p][:1])
        delta[(p, "n0", "a")] = Entry(guard, frozenset({"n0"}), frozenset(clocks[p][1:]))
    return make_negotiation(agents, clocks, {"n0": agents}, "n0", delta)


# 4 -----------------------------------------------------------------------

def _agree(negs, engine):
    mismatches, reachable, total = [], 0, 0
    for neg in negs:
        found = bounded_reach_all(neg, completeness_bound(neg))
        for loc in neg.locations:
            total += 1
            verdict = engine(neg, loc)
            hit = isinstance(verdict, Reachable)
            if hit:
                reachable += 1
                replay(neg, verdict.witness.start, verdict.witness.steps)
                replay(neg, found[loc].start, found[loc].steps)
            if hit != (loc in found):
                mismatches.append((neg, loc))
    return mismatches, reachable, total


def test_criterion_4_sync_free_agreement(fx, report):
    t0 = time.time()
    negs = [fx["syncfree_diamond"], fx["atm"]] + random_instances(1000, seed=4, sync="none")
    mismatches, reachable, total = _agree(negs, reach_sync_free)
    elapsed = time.time() - t0
    ok = not mismatches and elapsed <= 300
    report(4, ok, f"{len(negs)} instances, {total} locations ({reachable} reachable), "
                  f"{len(mismatches)} disagreements, {elapsed:.1f}s")


# 5 -----------------------------------------------------------------------

def test_criterion_5_monotonization(report):
    rng = random.Random(5)
    runs = []
    while len(runs) < 300:
        neg = random_negotiation(rng, sync="all")
        runs.append((neg, random_run(neg, rng, steps=8)))
    while len(runs) < 600:
        neg = parallel_chains(rng)
        runs.append((neg, random_run(neg, rng, steps=12, cap=3)))
    bad, reordered = 0, 0
    for neg, run in runs:
        mono = monotonize(neg, run)
        reordered += not is_monotonic(neg, run)
        try:
            replay(neg, mono.start, mono.steps)
            ok = is_monotonic(neg, mono) and Counter(mono.locations()) == Counter(run.locations())
        except (Infeasible, NotEnabled):
            ok = False
        bad += not ok
    report(5, bad == 0, f"{len(runs)} runs ({reordered} out of order), {bad} failures")


# 6 -----------------------------------------------------------------------

def test_criterion_6_always_sync(fx, report):
    neg = fx["equal_count"]
    st, a, b, c = Location("n_in", "st"), Location("n1", "a"), Location("n2", "b"), Location("n3", "c")
    reach_ok = isinstance(reach_always_sync(neg, c), Reachable)
    budget = SearchBudget(9, 3, Fraction(2))
    wrong = []
    words = 0
    for n in range(8):
        for body in itertools.product((a, b), repeat=n):
            w = (st,) + body
            words += 1
            feasible = feasible_word(neg, list(w) + [c], budget) is not None
            balanced = body.count(a) == body.count(b)
            if feasible != balanced:
                wrong.append("".join(l.outcome for l in w))
    mismatches, reachable, total = _agree(random_instances(1000, seed=6, sync="all"), reach_always_sync)
    ok = reach_ok and not wrong and not mismatches
    report(6, ok, f"(n3,c) reachable {reach_ok}; {words} words w with |w|<=8, "
                  f"{len(wrong)} where feasibility of w.c differs from #a=#b; "
                  f"random instances: {total} locations, {len(mismatches)} disagreements")


# 7 -----------------------------------------------------------------------

def _untimed_words(neg, target, length):
    """Location sequences ending in ``target`` that respect markings only."""
    out = []

    def walk(marking, word):
        if word and word[-1] == target:
            out.append(list(word))
            return
        if len(word) == length:
            return
        for loc in neg.locations:
            entries = neg.entries(loc)
            if all(loc.node in marking[neg.agent_index[p]] for p, _ in entries):
                nxt = list(marking)
                for p, e in entries:
                    nxt[neg.agent_index[p]] = e.targets
                walk(tuple(nxt), word + [loc])

    walk(initial_configuration(neg).marking, [])
    return out


def test_criterion_7_vendor(report):
    budget = SearchBudget(6, 1, Fraction(4))
    target = Location("n3", "b")
    neg = vendor()
    found = bounded_reach(neg, target, budget)
    found_ok = isinstance(found, Reachable) and any(s.location.node == "n2" for s in found.witness.steps)
    feasible = [w for w in _untimed_words(neg, target, budget.max_steps)
                if feasible_word(neg, w, budget) is not None]
    all_visit = bool(feasible) and all(any(l.node == "n2" for l in w) for w in feasible)
    deleted = bounded_reach(vendor(with_vendor=False), target, budget)
    ok = found_ok and all_visit and isinstance(deleted, ExhaustedUnknown)
    report(7, ok, f"found {found_ok}; {len(feasible)} feasible words within the budget, all with n2 "
                  f"{all_visit}; without n2: {type(deleted).__name__}")


# 8 -----------------------------------------------------------------------

def test_criterion_8_counter_machines(report):
    t0 = time.time()
    corpus = sorted(CM_DIR.glob("*.cm"))
    problems = []
    transitions = perturbed = halting = 0
    for path in corpus:
        prog = parse_cm(path.read_text())
        neg = compile_program(prog)
        run, trace, status = guided_run(neg, prog, 30)
        cfg = initial_configuration(neg)
        for x, y in zip(trace, trace[1:]):
            if not encodes(neg, prog, cfg, x):
                problems.append(f"{path.stem}: no encoding at {x}")
            ins = prog[x.label]
            if isinstance(ins, (Dec, Jz)):
                k = x.counter(ins.counter)
                for wrong in {k - 1, k + 1} - {-1}:
                    bad = guided_big_step(neg, prog, cfg, x, y, loops=wrong)
                    perturbed += 1
                    try:
                        replay(neg, cfg, bad.steps)
                        problems.append(f"{path.stem}: loops={wrong} replayed at {x}")
                    except (Infeasible, NotEnabled):
                        pass
            cfg = replay(neg, cfg, guided_big_step(neg, prog, cfg, x, y).steps)
            transitions += 1
        if not encodes(neg, prog, cfg, trace[-1]):
            problems.append(f"{path.stem}: no encoding at the end")
        cap = max([d for s in run.steps for d in s.delay], default=Fraction(0))
        budget = SearchBudget(len(run.steps) + 1, 1, max(cap, Fraction(1)))
        found = isinstance(bounded_reach(neg, halt_location(prog), budget), Reachable)
        halting += status is Stop.HALTED
        if found != (status is Stop.HALTED):
            problems.append(f"{path.stem}: halt found {found}, machine status {status}")
    elapsed = time.time() - t0
    ok = not problems and len(corpus) >= 10 and elapsed <= 600
    report(8, ok, f"{len(corpus)} programs ({halting} halting), {transitions} transitions, "
                  f"{perturbed} wrong-k runs rejected, {elapsed:.1f}s, problems {problems}")


# 9 -----------------------------------------------------------------------

def _reach_commands(tmpdir):
    cmds = []
    for name in NAMES:
        path = os.path.join(tmpdir, f"{name}.lneg")
        with open(path, "w") as fh:
            fh.write(fixture_text(name))
        neg = parse(fixture_text(name))
        for loc in list(neg.locations) + [Location("nowhere", "x")]:
            cmds.append(["reach", path, "--node", loc.node, "--outcome", loc.outcome])
    return cmds


def _run_all(cmds):
    results = []
    for argv in cmds:
        out = io.StringIO()
        code = cli.main(argv, out)
        results.append([code, out.getvalue()])
    return results


DRIVER = """
import json, sys
from tests.test_acceptance import _run_all
print(json.dumps(_run_all(json.loads(sys.stdin.read()))))
"""


def test_criterion_9_determinism(tmp_path, report):
    cmds = _reach_commands(str(tmp_path))
    first, second = _run_all(cmds), _run_all(cmds)
    in_process = first == second
    # separate interpreters with different hash seeds
    outs = []
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    for seed in ("1", "2"):
        env = dict(os.environ, PYTHONHASHSEED=seed)
        env["PYTHONPATH"] = os.pathsep.join(filter(None, [root, os.path.join(root, "tests"), env.get("PYTHONPATH")]))
        proc = subprocess.run([sys.executable, "-c", DRIVER], input=json.dumps(cmds),
                              capture_output=True, text=True, env=env, cwd=root)
        outs.append(json.loads(proc.stdout) if proc.returncode == 0 else proc.stderr)
    across = outs[0] == outs[1] == first
    codes = Counter(code for code, _ in first)
    report(9, in_process and across,
           f"{len(cmds)} reach commands, exit codes {dict(sorted(codes.items()))}; "
           f"repeat in process {in_process}, across hash seeds {across}")
