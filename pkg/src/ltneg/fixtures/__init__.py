"""Shipped example negotiations, the k-vendor family and random instance generators."""

from __future__ import annotations

import random
from importlib import resources

from ..model import Entry, Negotiation, make_negotiation
from ..textio import parse, parse_guard, serialize

NAMES = ("atm", "vendor", "kvendor", "equal_count", "syncfree_diamond")


def _e(guard: str = "", to=(), reset=()) -> Entry:
    return Entry(parse_guard(guard), frozenset(to), frozenset(reset))


def atm() -> Negotiation:
    """Customer ``c``, ATM ``a`` and bank ``b`` resetting a PIN with an OTP.

    The ATM leaves ``n4`` on ``e_otp`` towards ``n6``.
    """
    nodes = {
        "n_in": "cab", "n1": "ca", "n2": "ab", "n3": "cb",
        "n4": "ca", "n5": "ab", "n6": "cab",
    }
    delta = {
        ("c", "n_in", "st"): _e(to=["n1"]),
        ("a", "n_in", "st"): _e(to=["n1"]),
        ("b", "n_in", "st"): _e(to=["n2"]),
        ("c", "n1", "req"): _e(to=["n3"], reset=["x"]),
        ("a", "n1", "req"): _e(to=["n2"]),
        ("a", "n2", "det"): _e(to=["n4"]),
        ("b", "n2", "det"): _e(to=["n3"]),
        ("c", "n3", "s_otp"): _e(to=["n4"]),
        ("b", "n3", "s_otp"): _e(to=["n5"], reset=["y"]),
        ("c", "n4", "e_otp"): _e("x<=10", to=["n4", "n6"]),
        ("a", "n4", "e_otp"): _e(to=["n6"]),
        ("c", "n4", "g_up"): _e("x>10", to=["n6"]),
        ("a", "n4", "g_up"): _e(to=["n6"]),
        ("a", "n5", "match"): _e(to=["n6"]),
        ("b", "n5", "match"): _e("y<=3", to=["n6"]),
        ("a", "n5", "fail"): _e(to=["n4"]),
        ("b", "n5", "fail"): _e("y<=3", to=["n5"]),
    }
    return make_negotiation("cab", {"c": ["x"], "b": ["y"]}, nodes, "n_in", delta)


def vendor(with_vendor: bool = True) -> Negotiation:
    """``p`` makes ``q`` visit vendor ``v`` at ``n2`` before meeting again at ``n3``.

    Only ``n3`` synchronizes.  ``with_vendor=False`` deletes ``n2``.
    """
    nodes = {"n_in": "pqv", "n1": "pq", "n2": "qv", "n3": "pq", "n4": "pq"}
    delta = {
        ("p", "n_in", "st"): _e(to=["n1"]),
        ("q", "n_in", "st"): _e(to=["n1"]),
        ("v", "n_in", "st"): _e(to=["n2"]),
        ("p", "n1", "a"): _e("x=2", to=["n3"]),
        ("q", "n1", "a"): _e("y=0", to=["n2", "n3"]),
        ("q", "n2", "meet"): _e(to=["n3"], reset=["y"]),
        ("v", "n2", "meet"): _e(),
        ("p", "n3", "b"): _e(to=["n4"]),
        ("q", "n3", "b"): _e("y=0", to=["n4"]),
    }
    if not with_vendor:
        del nodes["n2"]
        delta = {
            k: Entry(e.guard, e.targets - {"n2"}, e.resets)
            for k, e in delta.items() if k[1] != "n2"
        }
    return make_negotiation("pqv", {"p": ["x"], "q": ["y"]}, nodes, "n_in", delta, ["n3"])


def gen_kvendor(k: int, m: int) -> Negotiation:
    """``q`` must spend one unit with each of at least ``m`` of ``k`` vendors.

    Vendors are visited in increasing order; ``n3`` synchronizes ``p`` and ``q``.
    """
    if k < 1 or m < 1:
        raise ValueError("k and m must be at least 1")
    vendors = [f"v{i}" for i in range(1, k + 1)]
    booths = [f"m{i}" for i in range(1, k + 1)]
    agents = ["p", "q"] + vendors
    nodes = {"n_in": agents, "n1": ["p", "q"]}
    nodes.update({b: ["q", v] for b, v in zip(booths, vendors)})
    nodes.update({"n3": ["p", "q"], "n4": ["p", "q"]})
    delta = {
        ("p", "n_in", "st"): _e(to=["n1"]),
        ("q", "n_in", "st"): _e(to=["n1"]),
        ("p", "n1", "a"): _e(f"x={m}", to=["n3"]),
        ("q", "n1", "a"): _e("y=0", to=booths + ["n3"]),
        ("p", "n3", "b"): _e(to=["n4"]),
        ("q", "n3", "b"): _e("y=0", to=["n4"]),
    }
    for i, (b, v) in enumerate(zip(booths, vendors), 1):
        delta[(v, "n_in", "st")] = _e(to=[b])
        delta[("q", b, f"b{i}")] = _e("y=1", to=booths[i:], reset=["y"])
        delta[(v, b, f"b{i}")] = _e()
        delta[("q", b, f"a{i}")] = _e("y=1", to=["n3"], reset=["y"])
        delta[(v, b, f"a{i}")] = _e()
    return make_negotiation(agents, {"p": ["x"], "q": ["y"]}, nodes, "n_in", delta, ["n3"])


def equal_count(a_guard: str = "x=1", b_guard: str = "y=1", c_guards=("x=1", "y=1")) -> Negotiation:
    """``p`` loops on ``a``, ``q`` loops on ``b``; they meet at the synchronizing ``n3``.

    Every node synchronizes, so the negotiation is always-synchronizing.
    """
    nodes = {"n_in": "pq", "n1": "p", "n2": "q", "n3": "pq"}
    delta = {
        ("p", "n_in", "st"): _e(to=["n1", "n3"]),
        ("q", "n_in", "st"): _e(to=["n2", "n3"]),
        ("p", "n1", "a"): _e(a_guard, to=["n1", "n3"], reset=["x"]),
        ("q", "n2", "b"): _e(b_guard, to=["n2", "n3"], reset=["y"]),
        ("p", "n3", "c"): _e(c_guards[0]),
        ("q", "n3", "c"): _e(c_guards[1]),
    }
    return make_negotiation("pq", {"p": ["x"], "q": ["y"]}, nodes, "n_in", delta, nodes)


def syncfree_diamond(with_left: bool = True) -> Negotiation:
    """Two agents pick ``n2`` or ``n3`` after ``n1``; only the ``n2`` route allows ``c``.

    ``with_left=False`` removes ``n2`` from the targets of ``n1``.
    """
    nodes = {"n1": "pq", "n2": "pq", "n3": "pq", "n4": "pq"}
    after = ["n2", "n3"] if with_left else ["n3"]
    delta = {
        ("p", "n1", "a"): _e(to=after),
        ("q", "n1", "a"): _e(to=after),
        ("p", "n2", "b"): _e("x>=2", to=["n4"]),
        ("q", "n2", "b"): _e("y<=1", to=["n4"]),
        ("p", "n3", "b"): _e("x<=1", to=["n4"]),
        ("q", "n3", "b"): _e("y>=2", to=["n4"]),
        ("p", "n4", "c"): _e("x=2"),
        ("q", "n4", "c"): _e("y=1"),
    }
    return make_negotiation("pq", {"p": ["x"], "q": ["y"]}, nodes, "n1", delta)


BUILDERS = {
    "atm": atm,
    "vendor": vendor,
    "kvendor": lambda: gen_kvendor(2, 1),
    "equal_count": equal_count,
    "syncfree_diamond": syncfree_diamond,
}


def fixture_path(name: str):
    return resources.files(__package__).joinpath(f"{name}.lneg")


def fixture_text(name: str) -> str:
    return fixture_path(name).read_text()


def fixtures() -> dict:
    """The shipped fixtures, parsed from their ``.lneg`` files."""
    return {name: parse(fixture_text(name)) for name in NAMES}


def write_fixture_files(directory) -> None:
    from pathlib import Path

    for name, build in BUILDERS.items():
        Path(directory, f"{name}.lneg").write_text(serialize(build()))


# -- random instances ------------------------------------------------------------

OPS = ("<", "<=", "=", ">=", ">")


def random_negotiation(
    rng: random.Random,
    sync: str = "none",
    max_agents: int = 3,
    max_nodes: int = 5,
    max_clocks: int = 3,
    max_bound: int = 2,
    own_clocks_only: bool = False,
) -> Negotiation:
    """A random well-formed negotiation.

    ``sync`` is ``"none"``, ``"all"`` or ``"some"``.  Guards read clocks of
    agents in the node's domain (only the agent's own clocks with
    ``own_clocks_only``).
    """
    agents = [f"p{i}" for i in range(rng.randint(1, max_agents))]
    clocks = {p: [] for p in agents}
    for i in range(rng.randint(1, max_clocks)):
        clocks[rng.choice(agents)].append(f"x{i}")
    bound = rng.randint(1, max_bound)
    nodes = {"n0": list(agents)}
    for i in range(1, rng.randint(2, max_nodes)):
        nodes[f"n{i}"] = sorted(rng.sample(agents, rng.randint(1, len(agents))))
    names = list(nodes)
    delta = {}
    for n in names:
        dom = nodes[n]
        readable = clocks_of(dom, clocks)
        for j in range(rng.randint(1, 2)):
            outcome = f"o{j}"
            for p in dom:
                pool = clocks[p] if own_clocks_only else readable
                guard = []
                for _ in range(rng.choice((0, 0, 1, 1, 2))):
                    if pool:
                        guard.append(f"{rng.choice(pool)}{rng.choice(OPS)}{rng.randint(0, bound)}")
                mine = [m for m in names if p in nodes[m]]
                to = rng.sample(mine, rng.randint(0, min(2, len(mine))))
                reset = [x for x in clocks[p] if rng.random() < 0.4]
                delta[(p, n, outcome)] = _e("&".join(guard), to, reset)
    if sync == "all":
        sync_nodes = names
    elif sync == "some":
        sync_nodes = rng.sample(names, rng.randint(1, len(names) - 1))
    else:
        sync_nodes = []
    return make_negotiation(agents, clocks, nodes, "n0", delta, sync_nodes)


def clocks_of(agents, clocks) -> list:
    return [x for p in agents for x in clocks[p]]
