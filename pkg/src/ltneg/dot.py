"""Graphviz export of negotiations.

Each node becomes a record with one port per agent of its domain; an edge
runs from the agent's port at the source node to its port at every target
node.  Synchronizing nodes are drawn doubled and shaded.
"""

from __future__ import annotations

from .model import Negotiation, guard_str


def _quote(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _record(text: str) -> str:
    for ch in "{}|<>":
        text = text.replace(ch, "\\" + ch)
    return text


def to_dot(neg: Negotiation) -> str:
    lines = [
        "digraph negotiation {",
        "  rankdir=TB;",
        '  node [shape=record, fontname="Helvetica"];',
        '  edge [fontname="Helvetica", fontsize=10];',
    ]
    for n in neg.nodes:
        ports = "|".join(f"<{p}> {_record(p)}" for p in neg.dom(n))
        attrs = [f'label="{_quote(_record(n))}|{{{_quote(ports)}}}"']
        if n in neg.sync:
            attrs += ["peripheries=2", "style=filled", 'fillcolor="lightgrey"']
        if n == neg.initial:
            attrs.append("penwidth=2")
        lines.append(f'  "{_quote(n)}" [{", ".join(attrs)}];')
    node_pos = {n: i for i, n in enumerate(neg.nodes)}
    order = sorted(neg.delta, key=lambda k: (node_pos[k[1]], k[2], neg.agent_index[k[0]]))
    for p, n, a in order:
        e = neg.delta[(p, n, a)]
        label = a
        if e.guard:
            label += ", " + guard_str(e.guard)
        if e.resets:
            label += ", {" + ",".join(sorted(e.resets)) + "}"
        for m in sorted(e.targets, key=node_pos.__getitem__):
            lines.append(
                f'  "{_quote(n)}":"{_quote(p)}" -> "{_quote(m)}":"{_quote(p)}" [label="{_quote(label)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
