"""Graphviz rendering of a fragmented model.

Every multi-state fragment becomes a cluster, as does every one-state
fragment seeded from the property's target states. Input states get a
double border, outputs are shaded and auxiliary states are dashed.
"""

from __future__ import annotations

from .fragmenter import FragmentationResult

_SHADES = ("#dbe9f6", "#fde2c8", "#d9f0d3", "#f2d7ee", "#fff3b0", "#e0e0e0")


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _node_label(r: FragmentationResult, s: int) -> str:
    m = r.model
    if s in m.aux:
        return f"{s}'"
    if m.names is not None and s < len(m.names) and m.names[s]:
        return f"{s}\\n{m.names[s]}"
    return str(s)


def to_dot(r: FragmentationResult, name: str = "fragments") -> str:
    m = r.model
    owner: dict[int, int] = {}
    clusters = []
    for f in sorted(r.fragments, key=lambda f: f.input):
        if f.degenerate and f.input not in r.seeds:
            continue
        k = len(clusters)
        clusters.append(f)
        for s in f.states:
            owner[s] = k

    def node(s: int, indent: str) -> str:
        attrs = [f"label={_quote(_node_label(r, s))}"]
        styles = []
        f = clusters[owner[s]] if s in owner else None
        if f is not None and s == f.input:
            attrs.append("peripheries=2")
        if f is not None and not f.degenerate and s in f.outputs:
            styles.append("filled")
            attrs.append('fillcolor="#bbbbbb"')
        if s in m.aux:
            styles.append("dashed")
        if styles:
            attrs.append(f"style={_quote(','.join(styles))}")
        if s == m.init:
            attrs.append("penwidth=2")
        return f"{indent}{s} [{', '.join(attrs)}];"

    lines = [f"digraph {_quote(name)} {{", "  rankdir=LR;", "  node [shape=circle];"]
    for k, f in enumerate(clusters):
        lines.append(f"  subgraph cluster_{k} {{")
        lines.append(f"    label={_quote(f'F{k} ' + str(f))};")
        lines.append(f'    style=filled; color="#888888"; fillcolor="{_SHADES[k % len(_SHADES)]}";')
        lines += [node(s, "    ") for s in sorted(f.states)]
        lines.append("  }")
    lines += [node(s, "  ") for s in range(m.n) if s not in owner]
    for s in range(m.n):
        for t, p in m.succ[s].items():
            lines.append(f"  {s} -> {t} [label={_quote(str(p))}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
