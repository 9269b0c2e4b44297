"""Graphviz DOT output for models, with change highlighting.

Every model element appears exactly once as an ``id="..."`` attribute:
goals, PoIs, relations, Dts and ports as nodes or edges, systems as clusters,
flows as solid edges and ``satisfies`` links as dashed edges. Emission order
is sorted, so equal inputs give byte-identical text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from . import model as m
from .transform.changeset import ChangeSet

HIGHLIGHT_COLOR = "#E69F00"

_EDGE_STYLE = {
    m.EdgeKind.GENERALIZATION: 'arrowhead="onormal"',
    m.EdgeKind.POSITIVE: 'arrowhead="normal"',
    m.EdgeKind.CONFLICT: 'dir="both", arrowhead="normal", arrowtail="normal"',
}


@dataclass(frozen=True)
class RenderOptions:
    highlight: Optional[ChangeSet] = None
    show_goal_layer: bool = True
    collapse_actual_twins: bool = False


def _q(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _node(eid: str) -> str:
    return _q("n:" + eid)


class _Writer:
    def __init__(self, marked: frozenset[str]):
        self.lines: list[str] = []
        self.marked = marked

    def attrs(self, eid: str, sep: str = ", ", **kv: str) -> str:
        parts = [f"id={_q(eid)}"]
        parts += [f"{k}={v}" for k, v in kv.items()]
        if eid in self.marked:
            parts += [f'color="{HIGHLIGHT_COLOR}"', 'class="highlight"']
        return sep.join(parts)

    def emit(self, depth: int, text: str) -> None:
        self.lines.append("  " * depth + text)


def render_dot(model: m.Model, options: RenderOptions = RenderOptions()) -> str:
    marked = options.highlight.highlighted if options.highlight else frozenset()
    w = _Writer(marked & frozenset(model.index))
    w.emit(0, f"digraph {_q(model.name)} {{")
    w.emit(1, "compound=true;")
    w.emit(1, "newrank=true;")
    w.emit(1, 'node [fontname="Helvetica", fontsize=10];')
    w.emit(1, 'edge [fontname="Helvetica", fontsize=9];')
    label = model.name if not model.extends_name else f"{model.name} / {model.extends_name}"
    w.emit(1, f"label={_q('dartwin ' + label)};")
    w.emit(1, "labelloc=t;")

    if options.show_goal_layer and model.goals:
        _goals(w, model)
    _system(w, model.root, 1, options)

    for f in model.flows():
        w.emit(1, f"{_node(f.src.id)} -> {_node(f.dst.id)} [{w.attrs(f.id, style='solid')}];")
    if options.show_goal_layer:
        for link in model.links:
            w.emit(1, f"{_node(link.dt)} -> {_node(link.goal)} [{w.attrs(link.id, style='dashed', arrowhead='none')}];")
    w.emit(0, "}")
    return "\n".join(w.lines) + "\n"


def _goals(w: _Writer, model: m.Model) -> None:
    w.emit(1, 'subgraph "cluster:goals" {')
    w.emit(2, 'label="goals"; style="invis";')
    for g in model.goals:
        text = g.title
        if g.constraint is not None:
            text += "\n" + g.constraint.to_text()
        w.emit(2, f"{_node(g.id)} [{w.attrs(g.id, shape='trapezium', label=_q(text))}];")
        for p in g.pois:
            w.emit(2, f"{_node(p.id)} [{w.attrs(p.id, shape='note', label=_q(f'{p.name}: {p.unit}'))}];")
            w.emit(2, f'{_node(p.id)} -> {_node(g.id)} [style="dotted", arrowhead="none"];')
    for e in model.goal_edges:
        extra = {"label": _q(e.label)} if e.label else {}
        if e.combinator is not None:
            extra["taillabel"] = _q(e.combinator.value)
        attrs = w.attrs(e.id, **extra)
        w.emit(2, f"{_node(e.source)} -> {_node(e.target)} [{attrs}, {_EDGE_STYLE[e.kind]}];")
    w.emit(1, "}")
    # Separator: keeps the goal layer above the architecture.
    w.emit(1, '"sep:goals" [shape="point", style="invis"];')
    for g in model.goals:
        w.emit(1, f'{_node(g.id)} -> "sep:goals" [style="invis"];')
    w.emit(1, f'"sep:goals" -> {_q("anchor:" + model.root.id)} [style="invis"];')


def _system(w: _Writer, s: m.TwinSystem, depth: int, options: RenderOptions) -> None:
    keyword = "actual twin" if s.kind == m.SystemKind.ACTUAL_TWIN else "twin system"
    if options.collapse_actual_twins and s.kind == m.SystemKind.ACTUAL_TWIN:
        # One box for the whole actual twin; its ports stay as flow anchors.
        w.emit(depth, f"{_node(s.id)} [{w.attrs(s.id, shape='box3d', label=_q(f'{keyword} {s.name}'))}];")
        w.emit(depth, f'{_q("anchor:" + s.id)} [shape="point", style="invis"];')
        for p in s.ports:
            _port(w, p, depth)
        return
    w.emit(depth, f"subgraph {_q('cluster:' + s.id)} {{")
    w.emit(depth + 1, w.attrs(s.id, sep="; ", label=_q(f"{keyword} {s.name}")) + ";")
    w.emit(depth + 1, 'style="rounded";')
    w.emit(depth + 1, f'{_q("anchor:" + s.id)} [shape="point", style="invis"];')
    for p in s.ports:
        _port(w, p, depth + 1)
    for d in s.dts:
        w.emit(depth + 1, f"{_node(d.id)} [{w.attrs(d.id, shape='box', style=_q('rounded'), label=_q(d.name))}];")
        for p in d.ports:
            _port(w, p, depth + 1)
    for sub in s.subsystems:
        _system(w, sub, depth + 1, options)
    w.emit(depth, "}")


def _port(w: _Writer, p: m.Port, depth: int) -> None:
    arrow = "in" if p.direction == m.Direction.INPUT else "out"
    label = _q(f"{p.name} ({arrow}, {p.role.value})")
    w.emit(depth, f"{_node(p.id)} [{w.attrs(p.id, shape='box', height='0.2', label=label)}];")


def highlighted_ids(dot: str) -> set[str]:
    """Ids carrying the highlight class in rendered DOT text."""
    out = set()
    for line in dot.splitlines():
        if 'class="highlight"' in line:
            mt = re.search(r'\bid="((?:[^"\\]|\\.)*)"', line)
            if mt:
                out.add(mt.group(1))
    return out


def element_ids(dot: str) -> list[str]:
    """Every ``id`` attribute in emission order."""
    return [mt.group(1) for mt in re.finditer(r'\bid="((?:[^"\\]|\\.)*)"', dot)]
