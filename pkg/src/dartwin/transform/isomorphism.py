"""Structural isomorphism of models, ignoring identifiers and display names."""

from __future__ import annotations

from typing import NamedTuple, Optional

import networkx as nx
from networkx.algorithms.isomorphism import DiGraphMatcher

from .. import model as m


class Isomorphism(NamedTuple):
    isomorphic: bool
    mapping: Optional[dict[str, str]]

    def __bool__(self) -> bool:
        return self.isomorphic


def model_graph(model: m.Model) -> nx.DiGraph:
    """Typed graph whose nodes are the model's ids.

    Flows and Dt-to-goal links become labelled edges; goal relations become
    nodes so that parallel relations between two goals stay distinct.
    """
    g = nx.DiGraph()
    for eid, el, container in model.iter_elements():
        if isinstance(el, m.Goal):
            g.add_node(eid, label=("goal",))
        elif isinstance(el, m.Poi):
            g.add_node(eid, label=("poi", el.unit))
            g.add_edge(eid, container, label="poi-of")
        elif isinstance(el, m.GoalEdge):
            combinator = el.combinator.value if el.combinator else None
            g.add_node(eid, label=("relation", el.kind.value, combinator))
        elif isinstance(el, m.TwinSystem):
            g.add_node(eid, label=("system", el.kind.value))
            if container is not None:
                g.add_edge(eid, container, label="parent")
        elif isinstance(el, m.Dt):
            g.add_node(eid, label=("dt", el.behavior_key))
            g.add_edge(eid, container, label="parent")
        elif isinstance(el, m.Port):
            g.add_node(eid, label=("port", el.direction.value, el.role.value, el.unit))
            g.add_edge(eid, container, label="owner")
    for e in model.goal_edges:
        g.add_edge(e.source, e.id, label="rel-source")
        g.add_edge(e.id, e.target, label="rel-target")
    for f in model.flows():
        g.add_edge(f.src.id, f.dst.id, label="flow")
    for link in model.links:
        g.add_edge(link.dt, link.goal, label="link")
    return g


def is_isomorphic(a: m.Model, b: m.Model) -> Isomorphism:
    """Kind-, role-, direction-, unit- and topology-preserving bijection.

    On success the mapping covers every element id of ``a``, including flows
    and links, which are named after their endpoints.
    """
    ga, gb = model_graph(a), model_graph(b)
    if ga.number_of_nodes() != gb.number_of_nodes() or ga.number_of_edges() != gb.number_of_edges():
        return Isomorphism(False, None)
    matcher = DiGraphMatcher(
        ga,
        gb,
        node_match=lambda x, y: x["label"] == y["label"],
        edge_match=lambda x, y: x["label"] == y["label"],
    )
    if not matcher.is_isomorphic():
        return Isomorphism(False, None)
    mapping = dict(matcher.mapping)
    for f in a.flows():
        mapping[f.id] = f"{mapping[f.src.id]}->{mapping[f.dst.id]}"
    for link in a.links:
        mapping[link.id] = f"{mapping[link.dt]}=>{mapping[link.goal]}"
    return Isomorphism(True, dict(sorted(mapping.items())))
