"""Stallings folding of labeled graphs.

Builds the subdivision of a graph map's domain along preimages of vertices,
folds it back onto the target by combinatorial Stallings folds, and packages
the stages, fold pairs, lengths and times used by the mapping-torus builder.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .graphs import EdgePath, Graph, GraphError, inverse, is_positive, positive_name

__all__ = [
    "LabeledGraph",
    "FoldOutcome",
    "FoldSequence",
    "FoldError",
    "build_delta",
    "is_folded",
    "complete_folding",
    "fold_sequence",
    "labels_isomorphic",
]


class FoldError(GraphError):
    """The labeled graph cannot be folded onto the target as expected."""


@dataclass
class LabeledGraph:
    """A graph labeled over a target graph ("Gamma-graph").

    ``edge_label`` maps each positive edge to an oriented edge of the target;
    reversed edges get reversed labels.  The labeling is a graph morphism:
    label(o(e)) = o(label(e)) and label(t(e)) = t(label(e)).
    """

    graph: Graph
    target: Graph
    edge_label: dict[str, str]
    vertex_label: dict[str, str]
    # set on subdivisions: target edge -> ordered piece names
    subdivision: Optional[dict[str, tuple[str, ...]]] = None

    def label(self, e: str) -> str:
        if is_positive(e):
            return self.edge_label[e]
        return inverse(self.edge_label[positive_name(e)])

    def check(self) -> None:
        for e in self.graph.positive_edges:
            lab = self.edge_label[e]
            if not self.target.has_edge(lab):
                raise GraphError(f"label {lab!r} of {e!r} is not a target edge")
            o, t = self.graph.edge_ends[e]
            if self.vertex_label[o] != self.target.origin(lab):
                raise GraphError(f"label mismatch at origin of {e!r}")
            if self.vertex_label[t] != self.target.terminus(lab):
                raise GraphError(f"label mismatch at terminus of {e!r}")

    def is_tame(self) -> bool:
        """Every vertex carries two incident directions with distinct labels."""
        for v in self.graph.vertices:
            labels = {self.label(e) for e in self.graph.link(v)}
            if len(labels) < 2:
                return False
        return True

    def foldable_pair(self) -> Optional[tuple[str, str]]:
        """Lexicographically first pair of distinct directions with a common
        origin and equal labels, scanning vertices then link pairs in stable
        id order."""
        for v in self.graph.vertices:
            link = self.graph.link(v)
            for i in range(len(link)):
                for j in range(i + 1, len(link)):
                    e1, e2 = link[i], link[j]
                    if e1 == inverse(e2):
                        continue  # same topological edge (a loop seen twice)
                    if self.label(e1) == self.label(e2):
                        return e1, e2
        return None


def is_folded(lg: LabeledGraph) -> tuple[bool, Optional[tuple[str, str]]]:
    """Folded means no vertex carries two distinct equally-labeled directions."""
    pair = lg.foldable_pair()
    return (pair is None), pair


def build_delta(m) -> LabeledGraph:
    """Subdivide the domain of a regular tame map along preimages of vertices.

    Each edge ``e`` splits into |f(e)| pieces named ``e.1 ... e.k`` (an edge
    with a single-letter image keeps its name); the piece labels spell the
    image word and the pulled-back length of a piece is the target length of
    its label.
    """
    g = m.domain
    if not m.is_regular():
        raise GraphError("build_delta needs a regular map")
    vertices = list(g.vertices)
    edges: dict[str, tuple[str, str]] = {}
    lengths: dict[str, Fraction] = {}
    edge_label: dict[str, str] = {}
    vertex_label: dict[str, str] = {v: m.vertex_map[v] for v in g.vertices}
    for e in g.positive_edges:
        word = m.edge_map[e].edges
        o, t = g.edge_ends[e]
        if len(word) == 1:
            edges[e] = (o, t)
            edge_label[e] = word[0]
            lengths[e] = g.length(word[0])
            continue
        inner = [f"{e}:{i}" for i in range(1, len(word))]
        vertices.extend(inner)
        ends = [o] + inner + [t]
        for i, letter in enumerate(word):
            name = f"{e}.{i + 1}"
            edges[name] = (ends[i], ends[i + 1])
            edge_label[name] = letter
            lengths[name] = g.length(letter)
        for i, letter in enumerate(word[:-1]):
            vertex_label[inner[i]] = g.terminus(letter)
    delta = LabeledGraph(Graph(vertices, edges, lengths), g, edge_label, vertex_label)
    delta.subdivision = {
        e: tuple(
            [e]
            if len(m.edge_map[e].edges) == 1
            else [f"{e}.{i}" for i in range(1, len(m.edge_map[e].edges) + 1)]
        )
        for e in g.positive_edges
    }
    delta.check()
    if not delta.is_tame():
        raise GraphError("subdivision is not tame; the input map must be tame")
    return delta


@dataclass
class FoldStep:
    e1: str  # oriented, never a loop
    e2: str  # oriented, may be a loop
    loop_swap_applied: bool
    rank_drop: bool  # termini already equal before the fold
    length: Fraction
    edge_map: dict[str, str]  # oriented edges of this stage -> next stage
    vertex_map: dict[str, str]


@dataclass
class FoldOutcome:
    stages: list[LabeledGraph]
    steps: list[FoldStep]

    @property
    def final(self) -> LabeledGraph:
        return self.stages[-1]

    @property
    def rank_drops(self) -> int:
        return sum(1 for s in self.steps if s.rank_drop)


def _apply_fold(lg: LabeledGraph, e1: str, e2: str) -> tuple[LabeledGraph, FoldStep]:
    g = lg.graph
    if g.origin(e1) != g.origin(e2) or lg.label(e1) != lg.label(e2):
        raise FoldError(f"({e1!r}, {e2!r}) is not a foldable pair")
    swap = False
    if g.origin(e1) == g.terminus(e1):  # keep e1 non-loop whenever possible
        e1, e2 = e2, e1
        swap = True
    if g.origin(e1) == g.terminus(e1) and g.origin(e2) == g.terminus(e2):
        # two loops; the fold changes the homotopy type but is still defined
        pass
    w1, w2 = g.terminus(e1), g.terminus(e2)
    rank_drop = w1 == w2
    merged_vertex = min(w1, w2)
    rename = {w1: merged_vertex, w2: merged_vertex}
    drop = positive_name(e2)
    keep = positive_name(e1)

    new_vertices = [rename.get(v, v) for v in g.vertices if v not in (w1, w2)] + [merged_vertex]
    new_edges: dict[str, tuple[str, str]] = {}
    new_lengths: dict[str, Fraction] = {}
    new_labels: dict[str, str] = {}
    for e in g.positive_edges:
        if e == drop:
            continue
        o, t = g.edge_ends[e]
        new_edges[e] = (rename.get(o, o), rename.get(t, t))
        new_lengths[e] = g.lengths[e]
        new_labels[e] = lg.edge_label[e]
    new_vlabels = {rename.get(v, v): lg.vertex_label[v] for v in g.vertices}
    if lg.vertex_label[w1] != lg.vertex_label[w2]:
        raise FoldError("fold would identify vertices with different labels")

    edge_map: dict[str, str] = {}
    for e in g.oriented_edges():
        if positive_name(e) == drop:
            # e2 (oriented from the common origin) maps onto e1
            edge_map[e] = e1 if e == e2 else inverse(e1)
        else:
            edge_map[e] = e
    vertex_map = {v: rename.get(v, v) for v in g.vertices}

    folded = LabeledGraph(
        Graph(sorted(set(new_vertices)), new_edges, new_lengths),
        lg.target,
        new_labels,
        new_vlabels,
    )
    folded.check()
    step = FoldStep(
        e1=e1,
        e2=e2,
        loop_swap_applied=swap,
        rank_drop=rank_drop,
        length=g.length(e1),
        edge_map=edge_map,
        vertex_map=vertex_map,
    )
    return folded, step


def complete_folding(
    delta: LabeledGraph,
    forced_pairs: Optional[list[tuple[str, str]]] = None,
    max_folds: Optional[int] = None,
) -> FoldOutcome:
    """Fold greedily (or along a forced list of pairs) until folded."""
    stages = [delta]
    steps: list[FoldStep] = []
    cap = max_folds if max_folds is not None else len(delta.graph.positive_edges) + 1
    k = 0
    while True:
        current = stages[-1]
        if forced_pairs is not None and k < len(forced_pairs):
            pair = forced_pairs[k]
        else:
            pair = current.foldable_pair()
        if pair is None:
            break
        if k >= cap:
            raise FoldError("folding did not terminate within the edge-count bound")
        folded, step = _apply_fold(current, *pair)
        stages.append(folded)
        steps.append(step)
        k += 1
    return FoldOutcome(stages, steps)


def labels_isomorphic(lg: LabeledGraph, target: Graph) -> bool:
    """Does the labeling map ``lg.graph -> target`` restrict to a bijection on
    vertices and topological edges?"""
    if len(lg.graph.positive_edges) != len(target.positive_edges):
        return False
    if len(lg.graph.vertices) != len(target.vertices):
        return False
    seen_edges = {positive_name(lg.edge_label[e]) for e in lg.graph.positive_edges}
    if seen_edges != set(target.positive_edges):
        return False
    seen_vertices = {lg.vertex_label[v] for v in lg.graph.vertices}
    return seen_vertices == set(target.vertices)


@dataclass
class FoldSequence:
    """A complete combinatorial Stallings folding of the subdivision back onto
    the target, with fold lengths and normalized fold times.

    ``times`` lists the building-block boundaries: for ``m >= 1`` folds it is
    ``0 = t_0 < ... < t_m = 1`` with ``t_{i+1} - t_i = length_i / L``; a
    foldless sequence keeps the single block ``[0, 1]``.
    """

    stages: list[LabeledGraph]
    steps: list[FoldStep]
    times: tuple[Fraction, ...]
    total_length: Fraction

    @property
    def fold_count(self) -> int:
        return len(self.steps)

    @property
    def block_count(self) -> int:
        return max(1, len(self.steps))

    def block_interval(self, i: int) -> tuple[Fraction, Fraction]:
        return self.times[i], self.times[i + 1]

    def fold_of_block(self, i: int) -> Optional[FoldStep]:
        return self.steps[i] if self.steps else None

    def to_json(self) -> str:
        payload = {
            "fold_count": self.fold_count,
            "total_length": str(self.total_length),
            "times": [str(t) for t in self.times],
            "stage_sizes": [
                {"vertices": len(s.graph.vertices), "edges": len(s.graph.positive_edges)}
                for s in self.stages
            ],
            "folds": [
                {
                    "pair": [s.e1, s.e2],
                    "label": s.e1 and self.stages[i].label(s.e1),
                    "length": str(s.length),
                    "loop_swap_applied": s.loop_swap_applied,
                }
                for i, s in enumerate(self.steps)
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def fold_sequence(
    delta: LabeledGraph,
    target: Optional[Graph] = None,
    forced_pairs: Optional[list[tuple[str, str]]] = None,
) -> FoldSequence:
    """Greedy deterministic fold sequence from the subdivision onto the target.

    Raises :class:`FoldError` when the quotient is not the target (which
    signals that the original map was not a homotopy equivalence).
    """
    target = target if target is not None else delta.target
    if not delta.is_tame():
        raise FoldError("fold_sequence needs a tame labeled graph")
    outcome = complete_folding(delta, forced_pairs)
    if outcome.rank_drops:
        raise FoldError("folding drops rank; the map is not a homotopy equivalence")
    if not labels_isomorphic(outcome.final, target):
        raise FoldError("folded graph is not isomorphic to the target")
    m_expected = len(delta.graph.positive_edges) - len(target.positive_edges)
    if len(outcome.steps) != m_expected:
        raise FoldError(
            f"fold count {len(outcome.steps)} does not match the edge-count formula {m_expected}"
        )
    for stage in outcome.stages:
        if not stage.is_tame():
            raise FoldError("a folding stage lost tameness; input was not tame")
    if not outcome.steps:
        return FoldSequence(outcome.stages, [], (Fraction(0), Fraction(1)), Fraction(0))
    total = sum((s.length for s in outcome.steps), Fraction(0))
    times = [Fraction(0)]
    for s in outcome.steps:
        times.append(times[-1] + s.length / total)
    assert times[-1] == 1
    return FoldSequence(outcome.stages, outcome.steps, tuple(times), total)
