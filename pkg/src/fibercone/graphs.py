"""Finite graphs with oriented edges, edge paths, turns and rational lengths.

Oriented edges are plain strings.  A positive edge is declared with a bare
name like ``"a"``; its reverse is written ``"a^-1"``.  All lengths and
subdivision positions are exact :class:`fractions.Fraction` values; no
floating point enters this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

__all__ = [
    "GraphError",
    "ParseError",
    "inverse",
    "is_positive",
    "positive_name",
    "Graph",
    "EdgePath",
    "Turn",
    "make_turn",
    "tighten",
    "subdivide",
    "parse_graph_text",
    "format_graph_text",
]

_INV = "^-1"


class GraphError(ValueError):
    """Raised for structurally invalid graphs, paths or arguments."""


class ParseError(ValueError):
    """Raised by the text-format parser; carries a 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def inverse(e: str) -> str:
    """Reverse an oriented edge name (``a`` <-> ``a^-1``)."""
    return e[: -len(_INV)] if e.endswith(_INV) else e + _INV


def is_positive(e: str) -> bool:
    return not e.endswith(_INV)


def positive_name(e: str) -> str:
    """Name of the underlying topological edge."""
    return e[: -len(_INV)] if e.endswith(_INV) else e


class Graph:
    """A finite topological graph.

    Parameters
    ----------
    vertices:
        Iterable of vertex ids.
    edges:
        Mapping ``name -> (origin, terminus)`` for the positive edges; the
        fixed-point-free involution and the reverse orientations are implied.
    lengths:
        Optional mapping ``name -> positive rational``.  When omitted every
        edge gets the simplicial length 1.
    """

    def __init__(
        self,
        vertices: Iterable[str],
        edges: Mapping[str, tuple[str, str]],
        lengths: Optional[Mapping[str, Fraction | int | str]] = None,
    ):
        self.vertices: tuple[str, ...] = tuple(sorted(set(vertices)))
        self._vset = set(self.vertices)
        self.edge_ends: dict[str, tuple[str, str]] = {e: (o, t) for e, (o, t) in edges.items()}
        self.positive_edges: tuple[str, ...] = tuple(sorted(self.edge_ends))
        self.explicit_lengths = lengths is not None
        self.lengths: dict[str, Fraction] = {}
        for e in self.positive_edges:
            if lengths is not None and e in lengths:
                self.lengths[e] = Fraction(lengths[e])
            else:
                self.lengths[e] = Fraction(1)
        self._links: dict[str, tuple[str, ...]] = {}
        for v in self.vertices:
            link = []
            for e in self.positive_edges:
                o, t = self.edge_ends[e]
                if o == v:
                    link.append(e)
                if t == v:
                    link.append(inverse(e))
            self._links[v] = tuple(sorted(link))

    # -- basic incidence ----------------------------------------------------

    def origin(self, e: str) -> str:
        name = positive_name(e)
        o, t = self.edge_ends[name]
        return o if is_positive(e) else t

    def terminus(self, e: str) -> str:
        return self.origin(inverse(e))

    def oriented_edges(self) -> tuple[str, ...]:
        out = []
        for e in self.positive_edges:
            out.append(e)
            out.append(inverse(e))
        return tuple(out)

    def link(self, v: str) -> tuple[str, ...]:
        """All oriented edges with origin ``v``."""
        return self._links[v]

    def valence(self, v: str) -> int:
        return len(self._links[v])

    def length(self, e: str) -> Fraction:
        return self.lengths[positive_name(e)]

    def volume(self) -> Fraction:
        return sum(self.lengths.values(), Fraction(0))

    def has_edge(self, e: str) -> bool:
        return positive_name(e) in self.edge_ends

    # -- global invariants --------------------------------------------------

    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.positive_edges)

    def connected(self) -> bool:
        if not self.vertices:
            return True
        seen = {self.vertices[0]}
        stack = [self.vertices[0]]
        while stack:
            v = stack.pop()
            for e in self._links[v]:
                w = self.terminus(e)
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self.vertices)

    def components(self) -> list[set[str]]:
        out: list[set[str]] = []
        seen: set[str] = set()
        for v0 in self.vertices:
            if v0 in seen:
                continue
            comp = {v0}
            stack = [v0]
            while stack:
                v = stack.pop()
                for e in self._links[v]:
                    w = self.terminus(e)
                    if w not in comp:
                        comp.add(w)
                        stack.append(w)
            seen |= comp
            out.append(comp)
        return out

    def validate(self) -> list[str]:
        """Report invariant violations; an empty list means the graph is valid."""
        problems = []
        for e, (o, t) in self.edge_ends.items():
            if e.endswith(_INV):
                problems.append(f"edge name {e!r} collides with the orientation-reversal suffix")
            if o not in self._vset:
                problems.append(f"edge {e!r} has unknown origin {o!r}")
            if t not in self._vset:
                problems.append(f"edge {e!r} has unknown terminus {t!r}")
        for e, l in self.lengths.items():
            if l <= 0:
                problems.append(f"edge {e!r} has non-positive length {l}")
        return problems

    def __repr__(self):
        return f"Graph({len(self.vertices)} vertices, {len(self.positive_edges)} edges)"

    def __eq__(self, other):
        return (
            isinstance(other, Graph)
            and self.vertices == other.vertices
            and self.edge_ends == other.edge_ends
            and self.lengths == other.lengths
        )

    def __hash__(self):
        return hash((self.vertices, tuple(sorted(self.edge_ends.items()))))


@dataclass(frozen=True)
class EdgePath:
    """A combinatorial edge path; degenerate paths carry a basepoint vertex."""

    edges: tuple[str, ...]
    basepoint: Optional[str] = None

    def __post_init__(self):
        if not self.edges and self.basepoint is None:
            raise GraphError("degenerate path needs a basepoint vertex")

    def __len__(self):
        return len(self.edges)

    @property
    def degenerate(self) -> bool:
        return not self.edges

    def reversed(self) -> "EdgePath":
        return EdgePath(tuple(inverse(e) for e in reversed(self.edges)), self.basepoint)

    def origin(self, g: Graph) -> str:
        return g.origin(self.edges[0]) if self.edges else self.basepoint  # type: ignore[return-value]

    def terminus(self, g: Graph) -> str:
        return g.terminus(self.edges[-1]) if self.edges else self.basepoint  # type: ignore[return-value]

    def check_composable(self, g: Graph) -> None:
        for e in self.edges:
            if not g.has_edge(e):
                raise GraphError(f"path uses unknown edge {e!r}")
        for a, b in zip(self.edges, self.edges[1:]):
            if g.terminus(a) != g.origin(b):
                raise GraphError(f"path is not composable at {a!r}|{b!r}")


Turn = frozenset  # a turn is an unordered pair {e, e'}; degenerate iff size 1


def make_turn(e1: str, e2: str) -> Turn:
    return frozenset((e1, e2))


def turn_is_degenerate(t: Turn) -> bool:
    return len(t) == 1


def tighten(g: Graph, p: EdgePath) -> EdgePath:
    """Reduce a path by cancelling ``e e^-1`` subwords; homotopic rel endpoints."""
    p.check_composable(g)
    out: list[str] = []
    for e in p.edges:
        if out and out[-1] == inverse(e):
            out.pop()
        else:
            out.append(e)
    if out:
        return EdgePath(tuple(out))
    return EdgePath((), p.origin(g))


def subdivide(
    g: Graph,
    points: Mapping[str, Sequence[Fraction | int | str]],
) -> tuple[Graph, dict[str, EdgePath]]:
    """Subdivide edges at interior rational positions.

    ``points`` maps a positive edge name to strictly increasing positions in
    the open interval ``(0, length(e))``.  Returns the subdivided graph and a
    correspondence sending every old positive edge to the path of its pieces.
    New cells get deterministic names: pieces ``e.1, e.2, ...`` and interior
    vertices ``e:1, e:2, ...``.
    """
    for e in points:
        if e not in g.edge_ends:
            raise GraphError(f"cannot subdivide unknown edge {e!r}")
    new_vertices = list(g.vertices)
    new_edges: dict[str, tuple[str, str]] = {}
    new_lengths: dict[str, Fraction] = {}
    correspondence: dict[str, EdgePath] = {}
    for e in g.positive_edges:
        cuts = [Fraction(x) for x in points.get(e, ())]
        L = g.length(e)
        for x in cuts:
            if not (0 < x < L):
                raise GraphError(f"subdivision position {x} outside (0, {L}) on edge {e!r}")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise GraphError(f"subdivision positions on {e!r} must be strictly increasing")
        if not cuts:
            new_edges[e] = g.edge_ends[e]
            new_lengths[e] = L
            correspondence[e] = EdgePath((e,))
            continue
        o, t = g.edge_ends[e]
        breakpoints = [Fraction(0)] + cuts + [L]
        piece_names = [f"{e}.{i}" for i in range(1, len(breakpoints))]
        inner = [f"{e}:{i}" for i in range(1, len(cuts) + 1)]
        new_vertices.extend(inner)
        ends = [o] + inner + [t]
        for i, name in enumerate(piece_names):
            new_edges[name] = (ends[i], ends[i + 1])
            new_lengths[name] = breakpoints[i + 1] - breakpoints[i]
        correspondence[e] = EdgePath(tuple(piece_names))
    sub = Graph(new_vertices, new_edges, new_lengths if g.explicit_lengths else None)
    if not g.explicit_lengths:
        # keep the split lengths even in the simplicial case so that the
        # total length is preserved
        sub.lengths = new_lengths
    return sub, correspondence


# -- text format -------------------------------------------------------------
#
#   # comment
#   vertices L R
#   edge a L R
#   len a 3/2
#   map a -> d
#   map d -> b a^-1 d b^-1 a c


def parse_graph_text(text: str) -> tuple[Graph, Optional[dict[str, EdgePath]], Optional[dict[str, str]]]:
    """Parse the text format.

    Returns ``(graph, edge_map, vertex_map)`` where the maps are ``None`` when
    the file declares no ``map`` lines.  The vertex map of a declared edge map
    is inferred from the edge images and checked for consistency.
    """
    vertices: list[str] = []
    edges: dict[str, tuple[str, str]] = {}
    lengths: dict[str, Fraction] = {}
    raw_map: dict[str, tuple[str, ...]] = {}
    saw_len = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "vertices":
            if len(parts) < 2:
                raise ParseError(lineno, "'vertices' needs at least one name")
            vertices.extend(parts[1:])
        elif kind == "edge":
            if len(parts) != 4:
                raise ParseError(lineno, "expected 'edge NAME ORIGIN TERMINUS'")
            name, o, t = parts[1:]
            if name in edges:
                raise ParseError(lineno, f"duplicate edge {name!r}")
            if name.endswith(_INV):
                raise ParseError(lineno, f"edge name {name!r} may not end in {_INV!r}")
            edges[name] = (o, t)
        elif kind == "len":
            if len(parts) != 3:
                raise ParseError(lineno, "expected 'len NAME RATIONAL'")
            try:
                lengths[parts[1]] = Fraction(parts[2])
            except (ValueError, ZeroDivisionError):
                raise ParseError(lineno, f"bad rational {parts[2]!r}") from None
            saw_len = True
        elif kind == "map":
            if len(parts) < 4 or parts[2] != "->":
                raise ParseError(lineno, "expected 'map NAME -> WORD'")
            if parts[1] in raw_map:
                raise ParseError(lineno, f"duplicate map for {parts[1]!r}")
            raw_map[parts[1]] = tuple(parts[3:])
        else:
            raise ParseError(lineno, f"unknown declaration {kind!r}")
    if not edges:
        raise ParseError(1, "no edges declared")
    for name in lengths:
        if name not in edges:
            raise ParseError(1, f"'len' for unknown edge {name!r}")
    for o, t in edges.values():
        for v in (o, t):
            if v not in vertices:
                raise ParseError(1, f"edge endpoint {v!r} not declared as a vertex")
    g = Graph(vertices, edges, lengths if saw_len else None)
    if not raw_map:
        return g, None, None
    edge_map: dict[str, EdgePath] = {}
    for name, word in raw_map.items():
        if name not in edges:
            raise ParseError(1, f"'map' for unknown edge {name!r}")
        for letter in word:
            if positive_name(letter) not in edges:
                raise ParseError(1, f"image of {name!r} uses unknown edge {letter!r}")
        edge_map[name] = EdgePath(word)
        edge_map[name].check_composable(g)
    missing = set(edges) - set(edge_map)
    if missing:
        raise ParseError(1, f"missing 'map' lines for edges {sorted(missing)}")
    vertex_map: dict[str, str] = {}
    for name, path in edge_map.items():
        o, t = edges[name]
        for v, w in ((o, path.origin(g)), (t, path.terminus(g))):
            if vertex_map.setdefault(v, w) != w:
                raise ParseError(1, f"inconsistent vertex image at {v!r}")
    for v in vertices:
        if v not in vertex_map:
            raise ParseError(1, f"vertex {v!r} is isolated; its image cannot be inferred")
    return g, edge_map, vertex_map


def format_graph_text(
    g: Graph,
    edge_map: Optional[Mapping[str, EdgePath]] = None,
) -> str:
    """Serialize back to the text format; inverse of :func:`parse_graph_text`."""
    lines = ["vertices " + " ".join(g.vertices)]
    for e in g.positive_edges:
        o, t = g.edge_ends[e]
        lines.append(f"edge {e} {o} {t}")
    if g.explicit_lengths:
        for e in g.positive_edges:
            lines.append(f"len {e} {g.lengths[e]}")
    if edge_map is not None:
        for e in g.positive_edges:
            lines.append(f"map {e} -> " + " ".join(edge_map[e].edges))
    return "\n".join(lines) + "\n"
