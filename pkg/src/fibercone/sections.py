"""Cross sections of the folded mapping torus and their first-return maps.

Given an unconstrained positive cocycle representing a primitive integral
class, the level set of a generic height is a finite graph: one vertex per
level crossing of a 1-cell and one edge per trapezoid and level.  The first
return map is computed by exact band tracing: inside every trapezoid the flow
preserves the width coordinate and levels rise affinely, so tracing an edge
one full level up is a finite recursion on width intervals with rational
splits.  Vertex orbits need not close up combinatorially; closure is
attempted by promoting image points to vertices up to a depth cap, and the
honest status is reported either way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

from . import matrices
from .cone import is_unconstrained
from .graphs import Graph, GraphError, EdgePath, inverse
from .graphmaps import GraphMap, LogEnclosure, log_enclosure
from .torus import TorusError, TrapezoidComplex, check_cocycle

__all__ = [
    "HeightAssignment",
    "SectionGraph",
    "ReturnMap",
    "heights",
    "build_section",
    "first_return",
    "crossing_matrix",
    "stretch_factor",
    "monodromy_certificates",
]


@dataclass
class HeightAssignment:
    complex: TrapezoidComplex
    z: dict[str, Fraction]
    lift: dict[str, Fraction]  # spanning-tree potential per zero-cell
    x0: Fraction  # generic base level in (0, 1)


def heights(x: TrapezoidComplex, z: Mapping[str, Fraction]) -> HeightAssignment:
    """Lift the fibration over a breadth-first spanning tree and choose the
    base level as the midpoint of the largest gap between the fractional
    parts of the lifted vertex heights (deterministic genericity)."""
    z = {c: Fraction(z[c]) for c in x.one_cells}
    check_cocycle(x, z)
    if any(v <= 0 for v in z.values()):
        raise TorusError("heights needs a positive cocycle")
    for tid in x.trapezoids:
        if not is_unconstrained(x, z, tid):
            raise TorusError(f"trapezoid {tid!r} is constrained; refine the cocycle first")
    root = min(x.zero_cells)
    lift: dict[str, Fraction] = {root: Fraction(0)}
    incident: dict[str, list[tuple[str, str, int]]] = {p: [] for p in x.zero_cells}
    for cid in sorted(x.one_cells):
        cell = x.one_cells[cid]
        incident[cell.o].append((cell.t, cid, 1))
        incident[cell.t].append((cell.o, cid, -1))
    queue = [root]
    while queue:
        p = queue.pop(0)
        for q, cid, sign in incident[p]:
            if q not in lift:
                lift[q] = lift[p] + sign * z[cid]
                queue.append(q)
    if len(lift) != len(x.zero_cells):
        raise TorusError("complex is not connected")
    for cid, cell in x.one_cells.items():
        residue = lift[cell.t] - lift[cell.o] - z[cid]
        if residue.denominator != 1:
            raise TorusError("cocycle does not represent an integral class")
    fracs = sorted({v % 1 for v in lift.values()})
    gaps = []
    for i, a in enumerate(fracs):
        b = fracs[(i + 1) % len(fracs)]
        width = (b - a) % 1 if len(fracs) > 1 else Fraction(1)
        gaps.append((width, a))
    width, a = max(gaps)
    x0 = (a + width / 2) % 1
    assert all(x0 != f for f in fracs)
    return HeightAssignment(x, z, lift, x0)


@dataclass
class SectionVertex:
    vid: str
    cell: str  # carrier 1-cell of the ambient complex
    position: Fraction  # fraction of the cell's fibration span, in (0, 1)
    level: int  # the crossing sits at height x0 + level along the cell's lift


@dataclass
class SectionEdge:
    eid: str
    trapezoid: str
    local_level: Fraction  # level relative to the trapezoid's base corner
    ends: tuple[str, str]  # vertex ids at (low-width, high-width) ends
    w_lo: Fraction
    w_hi: Fraction


@dataclass
class SectionGraph:
    complex: TrapezoidComplex
    z: dict[str, Fraction]
    lift: dict[str, Fraction]
    x0: Fraction
    vertices: dict[str, SectionVertex]
    edges: dict[str, SectionEdge]
    vertex_at: dict[tuple[str, Fraction], str]
    edge_at: dict[tuple[str, Fraction], str]

    def graph_view(self) -> Graph:
        return Graph(
            list(self.vertices),
            {e: d.ends for e, d in self.edges.items()},
        )

    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edges)

    def connected(self) -> bool:
        return self.graph_view().connected()

    def component_count(self) -> int:
        return len(self.graph_view().components())

    def valence(self, vid: str) -> int:
        count = 0
        for d in self.edges.values():
            count += sum(1 for w in d.ends if w == vid)
        return count


def _arc_cells(x: TrapezoidComplex, tid: str) -> tuple[list[str], list[str]]:
    """The two monotone boundary arcs from the base corner to the top corner,
    as cell lists each traversed in its fibration orientation.  Arc A runs
    through the bottom, arc B through the left side."""
    trap = x.trapezoids[tid]
    arc_a = [trap.bottom] + list(trap.right)
    arc_b = list(trap.left)
    if trap.zeta == 1:
        arc_b += list(trap.top)
    else:
        arc_a += list(reversed(trap.top))
    return arc_a, arc_b


def _arc_crossing(
    x: TrapezoidComplex,
    z: Mapping[str, Fraction],
    cells: list[str],
    y: Fraction,
) -> tuple[str, Fraction]:
    """The point at local level y along a rising arc: (cell, span fraction)."""
    acc = Fraction(0)
    for c in cells:
        nxt = acc + z[c]
        if acc < y < nxt:
            return c, (y - acc) / z[c]
        acc = nxt
    raise TorusError("level does not cross the arc")


def build_section(h: HeightAssignment) -> SectionGraph:
    """The fiber graph of the perturbed fibration at the base level.

    Vertices are the level crossings on 1-cells; each trapezoid contributes
    one edge per level strictly between its boundary minimum and maximum (the
    boundary profile is unimodal because the cocycle is positive).
    """
    x, z, lift, x0 = h.complex, h.z, h.lift, h.x0
    vertices: dict[str, SectionVertex] = {}
    vertex_at: dict[tuple[str, Fraction], str] = {}
    n = 0
    for cid in sorted(x.one_cells):
        cell = x.one_cells[cid]
        base = lift[cell.o]
        # positions of levels x0 + k inside (base, base + z)
        k0 = (x0 - base) % 1
        pos = k0 / z[cid]
        level0 = x0 - base - k0  # integer offset of the first crossing
        idx = 0
        while pos < 1:
            if pos > 0:
                vid = f"y{n}"
                n += 1
                level = int(level0) + idx
                vertices[vid] = SectionVertex(vid, cid, pos, level)
                vertex_at[(cid, pos)] = vid
            pos += 1 / z[cid]
            idx += 1
    edges: dict[str, SectionEdge] = {}
    edge_at: dict[tuple[str, Fraction], str] = {}
    for tid in sorted(x.trapezoids):
        trap = x.trapezoids[tid]
        arc_a, arc_b = _arc_cells(x, tid)
        height = sum((z[c] for c in arc_a), Fraction(0))
        assert height == sum((z[c] for c in arc_b), Fraction(0)), "boundary arcs disagree"
        base = lift[x.one_cells[trap.bottom].o]
        y = (x0 - base) % 1
        j = 0
        while y < height:
            cell_a, frac_a = _arc_crossing(x, z, arc_a, y)
            cell_b, frac_b = _arc_crossing(x, z, arc_b, y)
            va = vertex_at[(cell_a, frac_a)]
            vb = vertex_at[(cell_b, frac_b)]
            wa = _width_of(x, tid, arc_a, cell_a, frac_a, through_bottom=True)
            wb = _width_of(x, tid, arc_b, cell_b, frac_b, through_bottom=False)
            eid = f"E{tid}.{j}"
            lo, hi = ((wa, va), (wb, vb)) if wa <= wb else ((wb, vb), (wa, va))
            edges[eid] = SectionEdge(eid, tid, y, (lo[1], hi[1]), lo[0], hi[0])
            edge_at[(tid, y)] = eid
            y += 1
            j += 1
    section = SectionGraph(x, dict(z), dict(lift), x0, vertices, edges, vertex_at, edge_at)
    for vid, v in section.vertices.items():
        want = x.one_cells[v.cell].degree
        got = section.valence(vid)
        if got != want:
            raise TorusError(f"section vertex {vid!r} has valence {got}, carrier degree {want}")
    return section


def _width_of(
    x: TrapezoidComplex,
    tid: str,
    arc: list[str],
    cell: str,
    frac: Fraction,
    through_bottom: bool,
) -> Fraction:
    """Width coordinate in the trapezoid of a crossing point on its boundary."""
    trap = x.trapezoids[tid]
    if cell == trap.bottom and through_bottom:
        return frac * trap.width
    if through_bottom and cell in trap.right:
        return trap.width
    if not through_bottom and cell in trap.left:
        return Fraction(0)
    # on the top chain: convert the cell fraction to a bottom width via the
    # affine flow map
    i = trap.top.index(cell)
    bk = trap.top_breakpoints
    if trap.zeta == 1:
        phi = frac
    else:
        phi = 1 - frac
    return bk[i] + phi * (bk[i + 1] - bk[i])


# =============================================================================
# band tracing and the first return map
# =============================================================================


@dataclass
class _Piece:
    edge: str
    lo: Fraction
    hi: Fraction
    forward: bool  # traversal direction relative to increasing width


def _top_offsets(x: TrapezoidComplex, z: Mapping[str, Fraction], tid: str) -> list[Fraction]:
    """offset_i = (local exit level on top cell i) - (entry level in the next
    trapezoid), constant per top index."""
    trap = x.trapezoids[tid]
    left = sum((z[c] for c in trap.left), Fraction(0))
    offsets = []
    acc = Fraction(0)
    for i, c in enumerate(trap.top):
        if trap.zeta == 1:
            offsets.append(left + acc)
        else:
            offsets.append(left - acc - z[c])
        acc += z[c]
    return offsets


def _exit_level(x, z, tid: str, i: int, w: Fraction) -> Fraction:
    """Local level at which the flow line of width w exits through top cell i."""
    trap = x.trapezoids[tid]
    bk = trap.top_breakpoints
    phi = (w - bk[i]) / (bk[i + 1] - bk[i])
    left = sum((z[c] for c in trap.left), Fraction(0))
    acc = Fraction(0)
    for j in range(i):
        acc += z[trap.top[j]]
    if trap.zeta == 1:
        return left + acc + phi * z[trap.top[i]]
    return left - acc - phi * z[trap.top[i]]


def _trace(
    section: SectionGraph,
    tid: str,
    lo: Fraction,
    hi: Fraction,
    target: Fraction,
    forward: bool,
    out: list[_Piece],
    budget: list[int],
) -> None:
    """Flow the width interval [lo, hi] of trapezoid ``tid`` upward until the
    local level ``target``, emitting the crossed section edges in traversal
    order.  Levels rise affinely per top piece, so the stop set is a rational
    subinterval split."""
    x, z = section.complex, section.z
    budget[0] -= 1
    if budget[0] < 0:
        raise TorusError("band tracing exceeded its step budget")
    trap = x.trapezoids[tid]
    bk = trap.top_breakpoints
    offsets = _top_offsets(x, z, tid)
    spans: list[tuple[Fraction, Fraction, int]] = []
    for i in range(len(trap.top)):
        a, b = max(lo, bk[i]), min(hi, bk[i + 1])
        if a < b:
            spans.append((a, b, i))
    ordered = spans if forward else list(reversed(spans))
    for a, b, i in ordered:
        exit_a = _exit_level(x, z, tid, i, a)
        exit_b = _exit_level(x, z, tid, i, b)
        # stop where target <= exit level
        stop_lo, stop_hi = None, None
        if exit_a >= target and exit_b >= target:
            stop_lo, stop_hi = a, b
        elif exit_a < target and exit_b < target:
            pass
        else:
            # single affine crossing
            wstar = a + (target - exit_a) * (b - a) / (exit_b - exit_a)
            if exit_a >= target:
                stop_lo, stop_hi = a, wstar
            else:
                stop_lo, stop_hi = wstar, b
        if stop_lo is not None and stop_lo < stop_hi and (tid, target) not in section.edge_at:
            raise TorusError(f"no section edge at level {target} in {tid!r}")
        go_parts = []
        if stop_lo is None:
            go_parts.append((a, b))
        else:
            if a < stop_lo:
                go_parts.append((a, stop_lo))
            if stop_hi < b:
                go_parts.append((stop_hi, b))
        # traversal order within this span
        events = []
        if stop_lo is not None and stop_lo < stop_hi:
            events.append((stop_lo, "stop", (stop_lo, stop_hi)))
        for ga, gb in go_parts:
            if ga < gb:
                events.append((ga, "go", (ga, gb)))
        events.sort(key=lambda t: t[0], reverse=not forward)
        for _, kind, (pa, pb) in events:
            if kind == "stop":
                out.append(_Piece(section.edge_at[(tid, target)], pa, pb, forward))
            else:
                top_cell = trap.top[i]
                next_tid = x.owner(top_cell)
                w_cell = x.one_cells[top_cell].width
                if trap.zeta == 1:
                    qa = (pa - bk[i]) / (bk[i + 1] - bk[i]) * w_cell
                    qb = (pb - bk[i]) / (bk[i + 1] - bk[i]) * w_cell
                    new_forward = forward
                else:
                    qa = (1 - (pb - bk[i]) / (bk[i + 1] - bk[i])) * w_cell
                    qb = (1 - (pa - bk[i]) / (bk[i + 1] - bk[i])) * w_cell
                    new_forward = not forward
                _trace(section, next_tid, qa, qb, target - offsets[i], new_forward, out, budget)


def _flow_point(
    section: SectionGraph,
    start: tuple,
    rise: Fraction,
    budget: int = 100000,
):
    """Flow a point of the section one ``rise`` upward; returns either
    ("vtx", vertex_id) or ("interior", trapezoid, local_level, width)."""
    x, z = section.complex, section.z
    kind = start[0]
    if kind == "vtx":
        v = section.vertices[start[1]]
        cell = x.one_cells[v.cell]
        if cell.kind == "vertical":
            return _flow_vertical(section, v.cell, v.position, rise, budget)
        tid = x.owner(v.cell)
        w = v.position * x.one_cells[v.cell].width
        entry = z[v.cell] * v.position  # local entry level on the bottom
        target = entry + rise
        return _flow_in_trapezoid(section, tid, w, target, budget)
    _tag, tid, level, w = start
    return _flow_in_trapezoid(section, tid, w, level + rise, budget)


def _vertical_up(section: SectionGraph, zero_cell: str) -> str:
    cache = getattr(section, "_vertical_up", None)
    if cache is None:
        cache = {}
        for c, d in section.complex.one_cells.items():
            if d.kind == "vertical":
                if d.o in cache:
                    raise TorusError(f"two vertical cells start at {d.o!r}")
                cache[d.o] = c
        section._vertical_up = cache  # type: ignore[attr-defined]
    if zero_cell not in cache:
        raise TorusError(f"no vertical continuation above {zero_cell!r}")
    return cache[zero_cell]


def _flow_vertical(section: SectionGraph, cid: str, frac: Fraction, rise: Fraction, budget: int):
    x, z = section.complex, section.z
    remaining = rise
    while budget > 0:
        budget -= 1
        cell = x.one_cells[cid]
        gain = z[cid] * (1 - frac)
        if remaining < gain:
            pos = frac + remaining / z[cid]
            vid = section.vertex_at.get((cid, pos))
            if vid is None:
                raise TorusError("vertical flow missed a section vertex")
            return ("vtx", vid)
        if remaining == gain:
            raise TorusError("flow hit a zero cell; the base level is not generic")
        remaining -= gain
        cid = _vertical_up(section, cell.t)
        frac = Fraction(0)
    raise TorusError("vertical flow exceeded its budget")


def _flow_in_trapezoid(section: SectionGraph, tid: str, w: Fraction, target: Fraction, budget: int):
    x, z = section.complex, section.z
    while budget > 0:
        budget -= 1
        trap = x.trapezoids[tid]
        bk = trap.top_breakpoints
        if w == bk[0] or w == bk[-1]:
            raise TorusError("point flow ran along a trapezoid side; not generic")
        if w in bk[1:-1]:
            # the flow line exits at a top-chain junction 0-cell and continues
            # up the vertical 1-skeleton
            i = bk.index(w)  # junction between top cells i-1 and i
            exit_level = _exit_level(x, z, tid, i, w)
            if target < exit_level:
                eid = section.edge_at.get((tid, target))
                if eid is not None:
                    edge = section.edges[eid]
                    if w == edge.w_lo:
                        return ("vtx", edge.ends[0])
                    if w == edge.w_hi:
                        return ("vtx", edge.ends[1])
                return ("interior", tid, target, w)
            if target == exit_level:
                raise TorusError("flow hit a zero cell; the base level is not generic")
            prev_cell, this_cell = trap.top[i - 1], trap.top[i]
            if trap.zeta == 1:
                junction = x.one_cells[prev_cell].t
                assert junction == x.one_cells[this_cell].o
            else:
                junction = x.one_cells[prev_cell].o
                assert junction == x.one_cells[this_cell].t
            return _flow_vertical(section, _vertical_up(section, junction), Fraction(0), target - exit_level, budget)
        i = next(j for j in range(len(trap.top)) if bk[j] < w < bk[j + 1])
        exit_level = _exit_level(x, z, tid, i, w)
        if target < exit_level:
            eid = section.edge_at.get((tid, target))
            if eid is not None:
                edge = section.edges[eid]
                if w == edge.w_lo:
                    return ("vtx", edge.ends[0])
                if w == edge.w_hi:
                    return ("vtx", edge.ends[1])
            return ("interior", tid, target, w)
        top_cell = trap.top[i]
        if target == exit_level:
            # lands exactly on a skew cell: a section vertex
            w_cell = x.one_cells[top_cell].width
            phi = (w - bk[i]) / (bk[i + 1] - bk[i])
            q = phi if trap.zeta == 1 else 1 - phi
            vid = section.vertex_at.get((top_cell, q))
            if vid is None:
                raise TorusError("flow landed on a skew cell away from a vertex")
            return ("vtx", vid)
        offsets = _top_offsets(x, z, tid)
        w_cell = x.one_cells[top_cell].width
        phi = (w - bk[i]) / (bk[i + 1] - bk[i])
        q = phi * w_cell if trap.zeta == 1 else (1 - phi) * w_cell
        tid = x.owner(top_cell)
        w = q
        target = target - offsets[i]
    raise TorusError("point flow exceeded its budget")


@dataclass
class ReturnMap:
    section: SectionGraph
    closure_status: str  # "closed_graph_map" or "capped(<depth>)"
    cut_points: dict[str, list[tuple[Fraction, str]]]  # edge -> (width, vertex id), sorted
    arc_order: list[tuple[str, int]]  # refined arcs as (edge, index)
    arc_images: dict[tuple[str, int], list[tuple[tuple[str, int], bool]]]
    start_offsets: dict[tuple[str, int], Optional[Fraction]]
    end_offsets: dict[tuple[str, int], Optional[Fraction]]
    vertex_images: dict[str, tuple]

    @property
    def closed(self) -> bool:
        return self.closure_status == "closed_graph_map"

    def arc_bounds(self, arc: tuple[str, int]) -> tuple[Fraction, Fraction]:
        eid, k = arc
        edge = self.section.edges[eid]
        cuts = [w for w, _v in self.cut_points.get(eid, [])]
        bounds = [edge.w_lo] + cuts + [edge.w_hi]
        return bounds[k], bounds[k + 1]

    def arc_ends(self, arc: tuple[str, int]) -> tuple[str, str]:
        eid, k = arc
        edge = self.section.edges[eid]
        names = [edge.ends[0]] + [v for _w, v in self.cut_points.get(eid, [])] + [edge.ends[1]]
        return names[k], names[k + 1]

    def edge_word(self, arc: tuple[str, int]) -> list[str]:
        """Image as a word in oriented arc names (forward = bare name)."""
        word = []
        for target, fwd in self.arc_images[arc]:
            name = f"{target[0]}#{target[1]}"
            word.append(name if fwd else name + "^-1")
        return word


def first_return(section: SectionGraph, depth_cap: int = 32) -> ReturnMap:
    """Trace every section edge one full level up and attempt to close the
    vertex set under the return map by promoting image points to vertices.

    Exact rational equality detects periodic orbits; if the vertex set fails
    to stabilize within the cap, the map is reported as capped and the images
    keep rational offsets inside their first and last arcs.
    """
    x, z = section.complex, section.z
    cut_points: dict[str, list[tuple[Fraction, str]]] = {}
    vertex_images: dict[str, tuple] = {}
    promoted: dict[tuple[str, Fraction], str] = {}
    counter = [0]

    def point_id(tid: str, level: Fraction, w: Fraction) -> str:
        eid = section.edge_at[(tid, level)]
        key = (eid, w)
        if key not in promoted:
            vid = f"q{counter[0]}"
            counter[0] += 1
            promoted[key] = vid
            cuts = cut_points.setdefault(eid, [])
            cuts.append((w, vid))
            cuts.sort()
        return promoted[key]

    frontier = list(section.vertices)
    status = "closed_graph_map"
    for depth in range(depth_cap + 1):
        new_frontier = []
        for vid in frontier:
            if vid in vertex_images:
                continue
            if vid in section.vertices:
                start = ("vtx", vid)
            else:
                eid, w = next(k for k, v in promoted.items() if v == vid)
                edge = section.edges[eid]
                start = ("interior", edge.trapezoid, edge.local_level, w)
            image = _flow_point(section, start, Fraction(1))
            if image[0] == "vtx":
                vertex_images[vid] = ("vtx", image[1])
            else:
                _tag, tid, level, w = image
                target_vid = point_id(tid, level, w)
                vertex_images[vid] = ("vtx", target_vid)
                if target_vid not in vertex_images:
                    new_frontier.append(target_vid)
        if not new_frontier:
            break
        frontier = new_frontier
    else:
        pass
    unresolved = [v for v in list(promoted.values()) if v not in vertex_images]
    if unresolved or any(v not in vertex_images for v in section.vertices):
        status = f"capped({depth_cap})"

    # trace all arcs
    arc_order: list[tuple[str, int]] = []
    for eid in sorted(section.edges):
        pieces = len(cut_points.get(eid, [])) + 1
        arc_order.extend((eid, k) for k in range(pieces))

    def locate(eid: str, w: Fraction) -> tuple[int, bool]:
        """Arc index containing width w on the edge, and whether w is a cut."""
        edge = section.edges[eid]
        bounds = [edge.w_lo] + [c for c, _v in cut_points.get(eid, [])] + [edge.w_hi]
        for k in range(len(bounds) - 1):
            if bounds[k] <= w <= bounds[k + 1]:
                return k, (w == bounds[k] or w == bounds[k + 1])
        raise TorusError("width escapes its edge")

    arc_images: dict[tuple[str, int], list[tuple[tuple[str, int], bool]]] = {}
    start_offsets: dict[tuple[str, int], Optional[Fraction]] = {}
    end_offsets: dict[tuple[str, int], Optional[Fraction]] = {}
    for eid, k in arc_order:
        edge = section.edges[eid]
        bounds = [edge.w_lo] + [c for c, _v in cut_points.get(eid, [])] + [edge.w_hi]
        lo, hi = bounds[k], bounds[k + 1]
        pieces: list[_Piece] = []
        _trace(section, edge.trapezoid, lo, hi, edge.local_level + 1, True, pieces, [200000])
        total = sum((p.hi - p.lo for p in pieces), Fraction(0))
        # width conservation along the traced band, checked in image coords:
        # the pieces tile the image arc, whose width is measured per target
        refined: list[tuple[tuple[str, int], bool, Fraction, Fraction]] = []
        for p in pieces:
            sub_bounds = [section.edges[p.edge].w_lo] + [c for c, _v in cut_points.get(p.edge, [])] + [
                section.edges[p.edge].w_hi
            ]
            covered = [
                (i, max(p.lo, sub_bounds[i]), min(p.hi, sub_bounds[i + 1]))
                for i in range(len(sub_bounds) - 1)
                if max(p.lo, sub_bounds[i]) < min(p.hi, sub_bounds[i + 1])
            ]
            if not p.forward:
                covered.reverse()
            for i, a, b in covered:
                refined.append(((p.edge, i), p.forward, a, b))
        arc_images[(eid, k)] = [(t, f) for (t, f, _a, _b) in refined]
        assert refined, "empty image trace"
        first_arc, first_fwd, fa, fb = refined[0]
        last_arc, last_fwd, la, lb = refined[-1]
        # offsets: None when the piece covers its arc completely
        a_lo, a_hi = _arc_bounds(section, cut_points, first_arc)
        start_offsets[(eid, k)] = None if (fa == a_lo and first_fwd) or (fb == a_hi and not first_fwd) else (
            fa if first_fwd else fb
        )
        b_lo, b_hi = _arc_bounds(section, cut_points, last_arc)
        end_offsets[(eid, k)] = None if (lb == b_hi and last_fwd) or (la == b_lo and not last_fwd) else (
            lb if last_fwd else la
        )
        for t, f, a, b in refined[1:-1]:
            t_lo, t_hi = _arc_bounds(section, cut_points, t)
            if a != t_lo or b != t_hi:
                raise TorusError("an interior image piece does not cover its arc")
    return ReturnMap(
        section,
        status,
        cut_points,
        arc_order,
        arc_images,
        start_offsets,
        end_offsets,
        vertex_images,
    )


def _arc_bounds(section: SectionGraph, cut_points, arc: tuple[str, int]) -> tuple[Fraction, Fraction]:
    eid, k = arc
    edge = section.edges[eid]
    bounds = [edge.w_lo] + [c for c, _v in cut_points.get(eid, [])] + [edge.w_hi]
    return bounds[k], bounds[k + 1]


def crossing_matrix(r: ReturnMap) -> tuple[list[tuple[str, int]], list[list[int]]]:
    """Counts of maximal subarcs of each traced band over each target arc;
    exact transition counts when the return map is a closed graph map."""
    order = r.arc_order
    index = {a: i for i, a in enumerate(order)}
    mat = [[0] * len(order) for _ in order]
    for a in order:
        row = mat[index[a]]
        for target, _fwd in r.arc_images[a]:
            row[index[target]] += 1
    return order, mat


def stretch_factor(r: ReturnMap, tol: Fraction = Fraction(1, 10**7)) -> tuple[Fraction, Fraction]:
    """Certified enclosure of the Perron root of the crossing matrix."""
    _order, mat = crossing_matrix(r)
    return matrices.spectral_radius_bounds(mat, tol)


def induced_graph_map(r: ReturnMap) -> GraphMap:
    """The combinatorial first-return map on the section graph; only defined
    when the vertex set closed up."""
    if not r.closed:
        raise TorusError("return map did not close; no induced graph map")
    section = r.section
    vertices = set(section.vertices) | {v for _k, v in sum(r.cut_points.values(), [])}
    edges = {}
    for arc in r.arc_order:
        o, t = r.arc_ends(arc)
        edges[f"{arc[0]}#{arc[1]}"] = (o, t)
    g = Graph(sorted(vertices), edges)
    vertex_map = {v: img[1] for v, img in r.vertex_images.items()}
    edge_map = {}
    for arc in r.arc_order:
        word = tuple(r.edge_word(arc))
        edge_map[f"{arc[0]}#{arc[1]}"] = EdgePath(word)
    return GraphMap(g, vertex_map, edge_map)


def monodromy_certificates(r: ReturnMap, hyperbolic: bool = False) -> dict:
    """Train-track / cleanliness certification of the induced first-return
    map, available when the vertex orbits closed up."""
    from . import graphmaps

    if not r.closed:
        return {
            "closure_status": r.closure_status,
            "certified": False,
            "reason": "vertex orbits did not close at this depth; "
            "spectral data from the crossing matrix remains valid",
        }
    fz = induced_graph_map(r)
    data = graphmaps.transition_data(fz)
    tt = graphmaps.is_train_track(fz)
    report: dict = {
        "closure_status": r.closure_status,
        "certified": True,
        "regular": fz.is_regular(),
        "expanding": data.expanding,
        "irreducible": data.irreducible,
        "train_track": tt.ok,
        "whitehead_connected": graphmaps.all_whitehead_connected(fz),
    }
    if tt.ok and data.expanding:
        clean = graphmaps.cleanliness(fz, data)
        report["weakly_clean"] = clean.weakly_clean
        report["clean"] = clean.clean
        report["positive_power"] = clean.positive_power
        if hyperbolic and clean.weakly_clean:
            report["fully_irreducible"] = True
        elif hyperbolic:
            report["fully_irreducible"] = False
    return report
