"""The folded mapping torus as a trapezoid 2-complex.

The complex is assembled from the fold sequence: one building block per fold,
each a product of the stage graph with a time interval in which the folded
pair of edges is progressively identified along a moving front.  The front
traces out a skew 1-cell; strips that never fold get a diagonal inserted in
their first rectangle.  Trapezoids are swept out below each skew cell by
following the semiflow downward until the next skew cell.  All of this is
exact rational bookkeeping because the flow fixes positive-edge parameters
inside every building block and the wrap-around identification of the time-1
fiber with the time-0 fiber is affine on every edge.

Key coordinate facts used throughout (all proved by the construction):

* every stage edge carries the length of its label, so folds preserve
  positive-edge parameters and windows never change size inside a wrap;
* orientation flips happen only at the wrap (when an edge of the folded graph
  carries a reversed label) and at a landing whose fold origin sits at the
  far parameter end;
* sweeps therefore compose affine maps, so every trapezoid's flow map from
  its bottom to its top is a single affine bijection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .graphs import Graph, GraphError, is_positive, positive_name
from .folding import FoldSequence, LabeledGraph

__all__ = [
    "OneCell",
    "TrapezoidCell",
    "TrapezoidComplex",
    "TorusError",
    "build_torus",
    "e0_chain",
    "chain_complex",
    "canonical_cocycle",
    "check_cocycle",
    "split_trapezoids",
    "SplitLineage",
]


class TorusError(GraphError):
    pass


@dataclass
class OneCell:
    kind: str  # "skew" or "vertical"
    o: str  # bottom zero-cell (fibration-increasing orientation)
    t: str  # top zero-cell
    z0: Fraction  # fibration span along the cell
    width: Fraction  # geometric parameter length (skew) / time span (vertical)
    degree: int


@dataclass
class TrapezoidCell:
    """A trapezoid 2-cell.

    ``top`` lists the skew cells of the top arc in trapezoid orientation (the
    flow image of the bottom orientation); ``zeta`` is +1 when that agrees
    with the fibration orientation of the top cells.  Side chains run bottom
    to top; a degenerate side is an empty chain.  ``top_breakpoints`` are the
    flow preimages of the top-chain junctions in the bottom parametrization,
    so ``0 = c_0 < ... < c_k = width`` with one entry per top cell boundary.
    """

    bottom: str
    top: tuple[str, ...]
    zeta: int
    left: tuple[str, ...]
    right: tuple[str, ...]
    width: Fraction
    top_breakpoints: tuple[Fraction, ...]
    degenerate_ancestor: bool = False

    def boundary(self) -> dict[str, int]:
        """The cellular boundary chain  bottom + right - zeta*top - left."""
        chain: dict[str, int] = {}

        def add(cell: str, coefficient: int):
            chain[cell] = chain.get(cell, 0) + coefficient
            if chain[cell] == 0:
                del chain[cell]

        add(self.bottom, 1)
        for c in self.right:
            add(c, 1)
        for c in self.top:
            add(c, -self.zeta)
        for c in self.left:
            add(c, -1)
        return chain


class TrapezoidComplex:
    def __init__(
        self,
        zero_cells: dict[str, Fraction],
        one_cells: dict[str, OneCell],
        trapezoids: dict[str, TrapezoidCell],
        provenance: Optional[dict[str, dict]] = None,
    ):
        self.zero_cells = dict(zero_cells)
        self.one_cells = dict(one_cells)
        self.trapezoids = dict(trapezoids)
        self.provenance = provenance or {}
        self._owner: dict[str, str] = {}
        for tid, trap in self.trapezoids.items():
            if trap.bottom in self._owner:
                raise TorusError(f"skew cell {trap.bottom!r} is the bottom of two trapezoids")
            self._owner[trap.bottom] = tid

    def owner(self, skew_cell: str) -> str:
        """The unique trapezoid whose bottom is the given skew cell."""
        return self._owner[skew_cell]

    def skew_cells(self) -> list[str]:
        return sorted(c for c, d in self.one_cells.items() if d.kind == "skew")

    def vertical_cells(self) -> list[str]:
        return sorted(c for c, d in self.one_cells.items() if d.kind == "vertical")

    def euler_characteristic(self) -> int:
        return len(self.zero_cells) - len(self.one_cells) + len(self.trapezoids)

    def counts(self) -> tuple[int, int, int]:
        return len(self.zero_cells), len(self.one_cells), len(self.trapezoids)

    def validate(self) -> list[str]:
        problems = []
        for cid, cell in self.one_cells.items():
            for p in (cell.o, cell.t):
                if p not in self.zero_cells:
                    problems.append(f"1-cell {cid!r} has unknown endpoint {p!r}")
            if cell.z0 <= 0:
                problems.append(f"1-cell {cid!r} has non-positive span")
        for skew in self.skew_cells():
            if skew not in self._owner:
                problems.append(f"skew cell {skew!r} is not the bottom of any trapezoid")
        for tid, trap in self.trapezoids.items():
            for c in (trap.bottom, *trap.top, *trap.left, *trap.right):
                if c not in self.one_cells:
                    problems.append(f"trapezoid {tid!r} uses unknown 1-cell {c!r}")
                    return problems
            if trap.zeta not in (1, -1):
                problems.append(f"trapezoid {tid!r} has bad sign {trap.zeta}")
            bk = trap.top_breakpoints
            if len(bk) != len(trap.top) + 1 or bk[0] != 0 or bk[-1] != trap.width:
                problems.append(f"trapezoid {tid!r} has inconsistent breakpoints")
            elif any(b <= a for a, b in zip(bk, bk[1:])):
                problems.append(f"trapezoid {tid!r} breakpoints not increasing")
            vertex_sum: dict[str, int] = {}
            for cell, coeff in trap.boundary().items():
                d = self.one_cells[cell]
                vertex_sum[d.t] = vertex_sum.get(d.t, 0) + coeff
                vertex_sum[d.o] = vertex_sum.get(d.o, 0) - coeff
            if any(v != 0 for v in vertex_sum.values()):
                problems.append(f"boundary of trapezoid {tid!r} is not a cycle")
        return problems

    def to_json(self) -> str:
        payload = {
            "zero_cells": {p: str(h) for p, h in sorted(self.zero_cells.items())},
            "one_cells": {
                c: {
                    "kind": d.kind,
                    "o": d.o,
                    "t": d.t,
                    "z0": str(d.z0),
                    "width": str(d.width),
                    "degree": d.degree,
                }
                for c, d in sorted(self.one_cells.items())
            },
            "trapezoids": {
                t: {
                    "bottom": d.bottom,
                    "top": list(d.top),
                    "zeta": d.zeta,
                    "left": list(d.left),
                    "right": list(d.right),
                    "width": str(d.width),
                    "top_breakpoints": [str(x) for x in d.top_breakpoints],
                }
                for t, d in sorted(self.trapezoids.items())
            },
            "provenance": {t: self.provenance.get(t, {}) for t in sorted(self.trapezoids)},
            "counts": dict(zip(("zero", "one", "two"), self.counts())),
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    # -- per-trapezoid flow geometry -------------------------------------------

    def top_widths(self, tid: str) -> list[Fraction]:
        trap = self.trapezoids[tid]
        return [self.one_cells[c].width for c in trap.top]

    def flow_image(self, tid: str, c: Fraction) -> tuple[int, Fraction]:
        """Flow a bottom parameter to the top: returns (index i into the
        T-ordered top chain, parameter on that cell in its own positive
        orientation)."""
        trap = self.trapezoids[tid]
        bk = trap.top_breakpoints
        i = None
        for j in range(len(trap.top)):
            if bk[j] <= c <= bk[j + 1]:
                i = j
                if c < bk[j + 1]:
                    break
        assert i is not None
        w = self.one_cells[trap.top[i]].width
        frac = (c - bk[i]) / (bk[i + 1] - bk[i])
        return i, frac * w if trap.zeta == 1 else (1 - frac) * w


def e0_chain(x: TrapezoidComplex) -> dict[str, Fraction]:
    """The 1-chain with coefficient (2 - degree)/2 on every 1-cell; it is a
    cycle, and this check fails loudly if the degree balance breaks."""
    eps = {c: Fraction(2 - d.degree, 2) for c, d in x.one_cells.items() if d.degree != 2}
    boundary: dict[str, Fraction] = {}
    for c, coeff in eps.items():
        d = x.one_cells[c]
        boundary[d.t] = boundary.get(d.t, Fraction(0)) + coeff
        boundary[d.o] = boundary.get(d.o, Fraction(0)) - coeff
    bad = {p: v for p, v in boundary.items() if v != 0}
    if bad:
        raise TorusError(f"degree chain is not a cycle; imbalance at {sorted(bad)}")
    return eps


def chain_complex(x: TrapezoidComplex):
    """Boundary matrices over the integers.

    Returns (vertex_order, edge_order, trap_order, d1, d2) with d1 of shape
    edges x vertices and d2 of shape traps x edges (rows are boundaries).
    """
    vertex_order = sorted(x.zero_cells)
    edge_order = sorted(x.one_cells)
    trap_order = sorted(x.trapezoids)
    vi = {v: i for i, v in enumerate(vertex_order)}
    ei = {e: i for i, e in enumerate(edge_order)}
    d1 = [[0] * len(vertex_order) for _ in edge_order]
    for e, d in x.one_cells.items():
        d1[ei[e]][vi[d.t]] += 1
        d1[ei[e]][vi[d.o]] -= 1
    d2 = [[0] * len(edge_order) for _ in trap_order]
    for r, t in enumerate(trap_order):
        for cell, coeff in x.trapezoids[t].boundary().items():
            d2[r][ei[cell]] += coeff
    return vertex_order, edge_order, trap_order, d1, d2


def canonical_cocycle(x: TrapezoidComplex) -> dict[str, Fraction]:
    """The time-span cocycle: the fibration degree of every 1-cell."""
    z0 = {c: d.z0 for c, d in x.one_cells.items()}
    check_cocycle(x, z0)
    return z0


def check_cocycle(x: TrapezoidComplex, z: dict[str, Fraction]) -> None:
    for tid, trap in x.trapezoids.items():
        total = sum((coeff * z[cell] for cell, coeff in trap.boundary().items()), Fraction(0))
        if total != 0:
            raise TorusError(f"cochain is not a cocycle on trapezoid {tid!r} (value {total})")


# =============================================================================
# construction from a fold sequence
# =============================================================================


class _Geometry:
    """Shared coordinate data for the building blocks of one fold sequence."""

    def __init__(self, m, fs: FoldSequence):
        self.map = m
        self.fs = fs
        self.gamma: Graph = m.domain
        self.delta: LabeledGraph = fs.stages[0]
        self.blocks = fs.block_count
        self.times = fs.times  # block boundaries; length blocks+1
        self.final_stage: LabeledGraph = fs.stages[-1]
        subdivision = getattr(self.delta, "subdivision", None)
        if subdivision is None:
            subdivision = {
                e: tuple(
                    [e]
                    if len(m.edge_map[e].edges) == 1
                    else [f"{e}.{i}" for i in range(1, len(m.edge_map[e].edges) + 1)]
                )
                for e in m.domain.positive_edges
            }
        self.subdivision: dict[str, tuple[str, ...]] = subdivision
        # gamma-edge -> piece boundary positions in the gamma metric (the
        # canonical linear structure: pieces proportional to their lengths)
        self.gamma_breaks: dict[str, list[Fraction]] = {}
        self.piece_of: dict[str, tuple[str, int]] = {}
        for g_edge, piece_names in self.subdivision.items():
            total = sum((self.delta.graph.length(p) for p in piece_names), Fraction(0))
            scale = self.gamma.length(g_edge) / total
            breaks = [Fraction(0)]
            for i, p in enumerate(piece_names):
                breaks.append(breaks[-1] + self.delta.graph.length(p) * scale)
                self.piece_of[p] = (g_edge, i)
            breaks[-1] = self.gamma.length(g_edge)
            self.gamma_breaks[g_edge] = breaks
        self.final_edge_for_gamma: dict[str, str] = {}
        for e in self.final_stage.graph.positive_edges:
            self.final_edge_for_gamma[positive_name(self.final_stage.edge_label[e])] = e
        self.fold_pairs: list[Optional[tuple[str, str]]] = [
            (fs.steps[i].e1, fs.steps[i].e2) if fs.steps else None for i in range(self.blocks)
        ]
        self.skewless: list[str] = self._find_skewless_strips()

    def stage(self, s: int) -> LabeledGraph:
        return self.fs.stages[s if self.fs.steps else 0]

    def _find_skewless_strips(self) -> list[str]:
        has_skew = set()
        current = {d: d for d in self.delta.graph.positive_edges}
        for i in range(self.blocks):
            pair = self.fold_pairs[i]
            if pair is None:
                continue
            folded = {positive_name(pair[0]), positive_name(pair[1])}
            for d, img in current.items():
                if positive_name(img) in folded:
                    has_skew.add(d)
            emap = self.fs.steps[i].edge_map
            current = {d: emap[img] for d, img in current.items()}
        return sorted(set(self.delta.graph.positive_edges) - has_skew)

    def strip_edges_of_fold(self, i: int) -> list[str]:
        current = {d: d for d in self.delta.graph.positive_edges}
        for j in range(i):
            emap = self.fs.steps[j].edge_map
            current = {d: emap[img] for d, img in current.items()}
        pair = self.fold_pairs[i]
        assert pair is not None
        names = {positive_name(pair[0]), positive_name(pair[1])}
        return sorted(d for d, img in current.items() if positive_name(img) in names)

    def merged_edge(self, i: int) -> str:
        step = self.fs.steps[i]
        return step.edge_map[step.e1]  # oriented away from the fold origin

    def wrap_down(self, delta_edge: str, a: Fraction, b: Fraction):
        """Cross the time-0 fiber downward: convert an interval in a
        subdivision edge to final-stage (time 1) edge coordinates via the
        label identification.  Returns (final_edge, lo, hi, flipped)."""
        g_edge, idx = self.piece_of[delta_edge]
        breaks = self.gamma_breaks[g_edge]
        piece_len = self.delta.graph.length(delta_edge)
        scale = (breaks[idx + 1] - breaks[idx]) / piece_len
        lo_g = breaks[idx] + a * scale
        hi_g = breaks[idx] + b * scale
        final_edge = self.final_edge_for_gamma[g_edge]
        label = self.final_stage.edge_label[final_edge]
        if is_positive(label):
            return final_edge, lo_g, hi_g, False
        length = self.gamma.length(g_edge)
        return final_edge, length - hi_g, length - lo_g, True

    def vertex_point(self, stage: int, vertex: str) -> tuple:
        """Canonical id of the point (block boundary time, vertex); time 1
        wraps to the time-0 fiber through the label identification."""
        last = len(self.fs.steps) if self.fs.steps else 1
        if stage >= last:
            return ("pt", Fraction(0), self.final_stage.vertex_label[vertex])
        return ("pt", self.times[stage], vertex)

    def stage_point(self, stage: int, loc: tuple) -> tuple:
        """Canonical instantaneous point at a block boundary time.  ``loc`` is
        ("v", vertex) or ("e", positive_edge, param) in stage coordinates."""
        last = len(self.fs.steps) if self.fs.steps else 1
        if stage >= last:
            final = self.final_stage
            if loc[0] == "v":
                return ("pt", Fraction(0), final.vertex_label[loc[1]])
            edge, x = loc[1], loc[2]
            label = final.edge_label[edge]
            g_edge = positive_name(label)
            pos = x if is_positive(label) else self.gamma.length(g_edge) - x
            breaks = self.gamma_breaks[g_edge]
            pieces = self.subdivision[g_edge]
            if pos == breaks[0]:
                return ("pt", Fraction(0), self.gamma.edge_ends[g_edge][0])
            if pos == breaks[-1]:
                return ("pt", Fraction(0), self.gamma.edge_ends[g_edge][1])
            for i in range(len(pieces)):
                if pos == breaks[i]:
                    return ("pt", Fraction(0), f"{g_edge}:{i}")
                if breaks[i] < pos < breaks[i + 1]:
                    scale = self.delta.graph.length(pieces[i]) / (breaks[i + 1] - breaks[i])
                    return ("epoint", 0, Fraction(0), pieces[i], (pos - breaks[i]) * scale)
            raise AssertionError("position outside the edge")
        t = self.times[stage]
        if loc[0] == "v":
            return ("pt", t, loc[1])
        return ("epoint", stage, t, loc[1], loc[2])


@dataclass
class _SkewInfo:
    sid: str
    width: Fraction
    height_lo: Fraction  # height of the param-0 end
    span: Fraction  # total fibration span
    end_lo: tuple  # zero-cell key at param 0
    end_hi: tuple
    degree: int
    delta_edges: list[str]
    block: int


@dataclass
class _Swept:
    top_skew: str
    sheet: str
    bottom_skew: str
    u: Fraction
    v: Fraction
    zeta: int
    rails: tuple[list, list]  # rails[0] follows the bottom-param-u end, top-down segments


def _sweep(geo: _Geometry, skews: dict[str, _SkewInfo], top_sid: str, sheet: str) -> _Swept:
    """Sweep the region below one side of a skew cell down to the next skew
    cell, recording the side rails.  The window is an interval in a stage
    edge together with the affine map onto the top cell's parametrization."""
    fs = geo.fs
    times = geo.times
    L = fs.total_length
    info_top = skews[top_sid]
    rails: list[list] = [[], []]  # rails[0] follows the current lo end

    if top_sid.startswith("s"):
        block = info_top.block
        step = fs.steps[block]
        stage = geo.stage(block)
        edge = positive_name(sheet)
        length = stage.graph.length(edge)
        if is_positive(sheet):  # fold origin at parameter 0
            aff = (Fraction(1), Fraction(0))
            far_is_hi = True
        else:
            aff = (Fraction(-1), length)
            far_is_hi = False
        far_vertex = stage.graph.terminus(sheet)
        rails[1 if far_is_hi else 0].append((("v", block, far_vertex), times[block], times[block + 1]))
        state_stage = block
    else:
        edge = sheet
        stage = geo.stage(0)
        length = stage.graph.length(edge)
        aff = (Fraction(1), Fraction(0))
        rails[1].append((("v", 0, stage.graph.edge_ends[edge][1]), Fraction(0), times[1]))
        state_stage = 0

    lo, hi = Fraction(0), length
    top_width = info_top.width
    guard = 2 * (geo.blocks + 2) + len(geo.delta.graph.positive_edges) + 8

    def finish(bottom_sid: str, u: Fraction, v: Fraction, slope: Fraction, icept: Fraction) -> _Swept:
        ends = {slope * u + icept, slope * v + icept}
        if ends != {Fraction(0), top_width}:
            raise TorusError(f"sweep from {top_sid!r} did not cover its top cell")
        return _Swept(
            top_skew=top_sid,
            sheet=sheet,
            bottom_skew=bottom_sid,
            u=u,
            v=v,
            zeta=1 if slope > 0 else -1,
            rails=(rails[0], rails[1]),
        )

    for _ in range(guard):
        if state_stage == 0:
            # cross the time-0 fiber downward (the wrap)
            new_edge, new_lo, new_hi, flipped = geo.wrap_down(edge, lo, hi)
            scale = (hi - lo) / (new_hi - new_lo)
            a, b = aff
            if not flipped:
                # old param x = lo + (x_new - new_lo) * scale
                aff = (a * scale, a * (lo - new_lo * scale) + b)
            else:
                # old param x = lo + (new_hi - x_new) * scale
                aff = (-a * scale, a * (lo + new_hi * scale) + b)
                rails = [rails[1], rails[0]]
            edge, lo, hi = new_edge, new_lo, new_hi
            state_stage = geo.blocks

        block = state_stage - 1
        floor_time, ceiling_time = times[block], times[block + 1]
        stage = geo.stage(block)
        pair = geo.fold_pairs[block]

        if pair is not None and positive_name(geo.merged_edge(block)) == edge:
            # land on the fold front of this block
            step = fs.steps[block]
            ell = step.length
            if is_positive(geo.merged_edge(block)):
                d_lo, d_hi = lo, hi
            else:
                d_lo, d_hi = ell - hi, ell - lo
                a, b = aff
                aff = (-a, a * ell + b)
                rails = [rails[1], rails[0]]
            sid = f"s{block}"
            for rail, d_end in ((rails[0], d_lo), (rails[1], d_hi)):
                if d_end == ell:
                    continue  # lands at the ceiling: degenerate (empty) side
                if d_end == 0:
                    key = ("v", block, stage.graph.origin(step.e1))
                    t_land = floor_time
                else:
                    key = ("f", block, d_end)
                    t_land = floor_time + d_end / L
                rail.append((key, t_land, ceiling_time))
            return finish(sid, d_lo, d_hi, *aff)

        if pair is not None:
            emap = fs.steps[block].edge_map
            preimages = [e for e in stage.graph.positive_edges if positive_name(emap[e]) == edge]
            if len(preimages) != 1:
                raise TorusError(f"edge {edge!r} has {len(preimages)} preimages at block {block}")
            edge = preimages[0]

        if block == 0 and f"g|{edge}" in skews:
            # land on the inserted diagonal of a skew-less strip
            sid = f"g|{edge}"
            info = skews[sid]
            for rail, d_end in ((rails[0], lo), (rails[1], hi)):
                if d_end == info.width:
                    continue
                if d_end == 0:
                    key = ("v", 0, stage.graph.edge_ends[edge][0])
                    t_land = Fraction(0)
                else:
                    key = ("e", 0, edge, d_end)
                    t_land = info.span * d_end / info.width
                rail.append((key, t_land, ceiling_time))
            return finish(sid, lo, hi, *aff)

        # descend the full block
        for rail, x in ((rails[0], lo), (rails[1], hi)):
            if x == 0:
                key = ("v", block, stage.graph.edge_ends[edge][0])
            elif x == stage.graph.length(edge):
                key = ("v", block, stage.graph.edge_ends[edge][1])
            else:
                key = ("e", block, edge, x)
            rail.append((key, floor_time, ceiling_time))
        state_stage = block
    raise TorusError("sweep did not land on a skew cell; the fold data is inconsistent")


def build_torus(m, fs: FoldSequence) -> TrapezoidComplex:
    """Assemble the folded mapping torus of a regular tame map from its fold
    sequence, with the trapezoid cell structure."""
    geo = _Geometry(m, fs)
    times = geo.times
    skews: dict[str, _SkewInfo] = {}

    for i in range(geo.blocks):
        pair = geo.fold_pairs[i]
        if pair is None:
            continue
        step = fs.steps[i]
        stage = geo.stage(i)
        merged = geo.merged_edge(i)
        origin = stage.graph.origin(step.e1)
        end_vertex = fs.stages[i + 1].graph.terminus(merged)
        skews[f"s{i}"] = _SkewInfo(
            sid=f"s{i}",
            width=step.length,
            height_lo=times[i],
            span=times[i + 1] - times[i],
            end_lo=geo.vertex_point(i, origin),
            end_hi=geo.vertex_point(i + 1, end_vertex),
            degree=3,
            delta_edges=geo.strip_edges_of_fold(i),
            block=i,
        )
    for d in geo.skewless:
        o, t = geo.delta.graph.edge_ends[d]
        top_vertex = fs.steps[0].vertex_map[t] if fs.steps else t
        skews[f"g|{d}"] = _SkewInfo(
            sid=f"g|{d}",
            width=geo.delta.graph.length(d),
            height_lo=Fraction(0),
            span=times[1],
            end_lo=geo.vertex_point(0, o),
            end_hi=geo.vertex_point(1, top_vertex),
            degree=2,
            delta_edges=[d],
            block=0,
        )

    swept: list[_Swept] = []
    for sid in sorted(skews):
        if sid.startswith("s"):
            step = fs.steps[skews[sid].block]
            for oriented in (step.e1, step.e2):
                swept.append(_sweep(geo, skews, sid, oriented))
        else:
            swept.append(_sweep(geo, skews, sid, sid.split("|", 1)[1]))

    # -- cut skew cells by the landing intervals -------------------------------
    cuts: dict[str, set[Fraction]] = {sid: set() for sid in skews}
    for tr in swept:
        cuts[tr.bottom_skew].update((tr.u, tr.v))
    pieces: dict[str, list[tuple[Fraction, Fraction]]] = {}
    piece_ids: dict[tuple[str, Fraction], str] = {}
    for sid in sorted(skews):
        info = skews[sid]
        params = sorted(cuts[sid] | {Fraction(0), info.width})
        if params[0] < 0 or params[-1] > info.width:
            raise TorusError(f"landing intervals leave skew cell {sid!r}")
        intervals = list(zip(params, params[1:]))
        pieces[sid] = intervals
        for k, (a, _b) in enumerate(intervals):
            piece_ids[(sid, a)] = sid if len(intervals) == 1 else f"{sid}[{k}]"
    landings: dict[str, list[tuple[Fraction, Fraction]]] = {sid: [] for sid in skews}
    for tr in swept:
        landings[tr.bottom_skew].append((tr.u, tr.v))
    for sid in skews:
        if sorted(landings[sid]) != pieces[sid]:
            raise TorusError(f"trapezoid bottoms do not tile skew cell {sid!r}")

    # -- zero cells -------------------------------------------------------------
    def param_point(sid: str, p: Fraction) -> tuple:
        info = skews[sid]
        if p == 0:
            return info.end_lo
        if p == info.width:
            return info.end_hi
        return ("skewpt", sid, p)

    zero_keys: set[tuple] = set()
    for sid, info in skews.items():
        zero_keys.add(info.end_lo)
        zero_keys.add(info.end_hi)
        for a, _b in pieces[sid][1:]:
            zero_keys.add(param_point(sid, a))

    def zero_sort_key(k: tuple):
        if k[0] == "pt":
            return (0, str(k[2]), k[1], Fraction(0))
        return (1, k[1], Fraction(0), k[2])

    zero_ids = {k: f"P{n}" for n, k in enumerate(sorted(zero_keys, key=zero_sort_key))}

    def zero_height(k: tuple) -> Fraction:
        if k[0] == "pt":
            return k[1] % 1
        sid, p = k[1], k[2]
        info = skews[sid]
        return (info.height_lo + info.span * p / info.width) % 1

    zero_cells = {zero_ids[k]: zero_height(k) for k in zero_keys}

    one_cells: dict[str, OneCell] = {}
    for sid, info in skews.items():
        slope = info.span / info.width
        for a, b in pieces[sid]:
            one_cells[piece_ids[(sid, a)]] = OneCell(
                kind="skew",
                o=zero_ids[param_point(sid, a)],
                t=zero_ids[param_point(sid, b)],
                z0=slope * (b - a),
                width=b - a,
                degree=info.degree,
            )

    verticals, side_chains = _assemble_verticals(geo, skews, swept, zero_ids, zero_keys)
    one_cells.update(verticals)

    trapezoids: dict[str, TrapezoidCell] = {}
    provenance: dict[str, dict] = {}
    order = sorted(range(len(swept)), key=lambda j: (swept[j].top_skew, swept[j].sheet))
    for n, j in enumerate(order):
        t = swept[j]
        tid = f"T{n}"
        top_pieces = pieces[t.top_skew] if t.zeta == 1 else list(reversed(pieces[t.top_skew]))
        top_chain = tuple(piece_ids[(t.top_skew, a)] for a, _b in top_pieces)
        scale = (t.v - t.u) / skews[t.top_skew].width
        bks = [Fraction(0)]
        for a, b in top_pieces:
            bks.append(bks[-1] + (b - a) * scale)
        bks[-1] = t.v - t.u
        left_chain = side_chains[(j, 0)]
        right_chain = side_chains[(j, 1)]
        trapezoids[tid] = TrapezoidCell(
            bottom=piece_ids[(t.bottom_skew, t.u)],
            top=top_chain,
            zeta=t.zeta,
            left=left_chain,
            right=right_chain,
            width=t.v - t.u,
            top_breakpoints=tuple(bks),
            degenerate_ancestor=not left_chain or not right_chain,
        )
        info = skews[t.top_skew]
        provenance[tid] = {
            "top_cell": t.top_skew,
            "sheet": t.sheet,
            "delta_edges": info.delta_edges,
            "time_window": [str(info.height_lo), str(info.height_lo + info.span)],
        }

    complex_ = TrapezoidComplex(zero_cells, one_cells, trapezoids, provenance)
    problems = complex_.validate()
    if problems:
        raise TorusError("inconsistent torus: " + "; ".join(problems))
    if complex_.euler_characteristic() != 0:
        raise TorusError(f"mapping torus has Euler characteristic {complex_.euler_characteristic()} != 0")
    e0_chain(complex_)
    canonical_cocycle(complex_)
    return complex_


def _assemble_verticals(geo: _Geometry, skews, swept: list[_Swept], zero_ids, zero_keys):
    """Cut the recorded side rails at zero cells, dedupe atomic pieces, stitch
    across building-block boundaries, and return the vertical one-cells and
    every trapezoid's bottom-to-top side chains."""
    fs = geo.fs
    times = geo.times
    L = fs.total_length

    def instant(key: tuple, t: Fraction) -> tuple:
        """Canonical instantaneous point of a spatial line at time t."""
        kind, block = key[0], key[1]
        floor_t, ceiling_t = times[block], times[block + 1]
        if kind == "f":
            d = key[2]
            if t == floor_t + d / L:
                return ("skewpt", f"s{block}", d)
            if t == ceiling_t:
                merged = geo.merged_edge(block)
                ell = fs.steps[block].length
                x = d if is_positive(merged) else ell - d
                return geo.stage_point(block + 1, ("e", positive_name(merged), x))
            return ("mid", key, t)
        if kind == "e":
            edge, x = key[2], key[3]
            if block == 0 and f"g|{edge}" in skews:
                info = skews[f"g|{edge}"]
                if t == info.span * x / info.width:
                    return ("skewpt", f"g|{edge}", x)
            if t == floor_t:
                return geo.stage_point(block, ("e", edge, x))
            if t == ceiling_t:
                new_edge = positive_name(fs.steps[block].edge_map[edge]) if fs.steps else edge
                return geo.stage_point(block + 1, ("e", new_edge, x))
            return ("mid", key, t)
        vertex = key[2]
        if t == floor_t:
            return geo.stage_point(block, ("v", vertex))
        if t == ceiling_t:
            new_vertex = fs.steps[block].vertex_map[vertex] if fs.steps else vertex
            return geo.stage_point(block + 1, ("v", new_vertex))
        return ("mid", key, t)

    zero_instants: dict[tuple, tuple] = {k: k for k in zero_keys}

    all_segments: list[tuple[tuple, Fraction, Fraction, int, int, int]] = []
    for j, tr in enumerate(swept):
        for side in (0, 1):
            for k, (key, t_lo, t_hi) in enumerate(tr.rails[side]):
                if t_lo != t_hi:
                    all_segments.append((key, t_lo, t_hi, j, side, k))

    atoms: dict[tuple, tuple] = {}
    segment_atoms: dict[tuple[int, int, int], list[tuple]] = {}
    for key, t_lo, t_hi, j, side, k in all_segments:
        atom = (key, t_lo, t_hi)
        if atom not in atoms:
            atoms[atom] = (instant(key, t_lo), instant(key, t_hi))
        segment_atoms[(j, side, k)] = [atom]

    parent: dict[tuple, tuple] = {a: a for a in atoms}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    start_at: dict[tuple, list[tuple]] = {}
    end_at: dict[tuple, list[tuple]] = {}
    for atom, (bot, top) in atoms.items():
        start_at.setdefault(bot, []).append(atom)
        end_at.setdefault(top, []).append(atom)
    for inst, starters in start_at.items():
        if inst in zero_instants:
            continue
        enders = end_at.get(inst, [])
        if len(starters) > 1 or len(enders) > 1:
            raise TorusError(f"flow lines branch at a non-cell point {inst!r}")
        for e in enders:
            union(starters[0], e)

    groups: dict[tuple, list[tuple]] = {}
    for atom in atoms:
        groups.setdefault(find(atom), []).append(atom)

    group_items = []
    for members in groups.values():
        bots = {atoms[a][0] for a in members}
        tops = {atoms[a][1] for a in members}
        bottom_inst = bots - tops
        top_inst = tops - bots
        if len(bottom_inst) != 1 or len(top_inst) != 1:
            raise TorusError("vertical cell assembly produced a non-arc")
        b_inst, t_inst = bottom_inst.pop(), top_inst.pop()
        if b_inst not in zero_instants or t_inst not in zero_instants:
            raise TorusError(f"vertical cell does not end at zero cells: {b_inst!r} / {t_inst!r}")
        span = sum((b - a for (_k, a, b) in members), Fraction(0))
        group_items.append((zero_ids[b_inst], zero_ids[t_inst], sorted(members, key=repr), span))
    group_items.sort(key=lambda g: (g[0], g[1], repr(g[2])))

    cell_of_atom: dict[tuple, str] = {}
    cells: dict[str, OneCell] = {}
    for n, (bk, tk, members, span) in enumerate(group_items):
        vid = f"v{n}"
        cells[vid] = OneCell(kind="vertical", o=bk, t=tk, z0=span, width=span, degree=0)
        for a in members:
            cell_of_atom[a] = vid

    side_chains: dict[tuple[int, int], tuple[str, ...]] = {}
    for j, tr in enumerate(swept):
        for side in (0, 1):
            chain: list[str] = []
            segs = tr.rails[side]
            for k in range(len(segs) - 1, -1, -1):  # recorded top-down; emit bottom-up
                if segs[k][1] == segs[k][2]:
                    continue
                for atom in segment_atoms[(j, side, k)]:
                    cid = cell_of_atom[atom]
                    if not chain or chain[-1] != cid:
                        chain.append(cid)
            side_chains[(j, side)] = tuple(chain)
    for chain in side_chains.values():
        for cid in chain:
            cells[cid].degree += 1
    return cells, side_chains


# =============================================================================
# trapezoidal subdivision surgery
# =============================================================================


@dataclass
class SplitLineage:
    """Bookkeeping of one subdivision round, used to refine cocycles."""

    # new skew piece -> (parent cell, index along the parent, (lo, hi) params)
    skew_pieces: dict[str, tuple[str, int, tuple[Fraction, Fraction]]] = field(default_factory=dict)
    # trapezoid -> children in trapezoid order (a single child means "kept")
    children: dict[str, list[str]] = field(default_factory=dict)
    # new vertical -> (parent trapezoid, boundary index i, between children i-1 and i)
    new_verticals: dict[str, tuple[str, int]] = field(default_factory=dict)


def split_trapezoids(
    x: TrapezoidComplex,
    splits: dict[str, list[Fraction]],
) -> tuple[TrapezoidComplex, SplitLineage]:
    """Split trapezoids along flow lines at the given bottom parameters.

    Every skew cell inherits the cuts of the trapezoid that owns it as a
    bottom, so the result is again a trapezoidal cell structure.  The split
    parameters must flow onto top-chain junctions or onto cuts of the top
    cells (the standard subdivision and the invariant-band splitting both
    satisfy this; anything else is an error).
    """
    lineage = SplitLineage()
    z0 = {c: d.z0 for c, d in x.one_cells.items()}

    cut_params: dict[str, list[Fraction]] = {}
    for sid in x.skew_cells():
        tid = x.owner(sid)
        ps = sorted(set(splits.get(tid, ())))
        trap = x.trapezoids[tid]
        for p in ps:
            if not (0 < p < trap.width):
                raise TorusError(f"split parameter {p} outside trapezoid {tid!r}")
        cut_params[sid] = ps

    # new zero cells at the cuts
    new_zero = dict(x.zero_cells)
    cut_cell_ids: dict[tuple[str, Fraction], str] = {}
    for sid, ps in cut_params.items():
        cell = x.one_cells[sid]
        for k, p in enumerate(ps):
            pid = f"{sid}@{k + 1}"
            assert pid not in new_zero
            new_zero[pid] = (x.zero_cells[cell.o] + cell.z0 * p / cell.width) % 1
            cut_cell_ids[(sid, p)] = pid

    # pieces of every skew cell
    new_one: dict[str, OneCell] = {}
    piece_table: dict[str, list[tuple[Fraction, Fraction, str]]] = {}
    for cid, cell in x.one_cells.items():
        if cell.kind != "skew" or not cut_params.get(cid):
            new_one[cid] = OneCell(cell.kind, cell.o, cell.t, cell.z0, cell.width, cell.degree)
            if cell.kind == "skew":
                piece_table[cid] = [(Fraction(0), cell.width, cid)]
            continue
        bounds = [Fraction(0)] + cut_params[cid] + [cell.width]
        entries = []
        for k, (a, b) in enumerate(zip(bounds, bounds[1:])):
            pid = f"{cid}[{k}]"
            o = cell.o if a == 0 else cut_cell_ids[(cid, a)]
            t = cell.t if b == cell.width else cut_cell_ids[(cid, b)]
            new_one[pid] = OneCell("skew", o, t, cell.z0 * (b - a) / cell.width, b - a, cell.degree)
            entries.append((a, b, pid))
            lineage.skew_pieces[pid] = (cid, k, (a, b))
        piece_table[cid] = entries

    def junction_cell_id(sid: str, p: Fraction) -> str:
        cell = x.one_cells[sid]
        if p == 0:
            return cell.o
        if p == cell.width:
            return cell.t
        return cut_cell_ids[(sid, p)]

    new_traps: dict[str, TrapezoidCell] = {}
    new_prov: dict[str, dict] = {}
    for tid in sorted(x.trapezoids):
        trap = x.trapezoids[tid]
        ps = sorted(set(splits.get(tid, ())))
        bounds = [Fraction(0)] + ps + [trap.width]
        # refined top description in trapezoid order: (bottom param range,
        # top cell piece id, piece boundary zero cells)
        refined: list[tuple[Fraction, Fraction, str]] = []
        bk = trap.top_breakpoints
        for i, top_cell in enumerate(trap.top):
            lo_b, hi_b = bk[i], bk[i + 1]
            entries = piece_table[top_cell]
            ordered = entries if trap.zeta == 1 else list(reversed(entries))
            w = x.one_cells[top_cell].width
            for a, b, pid in ordered:
                # params of this piece in trapezoid-order fractions of the cell
                if trap.zeta == 1:
                    f0, f1 = a / w, b / w
                else:
                    f0, f1 = 1 - b / w, 1 - a / w
                refined.append((lo_b + f0 * (hi_b - lo_b), lo_b + f1 * (hi_b - lo_b), pid))
        refined_bounds = [r[0] for r in refined] + [trap.width]
        for p in ps:
            if p not in refined_bounds:
                raise TorusError(
                    f"split of {tid!r} at {p} does not flow onto a top junction or cut"
                )
        children: list[str] = []
        for ci, (a, b) in enumerate(zip(bounds, bounds[1:])):
            child_id = tid if len(bounds) == 2 else f"{tid}|{ci}"
            sub = [r for r in refined if a <= r[0] and r[1] <= b]
            if not sub or sub[0][0] != a or sub[-1][1] != b:
                raise TorusError(f"refined top of {tid!r} does not tile child {child_id!r}")
            bottom_entries = piece_table[trap.bottom]
            bottom_piece = next(pid for (pa, pb, pid) in bottom_entries if pa == a and pb == b)
            if ci == 0:
                left: tuple[str, ...] = trap.left
            else:
                left = (f"{tid}|b{ci}",)
            if ci == len(bounds) - 2:
                right: tuple[str, ...] = trap.right
            else:
                right = (f"{tid}|b{ci + 1}",)
            new_traps[child_id] = TrapezoidCell(
                bottom=bottom_piece,
                top=tuple(pid for (_a, _b, pid) in sub),
                zeta=trap.zeta,
                left=left,
                right=right,
                width=b - a,
                top_breakpoints=tuple([r[0] - a for r in sub] + [b - a]),
                degenerate_ancestor=trap.degenerate_ancestor,
            )
            new_prov[child_id] = dict(x.provenance.get(tid, {}))
            children.append(child_id)
        lineage.children[tid] = children
        # new vertical cells between consecutive children
        if ps:
            # local fibration profile of the trapezoid relative to its base corner
            def bottom_height(c: Fraction) -> Fraction:
                return z0[trap.bottom] * c / trap.width

            def top_height(c: Fraction) -> Fraction:
                h = sum((z0[v] for v in trap.left), Fraction(0))
                for i, top_cell in enumerate(trap.top):
                    lo_b, hi_b = bk[i], bk[i + 1]
                    if c >= hi_b and i < len(trap.top) - 1:
                        h += trap.zeta * z0[top_cell]
                        continue
                    frac = (c - lo_b) / (hi_b - lo_b)
                    h += trap.zeta * z0[top_cell] * frac
                    break
                return h

            for bi, p in enumerate(ps, start=1):
                vid = f"{tid}|b{bi}"
                i, q = x.flow_image(tid, p)
                top_anchor = junction_cell_id(trap.top[i], q)
                bottom_anchor = cut_cell_ids[(trap.bottom, p)]
                span = top_height(p) - bottom_height(p)
                if span <= 0:
                    raise TorusError(f"split of {tid!r} at {p} has non-positive flow span")
                assert vid not in new_one
                new_one[vid] = OneCell("vertical", bottom_anchor, top_anchor, span, span, 2)
                lineage.new_verticals[vid] = (tid, bi)

    result = TrapezoidComplex(new_zero, new_one, new_traps, new_prov)
    problems = result.validate()
    if problems:
        raise TorusError("inconsistent subdivision: " + "; ".join(problems))
    return result, lineage
