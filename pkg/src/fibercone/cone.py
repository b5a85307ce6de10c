"""Rational cohomology of the trapezoid complex, the cone of classes with
positive representatives, and the subdivision / refinement pipeline that
makes every trapezoid unconstrained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from . import lp, matrices
from .torus import (
    SplitLineage,
    TorusError,
    TrapezoidComplex,
    chain_complex,
    check_cocycle,
    e0_chain,
    split_trapezoids,
)

__all__ = [
    "ConeBasis",
    "CohomologyClass",
    "ConeVerdict",
    "SubdivisionState",
    "CapExceeded",
    "h1_basis",
    "cone_contains",
    "pair_with_e0",
    "detect_invariant_bands",
    "standard_subdivide",
    "make_unconstrained",
]


class CapExceeded(RuntimeError):
    """An iteration cap was hit; this signals a bug or an absurd input, not a
    mathematical failure."""


def _int_inverse(u: list[list[int]]) -> list[list[int]]:
    n = len(u)
    aug = [[Fraction(x) for x in row] + [Fraction(1 if i == j else 0) for j in range(n)] for i, row in enumerate(u)]
    r, pivots = matrices.rref(aug)
    assert pivots == list(range(n)), "matrix is not invertible"
    inv = [[r[i][n + j] for j in range(n)] for i in range(n)]
    assert all(x.denominator == 1 for row in inv for x in row), "matrix is not unimodular"
    return [[int(x) for x in row] for row in inv]


@dataclass
class ConeBasis:
    """A rational basis of H^1 of the complex, dual to an integral basis of
    the free part of H_1, so that class coordinates are the pairings with the
    chosen integral cycles.  Integrality and primitivity are decidable on the
    coordinates directly."""

    complex: TrapezoidComplex
    edge_order: list[str]
    cycles: list[dict[str, int]]  # integral 1-cycles spanning the free part of H_1
    cocycles: list[dict[str, Fraction]]  # dual basis of H^1
    torsion: list[int]
    e0_pairings: list[Fraction]

    @property
    def dim(self) -> int:
        return len(self.cycles)

    def class_of_cochain(self, z: Mapping[str, Fraction]) -> "CohomologyClass":
        check_cocycle(self.complex, {e: Fraction(z.get(e, 0)) for e in self.edge_order})
        coords = tuple(
            sum((Fraction(z.get(e, 0)) * c for e, c in cycle.items()), Fraction(0))
            for cycle in self.cycles
        )
        return CohomologyClass(coords, self)

    def class_of_coords(self, coords: Sequence[Fraction | int | str]) -> "CohomologyClass":
        if len(coords) != self.dim:
            raise ValueError(f"expected {self.dim} coordinates")
        return CohomologyClass(tuple(Fraction(c) for c in coords), self)

    def representative(self, u: "CohomologyClass") -> dict[str, Fraction]:
        rep = {e: Fraction(0) for e in self.edge_order}
        for c, zeta in zip(u.coords, self.cocycles):
            if c:
                for e, v in zeta.items():
                    rep[e] += c * v
        return rep


@dataclass(frozen=True)
class CohomologyClass:
    coords: tuple[Fraction, ...]
    basis: ConeBasis

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for c in self.coords)

    def is_primitive(self) -> bool:
        if not self.is_integral() or all(c == 0 for c in self.coords):
            return False
        return math.gcd(*(abs(int(c)) for c in self.coords)) == 1

    def __add__(self, other: "CohomologyClass") -> "CohomologyClass":
        assert other.basis is self.basis
        return CohomologyClass(tuple(a + b for a, b in zip(self.coords, other.coords)), self.basis)

    def scale(self, q: Fraction | int) -> "CohomologyClass":
        q = Fraction(q)
        return CohomologyClass(tuple(q * c for c in self.coords), self.basis)

    def pair_e0(self) -> Fraction:
        return sum((c * p for c, p in zip(self.coords, self.basis.e0_pairings)), Fraction(0))


def h1_basis(x: TrapezoidComplex) -> ConeBasis:
    """H^1 over the rationals with integral lattice data.

    The integral cycles come from the Smith normal form of the boundary map
    expressed in a basis of the integer cycle lattice; the basis cocycles are
    chosen dual to them, so primitivity of a class is gcd of coordinates.
    """
    vertex_order, edge_order, trap_order, d1, d2 = chain_complex(x)
    ne = len(edge_order)
    # integer kernel lattice of the boundary map (cycles)
    d1t = [[d1[e][v] for e in range(ne)] for v in range(len(vertex_order))]
    dD, uU, vV = matrices.smith_normal_form([row[:] for row in d1t])
    rank = sum(1 for i in range(min(len(dD), len(dD[0]) if dD else 0)) if dD[i][i] != 0)
    kernel_cols = [[vV[e][j] for e in range(ne)] for j in range(rank, ne)]
    k = len(kernel_cols)
    # boundaries of 2-cells in kernel coordinates
    kmatrix = [[Fraction(kernel_cols[j][e]) for j in range(k)] for e in range(ne)]
    coeffs = []
    for row in d2:
        sol = matrices.solve(kmatrix, [Fraction(v) for v in row])
        assert sol is not None, "a 2-cell boundary is not a cycle"
        assert all(s.denominator == 1 for s in sol)
        coeffs.append([int(s) for s in sol])
    c_matrix = [[coeffs[t][j] for t in range(len(trap_order))] for j in range(k)] if coeffs else [[0] for _ in range(k)]
    dC, uC, _vC = matrices.smith_normal_form([row[:] for row in c_matrix])
    r2 = sum(1 for i in range(min(len(dC), len(dC[0]) if dC else 0)) if dC[i][i] != 0)
    torsion = [dC[i][i] for i in range(r2) if abs(dC[i][i]) > 1]
    u_inv = _int_inverse(uC)
    free_gens = []
    for j in range(r2, k):
        cycle_vec = [sum(kernel_cols[l][e] * u_inv[l][j] for l in range(k)) for e in range(ne)]
        free_gens.append({edge_order[e]: cycle_vec[e] for e in range(ne) if cycle_vec[e]})
    b1 = len(free_gens)
    # rational cocycles: kernel of delta1 = d2 (as a map on cochains)
    z1 = matrices.nullspace([[Fraction(v) for v in row] for row in d2]) if trap_order else [
        [Fraction(1 if i == j else 0) for i in range(ne)] for j in range(ne)
    ]
    pairing = [
        [
            sum((Fraction(gen.get(edge_order[e], 0)) * z1[l][e] for e in range(ne)), Fraction(0))
            for l in range(len(z1))
        ]
        for gen in free_gens
    ]
    cocycles = []
    for j in range(b1):
        w = matrices.solve(pairing, [Fraction(1 if i == j else 0) for i in range(b1)])
        assert w is not None, "homology/cohomology pairing is degenerate"
        zeta = {}
        for l, coeff in enumerate(w):
            if coeff:
                for e in range(ne):
                    if z1[l][e]:
                        zeta[edge_order[e]] = zeta.get(edge_order[e], Fraction(0)) + coeff * z1[l][e]
        cocycles.append({e: v for e, v in zeta.items() if v})
    eps = e0_chain(x)
    e0_pairings = [
        sum((v * eps.get(e, Fraction(0)) for e, v in zeta.items()), Fraction(0)) for zeta in cocycles
    ]
    basis = ConeBasis(x, edge_order, free_gens, cocycles, torsion, e0_pairings)
    for j, gen in enumerate(free_gens):  # dual-basis sanity
        coords = basis.class_of_cochain(cocycles[j]).coords
        assert [int(c) for c in coords] == [1 if i == j else 0 for i in range(b1)]
    return basis


def pair_with_e0(u: CohomologyClass) -> Fraction:
    """u(epsilon): well defined on classes because the degree chain is a cycle."""
    return u.pair_e0()


@dataclass
class ConeVerdict:
    inside: bool
    optimum: Fraction
    witness: Optional[dict[str, Fraction]]  # positive cocycle when inside
    certificate: Optional[dict[str, int]]  # nonnegative integral cycle with pairing <= 0

    def __bool__(self):
        return self.inside


def cone_contains(basis: ConeBasis, u: CohomologyClass | Mapping[str, Fraction]) -> ConeVerdict:
    """Decide whether a class has a positive representative.

    Maximizes the minimum slack of ``z + delta0(c)`` over 0-cochains ``c`` by
    an exact simplex.  Inside iff the optimum is positive, with the witness
    cocycle returned; otherwise the optimal dual is a nonnegative integral
    cycle pairing non-positively with the class, which certifies exclusion.
    """
    x = basis.complex
    if isinstance(u, CohomologyClass):
        z = basis.representative(u)
    else:
        z = {e: Fraction(u.get(e, 0)) for e in basis.edge_order}
        check_cocycle(x, z)
    vertices = sorted(x.zero_cells)
    vi = {v: i for i, v in enumerate(vertices)}
    edges = basis.edge_order
    nvar = 2 + 2 * len(vertices)  # t+, t-, then c_v+, c_v-
    rows = []
    rhs = []
    for e in edges:
        cell = x.one_cells[e]
        row = [Fraction(0)] * nvar
        row[0], row[1] = Fraction(1), Fraction(-1)
        for v, sign in ((cell.t, -1), (cell.o, 1)):
            row[2 + 2 * vi[v]] += sign
            row[2 + 2 * vi[v] + 1] -= sign
        rows.append(row)
        rhs.append(z[e])
    result = lp.solve_max([Fraction(1), Fraction(-1)] + [Fraction(0)] * (2 * len(vertices)), rows, rhs)
    if result.status != "optimal":
        raise TorusError("slack LP is unbounded; the complex has no positive closed orbit")
    t_opt = result.value
    if t_opt > 0:
        c = {
            v: result.x[2 + 2 * i] - result.x[2 + 2 * i + 1] for v, i in vi.items()
        }
        witness = {}
        for e in edges:
            cell = x.one_cells[e]
            witness[e] = z[e] + c[cell.t] - c[cell.o]
            assert witness[e] >= t_opt
        check_cocycle(x, witness)
        return ConeVerdict(True, t_opt, witness, None)
    duals = result.duals
    assert duals is not None
    total = sum(duals, Fraction(0))
    assert total == 1, "dual certificate is not normalized"
    conservation: dict[str, Fraction] = {v: Fraction(0) for v in vertices}
    for e, y in zip(edges, duals):
        cell = x.one_cells[e]
        conservation[cell.t] += y
        conservation[cell.o] -= y
    assert all(v == 0 for v in conservation.values()), "dual certificate is not a cycle"
    pairing = sum((y * z[e] for e, y in zip(edges, duals)), Fraction(0))
    assert pairing == t_opt <= 0
    scale = 1
    for y in duals:
        scale = scale * y.denominator // math.gcd(scale, y.denominator)
    certificate = {e: int(y * scale) for e, y in zip(edges, duals) if y}
    return ConeVerdict(False, t_opt, None, certificate)


# =============================================================================
# invariant bands
# =============================================================================


@dataclass
class Band:
    trapezoids: list[str]
    orbit: dict[str, Fraction]  # bottom-cell parameter of the closed orbit per trapezoid


def _affine_fixed_point(p: Fraction, q: Fraction, lo: Fraction, hi: Fraction) -> Fraction:
    """Fixed point of x -> p x + q as a self-map of [lo, hi]; the identity
    returns the midpoint by convention."""
    if p == 1:
        if q != 0:
            raise TorusError("affine return map of a band has no fixed point")
        return (lo + hi) / 2
    x = q / (1 - p)
    if not (lo <= x <= hi):
        raise TorusError("affine fixed point escapes the band")
    return x


def detect_invariant_bands(x: TrapezoidComplex) -> list[Band]:
    """Maximal periodic chains of trapezoids whose tops are single skew cells,
    with the closed flow orbit located exactly."""
    succ: dict[str, str] = {}
    for tid, trap in x.trapezoids.items():
        if len(trap.top) == 1:
            succ[tid] = x.owner(trap.top[0])
    bands = []
    seen: set[str] = set()
    for start in sorted(succ):
        if start in seen:
            continue
        path = []
        pos = {}
        cur = start
        while cur in succ and cur not in pos:
            pos[cur] = len(path)
            path.append(cur)
            cur = succ[cur]
        if cur in pos:
            cycle = path[pos[cur]:]
            seen.update(path)
            if any(t in seen and t in (b for band in bands for b in band.trapezoids) for t in cycle):
                continue
            # affine return map on the first trapezoid's bottom
            p, q = Fraction(1), Fraction(0)
            for tid in cycle:
                trap = x.trapezoids[tid]
                w_top = x.one_cells[trap.top[0]].width
                slope = Fraction(trap.zeta) * w_top / trap.width
                icept = Fraction(0) if trap.zeta == 1 else w_top
                p, q = slope * p, slope * q + icept
            w0 = x.trapezoids[cycle[0]].width
            x0 = _affine_fixed_point(p, q, Fraction(0), w0)
            orbit = {}
            cur_param = x0
            for tid in cycle:
                orbit[tid] = cur_param
                trap = x.trapezoids[tid]
                _i, cur_param = x.flow_image(tid, cur_param)
            bands.append(Band(cycle, orbit))
        else:
            seen.update(path)
    return bands


# =============================================================================
# the subdivision pipeline
# =============================================================================


@dataclass
class SubdivisionState:
    complex: TrapezoidComplex
    z: dict[str, Fraction]
    rounds: int = 0
    history: list[dict] = field(default_factory=list)
    exempt_verticals: set[str] = field(default_factory=set)

    @property
    def skew_max(self) -> Fraction:
        return max(self.z[c] for c in self.complex.skew_cells())

    @property
    def max_ratio(self) -> Fraction:
        return max_ratio(self.complex, self.z)


def top_chain_value(x: TrapezoidComplex, z: Mapping[str, Fraction], tid: str) -> Fraction:
    trap = x.trapezoids[tid]
    return Fraction(trap.zeta) * sum((z[c] for c in trap.top), Fraction(0))


def side_value(x: TrapezoidComplex, z: Mapping[str, Fraction], cells: Iterable[str]) -> Fraction:
    return sum((z[c] for c in cells), Fraction(0))


def is_unconstrained(x: TrapezoidComplex, z: Mapping[str, Fraction], tid: str) -> bool:
    trap = x.trapezoids[tid]
    left = side_value(x, z, trap.left)
    top = top_chain_value(x, z, tid)
    bottom = z[trap.bottom]
    return max(Fraction(0), bottom) <= min(left, left + top)


def max_ratio(x: TrapezoidComplex, z: Mapping[str, Fraction]) -> Fraction:
    """rho(Y, z): the largest proportion of a single top cell in its
    trapezoid's top chain, with single-cell tops contributing zero."""
    best = Fraction(0)
    for tid, trap in x.trapezoids.items():
        if len(trap.top) == 1:
            continue
        total = sum((z[c] for c in trap.top), Fraction(0))
        best = max(best, max(z[c] for c in trap.top) / total)
    return best


def standard_subdivide(state: SubdivisionState) -> SubdivisionState:
    """One round: split invariant bands along their closed orbits with the
    half-splitting values, then subdivide every trapezoid at the flow
    preimages of its top-chain junctions with the skew-ratio refinement."""
    x, z = state.complex, state.z
    if any(z[c] <= 0 for c in x.one_cells):
        raise TorusError("standard subdivision needs a positive cocycle")
    exempt = set(state.exempt_verticals)

    bands = detect_invariant_bands(x)
    if bands:
        splits = {tid: [band.orbit[tid]] for band in bands for tid in band.trapezoids}
        x2, lineage = split_trapezoids(x, splits)
        z2: dict[str, Fraction] = {}
        for cid in x2.one_cells:
            if cid in z:
                z2[cid] = z[cid]
            elif cid in lineage.skew_pieces:
                parent, _k, _ab = lineage.skew_pieces[cid]
                z2[cid] = z[parent] / 2
            else:
                tid, _bi = lineage.new_verticals[cid]
                trap = x.trapezoids[tid]
                z2[cid] = (side_value(x, z, trap.left) + side_value(x, z, trap.right)) / 2
                if trap.degenerate_ancestor:
                    exempt.add(cid)
        check_cocycle(x2, z2)
        x, z = x2, z2

    splits = {
        tid: list(trap.top_breakpoints[1:-1])
        for tid, trap in x.trapezoids.items()
        if len(trap.top) > 1
    }
    old_rho = max_ratio(x, z)
    x3, lineage = split_trapezoids(x, splits)
    rho = {}
    for tid, trap in x.trapezoids.items():
        total = sum((z[c] for c in trap.top), Fraction(0))
        rho[tid] = [z[c] / total for c in trap.top]
    z3: dict[str, Fraction] = {}
    for cid in x3.one_cells:
        if cid in lineage.skew_pieces:
            parent, k, _ab = lineage.skew_pieces[cid]
            owner = x.owner(parent)
            ratios = rho[owner]
            i = k if x.trapezoids[owner].zeta == 1 else len(ratios) - 1 - k
            z3[cid] = ratios[i] * z[parent]
        elif cid in lineage.new_verticals:
            tid, bi = lineage.new_verticals[cid]
            trap = x.trapezoids[tid]
            ratios = rho[tid]
            lplus = side_value(x, z, trap.right)
            lminus = side_value(x, z, trap.left)
            z3[cid] = lplus * sum(ratios[:bi]) + lminus * sum(ratios[bi:])
            if trap.degenerate_ancestor:
                exempt.add(cid)
        else:
            z3[cid] = z[cid]
    check_cocycle(x3, z3)
    for parent, entries in _pieces_by_parent(lineage).items():
        total = sum((z3[pid] for pid in entries), Fraction(0))
        if total != z[parent]:
            raise TorusError(f"refinement does not conserve the value on {parent!r}")
    if any(v <= 0 for v in z3.values()):
        raise TorusError("refinement lost positivity")
    new_rho = max_ratio(x3, z3)
    if new_rho > max(old_rho, Fraction(1, 2)):
        raise TorusError("skew-ratio bound violated by the refinement")
    new_state = SubdivisionState(x3, z3, state.rounds + 1, list(state.history), exempt)
    return new_state


def _pieces_by_parent(lineage: SplitLineage) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for pid, (parent, _k, _ab) in lineage.skew_pieces.items():
        out.setdefault(parent, []).append(pid)
    return out


def make_unconstrained(
    x: TrapezoidComplex,
    z: Mapping[str, Fraction],
    max_rounds: int = 64,
    cell_budget: int = 500_000,
) -> SubdivisionState:
    """Iterate standard subdivisions until every trapezoid is unconstrained.

    The minimum M of the input values on vertical cells is preserved outside
    degenerate-trapezoid interiors while the skew maxima tend to zero, which
    forces termination; hitting the round cap therefore signals a bug.
    """
    z = {c: Fraction(z[c]) for c in x.one_cells}
    check_cocycle(x, z)
    if any(v <= 0 for v in z.values()):
        raise TorusError("make_unconstrained needs a positive cocycle")
    state = SubdivisionState(x, dict(z))
    verticals = x.vertical_cells()
    m_bound = min((z[c] for c in verticals), default=None)
    epoch_cells = set(x.skew_cells())
    epoch_start_smax = state.skew_max
    state.history.append(_round_stats(state, 0))
    for _ in range(max_rounds):
        if all(is_unconstrained(state.complex, state.z, tid) for tid in state.complex.trapezoids):
            return state
        state = standard_subdivide(state)
        if m_bound is not None:
            for c in state.complex.vertical_cells():
                if c in state.exempt_verticals:
                    continue
                if state.z[c] < m_bound:
                    raise TorusError("vertical values dropped below the input minimum")
        # epoch bookkeeping: once every cell alive at the epoch start has been
        # subdivided, the skew maximum must have dropped
        alive = set(state.complex.one_cells)
        if not (epoch_cells & alive):
            if not state.skew_max < epoch_start_smax:
                raise TorusError("skew maxima failed to decrease across a full epoch")
            epoch_cells = set(state.complex.skew_cells())
            epoch_start_smax = state.skew_max
        state.history.append(_round_stats(state, state.rounds))
        if len(state.complex.one_cells) > cell_budget:
            raise CapExceeded("cell budget exceeded during subdivision")
    if all(is_unconstrained(state.complex, state.z, tid) for tid in state.complex.trapezoids):
        return state
    raise CapExceeded(f"not unconstrained after {max_rounds} rounds")


def _round_stats(state: SubdivisionState, n: int) -> dict:
    zero, one, two = state.complex.counts()
    return {
        "round": n,
        "cells0": zero,
        "cells1": one,
        "cells2": two,
        "skew_max": str(state.skew_max),
        "max_ratio": str(state.max_ratio),
    }
