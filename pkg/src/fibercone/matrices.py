"""Exact matrix utilities: integer/rational arithmetic, Perron-Frobenius
enclosures, strongly connected components, characteristic polynomials, Smith
normal form and rational kernels.

Everything here is dependency-free and exact; the only floating point is the
throwaway power iteration used to seed a certified Collatz-Wielandt bracket.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

Mat = list[list[Fraction]]
IntMat = list[list[int]]


def identity(n: int) -> IntMat:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def mat_mul(a, b):
    n, k, m = len(a), len(b), len(b[0]) if b else 0
    out = [[0] * m for _ in range(n)]
    for i in range(n):
        ai = a[i]
        oi = out[i]
        for t in range(k):
            x = ai[t]
            if x:
                bt = b[t]
                for j in range(m):
                    oi[j] += x * bt[j]
    return out


def mat_vec(a, v):
    return [sum(x * y for x, y in zip(row, v)) for row in a]


def mat_pow(a, n: int):
    size = len(a)
    result = identity(size)
    base = [row[:] for row in a]
    while n:
        if n & 1:
            result = mat_mul(result, base)
        base = mat_mul(base, base)
        n >>= 1
    return result


def mat_positive(a) -> bool:
    return all(x > 0 for row in a for x in row)


def strongly_connected_components(succ: Sequence[Sequence[int]]) -> list[list[int]]:
    """Tarjan's algorithm, iterative.  Returns components in reverse
    topological order (sources last)."""
    n = len(succ)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            recurse = False
            for i in range(pi, len(succ[v])):
                w = succ[v][i]
                if index[w] == -1:
                    work[-1] = (v, i + 1)
                    work.append((w, 0))
                    recurse = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if recurse:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def is_irreducible(a) -> bool:
    """A nonnegative square matrix is irreducible iff its digraph is strongly
    connected (single-vertex graphs need a self-loop)."""
    n = len(a)
    if n == 0:
        return False
    if n == 1:
        return a[0][0] > 0
    succ = [[j for j in range(n) if a[i][j] > 0] for i in range(n)]
    comps = strongly_connected_components(succ)
    return len(comps) == 1


def positive_power(a, cap: int | None = None) -> int | None:
    """Least m <= cap with a^m > 0 entrywise, or None."""
    n = len(a)
    if cap is None:
        cap = max(1, n * n)
    b = [[1 if x > 0 else 0 for x in row] for row in a]
    acc = [row[:] for row in b]
    for m in range(1, cap + 1):
        if all(all(x for x in row) for row in acc):
            return m
        acc = [[1 if x > 0 else 0 for x in row] for row in mat_mul(acc, b)]
    return None


@dataclass
class PerronData:
    """Certified enclosure of the Perron root and eigenvector of an
    irreducible nonnegative integer matrix."""

    lo: Fraction
    hi: Fraction
    vector_lo: list[Fraction]
    vector_hi: list[Fraction]
    residual: Fraction  # ||A v - mid * v||_inf at the certified vector

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def vector_mid(self) -> list[Fraction]:
        return [(a + b) / 2 for a, b in zip(self.vector_lo, self.vector_hi)]


def collatz_wielandt(a, v) -> tuple[Fraction, Fraction]:
    """For irreducible nonnegative a and positive v:
    min_i (av)_i / v_i  <=  spectral radius  <=  max_i (av)_i / v_i."""
    av = mat_vec(a, v)
    ratios = [Fraction(x) / Fraction(y) for x, y in zip(av, v)]
    return min(ratios), max(ratios)


def _float_perron_vector(a, iters: int = 800) -> list[float]:
    n = len(a)
    v = [1.0] * n
    af = [[float(x) for x in row] for row in a]
    for _ in range(iters):
        w = [sum(r * x for r, x in zip(row, v)) + v[i] for i, row in enumerate(af)]
        s = sum(w)
        if s == 0:
            return [1.0] * n
        v = [x / s for x in w]
    return v


def perron_bounds(a, tol: Fraction = Fraction(1, 10**9), max_iter: int = 2000) -> PerronData:
    """Certified Perron root enclosure via Collatz-Wielandt bounds.

    The candidate vector comes from floating-point power iteration and is then
    improved by exact (I + A) iterations, under which the bracket is monotone.
    All certifying arithmetic is exact.
    """
    n = len(a)
    if not is_irreducible(a):
        raise ValueError("perron_bounds needs an irreducible matrix")
    seed = _float_perron_vector(a)
    v = [max(Fraction(1, 10**12), Fraction(x).limit_denominator(10**12)) for x in seed]
    lo, hi = collatz_wielandt(a, v)
    it = 0
    while hi - lo > tol and it < max_iter:
        w = mat_vec(a, v)
        v = [x + y for x, y in zip(v, w)]  # (I+A) v, keeps bounds monotone
        s = sum(v)
        v = [x / s for x in v]
        l2, h2 = collatz_wielandt(a, v)
        lo, hi = max(lo, l2), min(hi, h2)
        it += 1
    vec_lo, vec_hi = perron_vector_enclosure(a, tol)
    mid = (lo + hi) / 2
    av = mat_vec(a, v)
    residual = max(abs(x - mid * y) for x, y in zip(av, v))
    return PerronData(lo, hi, vec_lo, vec_hi, residual)


def perron_vector_enclosure(a, tol: Fraction, max_squarings: int = 40) -> tuple[list[Fraction], list[Fraction]]:
    """Componentwise rational enclosure of the positive Perron vector
    (normalized to sum 1) of an irreducible nonnegative matrix.

    Uses Hilbert-metric contraction: for a positive matrix B with B v = c v,
    the ratio v_i / v_j lies in [min_k B_ik/B_jk, max_k B_ik/B_jk]; squaring B
    contracts these intervals.
    """
    n = len(a)
    if n == 1:
        return [Fraction(1)], [Fraction(1)]
    b = mat_pow([[x + (1 if i == j else 0) for j, x in enumerate(row)] for i, row in enumerate(a)], max(1, n - 1))
    if not mat_positive(b):
        raise ValueError("matrix is not irreducible")
    for _ in range(max_squarings):
        ratio_lo = [min(Fraction(b[i][k], b[0][k]) for k in range(n)) for i in range(n)]
        ratio_hi = [max(Fraction(b[i][k], b[0][k]) for k in range(n)) for i in range(n)]
        lo = []
        hi = []
        for i in range(n):
            denom_hi = ratio_lo[i] + sum(ratio_hi[j] for j in range(n) if j != i)
            denom_lo = ratio_hi[i] + sum(ratio_lo[j] for j in range(n) if j != i)
            lo.append(ratio_lo[i] / denom_hi)
            hi.append(ratio_hi[i] / denom_lo)
        if max(h - l for l, h in zip(lo, hi)) <= tol:
            return lo, hi
        b = mat_mul(b, b)
        m = min(x for row in b for x in row)
        if m > 1:  # rescale to keep the integers manageable
            b = [[Fraction(x, m) for x in row] for row in b]
    raise ValueError("Perron vector enclosure did not reach the requested precision")


def spectral_radius_bounds(a, tol: Fraction = Fraction(1, 10**7)) -> tuple[Fraction, Fraction]:
    """Certified enclosure of the spectral radius of any nonnegative integer
    matrix: the maximum of the Perron roots of its strongly connected
    components."""
    n = len(a)
    if n == 0:
        return Fraction(0), Fraction(0)
    succ = [[j for j in range(n) if a[i][j] > 0] for i in range(n)]
    comps = strongly_connected_components(succ)
    lo, hi = Fraction(0), Fraction(0)
    for comp in comps:
        if len(comp) == 1:
            i = comp[0]
            val = Fraction(a[i][i])
            lo, hi = max(lo, val), max(hi, val)
            continue
        sub = [[Fraction(a[i][j]) for j in comp] for i in comp]
        data = perron_bounds(sub, tol)
        lo, hi = max(lo, data.lo), max(hi, data.hi)
    return lo, hi


def charpoly(a) -> list[Fraction]:
    """Characteristic polynomial coefficients [1, c1, ..., cn] of det(xI - A),
    by the Faddeev-LeVerrier recursion (exact)."""
    n = len(a)
    coeffs = [Fraction(1)]
    m = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        m = mat_mul(a, m)
        for i in range(n):
            m[i][i] += coeffs[-1]
        am = mat_mul(a, m)
        coeffs.append(-Fraction(sum(am[i][i] for i in range(n)), k))
    return coeffs


def eval_poly(coeffs: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in coeffs:
        acc = acc * x + c
    return acc


# -- rational elimination -----------------------------------------------------


def rref(rows: Mat) -> tuple[Mat, list[int]]:
    """Reduced row echelon form over the rationals; returns (R, pivot_cols)."""
    m = [row[:] for row in rows]
    nrows = len(m)
    ncols = len(m[0]) if nrows else 0
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        pivot = next((i for i in range(r, nrows) if m[i][c] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        inv = Fraction(1) / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(nrows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return m, pivots


def rank(rows: Mat) -> int:
    return len(rref(rows)[1])


def nullspace(rows: Mat) -> list[list[Fraction]]:
    """Basis of the rational kernel of the matrix (as row-vectors of length ncols)."""
    if not rows:
        return []
    ncols = len(rows[0])
    r, pivots = rref(rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        vec = [Fraction(0)] * ncols
        vec[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            vec[pc] = -r[i][fc]
        basis.append(vec)
    return basis


def solve(rows: Mat, rhs: list[Fraction]) -> list[Fraction] | None:
    """One rational solution of rows * x = rhs, or None if inconsistent."""
    if not rows:
        return [] if all(x == 0 for x in rhs) else None
    aug = [row[:] + [b] for row, b in zip(rows, rhs)]
    r, pivots = rref(aug)
    ncols = len(rows[0])
    for row in r:
        if all(x == 0 for x in row[:ncols]) and row[ncols] != 0:
            return None
    x = [Fraction(0)] * ncols
    for i, pc in enumerate(pivots):
        if pc == ncols:
            return None
        x[pc] = r[i][ncols]
    return x


# -- Smith normal form --------------------------------------------------------


def smith_normal_form(mat: IntMat) -> tuple[IntMat, IntMat, IntMat]:
    """Smith normal form with transforms: returns (d, u, v) with u*mat*v = d,
    u and v unimodular, d diagonal with d_i | d_{i+1}."""
    a = [row[:] for row in mat]
    nrows = len(a)
    ncols = len(a[0]) if nrows else 0
    u = identity(nrows)
    v = identity(ncols)

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        u[i], u[j] = u[j], u[i]

    def swap_cols(i, j):
        for row in a:
            row[i], row[j] = row[j], row[i]
        for row in v:
            row[i], row[j] = row[j], row[i]

    def add_row(src, dst, q):  # row_dst += q * row_src
        a[dst] = [x + q * y for x, y in zip(a[dst], a[src])]
        u[dst] = [x + q * y for x, y in zip(u[dst], u[src])]

    def add_col(src, dst, q):
        for row in a:
            row[dst] += q * row[src]
        for row in v:
            row[dst] += q * row[src]

    def negate_row(i):
        a[i] = [-x for x in a[i]]
        u[i] = [-x for x in u[i]]

    def diagonalize():
        t = 0
        while t < min(nrows, ncols):
            pivot = None
            for i in range(t, nrows):
                for j in range(t, ncols):
                    if a[i][j] != 0:
                        pivot = (i, j)
                        break
                if pivot:
                    break
            if pivot is None:
                break
            swap_rows(t, pivot[0])
            swap_cols(t, pivot[1])
            while True:
                # Euclidean reduction of column t; a remainder swap strictly
                # shrinks |a[t][t]|, so this terminates.
                for i in range(t + 1, nrows):
                    while a[i][t] != 0:
                        add_row(t, i, -(a[i][t] // a[t][t]))
                        if a[i][t] != 0:
                            swap_rows(t, i)
                for j in range(t + 1, ncols):
                    while a[t][j] != 0:
                        add_col(t, j, -(a[t][j] // a[t][t]))
                        if a[t][j] != 0:
                            swap_cols(t, j)
                if all(a[i][t] == 0 for i in range(t + 1, nrows)) and all(
                    a[t][j] == 0 for j in range(t + 1, ncols)
                ):
                    break
            if a[t][t] < 0:
                negate_row(t)
            t += 1

    diagonalize()
    # enforce divisibility d_i | d_{i+1}; each merge replaces the pair by
    # (gcd, lcm), so the product of proper divisors strictly drops
    while True:
        bad = None
        for i in range(min(nrows, ncols) - 1):
            if a[i][i] and a[i + 1][i + 1] % a[i][i] != 0:
                bad = i
                break
        if bad is None:
            break
        add_col(bad + 1, bad, 1)
        diagonalize()
    return a, u, v
