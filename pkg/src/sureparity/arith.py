"""Exact rational linear algebra and a certificate-producing simplex solver.

Everything works on ``fractions.Fraction``; there is no floating point here.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .errors import SingularSystem

LE, EQ, GE = "<=", "=", ">="


def frac(x) -> Fraction:
    """Coerce ints, Fractions and strings like ``"1/3"`` or ``"0.25"``."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("floats are not accepted in exact code paths")
    return Fraction(x)


def dot(u, v) -> Fraction:
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


def mat_vec(a, x) -> List[Fraction]:
    return [dot(row, x) for row in a]


def solve_linear_system(a: Sequence[Sequence], b: Sequence) -> List[Fraction]:
    """Solve ``a x = b`` exactly by Gauss-Jordan elimination.

    Raises SingularSystem carrying the index of a dependent row and the
    coefficients that combine the original rows into a zero row.
    """
    n = len(a)
    if any(len(row) != n for row in a) or len(b) != n:
        raise ValueError("matrix must be square and match the right-hand side")
    # augmented with the identity so a dependent row comes with its witness
    m = [[frac(v) for v in a[i]] + [frac(b[i])] + [Fraction(int(i == j)) for j in range(n)]
         for i in range(n)]
    where = list(range(n))
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            # column col has no pivot, so some row is a combination of the others
            for r in range(col, n):
                if all(m[r][c] == 0 for c in range(n)):
                    raise SingularSystem(where[r], m[r][n + 1:])
            # the reduced rows col..n-1 all live in fewer columns; find the dependency
            sub = _left_null_vector([row[:n] for row in m[col:]])
            combo = [Fraction(0)] * n
            for k, coef in enumerate(sub):
                for j in range(n):
                    combo[j] += coef * m[col + k][n + 1 + j]
            raise SingularSystem(where[col + next(k for k, c in enumerate(sub) if c)], combo)
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            where[col], where[piv] = where[piv], where[col]
        inv = 1 / m[col][col]
        m[col] = [v * inv for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [m[i][n] for i in range(n)]


def rank(rows: Sequence[Sequence]) -> int:
    return len(_row_echelon([[frac(v) for v in r] for r in rows])[1])


def _row_echelon(m):
    m = [list(r) for r in m]
    pivots = []
    r = 0
    ncols = len(m[0]) if m else 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def null_space(rows: Sequence[Sequence], ncols: int) -> List[List[Fraction]]:
    """Basis of ``{x : rows x = 0}``."""
    if not rows:
        return [[Fraction(int(i == j)) for j in range(ncols)] for i in range(ncols)]
    m, pivots = _row_echelon([[frac(v) for v in r] for r in rows])
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        x = [Fraction(0)] * ncols
        x[f] = Fraction(1)
        for i, p in enumerate(pivots):
            x[p] = -m[i][f]
        basis.append(x)
    return basis


def _left_null_vector(rows):
    t = [list(col) for col in zip(*rows)] if rows else []
    basis = null_space(t, len(rows))
    return basis[0]


def affine_rank(points: Sequence[Sequence]) -> int:
    """Dimension of the affine hull of ``points`` (-1 for no points)."""
    if not points:
        return -1
    base = points[0]
    return rank([[frac(p[i]) - frac(base[i]) for i in range(len(base))] for p in points[1:]]) if len(points) > 1 else 0


# ---------------------------------------------------------------------------
# Linear programming


@dataclass
class LinearProgram:
    """``objective . x`` optimized subject to ``row . x (rel) rhs``.

    ``nonneg[j]`` is False for free variables.
    """

    variables: List[str]
    constraints: List[Tuple[List[Fraction], str, Fraction]] = field(default_factory=list)
    objective: List[Fraction] = field(default_factory=list)
    maximize: bool = True
    nonneg: Optional[List[bool]] = None

    def __post_init__(self):
        n = len(self.variables)
        if self.nonneg is None:
            self.nonneg = [True] * n
        if not self.objective:
            self.objective = [Fraction(0)] * n
        self.objective = [frac(c) for c in self.objective]
        self.constraints = [([frac(c) for c in row], rel, frac(rhs)) for row, rel, rhs in self.constraints]
        for row, rel, _ in self.constraints:
            if len(row) != n:
                raise ValueError("constraint row length does not match variable count")
            if rel not in (LE, EQ, GE):
                raise ValueError(f"unknown relation {rel!r}")
        if len(self.objective) != n or len(self.nonneg) != n:
            raise ValueError("objective/nonneg length does not match variable count")

    def add(self, row, rel, rhs):
        self.constraints.append(([frac(c) for c in row], rel, frac(rhs)))
        if len(self.constraints[-1][0]) != len(self.variables):
            raise ValueError("constraint row length does not match variable count")

    def with_objective(self, objective, maximize=True) -> "LinearProgram":
        return LinearProgram(list(self.variables), list(self.constraints), list(objective),
                             maximize, list(self.nonneg))

    def is_feasible_point(self, x) -> bool:
        for j, v in enumerate(x):
            if self.nonneg[j] and v < 0:
                return False
        for row, rel, rhs in self.constraints:
            lhs = dot(row, x)
            if (rel == LE and lhs > rhs) or (rel == GE and lhs < rhs) or (rel == EQ and lhs != rhs):
                return False
        return True


@dataclass(frozen=True)
class Infeasible:
    farkas: Tuple[Fraction, ...]  # y with y.A <= 0 and y.b > 0 on the equality form


@dataclass(frozen=True)
class Unbounded:
    point: Tuple[Fraction, ...]
    ray: Tuple[Fraction, ...]


@dataclass(frozen=True)
class Optimal:
    point: Tuple[Fraction, ...]
    value: Fraction
    basis: Tuple[int, ...]
    dual: Tuple[Fraction, ...]


class _StandardForm:
    """Equality form ``A z = b, z >= 0, b >= 0`` of a LinearProgram (minimization)."""

    def __init__(self, lp: LinearProgram):
        self.lp = lp
        cols = []  # (original var index, sign) for structural columns
        for j in range(len(lp.variables)):
            cols.append((j, 1))
            if not lp.nonneg[j]:
                cols.append((j, -1))
        self.struct = cols
        rows, rhs, kinds = [], [], []
        for row, rel, b in lp.constraints:
            coeffs = [row[j] * sgn for j, sgn in cols]
            if b < 0:
                coeffs = [-c for c in coeffs]
                b = -b
                rel = {LE: GE, GE: LE, EQ: EQ}[rel]
            rows.append(coeffs)
            rhs.append(b)
            kinds.append(rel)
        nslack = sum(1 for k in kinds if k != EQ)
        ns = len(cols)
        self.n = ns + nslack
        self.a = []
        self.slack_basis = []
        k = ns
        for coeffs, rel in zip(rows, kinds):
            full = coeffs + [Fraction(0)] * nslack
            if rel == LE:
                full[k] = Fraction(1)
                self.slack_basis.append(k)
                k += 1
            elif rel == GE:
                full[k] = Fraction(-1)
                self.slack_basis.append(None)
                k += 1
            else:
                self.slack_basis.append(None)
            self.a.append(full)
        self.b = rhs
        sign = -1 if lp.maximize else 1
        self.c = [sign * lp.objective[j] * sgn for j, sgn in cols] + [Fraction(0)] * nslack

    def to_original(self, z) -> Tuple[Fraction, ...]:
        x = [Fraction(0)] * len(self.lp.variables)
        for idx, (j, sgn) in enumerate(self.struct):
            x[j] += sgn * z[idx]
        return tuple(x)


def _pivot(t, r, c):
    inv = 1 / t[r][c]
    t[r] = [v * inv for v in t[r]]
    pr = t[r]
    for i in range(len(t)):
        if i != r and t[i][c] != 0:
            f = t[i][c]
            t[i] = [x - f * y for x, y in zip(t[i], pr)]


def _simplex(t, basis, cost, allowed):
    """Bland-rule primal simplex on tableau rows ``t`` (last entry = rhs).

    Minimizes ``cost . z``.  Returns ("optimal", None) or ("unbounded", column).
    """
    ncol = len(cost)
    while True:
        # reduced costs d_j = c_j - c_B B^-1 A_j
        entering = None
        for j in range(ncol):
            if not allowed[j] or j in basis:
                continue
            d = cost[j] - sum((cost[basis[i]] * t[i][j] for i in range(len(t))), Fraction(0))
            if d < 0:
                entering = j
                break
        if entering is None:
            return "optimal", None
        best = None
        for i in range(len(t)):
            if t[i][entering] > 0:
                ratio = t[i][-1] / t[i][entering]
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            return "unbounded", entering
        r = best[1]
        _pivot(t, r, entering)
        basis[r] = entering


def _duals(a, basis, cost):
    """y solving y B = c_B for the current basis."""
    m = len(a)
    bmat = [[a[i][basis[k]] for i in range(m)] for k in range(m)]  # rows of B^T
    return solve_linear_system(bmat, [cost[basis[k]] for k in range(m)])


def lp_solve(lp: LinearProgram):
    """Two-phase exact simplex with Bland's rule.

    Returns Optimal, Infeasible or Unbounded; every outcome's certificate is
    re-checked before it is returned.
    """
    sf = _StandardForm(lp)
    m, n = len(sf.a), sf.n
    if m == 0:
        # only sign constraints: optimum at 0 unless some direction improves
        for j in range(n):
            if sf.c[j] < 0:
                ray = [Fraction(0)] * n
                ray[j] = Fraction(1)
                return Unbounded(sf.to_original([Fraction(0)] * n), sf.to_original(ray))
        return Optimal(tuple(Fraction(0) for _ in lp.variables), Fraction(0), (), ())
    # phase 1: artificial columns n..n+m-1 where no slack can start the basis
    nart = m
    t = [sf.a[i] + [Fraction(int(i == k)) for k in range(nart)] + [sf.b[i]] for i in range(m)]
    basis = []
    for i in range(m):
        s = sf.slack_basis[i]
        basis.append(s if s is not None else n + i)
    cost1 = [Fraction(0)] * n + [Fraction(1)] * nart
    allowed = [True] * (n + nart)
    for i in range(m):
        if basis[i] < n:  # slack used, artificial never needed
            allowed[n + i] = False
    _simplex(t, basis, cost1, allowed)
    phase1 = sum((t[i][-1] for i in range(m) if basis[i] >= n), Fraction(0))
    full_a = [sf.a[i] + [Fraction(int(i == k)) for k in range(nart)] for i in range(m)]
    if phase1 > 0:
        y = _duals(full_a, basis, cost1)
        cert = tuple(y)
        _check_farkas(sf, cert)
        return Infeasible(cert)
    # drive zero-level artificials out of the basis, dropping redundant rows
    keep = []
    for i in range(m):
        if basis[i] >= n:
            col = next((j for j in range(n) if t[i][j] != 0), None)
            if col is None:
                continue  # redundant row
            _pivot(t, i, col)
            basis[i] = col
        keep.append(i)
    t = [t[i][:n] + [t[i][-1]] for i in keep]
    basis = [basis[i] for i in keep]
    a_kept = [sf.a[i] for i in keep]
    b_kept = [sf.b[i] for i in keep]
    status, col = _simplex(t, basis, sf.c, [True] * n)
    z = [Fraction(0)] * n
    for i, bj in enumerate(basis):
        z[bj] = t[i][-1]
    if status == "unbounded":
        ray = [Fraction(0)] * n
        ray[col] = Fraction(1)
        for i, bj in enumerate(basis):
            ray[bj] = -t[i][col]
        _check_ray(a_kept, sf.c, ray)
        return Unbounded(sf.to_original(z), sf.to_original(ray))
    y = _duals(a_kept, basis, sf.c) if basis else []
    _check_optimal(a_kept, b_kept, sf.c, z, y)
    value = dot(sf.c, z)
    if lp.maximize:
        value = -value
    x = sf.to_original(z)
    assert lp.is_feasible_point(x), "simplex produced an infeasible point"
    return Optimal(x, value, tuple(basis), tuple(y))


def _check_farkas(sf, y):
    for j in range(sf.n):
        if sum((y[i] * sf.a[i][j] for i in range(len(sf.a))), Fraction(0)) > 0:
            raise AssertionError("Farkas certificate failed (column)")
    if dot(y, sf.b) <= 0:
        raise AssertionError("Farkas certificate failed (rhs)")


def _check_ray(a, c, ray):
    if any(v < 0 for v in ray) or any(dot(row, ray) != 0 for row in a) or dot(c, ray) >= 0:
        raise AssertionError("unboundedness certificate failed")


def _check_optimal(a, b, c, z, y):
    if any(v < 0 for v in z) or any(dot(row, z) != rhs for row, rhs in zip(a, b)):
        raise AssertionError("primal certificate failed")
    for j in range(len(c)):
        if c[j] - sum((y[i] * a[i][j] for i in range(len(a))), Fraction(0)) < 0:
            raise AssertionError("dual certificate failed")
    if dot(y, b) != dot(c, z):
        raise AssertionError("duality gap is not zero")


def lex_vertex(lp: LinearProgram, tiebreak_objectives: Sequence[Sequence]):
    """Optimize ``lp``, then maximize each tiebreak row with earlier optima pinned.

    Returns the final Optimal outcome, or the first non-optimal outcome.
    """
    current = lp
    out = lp_solve(current)
    if not isinstance(out, Optimal):
        return out
    pinned = LinearProgram(list(lp.variables), list(lp.constraints), list(lp.objective),
                           lp.maximize, list(lp.nonneg))
    pinned.add(lp.objective, EQ, out.value)
    for row in tiebreak_objectives:
        nxt = lp_solve(pinned.with_objective(row, True))
        if not isinstance(nxt, Optimal):
            return nxt
        pinned.add(row, EQ, nxt.value)
        out = nxt
    return out
