"""Colorful Borsuk-Ulam solvers on odd matrix fields.

An odd matrix field sends unit vectors to square matrices and is evaluated
through its odd part, so oddness holds exactly in floating point.  The main
solver returns either a point whose matrix fails the intersecting-cube-facet
row predicate, or a point with a row-column transversal of nonnegative
row-maximal entries.  The classical zero-finding reduction and the cyclic
orbit-collapse solver are built on top.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .complexes import (
    SUBDIVISION_DEPTH_CAP,
    InvalidParameterError,
    SymmetricComplex,
    refined_crosspolytope,
    refined_zp_sphere,
    subdivision_tower,
)
from .cover_solvers import (
    CoverFamilySet,
    CoverOracle,
    Inconclusive,
    RefinementConfig,
    _base_fn,
    _complementary_edges,
    _edge_geometry,
    _orbit_cover_labeling,
    _resolve_depth,
    minimize_on_sphere,
)
from .fan_core import (
    _orbit_faces,
    find_target_facet_zp,
    find_target_facets_z2,
    rainbow_labeling,
)

MATRIX_TOL = 1e-9
_SEED_LIMIT = 24
_POLISH_SEEDS = 4


@dataclass
class OddMatrixField:
    """Matrix-valued oracle evaluated through its odd part (f(x)-f(-x))/2."""

    raw: Callable[[np.ndarray], np.ndarray]
    size: int
    _cache: dict = field(default_factory=dict, repr=False)

    def eval(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        a = np.asarray(self.raw(x), dtype=float)
        b = np.asarray(self.raw(-x), dtype=float)
        m = (a - b) / 2.0
        if m.shape != (self.size, self.size):
            raise InvalidParameterError(
                f"field returned shape {m.shape}, expected {(self.size, self.size)}"
            )
        if len(self._cache) > 4096:
            self._cache.clear()
        self._cache[key] = m
        return m


@dataclass
class CubeFacetReport:
    """Outcome of the row predicate; on failure, the offending rows/column."""

    ok: bool
    rows: tuple[int, int] | None
    column: int | None
    entries: tuple[float, float] | None
    tol: float


def rows_in_intersecting_cube_facets(m, tol: float = MATRIX_TOL) -> CubeFacetReport:
    """Check that no two rows take opposite-sign maxima in a shared column.

    True iff for every pair of distinct rows sharing a column that maximizes
    both rows' absolute values (within tol), the product of the two entries
    exceeds tol^2.  A row that is zero within tol fails against any other row.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    rowmax = np.max(np.abs(m), axis=1)
    if n >= 2:
        for a in range(n):
            if rowmax[a] <= tol:
                b = 0 if a != 0 else 1
                j = int(np.argmax(np.abs(m[b])))
                return CubeFacetReport(False, (a, b), j, (float(m[a, j]), float(m[b, j])), tol)
    for a in range(n):
        for b in range(a + 1, n):
            ja = np.abs(m[a]) >= rowmax[a] - tol
            jb = np.abs(m[b]) >= rowmax[b] - tol
            for j in np.nonzero(ja & jb)[0]:
                if m[a, j] * m[b, j] <= tol * tol:
                    return CubeFacetReport(
                        False, (a, int(b)), int(j), (float(m[a, j]), float(m[b, j])), tol
                    )
    return CubeFacetReport(True, None, None, None, tol)


@dataclass
class Transversal:
    permutation: dict[int, int]   # set index (1-based) -> row (1-based)
    matrix: np.ndarray


@dataclass
class BadRows:
    report: CubeFacetReport


@dataclass
class BUWitness:
    point: np.ndarray
    outcome: Transversal | BadRows
    tol: float


def field_cover_families(fld: OddMatrixField, d: int) -> CoverFamilySet:
    """The covering families induced by a field: set i of family j holds the
    points where entry (j, i) is the nonnegative maximum of row j in absolute
    value.  Defects are measured in matrix-entry units."""
    families = []
    for j in range(1, d + 2):
        row = []
        for i in range(1, d + 2):
            def raw(x, _j=j, _i=i):
                m = fld.eval(x)
                return float(np.max(np.abs(m[_j - 1])) - m[_j - 1, _i - 1])

            row.append(CoverOracle(family=j, index=i, raw=raw))
        families.append(tuple(row))
    return CoverFamilySet(2, d, tuple(families))


def transversal_residual(fld: OddMatrixField, x: np.ndarray, pi: dict[int, int]) -> float:
    m = fld.eval(x)
    return max(
        float(np.max(np.abs(m[pi[i] - 1])) - m[pi[i] - 1, i - 1])
        for i in pi
    )


def best_transversal(fld: OddMatrixField, x: np.ndarray, d: int):
    """Minimal transversal residual over all permutations at one point."""
    m = fld.eval(x)
    rowmax = np.max(np.abs(m), axis=1)
    best, best_pi = np.inf, None
    for perm in itertools.permutations(range(d + 1)):
        r = max(float(rowmax[perm[i]] - m[perm[i], i]) for i in range(d + 1))
        if r < best:
            best = r
            best_pi = {i + 1: perm[i] + 1 for i in range(d + 1)}
    return best, best_pi


def badrows_best(fld: OddMatrixField, x: np.ndarray, tol: float = MATRIX_TOL):
    """Smallest slack at which some row pair fails the cube-facet predicate.

    Returns (residual, (row_a, row_b), column) with 0-based indices; the
    residual is in matrix-entry units (the sign clash enters via the square
    root of the positive part of the entry product, so all terms scale alike).
    """
    m = fld.eval(x)
    n = m.shape[0]
    rowmax = np.max(np.abs(m), axis=1)
    best = (np.inf, (0, 0), 0)
    for a in range(n):
        for b in range(a + 1, n):
            for j in range(n):
                t1 = rowmax[a] - abs(m[a, j])
                t2 = rowmax[b] - abs(m[b, j])
                t3 = math.sqrt(max(m[a, j] * m[b, j], 0.0))
                r = max(t1, t2, t3)
                if r < best[0]:
                    best = (float(r), (a, b), j)
    return best


def verify_transversal(fld: OddMatrixField, x, pi: dict[int, int], tol: float) -> bool:
    m = fld.eval(x)
    for i, row in pi.items():
        v = m[row - 1, i - 1]
        if v < -tol:
            return False
        if abs(v) < np.max(np.abs(m[row - 1])) - tol:
            return False
    return True


def verify_badrows(fld: OddMatrixField, x, rows, column, tol: float) -> bool:
    m = fld.eval(x)
    a, b = rows
    if abs(m[a, column]) < np.max(np.abs(m[a])) - tol:
        return False
    if abs(m[b, column]) < np.max(np.abs(m[b])) - tol:
        return False
    return m[a, column] * m[b, column] <= tol * tol


def solve_colorful_bu(
    fld: OddMatrixField,
    d: int,
    cfg: RefinementConfig | None = None,
    matrix_tol: float = MATRIX_TOL,
    hunt_badrows: bool = True,
):
    """Find a point with a failing row predicate or a nonnegative transversal.

    Refines the crosspolytope, rainbow-labels each subdivision from the
    field's covering families, and converts the combinatorial certificate of
    each level into a numerical candidate: target facets seed transversal
    witnesses, complementary edges seed row-clash witnesses.  Candidates are
    polished locally and accepted only when the defining inequalities hold at
    the witness tolerance.
    """
    cfg = cfg or RefinementConfig()
    families = field_cover_families(fld, d)
    signs = (1,) * (d + 1)
    base = _base_fn(cfg, lambda l: refined_crosspolytope(d + 1, l))
    depth = min(_resolve_depth(cfg, d), SUBDIVISION_DEPTH_CAP - 1)
    tol = cfg.witness_tol
    best_pt, best_res = None, np.inf
    level = 0
    for level in range(depth + 1):
        coarse = base(level)
        if len(coarse.complex.facets) * math.factorial(d + 1) > cfg.facet_budget:
            break
        fine = base(level + 1)
        labels = rainbow_labeling(fine, families)
        comp = list(_complementary_edges(fine, labels.labels))

        seen_pi: set[tuple] = set()
        targets = []
        for target in find_target_facets_z2(fine, labels, signs):
            pi = {
                i: len(fine.parent_faces[target.matching[i]]) for i in range(1, d + 2)
            }
            key = tuple(sorted(pi.items()))
            if key in seen_pi:
                continue
            seen_pi.add(key)
            x = fine.facet_barycenter(target.facet)
            targets.append((transversal_residual(fld, x, pi), x, pi))
        targets.sort(key=lambda t: t[0])
        for _, x, pi in targets[:_POLISH_SEEDS]:
            if cfg.polish:
                x, _ = minimize_on_sphere(
                    lambda y: transversal_residual(fld, y, pi), x, fine.span_basis
                )
            r = transversal_residual(fld, x, pi)
            if r < best_res:
                best_pt, best_res = x, r
            if r <= tol:
                return BUWitness(x, Transversal(pi, fld.eval(x)), tol)

        if hunt_badrows:
            seeds = []
            for e, _j in comp[:_SEED_LIMIT]:
                _, _, xu, xv, mid, _len = _edge_geometry(fine, e)
                seeds.extend((xu, xv, mid))
            seeds.sort(key=lambda s: badrows_best(fld, s, matrix_tol)[0])
            for s in seeds[:_POLISH_SEEDS]:
                if cfg.polish:
                    s, _ = minimize_on_sphere(
                        lambda y: badrows_best(fld, y, matrix_tol)[0],
                        s,
                        fine.span_basis,
                    )
                r, rows, col = badrows_best(fld, s, matrix_tol)
                if r < best_res:
                    best_pt, best_res = s, r
                if r <= tol:
                    m = fld.eval(s)
                    report = CubeFacetReport(
                        False, rows, col,
                        (float(m[rows[0], col]), float(m[rows[1], col])), tol,
                    )
                    return BUWitness(s, BadRows(report), tol)

        # transversal regions can meet in a thin corner the labelling only
        # resolves at depth; complementary-edge midpoints polished over the
        # best permutation recover it early, and acceptance still demands the
        # defining inequalities at tolerance
        if comp and cfg.polish:
            mids = []
            for e, _j in comp[:_SEED_LIMIT]:
                _, _, _, _, mid, _len = _edge_geometry(fine, e)
                mids.append(mid)
            mids.sort(key=lambda s: best_transversal(fld, s, d)[0])
            for s in mids[:2]:
                _, pi = best_transversal(fld, s, d)
                s, _ = minimize_on_sphere(
                    lambda y: transversal_residual(fld, y, pi), s, fine.span_basis
                )
                r = transversal_residual(fld, s, pi)
                if r < best_res:
                    best_pt, best_res = s, r
                if r <= tol:
                    return BUWitness(s, Transversal(pi, fld.eval(s)), tol)
    return Inconclusive(best_pt, best_res, level)


# ---------------------------------------------------------------------------
# classical reduction


@dataclass
class ZeroWitness:
    point: np.ndarray
    value: np.ndarray
    norm: float


def classical_bu_zero(f: Callable[[np.ndarray], np.ndarray], d: int,
                      cfg: RefinementConfig | None = None):
    """Near-zero of an odd map S^d -> R^d via the all-rows-equal matrix field.

    The map gets a zero appended and is stacked into d+1 identical rows; any
    witness of the matrix solver then pins all entries of the extended map to
    a common absolute value including the zero, so the map itself is small.
    The returned point is polished on the norm of the map directly.
    """
    cfg = cfg or RefinementConfig()

    def f_odd(x: np.ndarray) -> np.ndarray:
        a = np.atleast_1d(np.asarray(f(x), dtype=float))
        b = np.atleast_1d(np.asarray(f(-x), dtype=float))
        return (a - b) / 2.0

    def raw(x: np.ndarray) -> np.ndarray:
        v = np.append(f_odd(x), 0.0)
        return np.tile(v, (d + 1, 1))

    fld = OddMatrixField(raw, d + 1)
    res = solve_colorful_bu(fld, d, cfg)
    x0 = res.point if isinstance(res, BUWitness) else res.best_point
    if x0 is None:
        return Inconclusive(None, np.inf, 0, "no candidate found")

    def nrm(y: np.ndarray) -> float:
        return float(np.linalg.norm(f_odd(y)))

    x, v = minimize_on_sphere(nrm, x0) if cfg.polish else (x0, nrm(x0))
    if v <= cfg.witness_tol:
        return ZeroWitness(x, f_odd(x), v)
    return Inconclusive(x, v, 0, "norm did not reach tolerance")


# ---------------------------------------------------------------------------
# cyclic orbit collapse


@dataclass
class OrbitCollapseWitness:
    """Orbit x, s.x, ..., s^(p-1).x whose images collapse onto two values.

    All points except ``remaining_index`` map within the residual of ``y``;
    the remaining one maps within the residual of y - (alpha, ..., alpha).
    """

    orbit: tuple[np.ndarray, ...]
    y: np.ndarray
    alpha: float
    residual: float
    remaining_index: int


def orbit_collapse(f: Callable[[np.ndarray], np.ndarray], p: int, d: int,
                   cfg: RefinementConfig | None = None):
    """Find an orbit on which f collapses, in the cyclic join-sphere action.

    Either f is constant on a full orbit (alpha = 0) or it maps p-1 points of
    an orbit to one value y and the last point to y shifted down the diagonal
    by a common amount.
    """
    cfg = cfg or RefinementConfig()
    n = (p - 1) * d - 1
    base = _base_fn(cfg, lambda l: refined_zp_sphere(p, d, l))
    depth = _resolve_depth(cfg, max(n, 0))
    T0 = base(0)

    def f_vec(x: np.ndarray) -> np.ndarray:
        return np.atleast_1d(np.asarray(f(x), dtype=float))

    def orbit_values(T: SymmetricComplex, x: np.ndarray) -> np.ndarray:
        return np.stack([f_vec(T.shift_point(x, k)) for k in range(p)])

    def set_raw(i: int, T: SymmetricComplex):
        def raw(x: np.ndarray) -> float:
            vals = orbit_values(T, x)
            diams = vals.max(axis=0) - vals.min(axis=0)
            not_widest = float(np.max(diams) - diams[i - 1])
            not_max = float(np.max(vals[:, i - 1]) - vals[0, i - 1])
            return max(not_widest, not_max)

        return raw

    def full_residual(T, x) -> float:
        vals = orbit_values(T, x)
        return float(np.max(np.abs(vals - vals[0])))

    def partial_residual(T, x) -> float:
        ys = np.stack([f_vec(T.shift_point(x, -k)) for k in range(p - 1)])
        r1 = float(np.max(np.abs(ys - ys[0]))) if p > 2 else 0.0
        z = f_vec(T.shift_point(x, 1))
        alpha = float(np.mean(ys[0] - z))
        r2 = float(np.max(np.abs(z - (ys[0] - alpha))))
        return max(r1, r2)

    def make_witness(T, x, full: bool):
        orbit = tuple(T.shift_point(x, k) for k in range(p))
        y = f_vec(x)
        if full:
            return OrbitCollapseWitness(orbit, y, 0.0, full_residual(T, x), -1)
        z = f_vec(T.shift_point(x, 1))
        alpha = float(np.mean(y - z))
        return OrbitCollapseWitness(orbit, y, alpha, partial_residual(T, x), 1)

    tol = cfg.witness_tol
    shifts = (p - 1,) * d
    best_pt, best_res, best_full = None, np.inf, False
    level = 0
    for level in range(depth + 1):
        T = base(level)
        if len(T.complex.facets) > cfg.facet_budget:
            break
        oracles = [CoverOracle(index=i, raw=set_raw(i, T)) for i in range(1, d + 1)]
        labels, violation = _orbit_cover_labeling(T, oracles, p)
        candidates: list[tuple[np.ndarray, bool]] = []
        if violation is not None:
            candidates.append((violation.point, True))
        for face, _j in _orbit_faces(T, labels.labels, d, p):
            candidates.append((T.facet_barycenter(face), True))
        target = find_target_facet_zp(T, labels, shifts, d)
        if target is not None:
            candidates.append((T.facet_barycenter(target.facet), False))
        for x, full in candidates:
            fn = (lambda y: full_residual(T, y)) if full else (lambda y: partial_residual(T, y))
            if cfg.polish:
                x, _ = minimize_on_sphere(fn, x, T.span_basis)
            r = fn(x)
            if r < best_res:
                best_pt, best_res, best_full = x, r, full
            if r <= tol:
                return make_witness(T, x, full)
    if best_pt is not None and best_res <= tol:
        return make_witness(base(level), best_pt, best_full)
    return Inconclusive(best_pt, best_res, level)
