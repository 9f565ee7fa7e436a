"""Covering solvers on symmetric sphere triangulations.

Closed sets enter as membership oracles with a margin (distance-like slack
treated as inside).  Each solver refines a symmetric triangulation, labels
vertices by membership, extracts the guaranteed combinatorial certificate,
and converges facet barycenters to a numerical witness point.  Hypothesis
breaches surface as violation reports whose points re-validate against the
oracles alone; exhausted search budgets surface as Inconclusive, never as a
claim of nonexistence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import optimize

from .complexes import (
    SUBDIVISION_DEPTH_CAP,
    InvalidParameterError,
    SymmetricComplex,
    refined_crosspolytope,
    refined_zp_sphere,
    subdivision_tower,
)
from .fan_core import (
    CoverGapError,
    OrbitLabeling,
    SignedLabeling,
    _complementary_edges,
    _orbit_faces,
    default_tie_rule,
    find_target_facet_z2,
    find_target_facet_zp,
    find_target_facets_z2,
    find_target_facets_zp,
    rainbow_labeling,
)

_PROBE_EDGE_LIMIT = 24


# ---------------------------------------------------------------------------
# oracles


@dataclass
class CoverOracle:
    """Closed-set membership oracle on the sphere.

    ``raw`` is a distance-like defect function, nonpositive inside the set;
    membership with slack s means raw(x) <= margin + s.  Oracles built from a
    bare predicate have no defect function and support only the built-in
    margin.
    """

    family: int = 0
    index: int = 0
    margin: float = 0.0
    raw: Callable[[np.ndarray], float] | None = None
    predicate: Callable[[np.ndarray], bool] | None = None
    label: str = ""

    def contains(self, x: np.ndarray, slack: float = 0.0) -> bool:
        # the 1e-12 guard keeps points on a closed-set boundary inside in
        # spite of round-off in the defect evaluation
        if self.raw is not None:
            return float(self.raw(x)) <= self.margin + slack + 1e-12
        assert self.predicate is not None
        return bool(self.predicate(x))

    @property
    def has_residual(self) -> bool:
        return self.raw is not None

    def residual(self, x: np.ndarray) -> float:
        """Minimal slack at which x is inside; 0 means inside at the margin."""
        if self.raw is None:
            raise InvalidParameterError("oracle has no defect function")
        return max(0.0, float(self.raw(x)) - self.margin)


def cap_oracle(center: Sequence[float], radius_deg: float, margin: float = 0.0,
               family: int = 0, index: int = 0) -> CoverOracle:
    """Geodesic cap {x : angle(x, center) <= radius}."""
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    rad = math.radians(radius_deg)

    def raw(x: np.ndarray) -> float:
        return float(np.arccos(np.clip(np.dot(x, c), -1.0, 1.0)) - rad)

    return CoverOracle(family, index, margin, raw=raw,
                       label=f"cap(r={radius_deg})")


def arc_oracle(from_deg: float, to_deg: float, margin: float = 0.0,
               family: int = 0, index: int = 0) -> CoverOracle:
    """Circular arc on S^1 from one angle to another, counterclockwise."""
    if to_deg < from_deg:
        raise InvalidParameterError("arc requires to_deg >= from_deg")
    mid = math.radians((from_deg + to_deg) / 2.0)
    center = (math.cos(mid), math.sin(mid))
    return cap_oracle(center, (to_deg - from_deg) / 2.0, margin, family, index)


def halfspace_oracle(normal: Sequence[float], offset: float, margin: float = 0.0,
                     family: int = 0, index: int = 0) -> CoverOracle:
    """Sphere slice {x : <normal, x> >= offset}; defect measured in value units."""
    n = np.asarray(normal, dtype=float)

    def raw(x: np.ndarray) -> float:
        return float(offset - np.dot(n, x))

    return CoverOracle(family, index, margin, raw=raw, label="halfspace")


@dataclass
class CoverFamilySet:
    """Indexed families of cover oracles; s.A is evaluated as A(s^-1 x)."""

    p: int
    d: int
    families: tuple[tuple[CoverOracle, ...], ...]

    def oracle(self, family: int, index: int) -> CoverOracle:
        return self.families[family - 1][index - 1]

    @property
    def n_families(self) -> int:
        return len(self.families)

    @staticmethod
    def single_z2(sets: Sequence[CoverOracle], copies: int) -> "CoverFamilySet":
        d = len(sets) - 1
        return CoverFamilySet(2, d, tuple(tuple(sets) for _ in range(copies)))


# ---------------------------------------------------------------------------
# results


@dataclass
class RefinementConfig:
    """Refinement budget and tolerances shared by all cover-style solvers."""

    max_depth: int | None = None
    witness_tol: float = 1e-3
    existence_slack: float = 1e-2
    initial: SymmetricComplex | None = None
    polish: bool = True
    facet_budget: int = 50_000
    require_stable_assignment: bool = True

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise InvalidParameterError("max_depth must be >= 1")
        if self.witness_tol <= 0 or self.existence_slack <= 0:
            raise InvalidParameterError("tolerances must be positive")


def _resolve_depth(cfg: RefinementConfig, sphere_dim: int) -> int:
    if cfg.max_depth is not None:
        return min(cfg.max_depth, SUBDIVISION_DEPTH_CAP)
    return {0: 2, 1: 8, 2: 4}.get(sphere_dim, 2)


@dataclass
class CoverWitness:
    """Accepted witness point with per-required-set residual estimates."""

    point: np.ndarray
    assignment: dict | None
    residuals: tuple[float, ...]
    level: int


@dataclass
class DisjointnessViolation:
    set_index: int
    point: np.ndarray
    slack: float


@dataclass
class CrossDisjointnessViolation:
    set_index: int
    family_pos: int
    family_neg: int
    point: np.ndarray
    slack: float


@dataclass
class OrbitIntersectionViolation:
    set_index: int
    point: np.ndarray
    slack: float


@dataclass
class CrossOrbitViolation:
    set_index: int
    families: tuple[int, ...]
    point: np.ndarray
    slack: float


@dataclass
class Inconclusive:
    """Search budget exhausted; carries the best candidate seen, not a proof."""

    best_point: np.ndarray | None
    best_residual: float
    levels: int
    message: str = "depth exhausted"


# ---------------------------------------------------------------------------
# local polish


def minimize_on_sphere(
    fn: Callable[[np.ndarray], float],
    x0: np.ndarray,
    basis: np.ndarray | None = None,
    maxiter: int = 600,
) -> tuple[np.ndarray, float]:
    """Nelder-Mead descent of fn over the unit sphere of a linear span.

    Never returns a worse point than the start.  ``basis`` rows span the
    realization subspace; coordinates outside it are not explored.
    """
    if basis is None:
        basis = np.eye(len(x0))
    z0 = basis @ x0

    def obj(z: np.ndarray) -> float:
        y = z @ basis
        n = float(np.linalg.norm(y))
        if n < 1e-9:
            return 1e9
        return float(fn(y / n))

    res = optimize.minimize(
        obj, z0, method="Nelder-Mead",
        options={"maxiter": maxiter, "fatol": 1e-14, "xatol": 1e-12},
    )
    y = res.x @ basis
    n = float(np.linalg.norm(y))
    v0 = float(fn(x0))
    if n < 1e-9:
        return x0, v0
    xf = y / n
    vf = float(fn(xf))
    return (xf, vf) if vf <= v0 else (x0, v0)


# ---------------------------------------------------------------------------
# labelling helpers (uncolored: the refined complex itself is labelled)


def _signed_cover_labeling(T: SymmetricComplex, oracles: Sequence[CoverOracle],
                           tie_rule=None):
    tie = tie_rule or default_tie_rule
    labels: dict[int, int] = {}
    violation = None
    for rep in T.orbit_representatives:
        x = T.coords[rep]
        options = []
        for i, o in enumerate(oracles, start=1):
            inp = o.contains(x)
            inn = o.contains(-x)
            if inp and inn and violation is None:
                violation = DisjointnessViolation(i, x, 0.0)
            if inp:
                options.append(i)
            if inn:
                options.append(-i)
        if not options:
            raise CoverGapError(rep, 1, x)
        lv = tie(options)
        labels[rep] = lv
        labels[T.action.apply(rep)] = -lv
    return SignedLabeling(labels), violation


def _orbit_cover_labeling(T: SymmetricComplex, oracles: Sequence[CoverOracle],
                          p: int, tie_rule=None):
    tie = tie_rule or default_tie_rule
    labels: dict[int, tuple[int, int]] = {}
    violation = None
    for rep in T.orbit_representatives:
        x = T.coords[rep]
        options = []
        for i, o in enumerate(oracles, start=1):
            members = [o.contains(T.shift_point(x, -g)) for g in range(p)]
            if all(members) and violation is None:
                violation = OrbitIntersectionViolation(i, x, 0.0)
            options.extend((i, g) for g in range(p) if members[g])
        if not options:
            raise CoverGapError(rep, 1, x)
        j, t = tie(options)
        for s in range(p):
            labels[T.action.apply(rep, s)] = (j, (t + s) % p)
    return OrbitLabeling(labels), violation


def _edge_geometry(T: SymmetricComplex, edge: frozenset[int]):
    u, v = sorted(edge, key=T.complex.position.__getitem__)
    xu, xv = T.coords[u], T.coords[v]
    mid = xu + xv
    mid = mid / np.linalg.norm(mid)
    return u, v, xu, xv, mid, float(np.linalg.norm(xu - xv))


# ---------------------------------------------------------------------------
# order-2 solvers


def solve_fan_cover(sets, signs: Sequence[int], cfg: RefinementConfig | None = None):
    """Witness of the intersection of the signed sets, or a disjointness breach.

    ``sets`` is one family of d+1 cover oracles on S^d whose signed copies
    cover the sphere.  Returns a CoverWitness near the intersection of the
    s_i-translates, a DisjointnessViolation exhibiting a point in some
    A_i and -A_i within the existence slack, or Inconclusive.
    """
    oracles = list(sets.families[0]) if isinstance(sets, CoverFamilySet) else list(sets)
    cfg = cfg or RefinementConfig()
    d = len(oracles) - 1
    if len(signs) != d + 1:
        raise InvalidParameterError("need d+1 signs")
    base = _base_fn(cfg, lambda l: refined_crosspolytope(d + 1, l))
    depth = _resolve_depth(cfg, d)
    numeric = all(o.has_residual for o in oracles)
    best_pt, best_res = None, np.inf
    level = 0
    for level in range(depth + 1):
        T = base(level)
        if len(T.complex.facets) > cfg.facet_budget:
            break
        labels, violation = _signed_cover_labeling(T, oracles)
        if violation is not None:
            return violation
        comp = list(_complementary_edges(T, labels.labels))
        for e, j in comp[:_PROBE_EDGE_LIMIT]:
            _, _, _, _, mid, length = _edge_geometry(T, e)
            if length <= cfg.existence_slack:
                return DisjointnessViolation(j, mid, length)
        target = find_target_facet_z2(T, labels, signs)
        if target is not None:
            x = T.facet_barycenter(target.facet)

            def res_fn(y, _o=oracles, _s=signs):
                return max(
                    o.residual(y if s > 0 else -y) for o, s in zip(_o, _s)
                )

            if numeric:
                if cfg.polish:
                    x, _ = minimize_on_sphere(res_fn, x, T.span_basis)
                residuals = tuple(
                    o.residual(x if s > 0 else -x) for o, s in zip(oracles, signs)
                )
            else:
                residuals = tuple(
                    float(np.linalg.norm(x - T.coords[target.matching[s * (i + 1)]]))
                    for i, s in enumerate(signs)
                )
            r = max(residuals)
            if r < best_res:
                best_pt, best_res = x, r
            if r <= cfg.witness_tol:
                return CoverWitness(x, None, residuals, level)
    return Inconclusive(best_pt, best_res, level)


def _probe_cross_z2(T, comp, labels, families: CoverFamilySet, slack_cap: float):
    d = families.d
    lab = labels.labels
    for e, j in comp[:_PROBE_EDGE_LIMIT]:
        u, v, xu, xv, mid, length = _edge_geometry(T, e)
        for x in (xu, xv, mid):
            for i in range(1, d + 2):
                for fp in range(1, families.n_families + 1):
                    if not families.oracle(fp, i).contains(x):
                        continue
                    for fn_ in range(1, families.n_families + 1):
                        if fn_ == fp:
                            continue
                        if families.oracle(fn_, i).contains(-x):
                            return CrossDisjointnessViolation(i, fp, fn_, x, 0.0)
        if length <= slack_cap:
            upos = u if lab[u] > 0 else v
            uneg = v if lab[u] > 0 else u
            fp = len(T.parent_faces[upos])
            fn_ = len(T.parent_faces[uneg])
            if fp != fn_:
                return CrossDisjointnessViolation(j, fp, fn_, mid, length)
    return None


def solve_colorful_fan_cover(families: CoverFamilySet, signs: Sequence[int],
                             cfg: RefinementConfig | None = None,
                             tie_rule=None):
    """Colorful covering witness: a point x and a permutation assigning one
    family per set index, with x near the intersection of the signed sets.

    The permutation must repeat on two consecutive refinement levels and the
    polished barycenter must stabilize before a witness is accepted.
    """
    cfg = cfg or RefinementConfig()
    d = families.d
    if families.n_families != d + 1:
        raise InvalidParameterError("need d+1 families on S^d")
    if len(signs) != d + 1:
        raise InvalidParameterError("need d+1 signs")
    base = _base_fn(cfg, lambda l: refined_crosspolytope(d + 1, l))
    depth = min(_resolve_depth(cfg, d), SUBDIVISION_DEPTH_CAP - 1)
    prev_candidates: dict[tuple, np.ndarray] = {}
    best_pt, best_res = None, np.inf
    level = 0
    for level in range(depth + 1):
        coarse = base(level)
        if len(coarse.complex.facets) * math.factorial(d + 1) > cfg.facet_budget:
            break
        fine = base(level + 1)
        labels = rainbow_labeling(fine, families, tie_rule)
        comp = list(_complementary_edges(fine, labels.labels))
        if comp:
            viol = _probe_cross_z2(fine, comp, labels, families, cfg.existence_slack)
            if viol is not None:
                return viol
        cur_candidates: dict[tuple, np.ndarray] = {}
        accepted = None
        for target in find_target_facets_z2(fine, labels, signs):
            pi = {
                i + 1: len(fine.parent_faces[target.matching[s * (i + 1)]])
                for i, s in enumerate(signs)
            }
            key = tuple(sorted(pi.items()))
            if key in cur_candidates:
                continue
            x = fine.facet_barycenter(target.facet)
            numeric = all(
                families.oracle(pi[i + 1], i + 1).has_residual for i in range(d + 1)
            )
            stable = False
            if numeric:
                def res_fn(y, _pi=pi):
                    return max(
                        families.oracle(_pi[i + 1], i + 1).residual(
                            y if signs[i] > 0 else -y
                        )
                        for i in range(d + 1)
                    )

                if cfg.polish:
                    x, _ = minimize_on_sphere(res_fn, x, fine.span_basis)
                if key in prev_candidates:
                    # A previous-level witness for the same assignment that
                    # still meets the tolerance is kept verbatim, so the
                    # displacement between levels is zero by construction.
                    xp = prev_candidates[key]
                    if res_fn(xp) <= cfg.witness_tol:
                        x = xp
                    stable = float(np.linalg.norm(x - xp)) < cfg.witness_tol
                residuals = tuple(
                    families.oracle(pi[i + 1], i + 1).residual(
                        x if signs[i] > 0 else -x
                    )
                    for i in range(d + 1)
                )
            else:
                residuals = tuple(
                    float(np.linalg.norm(x - fine.coords[target.matching[s * (i + 1)]]))
                    for i, s in enumerate(signs)
                )
                if key in prev_candidates:
                    stable = float(np.linalg.norm(x - prev_candidates[key])) < cfg.witness_tol
            cur_candidates[key] = x
            r = max(residuals)
            if r < best_res:
                best_pt, best_res = x, r
            if r <= cfg.witness_tol and (stable or not cfg.require_stable_assignment):
                if accepted is None:
                    accepted = CoverWitness(x, pi, residuals, level)
        if accepted is not None:
            return accepted
        prev_candidates = cur_candidates
    return Inconclusive(best_pt, best_res, level)


# ---------------------------------------------------------------------------
# order-p solvers


def solve_zp_cover(sets, shifts: Sequence[int], p: int, d: int,
                   cfg: RefinementConfig | None = None):
    """Witness near the intersection of all non-forbidden translates s.A_i.

    ``sets`` is one family of d oracles on the join sphere S^((p-1)d-1); the
    translates of each set must cover the sphere and no set may meet all of
    its own translates.  A full-orbit intersection within the existence slack
    is reported as OrbitIntersectionViolation.
    """
    oracles = list(sets.families[0]) if isinstance(sets, CoverFamilySet) else list(sets)
    cfg = cfg or RefinementConfig()
    if len(oracles) != d:
        raise InvalidParameterError("need d oracles")
    if len(shifts) != d:
        raise InvalidParameterError("need d shifts")
    n = (p - 1) * d - 1
    base = _base_fn(cfg, lambda l: refined_zp_sphere(p, d, l))
    depth = _resolve_depth(cfg, n)
    numeric = all(o.has_residual for o in oracles)
    required = [(i, s) for i in range(1, d + 1) for s in range(p) if s != shifts[i - 1] % p]
    best_pt, best_res = None, np.inf
    level = 0
    for level in range(depth + 1):
        T = base(level)
        if len(T.complex.facets) > cfg.facet_budget:
            break
        labels, violation = _orbit_cover_labeling(T, oracles, p)
        if violation is not None:
            return violation
        for face, j in _orbit_faces(T, labels.labels, d, p):
            bary = T.facet_barycenter(face)
            diam = T.face_diameter(face)
            if all(oracles[j - 1].contains(T.shift_point(bary, -g)) for g in range(p)):
                return OrbitIntersectionViolation(j, bary, 0.0)
            if diam <= cfg.existence_slack:
                return OrbitIntersectionViolation(j, bary, diam)
        target = find_target_facet_zp(T, labels, shifts, d)
        if target is None:
            continue
        x = T.facet_barycenter(target.facet)

        def res_fn(y, _req=required):
            return max(
                oracles[i - 1].residual(T.shift_point(y, -s)) for i, s in _req
            )

        if numeric:
            if cfg.polish:
                x, _ = minimize_on_sphere(res_fn, x, T.span_basis)
            residuals = tuple(
                oracles[i - 1].residual(T.shift_point(x, -s)) for i, s in required
            )
        else:
            residuals = tuple(
                float(np.linalg.norm(x - T.coords[target.matching[(i, s)]]))
                for i, s in required
            )
        r = max(residuals)
        if r < best_res:
            best_pt, best_res = x, r
        if r <= cfg.witness_tol:
            return CoverWitness(x, None, residuals, level)
    return Inconclusive(best_pt, best_res, level)


def solve_colorful_zp_cover(families: CoverFamilySet, shifts: Sequence[int],
                            cfg: RefinementConfig | None = None, tie_rule=None):
    """Colorful generalization for prime order: witness plus a bijection from
    required (set, shift) pairs to families."""
    cfg = cfg or RefinementConfig()
    p, d = families.p, families.d
    n = (p - 1) * d - 1
    if families.n_families != n + 1:
        raise InvalidParameterError("need n+1 families")
    base = _base_fn(cfg, lambda l: refined_zp_sphere(p, d, l))
    depth = min(_resolve_depth(cfg, n), SUBDIVISION_DEPTH_CAP - 1)
    required = [(i, s) for i in range(1, d + 1) for s in range(p) if s != shifts[i - 1] % p]
    prev_candidates: dict[tuple, np.ndarray] = {}
    best_pt, best_res = None, np.inf
    level = 0
    for level in range(depth + 1):
        coarse = base(level)
        if len(coarse.complex.facets) * math.factorial(n + 1) > cfg.facet_budget:
            break
        fine = base(level + 1)
        labels = rainbow_labeling(fine, families, tie_rule)
        for face, j in _orbit_faces(fine, labels.labels, d, p):
            fams = tuple(
                len(fine.parent_faces[v])
                for v in sorted(face, key=lambda u: labels.labels[u][1])
            )
            bary = fine.facet_barycenter(face)
            diam = fine.face_diameter(face)
            exact = all(
                families.oracle(fams[g], j).contains(fine.shift_point(bary, -g))
                for g in range(p)
            )
            if exact:
                return CrossOrbitViolation(j, fams, bary, 0.0)
            if diam <= cfg.existence_slack:
                return CrossOrbitViolation(j, fams, bary, diam)
        cur_candidates: dict[tuple, np.ndarray] = {}
        accepted = None
        for target in find_target_facets_zp(fine, labels, shifts, d):
            pi = {
                (i, s): len(fine.parent_faces[target.matching[(i, s)]])
                for i, s in required
            }
            key = tuple(sorted(pi.items()))
            if key in cur_candidates:
                continue
            x = fine.facet_barycenter(target.facet)
            numeric = all(families.oracle(pi[k], k[0]).has_residual for k in pi)
            stable = False
            if numeric:
                def res_fn(y, _pi=pi):
                    return max(
                        families.oracle(_pi[(i, s)], i).residual(
                            fine.shift_point(y, -s)
                        )
                        for i, s in _pi
                    )

                if cfg.polish:
                    x, _ = minimize_on_sphere(res_fn, x, fine.span_basis)
                if key in prev_candidates:
                    xp = prev_candidates[key]
                    if res_fn(xp) <= cfg.witness_tol:
                        x = xp
                    stable = float(np.linalg.norm(x - xp)) < cfg.witness_tol
                residuals = tuple(
                    families.oracle(pi[(i, s)], i).residual(fine.shift_point(x, -s))
                    for i, s in required
                )
            else:
                residuals = tuple(
                    float(np.linalg.norm(x - fine.coords[target.matching[(i, s)]]))
                    for i, s in required
                )
                if key in prev_candidates:
                    stable = float(np.linalg.norm(x - prev_candidates[key])) < cfg.witness_tol
            cur_candidates[key] = x
            r = max(residuals)
            if r < best_res:
                best_pt, best_res = x, r
            if r <= cfg.witness_tol and (stable or not cfg.require_stable_assignment):
                if accepted is None:
                    accepted = CoverWitness(x, pi, residuals, level)
        if accepted is not None:
            return accepted
        prev_candidates = cur_candidates
    return Inconclusive(best_pt, best_res, level)


def _base_fn(cfg: RefinementConfig, default: Callable[[int], SymmetricComplex]):
    if cfg.initial is not None:
        ini = cfg.initial
        return lambda l: subdivision_tower(ini, l)
    return default
