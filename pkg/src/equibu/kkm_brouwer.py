"""Simplex-side solvers built on the deleted-join model of the sphere.

The deleted join of two copies of the d-simplex is combinatorially the
boundary of the (d+1)-crosspolytope; a pair of simplex points with disjoint
supports and a mixing weight maps to a sphere point and back.  On top of
this identification sit the Radon/covering alternative for a partition of
unity, the colorful KKM solver for face-preserving maps and for covers, and
the colorful Brouwer solver for stochastic matrix fields.
"""
from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .complexes import InvalidParameterError
from .cover_solvers import Inconclusive, RefinementConfig, minimize_on_sphere
from .matrix_bu import (
    BUWitness,
    OddMatrixField,
    Transversal,
    ZeroWitness,
    classical_bu_zero,
    solve_colorful_bu,
)

SIMPLEX_SUM_TOL = 1e-12
COLUMN_SIGN_TOL = 1e-7


class HypothesisViolationError(RuntimeError):
    """A spot check found the input violating a required hypothesis."""

    def __init__(self, message: str, **detail):
        super().__init__(message)
        self.detail = detail


# ---------------------------------------------------------------------------
# simplex points and the deleted-join chart


@dataclass
class SimplexPoint:
    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)

    @property
    def support(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.nonzero(self.coords > 1e-12)[0])

    def validate(self):
        if np.any(self.coords < -1e-12) or abs(float(self.coords.sum()) - 1.0) > SIMPLEX_SUM_TOL:
            raise InvalidParameterError("not a point of the simplex")


def simplex_point(*coords: float) -> SimplexPoint:
    return SimplexPoint(np.array(coords, dtype=float))


@dataclass
class DeletedJoinPoint:
    """Mixing weight and two simplex points with disjoint supports."""

    lam: float
    x: SimplexPoint
    y: SimplexPoint


def encode_join_point(dj: DeletedJoinPoint) -> np.ndarray:
    """Map (lam, x, y) to the sphere as normalize(lam*x - (1-lam)*y)."""
    v = dj.lam * dj.x.coords - (1.0 - dj.lam) * dj.y.coords
    n = float(np.linalg.norm(v))
    if n < 1e-15:
        raise InvalidParameterError("degenerate join point")
    return v / n


def decode_join_point(u: np.ndarray) -> tuple[float, float, SimplexPoint, SimplexPoint]:
    """Split a nonzero vector into its positive and negative simplex parts.

    Returns (lam, mu, x, y) with lam + mu = 1 up to round-off; when one part
    vanishes the corresponding simplex point defaults to the barycenter and
    carries zero weight.
    """
    u = np.asarray(u, dtype=float)
    l1 = float(np.sum(np.abs(u)))
    if l1 < 1e-15:
        raise InvalidParameterError("cannot decode the zero vector")
    w = u / l1
    pos = np.clip(w, 0.0, None)
    neg = np.clip(-w, 0.0, None)
    lam = float(pos.sum())
    mu = float(neg.sum())
    n = len(u)
    bary = np.full(n, 1.0 / n)
    x = SimplexPoint(pos / lam if lam > 1e-15 else bary)
    y = SimplexPoint(neg / mu if mu > 1e-15 else bary)
    return lam, mu, x, y


# ---------------------------------------------------------------------------
# partitions of unity and covers


@dataclass
class UnityPartition:
    """Map from the simplex to itself given by coordinate functions."""

    fn: Callable[[np.ndarray], np.ndarray]
    d: int

    def eval(self, x: np.ndarray) -> np.ndarray:
        v = np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)
        if v.shape != (self.d + 1,):
            raise InvalidParameterError("partition has wrong arity")
        if np.any(v < -1e-9) or abs(float(v.sum()) - 1.0) > 1e-9:
            raise InvalidParameterError("partition values leave the simplex")
        return v


@dataclass
class SimplexCoverSet:
    """Set on the simplex given by a slack function, nonnegative inside."""

    slack: Callable[[np.ndarray], float]
    label: str = ""

    def value(self, x: np.ndarray) -> float:
        return float(self.slack(np.asarray(x, dtype=float)))

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return self.value(x) >= -tol


def _face_sample_points(d: int):
    """Barycenters and pairwise midpoints of every nonempty face."""
    for r in range(1, d + 2):
        for J in itertools.combinations(range(d + 1), r):
            pt = np.zeros(d + 1)
            for j in J:
                pt[j] = 1.0 / r
            yield frozenset(J), pt
            for a, b in itertools.combinations(J, 2):
                mid = np.zeros(d + 1)
                mid[a] = mid[b] = 0.5
                yield frozenset(J), mid


def check_face_preservation(maps: Sequence[UnityPartition], d: int):
    for i, m in enumerate(maps, start=1):
        for J, pt in _face_sample_points(d):
            v = m.eval(pt)
            outside = [j for j in range(d + 1) if j not in J and v[j] > 1e-9]
            if outside:
                raise HypothesisViolationError(
                    f"map {i} leaves face {sorted(J)}",
                    map_index=i, face=sorted(J), point=pt,
                )


def check_kkm_property(cover: Sequence[SimplexCoverSet], d: int, index: int):
    for J, pt in _face_sample_points(d):
        if max(cover[j].value(pt) for j in J) < -1e-9:
            raise HypothesisViolationError(
                f"cover {index} misses face {sorted(J)}",
                cover_index=index, face=sorted(J), point=pt,
            )


def subordinate_partition(cover: Sequence[SimplexCoverSet], d: int,
                          shift: float) -> UnityPartition:
    """Partition of unity subordinate to the shifted-open cover.

    Weight j is x_j times the clipped slack, so faces map into themselves
    exactly: a vanishing coordinate forces a vanishing weight.
    """

    def fn(x: np.ndarray) -> np.ndarray:
        w = np.array([
            x[j] * max(cover[j].value(x) + shift, 0.0) for j in range(d + 1)
        ])
        s = float(w.sum())
        if s <= 0.0:
            raise HypothesisViolationError(
                "cover leaves a point unweighted", point=x
            )
        return w / s

    return UnityPartition(fn, d)


# ---------------------------------------------------------------------------
# witnesses


@dataclass
class RadonPartition:
    J: frozenset[int]
    J_complement: frozenset[int]
    x: SimplexPoint
    y: SimplexPoint
    lam: float
    gap: float


@dataclass
class Intersection:
    point: np.ndarray
    values: np.ndarray


@dataclass
class KKMTransversal:
    point: np.ndarray
    permutation: dict[int, int]   # map index (1-based) -> argmax coordinate (1-based)
    values: np.ndarray            # matrix of partition values at the point


@dataclass
class CoverIntersection:
    point: np.ndarray
    permutation: dict[int, int]   # cover index (1-based) -> set index (1-based)
    slacks: tuple[float, ...]


@dataclass
class BrouwerColorful:
    point: np.ndarray
    permutation: dict[int, int]   # row (1-based) -> column (1-based)
    slacks: tuple[float, ...]


def minimize_on_simplex(fn: Callable[[np.ndarray], float], x0: np.ndarray,
                        maxiter: int = 600) -> tuple[np.ndarray, float]:
    """Nelder-Mead descent over the simplex via the |z| / sum|z| chart."""

    def to_simplex(z: np.ndarray) -> np.ndarray:
        w = np.abs(z)
        s = float(w.sum())
        if s < 1e-12:
            return np.full(len(z), 1.0 / len(z))
        return w / s

    res = optimize.minimize(
        lambda z: float(fn(to_simplex(z))),
        np.asarray(x0, dtype=float) + 1e-12,
        method="Nelder-Mead",
        options={"maxiter": maxiter, "fatol": 1e-14, "xatol": 1e-12},
    )
    xf = to_simplex(res.x)
    v0 = float(fn(np.asarray(x0, dtype=float)))
    vf = float(fn(xf))
    return (xf, vf) if vf <= v0 else (np.asarray(x0, dtype=float), v0)


# ---------------------------------------------------------------------------
# the Radon / covering alternative


def radon_kkm_alternative(alpha, d: int, cfg: RefinementConfig | None = None):
    """Either a pair of disjoint faces with a common image value, or a point
    where every partition weight is strictly positive.

    The partition map is lifted to the deleted-join sphere as the weighted
    difference of its two arguments and pushed to a zero of the quotient by
    the diagonal; the diagonal value at the zero decides the branch.
    """
    cfg = cfg or RefinementConfig()
    part = alpha if isinstance(alpha, UnityPartition) else UnityPartition(alpha, d)

    def big(u: np.ndarray) -> np.ndarray:
        lam, mu, x, y = decode_join_point(u)
        ax = part.eval(x.coords) if lam > 1e-15 else np.zeros(d + 1)
        ay = part.eval(y.coords) if mu > 1e-15 else np.zeros(d + 1)
        return lam * ax - mu * ay

    def proj(u: np.ndarray) -> np.ndarray:
        g = big(u)
        return g[:-1] - g[-1]

    res = classical_bu_zero(proj, d, cfg)
    if not isinstance(res, ZeroWitness):
        return res
    u = res.point
    g = big(u)
    c = float(np.mean(g))
    lam, mu, x, y = decode_join_point(u)
    if abs(c) <= cfg.witness_tol:
        ax = part.eval(x.coords)
        ay = part.eval(y.coords)
        gap = float(np.max(np.abs(ax - ay)))
        J = x.support
        return RadonPartition(J, frozenset(range(d + 1)) - J, x, y, lam, gap)
    pt = x.coords if c > 0 else y.coords
    return Intersection(pt, part.eval(pt))


# ---------------------------------------------------------------------------
# colorful KKM for maps


def _kkm_field(maps: Sequence[UnityPartition], d: int) -> OddMatrixField:
    def raw(u: np.ndarray) -> np.ndarray:
        lam, mu, x, y = decode_join_point(u)
        ax = (
            np.stack([m.eval(x.coords) for m in maps])
            if lam > 1e-15
            else np.zeros((d + 1, d + 1))
        )
        ay = (
            np.stack([m.eval(y.coords) for m in maps])
            if mu > 1e-15
            else np.zeros((d + 1, d + 1))
        )
        m = lam * ax - mu * ay
        # face preservation makes every column single-signed; a mixed column
        # means the hypothesis failed between the sampled spot checks
        for j in range(d + 1):
            col = m[:, j]
            if col.min() < -COLUMN_SIGN_TOL and col.max() > COLUMN_SIGN_TOL:
                raise HypothesisViolationError(
                    "matrix column changes sign", column=j, point=u
                )
        return m

    return OddMatrixField(raw, d + 1)


def kkm_residual(maps: Sequence[UnityPartition], x: np.ndarray,
                 perm: dict[int, int]) -> float:
    r = 0.0
    for i, m in enumerate(maps, start=1):
        v = m.eval(x)
        r = max(r, float(np.max(v) - v[perm[i] - 1]))
    return r


def solve_colorful_kkm(maps, d: int, cfg: RefinementConfig | None = None,
                       check_hypothesis: bool = True):
    """Point and permutation with each map's assigned coordinate maximal.

    Maps must send every face of the simplex into itself (spot-checked).
    """
    cfg = cfg or RefinementConfig()
    parts = [
        m if isinstance(m, UnityPartition) else UnityPartition(m, d) for m in maps
    ]
    if len(parts) != d + 1:
        raise InvalidParameterError("need d+1 maps")
    if check_hypothesis:
        check_face_preservation(parts, d)
    fld = _kkm_field(parts, d)
    res = solve_colorful_bu(fld, d, cfg, hunt_badrows=False)
    if isinstance(res, Inconclusive):
        if res.best_point is None:
            return res
        lam, mu, x, y = decode_join_point(res.best_point)
        pt = x.coords if lam >= mu else y.coords
        return Inconclusive(pt, res.best_residual, res.levels, res.message)
    if not isinstance(res, BUWitness):
        return res
    assert isinstance(res.outcome, Transversal)
    pi_bu = res.outcome.permutation      # set index -> row (map index)
    perm = {pi_bu[i]: i for i in pi_bu}  # map index -> coordinate
    lam, mu, x, y = decode_join_point(res.point)
    pt = x.coords if lam >= mu else y.coords
    pt, r = minimize_on_simplex(lambda z: kkm_residual(parts, z, perm), pt)
    if r <= cfg.witness_tol:
        vals = np.stack([m.eval(pt) for m in parts])
        return KKMTransversal(pt, perm, vals)
    return Inconclusive(pt, r, 0, "argmax pattern did not reach tolerance")


# ---------------------------------------------------------------------------
# colorful KKM for covers and colorful Brouwer


_SHIFT_SCHEDULE = (1e-2, 2.5e-3, 6.25e-4)


def solve_colorful_kkm_covers(covers, d: int, cfg: RefinementConfig | None = None):
    """Point in one set of each cover family, sets forming a permutation.

    Each family must satisfy the KKM condition: every face is covered by the
    sets of its own vertices (spot-checked on face barycenters / midpoints).
    Closed covers are outer-approximated by shifted-open covers along a
    shrinking schedule, and memberships are re-checked against the original
    slack functions.
    """
    cfg = cfg or RefinementConfig()
    fams = []
    for fam in covers:
        fams.append([
            s if isinstance(s, SimplexCoverSet) else SimplexCoverSet(s) for s in fam
        ])
    if len(fams) != d + 1 or any(len(f) != d + 1 for f in fams):
        raise InvalidParameterError("need d+1 families of d+1 sets")
    for i, fam in enumerate(fams, start=1):
        check_kkm_property(fam, d, i)

    def worst_for(perm: dict[int, int]):
        def worst(x: np.ndarray) -> float:
            return -min(fams[i - 1][perm[i] - 1].value(x) for i in perm)

        return worst

    all_perms = [
        {i + 1: p[i] + 1 for i in range(d + 1)}
        for p in itertools.permutations(range(d + 1))
    ]
    best = Inconclusive(None, np.inf, 0)
    # the argmax search only seeds the membership polish below, so its own
    # refinement depth is kept shallow
    inner_cfg = dataclasses.replace(
        cfg, max_depth=cfg.max_depth if cfg.max_depth is not None else 2
    )
    for shift in _SHIFT_SCHEDULE:
        maps = [subordinate_partition(fam, d, shift) for fam in fams]
        res = solve_colorful_kkm(maps, d, inner_cfg, check_hypothesis=False)
        seeds = []
        lead_perm = None
        if isinstance(res, KKMTransversal):
            seeds.append(res.point)
            lead_perm = res.permutation
        elif isinstance(res, Inconclusive) and res.best_point is not None:
            seeds.append(np.asarray(res.best_point, dtype=float))
        seeds.append(np.full(d + 1, 1.0 / (d + 1)))
        for seed in seeds:
            # acceptance is a membership re-check against the original slack
            # functions, so any assignment that verifies is a sound witness
            perms = sorted(all_perms, key=lambda p: worst_for(p)(seed))
            if lead_perm is not None and lead_perm in perms:
                perms.remove(lead_perm)
                perms.insert(0, lead_perm)
            for perm in perms[:3]:
                pt, neg = minimize_on_simplex(worst_for(perm), seed)
                if neg <= cfg.witness_tol:
                    slacks = tuple(
                        fams[i - 1][perm[i] - 1].value(pt) for i in sorted(perm)
                    )
                    return CoverIntersection(pt, perm, slacks)
                if neg < best.best_residual:
                    best = Inconclusive(pt, neg, 0, "membership re-check failed")
    return best


@dataclass
class StochasticMatrixField:
    """Simplex-to-stochastic-matrix oracle with row validation."""

    fn: Callable[[np.ndarray], np.ndarray]
    d: int

    def __post_init__(self):
        self._cache: dict[bytes, np.ndarray] = {}

    def eval(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        m = np.asarray(self.fn(x), dtype=float)
        if m.shape != (self.d + 1, self.d + 1):
            raise InvalidParameterError("field has wrong shape")
        if np.any(m < -1e-12):
            raise InvalidParameterError("stochastic field has negative entries")
        if np.max(np.abs(m.sum(axis=1) - 1.0)) > 1e-9:
            raise InvalidParameterError("stochastic field rows do not sum to 1")
        if len(self._cache) > 4096:
            self._cache.clear()
        self._cache[key] = m
        return m


def solve_colorful_brouwer(fld, d: int, cfg: RefinementConfig | None = None):
    """Point x and permutation with f_{i pi(i)}(x) <= x_{pi(i)} for all rows.

    With all rows equal this pins a fixed point of the common row map.  The
    covering sets {f_ij(x) <= x_j} satisfy the KKM condition automatically
    because rows are stochastic.
    """
    cfg = cfg or RefinementConfig()
    sf = fld if isinstance(fld, StochasticMatrixField) else StochasticMatrixField(fld, d)

    def make_set(i: int, j: int) -> SimplexCoverSet:
        return SimplexCoverSet(
            lambda x, _i=i, _j=j: float(x[_j] - sf.eval(x)[_i, _j]),
            label=f"f[{i},{j}] <= x[{j}]",
        )

    covers = [[make_set(i, j) for j in range(d + 1)] for i in range(d + 1)]
    res = solve_colorful_kkm_covers(covers, d, cfg)
    if not isinstance(res, CoverIntersection):
        return res
    perm = res.permutation

    def brouwer_residual(x: np.ndarray) -> float:
        m = sf.eval(x)
        return max(float(m[i - 1, perm[i] - 1] - x[perm[i] - 1]) for i in perm)

    pt, r = minimize_on_simplex(brouwer_residual, res.point)
    if r <= cfg.witness_tol:
        slacks = tuple(
            float(pt[perm[i] - 1] - sf.eval(pt)[i - 1, perm[i] - 1])
            for i in sorted(perm)
        )
        return BrouwerColorful(pt, perm, slacks)
    return Inconclusive(pt, r, 0, "row inequalities did not reach tolerance")
