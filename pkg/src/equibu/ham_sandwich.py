"""Measure-partition solvers: colorful and equalizing hyperplane cuts.

Point clouds are smoothed with a narrow linear ramp across the hyperplane
boundary, which restores the continuity the existence arguments need while
keeping evaluation exact and cheap.  Oriented hyperplanes are parameterized
by unit vectors u = (u_0, u_1..u_d) with positive halfspace
{x : u_1 x_1 + ... + u_d x_d <= u_0}; the poles u_0 = +-1 denote the whole
space and the empty set.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize

from .complexes import InvalidParameterError
from .cover_solvers import Inconclusive, RefinementConfig, minimize_on_sphere
from .matrix_bu import (
    BadRows,
    BUWitness,
    OddMatrixField,
    Transversal,
    badrows_best,
    solve_colorful_bu,
    transversal_residual,
)

POLE_EPS = 1e-12


class InvalidAnchorError(RuntimeError):
    """A sampled hyperplane through the anchor meets every support."""

    def __init__(self, direction: np.ndarray):
        self.direction = direction
        super().__init__("a hyperplane through the anchor intersects all supports")


# ---------------------------------------------------------------------------
# measures and halfspace evaluation


@dataclass
class SmoothedPointMeasure:
    """Weighted point cloud with a linear ramp of width delta at the cut."""

    points: np.ndarray
    weights: np.ndarray
    delta: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.delta <= 0:
            raise InvalidParameterError("ramp width delta must be positive")
        if len(self.points) != len(self.weights):
            raise InvalidParameterError("points and weights differ in length")
        if np.any(self.weights < 0):
            raise InvalidParameterError("weights must be positive")

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def dim(self) -> int:
        return self.points.shape[1] if self.points.ndim == 2 else 0


def zero_measure(d: int, delta: float = 1e-3) -> SmoothedPointMeasure:
    return SmoothedPointMeasure(np.zeros((0, d)), np.zeros(0), delta)


def cloud_diameter(measures: Sequence[SmoothedPointMeasure]) -> float:
    pts = [m.points for m in measures if len(m.points)]
    if not pts:
        return 1.0
    allp = np.concatenate(pts, axis=0)
    span = allp.max(axis=0) - allp.min(axis=0)
    return max(float(np.linalg.norm(span)), 1e-9)


def point_cloud_measure(points, weights=None, delta=None,
                        ref_diameter: float | None = None) -> SmoothedPointMeasure:
    pts = np.asarray(points, dtype=float)
    w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=float)
    if delta is None:
        diam = ref_diameter
        if diam is None:
            span = pts.max(axis=0) - pts.min(axis=0)
            diam = max(float(np.linalg.norm(span)), 1e-9)
        delta = 1e-3 * diam
    return SmoothedPointMeasure(pts, w, delta)


def halfspace_value(m: SmoothedPointMeasure, u: np.ndarray) -> float:
    """Ramped mass of the positive halfspace of u.

    At the poles (vanishing normal) the continuous extension is the total
    mass for u_0 > 0 and zero for u_0 < 0.
    """
    u = np.asarray(u, dtype=float)
    if len(m.points) == 0:
        return 0.0
    normal = u[1:]
    nn = float(np.linalg.norm(normal))
    if nn <= POLE_EPS:
        return m.mass if u[0] > 0 else 0.0
    t = (u[0] - m.points @ normal) / (m.delta * nn) + 0.5
    return float(m.weights @ np.clip(t, 0.0, 1.0))


def halfspace_diff(m: SmoothedPointMeasure, u: np.ndarray) -> float:
    """mu(H+) - mu(H-), evaluated through the ramp."""
    return 2.0 * halfspace_value(m, u) - m.mass


@dataclass
class OrientedHyperplane:
    u: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.u = self.u / np.linalg.norm(self.u)

    @property
    def normal(self) -> np.ndarray:
        return self.u[1:]

    @property
    def offset(self) -> float:
        return float(self.u[0])

    def side(self, x: np.ndarray) -> float:
        """Negative inside the positive halfspace, zero on the boundary."""
        return float(x @ self.normal - self.offset)


@dataclass
class MeasureFamilySet:
    families: tuple[tuple[SmoothedPointMeasure, ...], ...]
    d: int


def measure_matrix_field(fams: MeasureFamilySet) -> OddMatrixField:
    d = fams.d

    def raw(u: np.ndarray) -> np.ndarray:
        out = np.empty((d + 1, d + 1))
        for j, family in enumerate(fams.families):
            for i, m in enumerate(family):
                out[j, i] = halfspace_value(m, u) - 0.5 * m.mass
        return out

    return OddMatrixField(raw, d + 1)


# ---------------------------------------------------------------------------
# colorful and equalizing solvers


@dataclass
class HSWitness:
    u: np.ndarray
    permutation: dict[int, int]   # measure index (1-based) -> family (1-based)
    residual_matrix: np.ndarray   # r[j, i] = mu_i^(j)(H+) - mass/2
    tol: float


@dataclass
class OppositePairReport:
    """One measure index maximizing in one family while minimizing in another."""

    measure_index: int
    family_max: int
    family_min: int
    u: np.ndarray
    tol: float


def _with_delta(m: SmoothedPointMeasure, delta: float) -> SmoothedPointMeasure:
    return SmoothedPointMeasure(m.points, m.weights, max(m.delta, delta))


def _delta_stages(measures: Sequence[SmoothedPointMeasure],
                  frac: float = 0.02, shrink: float = 4.0) -> list[float]:
    """Descending ramp widths from a coarse fraction of the diameter down to
    the measures' own widths; narrow ramps make halfspace masses a staircase
    that defeats local descent, so searches anneal through this schedule."""
    base = max(m.delta for m in measures)
    cur = max(frac * cloud_diameter(measures), base)
    stages = []
    while cur > base * 1.0001:
        stages.append(cur)
        cur /= shrink
    stages.append(base)
    return stages


def _widened_families(fams: MeasureFamilySet, delta: float) -> MeasureFamilySet:
    return MeasureFamilySet(
        tuple(tuple(_with_delta(m, delta) for m in f) for f in fams.families),
        fams.d,
    )


def solve_colorful_hs(fams: MeasureFamilySet, cfg: RefinementConfig | None = None):
    """Colorful cut: a hyperplane and a permutation making each measure the
    maximizer of its assigned family, or a maximize/minimize clash report.

    The refinement search runs on ramp-widened measures and the candidate is
    annealed down to the original widths; acceptance is always against the
    original measures.
    """
    cfg = cfg or RefinementConfig()
    d = fams.d
    if len(fams.families) != d + 1 or any(len(f) != d + 1 for f in fams.families):
        raise InvalidParameterError("need d+1 families of d+1 measures")
    all_measures = [m for f in fams.families for m in f]
    stages = _delta_stages(all_measures)
    fld_search = measure_matrix_field(_widened_families(fams, stages[0]))
    res = solve_colorful_bu(fld_search, d, cfg)
    fld = measure_matrix_field(fams)
    tol = cfg.witness_tol
    if isinstance(res, Inconclusive):
        return res
    u = res.point
    if isinstance(res.outcome, Transversal):
        pi = res.outcome.permutation
        for dl in stages[1:]:
            fld_s = measure_matrix_field(_widened_families(fams, dl))
            u, _ = minimize_on_sphere(
                lambda y: transversal_residual(fld_s, y, pi), u
            )
        r = transversal_residual(fld, u, pi)
        if r > tol:
            return Inconclusive(u, r, 0, "annealing lost the transversal")
        rmat = np.array([
            [halfspace_value(m, u) - 0.5 * m.mass for m in family]
            for family in fams.families
        ])
        return HSWitness(u, pi, rmat, tol)
    for dl in stages[1:]:
        fld_s = measure_matrix_field(_widened_families(fams, dl))
        u, _ = minimize_on_sphere(lambda y: badrows_best(fld_s, y)[0], u)
    r, rows, col = badrows_best(fld, u)
    if r > tol:
        return Inconclusive(u, r, 0, "annealing lost the row clash")
    m = fld.eval(u)
    a, b = rows
    if m[a, col] >= m[b, col]:
        fmax, fmin = a + 1, b + 1
    else:
        fmax, fmin = b + 1, a + 1
    return OppositePairReport(col + 1, fmax, fmin, u, tol)


@dataclass
class EqualizingWitness:
    u: np.ndarray
    diffs: tuple[float, ...]      # mu_i(H+) - mu_i(H-) per measure
    spread: float


def solve_equalizing_hs(measures: Sequence[SmoothedPointMeasure],
                        cfg: RefinementConfig | None = None):
    """Hyperplane giving every measure the same signed halfspace difference.

    Takes up to d+1 measures in R^d; short lists are padded with zero
    measures, whose difference vanishes identically, so the returned cut
    bisects every given measure in that case.
    """
    cfg = cfg or RefinementConfig()
    dims = {m.dim for m in measures if len(m.points)}
    if len(dims) != 1:
        raise InvalidParameterError("measures must share one ambient dimension")
    d = dims.pop()
    if len(measures) > d + 1:
        raise InvalidParameterError(f"need at most {d + 1} measures in R^{d}")
    padded = list(measures) + [
        zero_measure(d) for _ in range(d + 1 - len(measures))
    ]
    fams = MeasureFamilySet(tuple(tuple(padded) for _ in range(d + 1)), d)
    res = solve_colorful_hs(fams, cfg)
    if isinstance(res, (HSWitness, OppositePairReport)):
        seed = res.u
    elif isinstance(res, Inconclusive) and res.best_point is not None:
        seed = res.best_point
    else:
        return res

    def spread_at(delta: float):
        ms = [_with_delta(m, delta) for m in padded]

        def spread(u: np.ndarray) -> float:
            diffs = [halfspace_diff(m, u) for m in ms]
            return max(diffs) - min(diffs)

        return spread

    u = seed
    if cfg.polish:
        for dl in _delta_stages(padded):
            u, _ = minimize_on_sphere(spread_at(dl), u)
    s = spread_at(0.0)(u)
    if s <= cfg.witness_tol:
        return EqualizingWitness(u, tuple(halfspace_diff(m, u) for m in measures), s)
    return Inconclusive(u, s, 0, "difference spread did not reach tolerance")


# ---------------------------------------------------------------------------
# prescribed fractions


@dataclass
class FractionCut:
    u: np.ndarray
    fractions: tuple[float, ...]
    target: tuple[float, ...]
    residual: float
    ball_radius: float


def _anchor_directions(d: int, count: int = 64) -> np.ndarray:
    if d == 1:
        return np.array([[1.0]])
    if d == 2:
        ang = np.linspace(0.0, np.pi, count, endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    rng = np.random.default_rng(2024)
    dirs = rng.normal(size=(count, d))
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def anchor_clearance(measures: Sequence[SmoothedPointMeasure],
                     anchor: np.ndarray, count: int = 64) -> float:
    """Largest slab half-width around the anchor avoided by hyperplanes that
    would meet every support, over a deterministic direction sample."""
    anchor = np.asarray(anchor, dtype=float)
    d = anchor.shape[0]
    eps = np.inf
    for w in _anchor_directions(d, count):
        lo, hi = -np.inf, np.inf
        for m in measures:
            proj = m.points @ w
            lo = max(lo, float(proj.min()))
            hi = min(hi, float(proj.max()))
        if lo > hi:
            continue  # no offset along w meets all supports
        a = float(anchor @ w)
        gap = lo - a if a < lo else (a - hi if a > hi else -min(a - lo, hi - a))
        if gap <= 0:
            raise InvalidAnchorError(w)
        eps = min(eps, gap)
    if not np.isfinite(eps):
        eps = 0.1 * cloud_diameter(measures)
    return eps


def solve_bhj_fractions(measures: Sequence[SmoothedPointMeasure],
                        alphas: Sequence[float], anchor,
                        cfg: RefinementConfig | None = None):
    """Hyperplane cutting the prescribed mass fraction off every measure.

    Requires an anchor point so located that no hyperplane through it meets
    all supports (spot-checked on sampled directions).  Each measure is
    normalized to unit mass and augmented with anchor mass 2 - 2 alpha_i, and
    a unit anchor measure joins the family; equalizing the augmented family
    forces the cut to miss the anchor ball and to realize the fractions, up
    to the orientation flip applied when the anchor lands in the negative
    halfspace.
    """
    cfg = cfg or RefinementConfig()
    anchor = np.asarray(anchor, dtype=float)
    d = anchor.shape[0]
    if len(measures) != d or len(alphas) != d:
        raise InvalidParameterError("need d measures and d fractions in R^d")
    if any(not (0.0 < a < 1.0) for a in alphas):
        raise InvalidParameterError("fractions must lie strictly between 0 and 1")
    eps = anchor_clearance(measures, anchor)
    delta = min(min(m.delta for m in measures), eps / 4.0)
    augmented = []
    for m, a in zip(measures, alphas):
        pts = np.concatenate([m.points, anchor[None, :]], axis=0)
        w = np.concatenate([m.weights / m.mass, [2.0 - 2.0 * a]])
        augmented.append(SmoothedPointMeasure(pts, w, delta))
    aux = SmoothedPointMeasure(anchor[None, :], np.ones(1), delta)
    res = solve_equalizing_hs(augmented + [aux], cfg)
    if not isinstance(res, EqualizingWitness):
        return res
    u = res.u
    if halfspace_diff(aux, u) < 0:
        u = -u

    masses = [m.mass for m in measures]

    def frac_res_at(delta: float):
        ms = [_with_delta(m, delta) for m in measures]

        def frac_res(v: np.ndarray) -> float:
            return max(
                abs(halfspace_value(m, v) - a * mm) / mm
                for m, a, mm in zip(ms, alphas, masses)
            )

        return frac_res

    if cfg.polish:
        for dl in _delta_stages(list(measures)):
            u, _ = minimize_on_sphere(frac_res_at(dl), u)
    r = frac_res_at(0.0)(u)
    if r <= cfg.witness_tol:
        fr = tuple(halfspace_value(m, u) / m.mass for m in measures)
        return FractionCut(u, fr, tuple(alphas), r, eps)
    return Inconclusive(u, r, 0, "fractions did not reach tolerance")


# ---------------------------------------------------------------------------
# well-separated families


@dataclass
class SeparationReport:
    separated: bool
    witness: list[tuple[int, np.ndarray]] | None   # (cloud index, point) pairs
    common_point: np.ndarray | None
    split: tuple[tuple[int, ...], tuple[int, ...]] | None


def well_separated_check(clouds: Sequence, tol: float = 1e-9) -> SeparationReport:
    """Decide whether convex hulls of the clouds are well separated.

    A violation is a transversal of k <= d+1 hulls that is affinely
    dependent; equivalently two disjoint groups of clouds whose hull unions
    intersect.  Each candidate split is decided by a feasibility linear
    program over convex combinations of the cloud points.
    """
    pts = [np.asarray(c, dtype=float) for c in clouds]
    k = len(pts)
    d = pts[0].shape[1]
    if k > d + 1:
        raise InvalidParameterError("at most d+1 clouds are supported")
    indices = range(k)
    for size in range(2, min(k, d + 1) + 1):
        for subset in itertools.combinations(indices, size):
            for r in range(1, size):
                for I in itertools.combinations(subset, r):
                    J = tuple(i for i in subset if i not in I)
                    if I[0] > J[0]:
                        continue  # unordered split; skip the mirror
                    rep = _split_intersection(pts, I, J, d, tol)
                    if rep is not None:
                        common, wit = rep
                        return SeparationReport(False, wit, common, (I, J))
    return SeparationReport(True, None, None, None)


def _split_intersection(pts, I, J, d, tol):
    from scipy.optimize import linprog

    cols_i = np.concatenate([pts[i] for i in I], axis=0)
    cols_j = np.concatenate([pts[j] for j in J], axis=0)
    ni, nj = len(cols_i), len(cols_j)
    # variables: weights over I-points then J-points
    a_eq = np.zeros((d + 2, ni + nj))
    a_eq[:d, :ni] = cols_i.T
    a_eq[:d, ni:] = -cols_j.T
    a_eq[d, :ni] = 1.0
    a_eq[d + 1, ni:] = 1.0
    b_eq = np.zeros(d + 2)
    b_eq[d] = 1.0
    b_eq[d + 1] = 1.0
    res = linprog(np.zeros(ni + nj), A_eq=a_eq, b_eq=b_eq,
                  bounds=[(0, None)] * (ni + nj), method="highs")
    if not res.success:
        return None
    w = res.x
    common = cols_i.T @ w[:ni]
    witness = []
    off = 0
    for i in I:
        n = len(pts[i])
        wi = w[off:off + n]
        off += n
        lam = float(wi.sum())
        if lam > tol:
            witness.append((i, pts[i].T @ wi / lam))
    off = ni
    for j in J:
        n = len(pts[j])
        wj = w[off:off + n]
        off += n
        lam = float(wj.sum())
        if lam > tol:
            witness.append((j, pts[j].T @ wj / lam))
    return common, witness


# ---------------------------------------------------------------------------
# the naive colorful conjecture and the bundled demonstration data


def naive_conjecture_scan(r1, g1, r2, g2, step: float = 0.01,
                          slack: float = 0.05) -> bool:
    """Grid search for a line with r1, g2 favoring one side and r2, g1 the
    other, each up to the given slack; sharp indicator masses, no ramp.

    ``step`` is the angular resolution; per angle, every combinatorially
    distinct offset (midpoints between consecutive point projections) is
    tested, so no offset window is skipped.
    """
    measures = [r1, g1, r2, g2]
    masses = [m.mass for m in measures]
    allp = np.concatenate([m.points for m in measures], axis=0)
    for ang in np.arange(0.0, 2 * np.pi, step):
        n = np.array([math.cos(ang), math.sin(ang)])
        ap = np.sort(allp @ n)
        offsets = np.concatenate(
            [[ap[0] - 1.0], (ap[1:] + ap[:-1]) / 2.0, [ap[-1] + 1.0]]
        )
        fr = []
        for m in measures:
            projs = m.points @ n
            order = np.argsort(projs)
            proj = projs[order]
            cw = np.concatenate([[0.0], np.cumsum(m.weights[order])])
            idx = np.searchsorted(proj, offsets, side="right")
            fr.append(cw[idx])
        ok = (
            (fr[0] >= (0.5 - slack) * masses[0])
            & (masses[1] - fr[1] >= (0.5 - slack) * masses[1])
            & (masses[2] - fr[2] >= (0.5 - slack) * masses[2])
            & (fr[3] >= (0.5 - slack) * masses[3])
        )
        if bool(np.any(ok)):
            return True
    return False


def _parabola_atom(x: float, weight: float, spread: float = 0.15, count: int = 8):
    xs = np.linspace(x - spread, x + spread, count)
    pts = np.stack([xs, xs * xs], axis=1)
    return pts, np.full(count, weight / count)


def figure_two_families() -> tuple[SmoothedPointMeasure, ...]:
    """Two families of two measures along a parabola for which no line meets
    the naive colorful conclusion.

    Each measure has a heavy atom and a light one; a halfplane gets at least
    near-half of a measure only by capturing its heavy atom, and the heavy
    atoms interleave so that the required capture pattern is impossible for
    every line, with a wide margin.
    """
    spec = {
        "r1": [(-1.5, 0.8), (2.0, 0.3)],
        "g1": [(-0.5, 0.7), (2.4, 0.3)],
        "g2": [(0.5, 0.7), (-2.0, 0.3)],
        "r2": [(1.5, 0.8), (-2.4, 0.3)],
    }
    out = {}
    for name, atoms in spec.items():
        pts, ws = [], []
        for x, w in atoms:
            p, v = _parabola_atom(x, w)
            pts.append(p)
            ws.append(v)
        cloud = np.concatenate(pts, axis=0)
        out[name] = point_cloud_measure(cloud, np.concatenate(ws), ref_diameter=6.0)
    return out["r1"], out["g1"], out["r2"], out["g2"]


def figure_two_family_set() -> MeasureFamilySet:
    """The parabola configuration packaged for the colorful solver (d = 2)."""
    r1, g1, r2, g2 = figure_two_families()
    z = zero_measure(2)
    return MeasureFamilySet(((r1, g1, z), (r2, g2, z), (r1, g1, z)), 2)


def figure_three_clouds(separated: bool = True) -> list[np.ndarray]:
    """Three planar clouds, either well separated or stabbed by one line."""
    if separated:
        return [
            np.array([[0.0, 4.0], [2.0, 4.5], [0.5, 5.5]]),
            np.array([[4.0, -3.0], [6.0, -4.0], [6.5, -2.5]]),
            np.array([[7.0, 2.0], [9.0, 3.0], [8.5, 1.5]]),
        ]
    return [
        np.array([[0.0, 0.0], [1.0, 0.5], [0.5, -0.5]]),
        np.array([[4.0, 0.0], [5.0, 0.4], [4.5, -0.4]]),
        np.array([[8.0, 0.0], [9.0, 0.3], [8.5, -0.3]]),
    ]
