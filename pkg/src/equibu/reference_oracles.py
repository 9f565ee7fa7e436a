"""Independent brute-force references used to cross-check every solver.

These are deliberately naive: no pruning, no shared code with the solvers
beyond the data types, so solver bugs cannot leak into the reference values.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .complexes import SymmetricComplex


class TooLargeError(RuntimeError):
    """Input exceeds the desk-scale cap for exhaustive enumeration."""


FACET_CAP = 10**6


@dataclass
class SweepConfig:
    resolutions: tuple[int, ...] = (64,)
    slack: float = 0.0

    def __post_init__(self):
        if any(r < 8 for r in self.resolutions):
            raise ValueError("resolutions must be >= 8")


@dataclass
class FanScanResult:
    complementary: list          # edges (order 2) or orbit faces (order p)
    targets: list[frozenset[int]]


def exhaustive_fan_scan(
    sc: SymmetricComplex,
    labeling,
    signs: Sequence[int] | None = None,
    shifts: Sequence[int] | None = None,
) -> FanScanResult:
    """List every complementary edge / orbit face and every target facet."""
    if len(sc.complex.facets) > FACET_CAP:
        raise TooLargeError("complex exceeds the exhaustive-scan cap")
    lab = labeling.labels if hasattr(labeling, "labels") else labeling
    p = sc.order
    comp = []
    targets = []
    if p == 2 and signs is not None:
        for f in sc.complex.facets:
            for u, v in itertools.combinations(f, 2):
                if lab[u] + lab[v] == 0 and frozenset((u, v)) not in comp:
                    comp.append(frozenset((u, v)))
        d = sc.dimension
        want = {s * (i + 1) for i, s in enumerate(signs)}
        for f in sc.complex.facets:
            if {lab[v] for v in f} == want and len(f) == d + 1:
                targets.append(f)
    else:
        assert shifts is not None
        n = sc.dimension
        d = (n + 1) // (p - 1)
        seen = set()
        for f in sc.complex.facets:
            for sub in itertools.combinations(f, p):
                fs = frozenset(sub)
                if fs in seen:
                    continue
                seen.add(fs)
                got = {lab[v] for v in fs}
                if len(got) == p and len({j for j, _ in got}) == 1:
                    comp.append(fs)
        want = {
            (j, s) for j in range(1, d + 1) for s in range(p) if s != shifts[j - 1] % p
        }
        for f in sc.complex.facets:
            if {lab[v] for v in f} == want and len(f) == len(want):
                targets.append(f)
    return FanScanResult(comp, targets)


def sphere_grid(dim: int, resolution: int) -> np.ndarray:
    """Deterministic near-uniform grid on S^dim (rows are unit vectors)."""
    if dim == 0:
        return np.array([[1.0], [-1.0]])
    if dim == 1:
        ang = np.linspace(0.0, 2 * np.pi, resolution, endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if dim == 2:
        # Fibonacci sphere
        n = resolution * resolution
        k = np.arange(n, dtype=float) + 0.5
        phi = np.arccos(1.0 - 2.0 * k / n)
        theta = np.pi * (1.0 + np.sqrt(5.0)) * k
        return np.stack(
            [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)],
            axis=1,
        )
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(resolution**2 * (dim + 1), dim + 1))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def sphere_grid_search(
    residual: Callable[[np.ndarray], float], dim: int, resolution: int = 64
) -> tuple[np.ndarray, float]:
    """Minimize a residual over a dense sphere grid; the grid is the oracle."""
    best_x = None
    best_v = np.inf
    for x in sphere_grid(dim, resolution):
        v = float(residual(x))
        if v < best_v:
            best_v = v
            best_x = x
    return best_x, best_v


def transversal_residual_landscape(field, d: int) -> Callable[[np.ndarray], float]:
    """Best transversal residual over all permutations, for grid search."""
    perms = list(itertools.permutations(range(d + 1)))

    def res(x: np.ndarray) -> float:
        m = field.eval(x)
        best = np.inf
        for pi in perms:
            r = max(
                float(np.max(np.abs(m[pi[i]])) - m[pi[i], i]) for i in range(d + 1)
            )
            best = min(best, r)
        return best

    return res


# ---------------------------------------------------------------------------
# 2-D line sweeps over sharp (unsmoothed) point measures


def _sharp_halfplane_mass(points: np.ndarray, weights: np.ndarray, normal, offset) -> float:
    # H+ = {x : <normal, x> <= offset}, indicator counting, no ramp
    total = 0.0
    for p, w in zip(points, weights):
        if normal[0] * p[0] + normal[1] * p[1] <= offset:
            total += w
    return total


def line_sweep_2d(
    measures: Sequence,
    constraints: Sequence[tuple[int, int, float]],
    resolution: int = 64,
    padding: float = 0.1,
) -> list[tuple[float, float, float]]:
    """All grid lines meeting fraction constraints; returns (angle, offset, margin).

    ``constraints`` is a list of (measure index, side, min fraction) with side
    +1 for the halfplane below the oriented line and -1 for its complement.
    Angles run over [0, 2 pi) so both orientations of each line are covered.
    """
    pts = [np.asarray(m.points, dtype=float) for m in measures]
    ws = [np.asarray(m.weights, dtype=float) for m in measures]
    masses = [float(w.sum()) for w in ws]
    allpts = np.concatenate([p for p in pts if len(p)], axis=0)
    lo, hi = allpts.min(), allpts.max()
    span = max(hi - lo, 1e-9)
    feasible = []
    angles = np.linspace(0.0, 2 * np.pi, 2 * resolution, endpoint=False)
    offsets = np.linspace(-(abs(lo) + abs(hi) + padding * span),
                          abs(lo) + abs(hi) + padding * span, 2 * resolution)
    for ang in angles:
        n = (np.cos(ang), np.sin(ang))
        for c in offsets:
            margin = np.inf
            ok = True
            for mi, side, frac in constraints:
                got = _sharp_halfplane_mass(pts[mi], ws[mi], n, c)
                if side < 0:
                    got = masses[mi] - got
                rel = got / masses[mi] - frac
                margin = min(margin, rel)
                if rel < 0:
                    ok = False
                    break
            if ok:
                feasible.append((float(ang), float(c), float(margin)))
    return feasible


def best_bisecting_line_2d(
    measures: Sequence, resolution: int = 96
) -> tuple[float, float, float]:
    """Grid line minimizing the worst bisection error; returns (angle, offset, err)."""
    pts = [np.asarray(m.points, dtype=float) for m in measures]
    ws = [np.asarray(m.weights, dtype=float) for m in measures]
    masses = [float(w.sum()) for w in ws]
    allpts = np.concatenate([p for p in pts if len(p)], axis=0)
    lo, hi = allpts.min(), allpts.max()
    best = (0.0, 0.0, np.inf)
    for ang in np.linspace(0.0, np.pi, resolution, endpoint=False):
        n = (np.cos(ang), np.sin(ang))
        for c in np.linspace(lo - 0.05, hi + 0.05, 2 * resolution):
            err = 0.0
            for p, w, m in zip(pts, ws, masses):
                got = _sharp_halfplane_mass(p, w, n, c)
                err = max(err, abs(got / m - 0.5))
            if err < best[2]:
                best = (float(ang), float(c), float(err))
    return best
