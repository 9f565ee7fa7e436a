"""Symmetric triangulations of spheres.

Constructors for crosspolytopes, deleted joins of simplices, and cyclic join
spheres, plus barycentric subdivision.  Complexes are stored by their facets
only; lower faces are enumerated on demand.  Every symmetric constructor
returns unit-sphere coordinates together with a simplicial group action, and
subdivision preserves both.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

# Desk-scale guard rails.  Overridable by callers that know what they are doing.
DIMENSION_CAP = 5
SUBDIVISION_DEPTH_CAP = 8


class InvalidParameterError(ValueError):
    """A constructor argument is outside its documented range."""


class DegenerateRealizationError(RuntimeError):
    """A barycentric combination collapsed to the origin."""


# ---------------------------------------------------------------------------
# combinatorial layer


@dataclass(eq=False)
class SimplicialComplex:
    """Facet-stored complex with a fixed canonical vertex order.

    The vertex order fixes all scan orders downstream: edges, faces, and
    facets are sorted by tuples of vertex positions, so every search that
    reports "the first" certificate is reproducible.
    """

    facets: tuple[frozenset[int], ...]
    vertex_order: tuple[int, ...]

    @staticmethod
    def from_facets(
        facets: Iterable[Iterable[int]],
        vertex_order: Sequence[int] | None = None,
    ) -> "SimplicialComplex":
        fs = {frozenset(f) for f in facets}
        if not fs or any(len(f) == 0 for f in fs):
            raise InvalidParameterError("facets must be non-empty vertex sets")
        maximal = {f for f in fs if not any(f < g for g in fs)}
        if vertex_order is None:
            verts: tuple[int, ...] = tuple(sorted({v for f in maximal for v in f}))
        else:
            verts = tuple(vertex_order)
        pos = {v: i for i, v in enumerate(verts)}
        ordered = tuple(sorted(maximal, key=lambda f: tuple(sorted(pos[v] for v in f))))
        return SimplicialComplex(ordered, verts)

    @cached_property
    def position(self) -> dict[int, int]:
        return {v: i for i, v in enumerate(self.vertex_order)}

    @cached_property
    def vertices(self) -> frozenset[int]:
        return frozenset(self.vertex_order)

    @property
    def dimension(self) -> int:
        return max(len(f) for f in self.facets) - 1

    def sort_key(self, face: Iterable[int]) -> tuple[int, ...]:
        pos = self.position
        return tuple(sorted(pos[v] for v in face))

    @cached_property
    def edges(self) -> tuple[frozenset[int], ...]:
        es = {frozenset(e) for f in self.facets for e in itertools.combinations(f, 2)}
        return tuple(sorted(es, key=self.sort_key))

    @cached_property
    def all_faces(self) -> tuple[frozenset[int], ...]:
        seen: set[frozenset[int]] = set()
        for f in self.facets:
            fl = sorted(f, key=self.position.__getitem__)
            for k in range(1, len(fl) + 1):
                for c in itertools.combinations(fl, k):
                    seen.add(frozenset(c))
        return tuple(sorted(seen, key=lambda s: (len(s), self.sort_key(s))))

    @cached_property
    def _vertex_to_facets(self) -> dict[int, tuple[frozenset[int], ...]]:
        idx: dict[int, list[frozenset[int]]] = {v: [] for v in self.vertex_order}
        for f in self.facets:
            for v in f:
                idx[v].append(f)
        return {v: tuple(fs) for v, fs in idx.items()}

    def is_face(self, face: Iterable[int]) -> bool:
        fs = frozenset(face)
        if not fs:
            return False
        v = next(iter(fs))
        if v not in self._vertex_to_facets:
            return False
        return any(fs <= facet for facet in self._vertex_to_facets[v])

    @cached_property
    def f_vector(self) -> tuple[int, ...]:
        counts = [0] * (self.dimension + 1)
        for f in self.all_faces:
            counts[len(f) - 1] += 1
        return tuple(counts)

    @cached_property
    def euler_characteristic(self) -> int:
        return sum((-1) ** k * n for k, n in enumerate(self.f_vector))


@dataclass(eq=False)
class SymmetryAction:
    """Order-p vertex permutation generating a cyclic simplicial action."""

    order: int
    mapping: dict[int, int]

    def apply(self, v: int, times: int = 1) -> int:
        for _ in range(times % self.order):
            v = self.mapping[v]
        return v

    def map_face(self, face: Iterable[int], times: int = 1) -> frozenset[int]:
        return frozenset(self.apply(v, times) for v in face)

    def orbit(self, v: int) -> tuple[int, ...]:
        out = [v]
        w = self.mapping[v]
        while w != v:
            out.append(w)
            w = self.mapping[w]
        return tuple(out)


@dataclass(eq=False)
class SymmetricComplex:
    """Simplicial complex + cyclic action + unit-sphere coordinates.

    ``geometric_action`` is an orthogonal matrix realizing one generator step
    on coordinates; for order 2 it is minus the identity.  ``parent_faces``
    is set by :func:`barycentric_subdivide` and maps each vertex to the face
    of the parent complex that it subdivides.
    """

    complex: SimplicialComplex
    action: SymmetryAction
    coords: dict[int, np.ndarray]
    geometric_action: np.ndarray | None = None
    parent_faces: dict[int, frozenset[int]] | None = None

    @property
    def dimension(self) -> int:
        return self.complex.dimension

    @property
    def order(self) -> int:
        return self.action.order

    @property
    def ambient_dim(self) -> int:
        return len(next(iter(self.coords.values())))

    def shift_point(self, x: np.ndarray, times: int = 1) -> np.ndarray:
        """Apply the geometric action ``times`` steps to an arbitrary point."""
        t = times % self.order
        if t == 0:
            return x
        if self.geometric_action is None:
            if self.order == 2:
                return -x
            raise InvalidParameterError("no geometric action available for order > 2")
        y = x
        for _ in range(t):
            y = self.geometric_action @ y
        return y

    @cached_property
    def orbit_representatives(self) -> tuple[int, ...]:
        """One vertex per orbit, the one with lexicographically smallest coords."""
        seen: set[int] = set()
        reps = []
        for v in self.complex.vertex_order:
            if v in seen:
                continue
            orb = self.action.orbit(v)
            seen.update(orb)
            reps.append(min(orb, key=lambda u: tuple(self.coords[u])))
        return tuple(reps)

    @cached_property
    def span_basis(self) -> np.ndarray:
        """Orthonormal basis (rows) of the span of the vertex coordinates."""
        mat = np.array([self.coords[v] for v in self.complex.vertex_order])
        _, s, vt = np.linalg.svd(mat, full_matrices=False)
        rank = int(np.sum(s > 1e-9 * s[0]))
        return vt[:rank]

    def facet_barycenter(self, face: Iterable[int]) -> np.ndarray:
        fs = sorted(face, key=self.complex.position.__getitem__)
        return realize_point(self, fs, np.full(len(fs), 1.0 / len(fs)))

    def face_diameter(self, face: Iterable[int]) -> float:
        pts = [self.coords[v] for v in face]
        if len(pts) < 2:
            return 0.0
        return max(
            float(np.linalg.norm(a - b)) for a, b in itertools.combinations(pts, 2)
        )

    @cached_property
    def max_facet_diameter(self) -> float:
        return max(self.face_diameter(f) for f in self.complex.facets)


# ---------------------------------------------------------------------------
# validators


def validate_action(sc: SymmetricComplex) -> None:
    """Check the action is an order-p simplicial automorphism."""
    act, cx = sc.action, sc.complex
    if act.order < 2:
        raise InvalidParameterError("action order must be >= 2")
    verts = cx.vertices
    if set(act.mapping) != set(verts) or set(act.mapping.values()) != set(verts):
        raise InvalidParameterError("action must permute the vertex set")
    for v in verts:
        if act.apply(v, act.order) != v:
            raise InvalidParameterError("permutation^p is not the identity")
    facet_set = set(cx.facets)
    for f in cx.facets:
        if act.map_face(f) not in facet_set:
            raise InvalidParameterError("action does not map facets to facets")


def action_is_free(sc: SymmetricComplex) -> bool:
    """True iff no vertex orbit is short or spans a face of the complex.

    For a simplicial cyclic action of prime order this is equivalent to
    freeness on the geometric realization: a fixed point of a power would
    force a setwise-fixed face, hence a full orbit inside a face.
    """
    p = sc.order
    for v in sc.complex.vertices:
        orb = sc.action.orbit(v)
        if len(orb) != p:
            return False
        if sc.complex.is_face(orb):
            return False
    return True


def validate_coords(sc: SymmetricComplex, tol: float = 1e-9) -> None:
    """Check unit norms and equivariance of coordinates."""
    for v in sc.complex.vertices:
        x = sc.coords[v]
        if abs(float(np.linalg.norm(x)) - 1.0) > tol:
            raise InvalidParameterError(f"coords of vertex {v} are not unit length")
        y = sc.coords[sc.action.apply(v)]
        if float(np.linalg.norm(sc.shift_point(x) - y)) > tol:
            raise InvalidParameterError(f"coords are not equivariant at vertex {v}")


# ---------------------------------------------------------------------------
# constructors


def crosspolytope(k: int) -> SymmetricComplex:
    """Boundary of the k-dimensional crosspolytope, a triangulated S^(k-1).

    Vertices are +1..+k and -1..-k with coords +-e_i; facets pick exactly one
    of +-i for every i; the action is the antipodal map v -> -v.
    """
    if k < 1:
        raise InvalidParameterError("crosspolytope requires k >= 1")
    order = tuple(range(1, k + 1)) + tuple(range(-1, -k - 1, -1))
    facets = [
        frozenset(s * i for i, s in zip(range(1, k + 1), signs))
        for signs in itertools.product((1, -1), repeat=k)
    ]
    cx = SimplicialComplex.from_facets(facets, vertex_order=order)
    coords = {}
    for i in range(1, k + 1):
        e = np.zeros(k)
        e[i - 1] = 1.0
        coords[i] = e
        coords[-i] = -e
    action = SymmetryAction(2, {v: -v for v in order})
    return SymmetricComplex(cx, action, coords, geometric_action=-np.eye(k))


def deleted_join_simplex(n: int, p: int = 2) -> SimplicialComplex:
    """p-fold deleted join of the n-simplex (combinatorial, no symmetry data).

    Vertex (i, c) for simplex vertex i in 1..n+1 and copy c in 1..p is given
    id (i-1)*p + c.  Facets are the assignments of each simplex vertex to one
    of the p copies, so there are p^(n+1) facets of size n+1.
    """
    if n < 0 or p < 2:
        raise InvalidParameterError("deleted join requires n >= 0 and p >= 2")

    def vid(i: int, c: int) -> int:
        return (i - 1) * p + c

    order = tuple(vid(i, c) for i in range(1, n + 2) for c in range(1, p + 1))
    facets = []
    for assign in itertools.product(range(1, p + 1), repeat=n + 1):
        facets.append(frozenset(vid(i + 1, c) for i, c in enumerate(assign)))
    return SimplicialComplex.from_facets(facets, vertex_order=order)


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def zp_join_sphere(p: int, d: int) -> SymmetricComplex:
    """d-fold join of the boundary of the (p-1)-simplex, a sphere S^((p-1)d-1).

    Vertex (j, t), j in 1..d, t in Z/p, carries id (j-1)*p + t + 1.  Facets
    omit exactly one shift per block (p^d facets of size (p-1)d).  The cyclic
    action shifts t by one; geometrically it is the block-wise cyclic
    coordinate permutation, which is orthogonal and exact in floating point.
    """
    if not _is_prime(p):
        raise InvalidParameterError("p must be prime")
    if d < 1:
        raise InvalidParameterError("d must be >= 1")

    def vid(j: int, t: int) -> int:
        return (j - 1) * p + (t % p) + 1

    order = tuple(vid(j, t) for j in range(1, d + 1) for t in range(p))
    facets = []
    for omitted in itertools.product(range(p), repeat=d):
        facets.append(
            frozenset(
                vid(j + 1, t) for j, o in enumerate(omitted) for t in range(p) if t != o
            )
        )
    cx = SimplicialComplex.from_facets(facets, vertex_order=order)

    # Block j occupies coordinates [(j-1)p, jp); vertex (j, t) is the t-th
    # vertex of a regular simplex centered at the origin of its block.
    scale = 1.0 / np.sqrt((p - 1) / p)
    coords = {}
    for j in range(1, d + 1):
        for t in range(p):
            x = np.zeros(d * p)
            x[(j - 1) * p : j * p] = -1.0 / p
            x[(j - 1) * p + t] += 1.0
            coords[vid(j, t)] = x * scale
    mapping = {vid(j, t): vid(j, t + 1) for j in range(1, d + 1) for t in range(p)}
    perm = np.zeros((d * p, d * p))
    for j in range(d):
        for t in range(p):
            perm[j * p + (t + 1) % p, j * p + t] = 1.0
    return SymmetricComplex(cx, SymmetryAction(p, mapping), coords, geometric_action=perm)


def zp_vertex_name(p: int, vid: int) -> tuple[int, int]:
    """Inverse of the (j, t) -> id encoding used by :func:`zp_join_sphere`."""
    return ((vid - 1) // p + 1, (vid - 1) % p)


def realize_point(
    sc: SymmetricComplex, face: Sequence[int], weights: Sequence[float]
) -> np.ndarray:
    """Convex combination of vertex coords, pushed back to the unit sphere.

    ``weights`` aligns with ``face`` as given (use the canonical vertex order
    for reproducibility).  Weights must be nonnegative and sum to one.
    """
    face = list(face)
    if not sc.complex.is_face(face):
        raise InvalidParameterError(f"{sorted(face)} is not a face of the complex")
    w = np.asarray(weights, dtype=float)
    if len(w) != len(face) or np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-9:
        raise InvalidParameterError("weights must be nonnegative and sum to 1")
    x = np.zeros(sc.ambient_dim)
    for v, wi in zip(face, w):
        x = x + wi * sc.coords[v]
    nrm = float(np.linalg.norm(x))
    if nrm < 1e-12:
        raise DegenerateRealizationError("combination collapsed to the origin")
    return x / nrm


# ---------------------------------------------------------------------------
# barycentric subdivision


def barycentric_subdivide_complex(
    cx: SimplicialComplex,
) -> tuple[SimplicialComplex, dict[frozenset[int], int]]:
    """Subdivide a bare complex; returns (subdivision, face -> vertex id map).

    The vertex of a singleton face keeps the original id, so ids are stable
    under subdivision; every other face gets a fresh id, assigned in the
    canonical face order (by dimension, then by vertex positions).
    """
    faces = cx.all_faces
    next_id = max(cx.vertex_order) + 1
    face_id: dict[frozenset[int], int] = {}
    new_ids = []
    for f in faces:
        if len(f) == 1:
            face_id[f] = next(iter(f))
        else:
            face_id[f] = next_id
            new_ids.append(next_id)
            next_id += 1
    new_facets = []
    for facet in cx.facets:
        fl = sorted(facet, key=cx.position.__getitem__)
        for perm in itertools.permutations(fl):
            chain = []
            cur: list[int] = []
            for v in perm:
                cur.append(v)
                chain.append(face_id[frozenset(cur)])
            new_facets.append(frozenset(chain))
    order = cx.vertex_order + tuple(new_ids)
    return SimplicialComplex.from_facets(new_facets, vertex_order=order), face_id


def barycentric_subdivide(sc: SymmetricComplex) -> SymmetricComplex:
    """Barycentric subdivision carrying the action and sphere coords along.

    New coordinates are normalized barycenters.  They are computed for one
    canonical representative per face orbit and propagated through the
    geometric action, so equivariance is exact whenever the action matrix is
    a signed permutation (all built-in constructors).
    """
    cx = sc.complex
    sub, face_id = barycentric_subdivide_complex(cx)
    mapping = {
        face_id[f]: face_id[sc.action.map_face(f)] for f in cx.all_faces
    }
    action = SymmetryAction(sc.order, mapping)

    coords: dict[int, np.ndarray] = {}
    done: set[frozenset[int]] = set()
    for f in cx.all_faces:
        if f in done:
            continue
        orbit = [f]
        g = sc.action.map_face(f)
        while g != f:
            orbit.append(g)
            g = sc.action.map_face(g)
        done.update(orbit)
        fl = sorted(f, key=cx.position.__getitem__)
        x = np.zeros(sc.ambient_dim)
        for v in fl:
            x = x + sc.coords[v]
        nrm = float(np.linalg.norm(x))
        if nrm < 1e-12:
            raise DegenerateRealizationError(f"face {sorted(f)} has zero barycenter")
        x = x / nrm
        coords[face_id[f]] = x
        for s, g in enumerate(orbit[1:], start=1):
            coords[face_id[g]] = sc.shift_point(x, s)

    parent = {face_id[f]: f for f in cx.all_faces}
    return SymmetricComplex(
        sub, action, coords, geometric_action=sc.geometric_action, parent_faces=parent
    )


def subdivision_tower(sc: SymmetricComplex, level: int) -> SymmetricComplex:
    """sc subdivided ``level`` times, memoized on the complex object."""
    if level < 0:
        raise InvalidParameterError("level must be >= 0")
    if level > SUBDIVISION_DEPTH_CAP:
        raise InvalidParameterError(
            f"subdivision depth {level} exceeds cap {SUBDIVISION_DEPTH_CAP}"
        )
    tower = getattr(sc, "_tower", None)
    if tower is None:
        tower = [sc]
        sc._tower = tower
    while len(tower) <= level:
        tower.append(barycentric_subdivide(tower[-1]))
    return tower[level]


_CP_BASES: dict[int, SymmetricComplex] = {}
_ZP_BASES: dict[tuple[int, int], SymmetricComplex] = {}


def refined_crosspolytope(k: int, level: int) -> SymmetricComplex:
    """Memoized subdivisions of the crosspolytope, shared across solvers."""
    base = _CP_BASES.setdefault(k, crosspolytope(k))
    return subdivision_tower(base, level)


def refined_zp_sphere(p: int, d: int, level: int) -> SymmetricComplex:
    base = _ZP_BASES.setdefault((p, d), zp_join_sphere(p, d))
    return subdivision_tower(base, level)


def circle_chart(sc: SymmetricComplex):
    """Angle chart for a complex realizing a circle inside its ambient space.

    Returns (to_angle, from_angle) with angles in radians, the reference
    direction at the first vertex, and orientation chosen so that one action
    step is a positive rotation (when the action is not the antipode).
    """
    basis = sc.span_basis
    if basis.shape[0] != 2:
        raise InvalidParameterError("complex does not realize a circle")
    v0 = sc.complex.vertex_order[0]
    b1 = sc.coords[v0]
    y = sc.shift_point(b1, 1)
    b2 = y - float(np.dot(y, b1)) * b1
    n = float(np.linalg.norm(b2))
    if n < 1e-9:
        # antipodal action gives no orientation; use the span complement
        b2 = basis[1] - float(np.dot(basis[1], b1)) * b1
        b2 = b2 / float(np.linalg.norm(b2))
    else:
        b2 = b2 / n

    def to_angle(x: np.ndarray) -> float:
        return float(np.arctan2(np.dot(x, b2), np.dot(x, b1)))

    def from_angle(t: float) -> np.ndarray:
        return np.cos(t) * b1 + np.sin(t) * b2

    return to_angle, from_angle


# ---------------------------------------------------------------------------
# JSON round trip


def complex_to_json(sc: SymmetricComplex) -> str:
    pos = sc.complex.position
    data = {
        "vertices": list(sc.complex.vertex_order),
        "facets": [sorted(f, key=pos.__getitem__) for f in sc.complex.facets],
        "action": {
            "p": sc.order,
            "perm": {str(v): sc.action.mapping[v] for v in sc.complex.vertex_order},
        },
        "coords": {
            str(v): [float(c) for c in sc.coords[v]] for v in sc.complex.vertex_order
        },
    }
    return json.dumps(data)


def complex_from_json(text: str) -> SymmetricComplex:
    data = json.loads(text)
    order = tuple(int(v) for v in data["vertices"])
    cx = SimplicialComplex.from_facets(
        [frozenset(f) for f in data["facets"]], vertex_order=order
    )
    action = SymmetryAction(
        int(data["action"]["p"]),
        {int(k): int(v) for k, v in data["action"]["perm"].items()},
    )
    coords = {int(k): np.array(v, dtype=float) for k, v in data["coords"].items()}
    sc = SymmetricComplex(cx, action, coords)
    if action.order == 2:
        sc.geometric_action = -np.eye(sc.ambient_dim)
    return sc
