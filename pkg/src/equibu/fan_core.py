"""Discrete Fan-lemma engines on symmetric sphere triangulations.

Given an antipodal (order 2) or equivariant (prime order) vertex labelling,
the searches below return either a complementary edge / fully labelled orbit
face, or a facet carrying one label per index with prescribed signs or
shifts.  One of the two always exists on a valid input; failure to find
either is a hard internal error, never a soft result.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .complexes import SymmetricComplex


class InvalidLabelingError(ValueError):
    """Labelling violates antipodality / equivariance or its value range."""


class CertificateSearchError(RuntimeError):
    """Exhaustive search found neither certificate; indicates an internal bug."""


class CoverGapError(RuntimeError):
    """A vertex belongs to no set of its assigned family."""

    def __init__(self, vertex: int, family: int, point: np.ndarray):
        self.vertex = vertex
        self.family = family
        self.point = point
        super().__init__(f"vertex {vertex} lies in no set of family {family}")


# ---------------------------------------------------------------------------
# labellings


@dataclass
class SignedLabeling:
    """Vertex labels in +-{1..d+1} with l(-v) = -l(v)."""

    labels: dict[int, int]

    def __getitem__(self, v: int) -> int:
        return self.labels[v]


@dataclass
class OrbitLabeling:
    """Vertex labels (j, t) in [d] x Z/p with l(s.v) = (j, t+s)."""

    labels: dict[int, tuple[int, int]]

    def __getitem__(self, v: int) -> tuple[int, int]:
        return self.labels[v]


def _label_map(labeling) -> Mapping[int, Any]:
    if isinstance(labeling, (SignedLabeling, OrbitLabeling)):
        return labeling.labels
    return labeling


def validate_signed_labeling(sc: SymmetricComplex, labeling, d: int | None = None) -> None:
    lab = _label_map(labeling)
    d = sc.dimension if d is None else d
    for v in sc.complex.vertices:
        lv = lab.get(v)
        if not isinstance(lv, int) or lv == 0 or abs(lv) > d + 1:
            raise InvalidLabelingError(f"label {lv!r} at vertex {v} outside +-[{d + 1}]")
        if lab[sc.action.apply(v)] != -lv:
            raise InvalidLabelingError(f"labels at vertex {v} are not antipodal")


def validate_orbit_labeling(sc: SymmetricComplex, labeling, d: int) -> None:
    lab = _label_map(labeling)
    p = sc.order
    for v in sc.complex.vertices:
        lv = lab.get(v)
        if (
            not isinstance(lv, tuple)
            or len(lv) != 2
            or not (1 <= lv[0] <= d)
            or not (0 <= lv[1] < p)
        ):
            raise InvalidLabelingError(f"label {lv!r} at vertex {v} outside [{d}] x Z/{p}")
        j, t = lv
        if lab[sc.action.apply(v)] != (j, (t + 1) % p):
            raise InvalidLabelingError(f"labels at vertex {v} are not equivariant")


def random_antipodal_labeling(sc: SymmetricComplex, d: int, rng) -> SignedLabeling:
    """Uniform random labels on orbit representatives, propagated antipodally."""
    values = [s * j for j in range(1, d + 2) for s in (1, -1)]
    labels: dict[int, int] = {}
    for rep in sc.orbit_representatives:
        lv = int(rng.choice(values))
        labels[rep] = lv
        labels[sc.action.apply(rep)] = -lv
    return SignedLabeling(labels)


def random_equivariant_labeling(sc: SymmetricComplex, d: int, rng) -> OrbitLabeling:
    p = sc.order
    labels: dict[int, tuple[int, int]] = {}
    for rep in sc.orbit_representatives:
        j = int(rng.integers(1, d + 1))
        t = int(rng.integers(0, p))
        for s in range(p):
            labels[sc.action.apply(rep, s)] = (j, (t + s) % p)
    return OrbitLabeling(labels)


# ---------------------------------------------------------------------------
# certificates


@dataclass
class ComplementaryEdge:
    """Edge whose two labels are -j and +j."""

    edge: frozenset[int]
    label_index: int


@dataclass
class OrbitFace:
    """Face of size p carrying the full label orbit {j} x Z/p."""

    face: frozenset[int]
    block: int


@dataclass
class TargetFacet:
    """Facet carrying exactly one label per index, with the prescribed signs
    or shifts; ``matching`` maps each label to the vertex that carries it."""

    facet: frozenset[int]
    matching: dict[Any, int]


FanCertificate = ComplementaryEdge | OrbitFace | TargetFacet


def certificate_labels(cert: FanCertificate, labeling) -> set:
    """Re-read the labelling on the certificate; callers compare multisets."""
    lab = _label_map(labeling)
    if isinstance(cert, ComplementaryEdge):
        return {lab[v] for v in cert.edge}
    if isinstance(cert, OrbitFace):
        return {lab[v] for v in cert.face}
    return {lab[v] for v in cert.facet}


# ---------------------------------------------------------------------------
# searches


def _complementary_edges(sc: SymmetricComplex, lab: Mapping[int, int]):
    for e in sc.complex.edges:
        u, v = sorted(e, key=sc.complex.position.__getitem__)
        if lab[u] == -lab[v]:
            yield e, abs(lab[u])


def find_target_facets_z2(
    sc: SymmetricComplex, labeling, signs: Sequence[int], limit: int = 64
) -> list[TargetFacet]:
    """All facets labelled {s_1*1, ..., s_{d+1}*(d+1)}, in canonical order."""
    lab = _label_map(labeling)
    target = frozenset(s * (i + 1) for i, s in enumerate(signs))
    out = []
    for f in sc.complex.facets:
        if len(f) != len(target):
            continue
        if {lab[v] for v in f} == target:
            out.append(TargetFacet(f, {lab[v]: v for v in f}))
            if len(out) >= limit:
                break
    return out


def find_target_facet_z2(
    sc: SymmetricComplex, labeling, signs: Sequence[int]
) -> TargetFacet | None:
    hits = find_target_facets_z2(sc, labeling, signs, limit=1)
    return hits[0] if hits else None


def solve_fan_z2(
    sc: SymmetricComplex, labeling, signs: Sequence[int], validate: bool = True
) -> FanCertificate:
    """Find a complementary edge or a facet labelled {s_1*1, ..., s_{d+1}*(d+1)}.

    Edges are scanned before facets, both in canonical order, so the reported
    certificate is deterministic.
    """
    d = sc.dimension
    if len(signs) != d + 1 or any(s not in (-1, 1) for s in signs):
        raise InvalidLabelingError("signs must be d+1 values in {-1, +1}")
    if validate:
        validate_signed_labeling(sc, labeling, d)
    lab = _label_map(labeling)
    for e, j in _complementary_edges(sc, lab):
        return ComplementaryEdge(e, j)
    cert = find_target_facet_z2(sc, labeling, signs)
    if cert is not None:
        return cert
    raise CertificateSearchError("no complementary edge and no target facet found")


def _orbit_faces(sc: SymmetricComplex, lab: Mapping[int, tuple[int, int]], d: int, p: int):
    seen: set[frozenset[int]] = set()
    full = {(j, t) for j in range(1, d + 1) for t in range(p)}
    for facet in sc.complex.facets:
        if len(facet) < p:
            continue
        for sub in itertools.combinations(sorted(facet, key=sc.complex.position.__getitem__), p):
            fs = frozenset(sub)
            if fs in seen:
                continue
            seen.add(fs)
            got = {lab[v] for v in fs}
            if len(got) == p:
                j0 = next(iter(got))[0]
                if got == {(j0, t) for t in range(p)}:
                    yield fs, j0


def find_target_facets_zp(
    sc: SymmetricComplex, labeling, shifts: Sequence[int], d: int, limit: int = 64
) -> list[TargetFacet]:
    lab = _label_map(labeling)
    p = sc.order
    target = {
        (j, s) for j in range(1, d + 1) for s in range(p) if s != shifts[j - 1] % p
    }
    out = []
    for f in sc.complex.facets:
        if len(f) != len(target):
            continue
        if {lab[v] for v in f} == target:
            out.append(TargetFacet(f, {lab[v]: v for v in f}))
            if len(out) >= limit:
                break
    return out


def find_target_facet_zp(
    sc: SymmetricComplex, labeling, shifts: Sequence[int], d: int
) -> TargetFacet | None:
    hits = find_target_facets_zp(sc, labeling, shifts, d, limit=1)
    return hits[0] if hits else None


def solve_fan_zp(
    sc: SymmetricComplex, labeling, shifts: Sequence[int], validate: bool = True
) -> FanCertificate:
    """Equivariant analogue of :func:`solve_fan_z2` for prime order p.

    Returns an OrbitFace of size p fully labelled {j} x Z/p, or a TargetFacet
    labelled exactly {(j, s) : j, s != s_j}.  Orbit faces take priority,
    mirroring the order-2 edge-first rule.
    """
    p = sc.order
    n = sc.dimension
    if (n + 1) % (p - 1) != 0:
        raise InvalidLabelingError(f"dimension {n} is not (p-1)d-1 for p={p}")
    d = (n + 1) // (p - 1)
    if len(shifts) != d:
        raise InvalidLabelingError(f"need {d} shifts, got {len(shifts)}")
    if validate:
        validate_orbit_labeling(sc, labeling, d)
    lab = _label_map(labeling)
    for fs, j in _orbit_faces(sc, lab, d, p):
        return OrbitFace(fs, j)
    cert = find_target_facet_zp(sc, labeling, shifts, d)
    if cert is not None:
        return cert
    raise CertificateSearchError("no orbit face and no target facet found")


def forced_orbit_face(sc: SymmetricComplex, labeling, validate: bool = True) -> OrbitFace:
    """On a sphere of dimension (p-1)d an orbit face always exists; find it.

    Accepts a SignedLabeling for order 2 (labels +-j read as (j, 0/1)).
    Requires only that the labelling is equivariant; the action need not be
    free on the realization, only on vertices.
    """
    p = sc.order
    lab = _label_map(labeling)
    sample = next(iter(lab.values()))
    if isinstance(sample, int):
        if p != 2:
            raise InvalidLabelingError("signed labels only make sense for order 2")
        lab = {v: (abs(l), 0 if l > 0 else 1) for v, l in lab.items()}
    n = sc.dimension
    if n % (p - 1) != 0:
        raise InvalidLabelingError(f"dimension {n} is not (p-1)d for p={p}")
    d = n // (p - 1)
    if validate:
        validate_orbit_labeling(sc, OrbitLabeling(lab), d)
    for fs, j in _orbit_faces(sc, lab, d, p):
        return OrbitFace(fs, j)
    raise CertificateSearchError("no fully labelled orbit face found")


# ---------------------------------------------------------------------------
# rainbow labelling from covers


def default_tie_rule(options: list) -> Any:
    """Lowest set index first, then positive sign / zero shift first."""
    return options[0]


def rainbow_labeling(
    sc: SymmetricComplex,
    families,
    tie_rule: Callable[[list], Any] | None = None,
) -> SignedLabeling | OrbitLabeling:
    """Label a barycentric subdivision from one cover family per dimension.

    Every vertex of ``sc`` subdivides a face of the parent complex; a vertex
    subdividing a (k-1)-dimensional face is labelled by membership in family
    k's sets, then labels are propagated equivariantly from one canonical
    representative per orbit.  ``families`` needs attributes ``p``, ``d`` and
    a method ``oracle(family, index)`` returning objects with ``contains``.
    """
    if sc.parent_faces is None:
        raise InvalidLabelingError("complex has no subdivision metadata")
    p = families.p
    if p != sc.order:
        raise InvalidLabelingError("family group order does not match the complex")
    n_fam = sc.dimension + 1
    tie = tie_rule or default_tie_rule
    d = families.d

    labels: dict[int, Any] = {}
    for rep in sc.orbit_representatives:
        fam = len(sc.parent_faces[rep])
        if fam > n_fam:
            raise InvalidLabelingError("vertex subdivides a face of too high dimension")
        x = sc.coords[rep]
        options = []
        if p == 2:
            for i in range(1, d + 2):
                o = families.oracle(fam, i)
                if o.contains(x):
                    options.append(i)
                if o.contains(-x):
                    options.append(-i)
        else:
            for i in range(1, d + 1):
                o = families.oracle(fam, i)
                for g in range(p):
                    if o.contains(sc.shift_point(x, -g)):
                        options.append((i, g))
        if not options:
            raise CoverGapError(rep, fam, x)
        lv = tie(options)
        if p == 2:
            labels[rep] = lv
            labels[sc.action.apply(rep)] = -lv
        else:
            j, t = lv
            for s in range(p):
                labels[sc.action.apply(rep, s)] = (j, (t + s) % p)
    if p == 2:
        return SignedLabeling(labels)
    return OrbitLabeling(labels)
