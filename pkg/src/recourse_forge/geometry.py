"""Hyperplane projection geometry in latent space.

A hyperplane here is anything with ``normal`` and ``offset`` attributes
(see :class:`recourse_forge.surrogate.Hyperplane`), interpreted as the set
{z : <normal, z> + offset = 0}. Intersections are found by cyclic
alternating projections; search directions are made orthogonal to the
normals of features that must not change via modified Gram-Schmidt.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import SchemaError

# Orthogonality certificate for direction-vs-frozen-normal cosines.
TAU_ORTH = 1e-8
# Directions with norm at or below this are degenerate (unreachable).
TAU_DEG = 1e-10
# Default intersection residual tolerance, in latent units.
INTERSECTION_TOL = 1e-6
# Full alternating-projection cycles before giving up.
MAX_CYCLES = 20


def project_onto_hyperplane(z: np.ndarray, plane) -> np.ndarray:
    """Euclidean projection of z onto {v : <n, v> + b = 0}."""
    n = np.asarray(plane.normal, float)
    norm_sq = float(n @ n)
    if norm_sq <= 0:
        raise SchemaError("cannot project onto a zero-normal hyperplane")
    z = np.asarray(z, float)
    return z - ((float(n @ z) + plane.offset) / norm_sq) * n


def plane_residual(z: np.ndarray, planes: Sequence) -> float:
    """Largest normalized violation |<n_i, z> + b_i| / ||n_i||."""
    worst = 0.0
    for p in planes:
        n = np.asarray(p.normal, float)
        worst = max(worst, abs(float(n @ z) + p.offset) / float(np.linalg.norm(n)))
    return worst


@dataclass(frozen=True)
class IntersectionResult:
    point: np.ndarray
    residual: float
    converged: bool
    cycles: int


def project_onto_intersection(
    z: np.ndarray,
    planes: Sequence,
    tol: float = INTERSECTION_TOL,
    max_iter: int | None = None,
) -> IntersectionResult:
    """Cyclic alternating projections onto every plane in turn.

    Returns the best iterate seen even when the system is inconsistent
    (parallel planes with different offsets); ``converged`` reports whether
    the residual reached ``tol``.
    """
    if not planes:
        raise SchemaError("need at least one hyperplane")
    if max_iter is None:
        max_iter = MAX_CYCLES * len(planes)
    current = np.asarray(z, float).copy()
    best = current.copy()
    best_residual = plane_residual(current, planes)
    cycles = 0
    if best_residual <= tol:
        return IntersectionResult(best, best_residual, True, 0)
    steps = 0
    while steps < max_iter:
        for p in planes:
            current = project_onto_hyperplane(current, p)
            steps += 1
            if steps >= max_iter:
                break
        cycles += 1
        residual = plane_residual(current, planes)
        if residual < best_residual:
            best_residual = residual
            best = current.copy()
        if best_residual <= tol:
            return IntersectionResult(best, best_residual, True, cycles)
    return IntersectionResult(best, best_residual, False, cycles)


@dataclass(frozen=True)
class DirectionBasis:
    """Per-feature search directions orthogonal to all frozen normals."""

    directions: dict[str, np.ndarray]
    frozen: frozenset[str]
    free: frozenset[str]
    unreachable: frozenset[str] = field(default_factory=frozenset)

    def direction(self, name: str) -> np.ndarray:
        if name in self.unreachable:
            raise SchemaError(
                f"feature {name!r} lies in the span of frozen features"
            )
        return self.directions[name]


def mgs_qr(columns: Sequence[np.ndarray], tau_deg: float = TAU_DEG):
    """Modified Gram-Schmidt over the given column vectors.

    Returns one orthonormal vector per input column, or None where the
    column is (numerically) in the span of the previous ones.
    """
    q: list[np.ndarray | None] = []
    for col in columns:
        v = np.asarray(col, float).copy()
        for u in q:
            if u is not None:
                v -= u * float(u @ v)
        norm = float(np.linalg.norm(v))
        q.append(v / norm if norm > tau_deg else None)
    return q


def orthogonalize_directions(
    planes: Mapping[str, object],
    frozen: set[str] | frozenset[str],
    free: set[str] | frozenset[str],
    tau_deg: float = TAU_DEG,
) -> DirectionBasis:
    """Directions for free features orthogonal to frozen feature normals.

    The Q factor is built with the frozen normals leading so that its
    frozen columns span exactly the frozen normals; each free feature's
    direction is its own normal with the frozen-span component removed.
    Free features whose normals lie inside the frozen span come back in
    ``unreachable``.
    """
    frozen = frozenset(frozen)
    free = frozenset(free)
    if frozen & free:
        raise SchemaError(f"features both frozen and free: {sorted(frozen & free)}")
    if frozen | free != set(planes):
        raise SchemaError("frozen and free sets must partition the features")

    ordered = [n for n in planes if n in frozen] + [n for n in planes if n in free]
    q_cols = mgs_qr([np.asarray(planes[n].normal, float) for n in ordered], tau_deg)
    frozen_q = [
        q for name, q in zip(ordered, q_cols) if name in frozen and q is not None
    ]

    directions: dict[str, np.ndarray] = {}
    unreachable = set()
    for name in free:
        c = np.asarray(planes[name].normal, float).copy()
        for u in frozen_q:
            c -= u * float(u @ c)
        if float(np.linalg.norm(c)) <= tau_deg:
            unreachable.add(name)
        else:
            directions[name] = c
    return DirectionBasis(
        directions=directions,
        frozen=frozen,
        free=free,
        unreachable=frozenset(unreachable),
    )
