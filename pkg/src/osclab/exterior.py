"""Decomposable k-vectors in Lambda^k(R^n) and the volume-element norm.

Coordinates are indexed by the strictly increasing index combinations in
lexicographic order; the coordinate for (i1 < ... < im) is the maximal
minor of the n x m matrix of the input vectors. The Euclidean norm of the
coordinate array equals sqrt(det(Gram)) of the frame, which is the scalar
the swept-volume integrand is built from.

Inputs are canonically sorted (with the permutation sign tracked) before
the minors are computed, so swapping two input vectors negates every
coordinate bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np


class DimensionMismatch(Exception):
    pass


def index_combinations(n: int, k: int) -> list[tuple[int, ...]]:
    return list(combinations(range(n), k))


@dataclass(frozen=True)
class Blade:
    n: int
    grade: int
    coords: np.ndarray

    def __post_init__(self):
        if self.coords.shape != (comb(self.n, self.grade),):
            raise DimensionMismatch("coordinate array length must be C(n, k)")

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coords) <= tol))


def _sort_sign(vectors: list[np.ndarray]) -> tuple[list[np.ndarray], float]:
    order = sorted(range(len(vectors)), key=lambda i: tuple(vectors[i]))
    # parity by counting inversions (m <= 8, quadratic is fine)
    inversions = sum(
        1
        for a in range(len(order))
        for b in range(a + 1, len(order))
        if order[a] > order[b]
    )
    return [vectors[i] for i in order], -1.0 if inversions % 2 else 1.0


def wedge(vectors) -> Blade:
    """Wedge product of m vectors in R^n, m <= n."""
    vecs = [np.asarray(v, dtype=float) for v in vectors]
    m = len(vecs)
    if m == 0:
        raise DimensionMismatch("wedge needs at least one vector")
    n = vecs[0].shape[0]
    if any(v.shape != (n,) for v in vecs):
        raise DimensionMismatch("all vectors must have the same dimension")
    if m > n:
        raise DimensionMismatch(f"cannot wedge {m} vectors in dimension {n}")
    sorted_vecs, sign = _sort_sign(vecs)
    A = np.stack(sorted_vecs, axis=1)  # n x m, columns are the vectors
    coords = np.empty(comb(n, m))
    if m == 1:
        coords[:] = sign * A[:, 0]
    else:
        for idx, rows in enumerate(index_combinations(n, m)):
            coords[idx] = sign * np.linalg.det(A[list(rows), :])
    return Blade(n=n, grade=m, coords=coords)


def blade_norm(b: Blade) -> float:
    return float(np.linalg.norm(b.coords))


def frame_norm(vectors) -> float:
    """sqrt(det(Gram)) of the frame, via the blade coordinates."""
    return blade_norm(wedge(vectors))


def det_ring(matrix: list[list]) -> object:
    """Determinant over any commutative ring (entries support + - *).

    Laplace expansion along the first column; intended for small matrices
    of Jet entries where LAPACK does not apply.
    """
    size = len(matrix)
    if size == 1:
        return matrix[0][0]
    if size == 2:
        return matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0]
    total = None
    for r in range(size):
        minor = [row[1:] for i, row in enumerate(matrix) if i != r]
        term = matrix[r][0] * det_ring(minor)
        if r % 2:
            term = -term
        total = term if total is None else total + term
    return total


def wedge_ring(vectors: list[list]) -> list:
    """Blade coordinates (lexicographic) for vectors with ring entries.

    `vectors` is a list of m vectors, each a length-n list of ring
    elements. Returns the C(n, m) coordinates in combination order.
    """
    m = len(vectors)
    n = len(vectors[0])
    if any(len(v) != n for v in vectors):
        raise DimensionMismatch("all vectors must have the same dimension")
    if m > n:
        raise DimensionMismatch(f"cannot wedge {m} vectors in dimension {n}")
    out = []
    for rows in index_combinations(n, m):
        out.append(det_ring([[vectors[c][r] for c in range(m)] for r in rows]))
    return out
