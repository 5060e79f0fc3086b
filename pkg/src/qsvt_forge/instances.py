"""Seeded instance generators for experiments and tests.

Matrices are built by planting a spectrum with the requested top gap
(and optionally a bottom gap) inside (1/kappa, 1), then applying rounds
of Givens rotations on disjoint index pairs; rotations that would push
any row above the sparsity budget are skipped, so the similarity stays
exactly orthogonal and the spectrum is preserved to machine precision.
"""

from __future__ import annotations

import math

import numpy as np

from .blockenc import SparseHermitianMatrix
from .graddesc import TensorPolynomial


class InfeasibleInstanceError(ValueError):
    """The requested (dim, sparsity, gap) combination cannot be planted."""


def plant_spectrum(dim: int, gap: float, seed: int, kappa: float = 10.0,
                   bottom_gap: float | None = None, top: float = 0.9) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo = 1.0 / kappa
    second = top - gap
    if second <= lo + 1e-6:
        raise InfeasibleInstanceError(f"gap {gap} leaves no room in ({lo}, {top})")
    eigs = [top, second]
    needed = dim - 2
    floor = lo + (bottom_gap or 0.0)
    if needed > 0:
        if bottom_gap is not None:
            eigs.append(lo)
            needed -= 1
        if needed > 0:
            if floor >= second - 1e-6:
                raise InfeasibleInstanceError("bottom gap leaves no interior room")
            interior = rng.uniform(floor + 1e-4, second - 1e-4, size=needed)
            eigs.extend(interior.tolist())
    return np.sort(np.array(eigs[:dim]))[::-1]


def _disjoint_pairs(dim: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    idx = rng.permutation(dim)
    return [(int(idx[2 * i]), int(idx[2 * i + 1])) for i in range(dim // 2)]


def _givens_conjugate(m: np.ndarray, i: int, j: int, theta: float) -> np.ndarray:
    g = np.eye(m.shape[0])
    c, s = math.cos(theta), math.sin(theta)
    g[i, i] = c
    g[j, j] = c
    g[i, j] = -s
    g[j, i] = s
    return g @ m @ g.T


def generate_instance(dim: int, sparsity: int, gap: float, seed: int,
                      kappa: float = 10.0, bottom_gap: float | None = None,
                      rounds: int = 4) -> SparseHermitianMatrix:
    """Seeded s-sparse Hermitian matrix with a planted spectrum."""
    if sparsity < 1:
        raise InfeasibleInstanceError("sparsity must be >= 1")
    eigs = plant_spectrum(dim, gap, seed, kappa, bottom_gap)
    rng = np.random.default_rng(seed + 1)
    m = np.diag(rng.permutation(eigs))
    if sparsity == 1:
        return SparseHermitianMatrix(m, 1)
    for _ in range(rounds):
        for i, j in _disjoint_pairs(dim, rng):
            theta = rng.uniform(0.1, math.pi / 2 - 0.1)
            cand = _givens_conjugate(m, i, j, theta)
            cand[np.abs(cand) < 1e-14] = 0.0
            if int((np.abs(cand) > 0).sum(axis=1).max()) <= sparsity:
                m = cand
    m = (m + m.T) / 2
    return SparseHermitianMatrix(m, sparsity)


def generate_problem(n: int, p: int, terms: int, seed: int,
                     diagonal: bool = True) -> TensorPolynomial:
    """Random homogeneous degree-2p objective with ||A|| < 1.

    Diagonal factors keep the assembled tensor 1-sparse, the regime the
    success-probability floors are checked in; dense factors exercise the
    general identities.
    """
    rng = np.random.default_rng(seed)
    factors = []
    for _ in range(terms):
        term = []
        for _ in range(p):
            if diagonal:
                f = np.diag(rng.uniform(0.2, 0.9, size=n))
            else:
                f = rng.standard_normal((n, n))
                f = (f + f.T) / 2
            term.append(f)
        factors.append(tuple(term))
    total = None
    for term in factors:
        block = term[0]
        for f in term[1:]:
            block = np.kron(block, f)
        total = block if total is None else total + block
    norm = np.linalg.norm(total, 2)
    scale = (0.9 / norm) ** (1.0 / p)
    factors = [tuple(scale * f for f in term) for term in factors]
    return TensorPolynomial.from_factors(factors)
