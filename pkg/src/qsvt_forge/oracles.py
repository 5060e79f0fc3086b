"""Independent brute-force oracles for the verification suite.

Everything here validates the pipelines from the outside: dense
eigensolves, dense matrix functions, monomial-expansion polynomial
evaluation and gradients, finite differences, and the classical descent
and Newton recursions.  This module must not import from the pipeline
modules it checks; the boundary is asserted by a test.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class OracleReport:
    """One compared quantity: oracle value vs pipeline value."""

    name: str
    oracle_value: float
    pipeline_value: float

    @property
    def abs_error(self) -> float:
        return abs(self.oracle_value - self.pipeline_value)

    @property
    def rel_error(self) -> float:
        denom = max(abs(self.oracle_value), 1e-300)
        return self.abs_error / denom


def dense_eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full spectrum of a Hermitian matrix, sorted by descending magnitude."""
    a = np.asarray(a, dtype=complex)
    if np.abs(a - a.conj().T).max() > 1e-10:
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh(a)
    order = np.argsort(-np.abs(w))
    return w[order].real, v[:, order]


def dense_matrix_power(a: np.ndarray, k: int) -> np.ndarray:
    return np.linalg.matrix_power(np.asarray(a, dtype=complex), k)


def dense_expm(a: np.ndarray) -> np.ndarray:
    return scipy.linalg.expm(np.asarray(a, dtype=complex))


def dense_logm(a: np.ndarray) -> np.ndarray:
    return scipy.linalg.logm(np.asarray(a, dtype=complex))


def dense_sqrtm(a: np.ndarray) -> np.ndarray:
    return scipy.linalg.sqrtm(np.asarray(a, dtype=complex))


def dense_inverse(a: np.ndarray) -> np.ndarray:
    return np.linalg.inv(np.asarray(a, dtype=float))


def monomial_eval(a_tensor: np.ndarray, n: int, p: int, x: np.ndarray) -> float:
    """f(x) = (1/2) sum over 2p indices of A[...] x_{m1} ... x_{m2p}.

    Brute-force loop over the full coefficient tensor (A given as the
    n^p x n^p matrix), independent of any tensor-algebra shortcut.
    """
    x = np.asarray(x, dtype=float)
    at = np.asarray(a_tensor, dtype=float).reshape((n,) * (2 * p))
    total = 0.0
    for idx in itertools.product(range(n), repeat=2 * p):
        coeff = at[idx]
        if coeff == 0.0:
            continue
        term = coeff
        for i in idx:
            term *= x[i]
        total += term
    return 0.5 * total


def monomial_gradient(a_tensor: np.ndarray, n: int, p: int, x: np.ndarray) -> np.ndarray:
    """Analytic gradient of monomial_eval by term-wise differentiation."""
    x = np.asarray(x, dtype=float)
    at = np.asarray(a_tensor, dtype=float).reshape((n,) * (2 * p))
    grad = np.zeros(n)
    for idx in itertools.product(range(n), repeat=2 * p):
        coeff = at[idx]
        if coeff == 0.0:
            continue
        for pos in range(2 * p):
            term = coeff
            for q, i in enumerate(idx):
                if q != pos:
                    term *= x[i]
            grad[idx[pos]] += term
    return 0.5 * grad


def fd_gradient(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central differences with one Richardson extrapolation level.

    Plain central differences are O(h^2); the (4 g(h/2) - g(h)) / 3
    combination cancels the next term, justifying 1e-5 comparisons at
    h = 1e-4.
    """
    x = np.asarray(x, dtype=float)

    def central(step):
        g = np.zeros_like(x)
        for i in range(len(x)):
            e = np.zeros_like(x)
            e[i] = step
            g[i] = (f(x + e) - f(x - e)) / (2 * step)
        return g

    g1 = central(h)
    g2 = central(h / 2)
    return (4.0 * g2 - g1) / 3.0


def classical_gd_recursion(grad, x0: np.ndarray, eta: float, steps: int,
                           spherical: bool = False) -> list[np.ndarray]:
    """x_{t+1} = x_t - eta grad(x_t), renormalized each step if spherical."""
    xs = [np.asarray(x0, dtype=float).copy()]
    for _ in range(steps):
        x = xs[-1] - eta * np.asarray(grad(xs[-1]), dtype=float)
        if spherical:
            x = x / np.linalg.norm(x)
        xs.append(x)
    return xs


def classical_density_recursion(d_of_x, x0: np.ndarray, eta: float, steps: int):
    """Rank-one density form of plain descent: x <- (I - eta D(x)) x."""
    xs = [np.asarray(x0, dtype=float).copy()]
    for _ in range(steps):
        x = xs[-1]
        d = np.asarray(d_of_x(x), dtype=float)
        xs.append(x - eta * (d @ x))
    return xs


def classical_newton_schulz(a: np.ndarray, x0: np.ndarray, steps: int) -> list[np.ndarray]:
    """X_{t+1} = 2 X_t - X_t A X_t starting from X_0."""
    a = np.asarray(a, dtype=float)
    xs = [np.asarray(x0, dtype=float).copy()]
    for _ in range(steps):
        x = xs[-1]
        xs.append(2.0 * x - x @ a @ x)
    return xs
