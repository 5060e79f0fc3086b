"""Newton (Newton-Schulz) matrix inversion through encoded compositions.

X_{t+1} = 2 X_t - X_t A X_t from X_0 = alpha0 A^T converges quadratically
whenever ||I - A X_0|| < 1; the exact identity I - A X_{t+1} =
(I - A X_t)^2 is the convergence engine and is exposed for verification.
Each iterate lives in a block encoding with an explicit running scale,
renormalized by preamplification so the blocks stay well conditioned.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .blockenc import (
    BlockEncoding,
    SparseHermitianMatrix,
    chain_product,
    dilate,
    linear_combination,
    next_pow2,
    pad_matrix,
    preamplify,
    sparse_oracle_encode,
)
from .estimation import QueryLedger


class DivergenceError(RuntimeError):
    """Residual left the contraction region."""


@dataclass(frozen=True)
class NewtonConfig:
    """Matrix, initial scale, and iteration count for one inversion run."""

    matrix: SparseHermitianMatrix | np.ndarray
    steps: int = 8
    alpha0: float | None = None
    eps: float = 0.0

    def dense(self) -> np.ndarray:
        if isinstance(self.matrix, SparseHermitianMatrix):
            return np.asarray(self.matrix.mat.real, dtype=float)
        return np.asarray(self.matrix, dtype=float)

    def scale_s(self) -> int:
        if isinstance(self.matrix, SparseHermitianMatrix):
            return self.matrix.sparsity
        return max(1, int((np.abs(self.dense()) > 0).sum(axis=1).max()))

    def initial_scale(self) -> float:
        if self.alpha0 is not None:
            return float(self.alpha0)
        a = self.dense()
        return 1.0 / (np.linalg.norm(a, 1) * np.linalg.norm(a, np.inf))

    def __post_init__(self):
        a = self.dense()
        if a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        if abs(np.linalg.det(a)) < 1e-300:
            raise ValueError("matrix must be invertible at desk scale")
        x0 = self.initial_scale() * a.T
        r0 = np.linalg.norm(np.eye(a.shape[0]) - a @ x0, 2)
        if r0 >= 1.0:
            raise ValueError(f"||I - A X0|| = {r0:.4f} >= 1; pick a smaller alpha0")


@dataclass
class NewtonResult:
    encoding: BlockEncoding
    scale: float
    residuals: list[float]
    block_errors: list[float]
    ledger: QueryLedger

    def inverse_estimate(self) -> np.ndarray:
        return self.encoding.block.real * self.scale


def residual_contraction_check(a: np.ndarray, x_t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of I - A X_{t+1} = (I - A X_t)^2 for assertion."""
    a = np.asarray(a, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    eye = np.eye(a.shape[0])
    lhs = eye - a @ (2.0 * x_t - x_t @ a @ x_t)
    rhs = (eye - a @ x_t) @ (eye - a @ x_t)
    return lhs, rhs


def newton_inverse(cfg: NewtonConfig) -> NewtonResult:
    """Iterate the inversion through product / combination encodings.

    Returns the final encoding (block = X_T / scale), the spectral
    residual ||I - A X_t|| per step, and the per-step deviation of the
    encoded iterate from the dense classical recursion.
    """
    a = cfg.dense()
    n = a.shape[0]
    n2 = next_pow2(n)
    s = cfg.scale_s()
    a_pad = pad_matrix(a, n2).real

    if isinstance(cfg.matrix, SparseHermitianMatrix):
        be_a = sparse_oracle_encode(cfg.matrix)
    else:
        be_a = replace(dilate(a_pad / s), alpha=float(s))
        be_a = be_a.tagged("entry_oracle")

    alpha0 = cfg.initial_scale()
    # the R_Y trick inserts alpha0 exactly: cos(theta/2) = alpha0 on the
    # rotation ancilla; at desk scale the product is folded into the block
    x0 = alpha0 * a_pad.T
    scale = max(1.0, 2.0 * np.linalg.norm(x0, 2))
    be_x = dilate(x0 / scale).tagged("newton_init")

    ledger = QueryLedger()
    eye_true = np.eye(n)
    x_classical = x0[:n, :n].copy()
    residuals = []
    block_errors = []
    for _ in range(cfg.steps):
        be_xax = chain_product([be_x, be_a, be_x])
        # 2 X - X A X = 2*scale*(X/scale) - scale^2*s*(XAX/(scale^2 s))
        c1, c2 = 2.0 * scale, scale * scale * s
        flat = [replace(be_x, alpha=1.0), replace(be_xax, alpha=1.0)]
        combo = linear_combination(flat, [c1, -c2])
        new_scale = 2.0 * max(c1, c2)

        # renormalize so the block keeps a workable norm
        bn = float(np.linalg.norm(combo.block, 2))
        if bn > 1e-300:
            boost = min(0.5 / bn, new_scale)
            if boost > 1.0:
                combo = preamplify(combo, boost)
                new_scale = new_scale / boost
        be_x, scale = combo.tagged("newton_step"), new_scale
        ledger.charge("blockenc_applications", be_x.uses)

        x_classical = 2.0 * x_classical - x_classical @ a @ x_classical
        x_now = (be_x.block.real * scale)[:n, :n]
        residual = float(np.linalg.norm(eye_true - a @ x_now, 2))
        residuals.append(residual)
        block_errors.append(float(np.linalg.norm(x_now - x_classical, 2)))
        if residual > 1.0 + 1e-9:
            raise DivergenceError(f"residual {residual:.4f} > 1; iteration diverged")

    return NewtonResult(be_x, scale, residuals, block_errors, ledger)
