"""Block encodings as explicit dense unitaries.

A block encoding embeds a target matrix (scaled by a subnormalization
factor alpha) in the top-left block of a unitary, selected by the
all-zeros state of an ancilla register.  Everything here is computed
exactly at desk scale: unitaries are dense complex arrays, composition
ops (product, linear combination, tensor, scaling, polynomial
transformation) manipulate them directly, and alpha / ancilla / error
metadata propagate alongside.

Register convention: joint basis index = anc_index * sys_dim + sys_index,
i.e. the ancilla register is most significant and the flagged block is
``U[:sys_dim, :sys_dim]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
from numpy.polynomial.chebyshev import Chebyshev

UNITARITY_TOL = 1e-10
KERNEL_TOL = 1e-12
# Composition results larger than this are re-dilated to one ancilla so
# dense simulation stays tractable; the metadata keeps the composed cost.
MAX_DENSE_DIM = 2048


class BlockEncodingError(ValueError):
    """Invalid construction or composition of a block encoding."""


class PolynomialBoundError(BlockEncodingError):
    """Polynomial violates the |P| <= 1/2 transform precondition."""


class InsufficientCopiesError(BlockEncodingError):
    """Not enough state copies for the requested simulation accuracy."""


def is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    return 1 << max(0, (int(n) - 1).bit_length())


def pad_vector(v: np.ndarray, dim: int) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    if len(v) > dim:
        raise ValueError(f"cannot pad length {len(v)} into dim {dim}")
    out = np.zeros(dim, dtype=complex)
    out[: len(v)] = v
    return out


def pad_matrix(a: np.ndarray, dim: int) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.shape[0] > dim:
        raise ValueError(f"cannot pad dim {a.shape[0]} into dim {dim}")
    out = np.zeros((dim, dim), dtype=complex)
    out[: a.shape[0], : a.shape[1]] = a
    return out


def psd_sqrt(h: np.ndarray, clamp: float = 1e-9) -> np.ndarray:
    """Square root of a Hermitian PSD matrix via eigendecomposition.

    Eigenvalues in [-clamp, 0] are clamped to 0 (numerical PSD drift);
    anything more negative raises.
    """
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    if w.min() < -clamp:
        raise BlockEncodingError(f"matrix not PSD: min eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def unitary_with_first_column(v: np.ndarray) -> np.ndarray:
    """Complex Householder completion: unitary U with U[:, 0] = v (unit v)."""
    v = np.asarray(v, dtype=complex).ravel()
    d = len(v)
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"first column must be unit norm, got {nrm}")
    v = v / nrm
    phase = v[0] / abs(v[0]) if abs(v[0]) > 1e-14 else 1.0
    vt = np.conj(phase) * v
    u = vt - np.eye(d, dtype=complex)[:, 0]
    nu = np.linalg.norm(u)
    if nu < 1e-14:
        return phase * np.eye(d, dtype=complex)
    h = np.eye(d, dtype=complex) - 2.0 * np.outer(u, u.conj()) / (nu * nu)
    return phase * h


def permute_registers(u: np.ndarray, dims: list[int], perm: list[int]) -> np.ndarray:
    """Reorder tensor registers of a square operator.

    ``dims`` are the register dimensions in the current order; ``perm[i]``
    names which current register lands at position i of the output.
    """
    k = len(dims)
    t = u.reshape(dims + dims)
    axes = list(perm) + [p + k for p in perm]
    t = t.transpose(axes)
    d = int(np.prod(dims))
    return t.reshape(d, d)


def partial_trace(rho: np.ndarray, sys_dim: int, env_dim: int) -> np.ndarray:
    """Trace out the trailing env register of an operator on sys (x) env."""
    t = rho.reshape(sys_dim, env_dim, sys_dim, env_dim)
    return np.einsum("iaja->ij", t)


def ry_gate(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


@dataclass(frozen=True)
class PureState:
    """Unit-norm complex amplitude vector on a power-of-two dimension."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex).ravel()
        object.__setattr__(self, "amplitudes", amp)
        if not is_pow2(len(amp)):
            raise ValueError(f"state dimension {len(amp)} is not a power of two")
        if abs(np.linalg.norm(amp) - 1.0) > 1e-12:
            raise ValueError("state is not normalized to 1e-12")

    @property
    def dim(self) -> int:
        return len(self.amplitudes)

    @property
    def qubits(self) -> int:
        return self.dim.bit_length() - 1

    @classmethod
    def from_vector(cls, v, dim: int | None = None) -> "PureState":
        v = np.asarray(v, dtype=complex).ravel()
        d = dim if dim is not None else next_pow2(len(v))
        v = pad_vector(v, d)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(v / n)


@dataclass(frozen=True)
class SparseHermitianMatrix:
    """Hermitian matrix with entry access and a per-row sparsity bound."""

    mat: np.ndarray
    sparsity: int

    def __post_init__(self):
        a = np.asarray(self.mat, dtype=complex)
        object.__setattr__(self, "mat", a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        if np.abs(a - a.conj().T).max() > 1e-10:
            raise ValueError("matrix is not Hermitian")
        nnz = int((np.abs(a) > 0).sum(axis=1).max()) if a.shape[0] else 0
        if nnz > self.sparsity:
            raise ValueError(f"row sparsity {nnz} exceeds declared {self.sparsity}")
        if np.linalg.norm(a, 2) >= 1.0 + 1e-12:
            raise ValueError("spectral norm must be < 1 (rescale the input)")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def entry(self, i: int, j: int) -> complex:
        return complex(self.mat[i, j])

    @classmethod
    def from_dense(cls, a: np.ndarray, sparsity: int | None = None) -> "SparseHermitianMatrix":
        a = np.asarray(a, dtype=complex)
        s = sparsity if sparsity is not None else int((np.abs(a) > 0).sum(axis=1).max())
        return cls(a, max(1, s))


@dataclass(frozen=True)
class ChebyshevPolynomial:
    """Polynomial in the Chebyshev basis with a certified sup-norm error.

    ``sup_error`` bounds |target - P| on [-1, 1] for whatever function the
    polynomial was fit to; it is scaled along with the coefficients.
    """

    cheb: Chebyshev
    degree: int
    sup_error: float

    def __call__(self, x):
        return self.cheb(x)

    def grid_max(self, npts: int = 10_001) -> float:
        xs = np.linspace(-1.0, 1.0, npts)
        return float(np.abs(self.cheb(xs)).max())

    def meets_transform_bound(self, npts: int = 10_001) -> bool:
        return self.grid_max(npts) <= 0.5 + 1e-12

    def rescaled(self, c: float) -> "ChebyshevPolynomial":
        return ChebyshevPolynomial(self.cheb * c, self.degree, self.sup_error * abs(c))

    def halved_for_transform(self) -> tuple["ChebyshevPolynomial", float]:
        """Rescale so the 1e4-grid max is exactly 1/2; returns (poly, factor).

        ``factor`` is the multiplier that restores the original polynomial,
        removable downstream with :func:`preamplify`.
        """
        m = self.grid_max()
        if m <= 0.5:
            return self, 1.0
        scale = 0.5 / m
        return self.rescaled(scale), 1.0 / scale


def exp_poly(beta: float, eps: float, max_degree: int = 400) -> ChebyshevPolynomial:
    """Chebyshev approximant of exp(-beta (1 - x)) on [-1, 1].

    Truncates at the first degree whose error on a 1e4-point grid is
    within ``eps``; the stated degree scaling is
    O(sqrt(max[beta, log(1/eps)] log(1/eps))).
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if not (0 < eps <= 0.5):
        raise ValueError("eps must lie in (0, 1/2]")
    f = lambda x: np.exp(-beta * (1.0 - x))  # noqa: E731
    xs = np.linspace(-1.0, 1.0, 10_000)
    fx = f(xs)
    for d in range(1, max_degree + 1):
        cheb = Chebyshev.interpolate(f, deg=d, domain=[-1.0, 1.0])
        err = float(np.abs(fx - cheb(xs)).max())
        if err <= eps:
            return ChebyshevPolynomial(cheb, d, err)
    raise ValueError(f"no degree <= {max_degree} meets eps={eps}")


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    """Dense unitary with block-encoding metadata.

    Fields
    ------
    unitary:     2^(anc_qubits + sys_qubits) square complex array.
    alpha:       subnormalization; alpha * block approximates the target.
    anc_qubits:  physical ancilla count of the stored unitary.
    sys_qubits:  system qubit count.
    eps:         certified additive error bound on the encoded block.
    uses:        elementary oracle/encoding applications one application
                 of this unitary costs under the query-count model.
    provenance:  chain of composing op names, kept for serialization.
    """

    unitary: np.ndarray
    alpha: float
    anc_qubits: int
    sys_qubits: int
    eps: float = 0.0
    uses: int = 1
    provenance: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        u = np.asarray(self.unitary, dtype=complex)
        object.__setattr__(self, "unitary", u)
        d = 1 << (self.anc_qubits + self.sys_qubits)
        if u.shape != (d, d):
            raise BlockEncodingError(
                f"unitary shape {u.shape} does not match {self.anc_qubits}+{self.sys_qubits} qubits"
            )
        if self.alpha < 1.0 - 1e-12:
            raise BlockEncodingError(f"alpha must be >= 1, got {self.alpha}")
        dev = np.abs(u.conj().T @ u - np.eye(d)).max()
        if dev > UNITARITY_TOL:
            raise BlockEncodingError(f"not unitary: max |U+U - I| = {dev:.3e}")

    @property
    def sys_dim(self) -> int:
        return 1 << self.sys_qubits

    @property
    def anc_dim(self) -> int:
        return 1 << self.anc_qubits

    @property
    def dim(self) -> int:
        return self.unitary.shape[0]

    @property
    def block(self) -> np.ndarray:
        n = self.sys_dim
        return self.unitary[:n, :n]

    def tagged(self, *ops: str) -> "BlockEncoding":
        return replace(self, provenance=self.provenance + ops)


def encoded_block(be: BlockEncoding) -> np.ndarray:
    """alpha times the top-left system block: the encoded matrix up to eps."""
    return be.alpha * be.block


def dilate(a: np.ndarray, target_eps: float = 0.0) -> BlockEncoding:
    """One-ancilla unitary dilation [[A, sqrt(I-AA+)], [sqrt(I-A+A), -A+]].

    Requires a square contraction on a power-of-two dimension.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise BlockEncodingError("dilation input must be square")
    n = a.shape[0]
    if not is_pow2(n):
        raise BlockEncodingError(f"dimension {n} is not a power of two (pad first)")
    nrm = np.linalg.norm(a, 2)
    if nrm > 1.0 + 1e-12:
        raise BlockEncodingError(f"spectral norm {nrm} exceeds 1")
    eye = np.eye(n)
    top_right = psd_sqrt(eye - a @ a.conj().T)
    bottom_left = psd_sqrt(eye - a.conj().T @ a)
    u = np.block([[a, top_right], [bottom_left, -a.conj().T]])
    return BlockEncoding(
        u, alpha=1.0, anc_qubits=1, sys_qubits=n.bit_length() - 1,
        eps=target_eps, uses=1, provenance=("dilate",),
    )


def compact(be: BlockEncoding) -> BlockEncoding:
    """Re-dilate the exact block to one physical ancilla, keeping metadata."""
    fresh = dilate(be.block)
    return BlockEncoding(
        fresh.unitary, alpha=be.alpha, anc_qubits=1, sys_qubits=be.sys_qubits,
        eps=be.eps, uses=be.uses, provenance=be.provenance + ("compact",),
    )


def _maybe_compact(be: BlockEncoding, limit: int = MAX_DENSE_DIM) -> BlockEncoding:
    return compact(be) if be.dim > limit else be


def _shrink_inputs(bes, extra_qubits: int):
    """Compact inputs whose joint literal construction would exceed the cap."""
    total = sum(b.anc_qubits for b in bes) + extra_qubits
    if (1 << total) <= MAX_DENSE_DIM:
        return list(bes)
    return [compact(b) if b.anc_qubits > 1 else b for b in bes]


def apply_to_state(be: BlockEncoding, phi: PureState) -> tuple[np.ndarray, float]:
    """Apply U to |0...0>|phi> and return (flagged branch, success prob).

    The flagged branch is block @ phi, i.e. A|phi>/alpha; its squared norm
    is the post-selection probability.
    """
    if phi.dim != be.sys_dim:
        raise BlockEncodingError(f"state dim {phi.dim} != system dim {be.sys_dim}")
    full = be.unitary[:, : be.sys_dim] @ phi.amplitudes
    branches = full.reshape(be.anc_dim, be.sys_dim)
    flagged = branches[0]
    return flagged, float(np.linalg.norm(flagged) ** 2)


def branch_decomposition(be: BlockEncoding, phi: PureState) -> np.ndarray:
    """All ancilla branches of U |0>|phi>, shape (anc_dim, sys_dim)."""
    full = be.unitary[:, : be.sys_dim] @ phi.amplitudes
    return full.reshape(be.anc_dim, be.sys_dim)


def product(be1: BlockEncoding, be2: BlockEncoding) -> BlockEncoding:
    """Encoding of A1 A2 with alpha1*alpha2 and joined ancillas."""
    if be1.sys_qubits != be2.sys_qubits:
        raise BlockEncodingError("system dimensions differ")
    be1, be2 = _shrink_inputs([be1, be2], be1.sys_qubits)
    a1, a2, n = be1.anc_dim, be2.anc_dim, be1.sys_dim
    # registers (anc1, anc2, sys); U2 acts on (anc2, sys), U1 on (anc1, sys)
    u2_ext = np.kron(np.eye(a1), be2.unitary)
    u1_ext = permute_registers(np.kron(be1.unitary, np.eye(a2)), [a1, n, a2], [0, 2, 1])
    out = BlockEncoding(
        u1_ext @ u2_ext,
        alpha=be1.alpha * be2.alpha,
        anc_qubits=be1.anc_qubits + be2.anc_qubits,
        sys_qubits=be1.sys_qubits,
        eps=be1.alpha * be2.eps + be2.alpha * be1.eps,
        uses=be1.uses + be2.uses,
        provenance=("product",) + be1.provenance + be2.provenance,
    )
    return _maybe_compact(out)


def chain_product(bes) -> BlockEncoding:
    """Left-to-right product of several encodings (A1 A2 ... Am)."""
    bes = list(bes)
    if not bes:
        raise BlockEncodingError("empty product")
    out = bes[0]
    for nxt in bes[1:]:
        out = product(out, nxt)
    return out


def matrix_power_encode(be: BlockEncoding, k: int) -> BlockEncoding:
    """k-fold self-product with the product metadata rules.

    The literal ancilla-joining construction grows the dimension by a
    factor 2^k; here the composed block is accumulated directly and
    re-dilated once (the compact form of the same composition), while
    alpha, eps and the cost model follow the k-fold product rules.
    """
    if k < 1:
        raise BlockEncodingError("power must be >= 1")
    if k == 1:
        return be
    blk = np.linalg.matrix_power(be.block, k)
    fresh = dilate(blk)
    return BlockEncoding(
        fresh.unitary,
        alpha=be.alpha**k,
        anc_qubits=1,
        sys_qubits=be.sys_qubits,
        eps=k * be.alpha ** (k - 1) * be.eps,
        uses=k * be.uses,
        provenance=be.provenance + (f"power[{k}]", "compact"),
    )


def tensor(bes) -> BlockEncoding:
    """Encoding of the Kronecker product, ancillas interleaved to the front."""
    bes = list(bes)
    if not bes:
        raise BlockEncodingError("empty tensor list")
    bes = _shrink_inputs(bes, sum(b.sys_qubits for b in bes))
    u_all = bes[0].unitary
    dims = [bes[0].anc_dim, bes[0].sys_dim]
    for b in bes[1:]:
        u_all = np.kron(u_all, b.unitary)
        dims += [b.anc_dim, b.sys_dim]
    m = len(bes)
    perm = [2 * i for i in range(m)] + [2 * i + 1 for i in range(m)]
    u = permute_registers(u_all, dims, perm)
    alpha = float(np.prod([b.alpha for b in bes]))
    eps = 0.0
    for i, b in enumerate(bes):
        eps += b.eps * float(np.prod([c.alpha for j, c in enumerate(bes) if j != i]))
    out = BlockEncoding(
        u, alpha=alpha,
        anc_qubits=sum(b.anc_qubits for b in bes),
        sys_qubits=sum(b.sys_qubits for b in bes),
        eps=eps,
        uses=sum(b.uses for b in bes),
        provenance=("tensor",),
    )
    return _maybe_compact(out)


def linear_combination(bes, coeffs) -> BlockEncoding:
    """Prepare-select encoding of (1/m) sum_i (c_i / max|c|) M_i.

    Signs are the +-1 case of the summation lemma; general coefficients
    and unequal alphas are folded into per-term scalings first, so the
    equal-weight form applies.  The result's alpha is max_i alpha_i.
    """
    bes = list(bes)
    coeffs = [float(c) for c in coeffs]
    if not bes:
        raise BlockEncodingError("empty combination")
    if len(coeffs) != len(bes):
        raise BlockEncodingError("one coefficient per term required")
    if any(c == 0 for c in coeffs):
        raise BlockEncodingError("coefficients must be nonzero")
    if len({b.sys_qubits for b in bes}) != 1:
        raise BlockEncodingError("system dimensions differ")
    m = len(bes)
    alpha_max = max(b.alpha for b in bes)
    c_max = max(abs(c) for c in coeffs)
    scaled = []
    for b, c in zip(bes, coeffs):
        f = (c_max / abs(c)) * (alpha_max / b.alpha)
        scaled.append(scale_down(b, f) if f > 1.0 + 1e-12 else b)
    scaled = _shrink_inputs(scaled, bes[0].sys_qubits)

    anc_q = max(b.anc_qubits for b in scaled)
    sel_q = max(1, math.ceil(math.log2(m))) if m > 1 else 0
    n = scaled[0].sys_dim
    rest = (1 << anc_q) * n

    w = np.zeros(1 << sel_q if sel_q else 1, dtype=complex)
    w[:m] = 1.0 / math.sqrt(m)
    sel_dim = len(w)

    select = np.zeros((sel_dim * rest, sel_dim * rest), dtype=complex)
    for j in range(sel_dim):
        blockj = np.eye(rest, dtype=complex)
        if j < m:
            b = scaled[j]
            pad = (1 << anc_q) // b.anc_dim
            uj = np.kron(np.eye(pad), b.unitary)
            blockj = float(np.sign(coeffs[j])) * uj
        select[j * rest : (j + 1) * rest, j * rest : (j + 1) * rest] = blockj

    if sel_q:
        wmat = unitary_with_first_column(w)
        prep = np.kron(wmat, np.eye(rest))
        u = prep.conj().T @ select @ prep
    else:
        u = select

    out = BlockEncoding(
        u, alpha=alpha_max,
        anc_qubits=sel_q + anc_q,
        sys_qubits=scaled[0].sys_qubits,
        eps=float(np.mean([b.eps for b in scaled])),
        uses=sum(b.uses for b in scaled),
        provenance=("linear_combination",),
    )
    return _maybe_compact(out)


def scale_down(be: BlockEncoding, p: float) -> BlockEncoding:
    """Encoding of A/p for p > 1 via a cos(theta/2) = 1/p rotation ancilla."""
    if p <= 1.0:
        raise BlockEncodingError("scale factor must exceed 1")
    theta = 2.0 * math.acos(1.0 / p)
    u = np.kron(ry_gate(theta), be.unitary)
    out = BlockEncoding(
        u, alpha=be.alpha,
        anc_qubits=be.anc_qubits + 1,
        sys_qubits=be.sys_qubits,
        eps=be.eps / p,
        uses=be.uses,
        provenance=be.provenance + ("scale_down",),
    )
    return _maybe_compact(out)


def diag_encode(c: float, dim: int) -> BlockEncoding:
    """Encoding of c * I_dim via R_Y(theta) (x) I with cos(theta/2) = c."""
    if not (0.0 < c <= 1.0):
        raise BlockEncodingError("c must lie in (0, 1]")
    if not is_pow2(dim):
        raise BlockEncodingError("dimension must be a power of two")
    theta = 2.0 * math.acos(c)
    u = np.kron(ry_gate(theta), np.eye(dim))
    return BlockEncoding(
        u, alpha=1.0, anc_qubits=1, sys_qubits=dim.bit_length() - 1,
        uses=1, provenance=("diag_encode",),
    )


def sparse_oracle_encode(a: SparseHermitianMatrix, eps: float = 0.0) -> BlockEncoding:
    """Encoding of A/s from the sparse entry oracle, alpha = s.

    Desk-scale realization dilates A/s directly; the oracle cost model
    O(log n + log^2.5(1/eps)) is carried in the provenance tag.
    """
    s = a.sparsity
    n2 = next_pow2(a.dim)
    base = dilate(pad_matrix(a.mat, n2) / s, target_eps=eps)
    return BlockEncoding(
        base.unitary, alpha=float(s), anc_qubits=1, sys_qubits=base.sys_qubits,
        eps=eps, uses=1, provenance=("sparse_oracle[logn+log2.5(1/eps)]",),
    )


def purified_density_encode(prep: np.ndarray, sys_dim: int) -> BlockEncoding:
    """Exact encoding of rho = Tr_env |Phi><Phi| from a preparation unitary.

    ``prep`` prepares |Phi> on system (x) environment from all-zeros; the
    system register is most significant.
    """
    prep = np.asarray(prep, dtype=complex)
    d = prep.shape[0]
    if prep.shape != (d, d) or np.abs(prep.conj().T @ prep - np.eye(d)).max() > 1e-10:
        raise BlockEncodingError("preparation must be unitary")
    if d % sys_dim != 0:
        raise BlockEncodingError("system dimension does not divide the total")
    env_dim = d // sys_dim
    phi = prep[:, 0].reshape(sys_dim, env_dim)
    rho = phi @ phi.conj().T
    base = dilate(rho)
    return base.tagged("purified_density")


def poly_transform(be: BlockEncoding, p: ChebyshevPolynomial) -> BlockEncoding:
    """Apply a bounded polynomial to the encoded block's singular values.

    Hermitian blocks get the eigenvalue transform (equivalent for definite
    parity and exactly what the diagonal examples require); non-Hermitian
    blocks get the singular-value transform restricted to the support, the
    kernel mapping to zero.  The result is re-dilated; the cost model
    charges d applications of the input encoding plus one controlled use,
    and eps propagates as 4 d sqrt(eps/alpha).
    """
    if not p.meets_transform_bound():
        raise PolynomialBoundError("|P| exceeds 1/2 on the test grid; rescale first")
    b = be.block
    if np.abs(b - b.conj().T).max() < 1e-12:
        w, v = np.linalg.eigh((b + b.conj().T) / 2)
        nb = (v * p(w)) @ v.conj().T
    else:
        u, s, vh = np.linalg.svd(b)
        keep = s > KERNEL_TOL
        nb = (u[:, keep] * p(s[keep])) @ vh[keep, :]
    fresh = dilate(nb)
    eps_out = 4.0 * p.degree * math.sqrt(max(be.eps, 0.0) / be.alpha)
    return BlockEncoding(
        fresh.unitary, alpha=1.0, anc_qubits=1, sys_qubits=be.sys_qubits,
        eps=eps_out, uses=p.degree * be.uses + 1,
        provenance=be.provenance + (f"poly_transform[d={p.degree}]",),
    )


def preamplify(be: BlockEncoding, factor: float) -> BlockEncoding:
    """Remove a known subnormalization: block scales up by ``factor``.

    Desk-scale realization re-dilates the exactly rescaled block; the cost
    ledger charges O(factor) uses of the input encoding.
    """
    if factor < 1.0 - 1e-12:
        raise BlockEncodingError("amplification factor must be >= 1")
    if abs(factor - 1.0) < 1e-15:
        return be.tagged("preamplify[1]")
    nb = be.block * factor
    if np.linalg.norm(nb, 2) > 1.0 + 1e-9:
        raise BlockEncodingError("factor pushes block norm above 1")
    fresh = dilate(nb)
    return BlockEncoding(
        fresh.unitary, alpha=max(be.alpha / factor, 1.0),
        anc_qubits=1, sys_qubits=be.sys_qubits,
        eps=be.eps * factor,
        uses=math.ceil(factor) * be.uses,
        provenance=be.provenance + (f"preamplify[{factor:.4g}]",),
    )


def _swap_operator(d: int) -> np.ndarray:
    s = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            s[i * d + j, j * d + i] = 1.0
    return s


def density_exponentiation(copies, t: float, eps: float) -> tuple[np.ndarray, int]:
    """Approximate exp(-i rho t) from identical copies via partial swaps.

    Runs N = ceil(t^2/eps) steps of sigma -> Tr_1[e^{-iS t/N} (rho (x) sigma)
    e^{iS t/N}], extracts the nearest unitary from the resulting channel
    (global phase aligned against the exact exponential of the input copy),
    and returns (unitary, copies consumed).
    """
    copies = list(copies)
    if not copies:
        raise InsufficientCopiesError("no copies supplied")
    rho = np.asarray(copies[0], dtype=complex)
    d = rho.shape[0]
    if abs(np.trace(rho).real - 1.0) > 1e-9 or np.abs(rho - rho.conj().T).max() > 1e-9:
        raise BlockEncodingError("copies must be density matrices")
    for extra in copies[1:]:
        if extra is not rho and not np.allclose(extra, rho, atol=1e-12):
            raise BlockEncodingError("copies must be identical")
    n_steps = math.ceil(t * t / eps) if t != 0 else 0
    if n_steps == 0:
        return np.eye(d, dtype=complex), 0
    if len(copies) < n_steps:
        raise InsufficientCopiesError(f"need {n_steps} copies, got {len(copies)}")

    delta = t / n_steps
    u_step = scipy.linalg.expm(-1j * delta * _swap_operator(d))
    # superoperator of one partial-swap step, column-stacked on vec(sigma)
    m = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            out = u_step @ np.kron(rho, e) @ u_step.conj().T
            m[:, i * d + j] = partial_trace(
                permute_registers(out, [d, d], [1, 0]), d, d
            ).reshape(-1)
    mn = np.linalg.matrix_power(m, n_steps)

    # Choi top eigenvector of a near-unitary channel is vec of the unitary
    choi = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            phi_ij = mn[:, i * d + j].reshape(d, d)
            choi += np.kron(np.outer(np.eye(d)[:, i], np.eye(d)[:, j].conj()), phi_ij)
    w_eig, v_eig = np.linalg.eigh(choi)
    top = v_eig[:, -1].reshape(d, d).T * math.sqrt(d)
    uu, _, vvh = np.linalg.svd(top)
    w = uu @ vvh

    target = scipy.linalg.expm(-1j * rho * t)
    phase = np.trace(w.conj().T @ target)
    if abs(phase) > 1e-12:
        w = w * (phase / abs(phase))
    return w, n_steps


def log_unitary(exp_rho: np.ndarray, delta: float, noise_seed: int | None = None) -> BlockEncoding:
    """Encoding of pi*rho/4 from the unitary exp(-i rho), within delta.

    Desk-scale realization takes the principal matrix logarithm; delta is
    injected as a deterministic seed-controlled Hermitian perturbation of
    spectral norm delta when ``noise_seed`` is given, otherwise only
    recorded as the certified bound.  The cost ledger charges
    ceil(2 log2(1/delta)) controlled applications.
    """
    u = np.asarray(exp_rho, dtype=complex)
    d = u.shape[0]
    if np.abs(u.conj().T @ u - np.eye(d)).max() > 1e-8:
        raise BlockEncodingError("input is not unitary")
    rho = 1j * scipy.linalg.logm(u)
    rho = (rho + rho.conj().T) / 2
    if noise_seed is not None and delta > 0:
        rng = np.random.default_rng(noise_seed)
        h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        h = (h + h.conj().T) / 2
        rho = rho + delta * h / np.linalg.norm(h, 2)
    base = dilate(np.pi * rho / 4.0)
    cost = math.ceil(2.0 * math.log2(1.0 / delta)) if 0 < delta < 1 else 1
    return BlockEncoding(
        base.unitary, alpha=1.0, anc_qubits=1, sys_qubits=base.sys_qubits,
        eps=delta, uses=cost, provenance=("log_unitary",),
    )
