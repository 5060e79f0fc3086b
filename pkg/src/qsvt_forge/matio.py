"""File formats: sparse Hermitian matrices, tensor problems, encodings.

Matrix text format: a header line ``dim n sparsity s`` followed by one
``row col re im`` line per stored nonzero.  Tensor problem format: header
``n p K s`` followed by K*p factor matrices, each n rows of n floats.
Block encodings serialize to an .npz container plus a JSON metadata
sidecar carrying alpha, ancilla count, eps and the provenance chain.

Writers emit canonical row-major order with shortest-roundtrip floats so
the same object always produces byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .blockenc import BlockEncoding, SparseHermitianMatrix


def _fmt(x: float) -> str:
    return repr(float(x))


def save_matrix(path, a: SparseHermitianMatrix | np.ndarray, sparsity: int | None = None) -> None:
    if not isinstance(a, SparseHermitianMatrix):
        a = SparseHermitianMatrix.from_dense(np.asarray(a), sparsity)
    lines = [f"dim {a.dim} sparsity {a.sparsity}"]
    for i in range(a.dim):
        for j in range(a.dim):
            v = a.mat[i, j]
            if v != 0:
                lines.append(f"{i} {j} {_fmt(v.real)} {_fmt(v.imag)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_matrix(path) -> SparseHermitianMatrix:
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise ValueError(f"{path}: empty matrix file")
    head = text[0].split()
    if len(head) != 4 or head[0] != "dim" or head[2] != "sparsity":
        raise ValueError(f"{path}: malformed header {text[0]!r}")
    n, s = int(head[1]), int(head[3])
    mat = np.zeros((n, n), dtype=complex)
    for line in text[1:]:
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"{path}: malformed entry line {line!r}")
        i, j = int(parts[0]), int(parts[1])
        mat[i, j] = float(parts[2]) + 1j * float(parts[3])
    return SparseHermitianMatrix(mat, s)


def save_problem(path, n: int, p: int, factors: list[tuple[np.ndarray, ...]],
                 sparsity: int) -> None:
    """Write a degree-2p tensor objective as K terms of p factor matrices."""
    lines = [f"{n} {p} {len(factors)} {sparsity}"]
    for term in factors:
        if len(term) != p:
            raise ValueError(f"each term needs {p} factors, got {len(term)}")
        for fac in term:
            fac = np.asarray(fac, dtype=float)
            if fac.shape != (n, n):
                raise ValueError(f"factor shape {fac.shape} != ({n}, {n})")
            for row in fac:
                lines.append(" ".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_problem(path) -> tuple[int, int, list[tuple[np.ndarray, ...]], int]:
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise ValueError(f"{path}: empty problem file")
    head = text[0].split()
    if len(head) != 4:
        raise ValueError(f"{path}: malformed header {text[0]!r}")
    n, p, k, s = (int(v) for v in head)
    rows = text[1:]
    if len(rows) != k * p * n:
        raise ValueError(f"{path}: expected {k * p * n} matrix rows, got {len(rows)}")
    factors = []
    pos = 0
    for _ in range(k):
        term = []
        for _ in range(p):
            fac = np.array(
                [[float(v) for v in rows[pos + r].split()] for r in range(n)]
            )
            pos += n
            term.append(fac)
        factors.append(tuple(term))
    return n, p, factors, s


def save_encoding(be: BlockEncoding, path) -> None:
    """Binary container (.npz) plus JSON sidecar (.json) for an encoding."""
    path = Path(path)
    np.savez_compressed(path.with_suffix(".npz"), unitary=be.unitary)
    meta = {
        "alpha": be.alpha,
        "anc_qubits": be.anc_qubits,
        "sys_qubits": be.sys_qubits,
        "eps": be.eps,
        "uses": be.uses,
        "provenance": list(be.provenance),
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")


def load_encoding(path) -> BlockEncoding:
    path = Path(path)
    unitary = np.load(path.with_suffix(".npz"))["unitary"]
    meta = json.loads(path.with_suffix(".json").read_text())
    return BlockEncoding(
        unitary,
        alpha=meta["alpha"],
        anc_qubits=meta["anc_qubits"],
        sys_qubits=meta["sys_qubits"],
        eps=meta["eps"],
        uses=meta["uses"],
        provenance=tuple(meta["provenance"]),
    )
