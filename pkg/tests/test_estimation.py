"""Measurement primitives: values, modes, and ledger contracts."""

import math

import numpy as np
import pytest

from qsvt_forge.blockenc import PureState, dilate, tensor
from qsvt_forge.estimation import (
    EstimatorMode,
    Purification,
    QueryLedger,
    amplitude_estimate,
    hadamard_overlap,
    trace_estimate,
)

rng = np.random.default_rng(77)


def test_amplitude_zero_flag():
    state = np.zeros(8, dtype=complex)
    state[4] = 1.0
    got = amplitude_estimate(state, slice(0, 4), 1e-3, EstimatorMode.exact())
    assert got == 0.0


def test_amplitude_reads_half():
    state = np.zeros(8, dtype=complex)
    state[0] = math.sqrt(0.25)
    state[5] = math.sqrt(0.75)
    got = amplitude_estimate(state, slice(0, 4), 1e-3, EstimatorMode.exact())
    assert abs(got - 0.5) < 1e-14


def test_amplitude_perturbed_alternates_and_bounds():
    state = np.zeros(4, dtype=complex)
    state[0] = 0.6
    state[3] = 0.8
    mode = EstimatorMode.perturbed(eps=1e-3, seed=0)
    ledger = QueryLedger()
    vals = [amplitude_estimate(state, slice(0, 2), 1e-3, mode, ledger) for _ in range(4)]
    devs = [v - 0.6 for v in vals]
    assert all(abs(abs(d) - 1e-3) < 1e-12 for d in devs)
    assert devs[0] > 0 > devs[1] and devs[2] > 0 > devs[3]


def test_amplitude_seed_reproducible():
    state = np.zeros(4, dtype=complex)
    state[0] = 0.6
    state[3] = 0.8
    mode = EstimatorMode.sampled(shots=5000, seed=9)
    a = amplitude_estimate(state, slice(0, 2), 1e-2, mode, QueryLedger())
    b = amplitude_estimate(state, slice(0, 2), 1e-2, mode, QueryLedger())
    assert a == b


def test_amplitude_sampled_convergence_rate():
    # RMSE shrinks like 1/sqrt(shots) over 200 seeds
    state = np.zeros(4, dtype=complex)
    state[0] = 0.6
    state[3] = 0.8
    errs = {}
    for shots in (100, 10_000):
        sq = []
        for seed in range(200):
            mode = EstimatorMode.sampled(shots=shots, seed=seed)
            est = amplitude_estimate(state, slice(0, 2), 1e-2, mode, QueryLedger())
            sq.append((est - 0.6) ** 2)
        errs[shots] = math.sqrt(np.mean(sq))
    ratio = errs[100] / errs[10_000]
    assert 5.0 <= ratio <= 20.0  # ideal 10 at rate 1/sqrt(shots)


def test_amplitude_ledger_scaling():
    state = np.zeros(4, dtype=complex)
    state[0] = 1.0
    for eps in (1e-1, 1e-2, 1e-3):
        ledger = QueryLedger()
        amplitude_estimate(state, slice(0, 2), eps, EstimatorMode.exact(), ledger,
                           prep_uses=3)
        assert ledger.get("estimator_uses") == math.ceil(1.0 / eps)
        assert ledger.get("blockenc_applications") == 3 * math.ceil(1.0 / eps)


def test_amplitude_rejects_bad_eps():
    with pytest.raises(ValueError):
        amplitude_estimate(np.ones(2), slice(0, 1), 0.0, EstimatorMode.exact())


def test_amplitude_pipeline_target_on_diagonal_instance():
    # the estimated quantity of a 3x3 diagonal run matches the scalar
    # recomputation exp(-beta (1 - p_k <x_k,phi>)) <x_k,phi> within eps
    from qsvt_forge.blockenc import SparseHermitianMatrix
    from qsvt_forge.power_eig import PowerConfig, build_rho_k

    a = np.diag([0.9, 0.3, 0.2])
    m = SparseHermitianMatrix(a, 1)
    x0 = np.ones(3) / math.sqrt(3)
    phi = np.array([0.8, 0.6, 0.0])
    cfg = PowerConfig(matrix=m, k=4, x0=x0, phi=phi, eps=1e-4)
    res = build_rho_k(cfg)
    xk = np.array([0.9**4, 0.3**4, 0.2**4]) / math.sqrt(3)
    p_k = float(xk @ xk)
    xk_hat = np.zeros(4)
    xk_hat[:3] = xk / np.linalg.norm(xk)
    ov = float(xk_hat[:3] @ phi)
    scalar = math.exp(-0.01 * (1.0 - p_k * ov)) * ov
    assert abs(res.p_k - p_k) < 1e-14
    assert abs(res.c - scalar) <= 1e-4


# ------------------------------------------------------------ trace_estimate

def test_trace_half_identity():
    be = dilate(np.eye(4) / 2)
    x = rng.standard_normal(4)
    x /= np.linalg.norm(x)
    pur = Purification.from_density(np.outer(x, x))
    got = trace_estimate(be, pur, 1e-3, EstimatorMode.exact())
    assert abs(got - 0.5) < 1e-12


def test_trace_diagonal_projector():
    be = dilate(np.diag([0.3, -0.3]))
    pur = Purification.from_density(np.diag([1.0, 0.0]))
    got = trace_estimate(be, pur, 1e-3, EstimatorMode.exact())
    assert abs(got - 0.3) < 1e-12


def test_trace_against_unitary_purification():
    rho = np.diag([0.5, 0.25, 0.25, 0.0])
    pur = Purification.from_density(rho)
    u = pur.as_unitary()
    be = dilate(np.diag([0.2, 0.4, -0.1, 0.3]))
    got = trace_estimate(be, u, 1e-3, EstimatorMode.exact(), sys_dim=4)
    ref = float(np.trace(be.block @ rho).real)
    assert abs(got - ref) < 1e-10


def test_trace_tensor_witness_matches_dense():
    # Tr((M1 (x) A/s) rho) against the dense oracle on a random density
    m1 = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
    a = rng.standard_normal((4, 4))
    a = (a + a.T) / 2
    a *= 0.8 / np.linalg.norm(a, 2)
    from qsvt_forge.blockenc import BlockEncoding, SparseHermitianMatrix, sparse_oracle_encode

    be_m = BlockEncoding(m1.astype(complex), alpha=1.0, anc_qubits=0, sys_qubits=1)
    be_a = sparse_oracle_encode(SparseHermitianMatrix.from_dense(a))
    be = tensor([be_m, be_a])
    g = rng.standard_normal((8, 8))
    rho = g @ g.T
    rho /= np.trace(rho)
    got = trace_estimate(be, Purification.from_density(rho), 1e-3, EstimatorMode.exact())
    ref = float(np.trace(np.kron(m1, a / be_a.alpha) @ rho).real)
    assert abs(got - ref) < 1e-10


def test_trace_dimension_mismatch():
    be = dilate(np.eye(4) / 2)
    with pytest.raises(ValueError):
        trace_estimate(be, Purification.from_density(np.eye(2) / 2), 1e-3,
                       EstimatorMode.exact())


def test_trace_on_pipeline_density_matches_dense():
    # Tr((M1 (x) A/s) rho_k) for a seeded run equals the dense trace
    from qsvt_forge.blockenc import BlockEncoding, sparse_oracle_encode
    from qsvt_forge.instances import generate_instance
    from qsvt_forge.power_eig import HADAMARD, PowerConfig, build_rho_k

    m = generate_instance(8, 2, 0.15, seed=6)
    cfg = PowerConfig(matrix=m, k=4, seed=1)
    res = build_rho_k(cfg)
    be_a = sparse_oracle_encode(m)
    be_m1 = BlockEncoding(HADAMARD.astype(complex), alpha=1.0, anc_qubits=0,
                          sys_qubits=1)
    be = tensor([be_m1, be_a])
    got = trace_estimate(be, Purification.from_density(res.rho_k), 1e-3,
                         EstimatorMode.exact())
    ref = float(np.trace(np.kron(HADAMARD, be_a.block) @ res.rho_k).real)
    assert abs(got - ref) < 1e-12


# ---------------------------------------------------------- hadamard_overlap

def test_overlap_self_is_one():
    psi = PureState.from_vector(rng.standard_normal(8))
    got = hadamard_overlap(psi, psi, 1e-3, EstimatorMode.exact())
    assert abs(got - 1.0) < 1e-12


def test_overlap_orthogonal_is_zero():
    psi = PureState(np.eye(4)[:, 0].astype(complex))
    phi = PureState(np.eye(4)[:, 2].astype(complex))
    got = hadamard_overlap(psi, phi, 1e-3, EstimatorMode.exact())
    assert got == 0.0


def test_overlap_beta_witness():
    # beta = <alpha| x x^T |alpha> via the applied-encoding overlap
    from qsvt_forge.graddesc import measure_beta

    x = rng.standard_normal(8)
    x /= np.linalg.norm(x)
    alpha = rng.standard_normal(8)
    alpha /= np.linalg.norm(alpha)
    be = dilate(np.outer(x, x))
    got = measure_beta(be, alpha, 1e-4, EstimatorMode.exact())
    assert abs(got - float(alpha @ np.outer(x, x) @ alpha)) < 1e-10


def test_overlap_dimension_mismatch():
    with pytest.raises(ValueError):
        hadamard_overlap(PureState.from_vector(np.ones(4)),
                         PureState.from_vector(np.ones(8)), 1e-3,
                         EstimatorMode.exact())


# -------------------------------------------------------------------- modes

def test_exact_mode_bit_identical():
    state = np.zeros(4, dtype=complex)
    state[0] = 0.6
    state[3] = 0.8
    a = amplitude_estimate(state, slice(0, 2), 1e-4, EstimatorMode.exact())
    b = amplitude_estimate(state, slice(0, 2), 1e-4, EstimatorMode.exact())
    assert a == b


def test_perturbed_within_eps_everywhere():
    psi = PureState.from_vector(rng.standard_normal(8))
    phi = PureState.from_vector(rng.standard_normal(8))
    ref = hadamard_overlap(psi, phi, 1e-3, EstimatorMode.exact())
    ledger = QueryLedger()
    mode = EstimatorMode.perturbed(eps=5e-3, seed=1)
    for _ in range(6):
        got = hadamard_overlap(psi, phi, 5e-3, mode, ledger)
        assert abs(got - ref) <= 5e-3 + 1e-15


def test_mode_validation():
    with pytest.raises(ValueError):
        EstimatorMode("bogus")
    with pytest.raises(ValueError):
        EstimatorMode.perturbed(eps=0.0)
    with pytest.raises(ValueError):
        EstimatorMode.sampled(shots=0)


def test_ledger_monotone_and_merge():
    ledger = QueryLedger()
    ledger.charge("estimator_uses", 5)
    ledger.charge("estimator_uses", 2)
    assert ledger.get("estimator_uses") == 7
    other = QueryLedger()
    other.charge("copies_consumed", 3)
    ledger.merge(other)
    assert ledger.get("copies_consumed") == 3
    with pytest.raises(ValueError):
        ledger.charge("estimator_uses", -1)


def test_purification_roundtrip():
    g = rng.standard_normal((4, 4))
    rho = g @ g.T
    rho /= np.trace(rho)
    pur = Purification.from_density(rho)
    assert np.abs(pur.rho() - rho).max() < 1e-12
    u = pur.as_unitary()
    pur2 = Purification.from_unitary(u, 4)
    assert np.abs(pur2.rho() - rho).max() < 1e-12
