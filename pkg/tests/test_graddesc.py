"""Gradient-descent pipelines: operator identities, both versions, costs."""

import math

import numpy as np
import pytest

from qsvt_forge.blockenc import InsufficientCopiesError, dilate, unitary_with_first_column
from qsvt_forge.estimation import EstimatorMode
from qsvt_forge.graddesc import (
    BadPreparationError,
    GdConfigV1,
    GdConfigV2,
    PostSelectionError,
    TensorPolynomial,
    bounded_init_state,
    build_md,
    cost_model_compare,
    eta_bound_for_beta,
    eval_f,
    extract_d_encoding,
    gd_step_v2,
    gradient_operator_d,
    gradient_operator_d_trace,
    md_sandwich_identity_check,
    measure_beta,
    post_select,
    run_gd_v1,
    run_gd_v2,
)
from qsvt_forge.instances import generate_problem
from qsvt_forge.oracles import (
    classical_density_recursion,
    classical_gd_recursion,
    fd_gradient,
    monomial_eval,
)

rng = np.random.default_rng(7)


def identity_problem(p=2, n=2, scale=0.9):
    eye = scale * np.eye(n)
    return TensorPolynomial.from_factors([tuple(eye for _ in range(p))])


# ---------------------------------------------------------------- eval_f

def test_eval_identity_tensor_unit_vector():
    prob = identity_problem(p=2, n=2, scale=1.0 - 1e-9)
    x = np.array([1.0, 0.0])
    assert abs(eval_f(prob, x) - 0.5) < 1e-8


def test_eval_zero_vector():
    prob = generate_problem(3, 2, 2, seed=0, diagonal=False)
    assert eval_f(prob, np.zeros(3)) == 0.0


def test_eval_matches_monomial_oracle():
    prob = generate_problem(3, 2, 2, seed=1, diagonal=False)
    for _ in range(5):
        x = rng.standard_normal(3)
        assert abs(eval_f(prob, x) - monomial_eval(prob.a_matrix, 3, 2, x)) < 1e-12


# ---------------------------------------------------------------- build_md

def test_md_identity_tensor():
    prob = identity_problem(p=2, n=2, scale=0.9)
    md, _ = build_md(prob)
    assert np.abs(md - 2 * 0.81 * np.eye(4)).max() < 1e-12


def test_md_two_factor_swap():
    a1 = np.diag([0.5, 0.2])
    a2 = np.diag([0.3, -0.4])
    prob = TensorPolynomial.from_factors([(a1, a2)])
    md, be = build_md(prob)
    expect = np.kron(a2, a1) + np.kron(a1, a2)
    assert np.abs(md - expect).max() < 1e-12
    s = prob.sparsity
    assert np.abs(be.block * (2 * s) - expect).max() < 1e-10


def test_md_last_register_swap_is_identity():
    prob = generate_problem(2, 2, 1, seed=3, diagonal=False)
    from qsvt_forge.graddesc import _swap_regs

    assert np.abs(_swap_regs(prob.a_matrix, 2, 2, 2) - prob.a_matrix).max() == 0.0


# ----------------------------------------------------------- D operator

def test_d_identity_tensor_is_p_times_identity():
    prob = identity_problem(p=2, n=2, scale=0.9)
    x = np.array([1.0, 0.0])
    d = gradient_operator_d(prob, x)
    assert np.abs(d - 2 * 0.81 * np.eye(2)).max() < 1e-12


def test_d_two_factor_formula():
    a1 = np.diag([0.5, 0.2])
    a2 = np.diag([0.3, -0.4])
    prob = TensorPolynomial.from_factors([(a1, a2)])
    x = rng.standard_normal(2)
    x /= np.linalg.norm(x)
    d = gradient_operator_d(prob, x)
    expect = float(x @ a2 @ x) * a1 + float(x @ a1 @ x) * a2
    assert np.abs(d - expect).max() < 1e-12


@pytest.mark.parametrize("p,n", [(2, 2), (2, 3), (3, 2)])
def test_d_paths_agree(p, n):
    prob = generate_problem(n, p, 2, seed=p * 10 + n, diagonal=False)
    x = rng.standard_normal(n)
    d1 = gradient_operator_d(prob, x)
    d2 = gradient_operator_d_trace(prob, x)
    assert np.abs(d1 - d2).max() < 1e-12


def test_gradient_matches_finite_differences():
    prob = generate_problem(3, 2, 2, seed=9, diagonal=False)
    x = rng.standard_normal(3)
    dx = gradient_operator_d(prob, x) @ x
    fd = fd_gradient(lambda v: eval_f(prob, v), x)
    assert np.abs(dx - fd).max() / max(np.abs(dx).max(), 1e-12) < 1e-5


# ---------------------------------------------------------- sandwich check

def test_sandwich_p1_reduction():
    a = np.diag([0.4, -0.2])
    prob = TensorPolynomial.from_factors([(a,)])
    x = rng.standard_normal(2)
    chk = md_sandwich_identity_check(prob, x)
    lhs, rhs = chk["one_sided"]
    assert np.abs(lhs - rhs).max() < 1e-12


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sandwich_identities_random(seed):
    prob = generate_problem(2, 2, 2, seed=seed, diagonal=False)
    x = rng.standard_normal(2)
    x /= np.linalg.norm(x)
    chk = md_sandwich_identity_check(prob, x)
    for key in ("two_sided", "one_sided"):
        lhs, rhs = chk[key]
        assert np.abs(lhs - rhs).max() < 1e-12


def test_sandwich_identity_tensor_case():
    prob = identity_problem(p=2, n=2, scale=0.9)
    x = np.array([0.0, 1.0])
    chk = md_sandwich_identity_check(prob, x)
    lhs, rhs = chk["one_sided"]
    rho = np.outer(x, x)
    expect = np.kron(rho, 2 * 0.81 * rho)
    assert np.abs(rhs - expect).max() < 1e-12
    assert np.abs(lhs - expect).max() < 1e-12


# ------------------------------------------------------- extract_d_encoding

def build_sandwich_encoding(prob, x):
    from qsvt_forge.blockenc import chain_product, tensor
    from qsvt_forge.graddesc import _identity_encoding

    n2 = prob.padded_dim
    _, be_md = build_md(prob, padded=True)
    be_xx = dilate(np.outer(x, x))
    left = tensor([be_xx] * (prob.p - 1) + [_identity_encoding(n2)])
    return chain_product([left, be_md, left])


def test_extract_with_perfect_overlap():
    prob = generate_problem(2, 2, 1, seed=5, diagonal=False)
    x = rng.standard_normal(2)
    x /= np.linalg.norm(x)
    sandwich = build_sandwich_encoding(prob, x)
    u = unitary_with_first_column(x.astype(complex))
    be_xx = dilate(np.outer(x, x))
    beta = measure_beta(be_xx, x, 1e-4, EstimatorMode.exact())
    assert abs(beta - 1.0) < 1e-10
    be_d = extract_d_encoding(prob, sandwich, u, beta)
    d = gradient_operator_d(prob, x)
    ps = prob.p * prob.sparsity
    assert np.abs(be_d.block - d / ps).max() < 1e-10


def test_extract_zero_overlap_raises():
    prob = generate_problem(2, 2, 1, seed=6, diagonal=False)
    x = np.array([1.0, 0.0])
    sandwich = build_sandwich_encoding(prob, x)
    u = unitary_with_first_column(np.array([0.0, 1.0], dtype=complex))
    with pytest.raises(BadPreparationError):
        extract_d_encoding(prob, sandwich, u, beta=0.0)


def test_extract_random_u_pre_amplification():
    prob = generate_problem(2, 2, 1, seed=8, diagonal=False)
    x = rng.standard_normal(2)
    x /= np.linalg.norm(x)
    sandwich = build_sandwich_encoding(prob, x)
    alpha_vec = rng.standard_normal(2)
    alpha_vec /= np.linalg.norm(alpha_vec)
    u = unitary_with_first_column(alpha_vec.astype(complex))
    beta = float(alpha_vec @ np.outer(x, x) @ alpha_vec)
    # conjugated, un-amplified block carries beta^(p-1) D(x)/(ps)
    from qsvt_forge.blockenc import BlockEncoding

    n2 = prob.padded_dim
    u_rep = u
    conj = np.kron(np.kron(np.eye(sandwich.anc_dim), u_rep), np.eye(n2))
    w = conj.conj().T @ sandwich.unitary @ conj
    raw = BlockEncoding(w, alpha=sandwich.alpha,
                        anc_qubits=sandwich.anc_qubits + 1,
                        sys_qubits=1, eps=0.0)
    d = gradient_operator_d(prob, x)
    ps = prob.p * prob.sparsity
    assert np.abs(raw.block - beta * d / ps).max() < 1e-10


# ------------------------------------------------------------- eta bound

def test_eta_bound_t1_degenerate():
    out = eta_bound_for_beta(2, 1)
    assert out["eta_max"] == 0.0
    assert out["degenerate"]


def test_eta_bound_t100_still_degenerate():
    out = eta_bound_for_beta(2, 100)
    assert out["raw"] < 0.0
    assert out["degenerate"]


def test_eta_bound_reports_operational():
    out = eta_bound_for_beta(3, 10)
    assert out["eta_operational"] == 1.0 / 6.0


# ------------------------------------------------------- bounded_init_state

def test_init_norm_formula():
    for steps, n in [(1, 1), (2, 3), (3, 4)]:
        state, x0 = bounded_init_state(steps, n)
        t_prime = steps + math.ceil(math.log2(max(n, 1)) / 2.0) if n > 1 else steps
        assert abs(np.dot(x0, x0) - n / 4.0**t_prime) < 1e-15
        assert np.dot(x0, x0) <= 4.0**-steps + 1e-15
        assert abs(np.linalg.norm(state.amplitudes) - 1.0) < 1e-12


def test_init_amplitudes_uniform():
    state, x0 = bounded_init_state(2, 3)
    amp = state.amplitudes.real
    assert np.abs(amp - amp[0]).max() == 0.0
    assert np.abs(x0 - amp[0]).max() < 1e-15


def test_init_norm_growth_bound():
    prob = generate_problem(3, 2, 2, seed=13, diagonal=False)
    _, x0 = bounded_init_state(3, 3)
    xs = classical_density_recursion(
        lambda v: gradient_operator_d(prob, v), x0, 0.2, 3
    )
    for t, x in enumerate(xs):
        assert np.dot(x, x) <= 4.0**t * np.dot(x0, x0) + 1e-15


# ------------------------------------------------------------- gd v1

def test_v1_zero_gradient_instance():
    prob = TensorPolynomial.from_matrix(np.zeros((4, 4)), 2, 2, sparsity=1)
    cfg = GdConfigV1(problem=prob, steps=2, eta=0.2)
    traj = run_gd_v1(cfg)
    _, x0 = bounded_init_state(2, 2)
    rho0 = np.outer(x0, x0)
    for st in traj.steps:
        blk = st["block"][:2, :2].real * st["scale"]
        assert np.abs(blk - rho0).max() < 1e-12


def test_v1_identity_tensor_recursion():
    prob = identity_problem(p=2, n=2, scale=0.9)
    eta = 0.2
    cfg = GdConfigV1(problem=prob, steps=2, eta=eta)
    traj = run_gd_v1(cfg)
    _, x0 = bounded_init_state(2, 2)
    xs = classical_density_recursion(
        lambda v: gradient_operator_d(prob, v), x0, eta, 2
    )
    for st in traj.steps:
        t = st["t"]
        blk = st["block"][:2, :2].real * st["scale"]
        assert np.abs(blk - np.outer(xs[t], xs[t])).max() < 1e-9


@pytest.mark.parametrize("seed", [0, 1])
def test_v1_matches_dense_recursion(seed):
    prob = generate_problem(3, 2, 1, seed=seed, diagonal=False)
    eta = 0.2
    cfg = GdConfigV1(problem=prob, steps=3, eta=eta, seed=seed)
    traj = run_gd_v1(cfg)
    _, x0 = bounded_init_state(3, 3)
    xs = classical_density_recursion(
        lambda v: gradient_operator_d(prob, v), x0, eta, 3
    )
    for st in traj.steps:
        t = st["t"]
        blk = st["block"][:3, :3].real * st["scale"]
        assert np.abs(blk - np.outer(xs[t], xs[t])).max() < 1e-9
        assert st["norm_sq"] <= 4.0**t * np.dot(x0, x0) + 1e-12
        assert st["scale"] == 4.0**t


def test_v1_step_zero_returns_initial():
    prob = generate_problem(2, 2, 1, seed=3)
    cfg = GdConfigV1(problem=prob, steps=1, eta=0.1)
    traj = run_gd_v1(cfg)
    assert traj.steps[0]["scale"] == 1.0
    _, x0 = bounded_init_state(1, 2)
    blk = traj.steps[0]["block"][:2, :2].real
    assert np.abs(blk - np.outer(x0, x0)).max() < 1e-13


def test_v1_zero_steps_returns_initial_encoding():
    prob = generate_problem(2, 2, 1, seed=3)
    traj = run_gd_v1(GdConfigV1(problem=prob, steps=0, eta=0.1))
    assert len(traj.steps) == 1
    assert traj.final_encoding is not None
    _, x0 = bounded_init_state(0, 2)
    blk = traj.final_encoding.block[:2, :2].real
    assert np.abs(blk - np.outer(x0, x0)).max() < 1e-13


def test_v1_descent_on_convex_instance():
    prob = generate_problem(3, 2, 1, seed=20, diagonal=True)
    cfg = GdConfigV1(problem=prob, steps=3, eta=0.2, seed=20)
    traj = run_gd_v1(cfg)
    vals = []
    for st in traj.steps:
        blk = st["block"][:3, :3].real * st["scale"]
        w, v = np.linalg.eigh(blk)
        vals.append(eval_f(prob, v[:, -1] * math.sqrt(max(w[-1], 0.0))))
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_v1_ledger_geometric_growth():
    prob = generate_problem(2, 2, 1, seed=2)
    uses = []
    for steps in (1, 2, 3):
        cfg = GdConfigV1(problem=prob, steps=steps, eta=0.2)
        traj = run_gd_v1(cfg)
        uses.append(traj.ledger.get("blockenc_applications"))
    assert uses[1] / uses[0] > 5 and uses[2] / uses[1] > 5


# ------------------------------------------------------------- gd v2

def test_v2_identity_tensor_stationary():
    prob = identity_problem(p=2, n=2, scale=0.9)
    x = rng.standard_normal(2)
    x /= np.linalg.norm(x)
    out = gd_step_v2(x, prob, eta=0.2, eps=1e-3, copies=100_000,
                     mode=EstimatorMode.exact())
    got = out["x_next"][:2].real
    got /= np.linalg.norm(got)
    if float(got @ x) < 0:
        got = -got
    assert np.abs(got - x).max() < 1e-9


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_v2_step_matches_classical_update(seed):
    prob = generate_problem(2, 2, 1, seed=seed, diagonal=False)
    r = np.random.default_rng(seed)
    x = r.standard_normal(2)
    x /= np.linalg.norm(x)
    eta = 1.0 / (4.0 * prob.p)
    out = gd_step_v2(x, prob, eta=eta, eps=1e-4, copies=10**6,
                     mode=EstimatorMode.exact())
    d = gradient_operator_d(prob, x)
    want = x - eta * (d @ x)
    want /= np.linalg.norm(want)
    got = out["x_next"][:2].real
    got /= np.linalg.norm(got)
    if float(got @ want) < 0:
        got = -got
    assert np.abs(got - want).max() < 1e-8


def test_v2_success_floor_and_c2():
    prob = generate_problem(2, 2, 1, seed=4, diagonal=True)
    x = rng.standard_normal(2)
    x /= np.linalg.norm(x)
    eta = 1.0 / (4.0 * prob.p)
    out = gd_step_v2(x, prob, eta=eta, eps=1e-3, copies=10**5,
                     mode=EstimatorMode.exact())
    sp = prob.sparsity * prob.p
    floor = (math.pi / 4.0) ** (2 * prob.p - 1) / (4.0 * sp)
    assert out["success_eff"] >= floor
    assert out["c2_measured"] >= out["c2_bound"] - 1e-9
    assert out["c2_measured"] >= 0.25 - 1e-9


def test_v2_insufficient_copies():
    prob = generate_problem(2, 2, 1, seed=4)
    x = np.array([1.0, 0.0])
    with pytest.raises(InsufficientCopiesError):
        gd_step_v2(x, prob, eta=0.1, eps=1e-4, copies=10,
                   mode=EstimatorMode.exact())


def test_v2_run_single_step_equals_step():
    prob = generate_problem(2, 2, 1, seed=6, diagonal=False)
    cfg = GdConfigV2(problem=prob, steps=1, eta=0.1, eps=1e-4, seed=6)
    traj = run_gd_v2(cfg)
    assert len(traj.steps) == 2
    assert traj.steps[1].get("success_raw") is not None


def test_v2_trajectory_descends():
    prob = generate_problem(3, 2, 1, seed=14, diagonal=True)
    cfg = GdConfigV2(problem=prob, steps=3, eta=1.0 / 8.0, eps=1e-4, seed=14)
    traj = run_gd_v2(cfg)
    ref = classical_gd_recursion(
        lambda v: gradient_operator_d(prob, v / np.linalg.norm(v)) @ v,
        traj.steps[0]["state"][:3].real, 1.0 / 8.0, len(traj.steps) - 1,
        spherical=True,
    )
    fs_ref = [eval_f(prob, x) for x in ref]
    fs_got = [st["f"] for st in traj.steps]
    assert np.abs(np.array(fs_got) - np.array(fs_ref)).max() < 1e-8
    assert all(b <= a + 1e-10 for a, b in zip(fs_got, fs_got[1:]))


def test_v2_cumulative_repetitions():
    prob = generate_problem(2, 2, 1, seed=31, diagonal=True)
    cfg = GdConfigV2(problem=prob, steps=3, eta=1.0 / 8.0, eps=1e-3, seed=31)
    traj = run_gd_v2(cfg)
    reps = [st["repetitions"] for st in traj.steps[1:]]
    assert traj.ledger.get("cumulative_repetitions") == int(np.prod(reps))


def test_v2_copy_budget_formula():
    cfg = GdConfigV2(problem=generate_problem(2, 2, 1, seed=1), steps=1,
                     eta=0.1, eps=1e-2)
    assert cfg.copies_budget() == math.ceil(100) * 2 * math.ceil(math.log2(100))


# ---------------------------------------------------------- post_select

def test_post_select_fully_flagged():
    state = np.zeros(8, dtype=complex)
    state[:4] = 0.5
    branch, prob = post_select(state, 2)
    assert abs(prob - 1.0) < 1e-14
    assert np.abs(branch - 0.5).max() < 1e-14


def test_post_select_half():
    state = np.full(8, math.sqrt(1 / 8), dtype=complex)
    _, prob = post_select(state, 2)
    assert abs(prob - 0.5) < 1e-14


def test_post_select_zero_branch():
    state = np.zeros(8, dtype=complex)
    state[4] = 1.0
    with pytest.raises(PostSelectionError):
        post_select(state, 2)


# --------------------------------------------------------- cost model

def test_cost_p1_values():
    rows = cost_model_compare(1)
    assert rows[0]["cost_original"] == 1.0
    assert abs(rows[0]["cost_improved"] - 4.0 / math.pi) < 1e-12


def test_cost_p10_still_below():
    rows = cost_model_compare(10)
    r = rows[-1]
    assert r["cost_original"] == 100_000.0
    assert 9.0e4 < r["cost_improved"] < 1.0e5
    assert not r["crossed"]


def test_cost_crossover_between_10_and_11():
    rows = cost_model_compare(12)
    by_p = {r["p"]: r for r in rows}
    for p in range(2, 11):
        assert by_p[p]["cost_improved"] < by_p[p]["cost_original"]
    assert by_p[11]["crossed"]
