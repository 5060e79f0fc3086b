"""Reference oracles: self-checks and the independence boundary."""

import ast
from pathlib import Path

import numpy as np
import pytest

from qsvt_forge import oracles

rng = np.random.default_rng(5)


def test_dense_eig_diagonal_sorted_by_magnitude():
    w, _ = oracles.dense_eig(np.diag([0.2, -0.9, 0.5]))
    assert np.allclose(w, [-0.9, 0.5, 0.2])


def test_dense_eig_identity():
    w, _ = oracles.dense_eig(np.eye(4))
    assert np.allclose(w, 1.0)


def test_dense_eig_residuals():
    a = rng.standard_normal((12, 12))
    a = (a + a.T) / 2
    w, v = oracles.dense_eig(a)
    for i in range(12):
        assert np.linalg.norm(a @ v[:, i] - w[i] * v[:, i]) <= 1e-10


def test_dense_eig_rejects_non_hermitian():
    with pytest.raises(ValueError):
        oracles.dense_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_fd_gradient_quadratic_form():
    q = rng.standard_normal((4, 4))
    q = (q + q.T) / 2
    x = rng.standard_normal(4)
    got = oracles.fd_gradient(lambda v: float(v @ q @ v), x)
    assert np.abs(got - 2 * q @ x).max() < 1e-9


def test_fd_gradient_constant():
    got = oracles.fd_gradient(lambda v: 3.0, rng.standard_normal(5))
    assert np.abs(got).max() == 0.0


def test_fd_gradient_tensor_instance():
    from qsvt_forge.graddesc import eval_f, gradient_operator_d
    from qsvt_forge.instances import generate_problem

    prob = generate_problem(3, 2, 2, seed=11, diagonal=False)
    x = rng.standard_normal(3)
    fd = oracles.fd_gradient(lambda v: eval_f(prob, v), x)
    dx = gradient_operator_d(prob, x) @ x
    rel = np.abs(fd - dx).max() / max(np.abs(dx).max(), 1e-12)
    assert rel < 1e-5


def test_monomial_eval_matches_kron_formula():
    from qsvt_forge.instances import generate_problem
    from qsvt_forge.graddesc import eval_f

    prob = generate_problem(3, 2, 1, seed=2, diagonal=False)
    x = rng.standard_normal(3)
    assert abs(oracles.monomial_eval(prob.a_matrix, 3, 2, x) - eval_f(prob, x)) < 1e-12


def test_monomial_gradient_matches_fd():
    from qsvt_forge.instances import generate_problem

    prob = generate_problem(2, 2, 1, seed=4, diagonal=False)
    x = rng.standard_normal(2)
    g = oracles.monomial_gradient(prob.a_matrix, 2, 2, x)
    fd = oracles.fd_gradient(lambda v: oracles.monomial_eval(prob.a_matrix, 2, 2, v), x)
    assert np.abs(g - fd).max() < 1e-8


def test_classical_gd_zero_eta_constant():
    x0 = rng.standard_normal(3)
    xs = oracles.classical_gd_recursion(lambda v: v, x0, 0.0, 5)
    for x in xs:
        assert np.abs(x - x0).max() == 0.0


def test_classical_gd_zero_gradient_constant():
    x0 = rng.standard_normal(3)
    xs = oracles.classical_gd_recursion(lambda v: np.zeros_like(v), x0, 0.3, 5)
    for x in xs:
        assert np.abs(x - x0).max() == 0.0


def test_classical_gd_descends_convex():
    q = np.diag([2.0, 1.0, 0.5])
    f = lambda v: float(v @ q @ v)  # noqa: E731
    xs = oracles.classical_gd_recursion(lambda v: 2 * q @ v,
                                        rng.standard_normal(3), 0.05, 20)
    vals = [f(x) for x in xs]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_newton_schulz_reference():
    a = np.diag([0.5, 0.25])
    xs = oracles.classical_newton_schulz(a, a.copy(), 8)
    assert np.linalg.norm(xs[-1] - np.diag([2.0, 4.0]), 2) < 1e-6


def test_oracle_report_errors():
    rep = oracles.OracleReport("x", 2.0, 2.5)
    assert rep.abs_error == 0.5
    assert abs(rep.rel_error - 0.25) < 1e-15


def test_oracles_do_not_import_pipeline_modules():
    # the verification boundary: oracles must not share code paths with
    # the pipelines they validate
    src = Path(oracles.__file__).read_text()
    tree = ast.parse(src)
    for node in ast.walk(tree):
        if isinstance(node, ast.ImportFrom):
            assert not (node.module or "").startswith("qsvt_forge")
            assert node.level == 0, "relative import found in oracles"
        if isinstance(node, ast.Import):
            for alias in node.names:
                assert not alias.name.startswith("qsvt_forge")
