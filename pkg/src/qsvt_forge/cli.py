"""Batch experiment runner.

Subcommands: ``eig`` (power method trials), ``spectrum`` (extremes via the
shift pipeline), ``grad1`` / ``grad2`` (both descent pipelines),
``gradcost`` (the per-step cost table), ``newton`` (matrix inversion),
``gen`` (seeded instance files), ``cond`` (conditioning table).

Every run writes a CSV with a ``schema_version`` column and a manifest
JSON (seeds, versions, ledger totals) next to it; ``--plot`` additionally
renders a PNG alongside the CSV.  Same config and seed produce
byte-identical CSV output.  ``QSVT_FORGE_THREADS`` caps trial workers.

Exit codes: 0 success, 2 validation error, 3 numerical-degeneracy abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .blockenc import (
    BlockEncodingError,
    InsufficientCopiesError,
    SparseHermitianMatrix,
)
from .estimation import EstimatorMode
from .graddesc import (
    BadPreparationError,
    GdConfigV1,
    GdConfigV2,
    PostSelectionError,
    bounded_init_state,
    cost_model_compare,
    eval_f,
    gradient_operator_d,
    run_gd_v1,
    run_gd_v2,
)
from .instances import InfeasibleInstanceError, generate_instance
from .matinv import DivergenceError, NewtonConfig, newton_inverse
from .matio import load_matrix, load_problem, save_matrix
from .oracles import classical_density_recursion, classical_gd_recursion, dense_eig
from .power_eig import (
    NumericalDegeneracy,
    PowerConfig,
    classical_power_reference,
    conditioning_experiment,
    extract_extremes,
    iteration_count,
    run_power_method,
)

SCHEMA_VERSION = 1

VALIDATION_ERRORS = (
    ValueError,
    FileNotFoundError,
    InfeasibleInstanceError,
    BlockEncodingError,
    KeyError,
)
DEGENERACY_ERRORS = (
    NumericalDegeneracy,
    DivergenceError,
    PostSelectionError,
    BadPreparationError,
    InsufficientCopiesError,
)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, rows: list[dict]) -> None:
    if not rows:
        raise ValueError("no rows to write")
    fields = ["schema_version"] + [k for k in rows[0] if k != "schema_version"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row.get(f, SCHEMA_VERSION if f == "schema_version" else "")) for f in fields])


def write_manifest(path, args: argparse.Namespace, seeds: list[int],
                   ledger_totals: dict) -> None:
    manifest = {
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "subcommand": args.cmd,
        "seeds": seeds,
        "config": {k: v for k, v in vars(args).items() if k not in ("func", "cmd")},
        "ledger_totals": ledger_totals,
    }
    Path(str(path) + ".manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def _mode_from_args(args) -> EstimatorMode:
    if args.mode == "exact":
        return EstimatorMode.exact()
    if args.mode == "perturbed":
        return EstimatorMode.perturbed(eps=args.eps, seed=args.seed)
    if args.mode == "sampled":
        return EstimatorMode.sampled(shots=args.shots, seed=args.seed)
    raise ValueError(f"unknown mode {args.mode!r}")


def _workers() -> int:
    cap = os.environ.get("QSVT_FORGE_THREADS", "1")
    try:
        return max(1, int(cap))
    except ValueError:
        return 1


def _run_trials(fn, n_trials: int) -> list[dict]:
    workers = _workers()
    if workers == 1:
        return [fn(i) for i in range(n_trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {i: pool.submit(fn, i) for i in range(n_trials)}
        return [futures[i].result() for i in range(n_trials)]


def _auto_k(mat: SparseHermitianMatrix, delta: float) -> int:
    w, v = dense_eig(mat.mat)
    gap = abs(abs(w[0]) - abs(w[1])) if len(w) > 1 else 1.0
    gap = max(gap, 1e-6)
    x0 = np.ones(mat.dim) / math.sqrt(mat.dim)
    cos2 = float(abs(np.vdot(v[:, 0], x0)) ** 2)
    cos2 = max(cos2, 1e-12)
    lam2 = abs(w[1]) if len(w) > 1 else 0.5
    return iteration_count(gap, delta, cos2, lam2)


def cmd_eig(args) -> int:
    mat = load_matrix(args.matrix)
    mode = _mode_from_args(args)
    w, _ = dense_eig(mat.mat)
    lam_true = float(w[0])
    k = _auto_k(mat, args.delta) if args.k == "auto" else int(args.k)
    x0 = np.ones(mat.dim) / math.sqrt(mat.dim)
    lam_k_classical, _ = classical_power_reference(mat.mat, x0, k)

    def one(i: int) -> dict:
        seed = args.seed + i
        cfg = PowerConfig(matrix=mat, k=k, delta=args.delta, beta=args.beta,
                          mode=mode, seed=seed)
        rec = run_power_method(cfg)
        row = {
            "schema_version": SCHEMA_VERSION,
            "trial": i,
            "seed": seed,
            "k": rec.k,
            "p_k": rec.p_k,
            "c": rec.c,
            "kappa": rec.kappa,
            "lambda": rec.lam,
            "gamma": rec.gamma,
            "lambda_max_est": rec.lambda_max_est,
            "lambda_max_true": lam_true,
            "abs_err": abs(rec.lambda_max_est - lam_true),
            "identity_err": abs(rec.lam - lam_k_classical),
            "frob_sq": rec.frob_sq,
            "overlap": rec.overlap,
            "m2_swept": rec.m2_swept,
        }
        row.update(rec.ledger.as_row())
        return row

    rows = _run_trials(one, args.trials)
    write_csv(args.out, rows)
    totals = _sum_ledgers(rows)
    write_manifest(args.out, args, [r["seed"] for r in rows], totals)
    if args.plot:
        from . import plots
        plots.plot_eig(rows, _png(args.out))
    return 0


def _sum_ledgers(rows: list[dict]) -> dict:
    totals: dict = {}
    for row in rows:
        for key, val in row.items():
            if key.startswith("ledger_"):
                totals[key] = totals.get(key, 0) + int(val)
    return totals


def _png(out) -> str:
    return str(Path(out).with_suffix(".png"))


def cmd_spectrum(args) -> int:
    mat = load_matrix(args.matrix)
    mode = _mode_from_args(args)
    w, _ = dense_eig(mat.mat)
    if w.min() <= 0:
        raise ValueError("spectrum extraction requires a positive-definite matrix")
    lam_max_true, lam_min_true = float(w.max()), float(w.min())
    k = _auto_k(mat, args.delta) if args.k == "auto" else int(args.k)

    def one(i: int) -> dict:
        seed = args.seed + i
        cfg = PowerConfig(matrix=mat, k=k, delta=args.delta / 2.0, beta=args.beta,
                          mode=mode, seed=seed)
        res = extract_extremes(cfg, delta_shift=args.shift,
                               experimental_recursive=args.experimental_recursive)
        row = {
            "schema_version": SCHEMA_VERSION,
            "trial": i,
            "seed": seed,
            "k": k,
            "lambda_max_est": res.lambda_max,
            "lambda_max_true": lam_max_true,
            "lambda_min_est": res.lambda_min,
            "lambda_min_true": lam_min_true,
            "abs_err_max": abs(res.lambda_max - lam_max_true),
            "abs_err_min": abs(res.lambda_min - lam_min_true),
            "shift": res.shift,
        }
        if res.recursive_literal is not None:
            row["recursive_literal"] = res.recursive_literal["literal_min_nonzero_of_B"]
        row.update(res.record_max.ledger.as_row())
        return row

    rows = _run_trials(one, args.trials)
    write_csv(args.out, rows)
    write_manifest(args.out, args, [r["seed"] for r in rows], _sum_ledgers(rows))
    if args.plot:
        from . import plots
        plots.plot_spectrum(rows, _png(args.out))
    return 0


def cmd_cond(args) -> int:
    mat = load_matrix(args.matrix)
    cfg = PowerConfig(matrix=mat, k=1, beta=args.beta, seed=args.seed,
                      mode=EstimatorMode.exact())
    ks = list(range(args.kmin, args.kmax + 1))
    rows_amp = conditioning_experiment(cfg, with_exp=True, ks=ks)
    rows_un = conditioning_experiment(cfg, with_exp=False, ks=ks)
    rows = []
    for ra, ru in zip(rows_amp, rows_un):
        rows.append({
            "schema_version": SCHEMA_VERSION,
            "k": ra["k"],
            "kappa": ra["kappa"],
            "det": ra["det"],
            "kappa_unamplified": ru["kappa"],
            "det_unamplified": ru["det"],
            "p_k": ru["p_k"],
            "amplified": True,
        })
    write_csv(args.out, rows)
    write_manifest(args.out, args, [args.seed], {})
    if args.plot:
        from . import plots
        plots.plot_conditioning(rows, _png(args.out))
    return 0


def _load_tensor_problem(path):
    from .graddesc import TensorPolynomial

    n, p, factors, s = load_problem(path)
    return TensorPolynomial.from_factors(factors, sparsity=s)


def cmd_grad1(args) -> int:
    problem = _load_tensor_problem(args.problem)
    eta = 1.0 / (4.0 * problem.p) if args.eta == "auto" else float(args.eta)
    cfg = GdConfigV1(problem=problem, steps=args.steps, eta=eta, seed=args.seed,
                     mode=_mode_from_args(args))
    traj = run_gd_v1(cfg)

    _, x0 = bounded_init_state(args.steps, problem.n, args.seed)
    ref = classical_density_recursion(
        lambda v: gradient_operator_d(problem, v), x0, eta, args.steps
    )
    rows = []
    for st in traj.steps:
        t = st["t"]
        blk = st["block"][: problem.n, : problem.n].real * st["scale"]
        ref_rho = np.outer(ref[t], ref[t])
        rows.append({
            "schema_version": SCHEMA_VERSION,
            "t": t,
            "norm_sq": st["norm_sq"],
            "scale": st["scale"],
            "block_err_vs_dense": float(np.abs(blk - ref_rho).max()),
            "status": traj.status,
        })
    for row in rows:
        row.update(traj.ledger.as_row())
    write_csv(args.out, rows)
    write_manifest(args.out, args, [args.seed], traj.ledger.as_row())
    if args.plot:
        from . import plots
        plots.plot_gd(rows, _png(args.out), "v1")
    return 0


def cmd_grad2(args) -> int:
    problem = _load_tensor_problem(args.problem)
    eta = 1.0 / (4.0 * problem.p) if args.eta == "auto" else float(args.eta)
    cfg = GdConfigV2(problem=problem, steps=args.steps, eta=eta, eps=args.eps,
                     seed=args.seed, mode=_mode_from_args(args))
    traj = run_gd_v2(cfg)

    x0 = traj.steps[0]["state"][: problem.n].real
    ref = classical_gd_recursion(
        lambda v: gradient_operator_d(problem, v / np.linalg.norm(v)) @ v,
        x0 / np.linalg.norm(x0), eta, len(traj.steps) - 1, spherical=True,
    )
    rows = []
    for st in traj.steps:
        t = st["t"]
        got = st["state"][: problem.n].real
        got = got / np.linalg.norm(got)
        want = ref[t]
        if float(got @ want) < 0:
            got = -got
        rows.append({
            "schema_version": SCHEMA_VERSION,
            "t": t,
            "f": st["f"],
            "success_raw": st.get("success_raw", ""),
            "success_eff": st.get("success_eff", ""),
            "repetitions": st.get("repetitions", ""),
            "c2_measured": st.get("c2_measured", ""),
            "c2_bound": st.get("c2_bound", ""),
            "state_err_vs_dense": float(np.abs(got - want).max()),
            "status": traj.status,
        })
    for row in rows:
        row.update(traj.ledger.as_row())
    write_csv(args.out, rows)
    write_manifest(args.out, args, [args.seed], traj.ledger.as_row())
    if args.plot:
        from . import plots
        plots.plot_gd(rows, _png(args.out), "v2")
    return 0


def cmd_gradcost(args) -> int:
    rows = cost_model_compare(args.pmax)
    out_rows = [
        {
            "schema_version": SCHEMA_VERSION,
            "p": r["p"],
            "cost_original": r["cost_original"],
            "cost_improved": r["cost_improved"],
            "ratio": r["ratio"],
            "crossed": r["crossed"],
        }
        for r in rows
    ]
    write_csv(args.out, out_rows)
    write_manifest(args.out, args, [], {})
    if args.plot:
        from . import plots
        plots.plot_gradcost(rows, _png(args.out))
    return 0


def cmd_newton(args) -> int:
    mat = load_matrix(args.matrix)
    alpha0 = None if args.alpha == "auto" else float(args.alpha)
    cfg = NewtonConfig(matrix=mat, steps=args.steps, alpha0=alpha0)
    res = newton_inverse(cfg)
    rows = [
        {
            "schema_version": SCHEMA_VERSION,
            "t": t + 1,
            "residual": res.residuals[t],
            "block_error_vs_dense": res.block_errors[t],
        }
        for t in range(len(res.residuals))
    ]
    write_csv(args.out, rows)
    write_manifest(args.out, args, [args.seed], res.ledger.as_row())
    if args.plot:
        from . import plots
        plots.plot_newton(rows, _png(args.out))
    return 0


def cmd_gen(args) -> int:
    mat = generate_instance(args.dim, args.sparsity, args.gap, args.seed,
                            kappa=args.kappa, bottom_gap=args.bottom_gap)
    save_matrix(args.out, mat)
    write_manifest(args.out, args, [args.seed], {})
    return 0


def _apply_config_file(args: argparse.Namespace) -> None:
    """key = value lines override parsed flags (config wins)."""
    if not getattr(args, "config", None):
        return
    text = Path(args.config).read_text()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {line!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if not hasattr(args, key):
            raise ValueError(f"unknown config key: {key!r}")
        current = getattr(args, key)
        if isinstance(current, bool):
            setattr(args, key, val.lower() in ("1", "true", "yes"))
        elif isinstance(current, int):
            setattr(args, key, int(val))
        elif isinstance(current, float):
            setattr(args, key, float(val))
        else:
            setattr(args, key, val)


def _add_common(sp, out_required: bool = True):
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=out_required)
    sp.add_argument("--mode", choices=["exact", "perturbed", "sampled"], default="exact")
    sp.add_argument("--eps", type=float, default=1e-3)
    sp.add_argument("--shots", type=int, default=10_000)
    sp.add_argument("--config", default=None, help="key=value file overriding flags")
    sp.add_argument("--plot", action="store_true", help="render a PNG next to the CSV")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qsvt-forge",
                                 description="block-encoding pipeline experiments")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("eig", help="largest-eigenvalue trials")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--k", default="auto")
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--beta", type=float, default=0.01)
    sp.add_argument("--trials", type=int, default=1)
    _add_common(sp)
    sp.set_defaults(func=cmd_eig)

    sp = sub.add_parser("spectrum", help="extremes via the shift pipeline")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--k", default="auto")
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--beta", type=float, default=0.01)
    sp.add_argument("--shift", type=float, default=0.05)
    sp.add_argument("--trials", type=int, default=1)
    sp.add_argument("--experimental-recursive", action="store_true")
    _add_common(sp)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("cond", help="readout conditioning vs k")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--kmin", type=int, default=1)
    sp.add_argument("--kmax", type=int, default=20)
    sp.add_argument("--beta", type=float, default=0.01)
    _add_common(sp)
    sp.set_defaults(func=cmd_cond)

    sp = sub.add_parser("grad1", help="density-form gradient descent")
    sp.add_argument("--problem", required=True)
    sp.add_argument("--T", dest="steps", type=int, default=3)
    sp.add_argument("--eta", default="auto")
    _add_common(sp)
    sp.set_defaults(func=cmd_grad1)

    sp = sub.add_parser("grad2", help="state-form gradient descent")
    sp.add_argument("--problem", required=True)
    sp.add_argument("--T", dest="steps", type=int, default=3)
    sp.add_argument("--eta", default="auto")
    _add_common(sp)
    sp.set_defaults(func=cmd_grad2)

    sp = sub.add_parser("gradcost", help="per-step cost comparison table")
    sp.add_argument("--pmax", type=int, default=12)
    _add_common(sp)
    sp.set_defaults(func=cmd_gradcost)

    sp = sub.add_parser("newton", help="Newton matrix inversion")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--alpha", default="auto")
    sp.add_argument("--T", dest="steps", type=int, default=8)
    _add_common(sp)
    sp.set_defaults(func=cmd_newton)

    sp = sub.add_parser("gen", help="generate a seeded instance file")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--sparsity", type=int, default=3)
    sp.add_argument("--gap", type=float, default=0.1)
    sp.add_argument("--kappa", type=float, default=10.0)
    sp.add_argument("--bottom-gap", type=float, default=None)
    _add_common(sp)
    sp.set_defaults(func=cmd_gen)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        _apply_config_file(args)
        return args.func(args)
    except DEGENERACY_ERRORS as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return 3
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
