"""Figure rendering for the CLI report path.

Every subcommand that writes a CSV can also render a matplotlib figure
next to it (``--plot``); rendering is file-only (Agg backend), one PNG
per run, styled lightly so the data reads first.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams.update({
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 130,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
})


def _finish(fig, out_png):
    fig.tight_layout()
    fig.savefig(out_png)
    plt.close(fig)
    return out_png


def plot_eig(rows: list[dict], out_png):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    trials = [r["trial"] for r in rows]
    ax1.plot(trials, [r["lambda_max_true"] for r in rows], "o", label="reference", mfc="none")
    ax1.plot(trials, [r["lambda_max_est"] for r in rows], "x", label="pipeline")
    ax1.set_xlabel("trial")
    ax1.set_ylabel("largest eigenvalue")
    ax1.legend()
    ax2.semilogy(trials, [max(r["abs_err"], 1e-18) for r in rows], "s-")
    ax2.set_xlabel("trial")
    ax2.set_ylabel("absolute error")
    fig.suptitle("power method estimates")
    return _finish(fig, out_png)


def plot_spectrum(rows: list[dict], out_png):
    fig, ax = plt.subplots()
    trials = [r["trial"] for r in rows]
    ax.plot(trials, [r["lambda_max_true"] for r in rows], "o", mfc="none", label="max (ref)")
    ax.plot(trials, [r["lambda_max_est"] for r in rows], "x", label="max (est)")
    ax.plot(trials, [r["lambda_min_true"] for r in rows], "s", mfc="none", label="min (ref)")
    ax.plot(trials, [r["lambda_min_est"] for r in rows], "+", label="min (est)")
    ax.set_xlabel("trial")
    ax.set_ylabel("eigenvalue")
    ax.legend(ncol=2)
    ax.set_title("spectral extremes via shift pipeline")
    return _finish(fig, out_png)


def plot_conditioning(rows: list[dict], out_png):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ks = [r["k"] for r in rows]
    ax1.semilogy(ks, [r["kappa"] for r in rows], "o-")
    ax1.set_xlabel("k")
    ax1.set_ylabel("condition number")
    ax2.semilogy(ks, [max(r["det"], 1e-300) for r in rows], "s-")
    ax2.set_xlabel("k")
    ax2.set_ylabel("|det|")
    label = "amplified" if rows and rows[0].get("amplified") else "unamplified"
    fig.suptitle(f"readout system conditioning ({label})")
    return _finish(fig, out_png)


def plot_gradcost(rows: list[dict], out_png):
    fig, ax = plt.subplots()
    ps = [r["p"] for r in rows]
    ax.semilogy(ps, [r["cost_original"] for r in rows], "o-", label="p^5")
    ax.semilogy(ps, [r["cost_improved"] for r in rows], "s-", label="p^3 (4/pi)^(2p-1)")
    crossed = [r["p"] for r in rows if r["crossed"] and r["p"] > 1]
    if crossed:
        ax.axvline(crossed[0], ls="--", color="gray", lw=1)
    ax.set_xlabel("p")
    ax.set_ylabel("per-step cost")
    ax.legend()
    ax.set_title("copy-cost comparison")
    return _finish(fig, out_png)


def plot_gd(rows: list[dict], out_png, kind: str):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ts = [r["t"] for r in rows]
    if kind == "v2":
        ax1.plot(ts, [r["f"] for r in rows], "o-")
        ax1.set_ylabel("objective")
        succ = [r["success_eff"] for r in rows if r.get("success_eff") not in (None, "")]
        ax2.semilogy(ts[1 : len(succ) + 1], succ, "s-")
        ax2.set_ylabel("success probability")
    else:
        ax1.semilogy(ts, [r["norm_sq"] for r in rows], "o-")
        ax1.set_ylabel("||x_t||^2")
        ax2.semilogy(ts, [max(r["block_err_vs_dense"], 1e-18) for r in rows], "s-")
        ax2.set_ylabel("block error vs dense recursion")
    for ax in (ax1, ax2):
        ax.set_xlabel("step")
    fig.suptitle(f"gradient descent ({kind})")
    return _finish(fig, out_png)


def plot_newton(rows: list[dict], out_png):
    fig, ax = plt.subplots()
    ts = [r["t"] for r in rows]
    ax.semilogy(ts, [max(r["residual"], 1e-18) for r in rows], "o-", label="||I - A X_t||")
    ax.semilogy(ts, [max(r["block_error_vs_dense"], 1e-18) for r in rows], "s--",
                label="encoding vs dense recursion")
    ax.set_xlabel("iteration")
    ax.legend()
    ax.set_title("Newton inversion convergence")
    return _finish(fig, out_png)
