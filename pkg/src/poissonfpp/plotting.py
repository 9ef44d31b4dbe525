"""PNG figures for experiment reports (matplotlib, Agg backend)."""

from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["render_figures"]


def _save(fig, out_dir, name) -> str:
    path = os.path.join(out_dir, name)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def _per_t(report, *keys):
    rows = report.aggregates.get("per_t", [])
    t = np.array([r["t"] for r in rows], dtype=float)
    return t, [np.array([np.nan if r.get(k) is None else r[k] for r in rows], dtype=float) for k in keys]


def _moments(report, out_dir):
    t, (v, vse) = _per_t(report, "speed_m1", "speed_m1_se")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(t, v, yerr=2 * vse, marker="o", capsize=3)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("t")
    ax.set_ylabel("E v_t  (2 s.e. bars)")
    ax.set_title(f"minimizer speed, c = {report.spec.c:g}")
    paths = [_save(fig, out_dir, "moments_speed.png")]

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for key, label in (("abs_action_m1_ratio", "E|A| / (t/c)"), ("length_m2_ratio", "E L^2 / t^2"), ("squares_m2_ratio", "E|animal|^2 / t^2")):
        t, (y, se) = _per_t(report, key, key + "_se")
        ax.errorbar(t, y, yerr=2 * se, marker="o", capsize=3, label=label)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.set_title("moment ratios")
    paths.append(_save(fig, out_dir, "moments_ratios.png"))
    return paths


def _xi(report, out_dir):
    t, (m, se) = _per_t(report, "median_deviation", "median_deviation_se")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(t, m, yerr=2 * se, marker="o", capsize=3, linestyle="none", label="median deviation")
    fit = report.fit
    if fit and math.isfinite(fit["exponent"]):
        tt = np.geomspace(t.min(), t.max(), 50)
        ax.plot(tt, np.exp(fit["intercept"]) * tt ** fit["exponent"], label=f"slope {fit['exponent']:.3f}")
        ax.plot(tt, m[0] * (tt / t[0]) ** 0.6, linestyle=":", color="gray", label="slope 3/5 (reference)")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("deviation")
    ax.legend(fontsize=8)
    return [_save(fig, out_dir, "xi_deviation.png")]


def _variance(report, out_dir):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for key, label in (("var_over_upper", "Var / t^(2(2g'-1))"), ("var_over_lower", "Var / t^(1-g)")):
        t, (y, se) = _per_t(report, key, key + "_se")
        ax.errorbar(t, y, yerr=2 * se, marker="o", capsize=3, label=label)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.set_title("variance of the action difference")
    return [_save(fig, out_dir, "variance_ratios.png")]


def _locality(report, out_dir):
    box = [r for r in report.records if r.get("trial") == "box" and r.get("g") is not None]
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    if box:
        j = np.array([r["j"] for r in box], dtype=float)
        g = np.array([r["g"] for r in box], dtype=float)
        jitter = np.random.Generator(np.random.PCG64(0)).uniform(-0.15, 0.15, len(j))
        a1.scatter(j + jitter, g, s=6, alpha=0.5)
        ks = np.arange(1, int(j.max()) + 1)
        a1.plot(ks, ks, "r--", label="g = j")
        a1.legend(fontsize=8)
    a1.set_xlabel("inserted points j")
    a1.set_ylabel("g")
    for row in report.aggregates.get("per_t", []):
        r = [x["radius"] for x in row["radius"]]
        f = [x["freq_half_gain"] for x in row["radius"]]
        se = [0 if x["freq_se"] is None else x["freq_se"] for x in row["radius"]]
        a2.errorbar(r, f, yerr=2 * np.nan_to_num(np.array(se, dtype=float)), marker="o", capsize=3, label=f"t = {row['t']:g}")
    a2.set_xscale("log")
    a2.set_xlabel("insertion radius r")
    a2.set_ylabel("P(g >= 1/2)")
    a2.legend(fontsize=8)
    return [_save(fig, out_dir, "locality.png")]


def _animal(report, out_dir):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    rows = [r for r in report.records if r.get("family") == "moment"]
    for lam in sorted({r["lam"] for r in rows}):
        sub = [r for r in rows if r["lam"] == lam]
        ax.errorbar([r["n"] for r in sub], [r["mean_weight"] for r in sub], yerr=[2 * r["mean_stderr"] for r in sub], marker="o", capsize=3, label=f"lambda = {lam:g}")
    ax.set_xlabel("n")
    ax.set_ylabel("E N_n")
    ax.legend(fontsize=8)
    ax.set_title("greedy animal weight")
    return [_save(fig, out_dir, "animal_moments.png")]


_RENDER = {"Moments": _moments, "Xi": _xi, "VarianceDiff": _variance, "Locality": _locality, "AnimalTail": _animal}


def render_figures(report, out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    return _RENDER[report.spec.kind](report, out_dir)
