"""Experiment definitions: per-replica workers and per-kind runners.

Workers are module-level functions taking one payload dict so they can run
in a process pool; runners build payloads, aggregate deterministically in
task order, and return JSON-ready results.  Mean-injection phases always
draw from a seed stream disjoint from the measurement stream.
"""

import math

import numpy as np

from .. import fields as fields_mod
from .. import polymer
from ..lattice import SpaceTimePoint
from .config import TAG_MEAN, TAG_MEASURE, ExperimentConfig
from . import stats
from .ensemble import parallel_map

FLAT_SLOPE = 0.15  # |slope| of log E[Z^p] vs log n below this counts as flat


def _system(cfg, seed):
    return polymer.PolymerSystem(cfg.env_spec(), seed, cfg.d)


def _origin(cfg):
    return SpaceTimePoint(0, (0,) * cfg.d)


# ---------------------------------------------------------------- simulate


def _worker_simulate(payload):
    cfg = ExperimentConfig.from_dict(payload["cfg"])
    n = payload["n"]
    sys = _system(cfg, payload["seed"])
    z = polymer.forward_partition(sys, _origin(cfg), n, radius=cfg.radius(n), cell_budget=cfg.cell_budget)
    return {"Z": z, "logZ": math.log(z)}


def _measure_payloads(cfg):
    return [
        {"cfg": cfg.as_dict(), "n": n, "replica": r, "seed": cfg.replica_seed(TAG_MEASURE, n, r)}
        for n in cfg.n_grid
        for r in range(cfg.replicas)
    ]


def run_simulate(cfg):
    payloads = _measure_payloads(cfg)
    rows = parallel_map(_worker_simulate, payloads, cfg.threads)
    samples = [{"n": p["n"], "replica": p["replica"], **row} for p, row in zip(payloads, rows)]
    per_n = {}
    for n in cfg.n_grid:
        zs = [r["Z"] for r in samples if r["n"] == n]
        s = stats.summarize(zs)
        if s.get("stderr", 0.0) > 0:
            s["mean_minus_1_in_stderr"] = (s["mean"] - 1.0) / s["stderr"]
        per_n[str(n)] = {"Z": s, "logZ": stats.summarize([r["logZ"] for r in samples if r["n"] == n])}
    return {"results": {"per_n": per_n}, "samples": samples, "aggregate": _per_n_rows(per_n)}


# ----------------------------------------------------------------- moments


def run_moments(cfg):
    payloads = _measure_payloads(cfg)
    rows = parallel_map(_worker_simulate, payloads, cfg.threads)
    samples = [{"n": p["n"], "replica": p["replica"], **row} for p, row in zip(payloads, rows)]
    per_n = {}
    by_n = {n: np.asarray([r["Z"] for r in samples if r["n"] == n]) for n in cfg.n_grid}
    for n, zs in by_n.items():
        entry = {}
        for p in cfg.p_grid:
            entry[f"Zp_{p:g}"] = stats.summarize(zs**p)
        per_n[str(n)] = entry
    growth = {}
    pstar_proxy = None
    for p in cfg.p_grid:
        means = [per_n[str(n)][f"Zp_{p:g}"]["mean"] for n in cfg.n_grid]
        slope, _, r2 = stats.loglog_fit(cfg.n_grid, means)
        flat = abs(slope) < FLAT_SLOPE
        growth[f"{p:g}"] = {"slope": slope, "r2": r2, "flat": flat}
        if flat:
            pstar_proxy = max(pstar_proxy or 0.0, p)
    results = {"per_n": per_n, "growth": growth, "pstar_proxy": pstar_proxy}
    if pstar_proxy is not None and pstar_proxy > 1.0:
        results["xi_from_proxy"] = stats.compute_xi(pstar_proxy, cfg.d)
    return {"results": results, "samples": samples, "aggregate": _per_n_rows(per_n)}


# -------------------------------------------------------------------- tail


def run_tail(cfg):
    n = cfg.n_grid[-1]
    payloads = [
        {"cfg": cfg.as_dict(), "n": n, "replica": r, "seed": cfg.replica_seed(TAG_MEASURE, n, r)}
        for r in range(cfg.replicas)
    ]
    rows = parallel_map(_worker_simulate, payloads, cfg.threads)
    zs = np.asarray([r["Z"] for r in rows])
    curve = []
    for u in cfg.u_grid:
        hits = int(np.count_nonzero(zs <= 1.0 / u))
        curve.append({"u": float(u), "prob": hits / len(zs), "hits": hits})
    fit = stats.tail_gamma_fit([c["u"] for c in curve], [c["prob"] for c in curve])
    monotone = all(a["prob"] >= b["prob"] for a, b in zip(curve, curve[1:]))
    results = {"n": n, "curve": curve, "gamma_fit": fit, "monotone": monotone, "replicas": len(zs)}
    samples = [{"n": n, "replica": p["replica"], "Z": float(z)} for p, z in zip(payloads, zs)]
    return {"results": results, "samples": samples, "aggregate": curve}


# ----------------------------------------------------------------- overlap


def _worker_overlap(payload):
    cfg = ExperimentConfig.from_dict(payload["cfg"])
    n = payload["n"]
    sys = _system(cfg, payload["seed"])
    alpha = polymer.polymer_measure_alpha(sys, (0,) * cfg.d, n, radius=cfg.radius(n), cell_budget=cfg.cell_budget)
    return {"overlap": float(np.sum(alpha.values * alpha.values))}


def run_overlap(cfg):
    payloads = _measure_payloads(cfg)
    rows = parallel_map(_worker_overlap, payloads, cfg.threads)
    samples = [{"n": p["n"], "replica": p["replica"], **row} for p, row in zip(payloads, rows)]
    per_n = {}
    replica_values = {}
    for n in cfg.n_grid:
        vals = [r["overlap"] for r in samples if r["n"] == n]
        per_n[str(n)] = {"overlap": stats.summarize(vals)}
        replica_values[n] = (vals, np.mean)
    results = {"per_n": per_n}
    try:
        series = [(n, per_n[str(n)]["overlap"]["mean"]) for n in cfg.n_grid]
        results["fit"] = stats.estimate_exponent(series, replica_values, seed=cfg.seed)
    except ValueError as e:
        results["fit"] = {"error": str(e)}
    return {"results": results, "samples": samples, "aggregate": _per_n_rows(per_n)}


# ------------------------------------------------- compare / exponent


def _mean_levels(n_grid):
    levels = [(0, n_grid[0])]
    levels += [(a, b) for a, b in zip(n_grid, n_grid[1:])]
    return levels


def _worker_mean_level(payload):
    cfg = ExperimentConfig.from_dict(payload["cfg"])
    a, b = payload["level"]
    sys = _system(cfg, payload["seed"])
    W = int(math.ceil(cfg.mean_box_factor * math.sqrt(cfg.n_grid[-1])))
    lo, shape = (-W,) * cfg.d, (2 * W + 1,) * cfg.d
    zb = polymer.all_starts_partition(sys, b, lo, shape, radius=cfg.radius(b), cell_budget=cfg.cell_budget)
    if a == 0:
        return {"value": float(np.mean(np.log(zb.values)))}
    za = polymer.all_starts_partition(sys, a, lo, shape, radius=cfg.radius(a), cell_budget=cfg.cell_budget)
    return {"value": float(np.mean(np.log(zb.values / za.values)))}


def estimate_log_means(cfg):
    """Telescoping estimate of E[log Z_n] for every n in the grid.

    Level (a, b) estimates E[log(Z_b/Z_a)] by averaging over a wide box of
    starting points; partial sums give the per-horizon means.  Seeds come
    from the mean stream, disjoint from measurement seeds.
    """
    levels = _mean_levels(list(cfg.n_grid))
    payloads = []
    for i, lvl in enumerate(levels):
        reps = cfg.mean_base_replicas if lvl[0] == 0 else cfg.mean_level_replicas
        for r in range(reps):
            payloads.append(
                {"cfg": cfg.as_dict(), "level": lvl, "seed": cfg.replica_seed(TAG_MEAN, 1000 + i, r)}
            )
    rows = parallel_map(_worker_mean_level, payloads, cfg.threads)
    acc = 0.0
    var = 0.0
    means = {}
    errs = {}
    detail = {}
    for i, lvl in enumerate(levels):
        vals = [row["value"] for p, row in zip(payloads, rows) if p["level"] == list(lvl) or p["level"] == lvl]
        s = stats.summarize(vals)
        acc += s["mean"]
        var += s.get("stderr", 0.0) ** 2
        means[lvl[1]] = acc
        errs[lvl[1]] = math.sqrt(var)
        detail[f"{lvl[0]}-{lvl[1]}"] = s
    return means, errs, detail


def _worker_compare(payload):
    cfg = ExperimentConfig.from_dict(payload["cfg"])
    n = payload["n"]
    sys = _system(cfg, payload["seed"])
    S, K = fields_mod.fluct_fields(
        sys, n, cfg.test_function(), payload["logZ_mean"], radius=cfg.radius(n), cell_budget=cfg.cell_budget
    )
    diff = abs(S - K)
    floor = min(abs(S), abs(K))
    return {
        "S": S,
        "K": K,
        "absS": abs(S),
        "absK": abs(K),
        "absSK": diff,
        "ratio": diff / floor if floor > 0 else float("nan"),
    }


def _run_compare_like(cfg):
    means, errs, detail = estimate_log_means(cfg)
    payloads = []
    for n in cfg.n_grid:
        for r in range(cfg.replicas):
            payloads.append(
                {
                    "cfg": cfg.as_dict(),
                    "n": n,
                    "replica": r,
                    "seed": cfg.replica_seed(TAG_MEASURE, n, r),
                    "logZ_mean": means[n],
                }
            )
    rows = parallel_map(_worker_compare, payloads, cfg.threads)
    samples = [{"n": p["n"], "replica": p["replica"], **row} for p, row in zip(payloads, rows)]
    per_n = {}
    for n in cfg.n_grid:
        sub = [r for r in samples if r["n"] == n]
        entry = {stat: stats.summarize([r[stat] for r in sub]) for stat in ("S", "K", "absS", "absK", "absSK", "ratio")}
        entry["logZ_mean_injected"] = {"value": means[n], "stderr": errs[n]}
        per_n[str(n)] = entry
    results = {"per_n": per_n, "mean_levels": detail}
    fits = {}
    by_n = {n: [r for r in samples if r["n"] == n] for n in cfg.n_grid}
    for label, stat_fn, key in (
        ("sd_S", stats.sd_stat, "S"),
        ("sd_K", stats.sd_stat, "K"),
        ("median_absS", stats.median_abs_stat, "S"),
        ("median_absK", stats.median_abs_stat, "K"),
        ("median_absSK", np.median, "absSK"),
    ):
        try:
            series = [(n, float(stat_fn(np.asarray([r[key] for r in by_n[n]])))) for n in cfg.n_grid]
            replica_values = {n: ([r[key] for r in by_n[n]], stat_fn) for n in cfg.n_grid}
            fits[label] = stats.estimate_exponent(series, replica_values, seed=cfg.seed)
        except ValueError as e:
            fits[label] = {"error": str(e)}
    if "slope" in fits.get("median_absSK", {}) and "slope" in fits.get("median_absS", {}):
        fits["slope_gap"] = fits["median_absSK"]["slope"] - fits["median_absS"]["slope"]
    results["fits"] = fits
    return {"results": results, "samples": samples, "aggregate": _per_n_rows(per_n)}


def run_compare(cfg):
    return _run_compare_like(cfg)


def run_exponent(cfg):
    return _run_compare_like(cfg)


# -------------------------------------------------------------- covariance


def _delta_mg_at(cfg, sys, n, x, stream):
    """Martingale increment of log Z at time n for the polymer started at x."""
    inc = fields_mod.doob_increments(
        sys,
        n,
        x,
        cfg.inner_samples,
        radius=cfg.radius(n),
        cell_budget=cfg.cell_budget,
        stream=stream,
    )
    return float(inc.mg[n - 1])


def _worker_covariance(payload):
    cfg = ExperimentConfig.from_dict(payload["cfg"])
    n = payload["n"]
    sys = _system(cfg, payload["seed"])
    out = {}
    for i, r in enumerate(payload["seps"]):
        x = (r,) + (0,) * (cfg.d - 1)
        out[f"A_{r}"] = _delta_mg_at(cfg, sys, n, x, stream=i)
    out["A0"] = _delta_mg_at(cfg, sys, n, (0,) * cfg.d, stream=len(payload["seps"]))
    return out


def _cov_separations(n):
    root = math.sqrt(n)
    return sorted({0, int(math.ceil(root)), int(math.ceil(root * math.log(n))), int(math.ceil(2 * root * math.log(n)))})


def run_covariance(cfg):
    n = cfg.n_grid[-1]
    seps = _cov_separations(n)
    payloads = [
        {"cfg": cfg.as_dict(), "n": n, "replica": r, "seed": cfg.replica_seed(TAG_MEASURE, n, r), "seps": seps}
        for r in range(cfg.replicas)
    ]
    rows = parallel_map(_worker_covariance, payloads, cfg.threads)
    samples = [{"n": n, "replica": p["replica"], **row} for p, row in zip(payloads, rows)]
    a0 = np.asarray([r["A0"] for r in rows])
    curve = []
    for r_sep in seps:
        ar = np.asarray([row[f"A_{r_sep}"] for row in rows])
        cov = float(np.mean((a0 - a0.mean()) * (ar - ar.mean())))
        se = float(np.std((a0 - a0.mean()) * (ar - ar.mean()), ddof=1) / math.sqrt(len(a0)))
        curve.append({"r": r_sep, "cov": cov, "stderr": se, "count": len(a0)})
    results = {"n": n, "separations": seps, "curve": curve}
    return {"results": results, "samples": samples, "aggregate": curve}


# -------------------------------------------------------------------- doob


def _worker_doob_mean(payload):
    cfg = ExperimentConfig.from_dict(payload["cfg"])
    n = payload["n"]
    sys = _system(cfg, payload["seed"])
    prof = polymer.forward_profile(sys, _origin(cfg), n, radius=cfg.radius(n), cell_budget=cfg.cell_budget)
    return {"ratios": np.diff(np.log(prof)).tolist()}


def _worker_doob(payload):
    cfg = ExperimentConfig.from_dict(payload["cfg"])
    n = payload["n"]
    sys = _system(cfg, payload["seed"])
    inc = fields_mod.doob_increments(
        sys,
        n,
        (0,) * cfg.d,
        cfg.inner_samples,
        prev_means=np.asarray(payload["prev_means"]),
        radius=cfg.radius(n),
        cell_budget=cfg.cell_budget,
    )
    telescope = abs(float(np.sum(inc.raw)) - math.log(polymer.forward_partition(
        sys, _origin(cfg), n, radius=cfg.radius(n), cell_budget=cfg.cell_budget)))
    return {
        "mg": inc.mg.tolist(),
        "prev": inc.prev.tolist(),
        "cond_se": inc.cond_se.tolist(),
        "telescope_err": telescope,
    }


def run_doob(cfg):
    n = cfg.n_grid[-1]
    mean_payloads = [
        {"cfg": cfg.as_dict(), "n": n, "seed": cfg.replica_seed(TAG_MEAN, n, r)}
        for r in range(max(cfg.mean_level_replicas * 4, 32))
    ]
    mean_rows = parallel_map(_worker_doob_mean, mean_payloads, cfg.threads)
    prev_means = np.mean(np.asarray([r["ratios"] for r in mean_rows]), axis=0)
    payloads = [
        {
            "cfg": cfg.as_dict(),
            "n": n,
            "replica": r,
            "seed": cfg.replica_seed(TAG_MEASURE, n, r),
            "prev_means": prev_means.tolist(),
        }
        for r in range(cfg.replicas)
    ]
    rows = parallel_map(_worker_doob, payloads, cfg.threads)
    mg = np.asarray([r["mg"] for r in rows])
    prev = np.asarray([r["prev"] for r in rows])
    cond_se = np.asarray([r["cond_se"] for r in rows])
    per_k = []
    for k in range(n):
        per_k.append(
            {
                "k": k + 1,
                "mg_mean": float(mg[:, k].mean()),
                "mg_stderr": float(mg[:, k].std(ddof=1) / math.sqrt(len(rows))) if len(rows) > 1 else 0.0,
                "prev_mean": float(prev[:, k].mean()),
                "inner_se_mean": float(cond_se[:, k].mean()),
            }
        )
    results = {
        "n": n,
        "per_k": per_k,
        "prev_means_injected": prev_means.tolist(),
        "max_telescope_err": max(r["telescope_err"] for r in rows),
        "replicas": len(rows),
    }
    samples = [{"n": n, "replica": p["replica"], "telescope_err": r["telescope_err"]} for p, r in zip(payloads, rows)]
    return {"results": results, "samples": samples, "aggregate": per_k}


# ------------------------------------------------------------ appendix-phi


def run_appendix_phi(cfg):
    eta = fields_mod.lognormal_eta(cfg.phi_beta)
    rows = []
    for m in cfg.phi_atoms:
        a = np.full(m, 1.0 / m)
        diag = fields_mod.appendix_phi_diag(a, eta, cfg.phi_samples, seed=cfg.seed + m)
        rows.append(
            {
                "atoms": m,
                "sum_a_sq": diag.sum_a_sq,
                "mean_abs_phi": diag.mean_abs_phi,
                "mean_log1p_sq": diag.mean_log1p_sq,
                "phi_ratio": diag.mean_abs_phi / diag.sum_a_sq,
                "log1p_ratio": diag.mean_log1p_sq / diag.sum_a_sq,
                "se_abs_phi": diag.se_abs_phi,
                "se_log1p_sq": diag.se_log1p_sq,
            }
        )
    phis = [r["phi_ratio"] for r in rows]
    l2s = [r["log1p_ratio"] for r in rows]
    results = {
        "rows": rows,
        "phi_ratio_spread": max(phis) / min(phis),
        "log1p_ratio_spread": max(l2s) / min(l2s),
        "samples_per_m": cfg.phi_samples,
    }
    return {"results": results, "samples": rows, "aggregate": rows}


# ----------------------------------------------------------------- helpers


def _per_n_rows(per_n):
    rows = []
    for n, entry in per_n.items():
        row = {"n": int(n)}
        for stat, summary in entry.items():
            if isinstance(summary, dict):
                for key, val in summary.items():
                    row[f"{stat}_{key}"] = val
            else:
                row[stat] = summary
        rows.append(row)
    return sorted(rows, key=lambda r: r["n"])


RUNNERS = {
    "simulate": run_simulate,
    "moments": run_moments,
    "tail": run_tail,
    "overlap": run_overlap,
    "compare": run_compare,
    "exponent": run_exponent,
    "covariance": run_covariance,
    "doob": run_doob,
    "appendix-phi": run_appendix_phi,
}
