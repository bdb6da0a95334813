"""Statistical estimators for the Monte Carlo harness."""

import math

import numpy as np

from ..kernels import derive_seed


def compute_xi(pstar, d):
    """Scaling exponent d/2 - (1 + d/2)/min(pstar, 2); needs pstar > 1."""
    if pstar <= 1.0:
        raise ValueError(f"pstar must be > 1, got {pstar}")
    return d / 2.0 - (1.0 + d / 2.0) / min(pstar, 2.0)


def ols(x, y):
    """Least squares line fit: (slope, intercept, r_squared)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 2:
        raise ValueError("need at least 2 points")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise ValueError("degenerate abscissa")
    slope = float(np.sum((x - xm) * (y - ym))) / sxx
    intercept = ym - slope * xm
    resid = y - slope * x - intercept
    syy = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if syy == 0.0 else 1.0 - float(np.sum(resid**2)) / syy
    return slope, intercept, r2


def loglog_fit(ns, values):
    """OLS on (log n, log value); values must be positive."""
    values = np.asarray(values, dtype=np.float64)
    if np.any(values <= 0):
        raise ValueError("log-log fit needs positive values")
    return ols(np.log(np.asarray(ns, dtype=np.float64)), np.log(values))


def estimate_exponent(series, replica_values=None, n_boot=200, seed=0):
    """Power-law exponent from per-n statistics, with a bootstrap CI.

    series: [(n, value)] with positive values.  replica_values optionally
    maps n to the per-replica samples behind each value together with the
    statistic to recompute: (samples, stat_fn).  Without them the CI
    degenerates to the point estimate.
    """
    if len(series) < 3:
        raise ValueError("need at least 3 grid points")
    ns = [s[0] for s in series]
    vals = [s[1] for s in series]
    slope, intercept, r2 = loglog_fit(ns, vals)
    if not replica_values:
        return {"slope": slope, "intercept": intercept, "r2": r2, "ci": (slope, slope)}
    rng = np.random.Generator(np.random.Philox(key=derive_seed(seed, 0xB007)))
    slopes = np.empty(n_boot)
    logn = np.log(np.asarray(ns, dtype=np.float64))
    for b in range(n_boot):
        ys = []
        for n in ns:
            samples, stat_fn = replica_values[n]
            samples = np.asarray(samples)
            pick = samples[rng.integers(0, samples.size, samples.size)]
            ys.append(stat_fn(pick))
        ys = np.log(np.maximum(np.asarray(ys), 1e-300))
        slopes[b], _, _ = ols(logn, ys)
    lo, hi = np.quantile(slopes, [0.025, 0.975])
    return {"slope": slope, "intercept": intercept, "r2": r2, "ci": (float(lo), float(hi))}


def summarize(values):
    """mean/sd/stderr/median/quartiles/count of a sample vector."""
    arr = np.asarray([v for v in values if v == v], dtype=np.float64)  # drop NaN
    n = arr.size
    if n == 0:
        return {"count": 0}
    out = {
        "count": int(n),
        "mean": float(arr.mean()),
        "median": float(np.median(arr)),
    }
    if n > 1:
        sd = float(arr.std(ddof=1))
        out["sd"] = sd
        out["stderr"] = sd / math.sqrt(n)
        q = np.quantile(arr, [0.25, 0.75])
        out["q25"], out["q75"] = float(q[0]), float(q[1])
    return out


def sd_stat(arr):
    return float(np.std(np.asarray(arr), ddof=1))


def median_abs_stat(arr):
    return float(np.median(np.abs(np.asarray(arr))))


def tail_gamma_fit(u_grid, probs, gammas=(1, 2)):
    """Fit -log P against (log u)^gamma on points with positive mass.

    Returns per-gamma fits plus which exponent explains the curve better.
    """
    u = np.asarray(u_grid, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    keep = p > 0
    fits = {}
    for g in gammas:
        if np.count_nonzero(keep) >= 3:
            slope, intercept, r2 = ols(np.log(u[keep]) ** g, -np.log(p[keep]))
            fits[str(g)] = {"slope": slope, "intercept": intercept, "r2": r2}
        else:
            fits[str(g)] = {"slope": float("nan"), "intercept": float("nan"), "r2": float("nan")}
    r2s = {g: f["r2"] for g, f in fits.items()}
    best = None
    if all(v == v for v in r2s.values()):
        best = max(r2s, key=r2s.get)
    return {"fits": fits, "n_points": int(np.count_nonzero(keep)), "best_gamma": best}
