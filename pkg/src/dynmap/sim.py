"""
Ground-truth simulation: momentum random walks, noisy distance measurement,
recovery studies and runtime benchmarks.
"""
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .core import FitSpec
from .errors import ConfigError, DynMapError
from .optimize import OptimizerSettings, fit
from .transform import align_maps, procrustes_distance


@dataclass
class SimConfig:
    n: int = 6
    t: int = 10
    scale: float = 1.0
    noise: float = 0.25
    momentum: float = 0.6
    measurement_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("need at least 2 objects")
        if self.t < 2:
            raise ConfigError("need at least 2 periods")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must lie in [0, 1)")
        if self.scale < 0 or self.noise < 0 or self.measurement_noise < 0:
            raise ConfigError("scale and noise levels must be nonnegative")


def simulate_paths(cfg=None, **kwargs):
    """Momentum random walk in two dimensions.

    Start positions are ``N(0, scale^2)`` and the first velocity ``N(0, noise^2)``;
    afterwards ``dx <- momentum * dx + (1 - momentum) * N(0, noise^2)``.

    Returns
    -------
    ndarray of shape (t, n, 2)
    """
    cfg = SimConfig(**kwargs) if cfg is None else replace(cfg, **kwargs)
    rng = np.random.default_rng(cfg.seed)
    X = rng.standard_normal((cfg.n, 2)) * cfg.scale
    dX = rng.standard_normal((cfg.n, 2)) * cfg.noise
    out = [X.copy()]
    for _ in range(1, cfg.t):
        dX = cfg.momentum * dX + (1 - cfg.momentum) * rng.standard_normal((cfg.n, 2)) * cfg.noise
        X = X + dX
        out.append(X.copy())
    return np.stack(out)


def measure_distances(X_true, measurement_noise=0.0, seed=0):
    """Euclidean distances between positions perturbed by ``N(0, noise^2)``."""
    X_true = np.asarray(X_true, dtype=float)
    rng = np.random.default_rng(seed)
    out = []
    for X in X_true:
        X_noisy = X + rng.standard_normal(X.shape) * measurement_noise
        out.append(squareform(pdist(X_noisy)))
    return np.stack(out)


def _rep_seeds(seed, *keys):
    ss = np.random.SeedSequence([seed, *keys])
    return [int(s) for s in ss.generate_state(2)]


def recovery_study(noise_levels=(0.01, 0.5), alpha_levels=(0.0, 0.3), reps=10, spec=None,
                   settings=None, cfg=None, seed=0):
    """Fit simulated data at each (noise, alpha) and measure recovery.

    For each noise level and replication a fresh ground truth is simulated and
    measured; every alpha is fitted to the same measurements. Each fit is
    aligned to the first true map, then compared with the truth period by
    period.

    Returns
    -------
    rows : list of dict
        One per (noise, rep, alpha) with ``stress`` (mean static cost),
        ``procrustes`` (mean Procrustes distance) and ``error``.
    summary : list of dict
        Means over replications per (noise, alpha).
    """
    if reps < 1:
        raise ConfigError("reps must be at least 1")
    spec = FitSpec(method="mds", p=1, method_params={"mds_type": "ratio"}) if spec is None else spec
    settings = OptimizerSettings(n_inits=10) if settings is None else settings
    cfg = SimConfig() if cfg is None else cfg
    rows = []
    for a, noise in enumerate(noise_levels):
        for rep in range(reps):
            sim_seed, meas_seed = _rep_seeds(seed, a, rep)
            X_true = simulate_paths(replace(cfg, seed=sim_seed))
            D = measure_distances(X_true, noise, meas_seed)
            for alpha in alpha_levels:
                row = {"noise": noise, "rep": rep, "alpha": alpha}
                try:
                    result = fit(D, replace(spec, alpha=alpha), settings)
                    aligned = align_maps(result.coords, X_true[0])
                    dist = [procrustes_distance(X_true[t], aligned[t]) for t in range(len(X_true))]
                    row.update(stress=result.cost_static_avg, procrustes=float(np.mean(dist)), error="")
                except (DynMapError, ArithmeticError) as exc:
                    row.update(stress=float("nan"), procrustes=float("nan"), error=str(exc))
                rows.append(row)
    summary = []
    for noise in noise_levels:
        for alpha in alpha_levels:
            cell = [r for r in rows if r["noise"] == noise and r["alpha"] == alpha]
            with np.errstate(all="ignore"):
                summary.append({
                    "noise": noise,
                    "alpha": alpha,
                    "stress": float(np.nanmean([r["stress"] for r in cell])),
                    "procrustes": float(np.nanmean([r["procrustes"] for r in cell])),
                })
    return rows, summary


def runtime_benchmark(n_list=(10, 50, 100), t_list=(10, 50, 100), n_iter=750, alpha=0.3, seed=0,
                      measurement_noise=0.1):
    """Wall-clock seconds of one joint fit and of ``t`` independent static fits
    per (n, t) cell, both with ``tol=0`` and a fixed iteration budget. Distances
    are measured with some noise so no fit reaches an exact zero-stress
    solution and stops early.

    Returns
    -------
    joint, independent : list of dict
        Rows ``{"n", "t", "seconds", "iterations"}``.
    """
    if not n_list or not t_list:
        raise ConfigError("benchmark grids must be nonempty")
    settings = OptimizerSettings(n_iter=n_iter, tol=0.0, seed=seed)
    joint_spec = FitSpec(method="mds", alpha=alpha, p=1, method_params={"mds_type": "ratio"})
    static_spec = FitSpec(method="mds", alpha=0.0, p=1, method_params={"mds_type": "ratio"})
    joint, independent = [], []
    for n in n_list:
        for t in t_list:
            X_true = simulate_paths(n=n, t=t, seed=seed)
            D = measure_distances(X_true, measurement_noise, seed)
            start = time.perf_counter()
            result = fit(D, joint_spec, settings)
            joint.append({"n": n, "t": t, "seconds": time.perf_counter() - start,
                          "iterations": result.iterations_used})
            start = time.perf_counter()
            its = [fit(D[k:k + 1], static_spec, settings).iterations_used for k in range(t)]
            independent.append({"n": n, "t": t, "seconds": time.perf_counter() - start,
                                "iterations": int(np.sum(its))})
    return joint, independent
