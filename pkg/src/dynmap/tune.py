"""
Hyperparameter search: exhaustive grids and Gaussian-process Bayesian
optimization of a weighted sum of static cost and evaluation metrics.
"""
import csv
import itertools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm, qmc

from .core import FitSpec
from .errors import ConfigError, DynMapError
from .optimize import OptimizerSettings, fit

N_CANDIDATES = 1024
LENGTH_SCALE_GRID = np.geomspace(0.05, 5.0, 12)
JITTER = 1e-6
MAX_JITTER = 1e-2
REFINE_STEPS = 5
SPEC_FIELDS = ("alpha", "p", "d")


@dataclass
class Dimension:
    """One search dimension, a real or integer interval ``[lo, hi]``."""

    name: str
    lo: float
    hi: float
    integer: bool = False

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ConfigError(f"{self.name}: lower bound {self.lo} exceeds upper bound {self.hi}")

    def to_unit(self, x):
        lo, hi = (self.lo - 0.5, self.hi + 0.5) if self.integer else (self.lo, self.hi)
        return 0.0 if hi == lo else (x - lo) / (hi - lo)

    def from_unit(self, u):
        if self.integer:
            x = self.lo - 0.5 + u * (self.hi - self.lo + 1)
            return int(np.clip(np.round(x), self.lo, self.hi))
        return float(self.lo + u * (self.hi - self.lo))


def search_space(bounds):
    """Build dimensions from ``{name: (lo, hi)}``; integer bounds give integer dimensions."""
    dims = []
    for name, (lo, hi) in bounds.items():
        integer = isinstance(lo, (int, np.integer)) and isinstance(hi, (int, np.integer))
        dims.append(Dimension(name, lo, hi, integer))
    if not dims:
        raise ConfigError("search space needs at least one parameter")
    return dims


@dataclass
class TuneResult:
    """One row per evaluation; ``best_row`` minimizes ``combined_loss``."""

    rows: list
    param_names: list
    metric_names: list
    best_row: int = None

    @property
    def best(self):
        return None if self.best_row is None else self.rows[self.best_row]

    def columns(self):
        return self.param_names + self.metric_names + ["cost_static_avg", "combined_loss", "error"]

    def to_csv(self, f):
        writer = csv.DictWriter(f, fieldnames=self.columns(), lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: row.get(k, "") for k in self.columns()})


def combined_loss(static_avg, metric_values, weights):
    """``weights[0] * static_avg + sum_k weights[k] * metric_values[k - 1]``."""
    metric_values = np.atleast_1d(np.asarray(metric_values, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (1 + metric_values.size,):
        raise ConfigError(f"expected {1 + metric_values.size} weights, got {weights.size}")
    if np.any(weights < 0):
        raise ConfigError("weights must be nonnegative")
    return float(weights[0] * static_avg + weights[1:] @ metric_values)


def _apply_params(spec, params):
    spec_kw = {k: v for k, v in params.items() if k in SPEC_FIELDS}
    method_kw = {k: v for k, v in params.items() if k not in SPEC_FIELDS}
    return replace(spec, **spec_kw, method_params={**spec.method_params, **method_kw})


def _evaluate(D, spec, params, eval_functions, weights, settings, mask):
    """Fit at ``params`` and return a result row (errors are recorded, not raised)."""
    row = dict(params)
    try:
        result = fit(D, _apply_params(spec, params), settings, mask)
        values = [float(f(result.coords)) for f in eval_functions.values()]
    except (DynMapError, ArithmeticError) as exc:
        row.update({name: float("nan") for name in eval_functions})
        row.update(cost_static_avg=float("nan"), combined_loss=float("nan"), error=str(exc))
        return row
    row.update(zip(eval_functions, values))
    row["cost_static_avg"] = result.cost_static_avg
    row["combined_loss"] = (
        combined_loss(result.cost_static_avg, values, weights) if weights is not None else float("nan")
    )
    row["error"] = ""
    return row


def _best(rows):
    losses = np.array([r["combined_loss"] for r in rows], dtype=float)
    if not np.any(np.isfinite(losses)):
        return None
    return int(np.nanargmin(losses))


def grid_search(D, spec=None, param_grid=None, eval_functions=None, weights=None, settings=None, mask=None):
    """Fit once per point of the Cartesian grid and record every metric.

    Parameters
    ----------
    param_grid : dict of name -> list of values
        ``alpha``, ``p`` and ``d`` set the corresponding fit fields, other
        names go to ``method_params``.
    eval_functions : dict of name -> callable
        Each maps fitted coordinates ``(T, n, d)`` to a float.
    weights : sequence, optional
        Combined-loss weights; without them no best row is chosen.
    settings : OptimizerSettings
        Shared by all grid points (same seed or init), so results are comparable.
    """
    spec = FitSpec() if spec is None else spec
    settings = OptimizerSettings() if settings is None else settings
    eval_functions = dict(eval_functions or {})
    if not param_grid or any(len(v) == 0 for v in param_grid.values()):
        raise ConfigError("parameter grid must be nonempty")
    names = list(param_grid)
    rows = [
        _evaluate(D, spec, dict(zip(names, combo)), eval_functions, weights, settings, mask)
        for combo in itertools.product(*param_grid.values())
    ]
    if all(r["error"] for r in rows):
        raise DynMapError(f"all {len(rows)} grid fits failed; first error: {rows[0]['error']}")
    return TuneResult(rows, names, list(eval_functions), _best(rows) if weights is not None else None)


def matern52(A, B, length_scales):
    r = np.sqrt(np.sum(((A[:, None, :] - B[None, :, :]) / length_scales) ** 2, axis=2))
    s = np.sqrt(5.0) * r
    return (1.0 + s + s ** 2 / 3.0) * np.exp(-s)


@dataclass
class GaussianProcess:
    """Noise-free GP regression on the unit cube with a Matern-5/2 kernel.

    Targets are standardized; the signal variance is profiled out and the
    per-dimension length scales maximize the marginal likelihood over a log
    grid.
    """

    length_scales: np.ndarray = None
    jitter: float = JITTER
    _state: dict = field(default_factory=dict, repr=False)

    def _factor(self, X, ls):
        K = matern52(X, X, ls)
        jitter = self.jitter
        while jitter <= MAX_JITTER * (1 + 1e-9):
            try:
                return np.linalg.cholesky(K + jitter * np.eye(len(X))), jitter
            except np.linalg.LinAlgError:
                jitter *= 10
        return None, None

    @staticmethod
    def _refine(K, L, y, alpha, steps=REFINE_STEPS):
        # the jitter only stabilizes the factorization; iterative refinement
        # moves the weights toward the exact interpolant of K alpha = y
        for _ in range(steps):
            r = y - K @ alpha
            if np.max(np.abs(r)) <= 1e-12:
                break
            alpha = alpha + np.linalg.solve(L.T, np.linalg.solve(L, r))
        return alpha

    def fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float)
        mean, sd = y.mean(), y.std()
        sd = sd if sd > 0 else 1.0
        yn = (y - mean) / sd
        n, dim = X.shape
        grids = [LENGTH_SCALE_GRID] * dim if self.length_scales is None else [[ls] for ls in self.length_scales]
        best = None
        for ls in itertools.product(*grids):
            ls = np.array(ls)
            L, jitter = self._factor(X, ls)
            if L is None:
                continue
            alpha = np.linalg.solve(L.T, np.linalg.solve(L, yn))
            sigma2 = max(float(yn @ alpha) / n, 1e-12)
            loglik = -0.5 * n * np.log(sigma2) - np.sum(np.log(np.diag(L)))
            if best is None or loglik > best[0] + 1e-12:
                best = (loglik, ls, L, alpha, sigma2, jitter)
        if best is None:
            raise DynMapError(f"surrogate covariance stays singular with jitter up to {MAX_JITTER}")
        _, ls, L, alpha, sigma2, jitter = best
        alpha = self._refine(matern52(X, X, ls), L, yn, alpha)
        self._state = dict(X=X, L=L, alpha=alpha, sigma2=sigma2, mean=mean, sd=sd, ls=ls, jitter=jitter)
        return self

    def predict(self, Xs):
        s = self._state
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        Ks = matern52(Xs, s["X"], s["ls"])
        mu = Ks @ s["alpha"]
        v = np.linalg.solve(s["L"], Ks.T)
        var = s["sigma2"] * np.maximum(1.0 - np.sum(v ** 2, axis=0), 0.0)
        return s["mean"] + s["sd"] * mu, s["sd"] * np.sqrt(var)


def expected_improvement(mu, sigma, best):
    """EI for minimization, ``(f* - mu) Phi(z) + sigma phi(z)``; ``max(f* - mu, 0)`` where sigma = 0."""
    mu, sigma = np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    gap = best - mu
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, gap / sigma, 0.0)
    ei = np.where(sigma > 0, gap * norm.cdf(z) + sigma * norm.pdf(z), np.maximum(gap, 0.0))
    return np.maximum(ei, 0.0)


def bayesian_minimize(objective, space, n_calls=20, n_initial_points=3, acq="EI", seed=0):
    """Minimize ``objective(params) -> float`` over a search space.

    The first ``n_initial_points`` points come from a scrambled Halton
    sequence; each later point maximizes expected improvement over 1024
    seeded uniform candidates under a GP fitted to all observations.

    Returns
    -------
    list of (params, value)
        In evaluation order.
    """
    if acq != "EI":
        raise ConfigError(f"unsupported acquisition {acq!r}; only 'EI' is available")
    if n_initial_points < 1 or n_calls < n_initial_points:
        raise ConfigError("need 1 <= n_initial_points <= n_calls")
    dims = search_space(space) if isinstance(space, dict) else list(space)
    rng = np.random.default_rng(seed)
    initial = qmc.Halton(d=len(dims), scramble=True, seed=rng).random(n_initial_points)

    def decode(u):
        return {dim.name: dim.from_unit(ui) for dim, ui in zip(dims, u)}

    def encode(params):
        return np.array([dim.to_unit(params[dim.name]) for dim in dims])

    history, U, y = [], [], []
    for k in range(n_calls):
        if k < n_initial_points:
            u = initial[k]
        else:
            finite = np.isfinite(y)
            # failed evaluations count as the worst value seen so far
            worst = np.max(np.asarray(y)[finite]) if finite.any() else 0.0
            gp = GaussianProcess().fit(np.array(U), np.where(finite, y, worst))
            cand = rng.random((N_CANDIDATES, len(dims)))
            mu, sigma = gp.predict(cand)
            best = np.min(np.where(finite, y, worst))
            u = cand[int(np.argmax(expected_improvement(mu, sigma, best)))]
        params = decode(u)
        value = float(objective(params))
        history.append((params, value))
        U.append(encode(params))
        y.append(value)
    return history


def bayesian_search(D, spec=None, space=None, eval_functions=None, weights=None, n_calls=20,
                    n_initial_points=3, acq="EI", seed=0, settings=None, mask=None):
    """Bayesian optimization of the combined loss over ``space``.

    Every evaluation is a full fit with the shared ``settings``; the table
    holds one row per call.
    """
    spec = FitSpec() if spec is None else spec
    settings = OptimizerSettings() if settings is None else settings
    eval_functions = dict(eval_functions or {})
    if weights is None:
        raise ConfigError("Bayesian search needs combined-loss weights")
    dims = search_space(space) if isinstance(space, dict) else list(space)
    rows = []

    def objective(params):
        row = _evaluate(D, spec, params, eval_functions, weights, settings, mask)
        rows.append(row)
        return row["combined_loss"]

    bayesian_minimize(objective, dims, n_calls, n_initial_points, acq, seed)
    if all(r["error"] for r in rows):
        raise DynMapError(f"all {len(rows)} fits failed; first error: {rows[0]['error']}")
    return TuneResult(rows, [d.name for d in dims], list(eval_functions), _best(rows))
