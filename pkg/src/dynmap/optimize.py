"""
Joint optimization over configuration sequences.

MDS and Sammon use gradient descent with a backtracking line search that
halves the step until the total cost decreases; without a temporal penalty
the search and the stopping rules run per period. t-SNE uses momentum with
per-parameter gains.
"""
import sys
from dataclasses import dataclass, field

import numpy as np

from .core import (
    FitSpec,
    as_dissimilarities,
    as_mask,
    compute_object_weights,
    pair_weights,
    total_value_and_grad,
)
from .errors import ConfigError, DivergenceError, InvalidHyperparameterError
from .static import _distances, make_static_cost

INIT_SCALE = 1e-2
MIN_DECREASE = 1e-10


@dataclass
class OptimizerSettings:
    """Optimizer budget and stopping rules. ``tol=0`` disables both early
    stops (vanishing gradient and stalled cost), so runs use the full
    ``n_iter`` unless no descent step can be found."""

    n_iter: int = 2000
    tol: float = 1e-4
    step_size: float = 1.0
    n_inits: int = 1
    init: object = None
    n_iter_check: int = 50
    verbose: int = 0
    seed: int = 0
    max_halvings: int = 16
    momentum: float = 0.8
    early_exaggeration: float = 1.0
    exaggeration_iters: int = 100

    def __post_init__(self):
        if self.n_iter < 1:
            raise ConfigError("n_iter must be at least 1")
        if self.tol < 0:
            raise ConfigError("tol must be nonnegative")
        if not self.step_size > 0:
            raise ConfigError("step_size must be positive")
        if self.n_inits < 1:
            raise ConfigError("n_inits must be at least 1")
        if self.n_iter_check < 1:
            raise ConfigError("n_iter_check must be at least 1")
        if self.verbose not in (0, 1, 2):
            raise ConfigError("verbose must be 0, 1 or 2")


@dataclass
class FitResult:
    coords: np.ndarray
    cost_total_final: float
    cost_static_avg: float
    cost_static: np.ndarray
    converged: bool
    iterations_used: int
    init_index_selected: int
    stop_reason: str
    trace: list = field(default_factory=list)


def _rms(grad):
    return float(np.sqrt(np.mean(grad ** 2)))


def _method_tag(spec):
    return {"mds": "MDS", "sammon": "Sammon", "tsne": "TSNE"}[spec.method]


def describe_progress(trace, verbose, tag="MDS", optimizer=None, stop=None):
    """Format diagnostic lines for a finished run.

    Parameters
    ----------
    trace : list of (iteration, cost, grad_norm)
        Periodic checkpoints.
    verbose : {0, 1, 2}
    stop : (iteration, reason, final_cost), optional
        Terminal record.
    """
    if verbose <= 0:
        return []
    lines = []
    if optimizer:
        lines.append(f"[{tag}] Running {optimizer}")
    if verbose >= 2:
        for it, cost, gnorm in trace:
            lines.append(f"[{tag}] Iteration {it} -- Cost: {cost:.2f} -- Gradient Norm: {gnorm:.4f}")
    if stop is not None:
        it, reason, cost = stop
        lines.append(f"[{tag}] Iteration {it}: {reason}. Final cost: {cost:.2f}")
    return lines


def _gradient_descent(fun, X, settings):
    """Backtracking gradient descent; returns (X, cost, grad, static, trace, it, reason)."""
    cost, grad, static = fun(X, True)
    trace = []
    last_check = cost
    reason = "maximum number of iterations reached"
    it = 0
    for it in range(1, settings.n_iter + 1):
        if _rms(grad) <= settings.tol:
            reason = "gradient norm vanished"
            break
        step = settings.step_size
        for _ in range(settings.max_halvings + 1):
            X_new = X - step * grad
            cost_new = fun(X_new, False)[0]
            if not np.isfinite(cost_new):
                raise DivergenceError(it)
            if cost_new < cost:
                break
            step /= 2
        else:
            reason = "no descent step found"
            break
        X = X_new
        cost, grad, static = fun(X, True)
        if it % settings.n_iter_check == 0:
            trace.append((it, cost, _rms(grad)))
            if settings.tol > 0 and last_check - cost < MIN_DECREASE:
                reason = "cost stopped decreasing"
                break
            last_check = cost
    return X, cost, grad, static, trace, it, reason


def _blockwise_descent(fun, X, settings):
    """Backtracking gradient descent run separately per period.

    Without the temporal penalty the cost is a sum of independent per-period
    terms, so each period gets its own step search and its own stopping rule,
    exactly as if it were fitted alone.
    """
    cost, grad, static = fun(X, True)
    static = np.asarray(static, dtype=float).copy()
    n_periods = X.shape[0]
    active = np.ones(n_periods, dtype=bool)
    reasons = ["maximum number of iterations reached"] * n_periods
    stopped_at = np.full(n_periods, settings.n_iter)
    last_check = static.copy()
    trace = []

    def stop(t, it, why):
        active[t] = False
        reasons[t] = why
        stopped_at[t] = it

    for it in range(1, settings.n_iter + 1):
        for t in np.flatnonzero(active):
            if _rms(grad[t]) <= settings.tol:
                stop(t, it, "gradient norm vanished")
        if not active.any():
            break
        step = np.where(active, settings.step_size, 0.0)
        pending = active.copy()
        X_new = X.copy()
        accepted = np.zeros(n_periods, dtype=bool)
        for _ in range(settings.max_halvings + 1):
            X_try = X - step[:, None, None] * grad
            trial = np.asarray(fun(X_try, False)[2], dtype=float)
            if not np.all(np.isfinite(trial[pending])):
                raise DivergenceError(it)
            ok = pending & (trial < static)
            X_new[ok] = X_try[ok]
            accepted |= ok
            pending &= ~ok
            if not pending.any():
                break
            step = np.where(pending, step / 2, step)
        for t in np.flatnonzero(pending):
            stop(t, it, "no descent step found")
        if not accepted.any():
            break
        X = X_new
        cost, grad, new_static = fun(X, True)
        # frozen periods keep the cost they stopped at
        static = np.where(accepted, new_static, static)
        if it % settings.n_iter_check == 0:
            trace.append((it, cost, _rms(grad)))
            for t in np.flatnonzero(active):
                if settings.tol > 0 and last_check[t] - static[t] < MIN_DECREASE:
                    stop(t, it, "cost stopped decreasing")
            last_check = static.copy()
    cost = float(np.sum(static))
    last = int(np.argmax(stopped_at))
    return X, cost, grad, static, trace, int(stopped_at.max()), reasons[last]


def _momentum_descent(fun, X, settings, static_cost):
    """Momentum gradient descent with adaptive gains (t-SNE)."""
    lr = settings.step_size * 200.0
    update = np.zeros_like(X)
    gains = np.ones_like(X)
    exaggerate = settings.early_exaggeration != 1.0
    if exaggerate:
        static_cost.exaggeration = settings.early_exaggeration
    cost, grad, static = fun(X, True)
    prev_grad = np.zeros_like(X)
    trace = []
    last_check = cost
    reason = "maximum number of iterations reached"
    it = 0
    try:
        for it in range(1, settings.n_iter + 1):
            if exaggerate and it == settings.exaggeration_iters + 1:
                static_cost.exaggeration = 1.0
                cost, grad, static = fun(X, True)
            if not exaggerate or it > settings.exaggeration_iters:
                if _rms(grad) <= settings.tol:
                    reason = "gradient norm vanished"
                    break
            # grow gains while the gradient keeps its sign, shrink on a flip
            agree = np.sign(grad) == np.sign(prev_grad)
            gains = np.maximum(np.where(agree, gains * 1.2, gains * 0.8), 0.01)
            update = settings.momentum * update - lr * gains * grad
            X = X + update
            prev_grad = grad
            cost, grad, static = fun(X, True)
            if not np.isfinite(cost):
                raise DivergenceError(it)
            if it % settings.n_iter_check == 0:
                trace.append((it, cost, _rms(grad)))
                if settings.tol > 0 and abs(last_check - cost) < MIN_DECREASE:
                    reason = "cost stopped decreasing"
                    break
                last_check = cost
    finally:
        static_cost.exaggeration = 1.0
    if exaggerate:
        cost, grad, static = fun(X, True)
    return X, cost, grad, static, trace, it, reason


def random_start(D, spec, seed, static_cost=None):
    """Seeded standard-normal start scaled by 1e-2.

    One draw is shared by all periods so that the starting maps agree in
    orientation. For MDS each period is then rescaled along its ray to the
    scale that minimizes normalized stress at the start's disparities, since a
    raw 1e-2 start is thrown onto the flat large-scale region by the first
    unit step.
    """
    n_periods, n = D.shape[:2]
    draw = np.random.default_rng(seed).standard_normal((n, spec.d)) * INIT_SCALE
    X = np.repeat(draw[None], n_periods, axis=0)
    if spec.method == "mds" and static_cost is not None:
        dist = _distances(X)
        dhat = static_cost.disparities(X)
        W = static_cost.W
        if W is not None:
            dist = dist * W
        num = np.sum(dhat * dist, axis=(1, 2))
        den = np.sum(dhat ** 2, axis=(1, 2))
        scale = np.where(num > 0, den / np.where(num > 0, num, 1.0), 1.0)
        X = X * scale[:, None, None]
    return X


def _validate(D, spec, settings, mask):
    n_periods, n = D.shape[:2]
    if n_periods == 1:
        if spec.alpha > 0:
            raise InvalidHyperparameterError("a single period admits no temporal penalty; set alpha=0")
    elif spec.p >= n_periods:
        raise InvalidHyperparameterError(f"p={spec.p} requires more than {spec.p} periods, got {n_periods}")
    if spec.d > n - 1:
        raise ConfigError(f"cannot embed {n} objects in {spec.d} dimensions")
    mask = as_mask(mask, n_periods, n)
    init = None
    if settings.init is not None:
        init = np.asarray(settings.init, dtype=float)
        if init.shape != (n_periods, n, spec.d):
            raise ConfigError(f"init shape {init.shape} does not match ({n_periods}, {n}, {spec.d})")
    if spec.method == "tsne":
        perplexity = spec.method_params.get("perplexity", 30.0)
        counts = n if mask is None else mask.sum(axis=1).min()
        if not perplexity < counts:
            raise InvalidHyperparameterError(f"perplexity {perplexity} must be below the object count {counts}")
    return mask, init


def fit(D, spec=None, settings=None, mask=None):
    """Fit a sequence of configurations to a sequence of dissimilarity matrices.

    Parameters
    ----------
    D : DissimilaritySequence or array of shape (T, n, n)
    spec : FitSpec
    settings : OptimizerSettings
    mask : array of shape (T, n), optional
        Inclusion mask for unbalanced rosters. Coordinates of excluded
        objects stay at their starting values.

    Returns
    -------
    FitResult
        The run with the lowest final total cost among ``settings.n_inits``
        random starts (ties go to the lowest start index). A fixed ``init``
        forces a single run.
    """
    spec = FitSpec() if spec is None else spec
    settings = OptimizerSettings() if settings is None else settings
    D = as_dissimilarities(D)
    n_periods, n = D.shape[:2]
    mask, init = _validate(D, spec, settings, mask)

    W = None if mask is None else pair_weights(mask, n_periods, n)
    static_cost = make_static_cost(spec, D, W)
    weights = compute_object_weights(D, mask) if n_periods > 1 and spec.alpha > 0 else None

    def fun(X, compute_grad):
        return total_value_and_grad(X, spec, static_cost, weights, mask, compute_grad)

    tag = _method_tag(spec)
    if spec.method == "tsne":
        optimizer = "Gradient Descent with Momentum"
    else:
        optimizer = "Gradient Descent with Backtracking via Halving"

    starts = [init] if init is not None else [
        random_start(D, spec, settings.seed + k, static_cost) for k in range(settings.n_inits)
    ]
    best = None
    for k, X0 in enumerate(starts):
        if settings.verbose > 0 and len(starts) > 1:
            print(f"[{tag}] Initialization {k + 1}/{len(starts)}", file=sys.stderr)
        # overflow on the way to a nonfinite cost is reported as DivergenceError
        with np.errstate(over="ignore", invalid="ignore"):
            if spec.method == "tsne":
                X, cost, grad, static, trace, it, reason = _momentum_descent(fun, X0.copy(), settings, static_cost)
            elif spec.alpha == 0:
                X, cost, grad, static, trace, it, reason = _blockwise_descent(fun, X0.copy(), settings)
            else:
                X, cost, grad, static, trace, it, reason = _gradient_descent(fun, X0.copy(), settings)
        for line in describe_progress(trace, settings.verbose, tag, optimizer, (it, reason, cost)):
            print(line, file=sys.stderr)
        result = FitResult(
            coords=X,
            cost_total_final=float(cost),
            cost_static_avg=float(np.mean(static)),
            cost_static=np.asarray(static, dtype=float),
            converged=_rms(grad) <= settings.tol,
            iterations_used=it,
            init_index_selected=k,
            stop_reason=reason,
            trace=trace,
        )
        if best is None or result.cost_total_final < best.cost_total_final:
            best = result
    return best
