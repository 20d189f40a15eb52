"""
Static mapping methods: classical scaling, stress-based MDS (ratio, interval,
ordinal), Sammon mapping and t-SNE.

Cost functions operate on a single configuration ``(n, d)`` or on a stack of
configurations ``(T, n, d)`` with matching dissimilarities ``(T, n, n)``. An
optional pair-weight array ``W`` (1 for included pairs, 0 otherwise) restricts
every sum to the included objects of each period.
"""
import warnings

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import ConfigError, DegenerateConfigurationError, DomainError

EPSILON = 1e-12
MDS_TYPES = ("ratio", "interval", "ordinal")


class CMDSWarning(UserWarning):
    """Fewer positive eigenvalues than requested dimensions."""


class PerplexityWarning(UserWarning):
    """Bandwidth search did not reach the target entropy."""


def cmds(D, d=2):
    """Classical (Torgerson) scaling.

    Parameters
    ----------
    D : ndarray of shape (n, n)
        Symmetric dissimilarity matrix.
    d : int
        Number of output dimensions, at most ``n - 1``.

    Returns
    -------
    ndarray of shape (n, d)
        Coordinates from the top ``d`` eigenpairs of the double-centered
        squared dissimilarities. Negative eigenvalues are clamped to zero, and
        each axis is signed so that its largest-magnitude loading is positive.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if d > n - 1:
        raise ConfigError(f"cannot embed {n} objects in {d} dimensions")
    J = np.eye(n) - np.ones((n, n)) / n
    B = -0.5 * J @ (D ** 2) @ J
    B = (B + B.T) / 2
    evals, evecs = np.linalg.eigh(B)
    order = np.argsort(evals, kind="stable")[::-1][:d]
    evals, evecs = evals[order], evecs[:, order]
    scale = np.max(np.abs(B)) if B.size else 0.0
    positive = evals > 1e-12 * max(scale, 1.0)
    if not np.all(positive):
        warnings.warn(
            f"only {int(positive.sum())} positive eigenvalues for {d} dimensions; padding with zeros",
            CMDSWarning,
            stacklevel=2,
        )
    lam = np.where(positive, evals, 0.0)
    pivot = np.argmax(np.abs(evecs), axis=0)
    signs = np.sign(evecs[pivot, np.arange(evecs.shape[1])])
    signs[signs == 0] = 1.0
    return evecs * signs * np.sqrt(lam)


def pava(y, weights=None):
    """Weighted least-squares projection of ``y`` onto nondecreasing sequences.

    Pool-adjacent-violators, via ``scipy.optimize.isotonic_regression``.
    """
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != y.shape or y.ndim != 1:
        raise ConfigError("y and weights must be vectors of equal length")
    if np.any(w <= 0):
        raise ConfigError("weights must be positive")
    if y.size == 0:
        return y.copy()
    return isotonic_regression(y, weights=w).x


def _batch(X, D, W=None):
    """Promote single-period inputs to stacks. ``W=None`` means every
    off-diagonal pair is included."""
    X = np.asarray(X, dtype=float)
    D = np.asarray(D, dtype=float)
    single = X.ndim == 2
    if single:
        X, D = X[None], D[None]
        W = None if W is None else np.asarray(W, dtype=float)[None]
    if D.shape != X.shape[:2] + (X.shape[1],):
        raise ConfigError(f"configuration shape {X.shape} does not match dissimilarities {D.shape}")
    if W is not None:
        W = np.asarray(W, dtype=float)
    return X, D, W, single


def _full_weights(W, shape):
    if W is not None:
        return W
    return np.broadcast_to(1.0 - np.eye(shape[-1]), shape)


def _unbatch(single, value, grad):
    if single:
        return float(value[0]), (None if grad is None else grad[0])
    return value, grad


def _distances(X):
    d2 = np.zeros(X.shape[:2] + (X.shape[1],))
    for k in range(X.shape[2]):
        c = X[:, :, k]
        diff = c[:, :, None] - c[:, None, :]
        d2 += diff * diff
    return np.sqrt(d2)


def _pair_sum(A, W=None):
    """Sum over pairs i < j of a symmetric ``(T, n, n)`` array with zero diagonal
    (or masked by ``W``)."""
    if W is None:
        return 0.5 * np.sum(A, axis=(1, 2))
    return 0.5 * np.sum(W * A, axis=(1, 2))


def _contract(C, X):
    """``sum_j C_ij (x_i - x_j)`` for a stack of coefficient matrices."""
    return C.sum(axis=2)[:, :, None] * X - C @ X


def _npairs(W, shape):
    if W is None:
        n = shape[-1]
        return np.full(shape[0], n * (n - 1) / 2.0)
    return _pair_sum(W)


def fit_disparities(dist, D, mds_type="ratio", W=None, scale="pairs"):
    """Transformed dissimilarities for the current map distances.

    ratio uses the dissimilarities themselves, interval a least-squares linear
    fit to the distances (clamped at zero) and ordinal the monotone regression
    of the distances on the dissimilarity order (ties ordered by distance).
    With ``scale="pairs"`` the result is rescaled so the squared disparities
    sum to the number of included pairs, which pins the overall scale of the
    map during optimization. ``scale="fit"`` instead picks the least-squares
    multiple for the current distances, so the stress no longer depends on
    the size of the map.
    """
    if scale not in ("pairs", "fit"):
        raise ConfigError(f"unknown disparity scale {scale!r}")
    if mds_type not in MDS_TYPES:
        raise ConfigError(f"unknown mds_type {mds_type!r}; choose from {MDS_TYPES}")
    dist, D = np.asarray(dist, dtype=float), np.asarray(D, dtype=float)
    single = dist.ndim == 2
    if single:
        dist, D = dist[None], D[None]
        W = None if W is None else np.asarray(W)[None]
    W = None if W is None else np.asarray(W, dtype=float)
    n = dist.shape[1]
    npairs = np.maximum(_npairs(W, D.shape), 1.0)

    if mds_type == "ratio":
        dhat = D if W is None else D * W
    elif mds_type == "interval":
        mean_D = _pair_sum(D, W) / npairs
        mean_d = _pair_sum(dist, W) / npairs
        Dc = D - mean_D[:, None, None]
        Wf = _full_weights(W, D.shape)
        cov = _pair_sum(Dc * (dist - mean_d[:, None, None]), Wf)
        var = _pair_sum(Dc ** 2, Wf)
        slope = np.where(var > 0, cov / np.where(var > 0, var, 1.0), 0.0)
        intercept = mean_d - slope * mean_D
        dhat = np.maximum(intercept[:, None, None] + slope[:, None, None] * D, 0.0) * Wf
    else:
        dhat = np.zeros_like(D)
        iu, ju = np.triu_indices(n, k=1)
        for t in range(D.shape[0]):
            if W is None:
                i, j = iu, ju
            else:
                keep = W[t, iu, ju] > 0
                i, j = iu[keep], ju[keep]
            delta, dd = D[t, i, j], dist[t, i, j]
            order = np.lexsort((dd, delta))
            fitted = np.empty_like(dd)
            fitted[order] = pava(dd[order])
            dhat[t, i, j] = fitted
            dhat[t, j, i] = fitted

    ss = _pair_sum(dhat ** 2, W)
    safe = np.where(ss > 0, ss, 1.0)
    if scale == "pairs":
        factor = np.where(ss > 0, np.sqrt(npairs / safe), 1.0)
    else:
        factor = np.where(ss > 0, np.maximum(_pair_sum(dhat * dist, W), 0.0) / safe, 1.0)
    dhat = dhat * factor[:, None, None]
    return dhat[0] if single else dhat


def stress_value_and_grad(X, dhat, W=None, compute_grad=True):
    """Normalized stress and its gradient with the disparities held fixed.

    ``stress = sqrt(sum_{i<j} (d_ij - dhat_ij)^2 / sum_{i<j} d_ij^2)``.
    """
    X, dhat, W, single = _batch(X, dhat, W)
    dist = _distances(X)
    resid = dist - dhat
    A = _pair_sum(resid ** 2, W)
    B = _pair_sum(dist ** 2, W)
    if np.any(B <= 0):
        raise DegenerateConfigurationError("all map distances are zero")
    stress = np.sqrt(A / B)
    grad = None
    if compute_grad:
        C = resid / np.maximum(dist, EPSILON)
        if W is not None:
            C *= W
        grad_A = 2.0 * _contract(C, X)
        grad_B = 2.0 * _contract(_full_weights(W, dist.shape), X)
        with np.errstate(divide="ignore", invalid="ignore"):
            coef_A = np.where(A > 0, 1.0 / (2.0 * stress * B), 0.0)
            coef_B = np.where(A > 0, A / (2.0 * stress * B ** 2), 0.0)
        grad = coef_A[:, None, None] * grad_A - coef_B[:, None, None] * grad_B
    return _unbatch(single, stress, grad)


def mds_stress(X, D, mds_type="ratio", W=None):
    """Normalized stress after refitting disparities.

    Returns
    -------
    stress : float or ndarray of shape (T,)
    dhat : ndarray
        Disparities used for the evaluation.
    """
    Xb, Db, Wb, single = _batch(X, D, W)
    dhat = fit_disparities(_distances(Xb), Db, mds_type, Wb, scale="fit")
    stress, _ = stress_value_and_grad(Xb, dhat, Wb, compute_grad=False)
    if single:
        return float(stress[0]), dhat[0]
    return stress, dhat


def mds_gradient(X, D, mds_type="ratio", W=None):
    """Gradient of normalized stress at the disparities refitted for ``X``."""
    Xb, Db, Wb, single = _batch(X, D, W)
    dhat = fit_disparities(_distances(Xb), Db, mds_type, Wb, scale="fit")
    _, grad = stress_value_and_grad(Xb, dhat, Wb)
    return grad[0] if single else grad


def _check_sammon(D, W):
    if W is None:
        off = ~np.eye(D.shape[-1], dtype=bool)
        bad = np.any(D[..., off] <= 0)
    else:
        bad = np.any((W > 0) & (D <= 0))
    if bad:
        raise DomainError("Sammon mapping requires positive off-diagonal dissimilarities")


def sammon_value_and_grad(X, D, W=None, compute_grad=True):
    X, D, W, single = _batch(X, D, W)
    _check_sammon(D, W)
    if W is None:
        Dsafe = D + np.eye(D.shape[-1])
    else:
        Dsafe = np.where(W > 0, D, 1.0)
    dist = _distances(X)
    c = _pair_sum(D, W)
    cost = _pair_sum((dist - D) ** 2 / Dsafe, W) / c
    grad = None
    if compute_grad:
        C = (dist - D) / (Dsafe * np.maximum(dist, EPSILON))
        if W is not None:
            C *= W
        grad = (2.0 / c)[:, None, None] * _contract(C, X)
    return _unbatch(single, cost, grad)


def sammon_cost(X, D, W=None):
    """Sammon stress ``(1 / sum delta) * sum_{i<j} (d_ij - delta_ij)^2 / delta_ij``."""
    return sammon_value_and_grad(X, D, W, compute_grad=False)[0]


def sammon_gradient(X, D, W=None):
    return sammon_value_and_grad(X, D, W)[1]


def _conditional_p(D2, perplexity, tol=1e-5, n_steps=50):
    """Row-wise bisection on the Gaussian precision, all rows at once.

    ``D2`` holds squared dissimilarities with ``inf`` on the diagonal.
    """
    n = D2.shape[0]
    target = np.log(perplexity)
    D2s = D2 - np.min(D2, axis=1, keepdims=True)
    beta = np.ones(n)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    done = np.zeros(n, dtype=bool)
    for _ in range(n_steps):
        E = np.exp(-beta[:, None] * D2s)
        sumE = E.sum(axis=1)
        H = np.log(sumE) + beta * np.sum(np.where(np.isfinite(D2s), D2s, 0.0) * E, axis=1) / sumE
        err = H - target
        done = done | (np.abs(err) <= tol)
        active = ~done
        if not active.any():
            break
        up = active & (err > 0)
        down = active & (err <= 0)
        lo = np.where(up, beta, lo)
        hi = np.where(down, beta, hi)
        beta = np.where(up, np.where(np.isinf(hi), beta * 2.0, (beta + hi) / 2.0), beta)
        beta = np.where(down, (beta + lo) / 2.0, beta)
    else:
        E = np.exp(-beta[:, None] * D2s)
        sumE = E.sum(axis=1)
        H = np.log(sumE) + beta * np.sum(np.where(np.isfinite(D2s), D2s, 0.0) * E, axis=1) / sumE
        done = np.abs(H - target) <= tol
    if not done.all():
        warnings.warn(
            f"bandwidth search did not converge for {int((~done).sum())} rows; using last bracket value",
            PerplexityWarning,
            stacklevel=3,
        )
    return E / sumE[:, None]


def tsne_conditional_p(D, perplexity):
    """Row-normalized Gaussian affinities ``P_{j|i}`` matching the perplexity."""
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if not 0 < perplexity < n:
        raise ConfigError(f"perplexity must lie in (0, {n}), got {perplexity}")
    D2 = D ** 2
    np.fill_diagonal(D2, np.inf)
    return _conditional_p(D2, perplexity)


def tsne_p_matrix(D, perplexity=30.0):
    """Symmetrized joint probabilities ``(P_{j|i} + P_{i|j}) / 2n``, floored at 1e-12."""
    Pc = tsne_conditional_p(D, perplexity)
    n = Pc.shape[0]
    P = (Pc + Pc.T) / (2.0 * n)
    P = np.maximum(P, EPSILON)
    np.fill_diagonal(P, 0.0)
    return P / P.sum()


def tsne_value_and_grad(X, P, W=None, compute_grad=True, exaggeration=1.0):
    X, P, W, single = _batch(X, P, W)
    W = _full_weights(W, P.shape)
    num = W / (1.0 + _distances(X) ** 2)
    Q = num / np.sum(num, axis=(1, 2), keepdims=True)
    pos = (W > 0) & (P > 0)
    ratio = np.where(pos, P, 1.0) / np.where(pos, Q, 1.0)
    cost = np.sum(np.where(pos, P * np.log(ratio), 0.0), axis=(1, 2))
    grad = None
    if compute_grad:
        grad = 4.0 * _contract((exaggeration * P - Q) * num, X)
    return _unbatch(single, cost, grad)


def tsne_cost(X, P, W=None):
    """KL divergence between ``P`` and the Student-t map affinities."""
    return tsne_value_and_grad(X, P, W, compute_grad=False)[0]


def tsne_gradient(X, P, W=None):
    return tsne_value_and_grad(X, P, W)[1]


class MDSCost:
    """Per-period normalized stress over a sequence, disparities refreshed on every call."""

    name = "MDS"

    def __init__(self, D, mds_type="ratio", W=None):
        if mds_type not in MDS_TYPES:
            raise ConfigError(f"unknown mds_type {mds_type!r}; choose from {MDS_TYPES}")
        self.D = np.asarray(D, dtype=float)
        self.W = None if W is None else np.asarray(W, dtype=float)
        self.mds_type = mds_type
        # ratio disparities do not depend on the configuration
        self._fixed = fit_disparities(self.D, self.D, "ratio", self.W) if mds_type == "ratio" else None

    def disparities(self, X):
        if self._fixed is not None:
            return self._fixed
        return fit_disparities(_distances(X), self.D, self.mds_type, self.W)

    def __call__(self, X, compute_grad=True):
        return stress_value_and_grad(X, self.disparities(X), self.W, compute_grad)


class SammonCost:
    name = "Sammon"

    def __init__(self, D, W=None):
        self.D = np.asarray(D, dtype=float)
        self.W = None if W is None else np.asarray(W, dtype=float)
        _check_sammon(self.D, self.W)

    def __call__(self, X, compute_grad=True):
        return sammon_value_and_grad(X, self.D, self.W, compute_grad)


class TSNECost:
    """Per-period KL divergence; joint probabilities are computed once per period
    over the included objects only."""

    name = "TSNE"

    def __init__(self, D, perplexity=30.0, W=None):
        D = np.asarray(D, dtype=float)
        self.W = _full_weights(None if W is None else np.asarray(W, dtype=float), D.shape)
        self.P = np.zeros_like(D)
        for t in range(D.shape[0]):
            inc = np.flatnonzero(self.W[t].sum(axis=1) > 0)
            self.P[t][np.ix_(inc, inc)] = tsne_p_matrix(D[t][np.ix_(inc, inc)], perplexity)
        self.exaggeration = 1.0

    def __call__(self, X, compute_grad=True):
        return tsne_value_and_grad(X, self.P, self.W, compute_grad, self.exaggeration)


def make_static_cost(spec, D, W=None):
    """Build the static cost handle for ``spec.method`` bound to ``D``."""
    params = dict(spec.method_params)
    if spec.method == "mds":
        return MDSCost(D, params.get("mds_type", "ratio"), W)
    if spec.method == "sammon":
        return SammonCost(D, W)
    return TSNECost(D, params.get("perplexity", 30.0), W)
