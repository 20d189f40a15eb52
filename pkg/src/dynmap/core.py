"""
Shared sequence types and the joint cost: per-period static cost plus a
weighted penalty on the backward differences of every object's trajectory.
"""
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import ConfigError, DataError, InvalidHyperparameterError, TemporalDataError

SYMMETRY_TOL = 1e-9
METHODS = ("mds", "sammon", "tsne")


@dataclass
class DissimilaritySequence:
    """Ordered sequence of square dissimilarity matrices over a fixed roster.

    Parameters
    ----------
    matrices : array-like of shape (n_periods, n_samples, n_samples)
    labels : list of str, optional
        Object identifiers, defaults to ``"0" .. "n-1"``.
    periods : list, optional
        Period labels, defaults to ``0 .. T-1``.
    """

    matrices: np.ndarray
    labels: list = None
    periods: list = None

    def __post_init__(self):
        try:
            D = np.asarray(self.matrices, dtype=float)
        except ValueError:
            raise DataError("matrices must all have the same shape; use expand_matrices for changing rosters") from None
        if D.ndim == 2:
            D = D[None]
        if D.ndim != 3 or D.shape[1] != D.shape[2]:
            raise DataError(f"expected a stack of square matrices, got shape {D.shape}")
        if D.shape[0] < 1 or D.shape[1] < 2:
            raise DataError("need at least one period and two objects")
        if not np.all(np.isfinite(D)):
            raise DataError("dissimilarities contain NaN or infinite values")
        for t, Dt in enumerate(D):
            if np.max(np.abs(Dt - Dt.T)) > SYMMETRY_TOL:
                raise DataError(f"matrix {t} is not symmetric")
            if np.max(np.abs(np.diag(Dt))) > SYMMETRY_TOL:
                raise DataError(f"matrix {t} has a nonzero diagonal")
            if np.min(Dt) < 0:
                raise DataError(f"matrix {t} has negative entries")
        self.matrices = D
        n_periods, n = D.shape[:2]
        self.labels = [str(i) for i in range(n)] if self.labels is None else list(self.labels)
        self.periods = list(range(n_periods)) if self.periods is None else list(self.periods)
        if len(self.labels) != n:
            raise DataError(f"{len(self.labels)} labels for {n} objects")
        if len(self.periods) != n_periods:
            raise DataError(f"{len(self.periods)} period labels for {n_periods} matrices")

    @property
    def n_periods(self):
        return self.matrices.shape[0]

    @property
    def n_samples(self):
        return self.matrices.shape[1]

    def __len__(self):
        return self.n_periods

    def __getitem__(self, t):
        return self.matrices[t]


@dataclass
class ConfigurationSequence:
    """Sequence of map coordinates, one ``(n, d)`` array per period."""

    coords: np.ndarray
    labels: list = None
    periods: list = None

    def __post_init__(self):
        X = as_configuration(self.coords)
        if not np.all(np.isfinite(X)):
            raise DataError("coordinates contain non-finite values")
        self.coords = X
        n_periods, n = X.shape[:2]
        self.labels = [str(i) for i in range(n)] if self.labels is None else list(self.labels)
        self.periods = list(range(n_periods)) if self.periods is None else list(self.periods)
        if len(self.labels) != n or len(self.periods) != n_periods:
            raise DataError("labels/periods do not match coordinate shape")

    @property
    def d(self):
        return self.coords.shape[2]

    def __len__(self):
        return self.coords.shape[0]

    def __getitem__(self, t):
        return self.coords[t]


@dataclass
class ObjectWeights:
    """Per-object weights of the temporal penalty, ``w = exp(-b * z)``."""

    w: np.ndarray
    z: np.ndarray
    b: float


@dataclass
class FitSpec:
    """Mapping method and its hyperparameters.

    ``method_params`` holds method-specific settings: ``mds_type`` for MDS,
    ``perplexity`` and ``early_exaggeration`` for t-SNE.
    """

    method: str = "mds"
    alpha: float = 0.0
    p: int = 1
    d: int = 2
    method_params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.method = str(self.method).lower()
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.alpha >= 0:
            raise InvalidHyperparameterError(f"alpha must be nonnegative, got {self.alpha}")
        if int(self.p) != self.p or self.p < 1:
            raise InvalidHyperparameterError(f"p must be a positive integer, got {self.p}")
        self.p = int(self.p)
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"d must be a positive integer, got {self.d}")
        self.d = int(self.d)


def as_configuration(X):
    """Stack a list of ``(n, d)`` arrays into a ``(T, n, d)`` float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ConfigError(f"expected configurations of shape (T, n, d), got {X.shape}")
    return X


def as_dissimilarities(D):
    if isinstance(D, DissimilaritySequence):
        return D.matrices
    return DissimilaritySequence(D).matrices


def as_mask(mask, n_periods, n_samples):
    """Validate an inclusion mask and return it as a ``(T, n)`` int array (or None)."""
    if mask is None:
        return None
    m = np.asarray(mask)
    if m.shape != (n_periods, n_samples):
        raise ConfigError(f"mask shape {m.shape} does not match ({n_periods}, {n_samples})")
    if not np.all((m == 0) | (m == 1)):
        raise DataError("mask entries must be 0 or 1")
    m = m.astype(np.int64)
    if np.any(m.sum(axis=0) == 0):
        raise DataError("every object must be included in at least one period")
    return m


def pair_weights(mask, n_periods, n_samples):
    """``(T, n, n)`` indicator of included pairs, zero on the diagonal."""
    if mask is None:
        W = np.ones((n_periods, n_samples, n_samples))
    else:
        m = np.asarray(mask, dtype=float)
        W = m[:, :, None] * m[:, None, :]
    idx = np.arange(n_samples)
    W[:, idx, idx] = 0.0
    return W


def compute_object_weights(D, mask=None):
    """Down-weight the temporal penalty for objects whose relationships changed most.

    ``z_i`` sums the squared change of row ``i`` between consecutive periods.
    Under a mask only transitions where ``i`` is present in both periods count,
    and only over columns present in both.
    """
    D = as_dissimilarities(D)
    n_periods, n = D.shape[:2]
    if n_periods < 2:
        raise TemporalDataError("object weights need at least two periods")
    mask = as_mask(mask, n_periods, n)

    diff2 = (D[1:] - D[:-1]) ** 2
    if mask is None:
        z = diff2.sum(axis=(0, 2))
    else:
        both = (mask[1:] * mask[:-1]).astype(float)
        # row i counts only if present in both periods; columns likewise
        z = np.einsum("tij,ti,tj->i", diff2, both, both)

    z_max = z.max()
    if z_max > 0:
        b = 1.0 / z_max
        w = np.exp(-b * z)
    else:
        b = 0.0
        w = np.ones(n)
    return ObjectWeights(w=w, z=z, b=b)


def _check_order(p, n_periods):
    if int(p) != p or p < 1:
        raise InvalidHyperparameterError(f"p must be a positive integer, got {p}")
    if p >= n_periods:
        raise InvalidHyperparameterError(f"p={p} requires more than {p} periods, got {n_periods}")


def _window_valid(mask, k, n_periods, n):
    """valid[s, i] is 1 when object i is included in periods s .. s+k."""
    if mask is None:
        return np.ones((n_periods - k, n))
    m = np.asarray(mask, dtype=float)
    valid = m[: n_periods - k].copy()
    for j in range(1, k + 1):
        valid *= m[j: n_periods - k + j]
    return valid


def _weight_vector(weights, n):
    if weights is None:
        return np.ones(n)
    w = weights.w if isinstance(weights, ObjectWeights) else np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ConfigError(f"expected {n} object weights, got shape {w.shape}")
    return w


def temporal_cost(X, p, weights=None, mask=None):
    """Weighted sum of squared backward differences of orders 1..p.

    Parameters
    ----------
    X : array-like of shape (T, n, d)
    p : int
        Highest difference order, ``1 <= p < T``.
    weights : ObjectWeights or array of shape (n,), optional
        Defaults to unit weights.
    mask : array of shape (T, n), optional
        A difference term is dropped unless the object is included in every
        period it spans.
    """
    return temporal_value_and_grad(X, p, weights, mask, compute_grad=False)[0]


def temporal_gradient(X, p, weights=None, mask=None):
    return temporal_value_and_grad(X, p, weights, mask)[1]


def temporal_value_and_grad(X, p, weights=None, mask=None, compute_grad=True):
    X = as_configuration(X)
    n_periods, n = X.shape[:2]
    _check_order(p, n_periods)
    w = _weight_vector(weights, n)
    cost = 0.0
    grad = np.zeros_like(X) if compute_grad else None
    for k in range(1, p + 1):
        diff = np.diff(X, n=k, axis=0)  # diff[s] is the k-th difference at period s + k
        valid = _window_valid(mask, k, n_periods, n) * w
        cost += float(np.sum(valid * np.sum(diff ** 2, axis=2)))
        if compute_grad:
            weighted = 2.0 * valid[:, :, None] * diff
            for j in range(k + 1):
                # x_{t-j} enters the k-th difference with coefficient (-1)^j C(k, j)
                coef = (-1) ** j * comb(k, j)
                grad[k - j: n_periods - j] += coef * weighted
    return cost, grad


def _split_alpha(spec):
    if isinstance(spec, FitSpec):
        return spec.alpha, spec.p
    alpha, p = spec
    return alpha, p


def total_value_and_grad(X, spec, static_cost, weights=None, mask=None, compute_grad=True):
    """Joint cost and gradient.

    Parameters
    ----------
    X : array of shape (T, n, d)
    spec : FitSpec or (alpha, p) tuple
    static_cost : callable
        ``static_cost(X, compute_grad)`` returning per-period costs of shape
        ``(T,)`` and the stacked static gradient (or None). Masking of the
        static part is the handle's responsibility.

    Returns
    -------
    cost : float
    grad : ndarray of shape (T, n, d) or None
    static : ndarray of shape (T,)
        Per-period static costs.
    """
    X = as_configuration(X)
    alpha, p = _split_alpha(spec)
    static, grad = static_cost(X, compute_grad)
    cost = float(np.sum(static))
    if alpha > 0:
        t_cost, t_grad = temporal_value_and_grad(X, p, weights, mask, compute_grad)
        cost += alpha * t_cost
        if compute_grad:
            grad = grad + alpha * t_grad
    if compute_grad and mask is not None:
        grad = grad * np.asarray(mask, dtype=float)[:, :, None]
    return cost, grad, static


def total_cost(X, spec, static_cost, weights=None, mask=None):
    """Sum of per-period static costs plus ``alpha`` times the temporal penalty."""
    return total_value_and_grad(X, spec, static_cost, weights, mask, compute_grad=False)[0]


def total_gradient(X, spec, static_cost, weights=None, mask=None):
    return total_value_and_grad(X, spec, static_cost, weights, mask)[1]
