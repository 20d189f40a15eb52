"""
Quality metrics for configuration sequences: static neighbor recovery
(hit-rates) and temporal behavior (misalignment, alignment, persistence).
"""
from dataclasses import dataclass, field

import numpy as np

from .core import as_configuration, as_mask
from .errors import ConfigError, DataError, TemporalDataError

AGGREGATES = ("mean", "total")
PERSISTENCE_MODES = ("pooled", "per_object")


def _sequence(X, mask, min_periods):
    X = as_configuration(X)
    if X.shape[0] < min_periods:
        raise TemporalDataError(f"need at least {min_periods} periods, got {X.shape[0]}")
    mask = as_mask(mask, *X.shape[:2])
    present = np.ones(X.shape[:2], dtype=bool) if mask is None else mask.astype(bool)
    return X, present


def misalign_score(X, mask=None, aggregate="mean"):
    """Length of the movement paths: mean (or total) step length
    ``||x_{i,t} - x_{i,t-1}||`` over object transitions present in both periods."""
    if aggregate not in AGGREGATES:
        raise ConfigError(f"unknown aggregate {aggregate!r}; choose from {AGGREGATES}")
    X, present = _sequence(X, mask, 2)
    steps = np.linalg.norm(np.diff(X, axis=0), axis=2)
    keep = present[1:] & present[:-1]
    if not keep.any():
        raise DataError("no object is present in two consecutive periods")
    total = float(np.sum(steps[keep]))
    return total / keep.sum() if aggregate == "mean" else total


def align_score(X, mask=None):
    """Mean cosine similarity between an object's consecutive position vectors.
    Terms involving a zero vector are skipped."""
    X, present = _sequence(X, mask, 2)
    a, b = X[:-1], X[1:]
    na, nb = np.linalg.norm(a, axis=2), np.linalg.norm(b, axis=2)
    keep = present[1:] & present[:-1] & (na > 0) & (nb > 0)
    if not keep.any():
        raise DataError("no valid pair of consecutive positions")
    cos = np.sum(a * b, axis=2)[keep] / (na[keep] * nb[keep])
    return float(np.clip(np.mean(cos), -1.0, 1.0))


def _pearson(u, v):
    u, v = u - u.mean(), v - v.mean()
    den = np.sqrt(np.sum(u ** 2)) * np.sqrt(np.sum(v ** 2))
    if den == 0:
        return None
    return float(np.clip(np.sum(u * v) / den, -1.0, 1.0))


def persistence_score(X, mask=None, mode="pooled"):
    """Correlation between consecutive movement vectors.

    ``pooled`` flattens the components of all pairs ``(dx_{i,t}, dx_{i,t+1})``
    into two samples and returns one Pearson correlation. ``per_object``
    averages per-object correlations over objects with nonzero variance.
    """
    if mode not in PERSISTENCE_MODES:
        raise ConfigError(f"unknown persistence mode {mode!r}; choose from {PERSISTENCE_MODES}")
    X, present = _sequence(X, mask, 3)
    dX = np.diff(X, axis=0)
    keep = present[2:] & present[1:-1] & present[:-2]  # keep[s, i]: periods s, s+1, s+2
    if not keep.any():
        raise DataError("no object is present in three consecutive periods")
    if mode == "pooled":
        r = _pearson(dX[:-1][keep].ravel(), dX[1:][keep].ravel())
        if r is None:
            raise DataError("movement vectors have zero variance")
        return r
    scores = []
    for i in range(X.shape[1]):
        k = keep[:, i]
        if k.any():
            r = _pearson(dX[:-1, i][k].ravel(), dX[1:, i][k].ravel())
            if r is not None:
                scores.append(r)
    if not scores:
        raise DataError("movement vectors have zero variance for every object")
    return float(np.mean(scores))


def default_k(n):
    """Five neighbors, fewer on small rosters so that K stays below n - 1 and
    the chance-adjusted hit-rate is defined."""
    return max(1, min(5, n - 2))


def _neighbors(M, K):
    """Indices of the K nearest neighbors per row; ties go to the lower index."""
    M = np.array(M, dtype=float)
    np.fill_diagonal(M, np.inf)
    return np.argsort(M, axis=1, kind="stable")[:, :K]


def hitrate_score(X_t, D_t, K=None, included=None):
    """Share of each object's K nearest neighbors in the data that are also
    among its K nearest neighbors on the map, averaged over objects."""
    X_t = np.asarray(X_t, dtype=float)
    D_t = np.asarray(D_t, dtype=float)
    if included is not None:
        keep = np.asarray(included).astype(bool)
        X_t, D_t = X_t[keep], D_t[np.ix_(keep, keep)]
    n = X_t.shape[0]
    if D_t.shape != (n, n):
        raise ConfigError(f"dissimilarities {D_t.shape} do not match {n} objects")
    K = default_k(n) if K is None else int(K)
    if not 1 <= K <= n - 1:
        raise ConfigError(f"K must lie in [1, {n - 1}], got {K}")
    dist = np.linalg.norm(X_t[:, None, :] - X_t[None, :, :], axis=2)
    nn_data, nn_map = _neighbors(D_t, K), _neighbors(dist, K)
    hits = [len(set(a) & set(b)) for a, b in zip(nn_data.tolist(), nn_map.tolist())]
    return float(np.mean(hits)) / K


def _chance(n, K):
    c = K / (n - 1)
    if c >= 1:
        raise ConfigError(f"K={K} covers all {n - 1} neighbors; chance-adjusted hit-rate is undefined")
    return c


def adjusted_hitrate_score(X_t, D_t, K=None, included=None):
    """Hit-rate corrected for chance agreement, ``(HR - c) / (1 - c)`` with
    ``c = K / (n - 1)``, clamped to [0, 1]."""
    n = int(np.sum(included)) if included is not None else np.asarray(X_t).shape[0]
    K = default_k(n) if K is None else int(K)
    c = _chance(n, K)
    hr = hitrate_score(X_t, D_t, K, included)
    return float(np.clip((hr - c) / (1 - c), 0.0, 1.0))


def _per_period(fun, X, D, K, mask):
    X = as_configuration(X)
    D = np.asarray(D, dtype=float)
    if D.shape != X.shape[:2] + (X.shape[1],):
        raise ConfigError(f"dissimilarities {D.shape} do not match configurations {X.shape}")
    mask = as_mask(mask, *X.shape[:2])
    return [fun(X[t], D[t], K, None if mask is None else mask[t]) for t in range(X.shape[0])]


def hitrates(X, D, K=None, mask=None):
    """Per-period hit-rates."""
    return _per_period(hitrate_score, X, D, K, mask)


def avg_hitrate_score(X, D, K=None, mask=None):
    return float(np.mean(hitrates(X, D, K, mask)))


def avg_adjusted_hitrate_score(X, D, K=None, mask=None):
    return float(np.mean(_per_period(adjusted_hitrate_score, X, D, K, mask)))


@dataclass
class EvalReport:
    """Named metric values for one configuration sequence."""

    values: dict = field(default_factory=dict)
    hitrate: list = field(default_factory=list)

    def __getitem__(self, key):
        return self.values[key]

    def rows(self, expand_hitrates=False):
        out = list(self.values.items())
        if expand_hitrates:
            out += [(f"hitrate_{t}", v) for t, v in enumerate(self.hitrate)]
        return out


def evaluate(X, D, mask=None, K=None, cost_static_avg=None,
             metrics=("misalign", "alignment", "persistence", "avg_hitrate", "avg_adjusted_hitrate")):
    """Compute the requested metrics; returns an :class:`EvalReport`."""
    funcs = {
        "misalign": lambda: misalign_score(X, mask),
        "alignment": lambda: align_score(X, mask),
        "persistence": lambda: persistence_score(X, mask),
        "avg_hitrate": lambda: avg_hitrate_score(X, D, K, mask),
        "avg_adjusted_hitrate": lambda: avg_adjusted_hitrate_score(X, D, K, mask),
    }
    unknown = set(metrics) - set(funcs)
    if unknown:
        raise ConfigError(f"unknown metrics {sorted(unknown)}; choose from {sorted(funcs)}")
    report = EvalReport({name: funcs[name]() for name in metrics})
    if "avg_hitrate" in metrics:
        report.hitrate = hitrates(X, D, K, mask)
    if cost_static_avg is not None:
        report.values["cost_static_avg"] = float(cost_static_avg)
    return report
