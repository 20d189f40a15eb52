"""
Turn raw relational data into dissimilarity sequences.

Edgelists become per-period similarity matrices, similarities and co-occurrence
counts become dissimilarities, feature tables become distance matrices, and
unbalanced rosters are padded onto a global roster with an inclusion mask.
"""
import numpy as np
from scipy.spatial.distance import cdist

from .core import DissimilaritySequence, as_mask
from .errors import ConfigError, DataError, DomainError

TRANSFORMATIONS = ("mirror", "max_minus", "reciprocal")
TABLE_METRICS = {"euclidean": "euclidean", "cityblock": "cityblock", "cosine_distance": "cosine"}
NORMALIZATIONS = ("max1", "zscore_offdiag")


def _records(rows):
    # accept DataFrames without depending on pandas
    if hasattr(rows, "to_dict"):
        return rows.to_dict("records")
    return list(rows)


def _sort_key(value):
    # numeric periods and ids sort numerically, everything else as text
    try:
        return (0, float(value), "")
    except (TypeError, ValueError):
        return (1, 0.0, str(value))


def edgelist_to_matrices(rows, score="score", id_i="id_i", id_j="id_j", time="period", periods=None):
    """Build one symmetric similarity matrix per period from an edgelist.

    Parameters
    ----------
    rows : iterable of mappings or DataFrame
        One row per pair and period.
    score, id_i, id_j, time : str
        Column roles.
    periods : list, optional
        Periods to keep, in order. Defaults to all periods, sorted.

    Returns
    -------
    matrices : list of ndarray
        ``(n_t, n_t)`` matrix per period over the sorted ids seen in that
        period. Unobserved pairs are 0.
    labels : list of list
        Row/column labels per period.
    periods : list
    """
    records = _records(rows)
    for role in (score, id_i, id_j, time):
        if records and role not in records[0]:
            raise ConfigError(f"column {role!r} not found; available: {sorted(records[0])}")

    by_period = {}
    for r in records:
        by_period.setdefault(r[time], []).append(r)
    if periods is None:
        periods = sorted(by_period, key=_sort_key)
    if not periods:
        raise DataError("edgelist is empty")

    matrices, labels = [], []
    for period in periods:
        entries = by_period.get(period, [])
        if not entries:
            raise DataError(f"period {period!r} has no rows")
        values = {}
        ids = set()
        for r in entries:
            a, b = r[id_i], r[id_j]
            ids.update((a, b))
            if a == b:
                continue
            s = float(r[score])
            key = (a, b) if _sort_key(a) <= _sort_key(b) else (b, a)
            if key in values and values[key] != s:
                raise DataError(
                    f"conflicting scores {values[key]} and {s} for pair {key[0]}-{key[1]} in period {period}"
                )
            values[key] = s
        roster = sorted(ids, key=_sort_key)
        index = {label: k for k, label in enumerate(roster)}
        S = np.zeros((len(roster), len(roster)))
        for (a, b), s in values.items():
            S[index[a], index[b]] = S[index[b], index[a]] = s
        matrices.append(S)
        labels.append(roster)
    return matrices, labels, list(periods)


def matrices_to_edgelist(matrices, labels, periods, score="score", id_i="id_i", id_j="id_j", time="period"):
    """Inverse of :func:`edgelist_to_matrices` for nonzero upper-triangle entries."""
    rows = []
    for S, roster, period in zip(matrices, labels, periods):
        S = np.asarray(S)
        for a in range(len(roster)):
            for b in range(a + 1, len(roster)):
                if S[a, b] != 0:
                    rows.append({time: period, id_i: roster[a], id_j: roster[b], score: float(S[a, b])})
    return rows


def _stack_or_list(S):
    """Return (list of float matrices, was_single_matrix)."""
    if isinstance(S, np.ndarray) and S.ndim == 2:
        return [np.asarray(S, dtype=float)], True
    return [np.asarray(m, dtype=float) for m in S], False


def _restore(mats, single):
    if single:
        return mats[0]
    if len({m.shape for m in mats}) == 1:
        return np.stack(mats)
    return mats


def _offdiag(M):
    return M[~np.eye(M.shape[0], dtype=bool)]


def sim_to_diss(S, transformation="mirror"):
    """Convert similarities to dissimilarities.

    ``mirror``: ``1 - s`` for similarities in [0, 1]. ``max_minus``:
    ``max(s) - s`` with the maximum taken over all off-diagonal entries of the
    sequence. ``reciprocal``: ``1 / s`` for positive similarities. The
    diagonal is always 0.
    """
    if transformation not in TRANSFORMATIONS:
        raise ConfigError(f"unknown transformation {transformation!r}; choose from {TRANSFORMATIONS}")
    mats, single = _stack_or_list(S)
    for M in mats:
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DataError(f"expected square matrices, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise DataError("similarities contain NaN or infinite values")
    offdiag = [_offdiag(M) for M in mats]

    if transformation == "mirror":
        if any(np.any((v < 0) | (v > 1)) for v in offdiag):
            raise DomainError("mirror transformation requires similarities in [0, 1]")
        out = [1.0 - M for M in mats]
    elif transformation == "max_minus":
        top = max((v.max() for v in offdiag if v.size), default=0.0)
        out = [top - M for M in mats]
    else:
        if any(np.any(v <= 0) for v in offdiag):
            raise DomainError("reciprocal transformation requires positive off-diagonal similarities")
        out = []
        for M in mats:
            with np.errstate(divide="ignore"):
                out.append(1.0 / M)
    for M in out:
        np.fill_diagonal(M, 0.0)
    return _restore(out, single)


def coocc_to_sim(C):
    """Cosine-normalize co-occurrence counts: ``s_ij = c_ij / sqrt(c_ii c_jj)``.

    The diagonal holds each object's occurrence count and must be positive.
    """
    mats, single = _stack_or_list(C)
    out = []
    for M in mats:
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DataError(f"expected square count matrices, got shape {M.shape}")
        if np.any(M < 0):
            raise DataError("co-occurrence counts must be nonnegative")
        diag = np.diag(M)
        if np.any(diag <= 0):
            raise DomainError("every object needs a positive occurrence count on the diagonal")
        S = M / np.sqrt(np.outer(diag, diag))
        np.fill_diagonal(S, 1.0)
        out.append(S)
    return _restore(out, single)


def table_to_diss(Z, metric="euclidean"):
    """Pairwise distances between the rows of each period's feature table.

    Parameters
    ----------
    Z : ndarray of shape (n, k) or list of them
    metric : {"euclidean", "cityblock", "cosine_distance"}

    Returns
    -------
    ndarray of shape (n, n) for a single table, else (T, n, n)
    """
    if metric not in TABLE_METRICS:
        raise ConfigError(f"unknown metric {metric!r}; choose from {tuple(TABLE_METRICS)}")
    single = isinstance(Z, np.ndarray) and Z.ndim == 2
    tables = [np.asarray(z, dtype=float) for z in ([Z] if single else Z)]
    if not tables:
        raise DataError("no feature tables given")
    shape = tables[0].shape
    out = []
    for t, z in enumerate(tables):
        if z.ndim != 2 or z.shape != shape:
            raise DataError(f"table {t} has shape {z.shape}, expected {shape}")
        if not np.all(np.isfinite(z)):
            raise DataError(f"table {t} contains NaN or infinite values")
        if metric == "cosine_distance" and np.any(np.linalg.norm(z, axis=1) == 0):
            raise DomainError(f"table {t} has a zero row; cosine distance is undefined")
        D = cdist(z, z, metric=TABLE_METRICS[metric])
        D = np.maximum((D + D.T) / 2, 0.0)
        np.fill_diagonal(D, 0.0)
        out.append(D)
    return out[0] if single else np.stack(out)


def expand_matrices(matrices, labels):
    """Embed per-period matrices into a common roster.

    Parameters
    ----------
    matrices : list of ndarray of shape (n_t, n_t)
    labels : list of list
        Labels of each period's rows.

    Returns
    -------
    balanced : ndarray of shape (T, n, n)
        Absent objects get placeholder rows and columns of 0.
    mask : ndarray of shape (T, n)
        1 where the object is present.
    roster : list
        Sorted union of all labels.
    """
    if len(matrices) != len(labels):
        raise DataError(f"{len(matrices)} matrices but {len(labels)} label lists")
    for t, (M, lab) in enumerate(zip(matrices, labels)):
        M = np.asarray(M)
        if M.shape != (len(lab), len(lab)):
            raise DataError(f"period {t}: matrix shape {M.shape} does not match {len(lab)} labels")
        if len(set(lab)) != len(lab):
            raise DataError(f"period {t}: duplicate labels")
    roster = sorted({label for lab in labels for label in lab}, key=_sort_key)
    index = {label: k for k, label in enumerate(roster)}
    n = len(roster)
    balanced = np.zeros((len(matrices), n, n))
    mask = np.zeros((len(matrices), n), dtype=np.int64)
    for t, (M, lab) in enumerate(zip(matrices, labels)):
        pos = np.array([index[label] for label in lab], dtype=int)
        balanced[t][np.ix_(pos, pos)] = np.asarray(M, dtype=float)
        mask[t, pos] = 1
    return balanced, mask, roster


def normalize_diss(D, mode="max1", mask=None):
    """Rescale a dissimilarity sequence.

    ``max1`` divides by the global maximum. ``zscore_offdiag`` standardizes
    the off-diagonal entries over the whole sequence, then shifts them so the
    smallest is 0. With a mask only included pairs are used and placeholders
    stay 0.
    """
    if mode not in NORMALIZATIONS:
        raise ConfigError(f"unknown normalization {mode!r}; choose from {NORMALIZATIONS}")
    seq = D if isinstance(D, DissimilaritySequence) else None
    D = DissimilaritySequence(D).matrices if seq is None else seq.matrices
    n_periods, n = D.shape[:2]
    mask = as_mask(mask, n_periods, n)
    m = np.ones((n_periods, n)) if mask is None else mask.astype(float)
    pairs = (m[:, :, None] * m[:, None, :] * (1 - np.eye(n))) > 0
    values = D[pairs]
    if values.size == 0 or np.max(values) <= 0:
        raise DomainError("cannot normalize all-zero dissimilarities")

    out = np.zeros_like(D)
    if mode == "max1":
        out[pairs] = values / values.max()
    else:
        sd = values.std()
        if sd == 0:
            raise DomainError("off-diagonal dissimilarities are constant; z-scores undefined")
        z = (values - values.mean()) / sd
        out[pairs] = z - z.min()
    if seq is not None:
        return DissimilaritySequence(out, seq.labels, seq.periods)
    return out
