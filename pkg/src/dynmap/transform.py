"""
Procrustes alignment of configurations and configuration sequences.
"""
from dataclasses import dataclass

import numpy as np

from .core import as_configuration, as_mask
from .errors import ConfigError, DomainError

ALIGN_MODES = ("per_map", "fixed")


@dataclass
class ProcrustesTransform:
    """``x -> scale * x @ rotation + translation`` applied row-wise."""

    rotation: np.ndarray
    scale: float
    translation: np.ndarray

    def apply(self, X):
        return self.scale * np.asarray(X, dtype=float) @ self.rotation + self.translation


def _check_pair(source, target):
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    if source.ndim != 2 or source.shape != target.shape:
        raise ConfigError(f"shapes {source.shape} and {target.shape} do not match")
    return source, target


def procrustes_fit(source, target, allow_scaling=False):
    """Similarity transform taking ``source`` as close as possible to ``target``.

    Parameters
    ----------
    source, target : ndarray of shape (n, d)
    allow_scaling : bool
        Fit a uniform scale as well; otherwise scale is 1.

    Returns
    -------
    ProcrustesTransform
        Rotation (possibly a reflection) from the SVD of the centered
        cross-covariance, minimizing the Frobenius residual.
    """
    source, target = _check_pair(source, target)
    mu_s, mu_t = source.mean(axis=0), target.mean(axis=0)
    A, B = source - mu_s, target - mu_t
    if not np.any(B):
        raise DomainError("target configuration is degenerate (all points identical)")
    U, s, Vt = np.linalg.svd(A.T @ B)
    R = U @ Vt
    scale = 1.0
    if allow_scaling:
        ss = np.sum(A ** 2)
        if ss == 0:
            raise DomainError("source configuration is degenerate (all points identical)")
        scale = float(s.sum() / ss)
    return ProcrustesTransform(rotation=R, scale=scale, translation=mu_t - scale * mu_s @ R)


def align_maps(X, reference, mode="per_map", allow_scaling=False, mask=None):
    """Procrustes-align a configuration sequence to a reference map.

    ``per_map`` aligns every period on its own. ``fixed`` fits one transform
    from the first period and applies it to all, so the relative geometry of
    the sequence is kept. With a mask, transforms are fitted on the objects
    present in the period being fitted.
    """
    if mode not in ALIGN_MODES:
        raise ConfigError(f"unknown alignment mode {mode!r}; choose from {ALIGN_MODES}")
    X = as_configuration(X)
    reference = np.asarray(reference, dtype=float)
    if reference.shape != X.shape[1:]:
        raise ConfigError(f"reference shape {reference.shape} does not match maps {X.shape[1:]}")
    mask = as_mask(mask, *X.shape[:2])

    def fit_period(t):
        rows = slice(None) if mask is None else mask[t].astype(bool)
        return procrustes_fit(X[t][rows], reference[rows], allow_scaling)

    if mode == "fixed":
        tf = fit_period(0)
        return np.stack([tf.apply(Xt) for Xt in X])
    return np.stack([fit_period(t).apply(X[t]) for t in range(X.shape[0])])


def _standardize(A):
    A = A - A.mean(axis=0)
    norm = np.linalg.norm(A)
    if norm == 0:
        raise DomainError("configuration is degenerate (all points identical)")
    return A / norm


def procrustes_distance(A, B):
    """Residual sum of squares after centering, unit-norm scaling and optimal
    rotation/reflection; in [0, 1]."""
    A, B = _check_pair(A, B)
    A, B = _standardize(A), _standardize(B)
    s = np.linalg.svd(A.T @ B, compute_uv=False)
    return float(min(max(1.0 - s.sum() ** 2, 0.0), 1.0))
