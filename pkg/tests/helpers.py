"""Shared oracles for the test suite."""
import itertools

import numpy as np


def euclidean(X):
    return np.sqrt(np.sum((X[:, None] - X[None]) ** 2, axis=-1))


def central_differences(f, X, h=1e-5):
    """Numerical gradient of a scalar function by central differences."""
    X = np.array(X, dtype=float)
    g = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        old = X[idx]
        X[idx] = old + h
        up = f(X)
        X[idx] = old - h
        down = f(X)
        X[idx] = old
        g[idx] = (up - down) / (2 * h)
    return g


def relative_error(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def monotone_lsq_bruteforce(y, w=None):
    """Exhaustive isotonic regression: best monotone block-mean fit over all
    2**(n-1) ways of cutting the chain into contiguous blocks."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    n = len(y)
    best, best_loss = None, np.inf
    for cuts in itertools.product((0, 1), repeat=n - 1):
        bounds = [0] + [k + 1 for k, c in enumerate(cuts) if c] + [n]
        fit = np.empty(n)
        for a, b in zip(bounds[:-1], bounds[1:]):
            fit[a:b] = np.sum(w[a:b] * y[a:b]) / np.sum(w[a:b])
        if np.any(np.diff(fit) < -1e-15):
            continue
        loss = np.sum(w * (y - fit) ** 2)
        if loss < best_loss - 1e-15:
            best, best_loss = fit, loss
    return best


def knn_sets(M, K):
    """Brute-force K nearest neighbors by sorting each row (self excluded)."""
    n = len(M)
    out = []
    for i in range(n):
        others = sorted((M[i, j], j) for j in range(n) if j != i)
        out.append({j for _, j in others[:K]})
    return out
