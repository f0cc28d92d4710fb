"""Shared fixtures-by-hand for the test modules: random model states and FD gradients."""

import numpy as np

from aftgl.data import GroupStructure
from aftgl.likelihood import AugmentedState, FitView, ModelParameters


def random_state(rng, n=30, p=8, q=2, truncated_frac=0.5, groups=None):
    """A random valid (fit, theta, aug) triple with mixed censoring and truncation."""
    X = rng.standard_normal((n, p))
    Z = rng.standard_normal((n, q)) if q else None
    t = np.exp(rng.normal(1.0, 0.8, n))
    lower = t.copy()
    upper = t.copy()
    censored = rng.uniform(size=n) < 0.5
    lower[censored] = t[censored] * rng.uniform(0.5, 1.0, censored.sum())
    upper[censored] = t[censored] / rng.uniform(0.3, 1.0, censored.sum())
    entry = np.where(rng.uniform(size=n) < truncated_frac, lower * rng.uniform(0.1, 0.9, n), 0.0)
    if groups is None:
        labels = np.sort(rng.integers(0, max(p // 2, 1), p))
        groups = GroupStructure.from_labels(labels.tolist())
    fit = FitView.from_arrays(X, Z, entry, lower, upper, groups=groups)
    theta = ModelParameters(
        beta=rng.normal(0, 0.5, p),
        gamma=rng.normal(0, 0.5, q),
        mu=rng.normal(1.0, 0.5),
        sigma2=rng.uniform(0.4, 2.0),
        tau2=rng.uniform(0.2, 3.0, groups.K),
        lambda2=rng.uniform(0.5, 2.0),
    )
    return fit, theta, AugmentedState(t)


def fd_grad(f, x, scale=1e-6):
    """Central finite differences with per-coordinate step scale*(1+|x_j|)."""
    g = np.empty_like(x)
    for j in range(x.size):
        h = scale * (1.0 + abs(x[j]))
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def rel_err(a, b):
    """Max componentwise error relative to scale max(1, |a|, |b|)."""
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))))


def ess_based_se(draws):
    """Monte Carlo standard error of the mean, discounted by autocorrelation."""
    from aftgl.diagnostics import effective_sample_size

    draws = np.asarray(draws, dtype=float)
    ess = max(effective_sample_size(draws), 2.0)
    return float(np.std(draws, ddof=1) / np.sqrt(ess)), ess
