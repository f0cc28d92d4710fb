"""Truncation-corrected log-likelihood, conditional log-targets, and gradients.

The complete-data log-likelihood treats every event time as observed (the
sampler imputes censored ones) and divides each subject's density by the
probability of surviving past the delayed-entry time, so that subjects are
weighted as draws from the population still at risk when they entered:

    sum_i [ log f(t_i; eta_i, sigma) - log S(c0_i; eta_i, sigma) ]

with eta_i = mu + x_i'beta + z_i'gamma and log-normal f, S.  Subjects with
c0_i = 0 contribute no correction term.

Every conditional target here is defined up to an additive constant, which
is all the Metropolis and Hamiltonian updates need.  Evaluation happens on
the group-orthonormalized design (see :mod:`aftgl.data`); coefficients are
mapped back to the original scale only when reporting.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import log_ndtr

from aftgl.data import (
    GroupStructure,
    back_transform,
    group_orthonormalize,
    standardize_columns,
)
from aftgl.dists import mills_ratio

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters of the fixed (non-shrinkage) priors.

    mu ~ Normal(mu0, h0), sigma2 ~ InverseGamma(a_sigma, b_sigma), and each
    unpenalized coefficient gamma_j ~ Normal(0, v2).
    """

    mu0: float = 0.0
    h0: float = 1e6
    a_sigma: float = 0.7
    b_sigma: float = 0.7
    v2: float = 1e6

    def __post_init__(self):
        for name in ("h0", "a_sigma", "b_sigma", "v2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not np.isfinite(self.mu0):
            raise ValueError("mu0 must be finite")


@dataclass(frozen=True)
class ModelParameters:
    """One point in the parameter space Theta = (beta, gamma, mu, sigma2, tau2, lambda2).

    beta lives on the orthonormal basis during sampling; tau2 holds one
    positive scale per group.
    """

    beta: np.ndarray
    gamma: np.ndarray
    mu: float
    sigma2: float
    tau2: np.ndarray
    lambda2: float

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float).ravel())
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float).ravel())
        object.__setattr__(self, "tau2", np.asarray(self.tau2, dtype=float).ravel())
        if not (np.all(np.isfinite(self.beta)) and np.all(np.isfinite(self.gamma))):
            raise ValueError("coefficients must be finite")
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValueError("sigma2 must be a positive finite number")
        if not (np.all(np.isfinite(self.tau2)) and np.all(self.tau2 > 0)):
            raise ValueError("all tau2 entries must be positive and finite")
        if not (np.isfinite(self.lambda2) and self.lambda2 > 0):
            raise ValueError("lambda2 must be positive and finite")

    def replace(self, **changes) -> "ModelParameters":
        return replace(self, **changes)


@dataclass(frozen=True)
class AugmentedState:
    """Imputed event times t, one per subject, with cached logs."""

    t: np.ndarray
    log_t: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).ravel()
        if not np.all(np.isfinite(t) & (t > 0)):
            raise ValueError("augmented event times must be positive and finite")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "log_t", np.log(t))


@dataclass(frozen=True)
class FitView:
    """A dataset prepared for sampling.

    Holds the design actually used by the likelihood (orthonormalized X,
    standardized Z), censoring information in both time and log-time, and
    everything needed to undo the transformations when reporting.
    """

    X: np.ndarray
    Z: np.ndarray
    entry: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    groups: GroupStructure
    prior: PriorConfig
    basis: object = None
    z_means: np.ndarray = None
    z_sds: np.ndarray = None
    x_names: tuple = ()
    z_names: tuple = ()

    def __post_init__(self):
        if self.z_means is None:
            object.__setattr__(self, "z_means", np.zeros(self.Z.shape[1]))
        if self.z_sds is None:
            object.__setattr__(self, "z_sds", np.ones(self.Z.shape[1]))
        if not self.x_names:
            object.__setattr__(self, "x_names", tuple(f"x_{j + 1}" for j in range(self.p)))
        if not self.z_names:
            object.__setattr__(self, "z_names", tuple(f"z_{j + 1}" for j in range(self.q)))
        object.__setattr__(self, "truncated", self.entry > 0)
        object.__setattr__(self, "any_truncated", bool(self.truncated.any()))
        object.__setattr__(self, "exact", self.lower == self.upper)
        with np.errstate(divide="ignore"):
            object.__setattr__(
                self, "log_entry", np.where(self.truncated, np.log(np.maximum(self.entry, 1e-300)), 0.0)
            )

    @property
    def n(self) -> int:
        return self.entry.size

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Z.shape[1]

    @property
    def col_group(self) -> np.ndarray:
        return self.groups.membership

    def to_original_scale(self, beta_draws, gamma_draws, mu_draws):
        """Map draws from the fitting basis back to raw covariate scale.

        Accepts (S, p), (S, q), (S,) stacks (or single draws) and returns the
        same shapes.  The intercept absorbs the column centers: eta is
        identical under both parameterizations.
        """
        beta = np.atleast_2d(np.asarray(beta_draws, dtype=float))
        gamma = np.atleast_2d(np.asarray(gamma_draws, dtype=float))
        mu = np.atleast_1d(np.asarray(mu_draws, dtype=float))
        if self.basis is not None:
            beta_orig = back_transform(beta, self.basis)
            centers = self.basis.centers
        else:
            beta_orig = beta.copy()
            centers = np.zeros(self.p)
        gamma_orig = gamma / self.z_sds if self.q else gamma.copy()
        mu_orig = mu - beta_orig @ centers - (gamma_orig @ self.z_means if self.q else 0.0)
        if np.ndim(beta_draws) == 1:
            return beta_orig[0], gamma_orig[0], mu_orig[0]
        return beta_orig, gamma_orig, mu_orig

    @staticmethod
    def from_arrays(X, Z, entry, lower, upper, groups=None, prior=None,
                    x_names=(), z_names=()) -> "FitView":
        """Wrap raw arrays with no centering, scaling, or orthonormalization.

        Intended for tests and closed-form comparisons where the design must
        be used exactly as given.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Z = np.asarray(Z, dtype=float) if Z is not None else np.zeros((X.shape[0], 0))
        if Z.size == 0:
            Z = np.zeros((X.shape[0], 0))
        Z = np.atleast_2d(Z)
        return FitView(
            X=X,
            Z=Z,
            entry=np.asarray(entry, dtype=float).ravel(),
            lower=np.asarray(lower, dtype=float).ravel(),
            upper=np.asarray(upper, dtype=float).ravel(),
            groups=groups if groups is not None else GroupStructure.singletons(X.shape[1]),
            prior=prior if prior is not None else PriorConfig(),
            x_names=tuple(x_names),
            z_names=tuple(z_names),
        )


def prepare(dataset, prior=None, groups=None) -> FitView:
    """Orthonormalize X by group, standardize Z, and bundle for fitting.

    ``groups`` overrides the dataset's own structure (used to force
    singleton groups for the ungrouped variant of the prior).
    """
    groups = groups if groups is not None else dataset.groups
    basis = group_orthonormalize(dataset.X, groups)
    Z_std, z_means, z_sds = standardize_columns(dataset.Z)
    return FitView(
        X=basis.Q,
        Z=Z_std,
        entry=dataset.entry,
        lower=dataset.lower,
        upper=dataset.upper,
        groups=groups,
        prior=prior if prior is not None else PriorConfig(),
        basis=basis,
        z_means=z_means,
        z_sds=z_sds,
        x_names=dataset.x_names,
        z_names=dataset.z_names,
    )


def check_augmentation(aug: AugmentedState, fit: FitView):
    """Raise if any imputed time escapes its censoring interval."""
    bad = (aug.t < fit.lower) | (aug.t > fit.upper)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(
            f"augmented time {aug.t[i]:.6g} for subject {i} outside "
            f"[{fit.lower[i]:.6g}, {fit.upper[i]:.6g}]"
        )


def linear_predictor(theta: ModelParameters, fit: FitView) -> np.ndarray:
    eta = fit.X @ theta.beta + theta.mu
    if fit.q:
        eta += fit.Z @ theta.gamma
    return eta


def _loglik_eta(eta, sigma2, aug: AugmentedState, fit: FitView) -> float:
    """Complete-data log-likelihood for a given linear predictor."""
    sigma = np.sqrt(sigma2)
    # far-out proposals overflow the quadratic form; -inf is the right answer
    with np.errstate(over="ignore"):
        r = (aug.log_t - eta) / sigma
        ll = -fit.n * (np.log(sigma) + _LOG_SQRT_2PI) - np.sum(aug.log_t) - 0.5 * (r @ r)
        if fit.any_truncated:
            u = (eta[fit.truncated] - fit.log_entry[fit.truncated]) / sigma
            ll -= np.sum(log_ndtr(u))
    return float(ll)


def complete_data_loglik(theta: ModelParameters, aug: AugmentedState, fit: FitView) -> float:
    """Left-truncation-corrected log-likelihood of the imputed times."""
    return _loglik_eta(linear_predictor(theta, fit), theta.sigma2, aug, fit)


def _score_eta(eta, sigma2, aug: AugmentedState, fit: FitView) -> np.ndarray:
    """d loglik / d eta_i, using the stable Mills ratio for the truncation term."""
    a = (aug.log_t - eta) / sigma2
    if fit.any_truncated:
        sigma = np.sqrt(sigma2)
        u = (eta[fit.truncated] - fit.log_entry[fit.truncated]) / sigma
        a[fit.truncated] -= mills_ratio(u) / sigma
    return a


def beta_log_target_and_grad(beta, theta: ModelParameters, aug: AugmentedState, fit: FitView,
                             offset=None):
    """Log full conditional of beta (up to a constant) and its gradient.

    The prior is the conditional Gaussian beta_j ~ N(0, sigma2 * tau2_{k(j)}).
    ``offset`` may carry the precomputed mu + Z gamma part of eta.
    """
    beta = np.asarray(beta, dtype=float)
    if offset is None:
        offset = fit.Z @ theta.gamma + theta.mu if fit.q else theta.mu
    eta = fit.X @ beta + offset
    prior_var = theta.sigma2 * theta.tau2[fit.col_group]
    logp = _loglik_eta(eta, theta.sigma2, aug, fit) - 0.5 * np.sum(beta * beta / prior_var)
    a = _score_eta(eta, theta.sigma2, aug, fit)
    grad = fit.X.T @ a - beta / prior_var
    return logp, grad


def gamma_log_target_and_grad(gamma, theta: ModelParameters, aug: AugmentedState, fit: FitView,
                              offset=None):
    """Log full conditional of gamma (up to a constant) and its gradient.

    The prior contribution is -gamma_j / v2: it always pulls toward zero.
    ``offset`` may carry the precomputed mu + X beta part of eta.
    """
    gamma = np.asarray(gamma, dtype=float)
    if offset is None:
        offset = fit.X @ theta.beta + theta.mu
    eta = offset + fit.Z @ gamma
    v2 = fit.prior.v2
    logp = _loglik_eta(eta, theta.sigma2, aug, fit) - 0.5 * np.sum(gamma * gamma) / v2
    a = _score_eta(eta, theta.sigma2, aug, fit)
    grad = fit.Z.T @ a - gamma / v2
    return logp, grad


def sigma2_log_target(sigma2, theta: ModelParameters, aug: AugmentedState, fit: FitView,
                      eta=None) -> float:
    """Log full conditional of sigma2 (up to a constant).

    Includes the (p/2) log sigma2 normalization of the conditional beta
    prior, which depends on sigma2 and cannot be dropped, plus the
    InverseGamma(a_sigma, b_sigma) prior.  ``eta`` may carry the precomputed
    linear predictor (it does not depend on sigma2).
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if eta is None:
        eta = linear_predictor(theta, fit)
    ll = _loglik_eta(eta, sigma2, aug, fit)
    prior_quad = (
        -0.5 * np.sum(theta.beta ** 2 / theta.tau2[fit.col_group]) / sigma2 if fit.p else 0.0
    )
    norm = -0.5 * fit.p * np.log(sigma2)
    pr = fit.prior
    ig = -(pr.a_sigma + 1.0) * np.log(sigma2) - pr.b_sigma / sigma2
    return float(ll + prior_quad + norm + ig)


def mu_log_target(mu, theta: ModelParameters, aug: AugmentedState, fit: FitView,
                  eta_base=None) -> float:
    """Log full conditional of the intercept (up to a constant).

    ``eta_base`` may carry the precomputed X beta + Z gamma part of eta.
    """
    if eta_base is None:
        eta_base = fit.X @ theta.beta
        if fit.q:
            eta_base = eta_base + fit.Z @ theta.gamma
    ll = _loglik_eta(eta_base + mu, theta.sigma2, aug, fit)
    pr = fit.prior
    return float(ll - 0.5 * (mu - pr.mu0) ** 2 / pr.h0)
