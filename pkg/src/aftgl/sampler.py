"""Gibbs scheme for the grouped-shrinkage AFT model.

Each sweep executes, in order: (1) data augmentation of censored event
times from their truncated log-normal conditionals, (2) an HMC update of
beta, (3) an HMC update of gamma, (4) random-walk Metropolis on log sigma2,
(5) random-walk Metropolis on mu, (6) exact Gibbs draws of the group scales
1/tau2_k from inverse-Gaussian conditionals, and (7) a Monte Carlo EM
update of the regularization constant lambda2 every ``mcem_interval``
iterations.

Step sizes and proposal scales are adapted by Robbins-Monro recursion
during burn-in only (targets: 65% acceptance for HMC, 40% for the scalar
Metropolis blocks) and frozen before any draw is retained, so retained
draws come from a fixed transition kernel.
"""

from dataclasses import dataclass, field

import numpy as np

from aftgl.data import GroupStructure, SurvivalDataset
from aftgl.dists import LogNormalParams, RngStream, sample_inverse_gaussian, sample_truncated_lognormal
from aftgl.likelihood import (
    AugmentedState,
    FitView,
    ModelParameters,
    PriorConfig,
    beta_log_target_and_grad,
    check_augmentation,
    gamma_log_target_and_grad,
    linear_predictor,
    mu_log_target,
    prepare,
    sigma2_log_target,
)

HMC_TARGET_ACCEPT = 0.65
MH_TARGET_ACCEPT = 0.40
# mean parameter cap for the inverse-Gaussian draw when a group's beta
# vanishes; beyond this the draw is shape-dominated and the cap is inert
IG_MEAN_CAP = 1e8

PRIOR_KINDS = ("group-lasso", "ordinary-lasso")


class SamplerError(RuntimeError):
    """A chain hit a non-finite state or an impossible configuration."""


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, tuning, and MCEM schedule.

    ``mcem_window = None`` averages all tau2 draws since the previous
    lambda2 update.  The ``update_*`` switches freeze individual blocks at
    their initial values (used by conjugate-subproblem tests).
    ``init_overrides`` maps parameter names (beta, gamma, mu, sigma2, tau2,
    lambda2, t) to starting values.
    """

    n_iter: int = 5000
    burn_frac: float = 0.5
    n_chains: int = 2
    seed: int = 0
    hmc_eps_beta: float = 0.05
    hmc_eps_gamma: float = 0.05
    hmc_steps: int = 20
    mh_sd_logsigma2: float = 0.5
    mh_sd_mu: float = 0.2
    mcem_interval: int = 100
    mcem_window: int = None
    lambda2_init: float = 1.0
    thin: int = 1
    adapt: bool = True
    update_beta: bool = True
    update_gamma: bool = True
    update_sigma2: bool = True
    update_mu: bool = True
    update_tau2: bool = True
    update_lambda2: bool = True
    debug_checks: bool = False
    init_overrides: dict = field(default=None)

    def __post_init__(self):
        if self.n_iter < 2:
            raise ValueError("n_iter must be at least 2")
        if not 0.0 < self.burn_frac < 1.0:
            raise ValueError("burn_frac must lie strictly between 0 and 1")
        if self.n_chains < 1:
            raise ValueError("n_chains must be at least 1")
        for name in ("hmc_eps_beta", "hmc_eps_gamma", "mh_sd_logsigma2", "mh_sd_mu", "lambda2_init"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.hmc_steps < 1:
            raise ValueError("hmc_steps must be at least 1")
        if self.mcem_interval < 1:
            raise ValueError("mcem_interval must be at least 1")
        if self.mcem_window is not None and self.mcem_window < 1:
            raise ValueError("mcem_window must be positive when given")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")

    @property
    def n_retained(self) -> int:
        """floor((1 - burn_frac) * n_iter / thin), guarded against float fuzz."""
        return int(np.floor(round((1.0 - self.burn_frac) * self.n_iter / self.thin, 9)))


@dataclass
class ChainOutput:
    """Retained draws, lambda2 trace, acceptance rates, and run metadata.

    ``samples`` keys: beta (original scale), beta_ortho, gamma, gamma_fit,
    mu, mu_fit, sigma2, tau2.  Acceptance rates are computed over the
    post-adaptation iterations only.
    """

    samples: dict
    lambda2_trace: np.ndarray
    acceptance: dict
    meta: dict


def augment_event_times(theta: ModelParameters, aug: AugmentedState, fit: FitView, rng,
                        eta=None) -> AugmentedState:
    """Draw censored event times from their truncated log-normal conditionals.

    Exact observations keep their fixed time; each censored subject's time
    is drawn from log-normal(eta_i, sigma) restricted to [cL_i, cU_i] (the
    entry time never binds because c0 <= cL is validated on load).
    """
    if eta is None:
        eta = linear_predictor(theta, fit)
    free = ~fit.exact
    if not free.any():
        return aug
    t = aug.t.copy()
    params = LogNormalParams(eta[free], float(np.sqrt(theta.sigma2)))
    lo = np.maximum(fit.lower[free], fit.entry[free])
    t[free] = sample_truncated_lognormal(params, lo, fit.upper[free], rng)
    return AugmentedState(t)


def hmc_update(log_target_and_grad, position, eps, L, rng):
    """One Hamiltonian Monte Carlo transition with identity mass matrix.

    Returns (new_position, accepted, energy_error).  A non-finite target or
    gradient at the *current* position is an upstream bug and raises; a
    non-finite proposal is rejected like any bad proposal.
    """
    if not eps > 0 or L < 1:
        raise ValueError("eps must be positive and L at least 1")
    position = np.asarray(position, dtype=float)
    logp0, grad = log_target_and_grad(position)
    if not (np.isfinite(logp0) and np.all(np.isfinite(grad))):
        raise SamplerError(f"non-finite log-target ({logp0}) or gradient at current position")
    momentum = rng.standard_normal(position.size)
    h0 = -logp0 + 0.5 * (momentum @ momentum)
    x = position.copy()
    m = momentum + 0.5 * eps * grad
    logp = logp0
    # divergent trajectories overflow before they are rejected; that is routine
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(L):
            x = x + eps * m
            logp, grad = log_target_and_grad(x)
            if not (np.isfinite(logp) and np.all(np.isfinite(grad))):
                return position, False, np.inf
            if step < L - 1:
                m = m + eps * grad
        m = m + 0.5 * eps * grad
        h1 = -logp + 0.5 * (m @ m)
    denergy = h1 - h0
    if denergy <= 0.0 or np.log(rng.uniform()) < -denergy:
        return x, True, float(denergy)
    return position, False, float(denergy)


def update_sigma2(theta: ModelParameters, aug: AugmentedState, fit: FitView, rng,
                  proposal_sd, eta=None):
    """Random-walk Metropolis on log sigma2, with the change-of-variable term.

    The proposal is Normal in log sigma2, so the acceptance ratio carries
    the Jacobian log sigma2_prop - log sigma2_cur.
    """
    if eta is None:
        eta = linear_predictor(theta, fit)
    cur = theta.sigma2
    cur_lp = sigma2_log_target(cur, theta, aug, fit, eta=eta)
    if not np.isfinite(cur_lp):
        raise SamplerError(f"non-finite sigma2 target at current value {cur}")
    log_prop = np.log(cur) + proposal_sd * rng.standard_normal()
    prop = float(np.exp(log_prop))
    if not prop > 0:
        return cur, False
    prop_lp = sigma2_log_target(prop, theta, aug, fit, eta=eta)
    log_ratio = prop_lp - cur_lp + (log_prop - np.log(cur))
    if np.log(rng.uniform()) < log_ratio:
        return prop, True
    return cur, False


def update_mu(theta: ModelParameters, aug: AugmentedState, fit: FitView, rng,
              proposal_sd, eta_base=None):
    """Symmetric random-walk Metropolis on the intercept."""
    if eta_base is None:
        eta_base = fit.X @ theta.beta
        if fit.q:
            eta_base = eta_base + fit.Z @ theta.gamma
    cur = theta.mu
    cur_lp = mu_log_target(cur, theta, aug, fit, eta_base=eta_base)
    if not np.isfinite(cur_lp):
        raise SamplerError(f"non-finite mu target at current value {cur}")
    prop = cur + proposal_sd * rng.standard_normal()
    prop_lp = mu_log_target(prop, theta, aug, fit, eta_base=eta_base)
    log_ratio = prop_lp - cur_lp
    if np.log(rng.uniform()) < log_ratio:
        return float(prop), True
    return cur, False


def update_tau2(theta: ModelParameters, groups: GroupStructure, rng) -> np.ndarray:
    """Exact Gibbs draw of the group scales.

    1/tau2_k ~ InverseGaussian(sqrt(m_k lambda2 sigma2 / ||beta_k||^2),
    m_k lambda2).  When beta_k is numerically zero the mean parameter is
    capped at 1e8, where the draw is already shape-dominated.
    """
    tau2 = np.empty(groups.K)
    s2l2 = theta.lambda2 * theta.sigma2
    for k in range(groups.K):
        idx = groups.indices(k)
        m_k = idx.size
        norm2 = float(theta.beta[idx] @ theta.beta[idx])
        shape = m_k * theta.lambda2
        if norm2 < m_k * s2l2 / IG_MEAN_CAP ** 2:
            mean = IG_MEAN_CAP
        else:
            mean = float(np.sqrt(m_k * s2l2 / norm2))
        inv = sample_inverse_gaussian(mean, shape, rng)
        tau2[k] = 1.0 / inv
    return tau2


def update_lambda2_mcem(tau2_history, sizes, p, K) -> float:
    """M-step for lambda2: (p + K) / sum_k m_k * mean(tau2_k over the window)."""
    hist = np.atleast_2d(np.asarray(tau2_history, dtype=float))
    if hist.size == 0:
        raise ValueError("tau2 history is empty")
    sizes = np.asarray(sizes, dtype=float)
    if hist.shape[1] != sizes.size:
        raise ValueError(f"history has {hist.shape[1]} groups, sizes has {sizes.size}")
    denom = float(sizes @ hist.mean(axis=0))
    if not denom > 0:
        raise ValueError("tau2 window mean must be positive")
    return (p + K) / denom


def _as_fit(data, prior, prior_kind) -> FitView:
    if prior_kind not in PRIOR_KINDS:
        raise ValueError(f"prior_kind must be one of {PRIOR_KINDS}, got {prior_kind!r}")
    if isinstance(data, FitView):
        if prior_kind == "ordinary-lasso" and data.groups.K != data.groups.p:
            raise ValueError("ordinary-lasso requires singleton groups in the prepared view")
        return data
    if not isinstance(data, SurvivalDataset):
        raise TypeError("expected a SurvivalDataset or FitView")
    groups = GroupStructure.singletons(data.p) if prior_kind == "ordinary-lasso" else None
    return prepare(data, prior=prior, groups=groups)


def _initial_state(fit: FitView, cfg: SamplerConfig):
    mids = np.where(np.isfinite(fit.upper), 0.5 * (fit.lower + fit.upper), 1.5 * fit.lower)
    log_mids = np.log(mids)
    mu = float(np.mean(log_mids))
    sigma2 = float(np.var(log_mids, ddof=1)) if fit.n > 1 else 1.0
    if not np.isfinite(sigma2) or sigma2 < 1e-3:
        sigma2 = 1.0
    state = {
        "beta": np.zeros(fit.p),
        "gamma": np.zeros(fit.q),
        "mu": mu,
        "sigma2": sigma2,
        "tau2": np.ones(fit.groups.K),
        "lambda2": cfg.lambda2_init,
        "t": mids,
    }
    overrides = cfg.init_overrides or {}
    unknown = set(overrides) - set(state)
    if unknown:
        raise ValueError(f"unknown init_overrides keys: {sorted(unknown)}")
    state.update(overrides)
    t = np.asarray(state.pop("t"), dtype=float)
    theta = ModelParameters(**state)
    return theta, AugmentedState(t)


class _Adapted:
    """Robbins-Monro recursion on a log scale toward a target acceptance rate."""

    def __init__(self, value, target):
        self.log_value = np.log(value)
        self.target = target
        self.steps = 0

    def update(self, accepted):
        self.steps += 1
        gain = self.steps ** -0.6
        self.log_value += gain * (float(accepted) - self.target)

    @property
    def value(self):
        return float(np.exp(self.log_value))


class _AcceptCounter:
    def __init__(self):
        self.accepted = 0
        self.attempts = 0

    def add(self, accepted):
        self.attempts += 1
        self.accepted += int(accepted)

    @property
    def rate(self):
        return self.accepted / self.attempts if self.attempts else float("nan")


def run_chain(data, prior: PriorConfig = None, cfg: SamplerConfig = None,
              prior_kind: str = "group-lasso", chain_id: int = 0) -> ChainOutput:
    """Run one chain of the full seven-step sweep and collect retained draws.

    ``data`` may be a SurvivalDataset (prepared here) or an already-prepared
    FitView (shared across chains).  The rng stream is determined entirely
    by (cfg.seed, chain_id), so identical arguments reproduce identical
    output bit for bit.
    """
    cfg = cfg if cfg is not None else SamplerConfig()
    fit = _as_fit(data, prior, prior_kind)
    rng = RngStream(cfg.seed, chain_id).generator()
    n_keep = cfg.n_retained
    if n_keep < 1:
        raise SamplerError("configuration retains no draws; increase n_iter or reduce thin")
    start = cfg.n_iter - n_keep * cfg.thin

    theta, aug = _initial_state(fit, cfg)
    eps_beta = _Adapted(cfg.hmc_eps_beta, HMC_TARGET_ACCEPT)
    eps_gamma = _Adapted(cfg.hmc_eps_gamma, HMC_TARGET_ACCEPT)
    sd_logsigma2 = _Adapted(cfg.mh_sd_logsigma2, MH_TARGET_ACCEPT)
    sd_mu = _Adapted(cfg.mh_sd_mu, MH_TARGET_ACCEPT)
    counters = {name: _AcceptCounter() for name in ("beta", "gamma", "sigma2", "mu")}

    kept = {
        "beta_ortho": np.empty((n_keep, fit.p)),
        "gamma_fit": np.empty((n_keep, fit.q)),
        "mu_fit": np.empty(n_keep),
        "sigma2": np.empty(n_keep),
        "tau2": np.empty((n_keep, fit.groups.K)),
        "lambda2": np.empty(n_keep),
    }
    lambda2_trace = np.empty(cfg.n_iter)
    tau2_hist = []
    hist_cap = max(cfg.mcem_window or cfg.mcem_interval, cfg.mcem_interval)
    slot = 0

    block = "init"
    try:
        for i in range(cfg.n_iter):
            adapting = cfg.adapt and i < start
            eta = linear_predictor(theta, fit)

            block = "augment"
            aug = augment_event_times(theta, aug, fit, rng, eta=eta)
            if cfg.debug_checks:
                check_augmentation(aug, fit)

            if cfg.update_beta and fit.p:
                block = "beta"
                offset = fit.Z @ theta.gamma + theta.mu if fit.q else theta.mu
                beta_new, acc, _ = hmc_update(
                    lambda b: beta_log_target_and_grad(b, theta, aug, fit, offset=offset),
                    theta.beta, eps_beta.value, cfg.hmc_steps, rng,
                )
                theta = theta.replace(beta=beta_new)
                if adapting:
                    eps_beta.update(acc)
                elif i >= start:
                    counters["beta"].add(acc)

            if cfg.update_gamma and fit.q:
                block = "gamma"
                offset = fit.X @ theta.beta + theta.mu
                gamma_new, acc, _ = hmc_update(
                    lambda g: gamma_log_target_and_grad(g, theta, aug, fit, offset=offset),
                    theta.gamma, eps_gamma.value, cfg.hmc_steps, rng,
                )
                theta = theta.replace(gamma=gamma_new)
                if adapting:
                    eps_gamma.update(acc)
                elif i >= start:
                    counters["gamma"].add(acc)

            if cfg.update_sigma2:
                block = "sigma2"
                eta = linear_predictor(theta, fit)
                s2_new, acc = update_sigma2(theta, aug, fit, rng, sd_logsigma2.value, eta=eta)
                theta = theta.replace(sigma2=s2_new)
                if adapting:
                    sd_logsigma2.update(acc)
                elif i >= start:
                    counters["sigma2"].add(acc)

            if cfg.update_mu:
                block = "mu"
                eta_base = fit.X @ theta.beta
                if fit.q:
                    eta_base = eta_base + fit.Z @ theta.gamma
                mu_new, acc = update_mu(theta, aug, fit, rng, sd_mu.value, eta_base=eta_base)
                theta = theta.replace(mu=mu_new)
                if adapting:
                    sd_mu.update(acc)
                elif i >= start:
                    counters["mu"].add(acc)

            if cfg.update_tau2 and fit.groups.K:
                block = "tau2"
                theta = theta.replace(tau2=update_tau2(theta, fit.groups, rng))

            if fit.groups.K:
                tau2_hist.append(theta.tau2)
                if len(tau2_hist) > hist_cap:
                    del tau2_hist[: len(tau2_hist) - hist_cap]
                if cfg.update_lambda2 and (i + 1) % cfg.mcem_interval == 0:
                    block = "lambda2"
                    window = cfg.mcem_window or cfg.mcem_interval
                    lam = update_lambda2_mcem(
                        tau2_hist[-window:], fit.groups.sizes, fit.p, fit.groups.K
                    )
                    theta = theta.replace(lambda2=lam)
            lambda2_trace[i] = theta.lambda2

            if i >= start and (i - start + 1) % cfg.thin == 0:
                kept["beta_ortho"][slot] = theta.beta
                kept["gamma_fit"][slot] = theta.gamma
                kept["mu_fit"][slot] = theta.mu
                kept["sigma2"][slot] = theta.sigma2
                kept["tau2"][slot] = theta.tau2
                kept["lambda2"][slot] = theta.lambda2
                slot += 1
    except (SamplerError, ValueError, FloatingPointError) as exc:
        raise SamplerError(
            f"chain {chain_id} aborted at iteration {i}, block {block}: {exc}"
        ) from exc
    assert slot == n_keep

    beta, gamma, mu = fit.to_original_scale(kept["beta_ortho"], kept["gamma_fit"], kept["mu_fit"])
    samples = {
        "beta": beta,
        "beta_ortho": kept["beta_ortho"],
        "gamma": gamma,
        "gamma_fit": kept["gamma_fit"],
        "mu": mu,
        "mu_fit": kept["mu_fit"],
        "sigma2": kept["sigma2"],
        "tau2": kept["tau2"],
        "lambda2": kept["lambda2"],
    }
    acceptance = {name: counters[name].rate for name in counters}
    meta = {
        "seed": cfg.seed,
        "chain_id": chain_id,
        "prior_kind": prior_kind,
        "n_iter": cfg.n_iter,
        "burn_iters": start,
        "thin": cfg.thin,
        "retained": n_keep,
        "p": fit.p,
        "q": fit.q,
        "K": fit.groups.K,
        "group_sizes": fit.groups.sizes.tolist(),
        "x_names": list(fit.x_names),
        "z_names": list(fit.z_names),
        "eps_beta": eps_beta.value,
        "eps_gamma": eps_gamma.value,
        "mh_sd_logsigma2": sd_logsigma2.value,
        "mh_sd_mu": sd_mu.value,
    }
    return ChainOutput(samples=samples, lambda2_trace=lambda2_trace,
                       acceptance=acceptance, meta=meta)


def run_chains(data, prior: PriorConfig = None, cfg: SamplerConfig = None,
               prior_kind: str = "group-lasso", stream_base: int = 0):
    """Run cfg.n_chains independent chains and summarize convergence.

    Chain c uses rng stream stream_base + c; the prepared view is shared.
    Returns (list of ChainOutput, ConvergenceSummary).
    """
    from aftgl.diagnostics import summarize_convergence

    cfg = cfg if cfg is not None else SamplerConfig()
    fit = _as_fit(data, prior, prior_kind)
    outputs = [
        run_chain(fit, prior, cfg, prior_kind, chain_id=stream_base + c)
        for c in range(cfg.n_chains)
    ]
    return outputs, summarize_convergence(outputs)
