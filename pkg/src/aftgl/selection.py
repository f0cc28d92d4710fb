"""Posterior summaries and sparse model selection by SNC thresholding.

The selection routine scans a grid of thresholds on each coefficient's
scaled neighborhood criterion (the posterior probability that the
coefficient exceeds its own posterior standard deviation in magnitude),
refits a one-predictor log-normal survival model on each distinct support,
and keeps the support with the best penalized refit likelihood.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_ndtr

from .data import SurvivalDataset
from .dists import _LOG_SQRT_2PI, mills_ratio, normal_interval_logprob


class SelectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class CoefficientTable:
    """Per-coefficient posterior summary on the reporting (original) scale."""

    names: tuple
    median: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    q025: np.ndarray
    q975: np.ndarray
    snc: np.ndarray

    def __post_init__(self):
        k = len(self.names)
        for field in ("median", "mean", "sd", "q025", "q975", "snc"):
            if getattr(self, field).shape != (k,):
                raise ValueError(f"{field} must have shape ({k},)")
        if np.any(self.q025 > self.median) or np.any(self.median > self.q975):
            raise ValueError("quantiles out of order")
        if np.any((self.snc < 0) | (self.snc > 1)):
            raise ValueError("snc values must lie in [0, 1]")


@dataclass(frozen=True)
class PosteriorSummary:
    """Coefficient tables for the penalized block and the unpenalized block."""

    beta: CoefficientTable
    gamma: CoefficientTable
    n_draws: int


@dataclass(frozen=True)
class CandidateModel:
    """One distinct support from the threshold scan.

    kappa_lo/kappa_hi give the grid range of thresholds that produce this
    support.  loglik and criterion are NaN until the refit step fills them.
    """

    kappa_lo: float
    kappa_hi: float
    support: tuple
    loglik: float = float("nan")
    criterion: float = float("nan")

    @property
    def p_m(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class RefitResult:
    """Maximum-likelihood fit of the one-predictor log-normal model."""

    loglik: float
    intercept: float
    slope: float
    scale: float
    grad_norm: float


@dataclass(frozen=True)
class SelectionResult:
    grid_size: int
    candidates: tuple
    winner: CandidateModel
    beta: np.ndarray
    gamma: np.ndarray
    names: tuple

    @property
    def support(self) -> tuple:
        return self.winner.support


@dataclass(frozen=True)
class SelectionMetrics:
    tpr: float
    fpr: float
    ppv: float
    npv: float
    empty_selection: bool


def compute_snc(draws) -> float:
    """Fraction of draws whose magnitude exceeds their sample standard deviation.

    Zero-variance draw sets (a coefficient pinned at one value) return 0.
    """
    x = np.asarray(draws, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least 2 draws to compute an SNC value")
    sd = float(np.std(x, ddof=1))
    if sd == 0.0:
        return 0.0
    return float(np.mean(np.abs(x) > sd))


def summarize_posterior(outputs) -> PosteriorSummary:
    """Pool retained draws across chains into per-coefficient tables."""
    if not outputs:
        raise ValueError("no chain outputs given")
    meta = outputs[0].meta

    def table(key, names):
        draws = np.concatenate([np.atleast_2d(o.samples[key]) for o in outputs], axis=0)
        if draws.shape[1] != len(names):
            raise ValueError(f"{key} draws have {draws.shape[1]} columns, expected {len(names)}")
        q = np.quantile(draws, [0.025, 0.5, 0.975], axis=0)
        snc = np.array([compute_snc(draws[:, j]) for j in range(draws.shape[1])])
        return draws.shape[0], CoefficientTable(
            names=tuple(names),
            median=q[1],
            mean=draws.mean(axis=0),
            sd=draws.std(axis=0, ddof=1),
            q025=q[0],
            q975=q[2],
            snc=snc,
        )

    n_draws, beta = table("beta", meta["x_names"])
    _, gamma = table("gamma", meta["z_names"])
    return PosteriorSummary(beta=beta, gamma=gamma, n_draws=n_draws)


def candidate_grid(snc, M: int = 1000) -> list:
    """Distinct supports {j : SNC_j > m/M} for m = 1..M, duplicates collapsed.

    Supports are nested and non-increasing in the threshold; the empty
    support is a legitimate candidate (unpenalized-covariates-only model).
    """
    if M < 1:
        raise ValueError("grid size M must be at least 1")
    snc = np.asarray(snc, dtype=float)
    candidates = []
    for m in range(1, M + 1):
        kappa = m / M
        support = tuple(np.flatnonzero(snc > kappa).tolist())
        if candidates and candidates[-1].support == support:
            candidates[-1] = replace(candidates[-1], kappa_hi=kappa)
        else:
            candidates.append(CandidateModel(kappa_lo=kappa, kappa_hi=kappa, support=support))
    return candidates


def _refit_objective(params, w, log_lower, log_upper, log_entry, exact, truncated):
    """Negative log-likelihood and gradient in (intercept, slope, log scale).

    Iterates far enough out to zero an interval probability get an infinite
    objective and a zero gradient, which makes the line search back off.
    """
    a, b, ls = params
    s = np.exp(ls)
    eta = a + b * w
    ll = 0.0
    # gradient accumulators for d loglik / d eta_i and d loglik / d log s
    deta = np.zeros_like(w)
    dls = 0.0
    cens = ~exact

    with np.errstate(over="ignore", invalid="ignore"):
        if np.any(exact):
            z = (log_lower[exact] - eta[exact]) / s
            ll += np.sum(-log_lower[exact] - ls - _LOG_SQRT_2PI - 0.5 * z * z)
        if np.any(cens):
            zl = (log_lower[cens] - eta[cens]) / s
            zu = (log_upper[cens] - eta[cens]) / s
            logp = normal_interval_logprob(zl, zu)
            ll += np.sum(logp)
        if np.any(truncated):
            u = (eta[truncated] - log_entry[truncated]) / s
            ll -= np.sum(log_ndtr(u))
    if not np.isfinite(ll):
        return np.inf, np.zeros(3)

    if np.any(exact):
        deta[exact] = z / s
        dls += np.sum(z * z - 1.0)
    if np.any(cens):
        # density-over-probability ratios stay finite whenever logp does
        rl = np.exp(-0.5 * zl * zl - _LOG_SQRT_2PI - logp)
        finite_u = np.isfinite(zu)
        zu_safe = np.where(finite_u, zu, 0.0)
        ru = np.exp(np.where(finite_u, -0.5 * zu_safe * zu_safe - _LOG_SQRT_2PI - logp, -np.inf))
        deta[cens] = (rl - ru) / s
        dls += np.sum(zl * rl - zu_safe * ru)
    if np.any(truncated):
        m = mills_ratio(u)
        deta[truncated] -= m / s
        dls += np.sum(m * u)

    grad = np.array([np.sum(deta), np.sum(deta * w), dls])
    return -ll, -grad


def refit_univariable_aft(w, d: SurvivalDataset) -> RefitResult:
    """Maximum likelihood for log T = a + b*w + s*eps with interval bounds.

    The likelihood uses interval probabilities for censored rows, the
    density for exactly observed rows, and divides out survival past each
    positive entry time.  Three deterministic starts guard against the
    flat regions a poor predictor produces.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (d.n,):
        raise ValueError(f"w must have shape ({d.n},)")
    if not np.all(np.isfinite(w)):
        raise ValueError("w must be finite")

    log_lower = np.log(d.lower)
    with np.errstate(divide="ignore"):
        log_upper = np.log(d.upper)
        log_entry = np.log(d.entry)
    exact = d.lower == d.upper
    truncated = d.entry > 0

    args = (w, log_lower, log_upper, log_entry, exact, truncated)
    y = np.where(np.isfinite(log_upper), 0.5 * (log_lower + log_upper), log_lower)
    var_w = float(np.var(w))
    b0 = float(np.cov(w, y)[0, 1] / var_w) if var_w > 0 else 0.0
    a0 = float(np.mean(y) - b0 * np.mean(w))
    resid = y - a0 - b0 * w
    ls0 = 0.5 * np.log(max(float(np.mean(resid * resid)), 1e-4))
    starts = [
        np.array([a0, b0, ls0]),
        np.array([a0 + 0.3, b0 * 0.5, ls0 + 0.5]),
        np.array([a0 - 0.3, b0 * 1.5 + 0.1, ls0 - 0.5]),
    ]

    best = None
    for x0 in starts:
        res = minimize(_refit_objective, x0, args=args, jac=True, method="BFGS",
                       options={"maxiter": 500, "gtol": 1e-8})
        if not np.isfinite(res.fun):
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise SelectionError("refit failed: objective non-finite from every start")

    gnorm = float(np.max(np.abs(best.jac)))
    if gnorm > 1e-4 * max(1.0, abs(float(best.fun))):
        raise SelectionError(
            f"refit did not converge: max |gradient| = {gnorm:.3e} "
            f"at (a, b, log s) = {tuple(np.round(best.x, 6))}"
        )
    a, b, ls = best.x
    return RefitResult(loglik=-float(best.fun), intercept=float(a), slope=float(b),
                       scale=float(np.exp(ls)), grad_norm=gnorm)


def snc_bic_select(summary: PosteriorSummary, d: SurvivalDataset, M: int = 1000) -> SelectionResult:
    """Pick the support maximizing refit loglik minus (support size) * log n.

    Every distinct support from the threshold grid is refit with its
    median-coefficient linear predictor as the lone covariate.  Candidates
    whose refit fails are dropped with a warning.  Ties go to the smaller
    support.
    """
    if len(summary.beta.names) != d.p or len(summary.gamma.names) != d.q:
        raise ValueError("summary and dataset disagree on coefficient counts")
    candidates = candidate_grid(summary.beta.snc, M)
    beta_med = summary.beta.median
    gamma_med = summary.gamma.median
    base = d.Z @ gamma_med if d.q else np.zeros(d.n)
    log_n = np.log(d.n)

    scored = []
    for cand in candidates:
        idx = list(cand.support)
        w = base + (d.X[:, idx] @ beta_med[idx] if idx else 0.0)
        try:
            fit = refit_univariable_aft(w, d)
        except SelectionError as exc:
            warnings.warn(
                f"dropping candidate with support size {cand.p_m} "
                f"(kappa in [{cand.kappa_lo:g}, {cand.kappa_hi:g}]): {exc}",
                RuntimeWarning,
                stacklevel=2,
            )
            continue
        scored.append(replace(cand, loglik=fit.loglik,
                              criterion=fit.loglik - cand.p_m * log_n))
    if not scored:
        raise SelectionError("every candidate refit failed")

    winner = max(scored, key=lambda c: (c.criterion, -c.p_m))
    beta_hat = np.zeros(d.p)
    idx = list(winner.support)
    beta_hat[idx] = beta_med[idx]
    return SelectionResult(
        grid_size=M,
        candidates=tuple(scored),
        winner=winner,
        beta=beta_hat,
        gamma=gamma_med.copy(),
        names=summary.beta.names,
    )


def selection_metrics(selected, truth, p: int) -> SelectionMetrics:
    """Support-recovery rates for a selected index set against the truth.

    An empty selection has no positives to be wrong about, so its precision
    is reported as 1.0 with the empty_selection flag raised; the analogous
    convention applies when there are no negatives.
    """
    sel = frozenset(int(j) for j in selected)
    tru = frozenset(int(j) for j in truth)
    if not tru:
        raise ValueError("truth set must be nonempty")
    universe = frozenset(range(p))
    if not sel <= universe or not tru <= universe:
        raise ValueError(f"index sets must lie in 0..{p - 1}")

    tp = len(sel & tru)
    negatives = p - len(tru)
    fpr = len(sel - tru) / negatives if negatives else 0.0
    ppv = tp / len(sel) if sel else 1.0
    sel_c = universe - sel
    npv = len((universe - tru) & sel_c) / len(sel_c) if sel_c else 1.0
    return SelectionMetrics(
        tpr=tp / len(tru),
        fpr=fpr,
        ppv=ppv,
        npv=npv,
        empty_selection=not sel,
    )
