"""Convergence diagnostics over retained draws: PSRF and effective sample size."""

from dataclasses import dataclass

import numpy as np


def gelman_rubin(draws) -> float:
    """Potential scale reduction factor across chains.

    ``draws`` is an (m, S) array of one scalar parameter, one row per chain.
    Returns NaN for a single chain or zero within-chain variance (a frozen
    parameter has no meaningful PSRF).
    """
    x = np.atleast_2d(np.asarray(draws, dtype=float))
    m, n = x.shape
    if m < 2 or n < 2:
        return float("nan")
    within = float(np.mean(np.var(x, axis=1, ddof=1)))
    if within <= 0:
        return float("nan")
    b_over_n = float(np.var(np.mean(x, axis=1), ddof=1))
    var_hat = (n - 1) / n * within + (1.0 + 1.0 / m) * b_over_n
    return float(np.sqrt(var_hat / within))


def _autocorrelations(x):
    n = x.size
    xc = x - x.mean()
    nfft = 1 << int(2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    if acov[0] <= 0:
        return None
    return acov / acov[0]


def effective_sample_size(draws) -> float:
    """Effective sample size via Geyer's initial positive sequence.

    ``draws`` is (m, S) or (S,); per-chain estimates are summed.  Constant
    chains contribute their raw length (no autocorrelation information).
    """
    x = np.atleast_2d(np.asarray(draws, dtype=float))
    total = 0.0
    for row in x:
        n = row.size
        if n < 4:
            total += n
            continue
        rho = _autocorrelations(row)
        if rho is None:
            total += n
            continue
        # sum adjacent-pair autocorrelations while they stay positive
        pair_sum = 0.0
        m = 0
        while 2 * m + 1 < n:
            g = rho[2 * m] + rho[2 * m + 1]
            if g <= 0:
                break
            pair_sum += g
            m += 1
        tau = max(2.0 * pair_sum - 1.0, 1e-8)
        total += min(n / tau, n)
    return float(total)


@dataclass(frozen=True)
class ConvergenceSummary:
    """Per-parameter PSRF and ESS over the reported (original-scale) draws."""

    names: tuple
    psrf: np.ndarray
    ess: np.ndarray

    @property
    def max_psrf(self) -> float:
        finite = self.psrf[np.isfinite(self.psrf)]
        return float(finite.max()) if finite.size else float("nan")

    def rows(self):
        return list(zip(self.names, self.psrf.tolist(), self.ess.tolist()))

    def __str__(self):
        lines = ["parameter        PSRF      ESS"]
        for name, r, e in self.rows():
            r_txt = f"{r:.4f}" if np.isfinite(r) else "n/a"
            lines.append(f"{name:<15s} {r_txt:>7s} {e:>8.1f}")
        return "\n".join(lines)


def parameter_names(meta) -> list:
    """Reported parameter order: beta columns, gamma columns, mu, sigma2, tau2_k."""
    names = list(meta["x_names"]) + list(meta["z_names"]) + ["mu", "sigma2"]
    names += [f"tau2_{k + 1}" for k in range(meta["K"])]
    return names


def stack_draws(output) -> np.ndarray:
    """Retained draws of one chain as an (S, d) matrix in reported order."""
    s = output.samples
    cols = [s["beta"], s["gamma"], s["mu"][:, None], s["sigma2"][:, None], s["tau2"]]
    return np.hstack([np.atleast_2d(c) if c.ndim > 1 else c[:, None] for c in cols])


def summarize_convergence(outputs) -> ConvergenceSummary:
    """PSRF and ESS per reported parameter across a set of chains."""
    if not outputs:
        raise ValueError("no chain outputs given")
    names = parameter_names(outputs[0].meta)
    mats = [stack_draws(o) for o in outputs]
    d = mats[0].shape[1]
    if any(m.shape != mats[0].shape for m in mats):
        raise ValueError("chains disagree on retained draw shapes")
    psrf = np.empty(d)
    ess = np.empty(d)
    for j in range(d):
        per_param = np.vstack([m[:, j] for m in mats])
        psrf[j] = gelman_rubin(per_param)
        ess[j] = effective_sample_size(per_param)
    return ConvergenceSummary(names=tuple(names), psrf=psrf, ess=ess)
