"""Batch command-line interface.

Subcommands: fit (sample the posterior and write draws), select (SNC
thresholding on stored draws), simulate (replicated benchmark from a
scenario file), summarize (acceleration factors, survival quantiles,
diagnostics), gradcheck (finite-difference validation of the HMC
gradients).  Exit codes: 0 success, 1 runtime failure, 2 usage or input
error.  Option precedence: command line beats --config JSON beats the
built-in default.
"""

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np
from scipy.special import ndtri

from . import __version__
from .data import DataError, GroupStructure, load_dataset
from .diagnostics import parameter_names, stack_draws, summarize_convergence
from .dists import RngStream
from .likelihood import (
    AugmentedState,
    FitView,
    ModelParameters,
    PriorConfig,
    beta_log_target_and_grad,
    gamma_log_target_and_grad,
)
from .sampler import SamplerConfig, SamplerError, run_chain
from .selection import SelectionError, snc_bic_select, summarize_posterior
from .simbench import (
    ScenarioSpec,
    make_replication_dataset,
    parse_scenario_file,
    run_replications,
)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

SAMPLER_DEFAULTS = {
    "iters": 5000,
    "chains": 2,
    "burn_frac": 0.5,
    "thin": 1,
    "seed": 0,
    "mcem_interval": 100,
    "hmc_steps": 20,
}

PRIOR_DEFAULTS = {"mu0": 0.0, "h0": 1e6, "a_sigma": 0.7, "b_sigma": 0.7, "v2": 1e6}

QUANTILES = tuple(q / 10.0 for q in range(1, 10))


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _resolve(args, config, defaults):
    """flag > config-file entry > default, per option name."""
    out = {}
    for name, default in defaults.items():
        given = getattr(args, name, None)
        out[name] = default if given is None else given
        if given is None and name in config:
            out[name] = type(default)(config[name]) if default is not None else config[name]
    return out


def _sampler_config(r) -> SamplerConfig:
    return SamplerConfig(
        n_iter=int(r["iters"]),
        n_chains=int(r["chains"]),
        burn_frac=float(r["burn_frac"]),
        thin=int(r["thin"]),
        seed=int(r["seed"]),
        mcem_interval=int(r["mcem_interval"]),
        hmc_steps=int(r["hmc_steps"]),
    )


def _prior_config(r) -> PriorConfig:
    return PriorConfig(
        mu0=float(r["mu0"]),
        h0=float(r["h0"]),
        a_sigma=float(r["a_sigma"]),
        b_sigma=float(r["b_sigma"]),
        v2=float(r["v2"]),
    )


# ---------------------------------------------------------------- chain files

def _chain_columns(meta):
    return parameter_names(meta) + ["lambda2"]


def _chain_matrix(output):
    return np.hstack([stack_draws(output), output.samples["lambda2"][:, None]])


def _write_chain_csv(path, output):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_chain_columns(output.meta))
        for row in _chain_matrix(output):
            writer.writerow([_fmt(float(v)) for v in row])


class _StoredChain:
    """Read-back view of one chain CSV, shaped like a sampler output."""

    def __init__(self, path, manifest):
        p, q, K = manifest["p"], manifest["q"], manifest["K"]
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader if row]
        expected = p + q + 2 + K + 1
        if len(header) != expected:
            raise DataError(f"{path}: expected {expected} columns, found {len(header)}")
        mat = np.asarray(rows, dtype=float).reshape(len(rows), expected)
        self.samples = {
            "beta": mat[:, :p],
            "gamma": mat[:, p: p + q],
            "mu": mat[:, p + q],
            "sigma2": mat[:, p + q + 1],
            "tau2": mat[:, p + q + 2: p + q + 2 + K],
            "lambda2": mat[:, -1],
        }
        self.meta = {
            "x_names": manifest["x_names"],
            "z_names": manifest["z_names"],
            "K": K,
        }


def _load_run(run_dir):
    manifest_path = os.path.join(run_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise DataError(f"{manifest_path}: no manifest found; run `fit` first")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    outputs = []
    for c in range(1, manifest["config"]["chains"] + 1):
        path = os.path.join(run_dir, f"chain_{c}.csv")
        if not os.path.exists(path):
            raise DataError(f"{path}: chain file missing")
        outputs.append(_StoredChain(path, manifest))
    return manifest, outputs


def _write_summary_csv(path, post):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block", "name", "median", "mean", "sd", "q2.5", "q97.5", "snc"])
        for block, table in (("beta", post.beta), ("gamma", post.gamma)):
            for j, name in enumerate(table.names):
                writer.writerow([block, name] + [
                    _fmt(float(col[j]))
                    for col in (table.median, table.mean, table.sd,
                                table.q025, table.q975, table.snc)
                ])


# ------------------------------------------------------------------- fit

def _fit_one(job):
    d, prior, cfg, prior_kind, chain_id = job
    return run_chain(d, prior=prior, cfg=cfg, prior_kind=prior_kind, chain_id=chain_id)


def cmd_fit(args, config):
    r = _resolve(args, config, {**SAMPLER_DEFAULTS, **PRIOR_DEFAULTS})
    prior_name = args.prior or config.get("prior", "group")
    if prior_name not in ("group", "ordinary"):
        raise DataError(f"prior must be 'group' or 'ordinary', got {prior_name!r}")
    prior_kind = {"group": "group-lasso", "ordinary": "ordinary-lasso"}[prior_name]
    d = load_dataset(args.data, args.groups)
    cfg = _sampler_config(r)
    prior = _prior_config(r)
    workers = args.workers or int(config.get("workers", 1))

    t0 = time.perf_counter()
    jobs = [(d, prior, cfg, prior_kind, c) for c in range(cfg.n_chains)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_fit_one, jobs))
    else:
        outputs = [_fit_one(job) for job in jobs]
    conv = summarize_convergence(outputs)
    post = summarize_posterior(outputs)
    wall = time.perf_counter() - t0

    os.makedirs(args.out, exist_ok=True)
    for c, output in enumerate(outputs, start=1):
        _write_chain_csv(os.path.join(args.out, f"chain_{c}.csv"), output)
    _write_summary_csv(os.path.join(args.out, "summary.csv"), post)

    manifest = {
        "command": "fit",
        "version": __version__,
        "data": os.path.abspath(args.data),
        "groups": os.path.abspath(args.groups),
        "prior_kind": prior_kind,
        "config": {
            "iters": cfg.n_iter, "chains": cfg.n_chains, "burn_frac": cfg.burn_frac,
            "thin": cfg.thin, "seed": cfg.seed, "mcem_interval": cfg.mcem_interval,
            "hmc_steps": cfg.hmc_steps, "workers": workers,
            "mu0": prior.mu0, "h0": prior.h0, "a_sigma": prior.a_sigma,
            "b_sigma": prior.b_sigma, "v2": prior.v2,
        },
        "n": d.n, "p": d.p, "q": d.q, "K": outputs[0].meta["K"],
        "x_names": list(d.x_names), "z_names": list(d.z_names),
        "n_retained": cfg.n_retained,
        "chains": [
            {"chain_id": o.meta["chain_id"], "acceptance": o.acceptance,
             "eps_beta": o.meta["eps_beta"], "eps_gamma": o.meta["eps_gamma"],
             "mh_sd_logsigma2": o.meta["mh_sd_logsigma2"], "mh_sd_mu": o.meta["mh_sd_mu"]}
            for o in outputs
        ],
        "diagnostics": {
            "names": list(conv.names),
            "psrf": [None if not np.isfinite(v) else float(v) for v in conv.psrf],
            "ess": [float(v) for v in conv.ess],
            "max_psrf": None if not np.isfinite(conv.max_psrf) else float(conv.max_psrf),
        },
        "wallclock_s": wall,
    }
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    max_psrf = manifest["diagnostics"]["max_psrf"]
    print(f"fit: {cfg.n_chains} chains x {cfg.n_retained} retained draws on "
          f"n={d.n}, p={d.p}, q={d.q}; max PSRF "
          f"{'n/a' if max_psrf is None else format(max_psrf, '.4f')}; "
          f"outputs in {args.out}")
    return EXIT_OK


# ------------------------------------------------------------------- select

def cmd_select(args, config):
    grid = int(args.grid if args.grid is not None else config.get("grid", 1000))
    manifest, outputs = _load_run(args.run)
    n_draws = sum(o.samples["mu"].size for o in outputs)
    if n_draws < 2:
        raise DataError(f"{args.run}: need at least 2 retained draws, found {n_draws}")
    d = load_dataset(manifest["data"], manifest["groups"])
    if manifest["prior_kind"] == "ordinary-lasso":
        d = replace(d, groups=GroupStructure.singletons(d.p))
    post = summarize_posterior(outputs)
    result = snc_bic_select(post, d, M=grid)

    with open(os.path.join(args.run, "selection.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kappa_lo", "kappa_hi", "support_size", "loglik",
                         "criterion", "selected", "support"])
        for cand in result.candidates:
            writer.writerow([
                _fmt(cand.kappa_lo), _fmt(cand.kappa_hi), cand.p_m,
                _fmt(cand.loglik), _fmt(cand.criterion),
                int(cand == result.winner),
                ";".join(result.names[j] for j in cand.support),
            ])
    record = {
        "grid_size": grid,
        "support": [result.names[j] for j in result.support],
        "support_indices": list(result.support),
        "beta": {name: result.beta[j] for j, name in enumerate(result.names)},
        "gamma": {name: float(v) for name, v in zip(post.gamma.names, result.gamma)},
        "snc": {name: float(v) for name, v in zip(result.names, post.beta.snc)},
        "criterion": result.winner.criterion,
        "loglik": result.winner.loglik,
        "n_candidates": len(result.candidates),
    }
    with open(os.path.join(args.run, "selected.json"), "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"select: kept {len(result.support)} of {d.p} penalized columns "
          f"from {len(result.candidates)} candidates (grid {grid})")
    return EXIT_OK


# ------------------------------------------------------------------- simulate

def _write_generated_dataset(out_dir, d):
    data_path = os.path.join(out_dir, "dataset.csv")
    with open(data_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["c0", "cL", "cU"] + list(d.x_names) + list(d.z_names))
        for i in range(d.n):
            writer.writerow(
                [_fmt(float(d.entry[i])), _fmt(float(d.lower[i])),
                 "inf" if not np.isfinite(d.upper[i]) else _fmt(float(d.upper[i]))]
                + [_fmt(float(v)) for v in d.X[i]]
                + [_fmt(float(v)) for v in d.Z[i]]
            )
    groups_path = os.path.join(out_dir, "groups.csv")
    with open(groups_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["column", "group"])
        for j, name in enumerate(d.x_names):
            writer.writerow([name, f"g{d.groups.membership[j] + 1}"])
    return data_path, groups_path


def cmd_simulate(args, config):
    spec = parse_scenario_file(args.spec)
    if args.seed is not None:
        spec = replace(spec, seed=int(args.seed))
    elif "seed" in config:
        spec = replace(spec, seed=int(config["seed"]))
    os.makedirs(args.out, exist_ok=True)

    if args.dry_run:
        d, beta, gamma, rate = make_replication_dataset(spec, 0)
        data_path, groups_path = _write_generated_dataset(args.out, d)
        print(f"simulate --dry-run: wrote {data_path} and {groups_path} "
              f"(n={d.n}, p={d.p}, q={d.q}, event rate {rate:.3f})")
        return EXIT_OK

    r = _resolve(args, config, SAMPLER_DEFAULTS)
    cfg = _sampler_config(r)
    grid = int(args.grid if args.grid is not None else config.get("grid", 1000))
    workers = args.workers or int(config.get("workers", 1))
    rows, agg = run_replications(spec, gl_config=cfg, ol_config=cfg, grid_size=grid,
                                 workers=workers, out_dir=args.out)
    for entry in agg:
        print(f"simulate[{entry['model']}]: {entry['n_ok']} ok, "
              f"{entry['n_failed']} failed; mean l2 "
              f"{entry['l2_error_mean']:.3f}, TPR {entry['tpr_mean']:.3f}, "
              f"FPR {entry['fpr_mean']:.3f}")
    return EXIT_OK


# ------------------------------------------------------------------- summarize

def _read_profiles(path, names):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        label_col = header[0].lower() == "label"
        covs = header[1:] if label_col else header
        unknown = [c for c in covs if c not in names]
        if unknown:
            raise DataError(f"{path}: unknown covariate(s) {', '.join(unknown)}")
        profiles = []
        for i, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            label = row[0] if label_col else f"profile_{i - 1}"
            vals = row[1:] if label_col else row
            point = dict.fromkeys(names, 0.0)
            for c, v in zip(covs, vals):
                try:
                    point[c] = float(v)
                except ValueError:
                    raise DataError(f"{path}: row {i}: bad value {v!r} for {c}") from None
            profiles.append((label, point))
    return profiles


def cmd_summarize(args, config):
    manifest, outputs = _load_run(args.run)
    post = summarize_posterior(outputs)
    conv = summarize_convergence(outputs)
    names = manifest["x_names"] + manifest["z_names"]

    with open(os.path.join(args.run, "acceleration.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block", "name", "median", "accel_factor",
                         "accel_q2.5", "accel_q97.5"])
        for block, table in (("beta", post.beta), ("gamma", post.gamma)):
            for j, name in enumerate(table.names):
                writer.writerow([block, name, _fmt(float(table.median[j])),
                                 _fmt(float(np.exp(table.median[j]))),
                                 _fmt(float(np.exp(table.q025[j]))),
                                 _fmt(float(np.exp(table.q975[j])))])

    mu_med = float(np.median(np.concatenate([o.samples["mu"] for o in outputs])))
    sigma_med = float(np.sqrt(np.median(np.concatenate([o.samples["sigma2"]
                                                        for o in outputs]))))
    profiles = [("baseline", dict.fromkeys(names, 0.0))]
    if args.profiles:
        profiles += _read_profiles(args.profiles, names)
    medians = dict(zip(post.beta.names, post.beta.median))
    medians.update(zip(post.gamma.names, post.gamma.median))
    with open(os.path.join(args.run, "quantiles.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["profile", "q", "time"])
        for label, point in profiles:
            eta = mu_med + sum(medians[c] * v for c, v in point.items())
            for q in QUANTILES:
                t_q = float(np.exp(eta + sigma_med * ndtri(q)))
                writer.writerow([label, _fmt(q), _fmt(t_q)])

    with open(os.path.join(args.run, "diagnostics.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "psrf", "ess"])
        for name, r_hat, ess in conv.rows():
            writer.writerow([name, _fmt(float(r_hat)), _fmt(float(ess))])

    print(f"summarize: wrote acceleration.csv, quantiles.csv "
          f"({len(profiles)} profile(s)), diagnostics.csv in {args.run}")
    return EXIT_OK


# ------------------------------------------------------------------- gradcheck

def _random_check_state(rng):
    """A random posterior state over mixed exact/interval/right-censored rows."""
    n = int(rng.integers(10, 51))
    p = int(rng.integers(1, 13))
    q = int(rng.integers(0, 3))
    X = rng.standard_normal((n, p))
    Z = rng.standard_normal((n, q)) if q else None
    t = np.exp(rng.normal(1.0, 0.8, n))
    lower = t.copy()
    upper = t.copy()
    kind = rng.integers(0, 3, n)  # 0 exact, 1 interval, 2 right-censored
    interval = kind == 1
    lower[interval] = t[interval] * rng.uniform(0.5, 1.0, interval.sum())
    upper[interval] = t[interval] / rng.uniform(0.3, 1.0, interval.sum())
    right = kind == 2
    upper[right] = np.inf
    entry = np.zeros(n)
    half = rng.permutation(n)[: n // 2]
    entry[half] = lower[half] * rng.uniform(0.1, 0.9, half.size)
    labels = np.sort(rng.integers(0, max(p // 2, 1), p))
    groups = GroupStructure.from_labels(labels.tolist())
    fit = FitView.from_arrays(X, Z, entry, lower, upper, groups=groups)
    theta = ModelParameters(
        beta=rng.normal(0.0, 0.5, p),
        gamma=rng.normal(0.0, 0.5, q),
        mu=rng.normal(1.0, 0.5),
        sigma2=float(rng.uniform(0.4, 2.0)),
        tau2=rng.uniform(0.2, 3.0, groups.K),
        lambda2=float(rng.uniform(0.5, 2.0)),
    )
    return fit, theta, AugmentedState(t)


def _fd_grad(f, x, scale=1e-6):
    g = np.empty(x.size)
    for j in range(x.size):
        h = scale * max(1.0, abs(x[j]))
        up, dn = x.copy(), x.copy()
        up[j] += h
        dn[j] -= h
        g[j] = (f(up) - f(dn)) / (2.0 * h)
    return g


def _max_rel_err(analytic, numeric, f_scale):
    denom = max(1.0, float(np.max(np.abs(numeric))), abs(f_scale))
    return float(np.max(np.abs(analytic - numeric))) / denom


def cmd_gradcheck(args, config):
    states = int(args.states if args.states is not None else config.get("states", 100))
    seed = int(args.seed if args.seed is not None else config.get("seed", 0))
    rng = RngStream(seed).generator()
    worst_beta = worst_gamma = 0.0
    for _ in range(states):
        fit, theta, aug = _random_check_state(rng)
        lp, grad = beta_log_target_and_grad(theta.beta, theta, aug, fit)
        fd = _fd_grad(lambda b: beta_log_target_and_grad(b, theta, aug, fit)[0], theta.beta)
        worst_beta = max(worst_beta, _max_rel_err(grad, fd, lp))
        if fit.q:
            lp, grad = gamma_log_target_and_grad(theta.gamma, theta, aug, fit)
            fd = _fd_grad(lambda g: gamma_log_target_and_grad(g, theta, aug, fit)[0],
                          theta.gamma)
            worst_gamma = max(worst_gamma, _max_rel_err(grad, fd, lp))
    ok = worst_beta < 1e-5 and worst_gamma < 1e-5
    print(f"gradcheck: {states} states, seed {seed}; "
          f"max rel err beta {worst_beta:.3e}, gamma {worst_gamma:.3e}: "
          f"{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_RUNTIME


# ------------------------------------------------------------------- parser

def _add_common(sub):
    sub.add_argument("--seed", type=int, default=None, help="rng seed (default 0)")
    sub.add_argument("--workers", type=int, default=None,
                     help="parallel workers for chains/replications (default 1)")
    sub.add_argument("--config", default=None,
                     help="JSON file of option defaults; flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aftgl",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"aftgl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="sample the posterior and write draw CSVs",
                         description=(
                             "Outputs in --out: chain_<i>.csv (one retained draw per row; "
                             "columns are the penalized coefficients, unpenalized "
                             "coefficients, mu, sigma2, tau2_<k>, lambda2), summary.csv "
                             "(per-coefficient posterior table), manifest.json "
                             "(resolved configuration, seeds, acceptance rates, "
                             "PSRF/ESS, wall-clock, data paths)."))
    fit.add_argument("--data", required=True, help="dataset CSV (c0,cL,cU,covariates)")
    fit.add_argument("--groups", required=True, help="group CSV (column,group)")
    fit.add_argument("--out", required=True, help="output directory")
    fit.add_argument("--prior", choices=("group", "ordinary"), default=None,
                     help="shrinkage prior; ordinary forces singleton groups")
    fit.add_argument("--iters", type=int, default=None, help="MCMC iterations (5000)")
    fit.add_argument("--chains", type=int, default=None, help="number of chains (2)")
    fit.add_argument("--burn-frac", type=float, default=None, help="burn-in fraction (0.5)")
    fit.add_argument("--thin", type=int, default=None, help="thinning interval (1)")
    fit.add_argument("--mcem-interval", type=int, default=None,
                     help="iterations between lambda2 updates (100)")
    fit.add_argument("--hmc-steps", type=int, default=None, help="leapfrog steps (20)")
    fit.add_argument("--mu0", type=float, default=None, help="prior mean of mu (0)")
    fit.add_argument("--h0", type=float, default=None, help="prior variance of mu (1e6)")
    fit.add_argument("--a-sigma", type=float, default=None, help="sigma2 prior shape (0.7)")
    fit.add_argument("--b-sigma", type=float, default=None, help="sigma2 prior rate (0.7)")
    fit.add_argument("--v2", type=float, default=None,
                     help="prior variance of unpenalized coefficients (1e6)")
    _add_common(fit)
    fit.set_defaults(func=cmd_fit)

    sel = sub.add_parser("select", help="SNC thresholding over a fit directory",
                         description=(
                             "Reads chain CSVs and manifest.json from --run; writes "
                             "selection.csv (candidate table: kappa range, support size, "
                             "refit log-likelihood, criterion) and selected.json "
                             "(final support, estimates, SNC values)."))
    sel.add_argument("--run", required=True, help="fit output directory")
    sel.add_argument("--grid", type=int, default=None, help="threshold grid size (1000)")
    _add_common(sel)
    sel.set_defaults(func=cmd_select)

    sim = sub.add_parser("simulate", help="replicated benchmark from a scenario file",
                         description=(
                             "Reads a key=value scenario file; writes replications.csv "
                             "(one row per replication and prior) and aggregate.csv "
                             "(mean/sd per prior) into --out.  --dry-run instead writes "
                             "dataset.csv and groups.csv for the first replication."))
    sim.add_argument("--spec", required=True, help="scenario file (key=value lines)")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--dry-run", action="store_true",
                     help="emit one generated dataset instead of fitting")
    sim.add_argument("--iters", type=int, default=None, help="MCMC iterations (5000)")
    sim.add_argument("--chains", type=int, default=None, help="chains per fit (2)")
    sim.add_argument("--burn-frac", type=float, default=None, help="burn-in fraction (0.5)")
    sim.add_argument("--thin", type=int, default=None, help="thinning interval (1)")
    sim.add_argument("--mcem-interval", type=int, default=None,
                     help="iterations between lambda2 updates (100)")
    sim.add_argument("--hmc-steps", type=int, default=None, help="leapfrog steps (20)")
    sim.add_argument("--grid", type=int, default=None, help="selection grid size (1000)")
    _add_common(sim)
    sim.set_defaults(func=cmd_simulate)

    summ = sub.add_parser("summarize", help="acceleration factors and survival quantiles",
                          description=(
                              "Writes into --run: acceleration.csv (exp of coefficient "
                              "medians with credible intervals), quantiles.csv (survival "
                              "times at q=0.1..0.9 for the baseline and any --profiles "
                              "rows), diagnostics.csv (PSRF and effective sample size)."))
    summ.add_argument("--run", required=True, help="fit output directory")
    summ.add_argument("--profiles", default=None,
                      help="CSV of covariate profiles (optional leading 'label' column; "
                           "unlisted covariates default to 0)")
    _add_common(summ)
    summ.set_defaults(func=cmd_summarize)

    grad = sub.add_parser("gradcheck", help="finite-difference check of HMC gradients",
                          description="Exit 0 iff every max relative error is below 1e-5.")
    grad.add_argument("--states", type=int, default=None, help="random states (100)")
    _add_common(grad)
    grad.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        if not isinstance(config, dict):
            print(f"error: config {args.config} must hold a JSON object", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args, config)
    except (DataError, FileNotFoundError, IsADirectoryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SamplerError, SelectionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
