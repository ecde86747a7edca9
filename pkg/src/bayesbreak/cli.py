"""Command-line frontend: fit, em, predict, verify, benchmark, calibrate, simulate.

Exit codes: 0 success, 2 input/config error, 3 numerical failure,
4 verification mismatch. Structured results go to JSON, plot data to TSV;
identical config and seed reproduce outputs byte-for-byte apart from the
``created_at`` stamp. ``BAYESBREAK_THREADS`` caps numba parallelism.
"""

from __future__ import annotations

import csv
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import _kernels
from .config import build_config
from .data import Dataset, PredictionUnit, Sequence, load_group_labels, load_sequences
from .engine import bayes_curve, boundary_event_probs, segment_moments_fixed
from .errors import BayesBreakError, ConfigError, InputError, NumericalError
from .families import precompute_blocks
from .fit import FitResult, PriorSpec, dp_summaries, fit_sequence
from .glm import GLM_METHODS, logistic_table
from .metrics import bin_rank_correlation, boundary_f1, calibration_bins, ece
from .mixture import EmConfig, em_fit
from .pooling import fit_known_groups, fit_pooled
from .predict import ExportedModel, predict_bayes_signal, predict_map_signal, score_pointwise, score_units
from .priors import compute_normalizers
from .simulate import random_boundaries, simulate_sequence, two_jump_levels
from .verify import run_verification

EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_VERIFY = 4


def _apply_thread_cap() -> None:
    cap = os.environ.get("BAYESBREAK_THREADS")
    if not cap:
        return
    try:
        import numba

        numba.set_num_threads(max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS)))
    except (ImportError, ValueError):
        pass


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    payload = dict(payload)
    payload["created_at"] = datetime.now(timezone.utc).isoformat()
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _write_tsv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _fail(exc: BaseException) -> int:
    if isinstance(exc, (InputError, ConfigError)):
        return EXIT_INPUT
    if isinstance(exc, NumericalError):
        return EXIT_NUMERIC
    return EXIT_NUMERIC if isinstance(exc, (FloatingPointError, ArithmeticError)) else EXIT_INPUT


def _guarded(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except BayesBreakError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(_fail(e))
        except OSError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_INPUT)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
@click.version_option()
def main() -> None:
    """Exact offline Bayesian changepoint segmentation."""
    _apply_thread_cap()


_CONFIG_OPTS = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                 help="TOML or JSON run configuration."),
    click.option("--family", default=None, help="Observation family (overrides config)."),
    click.option("--k-max", type=int, default=None, help="Maximum segment count."),
    click.option("--g", default=None,
                 help="Length factor: uniform | geometric:RHO | min-length:L."),
    click.option("--p-k", default=None, help="Segment-count prior kind (uniform)."),
    click.option("--seed", type=int, default=None, help="Random seed."),
]


def _with_config_opts(fn):
    for opt in reversed(_CONFIG_OPTS):
        fn = opt(fn)
    return fn


def _load_dataset(data_path, fmt, family_name, groups_file) -> Dataset:
    fmt = fmt or ("json" if str(data_path).endswith(".json") else "csv")
    dataset = load_sequences(data_path, format=fmt, family=family_name)
    if groups_file:
        dataset = load_group_labels(groups_file, dataset)
    return dataset


def _boundary_x(grid: np.ndarray, interior: np.ndarray) -> list[float]:
    return [float((grid[t - 1] + grid[t]) / 2.0) for t in interior]


def _fit_payload(result: FitResult, cfg_echo: dict) -> dict:
    post = result.posterior.to_dict()
    post["map_boundaries_x"] = _boundary_x(
        result.seq.x, result.posterior.map_segmentation[1:-1]
    )
    return {
        "posterior": post,
        "model": result.export_model().to_dict(),
        "config": cfg_echo,
    }


def _emit_fit_tsvs(out: Path, x: np.ndarray, posterior) -> None:
    rows = []
    for p, probs in sorted(posterior.boundary_marginals.items()):
        for h in np.nonzero(probs >= 1e-12)[0]:
            rows.append((p, int(h), repr(float(probs[h]))))
    _write_tsv(out / "boundary_marginals.tsv", ["p", "h", "prob"], rows)
    mean = np.atleast_2d(posterior.bayes_mean)
    var = np.atleast_2d(posterior.bayes_var)
    rows = []
    for s in range(mean.shape[0]):
        for t in range(mean.shape[1]):
            rows.append((s, t + 1, repr(float(x[t])), repr(float(mean[s, t])), repr(float(var[s, t]))))
    _write_tsv(out / "bayes_curve.tsv", ["subject", "index", "x", "mean", "var"], rows)


@main.command("fit")
@_with_config_opts
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
@click.option("--groups-file", type=click.Path(exists=True), default=None)
@click.option("--block-method", type=click.Choice(("closed",) + GLM_METHODS), default=None)
@click.option("--out-dir", default="bayesbreak-out")
@_guarded
def cmd_fit(config_path, family, k_max, g, p_k, seed, data_path, fmt, groups_file,
            block_method, out_dir):
    """Fit the segmentation posterior and export fit JSON plus plot TSVs."""
    cfg = build_config(config_path, family, k_max, g, p_k, block_method, seed)
    fam = cfg.family()
    prior = cfg.prior_spec()
    dataset = _load_dataset(data_path, fmt, fam.name, groups_file)
    out = _out_dir(out_dir)
    echo = {"seed": cfg.seed, "family": fam.to_config(), "prior": cfg.prior_cfg,
            "block_method": cfg.block_method}

    if cfg.block_method != "closed":
        if dataset.n_subjects != 1:
            raise ConfigError("approximate block methods support single-subject data")
        if fam.name != "binomial":
            raise ConfigError("approximate block methods apply to the binomial/logistic model")
        seq = dataset.subjects[0]
        table = logistic_table(
            seq.y, seq.w, None, seq.grid, cfg.glm_prior(), cfg.block_method
        ).absorb(prior.length_factor)
        normalizers = compute_normalizers(seq.grid, prior.length_factor, prior.k_max)
        msgs, log_ev, post_k, k_hat, marginals, event, map_res = dp_summaries(
            table, prior, normalizers
        )
        mean, var = bayes_curve(msgs, table, k_hat)
        seg_m, seg_v = segment_moments_fixed(table, map_res.boundaries)
        from .engine import SegmentationPosterior

        posterior = SegmentationPosterior(
            log_evidence_per_k=log_ev, post_k=post_k, k_hat=k_hat,
            boundary_marginals=marginals, boundary_event=event,
            bayes_mean=mean, bayes_var=var,
            map_segmentation=map_res.boundaries, map_score=map_res.score,
            segment_means=seg_m, segment_vars=seg_v,
        )
        post = posterior.to_dict()
        post["map_boundaries_x"] = _boundary_x(seq.x, map_res.boundaries[1:-1])
        _write_json(out / "fit.json", {"posterior": post, "model": None, "config": echo})
        _emit_fit_tsvs(out, seq.x, posterior)
        click.echo(f"wrote {out / 'fit.json'}")
        return

    if dataset.group_labels is not None:
        fits = fit_known_groups(dataset, fam, prior)
        groups_payload = {}
        for gidx, res in sorted(fits.items()):
            post = res.posterior.to_dict()
            post["map_boundaries_x"] = _boundary_x(
                dataset.grid, res.posterior.map_segmentation[1:-1]
            )
            groups_payload[str(gidx)] = {
                "posterior": post,
                "model": res.export_model(label=gidx).to_dict(),
            }
        _write_json(out / "fit.json", {"groups": groups_payload, "config": echo})
        click.echo(f"wrote {out / 'fit.json'} ({len(fits)} groups)")
        return

    if dataset.n_subjects == 1:
        result = fit_sequence(dataset.subjects[0], fam, prior)
        _write_json(out / "fit.json", _fit_payload(result, echo))
        _emit_fit_tsvs(out, dataset.grid, result.posterior)
    else:
        result = fit_pooled(list(dataset.subjects), fam, prior)
        post = result.posterior.to_dict()
        post["map_boundaries_x"] = _boundary_x(
            dataset.grid, result.posterior.map_segmentation[1:-1]
        )
        _write_json(
            out / "fit.json",
            {"posterior": post, "model": result.export_model().to_dict(), "config": echo},
        )
        _emit_fit_tsvs(out, dataset.grid, result.posterior)
    click.echo(f"wrote {out / 'fit.json'}")


@main.command("em")
@_with_config_opts
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
@click.option("--groups", "n_groups", type=int, required=True, help="Number of latent groups.")
@click.option("--restarts", type=int, default=None)
@click.option("--out-dir", default="bayesbreak-out")
@_guarded
def cmd_em(config_path, family, k_max, g, p_k, seed, data_path, fmt, n_groups, restarts, out_dir):
    """Latent-group template EM; emits EM JSON and responsibility heat data."""
    cfg = build_config(config_path, family, k_max, g, p_k, None, seed, groups=n_groups)
    fam = cfg.family()
    prior = cfg.prior_spec()
    dataset = _load_dataset(data_path, fmt, fam.name, None)
    em_cfg = EmConfig(
        n_groups=int(cfg.em_cfg.get("groups", n_groups)),
        restarts=int(restarts if restarts is not None else cfg.em_cfg.get("restarts", 5)),
        tol=float(cfg.em_cfg.get("tol", 1e-8)),
        max_iter=int(cfg.em_cfg.get("max_iter", 200)),
        scale_count_offset=bool(cfg.em_cfg.get("scale_count_offset", False)),
        seed=cfg.seed,
    )
    state = em_fit(dataset, fam, prior, em_cfg)
    out = _out_dir(out_dir)
    payload = state.to_dict(grid=dataset.grid)
    payload["config"] = {"seed": cfg.seed, "family": fam.to_config(), "prior": cfg.prior_cfg,
                         "em": {"groups": em_cfg.n_groups, "restarts": em_cfg.restarts}}

    hard = state.hard_assignments()
    rows = [
        (s, gidx, repr(float(state.resp[s, gidx])))
        for s in range(state.resp.shape[0])
        for gidx in range(state.resp.shape[1])
    ]
    _write_tsv(out / "responsibilities.tsv", ["subject", "group", "resp"], rows)

    marg_rows = []
    models_payload = {}
    for gidx in range(em_cfg.n_groups):
        members = [i for i, a in enumerate(hard) if a == gidx]
        if not members:
            continue
        res = fit_pooled([dataset.subjects[i] for i in members], fam, prior, group=gidx)
        for h, prob in enumerate(res.posterior.boundary_event, start=1):
            if prob >= 1e-12:
                marg_rows.append((gidx, h, repr(float(prob))))
        models_payload[str(gidx)] = res.export_model(label=gidx).to_dict()
    _write_tsv(out / "group_boundary_marginals.tsv", ["group", "h", "prob"], marg_rows)
    payload["group_models"] = models_payload
    _write_json(out / "em.json", payload)
    click.echo(f"wrote {out / 'em.json'} (final loglik {state.obs_loglik:.6f})")


def _load_models(model_paths) -> list[ExportedModel]:
    models = []
    for path in model_paths:
        with open(path) as fh:
            payload = json.load(fh)
        if "model" in payload and payload["model"]:
            models.append(ExportedModel.from_dict(payload["model"]))
        elif "group_models" in payload or "groups" in payload:
            groups = payload.get("group_models") or {
                k: v["model"] for k, v in payload["groups"].items()
            }
            for key in sorted(groups, key=lambda s: int(s)):
                models.append(ExportedModel.from_dict(groups[key]))
        elif "segments" in payload:
            models.append(ExportedModel.from_dict(payload))
        else:
            raise InputError(f"{path}: no exported model found")
    return models


@main.command("predict")
@click.option("--model", "model_paths", multiple=True, required=True,
              type=click.Path(exists=True), help="Fit/EM/model JSON (repeatable).")
@click.option("--data", "data_path", type=click.Path(exists=True), default=None)
@click.option("--units", "units_path", type=click.Path(exists=True), default=None,
              help="JSON list of set-valued units.")
@click.option("--mode", type=click.Choice(["score", "signal-map", "signal-bayes"]),
              default="score")
@click.option("--pi", default=None, help="Comma-separated group prior weights.")
@click.option("--out-dir", default="bayesbreak-out")
@_guarded
def cmd_predict(model_paths, data_path, units_path, mode, pi, out_dir):
    """Score new data against exported models, or evaluate fitted signals."""
    models = _load_models(model_paths)
    out = _out_dir(out_dir)
    prior = [float(v) for v in pi.split(",")] if pi else None

    if mode == "score":
        if units_path:
            with open(units_path) as fh:
                raw_units = json.load(fh)
            units = []
            for rec in raw_units:
                pts = np.asarray(rec["points"], float)
                w = pts[:, 2] if pts.shape[1] > 2 else np.ones(len(pts))
                units.append(PredictionUnit(tuple(rec["support"]), pts[:, 0], pts[:, 1], w))
            result = score_units(units, models, prior)
        else:
            if data_path is None:
                raise InputError("--data or --units is required for score mode")
            family_name = models[0].family["name"]
            dataset = _load_dataset(data_path, None, family_name, None)
            seq = dataset.subjects[0]
            result = score_pointwise(seq.x, seq.y, seq.w, models, prior)
        _write_json(out / "prediction.json", result.to_dict())
        click.echo(f"wrote {out / 'prediction.json'}")
        return

    if data_path is None:
        raise InputError("--data with query x values is required for signal modes")
    with open(data_path) as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "x" not in reader.fieldnames:
            raise InputError(f"{data_path}: expected a CSV with an x column")
        queries = np.array([float(rec["x"]) for rec in reader])
    payload = {"queries": queries.tolist(), "models": {}}
    for gidx, model in enumerate(models):
        if mode == "signal-map":
            values, clamped = predict_map_signal(model, queries)
            payload["models"][str(gidx)] = {
                "value": values.tolist(),
                "clamped": [bool(c) for c in clamped],
            }
        else:
            values, variances = predict_bayes_signal(model, queries)
            payload["models"][str(gidx)] = {
                "value": values.tolist(),
                "var": variances.tolist(),
            }
    _write_json(out / "prediction.json", payload)
    click.echo(f"wrote {out / 'prediction.json'}")


@main.command("verify")
@click.option("--seed", type=int, default=0)
@click.option("--instances", type=int, default=25, help="Instances per family.")
@click.option("--families", default="gaussian,poisson,binomial,betaobs")
@click.option("--corrupt", is_flag=True, help="Negative control: inject a table perturbation.")
@click.option("--out-dir", default=None)
@_guarded
def cmd_verify(seed, instances, families, corrupt, out_dir):
    """Cross-check the DP against brute-force enumeration; exit 4 on mismatch."""
    fams = tuple(f.strip() for f in families.split(",") if f.strip())
    report = run_verification(seed, instances, fams, corrupt=corrupt)
    payload = report.to_dict()
    click.echo(json.dumps(payload, indent=1, sort_keys=True))
    if out_dir:
        _write_json(_out_dir(out_dir) / "verify.json", payload)
    if not report.ok:
        sys.exit(EXIT_VERIFY)


def _time_fit(n: int, k_max: int, reps: int, rng: np.random.Generator, backend: str):
    from .families import GaussianFamily

    bounds = [n // 3, 2 * n // 3]
    seq, _ = simulate_sequence("gaussian", n, bounds, (0.0, 2.0, 0.0), rng, sigma=1.0)
    fam_prior = PriorSpec(k_max=k_max)
    fam = GaussianFamily()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        table = precompute_blocks(seq, fam, fam_prior.length_factor)
        normalizers = compute_normalizers(seq.grid, fam_prior.length_factor, k_max)
        msgs, _, _, k_hat, _, _, _ = dp_summaries(table, fam_prior, normalizers, backend)
        bayes_curve(msgs, table, k_hat, backend)
        times.append(time.perf_counter() - t0)
    return float(np.mean(times)), float(np.std(times))


@main.command("benchmark")
@click.option("--sizes", default="50,100,200,400")
@click.option("--k-max", "k_max_list", default="10,20")
@click.option("--reps", type=int, default=3)
@click.option("--seed", type=int, default=0)
@click.option("--compare-backends", is_flag=True,
              help="Time both the numba and pure-numpy kernel paths.")
@click.option("--tradeoff", is_flag=True,
              help="Approximate-block-method accuracy/time table instead of scaling.")
@click.option("--out-dir", default="bayesbreak-out")
@_guarded
def cmd_benchmark(sizes, k_max_list, reps, seed, compare_backends, tradeoff, out_dir):
    """Runtime-scaling grid (or the block-method trade-off table)."""
    out = _out_dir(out_dir)
    if tradeoff:
        rows = _tradeoff_rows(seed)
        _write_tsv(out / "tradeoff.tsv",
                   ["method", "mean_abs_dlogev", "boundary_f1", "wall_time_s"], rows)
        click.echo(f"wrote {out / 'tradeoff.tsv'}")
        return
    ns = [int(v) for v in sizes.split(",")]
    kms = [int(v) for v in k_max_list.split(",")]
    backends = list(_kernels.available_backends()) if compare_backends else [_kernels.ACTIVE_BACKEND]
    rows = []
    for backend in backends:
        _kernels.warmup(backend)
        for n in ns:
            for km in kms:
                rng = np.random.default_rng(seed)
                mean_s, sd_s = _time_fit(n, km, reps, rng, backend)
                rows.append((backend, n, km, repr(mean_s), repr(sd_s)))
                click.echo(f"{backend} n={n} k_max={km}: {mean_s:.4f}s +- {sd_s:.4f}")
    _write_tsv(out / "timings.tsv", ["backend", "n", "k_max", "mean_s", "sd_s"], rows)
    click.echo(f"wrote {out / 'timings.tsv'}")


def _tradeoff_rows(seed: int):
    from .glm import GaussianPrior

    rng = np.random.default_rng(seed)
    n = 40
    bounds = [13, 27]
    probs = (0.2, 0.8, 0.3)
    seg = np.zeros(n, dtype=int)
    seg[bounds[0]:bounds[1]] = 1
    seg[bounds[1]:] = 2
    m = np.full(n, 8.0)
    y = rng.binomial(8, np.asarray(probs)[seg]).astype(float)
    grid = np.arange(n + 1, dtype=float)
    prior = PriorSpec(k_max=5)
    gauss = GaussianPrior(0.0, 4.0)
    normalizers = compute_normalizers(grid, prior.length_factor, prior.k_max)
    tables = {}
    times = {}
    for method in GLM_METHODS:
        t0 = time.perf_counter()
        tables[method] = logistic_table(y, m, None, grid, gauss, method)
        times[method] = time.perf_counter() - t0
    ref = tables["quadrature"].log_a0
    upper = np.triu_indices(n + 1, k=1)
    rows = []
    for method in GLM_METHODS:
        err = float(np.mean(np.abs(tables[method].log_a0[upper] - ref[upper])))
        table = tables[method].absorb(prior.length_factor)
        _, _, _, k_hat, _, _, map_res = dp_summaries(table, prior, normalizers)
        f1 = boundary_f1(map_res.boundaries[1:-1].tolist(), bounds, tol=2)
        rows.append((method, repr(err), repr(f1), repr(times[method])))
    return rows


@main.command("calibrate")
@click.option("--reps", type=int, default=200)
@click.option("--n", "n_points", type=int, default=100)
@click.option("--sigma", type=float, default=1.0)
@click.option("--snr", type=float, default=4.0)
@click.option("--k-max", type=int, default=6)
@click.option("--seed", type=int, default=0)
@click.option("--out-dir", default="bayesbreak-out")
@_guarded
def cmd_calibrate(reps, n_points, sigma, snr, k_max, seed, out_dir):
    """Reliability of boundary posterior probabilities on repeated simulations."""
    probs, outcomes = calibration_run(reps, n_points, sigma, snr, k_max, seed)
    out = _out_dir(out_dir)
    rows = [
        (b, count, "" if count == 0 else repr(conf), "" if count == 0 else repr(freq))
        for b, count, conf, freq in calibration_bins(probs, outcomes)
    ]
    _write_tsv(out / "reliability.tsv", ["bin", "count", "confidence", "frequency"], rows)
    summary = {
        "reps": reps,
        "n": n_points,
        "sigma": sigma,
        "snr": snr,
        "seed": seed,
        "ece": ece(probs, outcomes),
        "bin_rank_correlation": bin_rank_correlation(probs, outcomes),
    }
    _write_json(out / "calibration.json", summary)
    click.echo(json.dumps({k: summary[k] for k in ("ece", "bin_rank_correlation")}))


def calibration_run(reps, n_points, sigma, snr, k_max, seed):
    """Predicted boundary probabilities vs true-boundary indicators.

    The prediction marginalizes boundary-event probabilities over P(k | y).
    """
    from .engine import forward_backward, posterior_k
    from .families import GaussianFamily
    from .priors import CountPrior

    rng = np.random.default_rng(seed)
    fam = GaussianFamily(nu=0.0, rho2=(snr * sigma) ** 2, sigma2=sigma**2)
    prior = PriorSpec(k_max=k_max)
    count_prior = CountPrior.uniform(k_max)
    delta = snr * sigma
    probs, outcomes = [], []
    normalizers = None
    for _ in range(reps):
        bounds = random_boundaries(rng, n_points, 3, min_sep=8)
        seq, _ = simulate_sequence(
            "gaussian", n_points, bounds, (0.0, delta, 0.0), rng, sigma=sigma
        )
        table = precompute_blocks(seq, fam, prior.length_factor)
        if normalizers is None:
            normalizers = compute_normalizers(seq.grid, prior.length_factor, k_max)
        msgs = forward_backward(table, k_max)
        _, post_k, _ = posterior_k(msgs, normalizers, count_prior)
        event = np.zeros(n_points - 1)
        for k in range(2, k_max + 1):
            if post_k[k] > 0:
                event += post_k[k] * boundary_event_probs(msgs, k)
        true_set = set(int(b) for b in bounds)
        for h in range(1, n_points):
            probs.append(min(event[h - 1], 1.0))
            outcomes.append(1.0 if h in true_set else 0.0)
    return np.asarray(probs), np.asarray(outcomes)


@main.command("simulate")
@click.option("--family", default="gaussian",
              type=click.Choice(["gaussian", "poisson", "binomial", "betaobs"]))
@click.option("--n", "n_points", type=int, default=100)
@click.option("--segments", type=int, default=3)
@click.option("--boundaries", default=None, help="Comma-separated interior indices.")
@click.option("--levels", default=None, help="Comma-separated per-segment parameters.")
@click.option("--strength", type=float, default=4.0, help="Jump size knob for auto levels.")
@click.option("--sigma", type=float, default=1.0)
@click.option("--trials", type=int, default=10)
@click.option("--phi", type=float, default=20.0)
@click.option("--min-sep", type=int, default=5)
@click.option("--seed", type=int, default=0)
@click.option("--out-dir", default="bayesbreak-out")
@_guarded
def cmd_simulate(family, n_points, segments, boundaries, levels, strength, sigma, trials,
                 phi, min_sep, seed, out_dir):
    """Generate synthetic piecewise-constant data plus a ground-truth record."""
    rng = np.random.default_rng(seed)
    if boundaries:
        bounds = [int(v) for v in boundaries.split(",")]
    else:
        bounds = random_boundaries(rng, n_points, segments, min_sep=min_sep).tolist()
    if levels:
        levs = [float(v) for v in levels.split(",")]
    else:
        base = two_jump_levels(family, strength)
        levs = [base[q % 2] for q in range(len(bounds) + 1)]
        if len(levs) == 3:
            levs = list(base)
    seq, truth = simulate_sequence(
        family, n_points, bounds, levs, rng, sigma=sigma, trials=trials, phi=phi
    )
    out = _out_dir(out_dir)
    rows = [(0, repr(float(x)), _fmt_y(family, y), repr(float(w)))
            for x, y, w in zip(seq.x, seq.y, seq.w)]
    with open(out / "data.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject", "x", "y", "w"])
        writer.writerows(rows)
    payload = truth.to_dict()
    payload["seed"] = seed
    _write_json(out / "truth.json", payload)
    click.echo(f"wrote {out / 'data.csv'} and {out / 'truth.json'}")


def _fmt_y(family: str, y: float) -> str:
    if family in ("poisson", "binomial"):
        return str(int(y))
    return repr(float(y))


if __name__ == "__main__":
    main()
