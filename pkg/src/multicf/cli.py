"""Command-line entry point: gen, train, predict, eval, blend, bench.

Every command takes flags, an optional key=value --config file, and writes
its artifacts plus the fully resolved configuration into --outdir. Explicit
flags override config-file values, which override defaults. Exit codes:
0 success, 1 usage, 2 data/parse, 3 numeric/divergence.
"""
from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click
import numpy as np
from click.core import ParameterSource

from . import factor, mfitr, neighborhood, registry, reporting
from .blending import ModelSpec, two_phase_pipeline
from .data import DEFAULT_SCALE, Dataset, ScoreScale, TimeBinner, load_ratings, save_ratings
from .errors import ConfigError, DataError, NumericError
from .evaluation import compare, load_predictions, rmse, save_predictions
from .modelio import load_model, save_model
from .parallel import bench as run_bench
from .synth import SynthConfig, config_from_dict, generate_synthetic, parse_bool
from .taxonomy import load_taxonomy, save_taxonomy

_INT_KEYS = {"users", "artists", "albums_per_artist", "tracks_per_album",
             "ratings_per_user", "dim", "seed", "threads", "iters", "d", "dt",
             "knn_k", "knn_parts", "tmin", "tmax", "bins", "bench_epochs"}
_FLOAT_KEYS = {"noise", "split_train", "split_valid", "split_test", "gamma",
               "decay", "lam", "lambda1", "lambda2", "lambda3", "lambda4",
               "lambda5", "knn_beta", "ridge_lambda"}
_BOOL_KEYS = {"drift", "coherent_taxonomy", "intercept"}


def read_config_file(path) -> dict:
    """Parse a key=value file ('#' comments allowed)."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key=value")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _coerce(key: str, raw: str):
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _BOOL_KEYS:
        return parse_bool(raw)
    return raw


def resolve(ctx, config: dict, params: dict) -> dict:
    """Apply precedence: explicit flag > config file > default."""
    out = {}
    for name, value in params.items():
        src = ctx.get_parameter_source(name)
        explicit = src in (ParameterSource.COMMANDLINE, ParameterSource.ENVIRONMENT)
        if not explicit and name in config:
            out[name] = _coerce(name, config[name])
        else:
            out[name] = value
    return out


def echo_config(outdir: Path, params: dict) -> None:
    lines = []
    for key in sorted(params):
        value = params[key]
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key}={value}")
    with open(outdir / "resolved.cfg", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def common_options(fn):
    fn = click.option("--outdir", required=True, type=click.Path(file_okay=False),
                      help="Output directory for all artifacts.")(fn)
    fn = click.option("--seed", default=0, show_default=True, type=int)(fn)
    fn = click.option("--threads", default=1, show_default=True, type=int)(fn)
    fn = click.option("--config", "config_path", default=None,
                      type=click.Path(exists=True, dir_okay=False),
                      help="key=value config file; flags override it.")(fn)
    return fn


def _prepare_outdir(outdir) -> Path:
    path = Path(outdir)
    path.mkdir(parents=True, exist_ok=True)
    return path


@click.group()
def cli():
    """Multicore collaborative filtering engine."""


# ---------------------------------------------------------------------------
@cli.command("gen")
@common_options
@click.option("--users", default=1000, show_default=True, type=int)
@click.option("--artists", default=40, show_default=True, type=int)
@click.option("--albums-per-artist", default=3, show_default=True, type=int)
@click.option("--tracks-per-album", default=5, show_default=True, type=int)
@click.option("--ratings-per-user", default=40, show_default=True, type=int)
@click.option("--dim", default=16, show_default=True, type=int)
@click.option("--noise", default=8.0, show_default=True, type=float)
@click.option("--drift/--no-drift", default=True, show_default=True)
@click.option("--coherent-taxonomy/--no-coherent-taxonomy", default=True, show_default=True)
@click.option("--split-train", default=0.8, show_default=True, type=float)
@click.option("--split-valid", default=0.1, show_default=True, type=float)
@click.option("--split-test", default=0.1, show_default=True, type=float)
@click.pass_context
def cmd_gen(ctx, outdir, seed, threads, config_path, **flags):
    """Generate a planted synthetic dataset plus taxonomy and manifest."""
    config = read_config_file(config_path) if config_path else {}
    params = resolve(ctx, config, dict(flags, seed=seed, threads=threads))
    out = _prepare_outdir(outdir)
    synth_keys = {k: params[k] for k in
                  ("users", "artists", "albums_per_artist", "tracks_per_album",
                   "ratings_per_user", "dim", "noise", "drift", "coherent_taxonomy",
                   "split_train", "split_valid", "split_test", "seed")}
    cfg = config_from_dict({k: str(v) for k, v in synth_keys.items()})
    train, valid, test, graph = generate_synthetic(cfg, cfg.seed)
    save_ratings(train, out / "ratings_train.tsv")
    save_ratings(valid, out / "ratings_validation.tsv")
    save_ratings(test, out / "ratings_test.tsv")
    save_taxonomy(graph, out / "taxonomy.txt")
    t_all = [d for d in (train, valid, test) if len(d)]
    manifest = {
        "num_users": train.num_users,
        "num_items": train.num_items,
        "counts": {"train": len(train), "validation": len(valid), "test": len(test)},
        "t_min": min(d.t_min for d in t_all) if t_all else 0,
        "t_max": max(d.t_max for d in t_all) if t_all else 0,
        "scale": [train.scale.lo, train.scale.hi],
        "files": {"train": "ratings_train.tsv", "validation": "ratings_validation.tsv",
                  "test": "ratings_test.tsv", "taxonomy": "taxonomy.txt"},
        "config": synth_keys,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    echo_config(out, params)
    click.echo(f"wrote {len(train)}/{len(valid)}/{len(test)} ratings to {out}")


# ---------------------------------------------------------------------------
_HYPER_FLAGS = ("gamma", "decay", "lam", "lambda1", "lambda2", "lambda3",
                "lambda4", "lambda5", "iters", "d", "dt")


def hyper_options(fn):
    fn = click.option("--gamma", default=None, type=float, help="Learning rate.")(fn)
    fn = click.option("--decay", default=None, type=float,
                      help="Per-epoch learning-rate multiplier.")(fn)
    fn = click.option("--lambda", "lam", default=None, type=float,
                      help="Regularization (single-lambda models).")(fn)
    fn = click.option("--lambda1", default=None, type=float)(fn)
    fn = click.option("--lambda2", default=None, type=float)(fn)
    fn = click.option("--lambda3", default=None, type=float)(fn)
    fn = click.option("--lambda4", default=None, type=float)(fn)
    fn = click.option("--lambda5", default=None, type=float)(fn)
    fn = click.option("--iters", default=None, type=int, help="Epoch count.")(fn)
    fn = click.option("--d", default=None, type=int, help="Factor dimension D.")(fn)
    fn = click.option("--dt", default=None, type=int, help="Time factor dimension.")(fn)
    return fn


def build_hyper(kind: str, params: dict):
    """Kind-appropriate hyperparameters from defaults plus resolved overrides."""
    hyper = registry.default_hyper(kind)
    updates = {}
    if kind in registry.KNN_KINDS:
        mapping = {"knn_k": "K", "knn_parts": "num_parts", "knn_beta": "beta"}
    elif kind in registry.TAXONOMY_KINDS:
        mapping = {"gamma": "gamma", "decay": "decay", "lambda1": "lam1",
                   "lambda2": "lam2", "lambda3": "lam3", "lambda4": "lam4",
                   "lambda5": "lam5", "iters": "iters", "d": "D", "dt": "D_t"}
    else:
        mapping = {"gamma": "gamma", "decay": "decay", "lam": "lam",
                   "lambda1": "lam1", "lambda2": "lam2", "lambda3": "lam3",
                   "iters": "iters", "d": "D", "dt": "D_t"}
    for flag, field in mapping.items():
        if params.get(flag) is not None:
            updates[field] = params[flag]
    return dataclasses.replace(hyper, **updates)


def _make_binner(params: dict, datasets) -> TimeBinner:
    datasets = [d for d in datasets if d is not None and len(d)]
    t_min = params.get("tmin")
    t_max = params.get("tmax")
    if t_min is None:
        t_min = min(d.t_min for d in datasets) if datasets else 0
    if t_max is None:
        t_max = max(d.t_max for d in datasets) if datasets else 0
    return TimeBinner(int(t_min), int(t_max), int(params.get("bins") or 30))


@cli.command("train")
@common_options
@hyper_options
@click.option("--kind", required=True, type=click.Choice(registry.ALL_KINDS))
@click.option("--train", "train_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--valid", "valid_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--taxonomy", "taxonomy_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--weights", "weights_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Per-rating weight file (one weight per training line).")
@click.option("--knn-k", default=None, type=int, help="Neighbors per item.")
@click.option("--knn-parts", default=None, type=int, help="Item blocks per build.")
@click.option("--knn-beta", default=None, type=float, help="Time-decay rate.")
@click.option("--tmin", default=None, type=int, help="Time-binner lower bound.")
@click.option("--tmax", default=None, type=int, help="Time-binner upper bound.")
@click.option("--bins", default=None, type=int, help="Number of time bins.")
@click.option("--model-out", default="model.bin", show_default=True)
@click.pass_context
def cmd_train(ctx, outdir, seed, threads, config_path, **flags):
    """Train one model kind and persist it with a per-epoch report."""
    config = read_config_file(config_path) if config_path else {}
    params = resolve(ctx, config, dict(flags, seed=seed, threads=threads))
    kind = params["kind"]
    if kind in registry.TAXONOMY_KINDS and not params.get("taxonomy_path"):
        raise click.UsageError(f"--taxonomy is required for kind {kind}")
    out = _prepare_outdir(outdir)
    train_data = load_ratings(params["train_path"], split="train")
    valid_data = (load_ratings(params["valid_path"], split="validation")
                  if params.get("valid_path") else None)
    taxonomy = (load_taxonomy(params["taxonomy_path"])
                if params.get("taxonomy_path") else None)
    weights = None
    if params.get("weights_path"):
        weights = np.loadtxt(params["weights_path"], ndmin=1)
    hyper = build_hyper(kind, params)
    binner = _make_binner(params, [train_data, valid_data])
    trained = registry.train_model(kind, train_data, hyper=hyper, seed=params["seed"],
                                   validation=valid_data, taxonomy=taxonomy,
                                   binner=binner, threads=params["threads"],
                                   weights=weights)
    save_model(trained.model, out / params["model_out"])
    if trained.report:
        reporting.save_epoch_report(out, trained.report)
    echo_config(out, params)
    last = trained.report[-1].valid_rmse if trained.report else float("nan")
    click.echo(f"trained {kind}; model at {out / params['model_out']}"
               + (f"; final valid RMSE {last:.4f}" if last == last else ""))


# ---------------------------------------------------------------------------
@cli.command("predict")
@common_options
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Rating file whose keys are scored (scores ignored).")
@click.option("--train", "train_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Training split used for rated-set context (kNN, SVD++).")
@click.option("--knn-beta", default=0.0, show_default=True, type=float)
@click.pass_context
def cmd_predict(ctx, outdir, seed, threads, config_path, **flags):
    """Score every (user, item, time) key of a rating file with a saved model."""
    config = read_config_file(config_path) if config_path else {}
    params = resolve(ctx, config, dict(flags, seed=seed, threads=threads))
    out = _prepare_outdir(outdir)
    model = load_model(params["model_path"])
    data = load_ratings(params["data_path"], split="predict")
    context = (load_ratings(params["train_path"], split="train")
               if params.get("train_path") else None)
    if isinstance(model, neighborhood.NeighborTable):
        if context is None:
            raise click.UsageError("--train is required for neighbor-table models")
        pred = neighborhood.predict_knn_batch(data.users, data.items, data.times,
                                              model, context,
                                              beta=params["knn_beta"])
        scale = context.scale
    elif isinstance(model, mfitr.MfitrModel):
        pred = mfitr.predict_batch(model, data.users, data.items, data.times)
        scale = model.scale
    else:
        if model.implicit_on and context is None:
            raise click.UsageError("--train is required for implicit-feedback models")
        pred = factor.predict_batch(model, data.users, data.items, data.times, context)
        scale = model.scale
    save_predictions(out / "predictions.tsv", data.users, data.items, data.times,
                     pred, scale=scale)
    echo_config(out, params)
    click.echo(f"wrote {len(data)} predictions to {out / 'predictions.tsv'}")


# ---------------------------------------------------------------------------
@cli.command("eval")
@common_options
@click.option("--pred", "preds", multiple=True, required=True,
              help="Prediction file, optionally name=path.")
@click.option("--truth", "truth_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def cmd_eval(ctx, outdir, seed, threads, config_path, preds, truth_path):
    """Key-aligned RMSE comparison of prediction files against a truth file."""
    out = _prepare_outdir(outdir)
    named = []
    for spec in preds:
        if "=" in spec:
            name, _, path = spec.partition("=")
        else:
            name, path = Path(spec).stem, spec
        named.append((name, path))
    report = compare(named, truth_path)
    reporting.save_eval_report(out, report)
    echo_config(out, {"pred": ",".join(p for _, p in named), "truth": truth_path,
                      "seed": seed, "threads": threads})
    for name, err, count in report.rows:
        click.echo(f"{name}\trmse {err:.6f}\t({count} points)")


# ---------------------------------------------------------------------------
def parse_spec(text: str, index: int, default_seed: int) -> ModelSpec:
    """Parse 'kind' or 'name=kind' or 'kind:key=val,...' model specs."""
    name = None
    head, _, tail = text.partition(":")
    if "=" in head:
        name, _, head = head.partition("=")
    kind = head.strip()
    if kind not in registry.ALL_KINDS:
        raise click.UsageError(f"unknown model kind {kind!r} in spec {text!r}")
    params = {}
    seed = default_seed
    if tail:
        for kv in tail.split(","):
            key, _, value = kv.partition("=")
            key = key.strip()
            if not value:
                raise click.UsageError(f"bad spec entry {kv!r} in {text!r}")
            if key == "seed":
                seed = int(value)
            else:
                params[key] = _coerce(key, value)
    hyper = build_hyper(kind, params)
    return ModelSpec(name or kind, kind, hyper, seed)


@cli.command("blend")
@common_options
@click.option("--spec", "specs", multiple=True, required=True,
              help="Model spec: kind[:key=val,...], repeatable.")
@click.option("--train", "train_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--valid", "valid_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--test", "test_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--taxonomy", "taxonomy_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--ridge-lambda", default=None, type=float,
              help="Fixed ridge regularization; cross-validated when omitted.")
@click.option("--tmin", default=None, type=int)
@click.option("--tmax", default=None, type=int)
@click.option("--bins", default=None, type=int)
@click.pass_context
def cmd_blend(ctx, outdir, seed, threads, config_path, specs, **flags):
    """Two-phase pipeline: fit ridge weights on validation predictions, retrain
    on train+validation, emit combined test predictions."""
    config = read_config_file(config_path) if config_path else {}
    params = resolve(ctx, config, dict(flags, seed=seed, threads=threads))
    out = _prepare_outdir(outdir)
    train_data = load_ratings(params["train_path"], split="train")
    valid_data = load_ratings(params["valid_path"], split="validation")
    test_data = load_ratings(params["test_path"], split="test")
    taxonomy = (load_taxonomy(params["taxonomy_path"])
                if params.get("taxonomy_path") else None)
    model_specs = [parse_spec(s, n, params["seed"]) for n, s in enumerate(specs)]
    if any(s.kind in registry.TAXONOMY_KINDS for s in model_specs) and taxonomy is None:
        raise click.UsageError("--taxonomy is required for taxonomy-regularized specs")
    binner = _make_binner(params, [train_data, valid_data, test_data])
    final, weights, report = two_phase_pipeline(
        model_specs, train_data, valid_data, test_data,
        lam=params.get("ridge_lambda"), threads=params["threads"],
        taxonomy=taxonomy, binner=binner, cv_seed=params["seed"])
    save_predictions(out / "predictions.tsv", test_data.users, test_data.items,
                     test_data.times, final, scale=train_data.scale)
    reporting.save_blend_report(out, report)
    echo_config(out, dict(params, spec=";".join(specs), ridge_lambda=report.lam))
    click.echo(f"blend lam={report.lam:g}; validation RMSE {report.blend_rmse:.4f}; "
               f"test predictions at {out / 'predictions.tsv'}")


# ---------------------------------------------------------------------------
@cli.command("bench")
@common_options
@click.option("--train", "train_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--valid", "valid_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--bench-algos", default="als,sgd", show_default=True,
              help="Comma-separated algorithms to benchmark.")
@click.option("--bench-threads", default="1,2,4", show_default=True,
              help="Comma-separated thread counts.")
@click.option("--bench-dims", default="25,50,100", show_default=True,
              help="Comma-separated factor dimensions for the D sweep.")
@click.option("--bench-epochs", default=3, show_default=True, type=int)
@click.pass_context
def cmd_bench(ctx, outdir, seed, threads, config_path, **flags):
    """Iteration-time benchmark across thread counts and factor dimensions."""
    config = read_config_file(config_path) if config_path else {}
    params = resolve(ctx, config, dict(flags, seed=seed, threads=threads))
    out = _prepare_outdir(outdir)
    train_data = load_ratings(params["train_path"], split="train")
    valid_data = load_ratings(params["valid_path"], split="validation")
    algos = [a.strip() for a in str(params["bench_algos"]).split(",") if a.strip()]
    for algo in algos:
        if algo not in factor.FACTOR_KINDS:
            raise click.UsageError(f"cannot benchmark kind {algo!r}")
    thread_counts = [int(t) for t in str(params["bench_threads"]).split(",") if t.strip()]
    dims = [int(d) for d in str(params["bench_dims"]).split(",") if d.strip()]
    report = run_bench(algos, thread_counts, dims, train_data, valid_data,
                       seed=params["seed"], epochs=params["bench_epochs"])
    reporting.save_bench_report(out, report)
    echo_config(out, params)
    for line in report.tsv_lines():
        click.echo(line)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except (DataError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except NumericError as exc:
        click.echo(f"numeric error: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
