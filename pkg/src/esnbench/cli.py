"""Command-line front end: ``esnbench synth|select|fit|compare|roc``.

Every command takes ``--seed``; sub-seeds for data generation, fold
assignment and reservoir initialisation are derived from it with
:func:`esnbench.numkit.derive_seed`, so one value reproduces a whole run.

A YAML/JSON ``--config`` file may hold option defaults, either flat
(``folds: 5``) or per command (``compare: {folds: 5}``). Flags given on the
command line win.

Exit codes: 0 ok, 2 invalid configuration, 3 data loading error, 4 model
fitting error.
"""
from __future__ import annotations

import csv
import functools
import logging
from pathlib import Path

import click
import numpy as np
import yaml

from . import glm, reservoir
from .dataio import (
    DataError,
    Dataset,
    SynthSpec,
    apply_standardization,
    load_csv,
    save_csv,
    save_ground_truth,
    standardize,
    synth_generate,
)
from .glm import FitError
from .numkit import derive_seed
from .pipeline import CompareSettings, run_compare, write_folds, write_metrics
from .report import compare_text, emit_roc, read_roc, roc_svg
from .stepwise import SelectionError, backward_select, read_survivors, write_survivors, write_trace

log = logging.getLogger("esnbench")

EXIT_CONFIG = 2
EXIT_LOAD = 3
EXIT_FIT = 4


class CliError(click.ClickException):
    def __init__(self, message, exit_code):
        super().__init__(message)
        self.exit_code = exit_code


# --- shared option groups --------------------------------------------------

def _stack(*decorators):
    def apply(f):
        for d in reversed(decorators):
            f = d(f)
        return f
    return apply


common_options = _stack(
    click.option("--seed", type=int, default=0, show_default=True, help="Master seed for the run."),
    click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=Path("out"),
                 show_default=True, help="Output directory."),
    click.option("--label", default="label", show_default=True, help="Label column name."),
)

synth_options = _stack(
    click.option("--n", "n_rows", type=int, default=804, show_default=True, help="Synthetic rows."),
    click.option("--p-informative", type=int, default=5, show_default=True),
    click.option("--p-noise", type=int, default=15, show_default=True),
    click.option("--intercept", type=float, default=0.0, show_default=True, help="Planted intercept."),
    click.option("--nonlinearity", type=click.Choice(["none", "interaction", "threshold"]),
                 default="none", show_default=True),
    click.option("--strength", type=float, default=3.0, show_default=True,
                 help="Coefficient of the nonlinear term."),
    click.option("--label-noise", type=float, default=0.0, show_default=True),
)

data_options = _stack(
    click.option("--input", "input_path", type=click.Path(dir_okay=False, path_type=Path),
                 help="Dataset CSV."),
    click.option("--synthetic", is_flag=True, help="Generate the dataset from the synthetic options instead."),
    synth_options,
)

esn_options = _stack(
    click.option("--reservoir-size", type=int, default=150, show_default=True),
    click.option("--spectral-radius", type=float, default=0.9, show_default=True),
    click.option("--density", type=float, default=0.10, show_default=True),
    click.option("--eta", type=float, default=0.005, show_default=True, help="LMS learning rate."),
    click.option("--epochs", type=int, default=50, show_default=True, help="LMS epochs."),
    click.option("--lambda", "ridge_lambda", type=float, default=10.0, show_default=True,
                 help="Ridge regularization coefficient."),
    click.option("--drive-steps", type=int, default=10, show_default=True),
    click.option("--input-scaling", type=float, default=1.0, show_default=True),
    click.option("--input-bias", type=float, default=0.5, show_default=True),
    click.option("--trainer", type=click.Choice(["ridge", "lms"]), default="ridge", show_default=True,
                 help="Readout training method."),
)


def _esn_params(kw) -> dict:
    return {
        "reservoir_size": kw["reservoir_size"],
        "spectral_radius": kw["spectral_radius"],
        "density": kw["density"],
        "learning_rate": kw["eta"],
        "epochs": kw["epochs"],
        "ridge_lambda": kw["ridge_lambda"],
        "drive_steps": kw["drive_steps"],
        "input_scaling": kw["input_scaling"],
        "input_bias": kw["input_bias"],
    }


def _synth_spec(kw) -> SynthSpec:
    try:
        return SynthSpec(
            n=kw["n_rows"],
            p_informative=kw["p_informative"],
            p_noise=kw["p_noise"],
            planted_alpha=kw["intercept"],
            nonlinearity=kw["nonlinearity"],
            nonlinear_strength=kw["strength"],
            label_noise=kw["label_noise"],
            seed=derive_seed(kw["seed"], "synth"),
        )
    except ValueError as exc:
        raise CliError(f"invalid synthetic spec: {exc}", EXIT_CONFIG) from exc


def _load(kw, out: Path) -> tuple[Dataset, str]:
    if bool(kw.get("input_path")) == bool(kw.get("synthetic")):
        raise CliError("give exactly one of --input or --synthetic", EXIT_CONFIG)
    if kw.get("synthetic"):
        spec = _synth_spec(kw)
        data, _ = synth_generate(spec)
        return data, f"synthetic ({spec.nonlinearity}, n={spec.n}, p={data.p})"
    path = kw["input_path"]
    try:
        data, rep = load_csv(path, kw["label"])
    except (OSError, DataError) as exc:
        raise CliError(f"cannot load {path}: {exc}", EXIT_LOAD) from exc
    (out / "load_report.txt").write_text(rep.text(), encoding="utf-8")
    if rep.dropped_rows:
        log.warning("%s: dropped %d of %d rows", path, rep.dropped_rows, rep.source_rows)
    return data, f"{path} (n={data.n}, p={data.p}, dropped {rep.dropped_rows})"


def _outdir(out: Path) -> Path:
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc}", EXIT_CONFIG) from exc
    return out


def _standardize(data: Dataset) -> Dataset:
    try:
        return standardize(data)
    except DataError as exc:
        raise CliError(str(exc), EXIT_LOAD) from exc


def _alpha_tag(alpha: float) -> str:
    return f"{alpha:g}"


def _check_alphas(alphas):
    for a in alphas:
        if not 0 < a < 1:
            raise CliError(f"alpha must lie in (0, 1), got {a}", EXIT_CONFIG)


def _config_errors(f):
    """Map ValueErrors raised while building configs to exit code 2."""
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ValueError as exc:
            raise CliError(f"invalid configuration: {exc}", EXIT_CONFIG) from exc
    return wrapper


# --- commands --------------------------------------------------------------

def _load_config(ctx, _param, value):
    if value is None:
        return None
    try:
        doc = yaml.safe_load(Path(value).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise CliError(f"cannot read config {value}: {exc}", EXIT_CONFIG) from exc
    if not isinstance(doc, dict):
        raise CliError(f"config {value} must be a mapping", EXIT_CONFIG)
    flat = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    defaults = {}
    for name, cmd in main.commands.items():
        # accept the parameter name or any flag spelling (n, --n, n_rows)
        alias = {}
        for p in cmd.params:
            alias[p.name] = p.name
            for opt in p.opts:
                alias[opt.lstrip("-").replace("-", "_")] = p.name
        merged = {**flat, **(doc.get(name) or {})}
        defaults[name] = {alias[k]: v for k, v in
                          ((str(k).lstrip("-").replace("-", "_"), v) for k, v in merged.items()) if k in alias}
    ctx.default_map = defaults
    return value


@click.group()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), callback=_load_config,
              is_eager=True, expose_value=False, help="YAML/JSON file with option defaults.")
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    """Echo state network vs logistic regression on tabular data."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")


@main.command()
@common_options
@synth_options
def synth(**kw):
    """Write a synthetic cohort (data.csv) and its ground truth (ground_truth.csv)."""
    out = _outdir(kw["out"])
    spec = _synth_spec(kw)
    data, truth = synth_generate(spec)
    save_csv(data, out / "data.csv", kw["label"])
    save_ground_truth(truth, out / "ground_truth.csv")
    click.echo(f"wrote {data.n} rows x {data.p} features to {out / 'data.csv'}")


@main.command()
@common_options
@data_options
@click.option("--alpha", "alphas", type=float, multiple=True, default=(0.05, 0.01), show_default=True,
              help="Significance level; repeatable.")
def select(**kw):
    """Backward feature elimination; writes trace_<alpha>.csv and survivors_<alpha>.txt."""
    out = _outdir(kw["out"])
    _check_alphas(kw["alphas"])
    data, _ = _load(kw, out)
    data = _standardize(data)
    failed = None
    for alpha in kw["alphas"]:
        tag = _alpha_tag(alpha)
        try:
            trace = backward_select(data, alpha)
        except SelectionError as exc:
            trace, failed = exc.trace, exc
        write_trace(trace, out / f"trace_{tag}.csv")
        write_survivors(trace.surviving, out / f"survivors_{tag}.txt")
        if failed:
            raise CliError(f"selection at alpha={tag} failed: {failed}", EXIT_FIT)
        flag = " (intercept only)" if trace.intercept_only else ""
        click.echo(f"alpha={tag}: kept {len(trace.surviving)} of {data.p}, "
                   f"eliminated {len(trace.steps)}{flag}")


@main.command()
@common_options
@data_options
@esn_options
@click.option("--model", type=click.Choice(["logit", "esn"]), default="logit", show_default=True)
@click.option("--features", "features_file", type=click.Path(exists=True, dir_okay=False),
              help="Survivors file restricting the predictors.")
@_config_errors
def fit(**kw):
    """Fit one model on the whole dataset and save it as model_<model>.txt."""
    out = _outdir(kw["out"])
    data, _ = _load(kw, out)
    if kw["features_file"]:
        try:
            data = data.select(read_survivors(kw["features_file"]))
        except DataError as exc:
            raise CliError(str(exc), EXIT_LOAD) from exc
    data = _standardize(data)
    path = out / f"model_{kw['model']}.txt"
    if kw["model"] == "logit":
        try:
            f = glm.fit_logistic(data)
        except FitError as exc:
            raise CliError(f"logistic fit failed: {exc}", EXIT_FIT) from exc
        glm.save_logit(f, path, data.standardization)
        with (out / "wald.csv").open("w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerows(glm.wald_table(glm.wald_stats(f)))
    else:
        cfg = reservoir.EsnConfig(input_dim=data.p, seed=derive_seed(kw["seed"], "esn"), **_esn_params(kw))
        try:
            model = reservoir.train(reservoir.init_esn(cfg), data, kw["trainer"])
        except (reservoir.TrainingError, np.linalg.LinAlgError) as exc:
            raise CliError(f"ESN training failed: {exc}", EXIT_FIT) from exc
        reservoir.save_esn(model, path, data.feature_names, data.standardization)
    click.echo(f"wrote {path}")


def _model_scores(model_file: Path, data: Dataset):
    head = model_file.read_text(encoding="utf-8").split(maxsplit=1)[0]
    if head == glm.FORMAT_TAG:
        f, std = glm.load_logit(model_file)
        names = f.predictor_names
    elif head == reservoir.FORMAT_TAG:
        model, names, std = reservoir.load_esn(model_file)
    else:
        raise CliError(f"{model_file}: unknown model format", EXIT_LOAD)
    try:
        data = data.select(names)
    except DataError as exc:
        raise CliError(str(exc), EXIT_LOAD) from exc
    if std is not None:
        data = apply_standardization(data, std)
    if head == glm.FORMAT_TAG:
        return data, glm.predict_proba(f, data.features)
    return data, reservoir.scores(model, data.features)


@main.command()
@common_options
@data_options
@click.option("--model-file", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Model artifact written by `fit`.")
@click.option("--points", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Re-plot an existing ROC points CSV instead of scoring a model.")
@click.option("--name", default=None, help="Name used in roc_<name>.csv/svg.")
def roc(**kw):
    """ROC points (roc_<name>.csv) and plot (roc_<name>.svg) for a fitted model."""
    out = _outdir(kw["out"])
    if kw["points"]:
        curve = read_roc(kw["points"])
        name = kw["name"] or kw["points"].stem.removeprefix("roc_")
        (out / f"roc_{name}.svg").write_text(roc_svg(curve, f"ROC - {name}"), encoding="utf-8")
        click.echo(f"AUC {curve.auc:.4f}")
        return
    if not kw["model_file"]:
        raise CliError("give --model-file (with --input/--synthetic) or --points", EXIT_CONFIG)
    data, _ = _load(kw, out)
    data, s = _model_scores(kw["model_file"], data)
    name = kw["name"] or kw["model_file"].stem.removeprefix("model_")
    try:
        curve = emit_roc(data.labels, s, out / f"roc_{name}", f"ROC - {name}")
    except ValueError as exc:
        raise CliError(f"ROC undefined: {exc}", EXIT_LOAD) from exc
    click.echo(f"AUC {curve.auc:.4f}")


@main.command()
@common_options
@data_options
@esn_options
@click.option("--alpha", "alphas", type=float, multiple=True, default=(0.05, 0.01), show_default=True)
@click.option("--folds", type=int, default=10, show_default=True)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--model", type=click.Choice(["logit", "esn", "both"]), default="both", show_default=True)
@click.option("--holdout-fold", type=int, default=0, show_default=True,
              help="Fold whose confusion matrix goes into the report.")
@click.option("--workers", type=int, default=1, show_default=True, help="Threads for CV folds.")
@_config_errors
def compare(**kw):
    """Cross-validate logistic regression and the ESN on all and selected features."""
    out = _outdir(kw["out"])
    _check_alphas(kw["alphas"])
    if kw["folds"] < 2:
        raise CliError("--folds must be >= 2", EXIT_CONFIG)
    if not 0 < kw["threshold"] < 1:
        raise CliError("--threshold must lie in (0, 1)", EXIT_CONFIG)
    reservoir.EsnConfig(input_dim=1, **_esn_params(kw))  # validate early
    data, desc = _load(kw, out)
    if kw["folds"] > data.n:
        raise CliError(f"--folds {kw['folds']} exceeds the {data.n} rows", EXIT_CONFIG)

    settings = CompareSettings(
        alphas=tuple(kw["alphas"]), k=kw["folds"], seed=kw["seed"], threshold=kw["threshold"],
        models=kw["model"], esn=_esn_params(kw), esn_method=kw["trainer"],
        holdout_fold=kw["holdout_fold"], workers=kw["workers"],
    )
    results = run_compare(data, settings)

    write_metrics(results, out / "metrics.csv")
    write_folds(results, out / "folds.csv")
    for r in results:
        if r.report is not None and np.isfinite(r.auc):
            emit_roc(r.report.test_labels, r.report.test_scores, out / f"roc_{r.name}", f"ROC - {r.name}")
    text = compare_text(results, settings, desc)
    (out / "report.txt").write_text(text, encoding="utf-8")
    click.echo(text, nl=False)
    if all(r.report is None for r in results):
        raise CliError("every configuration failed", EXIT_FIT)


if __name__ == "__main__":
    main()
