# Copyright the affect-bench contributors.
# All Rights Reserved.
#
# This program is Free Software; you can redistribute it and/or
# modify it under the terms of the GNU General Public License
# as published by the Free Software Foundation; either version 2
# of the License, or (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, write to the Free Software
# Foundation, Inc., 59 Temple Place - Suite 330, Boston, MA  02111-1307, USA.

import json
import logging
from functools import wraps
from pathlib import Path

import click
import click_log
import numpy as np
from click_help_colors import version_option
from tabulate import tabulate

from . import (
    CLI_NAME,
    CONFIG_ENV_VAR,
    ESTIMATOR_FAMILIES,
    FEATURE_SET_PATTERN,
    SCHEMA_VERSION,
    SELECTIONS,
    TARGETS,
    AffectBenchError,
    FitError,
    InputError,
    ModelError,
    RunConfig,
    SchemaError,
    __version__,
    env_data,
    logger,
)
from .artifact import EstimatorSpec, load_model, save_model
from .audio import load_clip
from .colorize import choice_style, colors, format_metric, path_style, phase_title
from .evaluation import (
    common_features_report,
    common_features_rows,
    correlation_report,
    fit_cell,
    r2,
    rmse,
    run_matrix,
    train_test_split,
)
from .export import format_cell, write_csv, write_json, write_text
from .extraction import Extraction
from .features import CSV_ID_COLUMN, FeatureMatrix, read_feature_csv, summarize
from .manifest import load_manifest
from .reduction import f_regression_scores, select_k_best
from .regressors import predict as predict_rows
from .tuning import GridSpec, grid_search_rf

click_log.basic_config(logger)


def sidecar(path, suffix):
    """ Path of a file written next to ``path``, e.g. its timings. """
    path = Path(path)
    return path.with_name(f"{path.stem}{suffix}")


def pearson_text(correlations, n_clips, config):
    """Arousal/valence correlation as ``key=value`` lines.

    Trailing comment lines carry the schema version and configuration, the same
    way CSV outputs do.
    """
    compact = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return (
        f"pearson_r={format_cell(correlations.av_pearson_r)}\n"
        f"p_value={format_cell(correlations.av_p_value)}\n"
        f"n={n_clips}\n"
        f"# schema_version={SCHEMA_VERSION}\n"
        f"# config={compact}\n"
    )


def exit_on_error(func):
    """Turn package errors into log messages and the documented exit codes.

    Numerical failures surfacing as plain ``ValueError`` or ``ArithmeticError``
    are fit errors.
    """

    @wraps(func)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return func(*args, **kwargs)
        except AffectBenchError as ex:
            logger.error(str(ex))
            ctx.exit(ex.exit_code)
        except OSError as ex:
            logger.error(str(ex))
            ctx.exit(InputError.exit_code)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as ex:
            logger.error(str(ex))
            ctx.exit(FitError.exit_code)

    return wrapper


def load_config(ctx, show=True, **overrides):
    """Build the run configuration and echo its effective values.

    Precedence: defaults, then the TOML file, then global options, then the
    command's own options.

    ``show=False`` logs them at debug level instead, keeping stdout clean.
    """
    options = dict(ctx.obj["overrides"])
    options.update(overrides)
    path = ctx.obj["config_path"]
    try:
        if path:
            conf = RunConfig.from_file(path, **options)
        else:
            conf = RunConfig(**options)
    except (ValueError, TypeError, AssertionError) as ex:
        raise click.UsageError(f"Invalid configuration: {ex or ex.__class__.__name__}")
    table = tabulate(conf.table(), headers=["Setting", "Value"], tablefmt="simple")
    if show:
        click.echo(table)
    else:
        logger.debug(f"Effective configuration:\n{table}")
    return conf


def load_dataset(features_path, manifest_path, conf):
    """ Read features and annotations, aligned on the feature rows. """
    features = read_feature_csv(features_path)
    manifest = load_manifest(
        manifest_path, label_min=conf.label_min, label_max=conf.label_max
    )
    labels = manifest.affect_labels(features.row_ids)
    return features, labels


@click.group(context_settings={"show_default": True})
@click.option(
    "-c",
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, resolve_path=True),
    envvar=CONFIG_ENV_VAR,
    show_envvar=True,
    help="TOML file of configuration values. Options given on the command line "
    "take precedence over its content.",
)
@click.option(
    "-s",
    "--seed",
    type=int,
    help="Seed of the train/test split and of all randomized estimators. "
    "Defaults to 42.",
)
@click.option(
    "-j",
    "--jobs",
    type=click.IntRange(min=1),
    help="Number of worker processes used by extraction and grid search. "
    "Defaults to 1.",
)
@click.option(
    "--strict/--no-strict",
    default=None,
    help="Exit with an error if any clip can't be analyzed, instead of skipping it.",
)
@click_log.simple_verbosity_option(
    logger,
    default="INFO",
    metavar="LEVEL",
    type=click.Choice(
        ["CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"], case_sensitive=False
    ),
    help="Either CRITICAL, ERROR, WARNING, INFO or DEBUG. Defaults to INFO.",
)
@version_option(
    version=__version__,
    prog_name=CLI_NAME,
    version_color="green",
    prog_name_color=colors["cli"]["fg"],
    message=f"%(prog)s %(version)s\n{env_data}",
    message_color="bright_black",
)
@click.pass_context
def affect_bench(ctx, config_path, seed, jobs, strict):
    """Predict the perceived arousal and valence of soundscapes.

    \b
    Workflow:
    * extract:  summarize each annotated clip into 68 psychoacoustic features.
    * evaluate: fit every model on every feature set, report RMSE and R².
    * tune:     grid search of random forest hyperparameters.
    * train:    fit and save a single model.
    * predict:  apply a saved model to a clip or to feature rows.
    * analyze:  emit plot-ready correlation data.
    """
    level = logger.level
    level_name = logging._levelToName.get(level, level)
    logger.debug(f"Verbosity set to {level_name}.")

    ctx.obj = {
        "config_path": config_path,
        "overrides": {"seed": seed, "jobs": jobs, "strict": strict},
    }


@affect_bench.command(short_help="Extract the features of annotated clips.")
@click.option(
    "--sample-rate",
    type=click.IntRange(min=1),
    help="Rate clips are resampled to before analysis, in Hz. Defaults to 22050.",
)
@click.option(
    "--peak-normalize/--no-peak-normalize",
    default=None,
    help="Scale each clip to a unit peak before analysis.",
)
@click.option(
    "--label-min",
    type=float,
    help="Lower bound of raw manifest labels, mapped to -1. Requires --label-max.",
)
@click.option(
    "--label-max",
    type=float,
    help="Upper bound of raw manifest labels, mapped to 1. Requires --label-min.",
)
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_csv", type=click.Path(dir_okay=False, writable=True))
@click.pass_context
@exit_on_error
def extract(
    ctx, sample_rate, peak_normalize, label_min, label_max, manifest_path, out_csv
):
    """Summarize each clip of MANIFEST_PATH into a row of OUT_CSV.

    The manifest is a CSV file with a ``path,arousal,valence`` header. Clips
    which can't be analyzed are skipped with a warning, or abort the command
    under --strict.
    """
    conf = load_config(
        ctx,
        sample_rate=sample_rate,
        peak_normalize=peak_normalize,
        label_min=label_min,
        label_max=label_max,
    )
    conf.record_paths(manifest=manifest_path, features=out_csv)

    click.echo(phase_title(1, "Load manifest"))
    manifest = load_manifest(
        manifest_path, label_min=conf.label_min, label_max=conf.label_max
    )

    click.echo(phase_title(2, "Extract features"))
    extraction = Extraction(manifest, conf)
    with click.progressbar(
        extraction.iter_extract(),
        length=len(manifest),
        label="Clips analyzed",
        show_pos=True,
    ) as progress:
        for _ in progress:
            pass

    click.echo(phase_title(3, "Write feature table"))
    if extraction.vectors:
        extraction.matrix().to_csv(out_csv, config=conf.snapshot())
        logger.info(f"{len(extraction.vectors)} feature vectors written to {out_csv}")

    click.echo(extraction.report())
    extraction.check_stats()

    if extraction.failures:
        logger.warning(f"{len(extraction.failures)} clips skipped:")
        for clip_id, message in extraction.failures.items():
            logger.warning(f"  {clip_id}: {message}")
        if conf.strict:
            raise InputError(f"{len(extraction.failures)} clips failed in strict mode.")
    if not extraction.vectors:
        raise InputError("No clip could be analyzed.")


@affect_bench.command(short_help="Fit and save a single model.")
@click.option(
    "-t", "--target", type=click.Choice(TARGETS), required=True, help="Affect target."
)
@click.option(
    "-f",
    "--family",
    type=click.Choice(ESTIMATOR_FAMILIES),
    required=True,
    help="Estimator family.",
)
@click.option(
    "--selection",
    type=click.Choice(SELECTIONS),
    default="all",
    help="Reduction of the 68 features: none, K best by F statistic, or PCA "
    "retaining the configured share of variance.",
)
@click.option(
    "-k",
    "--k",
    "kbest_k",
    type=click.IntRange(min=1),
    help="Number of features retained by --selection kbest. Defaults to 25.",
)
@click.option(
    "-o",
    "--out",
    "out_model",
    type=click.Path(dir_okay=False, writable=True),
    required=True,
    help="Location of the model file.",
)
@click.argument("features_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@exit_on_error
def train(
    ctx, target, family, selection, kbest_k, out_model, features_path, manifest_path
):
    """Fit a model of TARGET on the training split and save it.

    Train and test metrics are printed. The model file records the selected
    feature names and the configuration of the run.
    """
    conf = load_config(ctx, kbest_k=kbest_k)
    conf.record_paths(features=features_path, manifest=manifest_path, model=out_model)
    feature_set = conf.feature_set(selection)

    click.echo(phase_title(1, "Load dataset"))
    features, labels = load_dataset(features_path, manifest_path, conf)
    y = np.array([getattr(label, target) for label in labels], dtype=np.float64)
    split = train_test_split(len(features), conf.test_fraction, conf.seed)

    click.echo(
        phase_title(
            2, f"Fit {choice_style(family)} on {choice_style(feature_set)} features"
        )
    )
    spec = EstimatorSpec(family, conf.hyperparameters(family))
    try:
        artifact = fit_cell(features, y, split, feature_set, spec, conf, target)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as ex:
        raise FitError(f"Can't fit {family}: {ex}") from ex
    artifact.config = conf.snapshot()

    metrics = []
    for part, rows in (("Train", split.train_idx), ("Test", split.test_idx)):
        rows = list(rows)
        predicted = predict_rows(artifact, features.rows[rows])
        metrics.append(
            [
                part,
                format_metric(rmse(y[rows], predicted)),
                format_metric(r2(y[rows], predicted)),
            ]
        )
    click.echo(tabulate([["Split", "RMSE", "R²"]] + metrics, headers="firstrow"))
    click.echo(f"Inputs: {', '.join(artifact.pipeline.selected_names)}")

    click.echo(phase_title(3, "Save model"))
    save_model(artifact, out_model)


@affect_bench.command(short_help="Evaluate all models on all feature sets.")
@click.option(
    "--feature-set",
    "feature_sets",
    multiple=True,
    help="Feature set to evaluate: all, pcaNN or kbestK. Repeat to evaluate "
    "several. Defaults to all, pcaNN and kbestK sized by the pca_target and "
    "kbest_k settings: all, pca90 and kbest25 out of the box.",
)
@click.argument("features_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_report", type=click.Path(dir_okay=False, writable=True))
@click.pass_context
@exit_on_error
def evaluate(ctx, feature_sets, features_path, manifest_path, out_report):
    """Run the model by feature set matrix, for each target.

    Writes OUT_REPORT as JSON, the same cells as a CSV file next to it, and the
    fit durations in a separate timings file.
    """
    for set_id in feature_sets:
        if not FEATURE_SET_PATTERN.match(set_id):
            raise click.BadParameter(
                f"{set_id} is not one of all, pcaNN or kbestK.",
                param_hint="--feature-set",
            )
    conf = load_config(ctx, feature_sets=tuple(feature_sets) or None)
    report_csv = sidecar(out_report, ".csv")
    conf.record_paths(
        features=features_path,
        manifest=manifest_path,
        report=out_report,
        report_csv=report_csv,
    )

    click.echo(phase_title(1, "Load dataset"))
    features, labels = load_dataset(features_path, manifest_path, conf)

    click.echo(phase_title(2, "Fit and measure models"))
    n_cells = len(conf.targets) * len(conf.feature_sets) * len(conf.families)
    with click.progressbar(
        length=n_cells, label="Cells evaluated", show_pos=True
    ) as progress:
        report = run_matrix(
            features, labels, conf, on_cell=lambda cell: progress.update(1)
        )

    click.echo(phase_title(3, "Write report"))
    report.to_json(out_report)
    report.to_csv(report_csv)
    write_json(sidecar(out_report, ".timings.json"), report.timings_document())
    logger.info(f"{len(report)} cells written to {out_report} and {report_csv}")

    click.echo(report.report())
    if report.failed:
        logger.warning(f"{len(report.failed)} of {len(report)} cells failed.")
        if len(report.failed) == len(report):
            raise FitError("Every cell of the evaluation failed.")


@affect_bench.command(short_help="Grid search of random forest hyperparameters.")
@click.option(
    "-t", "--target", type=click.Choice(TARGETS), required=True, help="Affect target."
)
@click.option(
    "--checkpoint",
    type=click.Path(dir_okay=False, writable=True),
    help="File progress is saved to, every checkpoint_every configurations.",
)
@click.option(
    "--resume/--no-resume",
    default=False,
    help="Skip configurations already evaluated in the --checkpoint file.",
)
@click.argument("features_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_table", type=click.Path(dir_okay=False, writable=True))
@click.pass_context
@exit_on_error
def tune(ctx, target, checkpoint, resume, features_path, manifest_path, out_table):
    """Evaluate every configuration of the grid and write them to OUT_TABLE.

    The grid defaults to 14400 configurations, and can be restricted axis by
    axis from the configuration file. The best configuration and its selected
    features are saved next to the table.
    """
    if resume and not checkpoint:
        raise click.BadParameter("requires --checkpoint.", param_hint="--resume")
    conf = load_config(ctx)
    conf.record_paths(
        features=features_path,
        manifest=manifest_path,
        table=out_table,
        checkpoint=checkpoint,
    )
    grid = GridSpec.from_config(conf)

    click.echo(phase_title(1, "Load dataset"))
    features, labels = load_dataset(features_path, manifest_path, conf)

    click.echo(phase_title(2, f"Search {len(grid)} configurations"))
    with click.progressbar(
        length=len(grid), label="Configurations evaluated", show_pos=True
    ) as progress:
        result = grid_search_rf(
            features,
            labels,
            target,
            grid=grid,
            seed=conf.seed,
            test_fraction=conf.test_fraction,
            jobs=conf.jobs,
            checkpoint=checkpoint,
            resume=resume,
            checkpoint_every=conf.checkpoint_every,
            on_progress=progress.update,
        )

    click.echo(phase_title(3, "Write results"))
    config = conf.snapshot()
    result.to_csv(out_table, config=config)
    best_path = sidecar(out_table, ".best.json")
    write_json(
        best_path,
        {
            "schema_version": SCHEMA_VERSION,
            "config": config,
            "target": target,
            "best": result.best,
            "selected_features": list(result.selected_names),
        },
    )
    write_json(sidecar(out_table, ".timings.json"), result.timings_document())
    logger.info(f"Best configuration saved to {best_path}")

    click.echo(result.report())
    click.echo(f"Best: {result.best_params}")
    click.echo(f"Selected features: {', '.join(result.selected_names)}")


@affect_bench.command(short_help="Predict affect with a saved model.")
@click.option(
    "--clip-id",
    "clip_ids",
    multiple=True,
    help="Only predict these rows of a feature CSV input. Repeat to select several.",
)
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@exit_on_error
def predict(ctx, clip_ids, model_path, input_path):
    """Apply MODEL_PATH to a WAV clip or to the rows of a feature CSV.

    WAV clips are analyzed with the extraction settings recorded in the model.
    Predictions are clamped to [-1, 1].
    """
    conf = load_config(ctx, show=False)
    try:
        artifact = load_model(model_path)
        if Path(input_path).suffix.lower() == ".wav":
            clip_conf = conf
            if artifact.config:
                try:
                    clip_conf = RunConfig(**artifact.config)
                except (ValueError, TypeError, AssertionError) as ex:
                    raise ModelError(
                        f"Model has an invalid configuration: {ex!r}"
                    ) from ex
            clip = load_clip(input_path, clip_conf)
            features = FeatureMatrix.from_vectors([summarize(clip, clip_conf)])
        else:
            features = read_feature_csv(input_path)
            if clip_ids:
                features = features.take(clip_ids)
        raw = predict_rows(artifact, features.rows)
    except SchemaError as ex:
        raise ModelError(str(ex)) from ex

    column = artifact.target_name or "prediction"
    click.echo(f"{CSV_ID_COLUMN},{column}")
    for clip_id, value in zip(features.row_ids, raw.tolist()):
        clamped = min(max(value, -1.0), 1.0)
        if clamped != value:
            logger.warning(
                f"{clip_id}: raw prediction {value:.4f} clamped to {clamped:.0f}."
            )
        click.echo(f"{clip_id},{format_cell(clamped)}")


@affect_bench.command(short_help="Write plot-ready correlation data.")
@click.option(
    "--arousal-k",
    type=click.IntRange(min=1),
    help="Number of best arousal features compared. Defaults to kbest_k.",
)
@click.option(
    "--valence-k",
    type=click.IntRange(min=1),
    help="Number of best valence features compared. Defaults to kbest_k.",
)
@click.argument("features_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False, writable=True))
@click.pass_context
@exit_on_error
def analyze(ctx, arousal_k, valence_k, features_path, manifest_path, out_dir):
    """Write correlation tables of the dataset to OUT_DIR.

    \b
    Files:
    * av_scatter.csv:      arousal and valence of each clip.
    * feature_corr.csv:    Pearson correlation between all features.
    * av_pearson.txt:      correlation between arousal and valence, and its p-value.
    * common_features.csv: K best features of each target.
    """
    conf = load_config(ctx)
    out_dir = Path(out_dir)
    conf.record_paths(features=features_path, manifest=manifest_path, out_dir=out_dir)
    config = conf.snapshot()

    click.echo(phase_title(1, "Load dataset"))
    features, labels = load_dataset(features_path, manifest_path, conf)

    click.echo(phase_title(2, "Compute correlations"))
    correlations = correlation_report(features, labels)
    selections = {}
    for target, k in (("arousal", arousal_k), ("valence", valence_k)):
        y = np.array([getattr(label, target) for label in labels], dtype=np.float64)
        selections[target] = select_k_best(
            f_regression_scores(features.rows, y), k or conf.kbest_k
        )
    common = common_features_report(
        selections["arousal"], selections["valence"], names=features.names
    )

    click.echo(phase_title(3, "Write tables"))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(
        out_dir / "av_scatter.csv",
        (CSV_ID_COLUMN, "arousal", "valence"),
        (
            (clip_id, label.arousal, label.valence)
            for clip_id, label in zip(features.row_ids, labels)
        ),
        config=config,
    )
    write_csv(
        out_dir / "feature_corr.csv",
        ("feature",) + correlations.names,
        (
            (name, *row)
            for name, row in zip(correlations.names, correlations.feature_corr.tolist())
        ),
        config=config,
    )
    write_text(
        out_dir / "av_pearson.txt", pearson_text(correlations, len(labels), config)
    )
    write_csv(
        out_dir / "common_features.csv",
        ("feature", "arousal", "valence"),
        common_features_rows(common),
        config=config,
    )

    click.echo(
        f"Arousal/valence Pearson r = {format_metric(correlations.av_pearson_r)} "
        f"(p-value {correlations.av_p_value:.3g}, n = {len(labels)})"
    )
    click.echo(f"Common best features: {', '.join(common.common) or '-'}")
    logger.info(f"Tables written to {path_style(str(out_dir))}")
