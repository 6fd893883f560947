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
from pathlib import Path

import numpy as np
import pytest

from .. import __version__, logger
from ..artifact import load_model
from ..export import format_cell
from ..features import FEATURE_NAMES, read_feature_csv
from ..regressors import predict
from .conftest import write_manifest

EVALUATE_CONFIG = """\
families = ["ols", "random_forest"]
feature_sets = ["all", "kbest3"]

[estimators.random_forest]
n_estimators = 5
"""

TUNE_CONFIG = """\
checkpoint_every = 2

[grid]
k = [1, 2]
n_estimators = [3]
max_depth = [2]
min_samples_split = [2]
min_samples_leaf = [1, 2]
"""


@pytest.fixture
def dataset_files(make_dataset):
    """ Manifest and feature table of 12 clips, with their in-memory values. """
    manifest, matrix, labels = make_dataset(count=12)
    features = manifest.with_name("features.csv")
    matrix.to_csv(features)
    return manifest, features, matrix, labels


def data_lines(output, prefix="clip_"):
    return [line for line in output.splitlines() if line.startswith(prefix)]


def test_real_fs():
    """Check a simple test is not caught into the CLI runner fixture which is
    encapsulating all filesystem access into temporary directory structure."""
    assert str(Path(__file__)).startswith(str(Path.cwd()))


def test_temporary_fs(runner):
    """Check the CLI runner fixture properly encapsulated the filesystem in
    temporary directory."""
    assert not str(Path(__file__)).startswith(str(Path.cwd()))


def test_main_help(invoke):
    result = invoke("--help")
    assert result.exit_code == 0
    assert "Usage: " in result.output
    for command in ("extract", "train", "evaluate", "tune", "predict", "analyze"):
        assert command in result.output


@pytest.mark.parametrize(
    "command", ["extract", "train", "evaluate", "tune", "predict", "analyze"]
)
def test_command_help(invoke, command):
    result = invoke(command, "--help")
    assert result.exit_code == 0
    assert "Usage: " in result.output


def test_version(invoke):
    result = invoke("--version")
    assert result.exit_code == 0
    assert __version__ in result.output


def test_unknown_option(invoke):
    result = invoke("--blah")
    assert result.exit_code == 2
    assert "Error: No such option: --blah" in result.output


def test_unrecognized_verbosity(invoke):
    result = invoke("--verbosity", "random")
    assert result.exit_code == 2
    assert "Error: Invalid value for '--verbosity' / '-v'" in result.output


@pytest.mark.parametrize("level", ["CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"])
def test_verbosity(invoke, level):
    result = invoke("--verbosity", level, "extract", "--help")
    assert result.exit_code == 0
    assert "Usage: " in result.output

    assert logger.level == getattr(logging, level)
    if level == "DEBUG":
        assert "debug: " in result.output
    else:
        assert "debug: " not in result.output


def test_invalid_config_file(invoke, dataset_files, tmp_path):
    manifest, _, _, _ = dataset_files
    config = tmp_path.joinpath("bad.toml")
    config.write_text("unknown_setting = 1\n", encoding="utf-8")
    result = invoke("--config", config, "extract", manifest, tmp_path / "out.csv")
    assert result.exit_code == 2
    assert "Invalid configuration" in result.output


def test_config_from_environment(invoke, dataset_files, tmp_path):
    manifest, _, _, _ = dataset_files
    config = tmp_path.joinpath("bad.toml")
    config.write_text("test_fraction = 2\n", encoding="utf-8")
    result = invoke(
        "extract",
        manifest,
        tmp_path / "out.csv",
        env={"AFFECT_BENCH_CONFIG": str(config)},
    )
    assert result.exit_code == 2
    assert "Invalid configuration" in result.output


def test_extract(invoke, make_dataset, tmp_path):
    manifest, matrix, _ = make_dataset(count=3)
    out = tmp_path.joinpath("features.csv")
    result = invoke("extract", manifest, out)
    assert result.exit_code == 0
    assert "Phase #2" in result.output

    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# schema_version=1"
    assert lines[1].startswith("# config={")
    assert len(lines[2].split(",")) == 69
    assert len(lines) == 3 + 3
    features = read_feature_csv(out)
    assert features.row_ids == matrix.row_ids
    assert np.allclose(features.rows, matrix.rows, rtol=1e-8, atol=0)

    # Reruns are byte-identical.
    first = out.read_bytes()
    assert invoke("extract", manifest, out).exit_code == 0
    assert out.read_bytes() == first


def test_extract_skips_unreadable(invoke, make_dataset, tmp_path):
    manifest, _, _ = make_dataset(count=3)
    manifest.parent.joinpath("broken.wav").write_bytes(b"RIFF????WAVEjunk")
    with manifest.open("a", encoding="utf-8") as handle:
        handle.write("broken.wav,0.5,0.5\n")
    out = tmp_path.joinpath("features.csv")

    result = invoke("extract", manifest, out)
    assert result.exit_code == 0
    assert "broken.wav" in result.output
    assert len(read_feature_csv(out)) == 3

    result = invoke("--strict", "extract", manifest, tmp_path / "strict.csv")
    assert result.exit_code == 2
    assert "strict mode" in result.output


def test_extract_nothing(invoke, tmp_path):
    manifest = write_manifest(tmp_path.joinpath("m.csv"), [("absent.wav", 0, 0)])
    result = invoke("extract", manifest, tmp_path / "out.csv")
    assert result.exit_code == 2
    assert not tmp_path.joinpath("out.csv").exists()
    assert "warning: 1 referenced audio files not found." in result.output


def test_extract_bad_manifest(invoke, tmp_path):
    manifest = tmp_path.joinpath("m.csv")
    manifest.write_text("file,arousal,valence\na.wav,0,0\n", encoding="utf-8")
    result = invoke("extract", manifest, tmp_path / "out.csv")
    assert result.exit_code == 4


def test_train(invoke, dataset_files, tmp_path):
    manifest, features, matrix, _ = dataset_files
    model = tmp_path.joinpath("arousal.json")
    result = invoke(
        "train", "-t", "arousal", "-f", "ols", "--selection", "kbest", "-k", "1",
        "-o", model, features, manifest,
    )
    assert result.exit_code == 0
    assert "Inputs: dynamics_rms_mean" in result.output

    artifact = load_model(model)
    assert artifact.family == "ols"
    assert artifact.target_name == "arousal"
    assert artifact.config["kbest_k"] == 1
    assert artifact.config["paths"]["model"] == str(model)
    test_line = [line for line in result.output.splitlines() if "Test" in line][-1]
    assert float(test_line.split()[-1]) > 0.999


def test_train_kbest_names(invoke, dataset_files, tmp_path):
    manifest, features, _, _ = dataset_files
    model = tmp_path.joinpath("valence.json")
    result = invoke(
        "--seed", "7", "train", "-t", "valence", "-f", "random_forest",
        "--selection", "kbest", "-o", model, features, manifest,
    )
    assert result.exit_code == 0
    artifact = load_model(model)
    assert len(artifact.pipeline.selected_names) == 25
    assert set(artifact.pipeline.selected_names) <= set(FEATURE_NAMES)
    assert artifact.seed == 7


@pytest.mark.parametrize("family", ["ols", "lasso", "svr_rbf", "mlp2", "random_forest"])
def test_train_is_reproducible(invoke, dataset_files, tmp_path, family):
    manifest, features, _, _ = dataset_files
    model = tmp_path.joinpath(f"{family}.json")
    args = (
        "--seed", "3", "train", "-t", "valence", "-f", family,
        "--selection", "kbest", "-k", "5", "-o", model, features, manifest,
    )
    assert invoke(*args).exit_code == 0
    first = model.read_bytes()
    assert invoke(*args).exit_code == 0
    assert model.read_bytes() == first


def test_train_mismatched_header(invoke, dataset_files, tmp_path):
    manifest, _, _, _ = dataset_files
    features = tmp_path.joinpath("bad.csv")
    features.write_text("clip_id,loudness\nclip_000.wav,1\n", encoding="utf-8")
    result = invoke(
        "train", "-t", "arousal", "-f", "ols", "-o", tmp_path / "m.json",
        features, manifest,
    )
    assert result.exit_code == 4


def test_train_unknown_clip(invoke, dataset_files, tmp_path):
    manifest, features, _, _ = dataset_files
    rows = [("clip_000.wav", "0", "0")]
    short = write_manifest(manifest.with_name("short.csv"), rows)
    result = invoke(
        "train", "-t", "arousal", "-f", "ols", "-o", tmp_path / "m.json",
        features, short,
    )
    assert result.exit_code == 4


def test_evaluate(invoke, dataset_files, tmp_path):
    manifest, features, _, _ = dataset_files
    config = tmp_path.joinpath("evaluate.toml")
    config.write_text(EVALUATE_CONFIG, encoding="utf-8")
    out = tmp_path.joinpath("report.json")
    result = invoke("--config", config, "evaluate", features, manifest, out)
    assert result.exit_code == 0
    assert "Arousal" in result.output

    document = json.loads(out.read_text(encoding="utf-8"))
    assert document["schema_version"] == 1
    assert len(document["cells"]) == 2 * 2 * 2
    assert document["config"]["families"] == ["ols", "random_forest"]
    assert tmp_path.joinpath("report.csv").exists()
    timings = json.loads(tmp_path.joinpath("report.timings.json").read_text())
    assert len(timings["cells"]) == 8


def test_evaluate_feature_set_option(invoke, dataset_files, tmp_path):
    manifest, features, _, _ = dataset_files
    config = tmp_path.joinpath("evaluate.toml")
    config.write_text(EVALUATE_CONFIG, encoding="utf-8")
    out = tmp_path.joinpath("report.json")
    result = invoke(
        "--config", config, "evaluate", "--feature-set", "kbest2", features,
        manifest, out,
    )
    assert result.exit_code == 0
    document = json.loads(out.read_text(encoding="utf-8"))
    assert {cell["feature_set"] for cell in document["cells"]} == {"kbest2"}


def test_evaluate_bad_feature_set(invoke, dataset_files, tmp_path):
    manifest, features, _, _ = dataset_files
    result = invoke(
        "evaluate", "--feature-set", "best5", features, manifest,
        tmp_path / "report.json",
    )
    assert result.exit_code == 2
    assert "--feature-set" in result.output


def test_tune(invoke, dataset_files, tmp_path):
    manifest, features, _, _ = dataset_files
    config = tmp_path.joinpath("tune.toml")
    config.write_text(TUNE_CONFIG, encoding="utf-8")
    table = tmp_path.joinpath("table.csv")
    checkpoint = tmp_path.joinpath("search.json")
    args = ("--config", config, "tune", "-t", "valence", "--checkpoint", checkpoint)

    result = invoke(args, features, manifest, table)
    assert result.exit_code == 0
    assert "Best: " in result.output
    lines = table.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3 + 4
    best = json.loads(tmp_path.joinpath("table.best.json").read_text())
    assert best["target"] == "valence"
    assert len(best["selected_features"]) == best["best"]["k"]
    assert tmp_path.joinpath("table.timings.json").exists()
    assert json.loads(checkpoint.read_text())["completed"] == [0, 1, 2, 3]

    first = table.read_bytes()
    result = invoke(args, "--resume", features, manifest, table)
    assert result.exit_code == 0
    assert table.read_bytes() == first


def test_tune_resume_requires_checkpoint(invoke, dataset_files, tmp_path):
    manifest, features, _, _ = dataset_files
    result = invoke(
        "tune", "-t", "arousal", "--resume", features, manifest, tmp_path / "t.csv"
    )
    assert result.exit_code == 2
    assert "requires --checkpoint" in result.output


def test_tune_checkpoint_mismatch(invoke, dataset_files, tmp_path):
    manifest, features, _, _ = dataset_files
    checkpoint = tmp_path.joinpath("search.json")
    checkpoint.write_text('{"schema_version": 1}', encoding="utf-8")
    result = invoke(
        "tune", "-t", "arousal", "--checkpoint", checkpoint, "--resume",
        features, manifest, tmp_path / "t.csv",
    )
    assert result.exit_code == 5


@pytest.fixture
def trained_model(invoke, dataset_files, tmp_path):
    manifest, features, _, _ = dataset_files
    model = tmp_path.joinpath("model.json")
    result = invoke(
        "train", "-t", "arousal", "-f", "ols", "--selection", "kbest", "-k", "1",
        "-o", model, features, manifest,
    )
    assert result.exit_code == 0
    return model


def test_predict_features(invoke, dataset_files, trained_model):
    _, features, _, _ = dataset_files
    result = invoke("predict", trained_model, features)
    assert result.exit_code == 0
    assert "clip_id,arousal" in result.output.splitlines()

    expected = predict(load_model(trained_model), read_feature_csv(features).rows)
    lines = data_lines(result.output)
    assert len(lines) == 12
    for line, value in zip(lines, expected.tolist()):
        assert line.split(",")[1] == format_cell(min(max(value, -1.0), 1.0))


def test_predict_selected_rows(invoke, dataset_files, trained_model):
    _, features, _, _ = dataset_files
    result = invoke(
        "predict", "--clip-id", "clip_004.wav", "--clip-id", "clip_001.wav",
        trained_model, features,
    )
    assert result.exit_code == 0
    lines = data_lines(result.output)
    assert [line.split(",")[0] for line in lines] == ["clip_004.wav", "clip_001.wav"]


def test_predict_wav(invoke, dataset_files, trained_model):
    manifest, _, matrix, _ = dataset_files
    clip = manifest.parent.joinpath("clip_003.wav")
    result = invoke("predict", trained_model, clip)
    assert result.exit_code == 0
    expected = predict(load_model(trained_model), matrix.take(["clip_003.wav"]).rows)
    lines = data_lines(result.output, prefix=str(clip))
    assert lines == [f"{clip},{format_cell(float(expected[0]))}"]


def test_predict_wrong_schema(invoke, trained_model, tmp_path):
    features = tmp_path.joinpath("other.csv")
    features.write_text("clip_id,loudness\na.wav,1\n", encoding="utf-8")
    result = invoke("predict", trained_model, features)
    assert result.exit_code == 6


def test_predict_unknown_row(invoke, dataset_files, trained_model):
    _, features, _, _ = dataset_files
    result = invoke("predict", "--clip-id", "absent.wav", trained_model, features)
    assert result.exit_code == 6


def test_predict_corrupt_model(invoke, dataset_files, tmp_path):
    _, features, _, _ = dataset_files
    model = tmp_path.joinpath("model.json")
    model.write_text('{"schema_version": 99}', encoding="utf-8")
    result = invoke("predict", model, features)
    assert result.exit_code == 6


def test_analyze(invoke, dataset_files, tmp_path):
    manifest, features, _, labels = dataset_files
    out = tmp_path.joinpath("plots")
    result = invoke(
        "analyze", "--arousal-k", "1", "--valence-k", "1", features, manifest, out
    )
    assert result.exit_code == 0

    scatter = out.joinpath("av_scatter.csv").read_text().splitlines()
    assert scatter[2] == "clip_id,arousal,valence"
    assert len(scatter) == 3 + 12
    assert scatter[3].split(",")[1] == format_cell(labels[0].arousal)

    corr = out.joinpath("feature_corr.csv").read_text().splitlines()
    assert corr[2].split(",")[1:] == list(FEATURE_NAMES)
    assert len(corr) == 3 + 68

    pearson = out.joinpath("av_pearson.txt").read_text().splitlines()
    assert pearson[0].startswith("pearson_r=")
    assert pearson[1].startswith("p_value=")
    assert pearson[2] == "n=12"
    assert pearson[3] == "# schema_version=1"

    common = out.joinpath("common_features.csv").read_text().splitlines()
    assert common[3:] == ["dynamics_rms_mean,1,0", "spectral_centroid_mean,0,1"]
