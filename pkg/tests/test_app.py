import csv
import io
import json
from pathlib import Path

import pytest

from departcast.app import main
from departcast.artifacts import bin_values_artifact, dumps
from departcast.ingest import Dataset, SyntheticSpec, generate_synthetic, prefix_sessions, superimpose, to_csv_text
from departcast.timeutil import DEFAULT_WINDOW, BinGrid, DepartureRecord, TimeOfDay

DATA = Path(__file__).parent / "data"
GOLDEN_12 = DATA / "golden_12bin.csv"
GOLDEN_18 = DATA / "golden_18bin.csv"

GMM_12 = [0.0269, 0.0654, 0.1038, 0.0692, 0.1577, 0.0962, 0.0146, 0.0135, 0.0692, 0.0769, 0.0346, 0.0192]
GAUSS_18 = [0.0451, 0.0411, 0.0451, 0.0504, 0.0557, 0.0504, 0.0756, 0.069, 0.0849,
            0.0915, 0.0822, 0.0637, 0.0584, 0.0438, 0.0332, 0.0398, 0.0292, 0.0411]


def _run(*argv):
    return main(["--config", "/non/existent/departcast.toml", *[str(a) for a in argv]])


def _assert_close(got, want, path="$"):
    if isinstance(want, dict):
        assert isinstance(got, dict) and sorted(got) == sorted(want), path
        for key in want:
            _assert_close(got[key], want[key], f"{path}.{key}")
    elif isinstance(want, list):
        assert isinstance(got, list) and len(got) == len(want), path
        for i, (g, w) in enumerate(zip(got, want)):
            _assert_close(g, w, f"{path}[{i}]")
    elif isinstance(want, float):
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12), path
    else:
        assert got == want, path


def _write(path, dataset):
    path.write_text(to_csv_text(dataset), encoding="utf-8")
    return path


@pytest.fixture
def dense_csv(tmp_path):
    # one departure every second of the window, single session
    start = DEFAULT_WINDOW.start.seconds
    records = [DepartureRecord(f"V{s:05d}", "rgv", TimeOfDay(start + s)) for s in range(DEFAULT_WINDOW.length)]
    return _write(tmp_path / "dense.csv", Dataset.from_records(records))


@pytest.fixture
def sparse_csv(tmp_path):
    spec = SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7, 30), 1800.0, 4, 50, rng_seed=42)
    return _write(tmp_path / "sparse.csv", generate_synthetic(spec))


def test_forecast_rows_bracket_means(capsys):
    assert _run("forecast", "--input", GOLDEN_12, "--bins", 12, "--format", "csv") == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 12
    for row in rows:
        assert float(row["lower"]) <= float(row["mean"]) <= float(row["upper"])
    assert rows[0]["interval"] == "6.00-6.15am"


def test_forecast_inexact_bins_fails(capsys):
    assert _run("forecast", "--input", GOLDEN_12, "--bins", 7) != 0
    assert "error:" in capsys.readouterr().err


@pytest.mark.parametrize(
    "csv_name,bins,golden",
    [("golden_12bin.csv", 12, "golden_forecast_12bin.json"), ("golden_18bin.csv", 18, "golden_forecast_18bin.json")],
)
def test_forecast_matches_golden(tmp_path, csv_name, bins, golden):
    out = tmp_path / "fc.json"
    assert _run("forecast", "--input", DATA / csv_name, "--bins", bins, "--format", "json", "--out", out) == 0
    got = json.loads(out.read_text(encoding="utf-8"))
    want = json.loads((DATA / golden).read_text(encoding="utf-8"))
    _assert_close(got, want)


def test_json_output_is_byte_stable(tmp_path, sparse_csv):
    model = tmp_path / "model.json"
    assert _run("fit-gmm", "--input", sparse_csv, "--format", "json", "--out", model) == 0
    commands = [
        ["forecast", "--input", GOLDEN_12, "--format", "json"],
        ["scale", "--input", sparse_csv, "--rule", "relative", "--epsilon", 0.3, "--format", "json"],
        ["fit-gmm", "--input", sparse_csv, "--components", 4, "--init", "seeded-random", "--seed", 3, "--format", "json"],
        ["evaluate", "--model", model, "--test", sparse_csv, "--format", "json"],
        ["generate", "--seed", 7],
        ["forecast", "--input", GOLDEN_12, "--format", "svg"],
        ["evaluate", "--model", model, "--test", sparse_csv, "--format", "svg"],
        ["compare", "--input", sparse_csv, "--test", sparse_csv, "--bin-counts", 6, 12, "--format", "json"],
    ]
    for i, argv in enumerate(commands):
        outputs = []
        for n in range(2):
            out = tmp_path / f"out{i}-{n}"
            assert _run(*argv, "--out", out) == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1], argv[0]


def test_scale_paper_rule_reaches_b_max_on_dense_data(tmp_path, dense_csv):
    out = tmp_path / "scale.json"
    assert _run("scale", "--input", dense_csv, "--epsilon", 0.05, "--b-max", 36, "--format", "json", "--out", out) == 0
    data = json.loads(out.read_text(encoding="utf-8"))
    assert data["kind"] == "granularity-result"
    assert data["chosen_b"] == 36
    assert data["forecast"]["grid"]["bin_count"] == 36


def test_scale_relative_rule_coarsens_sparse_data(tmp_path, sparse_csv):
    out = tmp_path / "scale.json"
    assert _run("scale", "--input", sparse_csv, "--rule", "relative", "--epsilon", 0.3, "--format", "json", "--out", out) == 0
    data = json.loads(out.read_text(encoding="utf-8"))
    assert 1 <= data["chosen_b"] < 36
    assert data["trace"][0]["b"] == 1
    chosen = [t for t in data["trace"] if t["b"] == data["chosen_b"]][0]
    assert chosen["satisfied"]


def test_scale_confidence_flag(tmp_path, dense_csv):
    out = tmp_path / "scale.json"
    assert _run("scale", "--input", dense_csv, "--confidence", 0.95, "--format", "json", "--out", out) == 0
    assert json.loads(out.read_text(encoding="utf-8"))["epsilon"] == pytest.approx(0.05)


def test_scale_bad_range(sparse_csv, capsys):
    assert _run("scale", "--input", sparse_csv, "--b-min", 10, "--b-max", 5) != 0
    assert "b_min" in capsys.readouterr().err


def test_scale_infeasible_prints_trace(sparse_csv, capsys):
    assert _run("scale", "--input", sparse_csv, "--rule", "relative", "--epsilon", 0.01, "--b-max", 4) != 0
    err = capsys.readouterr().err
    assert "b=1" in err
    assert "satisfied=False" in err


def test_fit_gmm_weights_sum_to_one(tmp_path):
    out = tmp_path / "gmm.json"
    assert _run("fit-gmm", "--input", GOLDEN_12, "--bins", 12, "--format", "json", "--out", out) == 0
    data = json.loads(out.read_text(encoding="utf-8"))
    assert data["kind"] == "gmm-model"
    assert len(data["components"]) == 12
    assert sum(c["weight"] for c in data["components"]) == pytest.approx(1.0, abs=1e-9)
    assert sum(b["mass"] for b in data["bin_mass"]) == pytest.approx(1.0, abs=1e-9)


def test_fit_gmm_finds_both_modes(tmp_path):
    early = generate_synthetic(SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7), 600.0, 3, 100, rng_seed=1))
    late = generate_synthetic(SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(8, 30), 600.0, 3, 100, rng_seed=2))
    both = superimpose([prefix_sessions(early, "early"), prefix_sessions(late, "late")])
    src = _write(tmp_path / "bimodal.csv", both)
    out = tmp_path / "gmm.json"
    assert _run("fit-gmm", "--input", src, "--components", 2, "--format", "json", "--out", out) == 0
    means = sorted(c["mean"] for c in json.loads(out.read_text(encoding="utf-8"))["components"])
    assert abs(means[0] - TimeOfDay.of(7).seconds) < 300
    assert abs(means[1] - TimeOfDay.of(8, 30).seconds) < 300


def _bin_values(tmp_path, values, bins):
    path = tmp_path / f"values{bins}.json"
    path.write_text(dumps(bin_values_artifact(values, BinGrid(DEFAULT_WINDOW, bins))), encoding="utf-8")
    return path


def test_evaluate_published_gmm_values(tmp_path):
    out = tmp_path / "report.json"
    assert _run("evaluate", "--model", _bin_values(tmp_path, GMM_12, 12), "--format", "json", "--out", out) == 0
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["average_erf"] == pytest.approx(0.0700, abs=5e-4)
    assert report["normalized_score"] == pytest.approx(0.8400, abs=5e-4)


def test_evaluate_published_gaussian_values(tmp_path, capsys):
    assert _run("evaluate", "--model", _bin_values(tmp_path, GAUSS_18, 18), "--format", "table") == 0
    text = capsys.readouterr().out
    assert "Average erf value: 0.062" in text
    assert "Normalized score on a number of bins: 1.12" in text


def test_evaluate_bin_mismatch(tmp_path, capsys):
    assert _run("evaluate", "--model", _bin_values(tmp_path, GMM_12, 12), "--bins", 18) != 0
    assert "18" in capsys.readouterr().err


def test_evaluate_model_needs_test_set(tmp_path):
    model = tmp_path / "fc.json"
    assert _run("forecast", "--input", GOLDEN_12, "--format", "json", "--out", model) == 0
    assert _run("evaluate", "--model", model) != 0


def test_train_test_pipeline(tmp_path):
    # two cities superimposed into one training set
    austin = _write(tmp_path / "austin.csv", generate_synthetic(SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7, 30), 2400.0, 2, 200, rng_seed=5)))
    houston = _write(tmp_path / "houston.csv", generate_synthetic(SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7, 30), 2400.0, 2, 179, rng_seed=7)))
    test = _write(tmp_path / "test.csv", generate_synthetic(SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7, 30), 2400.0, 2, 130, rng_seed=6)))
    for bins in (12, 18):
        fc, gmm = tmp_path / f"fc{bins}.json", tmp_path / f"gmm{bins}.json"
        assert _run("forecast", "--input", austin, houston, "--bins", bins, "--format", "json", "--out", fc) == 0
        assert json.loads(fc.read_text(encoding="utf-8"))["total_sessions"] == 4
        assert _run("fit-gmm", "--input", austin, houston, "--bins", bins, "--format", "json", "--out", gmm) == 0
        for model in (fc, gmm):
            out = tmp_path / f"report-{model.stem}.json"
            assert _run("evaluate", "--model", model, "--test", test, "--format", "json", "--out", out) == 0
            report = json.loads(out.read_text(encoding="utf-8"))
            assert len(report["bins"]) == bins
            assert report["normalized_score"] == pytest.approx(report["average_erf"] * bins)
            assert 0 <= report["mean_abs_deviation"] < 0.05


def test_several_inputs_superimpose(tmp_path):
    out = tmp_path / "fc.json"
    assert _run("forecast", "--input", GOLDEN_12, GOLDEN_18, "--bins", 12, "--format", "json", "--out", out) == 0
    data = json.loads(out.read_text(encoding="utf-8"))
    assert data["total_sessions"] == 3
    # (90 + 73) departures averaged over three sessions
    assert sum(b["mean"] for b in data["bins"]) == pytest.approx(163 / 3)


def test_several_inputs_with_same_stem_collide(tmp_path, capsys):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    first = tmp_path / "a" / "city.csv"
    second = tmp_path / "b" / "city.csv"
    first.write_bytes(GOLDEN_12.read_bytes())
    second.write_bytes(GOLDEN_12.read_bytes())
    assert _run("forecast", "--input", first, second) != 0
    assert "more than one dataset" in capsys.readouterr().err


def test_compare_sweeps_bin_counts(tmp_path):
    train = _write(tmp_path / "train.csv", generate_synthetic(SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7, 30), 2400.0, 4, 190, rng_seed=5)))
    test = _write(tmp_path / "test.csv", generate_synthetic(SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7, 30), 2400.0, 2, 130, rng_seed=6)))
    out = tmp_path / "sweep.json"
    assert _run("compare", "--input", train, "--test", test, "--bin-counts", 18, 12, 6, "--format", "json", "--out", out) == 0
    data = json.loads(out.read_text(encoding="utf-8"))
    assert data["kind"] == "bin-count-sweep"
    assert [p["bin_count"] for p in data["points"]] == [6, 12, 18]
    for p in data["points"]:
        assert p["components"] == p["bin_count"]
        for model in ("gaussian", "gmm"):
            assert 0 < p[model]["normalized_score"] < 1.2
            assert p[model]["mean_abs_deviation"] >= 0


def test_compare_table_and_svg(tmp_path, capsys):
    train = _write(tmp_path / "train.csv", generate_synthetic(SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7, 30), 2400.0, 4, 100, rng_seed=1)))
    assert _run("compare", "--input", train, "--test", train, "--bin-counts", 12, 18, "--components", 4) == 0
    text = capsys.readouterr().out
    assert "GMM score" in text
    assert len([l for l in text.splitlines() if l.startswith(("12 ", "18 "))]) == 2
    assert _run("compare", "--input", train, "--test", train, "--format", "svg") == 0
    svg = capsys.readouterr().out
    assert "<svg" in svg
    assert "kozea.github.io" not in svg


def test_compare_rejects_inexact_bin_count(tmp_path, sparse_csv, capsys):
    assert _run("compare", "--input", sparse_csv, "--test", sparse_csv, "--bin-counts", 7) != 0
    assert "7 bins" in capsys.readouterr().err


def test_generate_is_seeded(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert _run("generate", "--seed", 42, "--sessions", 3, "--vehicles", 10, "--out", a) == 0
    assert _run("generate", "--seed", 42, "--sessions", 3, "--vehicles", 10, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 31
    assert lines[0] == "vehicle_id,session_id,start_tm"


def test_generate_mean_outside_window(capsys):
    assert _run("generate", "--mean", "10:00:00") != 0
    assert "outside window" in capsys.readouterr().err


def test_svg_output(capsys):
    assert _run("forecast", "--input", GOLDEN_18, "--bins", 18, "--format", "svg") == 0
    svg = capsys.readouterr().out
    assert "<svg" in svg
    assert "kozea.github.io" not in svg


def test_svg_output_is_repeatable(capsys):
    outputs = []
    for _ in range(2):
        assert _run("forecast", "--input", GOLDEN_12, "--format", "svg") == 0
        outputs.append(capsys.readouterr().out)
    assert outputs[0] == outputs[1]
    assert 'id="chart-' in outputs[0]


def test_correlate(tmp_path):
    src = tmp_path / "features.csv"
    src.write_text(
        "distance_km,constant,label,start_tm\n"
        "5,1,a,06:10:00\n"
        "10,1,b,06:40:00\n"
        "20,1,c,07:20:00\n"
        "40,1,d,08:50:00\n",
        encoding="utf-8",
    )
    out = tmp_path / "corr.json"
    assert _run("correlate", "--input", src, "--format", "json", "--out", out) == 0
    data = json.loads(out.read_text(encoding="utf-8"))
    assert data["target"] == "start_tm"
    assert data["correlations"]["distance_km"] > 0.9
    assert data["correlations"]["constant"] is None
    assert "label" not in data["correlations"]
