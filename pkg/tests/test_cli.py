import io
import json

import numpy as np
import pandas as pd
import pytest

from core.csf_model import threshold_resolution
from core.units import DisplayGeometry, center_ppd
from main import main


def run_json(capsys, *argv):
    code = main(list(argv) + ["--format", "json"])
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_calc_4k_at_one_metre(capsys):
    code, doc = run_json(capsys, "calc", "--display-width-m", "0.596", "--display-height-m", "0.335",
                         "--display-px", "3840", "--v-pixels", "2160", "--distance-m", "1.0")
    assert code == 0
    assert doc["schema"] == 1
    row = doc["rows"][0]
    assert row["display_ppd"] == pytest.approx(112.4, abs=0.1)
    assert row["threshold_ppd"] == pytest.approx(95.4, abs=0.1)
    assert row["verdict"] == "exceeds"
    assert row["fraction_satisfied"] == pytest.approx(0.94, abs=0.01)


def test_calc_fhd_tv_falls_short_for_most_observers(capsys):
    code, doc = run_json(capsys, "calc", "--display", "fhd_tv_55", "--distance-heights", "3.2",
                         "--percentile", "0.95")
    assert code == 0
    row = doc["rows"][0]
    assert row["display_ppd"] == pytest.approx(60.3, abs=0.1)
    assert row["verdict"] == "falls short"


def test_calc_with_movement_plan(capsys):
    code, doc = run_json(capsys, "calc", "--display", "eizo_cs2740", "--distance-m", "1.4",
                         "--plan-target-ppd", "50")
    assert code == 0
    selected = [r for r in doc["plan"] if r["selected"]]
    assert len(selected) == 1
    assert selected[0]["factor"] == 3
    assert selected[0]["direction"] == "toward observer"


def test_calc_table_output(capsys):
    assert main(["calc", "--display", "uhd_tv_55", "--distance-m", "2.0"]) == 0
    out = capsys.readouterr().out
    assert "display_ppd" in out and "verdict" in out


def test_curves_1c_crossing(capsys):
    assert main(["curves", "--figure", "1c"]) == 0
    frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
    p95 = frame[np.isclose(frame["percentile"], 0.95)].sort_values("distance_heights")
    crossing = p95[p95["required_lines"] <= 1080]["distance_heights"].iloc[0]
    assert crossing == pytest.approx(6.2, abs=0.4)


def test_curves_1d_row_count(capsys, tmp_path):
    path = tmp_path / "fig1d.csv"
    assert main(["curves", "--figure", "1d", "--output", str(path)]) == 0
    frame = pd.read_csv(path)
    assert len(frame) == 91 * 5
    assert list(frame.columns) == ["distance_m", "percentile", "threshold_ppd", "required_ppi"]


def test_curves_1b_json(capsys):
    code, doc = run_json(capsys, "curves", "--figure", "1b", "--channels", "rg", "--percentiles", "0.5",
                         "--stop", "2")
    assert code == 0
    assert doc["figure"] == "1b"
    assert [r["eccentricity_deg"] for r in doc["rows"]] == [0.0, 1.0, 2.0]


def test_fit_table_b_means(capsys, table_b_csv, tmp_path):
    model_path = tmp_path / "refit.json"
    code, doc = run_json(capsys, "fit", "--input", str(table_b_csv), "--output-model", str(model_path))
    assert code == 0
    assert [r["channel"] for r in doc["results"]] == ["achromatic", "red_green", "yellow_violet"]
    for result in doc["results"]:
        assert set(result["estimates"]) == {"log_s0", "k_rho", "k_ecc"}
        assert result["converged"] is True
    refit = json.loads(model_path.read_text())
    assert set(refit["channels"]) == {"achromatic", "red_green", "yellow_violet"}


def test_simulate_recovers_threshold(capsys, tmp_path):
    trials = tmp_path / "trials.csv"
    code, doc = run_json(capsys, "simulate", "--true-threshold-ppd", "60", "--sessions", "100",
                         "--seed", "7", "--trials-output", str(trials))
    assert code == 0
    summary = doc["summary"]
    assert summary["mean_ppd"] == pytest.approx(60.0, abs=3.0)
    assert 30 <= summary["min_updates"] <= summary["max_updates"] <= 50
    assert {"value", "correct"} <= set(pd.read_csv(trials).columns)


def test_simulate_channel_and_eccentricity(capsys, tmp_path, model):
    trials = tmp_path / "trials.csv"
    code, doc = run_json(capsys, "simulate", "--channel", "rg", "--eccentricity", "10", "--sessions", "3",
                         "--seed", "1", "--trials-output", str(trials))
    assert code == 0
    summary = doc["summary"]
    assert summary["channel"] == "red_green"
    assert summary["eccentricity_deg"] == 10.0
    assert summary["true_threshold_ppd"] == pytest.approx(threshold_resolution(model["rg"], 10.0))
    frame = pd.read_csv(trials)
    assert set(frame["channel"]) == {"red_green"}
    assert set(frame["eccentricity_deg"]) == {10.0}


def test_simulate_is_reproducible(capsys):
    _, first = run_json(capsys, "simulate", "--sessions", "5", "--seed", "3")
    _, second = run_json(capsys, "simulate", "--sessions", "5", "--seed", "3")
    assert first == second


def test_foveate_bundled_scene(capsys, tmp_path):
    out_png, stats = tmp_path / "out.png", tmp_path / "stats.json"
    code = main(["foveate", "--ppd", "60", "--output", str(out_png), "--stats", str(stats)])
    assert code == 0
    assert out_png.exists()
    report = json.loads(stats.read_text())
    assert set(report["zeroed_fraction"]) == {"achromatic", "red_green", "yellow_violet"}


def test_foveate_all_pass_json(capsys):
    code, doc = run_json(capsys, "foveate", "--ppd", "60", "--all-pass", "--gaze", "10,20")
    assert code == 0
    assert all(v == 0.0 for v in doc["zeroed_fraction"].values())


def test_foveate_with_width_pixels_and_distance(capsys):
    code, doc = run_json(capsys, "foveate", "--display-width-m", "0.6", "--display-px", "3840",
                         "--distance-m", "0.8")
    assert code == 0
    square = DisplayGeometry(0.6, 0.6, 3840, 3840, 0.8)
    assert doc["image_ppd"] == pytest.approx(center_ppd(square))


@pytest.mark.parametrize("argv", [
    ["calc", "--distance-m", "1.0"],
    ["calc", "--display", "no_such_display", "--distance-m", "1.0"],
    ["calc", "--display", "fhd_tv_55"],
    ["calc", "--display", "fhd_tv_55", "--display-px", "100", "--distance-m", "1.0"],
    ["foveate"],
    ["simulate", "--sessions", "0"],
    ["simulate", "--eccentricity", "-1"],
    ["simulate", "--population-file", "population.json"],
    ["foveate", "--display-width-m", "0.6", "--distance-m", "0.8"],
    ["calc", "--display-width-m", "0.6", "--display-px", "3840", "--distance-heights", "3"],
    ["unknown"],
    ["calc", "--display", "fhd_tv_55", "--distance-m", "1", "--distance-heights", "2"],
])
def test_usage_errors_exit_2(argv):
    assert main(argv) == 2


def test_computation_errors_exit_1(tmp_path):
    assert main(["calc", "--display", "fhd_tv_55", "--distance-m", "1", "--percentile", "1.5"]) == 1
    assert main(["fit", "--input", str(tmp_path / "missing.csv")]) == 1
