import csv
import json
import math

import pytest
from click.testing import CliRunner

from noisecert.cli import main
from noisecert.pipeline import ConfigError, ResultRow, load_config, read_json_rows

SMALL = ["--map", "doubling", "--log2-delta", "8", "--log2-delta-contr", "6", "--log2-delta-est", "4"]


def _run(tmp_path, *args):
    out = tmp_path / "out"
    res = CliRunner().invoke(main, ["run", *SMALL, "--out-dir", str(out), *args])
    return res, out


def _csv_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_empty_xi_list_is_a_usage_error(tmp_path):
    res, _ = _run(tmp_path)
    assert res.exit_code == 2
    assert "xi" in res.output


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('xi = [0.1]\nbogus = 1\n')
    with pytest.raises(ConfigError):
        load_config(str(cfg))
    res = CliRunner().invoke(main, ["run", "--config", str(cfg)])
    assert res.exit_code == 2


def test_toml_config_with_overrides(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('map = "tent"\nxi = [0.1, 0.2]\nlog2_delta = 9\n')
    c = load_config(str(cfg), log2_delta=8, log2_delta_contr=6, log2_delta_est=4)
    assert (c.map, c.xi, c.log2_delta) == ("tent", [0.1, 0.2], 8)


def test_single_row_outputs(tmp_path):
    res, out = _run(tmp_path, "--xi", "0.25")
    assert res.exit_code == 0, res.output
    rows = _csv_rows(out / "results.csv")
    assert len(rows) == 2
    assert tuple(rows[0]) == ResultRow.CSV_FIELDS
    row = dict(zip(rows[0], rows[1]))
    assert row["verdict"] == "positive"
    assert float(row["lyapunov_lo"]) <= math.log(2) <= float(row["lyapunov_hi"])
    back = read_json_rows(out / "results.json")
    assert back[0].lyapunov_lo == float(row["lyapunov_lo"])
    assert back[0].provenance["map"] == "doubling"
    assert ResultRow.from_json(back[0].to_json()) == back[0]


def test_plot_data_sorted_and_deterministic(tmp_path):
    res, out = _run(tmp_path, "--xi", "0.3", "--xi", "0.2")
    assert res.exit_code == 0, res.output
    lines = [ln.split() for ln in (out / "lyapunov.dat").read_text().splitlines() if not ln.startswith("#")]
    xs = [float(ln[0]) for ln in lines]
    assert xs == sorted(xs) == [0.2, 0.3]
    first = _csv_rows(out / "results.csv")
    res2, out2 = _run(tmp_path / "again", "--xi", "0.3", "--xi", "0.2")
    second = _csv_rows(out2 / "results.csv")
    drop = first[0].index("wall_clock")
    strip = lambda rows: [r[:drop] + r[drop + 1:] for r in rows]
    assert strip(first) == strip(second)


def test_failure_is_isolated(tmp_path):
    out = tmp_path / "o"
    res = CliRunner().invoke(main, ["run", "--map", "identity", "--xi", "0.0001", "--log2-delta", "6",
                                    "--log2-delta-contr", "6", "--log2-delta-est", "3", "--out-dir", str(out)])
    assert res.exit_code == 1
    rows = _csv_rows(out / "results.csv")
    assert rows[1][rows[0].index("verdict")] == "failed"
    assert read_json_rows(out / "results.json")[0].diagnostics


def test_stability_command(tmp_path):
    out = tmp_path / "s.json"
    res = CliRunner().invoke(main, ["stability", "--sum-ci", "67.55", "--alpha", "0.55", "--n-bar", "75",
                                    "--xi", "0.873e-4", "--out", str(out)])
    assert res.exit_code == 0, res.output
    rep = json.loads(out.read_text())
    assert float(rep["map_l1_coefficient"]["hi"]) == pytest.approx(3.44e6, rel=0.01)
