import csv
import io
import json

import numpy as np
import pytest

from devvoi import cli, synth

SYNTH_CFG = """\
command = synth-check
T = 120
future_sizes = 0, 100, 1000
seed = 7
synth_case_mix = continuous(0|1), binary(0.25), continuous(0|1), binary(0.15), categorical(0.5|0.3|0.2)
synth_theta = -3.1, 1.5, 0.5, 0.3, 0.6, 0.2, -0.3
synth_n = 800
synth_n_mc = 100000
annual_decisions = 800000
"""


@pytest.fixture
def data_config(tmp_path):
    spec = synth.gusto_like_spec(500)
    d = synth.generate(spec, np.random.default_rng(21))
    rows = synth.to_rows(d, spec)
    with open(tmp_path / "dev.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "command = voi\n"
        "data = dev.csv\n"
        "schema = x1:continuous, x2:binary, x3:continuous, x4:binary, x5:continuous, y:outcome\n"
        "T = 100\n"
        "future_sizes = 0, 100, 1000\n"
        "seed = 3\n"
        "reporting_thresholds = 0.02, 0.21\n"
        "annual_decisions = 800000\n"
        f"out = {tmp_path / 'out'}\n"
    )
    return cfg


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_voi_command_outputs(data_config, tmp_path):
    assert cli.main(["--config", str(data_config)]) == 0
    out = tmp_path / "out"
    dc = read_csv(out / "decision_curve.csv")
    assert list(dc[0]) == ["z", "enb_none", "enb_model", "enb_all", "ci_lo", "ci_hi"]
    assert len(dc) == 99
    voi = read_csv(out / "voi.csv")
    assert list(voi[0]) == ["z", "future_n", "evpi", "evsi_raw", "evsi_clamped", "mc_se"]
    assert len(voi) == 99 * 3
    assert all(float(r["evsi_raw"]) == 0.0 for r in voi if r["future_n"] == "0")
    summary = json.loads((out / "summary.json").read_text())
    assert summary["format_version"] == 1
    assert summary["master_seed"] == 3
    assert len(summary["config_hash"]) == 64
    assert set(summary["reporting"]) == {"0.02", "0.21"}
    rep = summary["reporting"]["0.21"]
    assert rep["winner"] in ("treat_none", "use_model", "treat_all")
    assert rep["population"]["evpi"]["net_tp_per_year"] == pytest.approx(rep["evpi"] * 800000)
    assert "ridge_fallback_fits" in summary["diagnostics"]
    assert summary["config"]["T"] == "100"


def test_seed_override_and_hash(data_config, tmp_path):
    assert cli.main(["--config", str(data_config), "--seed", "11", "--out", str(tmp_path / "o2")]) == 0
    s2 = json.loads((tmp_path / "o2" / "summary.json").read_text())
    assert s2["master_seed"] == 11
    assert cli.main(["--config", str(data_config), "--seed", "11", "--threads", "2",
                     "--out", str(tmp_path / "o3")]) == 0
    s3 = json.loads((tmp_path / "o3" / "summary.json").read_text())
    assert s3["config_hash"] == s2["config_hash"]
    assert (tmp_path / "o2" / "voi.csv").read_bytes() == (tmp_path / "o3" / "voi.csv").read_bytes()


def test_decision_curve_command(data_config, tmp_path):
    text = data_config.read_text().replace("command = voi", "command = decision-curve")
    data_config.write_text(text)
    assert cli.main(["--config", str(data_config), "--out", str(tmp_path / "dc")]) == 0
    assert (tmp_path / "dc" / "decision_curve.csv").exists()
    assert not (tmp_path / "dc" / "voi.csv").exists()
    rows = read_csv(tmp_path / "dc" / "decision_curve.csv")
    for r in rows:
        assert float(r["ci_lo"]) <= float(r["ci_hi"])


def test_missing_data_file(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("command = voi\ndata = nothere.csv\nschema = a:continuous, y:outcome\n")
    assert cli.main(["--config", str(cfg)]) != 0
    err = json.loads(capsys.readouterr().err.strip())
    assert "nothere.csv" in err["message"]


def test_missing_config(tmp_path, capsys):
    assert cli.main(["--config", str(tmp_path / "none.cfg")]) == 1
    assert "none.cfg" in json.loads(capsys.readouterr().err)["message"]


def test_bad_config_values(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("command = voi\nT = lots\n")
    assert cli.main(["--config", str(cfg)]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"


def test_synth_check_strong_predictor(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(SYNTH_CFG + f"out = {tmp_path / 's'}\n")
    assert cli.main(["--config", str(cfg)]) == 0
    rows = read_csv(tmp_path / "s" / "synth_check.csv")
    mid = [r for r in rows if 0.05 <= float(r["z"]) <= 0.3]
    for r in mid:
        # the model beats both defaults, in the estimate and in the known truth
        assert float(r["enb_model"]) >= max(0.0, float(r["enb_all"]))
        assert float(r["true_nb_model"]) >= max(0.0, float(r["true_nb_all"])) - 3 * float(r["true_nb_model_se"])


def test_parse_helpers():
    specs = cli.parse_schema("age:continuous, sex:binary:M|F, milocc:categorical:3|4|5|6, dead:outcome:no|yes")
    assert [s.role for s in specs] == ["predictor"] * 3 + ["outcome"]
    assert specs[1].levels == ("M", "F") and specs[2].levels == ("3", "4", "5", "6")
    g = cli.parse_grid("0.01:0.99:0.01")
    assert len(g) == 99 and g.z_values[20] == 0.21
    assert len(cli.parse_grid("0.02, 0.21")) == 2
    assert cli.parse_marginal("categorical(0.2|0.8)").probs == (0.2, 0.8)
    with pytest.raises(cli.ConfigError):
        cli.parse_marginal("gamma(1)")


VOI_TEXT = """z,future_n,evpi,evsi_raw,evsi_clamped,mc_se
0.1,100,0.01,0.002,0.002,0.001
0.1,1000,0.01,0.006,0.006,0.001
0.2,100,0.02,-0.001,0.0,0.001
0.2,1000,0.02,0.015,0.015,0.002
"""


def test_render_plot_data():
    wide = list(csv.DictReader(io.StringIO(cli.render_plot_data(VOI_TEXT))))
    assert list(wide[0]) == ["z", "evsi_n100", "evsi_n1000", "evpi"]
    assert len(wide) == 2
    long_rows = list(csv.DictReader(io.StringIO(VOI_TEXT)))
    se = {(float(r["z"]), int(r["future_n"])): float(r["mc_se"]) for r in long_rows}
    for r in wide:
        z = float(r["z"])
        for n in (100, 1000):
            assert float(r["evpi"]) >= float(r[f"evsi_n{n}"]) - 3 * se[(z, n)]


@pytest.mark.parametrize("text", ["z,future_n,evpi,evsi_raw,evsi_clamped,mc_se\n", "a,b\n1,2\n",
                                  "z,future_n,evpi,evsi_clamped\n0.1,x,0.1,0.1\n"])
def test_render_plot_data_rejects(text):
    with pytest.raises(ValueError):
        cli.render_plot_data(text)


def test_plot_data_entry_point(tmp_path, capsys):
    p = tmp_path / "voi.csv"
    p.write_text(VOI_TEXT)
    assert cli.plot_data_main([str(p), "-o", str(tmp_path / "wide.csv")]) == 0
    assert (tmp_path / "wide.csv").read_text().startswith("z,evsi_n100,evsi_n1000,evpi")
    assert cli.plot_data_main([str(tmp_path / "missing.csv")]) == 1
