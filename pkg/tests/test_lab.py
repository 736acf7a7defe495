import json
import math
import os
import subprocess
import sys
from fractions import Fraction

import pytest

from ncfec import cli, lab
from ncfec.metrics import CSV_COLUMNS, emit_csv, read_csv

CAMPAIGN = """
[campaign]
rate = 2e6
duration = 1
loss_grid = 0, 0.2
seed = 7

[plain]
correction = none

[nc23]
correction = nc
k = 10
n = 15

[harq_min]
correction = harq_arq_min

[harq_max]
correction = harq_arq_max
loss_grid = 0.1
"""


@pytest.fixture
def campaign_file(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(CAMPAIGN)
    return p


def test_load_campaign(campaign_file):
    specs = {s.name: s for s in lab.load_campaign(campaign_file)}
    assert list(specs) == ["plain", "nc23", "harq_min", "harq_max"]
    assert specs["nc23"].coding.k == 10 and specs["nc23"].coding.symbol_size == 1202
    assert specs["nc23"].code_rate == pytest.approx(2 / 3)
    assert specs["plain"].loss_grid == [0.0, 0.2]
    assert specs["harq_max"].loss_grid == [0.1]
    assert specs["plain"].rate == 2e6 and specs["plain"].seed == 7
    assert not specs["harq_min"].live


def test_load_campaign_rejects_bad(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[x]\ncorrection = magic\n")
    with pytest.raises(ValueError):
        lab.load_campaign(p)
    p.write_text("[campaign]\nrate = 1\n")
    with pytest.raises(ValueError):
        lab.load_campaign(p)


def test_model_rows():
    spec = lab.ScenarioSpec("h", correction="harq_arq_max", loss_grid=[0.2])
    row = lab.model_row(spec, 0.2)
    assert row["tx_per_source_packet"] == pytest.approx(5.3)
    assert row["delivered_loss"] == 0.0
    assert math.isnan(row["code_rate"])


def _rows():
    base = dict(throughput_mbps=10, jitter_ms=1.0, delivered_loss=0.0)
    return [
        dict(scenario="plain", loss_rate=0.2, code_rate=1.0, tx_per_source_packet=1.0, **base),
        dict(scenario="nc23", loss_rate=0.2, code_rate=2 / 3, tx_per_source_packet=1.5, **base),
        dict(scenario="nc15", loss_rate=0.1, code_rate=0.2, tx_per_source_packet=5.0, **base),
    ]


def test_compare_report_values():
    report, warnings = lab.compare_report(emit_csv(_rows()))
    e = report[0]
    assert e["code_rate"] == Fraction(2, 3)
    assert e["nc_tx_nominal"] == Fraction(3, 2)
    assert float(e["p_ha_min"]) == pytest.approx(1.6)
    assert float(e["p_ha_max"]) == pytest.approx(5.3)
    assert e["nc_cheaper"]
    assert not report[1]["nc_cheaper"]
    assert warnings == ["r=0.1: no uncorrected baseline row"]
    text = lab.format_report(report, warnings)
    assert "nc23" in text and "warning" in text


def test_compare_report_flags_failed_runs(tmp_path):
    rows = _rows()[:2]
    rows[1]["delivered_loss"] = math.nan
    path = tmp_path / "campaign.csv"
    path.write_text(emit_csv(rows))
    _, warnings = lab.compare_report(str(path))
    assert any("failed" in w for w in warnings)


def test_compare_report_without_nc():
    _, warnings = lab.compare_report(emit_csv(_rows()[:1]))
    assert warnings == ["no network-coding rows in campaign"]


def test_config_file_and_env_overrides(tmp_path, monkeypatch):
    conf = tmp_path / "relay.conf"
    conf.write_text("# test\nk = 8\nn = 12\nrelease = early\n")
    parser = cli.relay_parser()
    monkeypatch.setenv("NC_RELAY_N", "16")
    cli._apply_overrides(parser, ["encode", "--config", str(conf)], "NC_RELAY")
    a = parser.parse_args(["encode", "--config", str(conf), "--seed", "4"])
    assert (a.k, a.n, a.release, a.seed) == (8, 16, "early", 4)
    # command line wins
    a = parser.parse_args(["encode", "--n", "20"])
    assert a.n == 20


def test_config_unknown_key(tmp_path):
    conf = tmp_path / "relay.conf"
    conf.write_text("bogus = 1\n")
    with pytest.raises(SystemExit):
        cli._apply_overrides(cli.relay_parser(), ["--config", str(conf)], "NC_RELAY")


def test_model_cli(capsys):
    assert cli.model_main(["--r", "0.2", "--cr", "2/3", "--csv"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].split(",") == ["r", "cr", "p_ha_min", "p_ha_max", "p_nc", "p_nc_capacity", "nc_advantage"]
    assert out[1].split(",") == ["0.2", "0.666667", "1.6", "5.3", "1.5", "1.25", "4.24"]


def test_main_usage():
    assert cli.main([]) == 2


@pytest.mark.slow
def test_short_campaign(campaign_file, tmp_path):
    out = tmp_path / "out"
    proc = subprocess.run([sys.executable, "-m", "ncfec", "lab", "run", "--spec", str(campaign_file),
                           "--out", str(out)], capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    rows = read_csv((out / "campaign.csv").read_text())
    assert len(rows) == 2 + 2 + 2 + 1
    by = {(r["scenario"], r["loss_rate"]): r for r in rows}
    assert by[("plain", 0.0)]["delivered_loss"] == 0.0
    assert by[("plain", 0.2)]["delivered_loss"] == pytest.approx(0.2, abs=0.06)
    assert by[("nc23", 0.0)]["delivered_loss"] == 0.0
    assert by[("nc23", 0.0)]["tx_per_source_packet"] == pytest.approx(1.5, abs=0.05)
    assert by[("nc23", 0.2)]["delivered_loss"] < by[("plain", 0.2)]["delivered_loss"]
    assert by[("harq_max", 0.1)]["tx_per_source_packet"] == pytest.approx(3.15)
    assert (out / "campaign.csv").read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    summary = json.loads((out / "runs" / "nc23_r0.2" / "summary.json").read_text())
    assert set(summary) == {"sink", "decoder", "channel", "encoder", "generator"}
    assert "NC<HA,min" in proc.stdout
