"""Campaign runner: loopback pipelines over a loss-rate grid, one CSV row per cell.

Pipeline per (scenario, r), each stage its own process:

    generator -> encoder (or passthrough) -> channel(r) -> decoder (or passthrough) -> sink

HARQ/ARQ scenarios are not run live; their rows come from the closed-form
transmission-count models for the same grid.

Campaign files are INI-style. ``[campaign]`` holds defaults inherited by
every other section; each other section is one scenario::

    [campaign]
    rate = 10e6
    duration = 30
    loss_grid = 0, 0.1, 0.2
    seed = 1

    [nc_2_3]
    correction = nc
    k = 10
    n = 15
"""

from __future__ import annotations

import configparser
import csv
import json
import logging
import math
import os
import select
import signal
import subprocess
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from ._net import free_port
from .block_codec import CodingParams
from .metrics import CSV_COLUMNS, emit_csv, read_csv
from .models import nc_advantage, p_ha_max, p_ha_min, p_nc, p_nc_capacity

log = logging.getLogger(__name__)

CORRECTIONS = ("none", "nc", "harq_arq_min", "harq_arq_max")
DEFAULT_GRID = (0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45)
READY_TIMEOUT = 15.0
# time for the encoder's idle flush and the decoder's salvage to settle
DRAIN_WAIT = 0.6


@dataclass
class ScenarioSpec:
    name: str
    correction: str = "none"
    coding: CodingParams | None = None
    loss_grid: list = field(default_factory=lambda: list(DEFAULT_GRID))
    rate: float = 10e6
    duration: float = 10.0
    seed: int = 1
    payload_size: int = 1200
    release: str = "burst"
    idle_timeout_ms: float = 50.0

    def __post_init__(self):
        if self.correction not in CORRECTIONS:
            raise ValueError(f"{self.name}: correction must be one of {CORRECTIONS}")
        if not self.loss_grid:
            raise ValueError(f"{self.name}: empty loss grid")
        if self.correction == "nc" and self.coding is None:
            raise ValueError(f"{self.name}: nc scenario needs coding parameters")
        if any(not 0 <= r <= 1 for r in self.loss_grid):
            raise ValueError(f"{self.name}: loss rates must be in [0, 1]")

    @property
    def live(self) -> bool:
        return self.correction in ("none", "nc")

    @property
    def code_rate(self) -> float:
        if self.correction == "nc":
            return float(self.coding.code_rate)
        if self.correction == "none":
            return 1.0
        return math.nan


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def load_campaign(path) -> list[ScenarioSpec]:
    cp = configparser.ConfigParser(default_section="campaign", interpolation=None)
    with open(path) as fh:
        cp.read_file(fh)
    specs = []
    for name in cp.sections():
        sec = cp[name]
        correction = sec.get("correction", "none")
        coding = None
        if correction == "nc":
            payload = sec.getint("payload_size", 1200)
            coding = CodingParams(
                k=sec.getint("k", 10),
                n=sec.getint("n", 15),
                symbol_size=sec.getint("symbol_size", payload + 2),
            )
        specs.append(ScenarioSpec(
            name=name,
            correction=correction,
            coding=coding,
            loss_grid=_floats(sec.get("loss_grid", ",".join(map(str, DEFAULT_GRID)))),
            rate=sec.getfloat("rate", 10e6),
            duration=sec.getfloat("duration", 10.0),
            seed=sec.getint("seed", 1),
            payload_size=sec.getint("payload_size", 1200),
            release=sec.get("release", "burst"),
            idle_timeout_ms=sec.getfloat("idle_timeout_ms", 50.0),
        ))
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError("scenario names must be unique")
    if not specs:
        raise ValueError(f"{path}: no scenarios")
    return specs


# -- process plumbing ---------------------------------------------------------

def _cmd(*args) -> list[str]:
    return [sys.executable, "-m", "ncfec", *map(str, args)]


class Stage:
    def __init__(self, name: str, argv: list[str]):
        self.name = name
        self.argv = argv
        self.proc = None
        self.summary = None

    def start(self, wait_ready=True):
        self.proc = subprocess.Popen(self.argv, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                                     text=True, env=_child_env())
        if wait_ready:
            self._await_ready()
        return self

    def _await_ready(self):
        deadline = time.monotonic() + READY_TIMEOUT
        while time.monotonic() < deadline:
            ready, _, _ = select.select([self.proc.stdout], [], [], 0.1)
            if ready:
                line = self.proc.stdout.readline()
                if line.startswith("READY"):
                    return
                if not line and self.proc.poll() is not None:
                    break
        err = self.proc.stderr.read() if self.proc.poll() is not None else ""
        self.kill()
        raise RuntimeError(f"{self.name} did not become ready: {err.strip()[-500:]}")

    def stop(self, timeout=20.0):
        if self.proc is None:
            return
        if self.proc.poll() is None:
            self.proc.send_signal(signal.SIGTERM)
        self.finish(timeout)

    def finish(self, timeout):
        try:
            out, err = self.proc.communicate(timeout=timeout)
        except subprocess.TimeoutExpired:
            self.kill()
            raise RuntimeError(f"{self.name} did not exit")
        if self.proc.returncode != 0:
            raise RuntimeError(f"{self.name} exited with {self.proc.returncode}: {err.strip()[-500:]}")
        for line in out.splitlines():
            if line.startswith("{"):
                self.summary = json.loads(line)
        return self.summary

    def kill(self):
        if self.proc is not None and self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()


def _child_env():
    env = dict(os.environ)
    src = str(Path(__file__).resolve().parent.parent)
    env["PYTHONPATH"] = src + (os.pathsep + env["PYTHONPATH"] if env.get("PYTHONPATH") else "")
    return env


# -- one run ----------------------------------------------------------------

def run_pipeline(spec: ScenarioSpec, r: float, workdir, remote=None) -> dict:
    """Run one live (scenario, r) cell and return the combined stage summaries."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    host = "127.0.0.1"
    sink_port, coded_port, chan_port, app_port = (free_port() for _ in range(4))
    coded = spec.correction == "nc"
    seed = spec.seed

    if coded:
        k, n, sz = spec.coding.k, spec.coding.n, spec.coding.symbol_size
        coding_args = ["--k", k, "--n", n, "--symbol-size", sz, "--release", spec.release,
                       "--idle-timeout-ms", spec.idle_timeout_ms, "--seed", seed]
        enc = _cmd("relay", "encode", "--app-port", app_port, "--coded-port", chan_port,
                   "--metrics-csv", workdir / "encoder.csv", *coding_args)
        dec = _cmd("relay", "decode", "--coded-port", coded_port, "--app-port", sink_port,
                   "--metrics-csv", workdir / "decoder.csv", *coding_args)
    else:
        enc = _cmd("relay", "passthrough", "--app-port", app_port, "--coded-port", chan_port,
                   "--peer", f"{host}:{chan_port}", "--metrics-csv", workdir / "encoder.csv")
        dec = _cmd("relay", "passthrough", "--app-port", coded_port, "--coded-port", sink_port,
                   "--peer", f"{host}:{sink_port}", "--metrics-csv", workdir / "decoder.csv")
    forward = remote or f"{host}:{coded_port}"
    chan = _cmd("channel", "--listen", f"{host}:{chan_port}", "--forward", forward,
                "--loss", r, "--seed", seed, "--metrics-csv", workdir / "channel.csv")
    sink = _cmd("traffic", "sink", "--listen", f"{host}:{sink_port}", "--csv", workdir / "sink.csv")
    send = _cmd("traffic", "send", "--rate", spec.rate, "--size", spec.payload_size,
                "--duration", spec.duration, "--dest", f"{host}:{app_port}")

    downstream = [] if remote else [Stage("sink", sink), Stage("decoder", dec)]
    stages = downstream + [Stage("channel", chan), Stage("encoder", enc)]
    started = []
    try:
        for st in stages:
            started.append(st.start())
        sender = Stage("generator", send).start(wait_ready=False)
        sender.finish(timeout=spec.duration * 3 + 30)
        time.sleep(DRAIN_WAIT)
        # upstream first so every queued datagram is flushed downstream
        for st in reversed(started):
            st.stop()
            time.sleep(0.1)
    except Exception:
        for st in started:
            st.kill()
        raise
    result = {st.name: st.summary for st in started}
    result["generator"] = sender.summary
    (workdir / "summary.json").write_text(json.dumps(result, indent=2, sort_keys=True))
    return result


def row_from_run(spec: ScenarioSpec, r: float, result: dict) -> dict:
    sent = result["generator"]["packets_sent"]
    row = {"scenario": spec.name, "loss_rate": r, "code_rate": spec.code_rate}
    sink = result.get("sink")
    if sink is None:
        row.update(throughput_mbps=math.nan, jitter_ms=math.nan, delivered_loss=math.nan)
    else:
        row.update(
            throughput_mbps=sink["throughput_mbps"],
            jitter_ms=sink["jitter_mean_ms"],
            delivered_loss=(1.0 - sink["packets_delivered"] / sent) if sent else 0.0,
        )
    enc = result.get("encoder") or {}
    if spec.correction == "nc":
        row["tx_per_source_packet"] = enc.get("tx_per_source", math.nan)
    else:
        row["tx_per_source_packet"] = 1.0
    return row


def model_row(spec: ScenarioSpec, r: float) -> dict:
    bound = p_ha_min if spec.correction == "harq_arq_min" else p_ha_max
    return {
        "scenario": spec.name,
        "loss_rate": r,
        "code_rate": math.nan,
        "throughput_mbps": spec.rate / 1e6,
        "jitter_ms": math.nan,
        "delivered_loss": 0.0,
        "tx_per_source_packet": float(bound(r)),
    }


def failed_row(spec: ScenarioSpec, r: float) -> dict:
    row = {c: math.nan for c in CSV_COLUMNS}
    row.update(scenario=spec.name, loss_rate=r, code_rate=spec.code_rate)
    return row


def run_campaign(specs, out_dir, remote=None) -> Path:
    """Run every (scenario, r) cell; writes campaign.csv, runs.csv and per-run directories."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, runs = [], []
    for spec in specs:
        for r in spec.loss_grid:
            if not spec.live:
                rows.append(model_row(spec, r))
                runs.append({"scenario": spec.name, "loss_rate": r, "status": "model"})
                continue
            workdir = out / "runs" / f"{spec.name}_r{r:g}"
            try:
                result = run_pipeline(spec, r, workdir, remote=remote)
                rows.append(row_from_run(spec, r, result))
                runs.append({"scenario": spec.name, "loss_rate": r, "status": "ok"})
            except Exception as e:
                log.error("run %s r=%g failed: %s", spec.name, r, e)
                rows.append(failed_row(spec, r))
                runs.append({"scenario": spec.name, "loss_rate": r, "status": f"failed: {e}"})
    path = out / "campaign.csv"
    path.write_text(emit_csv(rows))
    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["scenario", "loss_rate", "status"])
        w.writeheader()
        w.writerows(runs)
    return path


# -- comparison ---------------------------------------------------------------

def compare_report(rows) -> tuple[list[dict], list[str]]:
    """Per (NC scenario, r): measured NC loss and cost against the HARQ/ARQ bracket.

    ``rows`` is campaign CSV text, a path, or already-parsed rows.
    """
    if isinstance(rows, Path) or (isinstance(rows, str) and "\n" not in rows):
        rows = Path(rows).read_text()
    if isinstance(rows, str):
        rows = read_csv(rows)
    warnings = []
    nc_rows = [r for r in rows if not math.isnan(r["code_rate"]) and r["code_rate"] < 1]
    if not nc_rows:
        warnings.append("no network-coding rows in campaign")
    report = []
    for row in nc_rows:
        r = row["loss_rate"]
        cr = Fraction(row["code_rate"]).limit_denominator(255)
        entry = {
            "scenario": row["scenario"],
            "loss_rate": r,
            "code_rate": cr,
            "nc_delivered_loss": row["delivered_loss"],
            "nc_tx_nominal": p_nc(cr),
            "nc_tx_measured": row["tx_per_source_packet"],
            "p_ha_min": p_ha_min(r),
            "p_ha_max": p_ha_max(r),
            "p_nc_capacity": p_nc_capacity(r) if r < 1 else math.inf,
            "advantage": nc_advantage(r) if r < 1 else math.inf,
        }
        entry["nc_cheaper"] = entry["nc_tx_nominal"] < entry["p_ha_min"]
        if math.isnan(row["delivered_loss"]):
            warnings.append(f"{row['scenario']} r={r:g}: run failed or missing measurements")
        report.append(entry)
    baseline = {r["loss_rate"] for r in rows if r["code_rate"] == 1.0}
    for entry in report:
        if entry["loss_rate"] not in baseline:
            warnings.append(f"r={entry['loss_rate']:g}: no uncorrected baseline row")
    return report, warnings


def format_report(report, warnings) -> str:
    head = (f"{'scenario':<12} {'r':>5} {'CR':>5} {'NC loss':>9} {'NC tx':>7} "
            f"{'HA,min':>7} {'HA,max':>7} {'NC cap':>7} {'adv':>6}  NC<HA,min")
    lines = [head]
    for e in report:
        lines.append(
            f"{e['scenario']:<12} {e['loss_rate']:>5.2f} {str(e['code_rate']):>5} "
            f"{e['nc_delivered_loss']:>9.4%} {float(e['nc_tx_nominal']):>7.3f} "
            f"{float(e['p_ha_min']):>7.3f} {float(e['p_ha_max']):>7.3f} "
            f"{float(e['p_nc_capacity']):>7.3f} {float(e['advantage']):>6.3f}  "
            f"{'yes' if e['nc_cheaper'] else 'no'}"
        )
    lines += [f"warning: {w}" for w in warnings]
    return "\n".join(lines)
