"""Command-line front-ends: nc-relay, nc-channel, nc-traffic, nc-model, nc-lab."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import signal
import sys
from fractions import Fraction

from ._net import parse_addr
from .block_codec import CodingParams
from .channel import ChannelConfig, ChannelRelay
from .relay import RelayConfig, make_proxy, write_counters_csv


def _setup_logging(verbose: bool):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)


def _stop_on_signals(service):
    def handler(signum, frame):
        service.request_stop()
    for sig in (signal.SIGTERM, signal.SIGINT):
        signal.signal(sig, handler)


def _announce(service):
    host, port = service.address[:2]
    print(f"READY {host}:{port}", flush=True)


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; '#' starts a comment. Keys use CLI spelling without dashes."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_overrides(parser, argv, env_prefix):
    """Defaults < --config file < environment (PREFIX_OPTION) < command line."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    dests = {a.dest: a for a in parser._actions if a.dest not in ("help", "config")}
    overrides = {}
    if known.config:
        overrides.update(read_config_file(known.config))
    for dest in dests:
        val = os.environ.get(f"{env_prefix}_{dest.upper()}")
        if val is not None:
            overrides[dest] = val
    typed = {}
    for key, val in overrides.items():
        action = dests.get(key)
        if action is None:
            raise SystemExit(f"unknown option {key!r} in config/environment")
        typed[key] = action.type(val) if action.type else val
    parser.set_defaults(**typed)


# -- nc-relay ----------------------------------------------------------------

def relay_parser():
    p = argparse.ArgumentParser(prog="nc-relay", description="RLNC encoder/decoder UDP proxy")
    p.add_argument("role", choices=["encode", "decode", "passthrough"])
    p.add_argument("--config", help="key=value file with option defaults")
    p.add_argument("--host", default="127.0.0.1", help="address to bind")
    p.add_argument("--app-port", type=int, default=5201)
    p.add_argument("--coded-port", type=int, default=5202)
    p.add_argument("--peer", help="host[:port] to send to (encoder: coded side, decoder: consumer)")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--n", type=int, default=15)
    p.add_argument("--symbol-size", type=int, default=1202)
    p.add_argument("--release", choices=["burst", "early"], default="burst")
    p.add_argument("--idle-timeout-ms", type=float, default=50.0)
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--metrics-csv")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def relay_main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    parser = relay_parser()
    _apply_overrides(parser, argv, "NC_RELAY")
    a = parser.parse_args(argv)
    _setup_logging(a.verbose)
    role = {"encode": "encoder", "decode": "decoder", "passthrough": "passthrough"}[a.role]
    cfg = RelayConfig(
        role=role, app_port=a.app_port, coded_port=a.coded_port, peer=a.peer, host=a.host,
        coding=CodingParams(a.k, a.n, a.symbol_size), release=a.release,
        idle_timeout_ms=a.idle_timeout_ms, seed=a.seed, window=a.window,
    )
    proxy = make_proxy(cfg)
    _stop_on_signals(proxy)
    _announce(proxy)
    proxy.serve()
    counters = proxy.counters()
    if a.metrics_csv:
        write_counters_csv(a.metrics_csv, counters)
    print(json.dumps(counters, sort_keys=True), flush=True)
    return 0


# -- nc-channel ---------------------------------------------------------------

def channel_main(argv=None):
    p = argparse.ArgumentParser(prog="nc-channel", description="seeded i.i.d. erasure channel (UDP forwarder)")
    p.add_argument("--listen", required=True, help="host:port")
    p.add_argument("--forward", required=True, help="host:port")
    p.add_argument("--loss", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delay-ms", type=float, default=0.0)
    p.add_argument("--jitter-ms", type=float, default=0.0)
    p.add_argument("--metrics-csv")
    p.add_argument("-v", "--verbose", action="store_true")
    a = p.parse_args(argv)
    _setup_logging(a.verbose)
    cfg = ChannelConfig(a.loss, a.seed, a.delay_ms, a.jitter_ms)
    relay = ChannelRelay(cfg, parse_addr(a.listen), parse_addr(a.forward))
    _stop_on_signals(relay)
    _announce(relay)
    relay.serve()
    counters = relay.counters.snapshot()
    if a.metrics_csv:
        write_counters_csv(a.metrics_csv, counters)
    print(json.dumps(counters, sort_keys=True), flush=True)
    return 0


# -- nc-traffic ---------------------------------------------------------------

def traffic_main(argv=None):
    from .traffic import Sink, TrafficConfig, generate

    p = argparse.ArgumentParser(prog="nc-traffic", description="paced UDP sender and measuring sink")
    sub = p.add_subparsers(dest="cmd", required=True)
    s = sub.add_parser("send")
    s.add_argument("--rate", type=float, default=10e6, help="bits per second")
    s.add_argument("--size", type=int, default=1200, help="payload octets")
    s.add_argument("--duration", type=float, default=10.0, help="seconds")
    s.add_argument("--dest", required=True, help="host:port")
    k = sub.add_parser("sink")
    k.add_argument("--listen", required=True, help="host:port")
    k.add_argument("--csv", help="write the final report here")
    k.add_argument("--idle-timeout", type=float, default=0.0,
                   help="stop after this many idle seconds once traffic started (0: run until signalled)")
    a = p.parse_args(argv)

    if a.cmd == "send":
        rep = generate(TrafficConfig(a.rate, a.size, a.duration), parse_addr(a.dest))
        print(json.dumps(rep.as_dict(), sort_keys=True), flush=True)
        return 0

    sink = Sink(parse_addr(a.listen), idle_timeout=a.idle_timeout or None)
    _stop_on_signals(sink)
    _announce(sink)
    sink.serve()
    report = sink.report()
    if a.csv:
        with open(a.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=sorted(report))
            w.writeheader()
            w.writerow(report)
    print(json.dumps(report, sort_keys=True), flush=True)
    return 0


# -- nc-model -----------------------------------------------------------------

def model_main(argv=None):
    from . import models

    p = argparse.ArgumentParser(prog="nc-model", description="HARQ/ARQ vs network coding transmission cost")
    p.add_argument("--r", default="0.1,0.2", help="loss rate(s), comma separated")
    p.add_argument("--cr", default="2/3", help="code rate K/N")
    p.add_argument("--mode", choices=["closed", "mc-min", "mc-max", "mc-uniform"], default="closed")
    p.add_argument("--trials", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--harq-max-tx", type=int, default=5)
    p.add_argument("--arq-max-rounds", type=int, default=8)
    p.add_argument("--csv", action="store_true", help="CSV instead of an aligned table")
    a = p.parse_args(argv)

    params = models.RetxParams(a.harq_max_tx, a.arq_max_rounds)
    cr = Fraction(a.cr)
    rows = []
    for r in (Fraction(x.strip()) for x in a.r.split(",") if x.strip()):
        if a.mode == "closed":
            rows.append({
                "r": r, "cr": cr,
                "p_ha_min": models.p_ha_min(r, params),
                "p_ha_max": models.p_ha_max(r, params),
                "p_nc": models.p_nc(cr),
                "p_nc_capacity": models.p_nc_capacity(r),
                "nc_advantage": models.nc_advantage(r, params),
            })
        else:
            res = models.mc_harq_arq_cost(params, r, a.trials, a.seed, mode=a.mode[3:])
            rows.append({"r": r, "model": res.model, "mean": res.mean, "stderr": res.stderr,
                         "trials": res.trials})
    cols = list(rows[0]) if rows else []
    fmt = lambda v: f"{float(v):.6g}" if isinstance(v, (Fraction, float)) else str(v)
    if a.csv:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([fmt(row[c]) for c in cols])
    else:
        print("  ".join(f"{c:>13}" for c in cols))
        for row in rows:
            print("  ".join(f"{fmt(row[c]):>13}" for c in cols))
    return 0


# -- nc-lab -------------------------------------------------------------------

def lab_main(argv=None):
    from pathlib import Path

    from . import lab

    p = argparse.ArgumentParser(prog="nc-lab", description="loopback experiment campaigns")
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run")
    r.add_argument("--spec", required=True, help="campaign file")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--remote", help="host:port of a remote decoder; local decoder and sink are skipped")
    c = sub.add_parser("report")
    c.add_argument("--csv", required=True, help="campaign.csv")
    p.add_argument("-v", "--verbose", action="store_true")
    a = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING)

    if a.cmd == "run":
        path = lab.run_campaign(lab.load_campaign(a.spec), a.out, remote=a.remote)
        print(path)
        report, warnings = lab.compare_report(path)
    else:
        report, warnings = lab.compare_report(Path(a.csv))
    print(lab.format_report(report, warnings))
    return 0


TOOLS = {
    "relay": relay_main,
    "channel": channel_main,
    "traffic": traffic_main,
    "model": model_main,
    "lab": lab_main,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    if not argv or argv[0] not in TOOLS:
        print(f"usage: python -m ncfec {{{','.join(TOOLS)}}} ...", file=sys.stderr)
        return 2
    return TOOLS[argv[0]](argv[1:])
