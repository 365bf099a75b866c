"""clook command line: run scenarios, replay traces, serve the live gateway."""

from __future__ import annotations

import json
import logging
import os
import sys
import time

import click

from .gateway import Gateway, serve_forever
from .scenario import (ScenarioError, SimConfig, load_config, load_scenario,
                       read_trace)
from .sim import replay_samples, run


def _setup_logging():
    level = os.environ.get("CLOOK_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


@click.group()
def main():
    """Software twin of a clock that reacts to being watched."""
    _setup_logging()


@main.command("run")
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--trace-out", type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=None)
def run_cmd(scenario_path, config_path, trace_out, seed):
    """Run a scenario deterministically; print metrics as JSON."""
    try:
        scenario = load_scenario(scenario_path)
        config = load_config(config_path) if config_path else SimConfig()
    except ScenarioError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    trace, metrics = run(scenario, config, seed=seed)
    if trace_out:
        with open(trace_out, "w", encoding="utf-8") as f:
            for ev in trace:
                f.write(ev.to_json() + "\n")
    click.echo(json.dumps(metrics.to_dict(), sort_keys=True, indent=2))


@main.command("replay")
@click.option("--trace", "trace_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--speed", type=float, default=float("inf"),
              help="Real-time pacing factor; inf replays as fast as possible.")
def replay_cmd(trace_path, speed):
    """Re-emit the DISPLAY_SAMPLE stream of a trace file."""
    try:
        trace = read_trace(trace_path)
    except (OSError, ValueError, KeyError) as e:
        click.echo(f"error: invalid trace: {e}", err=True)
        sys.exit(2)
    samples = replay_samples(trace)
    prev_t = None
    for ev in samples:
        if prev_t is not None and speed > 0 and speed != float("inf"):
            time.sleep((ev.t_ms - prev_t) / 1000.0 / speed)
        prev_t = ev.t_ms
        click.echo(ev.to_json())


@main.command("serve")
@click.option("--listen", default="127.0.0.1:7600", show_default=True)
@click.option("--peer", default=None, help="host:port of the paired gateway.")
@click.option("--tz-offset", type=int, default=0, show_default=True,
              help="Minutes east of UTC.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def serve_cmd(listen, peer, tz_offset, config_path):
    """Run the live gateway (newline-delimited JSON over TCP)."""
    def parse_addr(s):
        host, _, port = s.rpartition(":")
        if not host or not port.isdigit():
            click.echo(f"error: bad address {s!r}", err=True)
            sys.exit(2)
        return host, int(port)

    try:
        config = load_config(config_path) if config_path else SimConfig()
    except ScenarioError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    gw = Gateway(listen=parse_addr(listen),
                 peer=parse_addr(peer) if peer else None,
                 tz_offset_minutes=tz_offset, config=config,
                 local_id=listen, peer_id=peer)
    serve_forever(gw)


if __name__ == "__main__":
    main()
