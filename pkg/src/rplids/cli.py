"""Command-line client for the rplids service.

Every subcommand talks to the HTTP API. Without --server the app is mounted
in-process over an ASGI transport, so the CLI works standalone; with --server
the same requests go to a remote instance (paths are then server-side).
"""

from __future__ import annotations

import asyncio
import sys
import time
from functools import lru_cache
from typing import Optional

import click
import httpx


@lru_cache(maxsize=4)
def _local_app(config_path: Optional[str]):
    from .service.app import create_app  # noqa: PLC0415 - lazy, keeps CLI startup fast

    return create_app(config_path)


class Client:
    def __init__(self, server: Optional[str], config_path: Optional[str]):
        self.server = server
        self.config_path = config_path

    def call(self, method: str, path: str, payload: Optional[dict] = None) -> dict:
        if self.server:
            with httpx.Client(base_url=self.server, timeout=None) as client:
                resp = client.request(method, path, json=payload)
        else:
            app = _local_app(self.config_path)

            async def _go():
                transport = httpx.ASGITransport(app=app)
                async with httpx.AsyncClient(
                    transport=transport, base_url="http://rplids.local", timeout=None
                ) as client:
                    return await client.request(method, path, json=payload)

            resp = asyncio.run(_go())
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except Exception:  # noqa: BLE001
                detail = resp.text
            raise click.ClickException(f"{method} {path} -> {resp.status_code}: {detail}")
        return resp.json()


pass_client = click.make_pass_decorator(Client)


@click.group()
@click.option("--server", default=None, help="Base URL of a running service; default is in-process.")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True),
              help="key = value config file overriding the built-in defaults.")
@click.pass_context
def main(ctx, server, config_path):
    """Batch workbench for RPL routing attacks and IDS placement."""
    ctx.obj = Client(server, config_path)


@main.command()
@click.option("--rq", type=click.IntRange(1, 3), required=True)
@click.option("--scheme", default=None, help="Voting scheme for rq 3 (minority or 50/60/70/80).")
@click.option("--horizon", type=float, default=None, help="Run length in seconds.")
@click.option("--seed", type=int, default=None)
@click.option("--seeds", type=int, default=None, help="Replicate the plan over seeds 1..N.")
@click.option("-o", "--output", required=True, type=click.Path())
@pass_client
def gen(client, rq, scheme, horizon, seed, seeds, output):
    """Generate the scenario plan for one research question."""
    payload = {
        "rq": rq,
        "scheme": scheme,
        "horizon_s": horizon,
        "seed": seed,
        "seeds": list(range(1, seeds + 1)) if seeds else None,
        "output_path": output,
    }
    data = client.call("POST", "/plans", payload)
    click.echo(f"{data['count']} scenarios written to {data['path']}")


@main.command()
@click.option("--plan", required=True, type=click.Path())
@click.option("--horizon", type=float, default=None,
              help="Ignored unless regenerating; horizons live in the plan file.")
@click.option("--seed", type=int, default=None, help="Informational; seeds live in the plan file.")
@click.option("--jobs", type=int, default=1)
@click.option("--cache", "cache_dir", required=True, type=click.Path())
@click.option("-o", "--output", required=True, type=click.Path())
@click.option("--no-resume", is_flag=True, help="Recompute rows even if present in the output.")
@click.option("--poll", type=float, default=0.5, show_default=True, help="Status poll interval (s).")
@pass_client
def run(client, plan, horizon, seed, jobs, cache_dir, output, no_resume, poll):
    """Execute a plan file into a results CSV (resumable, cache-backed)."""
    payload = {
        "plan_path": plan,
        "output_path": output,
        "cache_dir": cache_dir,
        "jobs": jobs,
        "resume": not no_resume,
    }
    job = client.call("POST", "/runs", payload)
    job_id = job["job_id"]
    last = -1
    while job["state"] in ("pending", "running"):
        time.sleep(poll)
        job = client.call("GET", f"/runs/{job_id}")
        if job["completed"] != last:
            last = job["completed"]
            click.echo(f"\r{job['completed']}/{job['total']} scenarios", nl=False)
    click.echo()
    if job["state"] == "failed":
        raise click.ClickException(job["error"] or "run failed")
    summary = job["summary"]
    click.echo(
        f"done: {summary['computed']} computed, {summary['skipped']} skipped, "
        f"{summary['failed']} failed -> {summary['output']}"
    )
    if summary["failures"]:
        for f in summary["failures"][:10]:
            click.echo(f"  failed: {f}", err=True)


@main.command()
@click.option("--results", required=True, type=click.Path())
@click.option("--table", required=True,
              type=click.Choice(["root-accuracy", "best", "voting", "tpr-fpr", "by-count"]))
@click.option("-o", "--output", default=None, type=click.Path())
@pass_client
def report(client, results, table, output):
    """Aggregate a results CSV into one of the summary tables."""
    data = client.call("POST", "/reports", {
        "results_path": results, "table": table, "output_path": output,
    })
    widths = [max(len(str(c)), *(len(str(r[i])) for r in data["rows"]), 1) if data["rows"] else len(str(c))
              for i, c in enumerate(data["columns"])]
    click.echo("  ".join(str(c).ljust(w) for c, w in zip(data["columns"], widths)))
    for row in data["rows"]:
        click.echo("  ".join(str(v).ljust(w) for v, w in zip(row, widths)))
    if output:
        click.echo(f"written to {output}")


@main.command()
@click.option("--results", required=True, type=click.Path())
@click.option("-o", "--out-dir", required=True, type=click.Path())
@click.option("--render/--no-render", default=True, help="Also print shaded grids.")
@pass_client
def heatmap(client, results, out_dir, render):
    """Write per-attack (ID x attacker) accuracy grids as CSV matrices."""
    data = client.call("POST", "/heatmaps", {
        "results_path": results, "out_dir": out_dir, "render": render,
    })
    for path in data["files"]:
        click.echo(path)
    for attack, text in data.get("rendered", {}).items():
        click.echo(f"\n[{attack}]")
        click.echo(text)


@main.command()
@click.option("--dump", is_flag=True, default=False, help="Print the id,x,y,level table.")
@pass_client
def topo(client, dump):
    """Show the deployment grid."""
    data = client.call("GET", "/topology")
    if dump:
        click.echo(data["table"], nl=False)
    else:
        click.echo(
            f"{data['cols']}x{data['rows']} grid, {data['spacing_m']:g} m spacing, "
            f"{data['tx_range_m']:g} m tx range, {len(data['nodes'])} nodes"
        )


@main.command()
@click.option("--show", is_flag=True, default=True, help="Print the effective configuration.")
@pass_client
def config(client, show):
    """Show every configurable default as key = value lines."""
    data = client.call("GET", "/config")
    if show:
        click.echo(data["text"], nl=False)


@main.command()
@click.option("--attack", default=None, type=click.Choice(["DR", "IV", "BH", "SF", "WP", "DI", "HF"]))
@click.option("--attacker", default=None, type=int)
@click.option("--start", "start_time_s", default=None, type=float)
@click.option("--seed", default=None, type=int)
@click.option("--horizon", default=None, type=float)
@click.option("--trace", "show_trace", is_flag=True, help="Print the first trace lines.")
@click.option("--trace-limit", default=50, show_default=True)
@pass_client
def simulate(client, attack, attacker, start_time_s, seed, horizon, show_trace, trace_limit):
    """Run a single simulation and print its digest and summary counters."""
    data = client.call("POST", "/simulate", {
        "attack": attack,
        "attacker": attacker,
        "start_time_s": start_time_s,
        "seed": seed,
        "horizon_s": horizon,
        "include_trace": show_trace,
        "trace_limit": trace_limit,
    })
    click.echo(f"digest {data['digest']}  events {data['event_count']}")
    click.echo(f"all joined at {data['all_joined_s']} s, root routes {data['root_routes']}")
    for key in sorted(data["counters"]):
        click.echo(f"  {key} = {data['counters'][key]}")
    for line in data["trace_head"]:
        click.echo(line)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@pass_client
def serve(client, host, port):
    """Run the HTTP service."""
    import uvicorn  # noqa: PLC0415

    uvicorn.run(_local_app(client.config_path), host=host, port=port)


if __name__ == "__main__":
    main()
