"""Thin command-line client for the gridwelfare service.

Every subcommand builds a request from local files, posts it to the
service (an in-process app by default, or ``--server URL``), and writes
returned artifacts to ``--out``.  Trace references inside a config are
resolved through the ingest endpoints before the main call, so the
service only ever sees inline data.

Exit codes: 0 success, 1 validation failure, 2 invariant violation.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

VALIDATION_EXIT = 1
INVARIANT_EXIT = 2


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _fail(response: httpx.Response):
    try:
        payload = response.json()
    except ValueError:
        payload = {"kind": "internal", "message": response.text}
    kind = payload.get("kind", "internal")
    click.echo(f"error ({kind}): {payload.get('message', '')}", err=True)
    if payload.get("details"):
        click.echo(json.dumps(payload["details"], indent=2), err=True)
    sys.exit(INVARIANT_EXIT if kind == "invariant" else VALIDATION_EXIT)


def _post(client: httpx.Client, path: str, body: dict) -> dict:
    response = client.post(path, json=body)
    if response.status_code != 200:
        _fail(response)
    return response.json()


def _load_config_file(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        click.echo(f"error (validation): cannot read config {path}: {exc}", err=True)
        sys.exit(VALIDATION_EXIT)


def _apply_overrides(config: dict, seed, days, eta, pricing, market_mode):
    if seed is not None:
        config["seed"] = seed
    if days is not None:
        config["days"] = days
    if eta is not None:
        values = [float(x) for x in eta.split(",") if x.strip()]
        config["eta"] = values[0] if len(values) == 1 else values
    if pricing is not None:
        config["pricing"] = pricing
    if market_mode is not None:
        configured = config.get("market", {}).get("mode", "iid")
        if configured != market_mode:
            click.echo(
                f"error (validation): --market {market_mode} does not match the "
                f"config's market mode {configured!r}",
                err=True,
            )
            sys.exit(VALIDATION_EXIT)
    return config


def _resolve_traces(client: httpx.Client, config: dict, config_path: str) -> dict:
    """Inline any trace-file references via the ingest endpoints."""
    base = Path(config_path).parent
    market = config.get("market", {})
    if market.get("trace_paths"):
        files = []
        for p in market["trace_paths"]:
            path = Path(p) if Path(p).is_absolute() else base / p
            files.append({"name": str(path), "content": _read_text(path)})
        result = _post(client, "/ingest/prices", {"t_slots": config["t_slots"], "files": files})
        config["market"] = result["market"]
    renewable = config.get("renewable", {})
    if renewable.get("trace_path"):
        p = renewable["trace_path"]
        path = Path(p) if Path(p).is_absolute() else base / p
        result = _post(
            client,
            "/ingest/wind",
            {"t_slots": config["t_slots"], "name": str(path), "content": _read_text(path)},
        )
        config["renewable"] = {
            "atoms_per_slot": result["atoms_per_slot"],
            "x_max": renewable.get("x_max"),
        }
    return config


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"error (validation): cannot read {path}: {exc}", err=True)
        sys.exit(VALIDATION_EXIT)


def _write_artifacts(artifacts: dict, out: str | None):
    if out is None:
        return
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, content in artifacts.items():
        (out_dir / name).write_text(content, encoding="utf-8")
    click.echo(f"wrote {len(artifacts)} artifact(s) to {out_dir}")


_config_opt = click.option("--config", "config_path", required=True, type=click.Path(exists=True))
_server_opt = click.option("--server", default=None, help="remote service URL (default: in-process)")
_seed_opt = click.option("--seed", type=int, default=None)
_days_opt = click.option("--days", type=int, default=None)
_eta_opt = click.option("--eta", default=None, help="comma-separated eta list override")
_pricing_opt = click.option("--pricing", type=click.Choice(["same", "per-user"]), default=None)
_market_opt = click.option("--market", "market_mode", type=click.Choice(["iid", "markov"]), default=None)
_out_opt = click.option("--out", default=None, type=click.Path(file_okay=False))


@click.group()
def main():
    """Demand-response procurement simulator (thin client)."""


def _prepared_config(client, config_path, seed, days, eta, pricing, market_mode):
    config = _load_config_file(config_path)
    config = _apply_overrides(config, seed, days, eta, pricing, market_mode)
    return _resolve_traces(client, config, config_path)


@main.command()
@_config_opt
@_server_opt
@_seed_opt
@_days_opt
@_eta_opt
@_pricing_opt
@_market_opt
@_out_opt
def validate(config_path, server, seed, days, eta, pricing, market_mode, out):
    """Check a config against every model invariant and report bounds."""
    with _client(server) as client:
        config = _prepared_config(client, config_path, seed, days, eta, pricing, market_mode)
        result = _post(client, "/validate", {"config": config})
    click.echo(json.dumps(result["report"], indent=2, sort_keys=True))
    if not result["ok"]:
        sys.exit(VALIDATION_EXIT)


@main.command()
@_config_opt
@_server_opt
@_seed_opt
@_days_opt
@_eta_opt
@_pricing_opt
@_market_opt
@_out_opt
def simulate(config_path, server, seed, days, eta, pricing, market_mode, out):
    """Run the configured simulation and write run/sweep/summary artifacts."""
    with _client(server) as client:
        config = _prepared_config(client, config_path, seed, days, eta, pricing, market_mode)
        result = _post(client, "/simulate", {"config": config})
    for s in result["summaries"]:
        click.echo(
            f"eta={s['eta']:g} welfare={s['average_welfare']:.6g} "
            f"avg_queue={s['avg_total_queue']:.6g} max_queue={s['max_total_queue']:.6g} "
            f"bound={s['queue_bound']:.6g}"
        )
    _write_artifacts(result["artifacts"], out)


@main.command()
@_config_opt
@_server_opt
@_seed_opt
@_days_opt
@_eta_opt
@_pricing_opt
@_market_opt
@_out_opt
def sweep(config_path, server, seed, days, eta, pricing, market_mode, out):
    """Run one simulation per eta (alias of simulate with a list-valued eta)."""
    with _client(server) as client:
        config = _prepared_config(client, config_path, seed, days, eta, pricing, market_mode)
        result = _post(client, "/sweep", {"config": config})
    for s in result["summaries"]:
        click.echo(
            f"eta={s['eta']:g} welfare={s['average_welfare']:.6g} "
            f"avg_queue={s['avg_total_queue']:.6g} bound={s['queue_bound']:.6g}"
        )
    _write_artifacts(result["artifacts"], out)


@main.command()
@_config_opt
@_server_opt
@_seed_opt
@_eta_opt
@_pricing_opt
@_market_opt
@_out_opt
def oracle(config_path, server, seed, eta, pricing, market_mode, out):
    """Solve the stationary LP benchmarks for the configured instance."""
    with _client(server) as client:
        config = _prepared_config(client, config_path, seed, None, eta, pricing, market_mode)
        result = _post(client, "/oracle", {"config": config})
    click.echo(result["report_json"])
    _write_artifacts({"oracle.json": result["report_json"] + "\n"}, out)
    if not result["feasible"]:
        sys.exit(VALIDATION_EXIT)


@main.group()
def ingest():
    """Convert trace files into inline config snippets."""


@ingest.command("prices")
@click.argument("files", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--t-slots", type=int, required=True)
@_server_opt
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def ingest_prices(files, t_slots, server, out):
    """Build an iid market snippet from hour,dayahead,realtime CSVs."""
    body = {
        "t_slots": t_slots,
        "files": [{"name": f, "content": _read_text(Path(f))} for f in files],
    }
    with _client(server) as client:
        result = _post(client, "/ingest/prices", body)
    text = json.dumps(result["market"], indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
        click.echo(f"wrote market snippet to {out}")
    else:
        click.echo(text)


@ingest.command("wind")
@click.argument("file", type=click.Path(exists=True))
@click.option("--t-slots", type=int, required=True)
@_server_opt
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def ingest_wind(file, t_slots, server, out):
    """Build per-slot renewable atoms from a day,hour,power_100mw CSV."""
    body = {"t_slots": t_slots, "name": file, "content": _read_text(Path(file))}
    with _client(server) as client:
        result = _post(client, "/ingest/wind", body)
    text = json.dumps({"atoms_per_slot": result["atoms_per_slot"]}, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
        click.echo(f"wrote renewable snippet to {out}")
    else:
        click.echo(text)


@ingest.command("atoms")
@click.argument("file", type=click.Path(exists=True))
def ingest_atoms(file):
    """Round-trip check a slot,value,weight distribution dump."""
    from .errors import IngestionError
    from .ingest import dump_distributions, parse_distributions

    text = _read_text(Path(file))
    try:
        dists = parse_distributions(text, source=file)
    except IngestionError as exc:
        click.echo(f"error (validation): {exc}", err=True)
        sys.exit(VALIDATION_EXIT)
    roundtrip = dump_distributions(dists)
    identical = roundtrip == text
    click.echo(
        f"{len(dists)} slot distribution(s), "
        f"{sum(d.n_atoms for d in dists)} atoms, round-trip identical: {identical}"
    )


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the HTTP service with uvicorn."""
    import uvicorn

    uvicorn.run("gridwelfare.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
