"""Experiment driver CLI.

A thin client over the HTTP service: by default it drives the ASGI app
in-process (no server needed), or a remote instance with ``--server URL``.
Either way the same request/response schemas are exercised.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from .config import SweepSpec, parse_config, parse_config_text
from .engine import ScenarioConfig
from .errors import ConfigError
from .metrics import GNUPLOT_SCRIPT
from .service import PRESETS, preset_text
from .service.schemas import ScenarioModel

OUT_DIR_ENV = "FLOWCLUSTER_OUT"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class ServiceClient:
    """Minimal POST/GET client; in-process ASGI by default, HTTP with a URL."""

    def __init__(self, server: Optional[str] = None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server.rstrip("/"), timeout=None)
        else:
            from fastapi.testclient import TestClient

            from .service import app

            self._client = TestClient(app)

    def post(self, path: str, payload: dict) -> dict:
        response = self._client.post(path, json=payload)
        if response.status_code != 200:
            raise RuntimeError(f"{path} failed ({response.status_code}): {response.text}")
        return response.json()


def _resolve_config(source: str, seed: Optional[int]):
    """Load a config file or bundled preset; apply the seed override."""
    if Path(source).is_file():
        parsed = parse_config(source)
    elif source in PRESETS:
        parsed = parse_config_text(preset_text(source), f"preset:{source}")
    else:
        raise ConfigError(f"no such config file or preset: {source!r}")
    if seed is not None:
        if isinstance(parsed, SweepSpec):
            parsed = replace(parsed, base=parsed.base.with_seed(seed))
        else:
            parsed = parsed.with_seed(seed)
    return parsed


def _scenario_payload(cfg: ScenarioConfig) -> dict:
    return ScenarioModel.from_config(cfg).model_dump()


def _out_dir(arg: Optional[str]) -> Path:
    out = Path(arg or os.environ.get(OUT_DIR_ENV, "flowcluster-out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_run(args) -> int:
    parsed = _resolve_config(args.config, args.seed)
    if isinstance(parsed, SweepSpec):
        raise ConfigError(
            f"{args.config} defines a sweep over {parsed.axis!r}; use 'flowcluster sweep'"
        )
    client = ServiceClient(args.server)
    payload = {
        "config": _scenario_payload(parsed),
        "trace": args.trace,
        "dump_state": args.dump_state,
    }
    data = client.post("/run", payload)
    out = _out_dir(args.out)
    run_id = data["report"]["run_id"]
    csv_path = out / f"run_{run_id}.csv"
    csv_path.write_text(data["csv"])
    written = [csv_path]
    if args.trace and data.get("trace"):
        trace_path = out / f"trace_{run_id}.csv"
        trace_path.write_text(data["trace"])
        written.append(trace_path)
    if args.dump_state and data.get("state_dumps"):
        dump_text = []
        for i, dump in enumerate(data["state_dumps"]):
            dump_text.append(f"=== sink {i} ===")
            dump_text.append(dump.rstrip("\n"))
        print("\n".join(dump_text))
        state_path = out / f"state_{run_id}.txt"
        state_path.write_text("\n".join(dump_text) + "\n")
        written.append(state_path)
    for group in data["report"]["groups"]:
        delay = group["mean_delay_s"]
        print(
            f"group {group['group']}: mean_delay_s={delay if delay is not None else 'n/a'} "
            f"mean_jitter_s={group['mean_jitter_s']} loss_ratio={group['loss_ratio']} "
            f"tx={group['tx']} rx={group['rx']}"
        )
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    parsed = _resolve_config(args.config, args.seed)
    if not isinstance(parsed, SweepSpec):
        raise ConfigError(f"{args.config} has no sweep axis; use 'flowcluster run'")
    client = ServiceClient(args.server)
    payload = {
        "config": _scenario_payload(parsed.base),
        "axis": parsed.axis,
        "values": list(parsed.values),
        "repetitions": parsed.repetitions,
        "workers": args.workers,
    }
    data = client.post("/sweep", payload)
    out = _out_dir(args.out)
    (out / "sweep.csv").write_text(data["csv"])
    (out / "summary.dat").write_text(data["summary"])
    (out / "plot.gp").write_text(GNUPLOT_SCRIPT)
    runs_dir = out / "runs"
    runs_dir.mkdir(exist_ok=True)
    manifest = []
    for run in data["runs"]:
        entry = {
            "axis": parsed.axis,
            "axis_value": run["axis_value"],
            "repetition": run["repetition"],
            "seed": run["seed"],
            "status": run["status"],
            "error": run["error"],
        }
        if run["report"] is not None:
            name = f"{parsed.axis}-{run['axis_value']}-r{run['repetition']}.json"
            (runs_dir / name).write_text(json.dumps(run["report"], indent=2, sort_keys=True))
            entry["report"] = str(runs_dir / name)
        manifest.append(entry)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"wrote {out / 'sweep.csv'} ({len(data['runs'])} runs)")
    if not data["ok"]:
        failed = [r for r in data["runs"] if r["status"] != "ok"]
        print(f"{len(failed)} run(s) failed; partial results kept", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def _cmd_presets(_args) -> int:
    for name in PRESETS:
        print(f"== {name} ==")
        print(preset_text(name).rstrip("\n"))
        print()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowcluster",
        description="Logical-clustering simulator: run scenarios and parameter sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="config file path or preset name (fig7, fig10, ...)")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--out", default=None,
                       help=f"output directory (default: ${OUT_DIR_ENV} or ./flowcluster-out)")
        p.add_argument("--server", default=None,
                       help="run against a remote service URL instead of in-process")

    p_run = sub.add_parser("run", help="run a single scenario")
    common(p_run)
    p_run.add_argument("--trace", action="store_true", help="write the per-packet trace CSV")
    p_run.add_argument("--dump-state", action="store_true",
                       help="print every sink's serialized registry")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    common(p_sweep)
    p_sweep.add_argument("--workers", type=int, default=1,
                         help="parallel scenario workers (default 1)")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=_cmd_serve)

    p_presets = sub.add_parser("presets", help="print the bundled preset configs")
    p_presets.set_defaults(func=_cmd_presets)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
