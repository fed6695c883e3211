"""FastAPI app exposing the simulator as a stateless compute service."""

from __future__ import annotations

from importlib import resources

from fastapi import FastAPI, HTTPException

from .. import engine, metrics
from ..config import SweepSpec, parse_config_text
from ..errors import ConfigError
from ..sweep import run_sweep
from .schemas import (
    HealthResponse,
    PresetInfo,
    ReportModel,
    RunRequest,
    RunResponse,
    SweepRequest,
    SweepResponse,
    ValidateResponse,
    ScenarioModel,
)

PRESETS = ("fig7", "fig10", "fig11", "fig14", "fig16")


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise KeyError(name)
    return (resources.files("flowcluster") / "presets" / f"{name}.cfg").read_text()


def create_app() -> FastAPI:
    app = FastAPI(
        title="flowcluster",
        description="Logical clustering of flow-sensors: protocol library and "
        "deterministic network simulator.",
    )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok")

    @app.post("/run", response_model=RunResponse)
    def run_scenario(request: RunRequest) -> RunResponse:
        try:
            cfg = request.config.to_config()
            result = engine.run(cfg, trace=request.trace)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        trace = None
        if result.trace_rows is not None:
            trace = "\n".join([engine.TRACE_HEADER, *result.trace_rows]) + "\n"
        return RunResponse(
            report=ReportModel.from_report(result.report),
            csv=metrics.emit_csv(result.report),
            trace=trace,
            state_dumps=result.state_dumps if request.dump_state else None,
        )

    @app.post("/sweep", response_model=SweepResponse)
    def sweep(request: SweepRequest) -> SweepResponse:
        try:
            spec = request.to_spec()
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        outcome = run_sweep(spec, workers=request.workers)
        return SweepResponse.from_outcome(outcome)

    @app.post("/validate", response_model=ValidateResponse)
    def validate(config: ScenarioModel) -> ValidateResponse:
        try:
            cfg = config.to_config()
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return ValidateResponse(valid=True, config=ScenarioModel.from_config(cfg))

    @app.get("/presets", response_model=list[PresetInfo])
    def presets() -> list[PresetInfo]:
        infos = []
        for name in PRESETS:
            parsed = parse_config_text(preset_text(name), name)
            if isinstance(parsed, SweepSpec):
                infos.append(
                    PresetInfo(
                        name=name, kind="sweep", axis=parsed.axis,
                        values=list(parsed.values),
                    )
                )
            else:
                infos.append(PresetInfo(name=name, kind="scenario"))
        return infos

    @app.get("/presets/{name}")
    def preset(name: str) -> dict:
        try:
            return {"name": name, "text": preset_text(name)}
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown preset {name!r}")

    return app


app = create_app()
