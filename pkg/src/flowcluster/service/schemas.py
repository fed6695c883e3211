"""Pydantic request/response models wrapping the core dataclasses."""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field

from ..config import SWEEP_AXES, SweepSpec
from ..engine import MobilityConfig, ScenarioConfig
from ..metrics import MetricsReport
from ..sweep import SweepOutcome


class MobilityModel(BaseModel):
    networks: list[int] = [2, 3]
    speed_mps: float = 1.0
    bounds_m: tuple[float, float] = (100.0, 100.0)
    step_interval_s: float = 1.0


class ScenarioModel(BaseModel):
    """Mirror of ScenarioConfig; unknown fields are rejected."""

    model_config = {"extra": "forbid"}

    num_networks: int = 3
    nodes_per_network: int = 20
    num_groups: int = 3
    nodes_per_group: int = 9
    flow_rate_pps: float = 8.0
    packet_size_bytes: int = 512
    data_rate_bps: int = 1_000_000
    total_packets: int = 2000
    prop_delay_s: float = 0.001
    sink_link_delay_s: float = 0.002
    base_loss_prob: float = 0.02
    out_of_range_loss_prob: float = 0.25
    range_m: float = 1000.0
    queue_capacity_pkts: int = 50
    duration_s: float = 0.0
    seed: int = 1
    mobility: MobilityModel = Field(default_factory=MobilityModel)

    def to_config(self) -> ScenarioConfig:
        data = self.model_dump()
        mob = data.pop("mobility")
        cfg = ScenarioConfig(
            mobility=MobilityConfig(
                networks=tuple(mob["networks"]),
                speed_mps=mob["speed_mps"],
                bounds_m=tuple(mob["bounds_m"]),
                step_interval_s=mob["step_interval_s"],
            ),
            **data,
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "ScenarioModel":
        flat = cfg.flat_dict()
        mobility = MobilityModel(
            networks=flat.pop("mobility_networks"),
            speed_mps=flat.pop("mobility_speed_mps"),
            bounds_m=tuple(flat.pop("mobility_bounds_m")),
            step_interval_s=flat.pop("mobility_step_interval_s"),
        )
        return cls(mobility=mobility, **flat)


class RunRequest(BaseModel):
    config: ScenarioModel = Field(default_factory=ScenarioModel)
    trace: bool = False
    dump_state: bool = False


class GroupReportModel(BaseModel):
    group: int
    context_id: int
    mean_delay_s: Optional[float]
    mean_jitter_s: float
    loss_ratio: float
    tx: int
    rx: int
    lost_queue: int
    lost_channel: int


class ReportModel(BaseModel):
    run_id: str
    seed: int
    config: dict
    groups: list[GroupReportModel]
    total_tx: int
    total_rx: int

    @classmethod
    def from_report(cls, report: MetricsReport) -> "ReportModel":
        return cls(
            run_id=report.run_id,
            seed=report.seed,
            config=report.config,
            groups=[
                GroupReportModel(
                    group=g.group_index,
                    context_id=g.context_id,
                    mean_delay_s=g.mean_delay_s,
                    mean_jitter_s=g.mean_jitter_s,
                    loss_ratio=g.loss_ratio,
                    tx=g.tx,
                    rx=g.rx,
                    lost_queue=g.lost_queue,
                    lost_channel=g.lost_channel,
                )
                for g in report.groups
            ],
            total_tx=report.total_tx,
            total_rx=report.total_rx,
        )


class RunResponse(BaseModel):
    report: ReportModel
    csv: str
    trace: Optional[str] = None
    state_dumps: Optional[list[str]] = None


class SweepRequest(BaseModel):
    config: ScenarioModel = Field(default_factory=ScenarioModel)
    axis: Literal["flow_rate_pps", "nodes_per_group", "num_groups", "packet_size_bytes"]
    values: list[Union[int, float]]
    repetitions: int = 1
    workers: int = 1

    def to_spec(self) -> SweepSpec:
        spec = SweepSpec(
            base=self.config.to_config(),
            axis=self.axis,
            values=tuple(self.values),
            repetitions=self.repetitions,
        )
        for _, _, cfg in spec.points():
            cfg.validate()
        return spec


class SweepRunModel(BaseModel):
    axis_value: Union[int, float]
    repetition: int
    seed: int
    status: str
    error: Optional[str] = None
    report: Optional[ReportModel] = None


class SweepResponse(BaseModel):
    axis: str
    runs: list[SweepRunModel]
    csv: str
    summary: str
    ok: bool

    @classmethod
    def from_outcome(cls, outcome: SweepOutcome) -> "SweepResponse":
        return cls(
            axis=outcome.axis,
            runs=[
                SweepRunModel(
                    axis_value=r.axis_value,
                    repetition=r.repetition,
                    seed=r.seed,
                    status="ok" if r.ok else "failed",
                    error=r.error,
                    report=ReportModel.from_report(r.report) if r.report else None,
                )
                for r in outcome.runs
            ],
            csv=outcome.csv(),
            summary=outcome.summary(),
            ok=outcome.ok,
        )


class ValidateResponse(BaseModel):
    valid: bool
    config: ScenarioModel


class PresetInfo(BaseModel):
    name: str
    kind: Literal["scenario", "sweep"]
    axis: Optional[str] = None
    values: Optional[list[Union[int, float]]] = None


class HealthResponse(BaseModel):
    status: str
    sweep_axes: list[str] = list(SWEEP_AXES)
