"""Scenario/sweep config files: line-oriented ``key = value``.

Values are JSON-ish literals: numbers, true/false, quoted strings, and
[...] lists. Blank lines and ``#`` comments are ignored. Unknown keys are
rejected. A list value on one of the sweepable axes turns the file into a
sweep spec; ``repetitions`` (sweeps only) controls reruns per axis value.

Example::

    # flow-rate sweep
    flow_rate_pps = [6, 7, 8, 9, 10, 11]
    num_groups = 3
    nodes_per_group = 9
    seed = 7001
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Union

from .engine import MobilityConfig, ScenarioConfig
from .errors import ConfigError
from .hashing import derive_seed

SWEEP_AXES = ("flow_rate_pps", "nodes_per_group", "num_groups", "packet_size_bytes")

_INT_KEYS = {
    "num_networks", "nodes_per_network", "num_groups", "nodes_per_group",
    "packet_size_bytes", "data_rate_bps", "total_packets",
    "queue_capacity_pkts", "seed",
}
_FLOAT_KEYS = {
    "flow_rate_pps", "prop_delay_s", "sink_link_delay_s", "base_loss_prob",
    "out_of_range_loss_prob", "range_m", "duration_s",
}
_MOBILITY_KEYS = {
    "mobility_networks", "mobility_speed_mps", "mobility_bounds_m",
    "mobility_step_interval_s",
}
_KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _MOBILITY_KEYS | {"repetitions"}


@dataclass(frozen=True)
class SweepSpec:
    base: ScenarioConfig
    axis: str
    values: tuple
    repetitions: int = 1

    def points(self) -> list[tuple[object, int, ScenarioConfig]]:
        """Every (axis value, repetition, derived config) of the sweep.

        The derived seed is hash(base seed, axis, value, repetition), so a
        sweep is reproducible and each point is independently rerunnable.
        """
        out = []
        for value in self.values:
            typed = float(value) if self.axis == "flow_rate_pps" else int(value)
            for rep in range(self.repetitions):
                seed = derive_seed(self.base.seed, self.axis, typed, rep)
                cfg = replace(self.base, **{self.axis: typed}, seed=seed)
                out.append((typed, rep, cfg))
        return out


def _parse_value(raw: str, path: str, lineno: int):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        raise ConfigError(f"{path}:{lineno}: cannot parse value {raw!r}") from None


def parse_config_text(
    text: str, path: str = "<config>"
) -> Union[ScenarioConfig, SweepSpec]:
    entries: dict[str, object] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        entries[key] = _parse_value(raw, path, lineno)
    return _build(entries, path)


def parse_config(path: "str | Path") -> Union[ScenarioConfig, SweepSpec]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text(), str(p))


def _build(entries: dict, path: str) -> Union[ScenarioConfig, SweepSpec]:
    repetitions = entries.pop("repetitions", None)
    axes = [k for k in SWEEP_AXES if isinstance(entries.get(k), list)]
    stray = [
        k for k, v in entries.items()
        if isinstance(v, list) and k not in SWEEP_AXES and k not in _MOBILITY_KEYS
    ]
    if stray:
        raise ConfigError(f"{path}: key {stray[0]!r} cannot take a list")
    if len(axes) > 1:
        raise ConfigError(f"{path}: only one sweep axis allowed, got {axes}")

    axis = axes[0] if axes else None
    values: tuple = ()
    if axis is not None:
        values = tuple(entries.pop(axis))
        if not values:
            raise ConfigError(f"{path}: sweep axis {axis!r} has no values")

    scenario = _scenario_from_entries(entries, path)

    if axis is None:
        if repetitions is not None:
            raise ConfigError(f"{path}: 'repetitions' is only valid in a sweep")
        return scenario

    reps = 1 if repetitions is None else int(repetitions)
    if reps < 1:
        raise ConfigError(f"{path}: repetitions must be >= 1")
    spec = SweepSpec(base=scenario, axis=axis, values=values, repetitions=reps)
    for _, _, cfg in spec.points():  # every derived config must be valid
        cfg.validate()
    return spec


def _scenario_from_entries(entries: dict, path: str) -> ScenarioConfig:
    kwargs: dict = {}
    mobility_kwargs: dict = {}
    for key, value in entries.items():
        try:
            if key == "mobility_networks":
                mobility_kwargs["networks"] = tuple(int(v) for v in value)
            elif key == "mobility_bounds_m":
                bounds = tuple(float(v) for v in value)
                if len(bounds) != 2:
                    raise ConfigError(f"{path}: mobility_bounds_m needs [width, height]")
                mobility_kwargs["bounds_m"] = bounds
            elif key == "mobility_speed_mps":
                mobility_kwargs["speed_mps"] = float(value)
            elif key == "mobility_step_interval_s":
                mobility_kwargs["step_interval_s"] = float(value)
            elif key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: bad value for {key!r}: {value!r}") from None
    if mobility_kwargs:
        kwargs["mobility"] = MobilityConfig(**mobility_kwargs)
    cfg = ScenarioConfig(**kwargs)
    cfg.validate()
    return cfg
