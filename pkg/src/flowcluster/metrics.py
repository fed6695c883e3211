"""Per-group delay / jitter / loss statistics and CSV emission.

Jitter is the mean absolute difference between consecutive received-packet
delays within a group (FlowMonitor-style). Lost packets count toward tx only
and never touch the delay/jitter sums. A packet belongs to the group its
sender held at send time.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

from .errors import MetricsError

CSV_HEADER = (
    "run_id,flow_rate_pps,num_groups,nodes_per_group,packet_size,"
    "group,mean_delay_s,mean_jitter_s,loss_ratio,tx,rx,seed"
)

SUMMARY_HEADER = "# axis_value group mean_delay_s mean_jitter_s loss_ratio"


@dataclass
class GroupStats:
    """Streaming per-group counters; updated once per tx/rx/loss event."""

    group_index: int
    context_id: int
    tx_count: int = 0
    rx_count: int = 0
    lost_queue: int = 0
    lost_channel: int = 0
    delay_sum: float = 0.0
    jitter_sum: float = 0.0
    last_delay: Optional[float] = None


def record_tx(stats: GroupStats) -> None:
    stats.tx_count += 1


def record_rx(stats: GroupStats, delay: float) -> None:
    """Account one delivered packet."""
    if delay < 0:
        raise MetricsError(f"negative delay {delay}; simulation clock bug")
    stats.rx_count += 1
    stats.delay_sum += delay
    if stats.last_delay is not None:
        stats.jitter_sum += abs(delay - stats.last_delay)
    stats.last_delay = delay


def mean_delay(stats: GroupStats) -> Optional[float]:
    if stats.rx_count == 0:
        return None
    return stats.delay_sum / stats.rx_count


def mean_jitter(stats: GroupStats) -> float:
    """Zero when fewer than two packets arrived (undefined -> reported 0)."""
    if stats.rx_count < 2:
        return 0.0
    return stats.jitter_sum / (stats.rx_count - 1)


def loss_ratio(stats: GroupStats) -> float:
    if stats.tx_count == 0:
        raise MetricsError(f"group {stats.group_index}: loss ratio of zero tx")
    return (stats.tx_count - stats.rx_count) / stats.tx_count


@dataclass(frozen=True)
class GroupReport:
    group_index: int
    context_id: int
    mean_delay_s: Optional[float]
    mean_jitter_s: float
    loss_ratio: float
    tx: int
    rx: int
    lost_queue: int
    lost_channel: int


@dataclass(frozen=True)
class MetricsReport:
    run_id: str
    seed: int
    config: dict
    groups: tuple[GroupReport, ...]

    @property
    def total_tx(self) -> int:
        return sum(g.tx for g in self.groups)

    @property
    def total_rx(self) -> int:
        return sum(g.rx for g in self.groups)

    @property
    def global_loss_ratio(self) -> float:
        if self.total_tx == 0:
            raise MetricsError("loss ratio of a run with zero tx")
        return (self.total_tx - self.total_rx) / self.total_tx


def build_report(
    run_id: str, seed: int, config: dict, stats: list[GroupStats]
) -> MetricsReport:
    groups = tuple(
        GroupReport(
            group_index=s.group_index,
            context_id=s.context_id,
            mean_delay_s=mean_delay(s),
            mean_jitter_s=mean_jitter(s),
            loss_ratio=loss_ratio(s) if s.tx_count else 0.0,
            tx=s.tx_count,
            rx=s.rx_count,
            lost_queue=s.lost_queue,
            lost_channel=s.lost_channel,
        )
        for s in sorted(stats, key=lambda s: s.group_index)
    )
    return MetricsReport(run_id=run_id, seed=seed, config=config, groups=groups)


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(value)


def report_rows(report: MetricsReport) -> list[str]:
    """One CSV row per group, matching CSV_HEADER column for column."""
    cfg = report.config
    rows = []
    for g in report.groups:
        rows.append(
            ",".join(
                [
                    report.run_id,
                    _fmt(float(cfg["flow_rate_pps"])),
                    str(cfg["num_groups"]),
                    str(cfg["nodes_per_group"]),
                    str(cfg["packet_size_bytes"]),
                    str(g.group_index),
                    _fmt(g.mean_delay_s),
                    _fmt(g.mean_jitter_s),
                    _fmt(g.loss_ratio),
                    str(g.tx),
                    str(g.rx),
                    str(report.seed),
                ]
            )
        )
    return rows


def emit(report: MetricsReport, dest: io.TextIOBase) -> None:
    """Write the report as CSV (header + one row per group)."""
    dest.write(CSV_HEADER + "\n")
    for row in report_rows(report):
        dest.write(row + "\n")


def emit_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    emit(report, buf)
    return buf.getvalue()


def parse_report_csv(text: str) -> list[dict]:
    """Parse an emitted CSV back into row dicts (round-trip checks, tooling)."""
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != CSV_HEADER:
        raise MetricsError("not a metrics CSV: bad header")
    header = CSV_HEADER.split(",")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(header):
            raise MetricsError(f"bad CSV row: {ln!r}")
        row: dict = dict(zip(header, parts))
        for col in ("mean_delay_s", "mean_jitter_s", "loss_ratio", "flow_rate_pps"):
            row[col] = float(row[col]) if row[col] else None
        for col in ("num_groups", "nodes_per_group", "packet_size", "group", "tx", "rx", "seed"):
            row[col] = int(row[col])
        rows.append(row)
    return rows


def sweep_summary(axis_rows: list[tuple[float, MetricsReport]]) -> str:
    """Gnuplot-friendly summary: one whitespace row per (axis value, group)."""
    lines = [SUMMARY_HEADER]
    for value, report in axis_rows:
        for g in report.groups:
            lines.append(
                f"{value!r} {g.group_index} {_fmt(g.mean_delay_s) or 'nan'} "
                f"{g.mean_jitter_s!r} {g.loss_ratio!r}"
            )
    return "\n".join(lines) + "\n"


GNUPLOT_SCRIPT = """\
# gnuplot script for a sweep summary produced alongside this file.
# usage: gnuplot -e "summary='summary.dat'" plot.gp
set datafile commentschars "#"
set key autotitle columnhead outside
set xlabel "axis value"
set ylabel "mean delay (s)"
plot for [g=1:3] summary using 1:($2 == g ? $3 : 1/0) with linespoints title sprintf("group %d", g)
"""
