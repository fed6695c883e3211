import io

import pytest
from hypothesis import given, strategies as st

from flowcluster.engine import MobilityConfig, ScenarioConfig, run
from flowcluster.errors import MetricsError
from flowcluster.metrics import (
    CSV_HEADER,
    GroupStats,
    build_report,
    emit,
    emit_csv,
    loss_ratio,
    mean_delay,
    mean_jitter,
    parse_report_csv,
    record_rx,
    record_tx,
    sweep_summary,
)

from oracles import batch_jitter


def stats_with_delays(delays, tx=None):
    stats = GroupStats(group_index=1, context_id=42)
    for _ in range(tx if tx is not None else len(delays)):
        record_tx(stats)
    for delay in delays:
        record_rx(stats, delay)
    return stats


class TestRecordRx:
    def test_known_sequence(self):
        stats = stats_with_delays([0.010, 0.012, 0.011])
        assert mean_delay(stats) == pytest.approx(0.011)
        assert mean_jitter(stats) == pytest.approx(0.0015)

    def test_single_packet_jitter_zero(self):
        stats = stats_with_delays([0.010])
        assert stats.rx_count == 1
        assert mean_jitter(stats) == 0.0

    def test_no_packets_mean_delay_undefined(self):
        stats = stats_with_delays([], tx=5)
        assert mean_delay(stats) is None

    def test_negative_delay_is_clock_bug(self):
        stats = GroupStats(group_index=1, context_id=1)
        with pytest.raises(MetricsError):
            record_rx(stats, -0.001)

    @given(st.lists(st.floats(min_value=0.0, max_value=10.0), min_size=2, max_size=200))
    def test_streaming_jitter_matches_batch_pass(self, delays):
        stats = stats_with_delays(delays)
        streaming = mean_jitter(stats)
        batch = batch_jitter(delays)
        assert streaming == pytest.approx(batch, rel=1e-12, abs=1e-300)


class TestLossRatio:
    def test_no_loss(self):
        assert loss_ratio(stats_with_delays([0.01] * 2000)) == 0.0

    def test_reported_scale_value(self):
        stats = stats_with_delays([0.01] * 1873, tx=2000)
        assert loss_ratio(stats) == pytest.approx(0.0635)

    def test_total_loss(self):
        assert loss_ratio(stats_with_delays([], tx=100)) == 1.0

    def test_zero_tx_undefined(self):
        with pytest.raises(MetricsError):
            loss_ratio(GroupStats(group_index=1, context_id=1))


class TestEmit:
    def _report(self, groups=3):
        cfg = ScenarioConfig().flat_dict()
        all_stats = []
        for g in range(groups):
            stats = GroupStats(group_index=g + 1, context_id=g + 100)
            for _ in range(10):
                record_tx(stats)
            for i in range(9):
                record_rx(stats, 0.01 + 0.001 * i * (g + 1))
            all_stats.append(stats)
        return build_report("runid123", 7, cfg, all_stats)

    def test_header_and_row_count(self):
        report = self._report()
        buf = io.StringIO()
        emit(report, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 4

    def test_round_trip_preserves_values(self):
        report = self._report()
        rows = parse_report_csv(emit_csv(report))
        assert len(rows) == 3
        for row, group in zip(rows, report.groups):
            assert row["group"] == group.group_index
            assert row["mean_delay_s"] == group.mean_delay_s
            assert row["mean_jitter_s"] == group.mean_jitter_s
            assert row["loss_ratio"] == group.loss_ratio
            assert row["tx"] == group.tx and row["rx"] == group.rx
            assert row["run_id"] == "runid123"

    def test_group_totals_sum_to_global(self):
        report = self._report()
        assert report.total_tx == sum(g.tx for g in report.groups)
        assert report.total_rx == sum(g.rx for g in report.groups)

    def test_summary_has_row_per_value_group(self):
        report = self._report()
        text = sweep_summary([(6.0, report), (7.0, report)])
        lines = text.splitlines()
        assert lines[0].startswith("#")
        assert len(lines) == 1 + 2 * 3


class TestLossCoupling:
    def test_raising_bernoulli_p_never_lowers_group_loss(self):
        """Loss draws are counter-hashed, so p2 > p1 loses a superset."""
        base = dict(num_groups=2, nodes_per_group=3, flow_rate_pps=10.0,
                    total_packets=150, seed=33, mobility=MobilityConfig(networks=()))
        ratios = {}
        for p in (0.0, 0.02, 0.05, 0.20):
            report = run(ScenarioConfig(base_loss_prob=p, **base)).report
            ratios[p] = [g.loss_ratio for g in report.groups]
        probs = sorted(ratios)
        for lo, hi in zip(probs, probs[1:]):
            for g_lo, g_hi in zip(ratios[lo], ratios[hi]):
                assert g_hi >= g_lo
