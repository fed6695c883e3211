from flowcluster.config import SweepSpec, parse_config_text
from flowcluster.engine import MobilityConfig, ScenarioConfig, run
from flowcluster.metrics import CSV_HEADER, emit_csv, parse_report_csv
from flowcluster.sweep import run_sweep


def tiny_spec(values=(5.0, 10.0), repetitions=1):
    base = ScenarioConfig(
        num_networks=2, nodes_per_network=3, num_groups=2, nodes_per_group=2,
        total_packets=20, seed=17, mobility=MobilityConfig(networks=()),
    )
    return SweepSpec(base=base, axis="flow_rate_pps", values=values, repetitions=repetitions)


class TestRunSweep:
    def test_single_point_equals_single_run(self):
        spec = tiny_spec(values=(5.0,))
        outcome = run_sweep(spec)
        assert len(outcome.runs) == 1
        _, _, cfg = spec.points()[0]
        assert emit_csv(outcome.runs[0].report) == emit_csv(run(cfg).report)

    def test_deterministic_csv(self):
        spec = tiny_spec()
        assert run_sweep(spec).csv() == run_sweep(spec).csv()

    def test_rows_sorted_by_value_then_group(self):
        outcome = run_sweep(tiny_spec())
        rows = parse_report_csv(outcome.csv())
        assert len(rows) == 2 * 2  # 2 values x 2 groups
        keys = [(r["flow_rate_pps"], r["group"]) for r in rows]
        assert keys == sorted(keys)

    def test_parallel_workers_match_serial(self):
        spec = tiny_spec()
        serial = run_sweep(spec, workers=1)
        parallel = run_sweep(spec, workers=2)
        assert serial.csv() == parallel.csv()
        assert serial.summary() == parallel.summary()

    def test_failure_keeps_partial_results(self, monkeypatch):
        import flowcluster.sweep as sweep_mod

        real_run = sweep_mod.run

        def flaky(cfg, *args, **kwargs):
            if cfg.flow_rate_pps == 10.0:
                raise RuntimeError("synthetic worker failure")
            return real_run(cfg, *args, **kwargs)

        monkeypatch.setattr(sweep_mod, "run", flaky)
        outcome = run_sweep(tiny_spec())
        assert not outcome.ok
        statuses = {r.axis_value: r.ok for r in outcome.runs}
        assert statuses == {5.0: True, 10.0: False}
        manifest = outcome.manifest()
        assert any(m["status"] == "failed" and m["error"] for m in manifest)
        rows = parse_report_csv(outcome.csv())
        assert len(rows) == 2  # the good point's groups survive

    def test_fig7_preset_grid_shape(self):
        from flowcluster.service import preset_text

        spec = parse_config_text(preset_text("fig7"), "fig7")
        assert spec.axis == "flow_rate_pps"
        assert spec.values == (6, 7, 8, 9, 10, 11)
        assert len(spec.points()) == 6
        header = CSV_HEADER.split(",")
        assert header[0] == "run_id" and header[-1] == "seed"
