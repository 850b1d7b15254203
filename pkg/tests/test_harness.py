import csv

import numpy as np
import pytest

from trajloc import ScenarioConfig, TrajectoryModel, emit_results, run_scenario
from trajloc.harness import (
    ALGORITHMS,
    TrialReport,
    aggregate_csv_rows,
    apply_overrides,
    builtin_experiment,
    builtin_experiments,
    load_config,
    materialize,
    sweep_points,
)

LINEAR = TrajectoryModel.polynomial(1)
LIN_GRID = dict(grid_phi=(-85.0, 2.0, 85.0), grid_coeffs=((-5.0, 0.5, 5.0),))


def small_config(**overrides):
    base = dict(
        name="small",
        model=LINEAR,
        sources=((-11.0, 3.5), (20.0, 1.5)),
        snr_db=10.0,
        snapshots=12,
        algorithms=("tl-cbf", "tl-omp"),
        trials=2,
        base_seed=7,
        **LIN_GRID,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


class TestConfigValidation:
    def test_valid_roundtrip(self):
        cfg = small_config()
        assert sweep_points(cfg) == ("snr_db", (10.0,))

    def test_single_sweep_axis_enforced(self):
        with pytest.raises(ValueError):
            small_config(snr_db=(0.0, 5.0), snapshots=(10, 20))
        with pytest.raises(ValueError):
            small_config(snr_db=(0.0, 5.0), sweep=("zeta", (1.0,)))

    def test_unknown_algorithm(self):
        with pytest.raises(ValueError):
            small_config(algorithms=("tl-magic",))

    def test_sbl_rejected_for_wideband(self):
        with pytest.raises(ValueError):
            small_config(algorithms=("tl-sbl",), frequencies=(1400.0, 1600.0))
        # single-frequency data is fine
        small_config(algorithms=("tl-sbl",), frequencies=(1600.0,))
        with pytest.raises(ValueError):
            small_config(algorithms=("tl-sbl",), sweep=("freq_count", (1.0, 3.0)), sources=())

    def test_trials_positive(self):
        with pytest.raises(ValueError):
            small_config(trials=0)


class TestMaterialize:
    def test_grid_step_sources_half_step_offsets(self):
        cfg = builtin_experiment("grid-step")
        cell = materialize(cfg, "phi_step", 2.0)
        phis = [s.phi for s in cell.sources]
        alphas = [s.coeffs[0] for s in cell.sources]
        assert alphas == [3.5, 1.5, -2.5, -4.75]
        # sources 0 and 2 on-grid, 1 and 3 offset by exactly half a step
        grid_phis = -85.0 + 2.0 * np.arange(86)
        assert phis[0] in grid_phis and phis[2] in grid_phis
        assert (phis[1] - 1.0) in grid_phis and (phis[3] - 1.0) in grid_phis

    def test_zeta_sweep_sources(self):
        cfg = builtin_experiment("resolution")
        cell = materialize(cfg, "zeta", -7.0)
        assert [tuple(s.vector()) for s in cell.sources] == [
            (0.0, 3.5),
            (60.0, -4.5),
            (-7.0, 2.5),
        ]

    def test_freq_count_sets_array_spacing(self):
        cfg = builtin_experiment("wideband")
        cell = materialize(cfg, "freq_count", 7.0)
        assert cell.frequencies == (1000.0, 1200.0, 1400.0, 1600.0, 1800.0, 2000.0, 2200.0)
        assert cell.array.spacing == pytest.approx(343.0 / 2200.0 / 2.0)
        cell1 = materialize(cfg, "freq_count", 1.0)
        assert cell1.frequencies == (1600.0,)


class TestBuiltins:
    def test_expected_names(self):
        names = [c.name for c in builtin_experiments()]
        assert names == [
            "snr",
            "snapshots",
            "grid-step",
            "resolution",
            "nonlinear",
            "timing",
            "wideband",
        ]

    def test_snr_experiment_shape(self):
        cfg = builtin_experiment("snr")
        name, values = sweep_points(cfg)
        assert name == "snr_db"
        assert values == tuple(float(v) for v in range(-10, 31, 5))
        assert len(values) == 9
        assert cfg.trials == 100
        assert cfg.algorithms == ALGORITHMS

    def test_wideband_sets(self):
        cfg = builtin_experiment("wideband")
        assert cfg.sweep == ("freq_count", (1.0, 3.0, 5.0, 7.0))
        assert "tl-sbl" not in cfg.algorithms

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            builtin_experiment("does-not-exist")


class TestRunScenario:
    def test_row_structure(self):
        cfg = small_config()
        report = run_scenario(cfg)
        # 1 sweep value x 2 trials x 2 algorithms x 2 sources
        assert len(report.rows) == 8
        for row in report.rows:
            assert row.experiment == "small"
            assert row.runtime_ms > 0
            assert 0 <= row.source_id < 2
        keys = [(r.algorithm, r.sweep_value, r.trial, r.source_id) for r in report.rows]
        assert keys == sorted(keys)

    def test_deterministic_with_fake_clock(self):
        cfg = small_config()
        a = run_scenario(cfg, fake_clock=True)
        b = run_scenario(cfg, fake_clock=True)
        assert a == b

    def test_parallel_matches_serial(self):
        cfg = small_config(trials=3)
        serial = run_scenario(cfg, n_jobs=1, fake_clock=True)
        parallel = run_scenario(cfg, n_jobs=2, fake_clock=True)
        assert serial == parallel

    def test_real_clock_differs_only_in_runtime(self):
        cfg = small_config()
        a = run_scenario(cfg)
        b = run_scenario(cfg)
        strip = lambda rows: [
            (r.algorithm, r.sweep_value, r.trial, r.source_id, r.rmse_deg, r.detected, r.ospa, r.flags)
            for r in rows
        ]
        assert strip(a.rows) == strip(b.rows)

    def test_algorithms_do_not_mutate_shared_blocks(self, array, linear_grid, four_sources):
        # the paired-trial contract relies on every algorithm reading the
        # same block object without touching it
        import warnings

        from trajloc import NumericsWarning, synthesize_block, tl_cbf_spectrum, tl_nomp, tl_omp, tl_sbl, tl_sfw

        blocks, _ = synthesize_block(four_sources, array, 30, 10.0, seed=3)
        before = blocks[0].data.tobytes()
        tl_cbf_spectrum(blocks, linear_grid, array)
        tl_omp(blocks, linear_grid, array, 2)
        tl_sfw(blocks, linear_grid, array, 2)
        tl_nomp(blocks, linear_grid, array, 2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NumericsWarning)
            tl_sbl(blocks, linear_grid, array, 2, 0.1, max_iters=5)
        assert blocks[0].data.tobytes() == before

    def test_snapshot_sweep(self):
        cfg = small_config(snapshots=(8, 16), snr_db=10.0, trials=1)
        report = run_scenario(cfg)
        values = sorted(set(r.sweep_value for r in report.rows))
        assert values == [8.0, 16.0]


class TestEmitResults:
    def test_empty_report_header_only(self, tmp_path):
        rows_path, agg_path = emit_results(TrialReport(()), str(tmp_path))
        assert open(rows_path).read() == (
            "algorithm,experiment,sweep_name,sweep_value,trial,source_id,"
            "rmse_deg,detected,ospa,runtime_ms,flags\n"
        )
        assert open(agg_path).read().count("\n") == 1

    def test_aggregate_recomputable_from_rows(self, tmp_path):
        cfg = small_config(trials=3, snr_db=(0.0, 20.0))
        report = run_scenario(cfg, fake_clock=True)
        rows_path, agg_path = emit_results(report, str(tmp_path))
        with open(rows_path, newline="") as fh:
            parsed = list(csv.DictReader(fh))
        recomputed = aggregate_csv_rows(parsed)
        with open(agg_path, newline="") as fh:
            stored = list(csv.DictReader(fh))
        assert [dict(r) for r in stored] == recomputed

    def test_pd_in_unit_interval_and_lf_endings(self, tmp_path):
        cfg = small_config(trials=2)
        report = run_scenario(cfg, fake_clock=True)
        rows_path, agg_path = emit_results(report, str(tmp_path))
        raw = open(agg_path, "rb").read()
        assert b"\r" not in raw
        with open(agg_path, newline="") as fh:
            for row in csv.DictReader(fh):
                assert 0.0 <= float(row["pd"]) <= 1.0

    def test_unsupported_format(self, tmp_path):
        with pytest.raises(ValueError):
            emit_results(TrialReport(()), str(tmp_path), fmt="parquet")


class TestConfigFile:
    def test_yaml_round_trip(self, tmp_path):
        text = """
name: demo
model: polynomial
order: 1
grid_phi: [-85, 2, 85]
grid_coeffs: [[-5, 0.5, 5]]
sources:
  - [-11, 3.5]
  - [20, 1.5]
snr_db: [0, 10]
snapshots: 30
frequencies: narrowband
algorithms: [tl-cbf, tl-omp]
trials: 4
base_seed: 3
"""
        path = tmp_path / "demo.yaml"
        path.write_text(text)
        cfg = load_config(str(path))
        assert cfg.name == "demo"
        assert cfg.snr_db == (0.0, 10.0)
        assert cfg.trials == 4
        assert cfg.sources == ((-11.0, 3.5), (20.0, 1.5))

    def test_unknown_keys_refused(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("name: x\nsnrdb: 5\n")
        with pytest.raises(ValueError, match="snrdb"):
            load_config(str(path))

    def test_bandlimited_requires_nu(self, tmp_path):
        path = tmp_path / "bl.yaml"
        path.write_text("name: x\nmodel: bandlimited\norder: 1\n")
        with pytest.raises(ValueError, match="nu"):
            load_config(str(path))

    def test_overrides(self):
        cfg = small_config()
        out = apply_overrides(cfg, trials=9, seed=1, algorithms=["tl-cbf"])
        assert out.trials == 9
        assert out.base_seed == 1
        assert out.algorithms == ("tl-cbf",)


class TestTimingOrdering:
    def test_cbf_runtime_grows_with_block_length(self):
        cfg = small_config(
            algorithms=("tl-cbf",), snapshots=(5, 120), snr_db=5.0, trials=4
        )
        report = run_scenario(cfg)
        by_L = {}
        for r in report.rows:
            by_L.setdefault(r.sweep_value, {})[r.trial] = r.runtime_ms
        small = np.mean(list(by_L[5.0].values()))
        large = np.mean(list(by_L[120.0].values()))
        assert large > small

    def test_scan_methods_faster_than_iterative(self):
        cfg = small_config(
            algorithms=("tl-cbf", "tl-omp", "tl-sbl", "tl-sfw"), snr_db=5.0, trials=2
        )
        report = run_scenario(cfg)
        mean_rt = {}
        for alg in cfg.algorithms:
            times = {r.trial: r.runtime_ms for r in report.rows if r.algorithm == alg}
            mean_rt[alg] = np.mean(list(times.values()))
        for fast in ("tl-cbf", "tl-omp"):
            assert mean_rt[fast] < mean_rt["tl-sbl"]
            assert mean_rt[fast] < mean_rt["tl-sfw"]
