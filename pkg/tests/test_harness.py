import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nanoloc.array import UlaConfig
from nanoloc.channel import flat_medium
from nanoloc.config import default_config
from nanoloc.errors import ConfigError
from nanoloc.harness import (
    REFERENCE_CONFUSION_1M,
    ExperimentConfig,
    MetricsReport,
    _rmse,
    compare_with_reference,
    emit_report,
    route_ula,
    run_experiment,
    run_trial,
    trial_seed,
)

THZ = 1e12


@pytest.fixture(scope="module")
def dual_cfg():
    return default_config("dual")


@pytest.fixture(scope="module")
def single_cfg():
    return default_config("single")


@pytest.fixture(scope="module")
def lossless_dual():
    return default_config("dual", medium=flat_medium(0.0))


class TestRouting:
    def test_low_symbol_to_lower_array(self, dual_cfg):
        assert route_ula(0.5 * THZ, dual_cfg) == 0

    def test_high_symbol_to_upper_array(self, dual_cfg):
        assert route_ula(4.7 * THZ, dual_cfg) == 1

    def test_split_frequency_goes_up(self, dual_cfg):
        assert dual_cfg.split_frequency == 2 * THZ
        assert route_ula(2 * THZ, dual_cfg) == 1

    def test_default_alphabet_split(self, dual_cfg):
        routes = [route_ula(s.center_frequency, dual_cfg) for _, s in dual_cfg.alphabet.symbols]
        assert routes == [0, 0, 0, 1, 1, 1]

    def test_single_mode(self, single_cfg):
        assert route_ula(7.7 * THZ, single_cfg) == 0

    def test_outside_every_band(self, dual_cfg):
        with pytest.raises(ConfigError, match="outside every ULA band"):
            route_ula(0.15 * THZ, dual_cfg)


class TestConfigValidation:
    def test_dual_edges_must_meet(self, dual_cfg):
        ulas = (UlaConfig(8, 0.2 * THZ, 1.9 * THZ, 9e-12), dual_cfg.ulas[1])
        with pytest.raises(ConfigError, match="ULA1 upper edge"):
            replace(dual_cfg, ulas=ulas)

    def test_wrong_ula_count(self, dual_cfg):
        with pytest.raises(ConfigError):
            replace(dual_cfg, ula_mode="single")

    def test_unknown_exclusion(self, dual_cfg):
        with pytest.raises(ConfigError):
            replace(dual_cfg, exclude=(9,))

    def test_medium_must_cover_band(self, dual_cfg):
        with pytest.raises(ConfigError, match="does not cover"):
            replace(dual_cfg, medium=flat_medium(0.0, band=(0.5 * THZ, 10 * THZ)))

    def test_pulse_must_fit_window(self, dual_cfg):
        ulas = tuple(UlaConfig(u.N, u.f_l, u.f_h, 5e-12) for u in dual_cfg.ulas)
        with pytest.raises(ConfigError, match="does not fit"):
            replace(dual_cfg, ulas=ulas)

    def test_runs_positive(self, dual_cfg):
        with pytest.raises(ConfigError):
            replace(dual_cfg, n_runs=0)


class TestTrial:
    def test_noiseless_every_event(self, lossless_dual):
        for event_id in lossless_dual.alphabet.event_ids:
            r = run_trial(lossless_dual, event_id, 0.3, trial_seed(0, event_id, 0, 0))
            assert r.event_est == event_id
            assert abs(r.theta_hat - lossless_dual.theta_true) <= 0.05

    def test_deterministic(self, dual_cfg):
        a = run_trial(dual_cfg, 2, 0.5, 77)
        b = run_trial(dual_cfg, 2, 0.5, 77)
        assert a == b

    def test_short_range_high_symbol(self, dual_cfg):
        hits = sum(run_trial(dual_cfg, 5, 0.005, trial_seed(3, 5, 0, t)).event_est == 5 for t in range(100))
        assert hits >= 95

    def test_seed_is_pure(self):
        assert trial_seed(1, 2, 3, 4) == trial_seed(1, 2, 3, 4)
        assert len({trial_seed(0, e, d, t) for e in range(3) for d in range(3) for t in range(3)}) == 27

    def test_snr_threshold_knob(self, dual_cfg):
        cfg = replace(dual_cfg, snr_threshold_db=0.0)
        r = run_trial(cfg, 1, 0.01, 5)
        assert abs(r.theta_hat - cfg.theta_true) < 5


class TestExperiment:
    def test_single_run_noiseless(self, lossless_dual):
        cfg = replace(lossless_dual, n_runs=1, distances=(0.005, 1.0))
        rep = run_experiment(cfg)
        assert np.all(rep.rmse_doa <= 0.05)
        assert np.all(rep.tpr == 1.0)

    def test_confusion_consistent_with_tpr(self, dual_cfg):
        rep = run_experiment(replace(dual_cfg, n_runs=4, distances=(0.5, 1.0)))
        for d in range(2):
            conf = rep.confusion[d]
            assert rep.overall_tpr(d) == pytest.approx(np.trace(conf) / conf.sum())
            assert np.all(conf.sum(axis=0) == 4)
            assert np.allclose(np.diag(conf) / 4, rep.tpr[:, d])

    def test_subset_rerun_reproduces(self, dual_cfg):
        cfg = replace(dual_cfg, n_runs=3, distances=(0.2, 1.0))
        rep = run_experiment(cfg)
        picked = [r for r in rep.trials if r.event_true == 4 and r.d_r == 1.0][2]
        again = run_trial(cfg, 4, 1.0, trial_seed(cfg.master_seed, 4, 1, 2))
        assert again == picked

    def test_parallel_matches_serial(self, dual_cfg, tmp_path):
        cfg = replace(dual_cfg, n_runs=2, distances=(0.1, 1.0))
        serial = emit_report(run_experiment(cfg, workers=1), tmp_path / "a")
        parallel = emit_report(run_experiment(cfg, workers=2), tmp_path / "b")
        for p, q in zip(serial, parallel):
            assert p.read_bytes() == q.read_bytes()

    def test_tpr_degrades_with_distance(self, dual_cfg):
        rep = run_experiment(replace(dual_cfg, n_runs=100, distances=(0.005, 1.0)))
        assert rep.tpr[:, 1].mean() <= rep.tpr[:, 0].mean()


class TestRmse:
    @given(st.lists(st.floats(-90, 90), min_size=1, max_size=20), st.floats(-90, 90))
    def test_non_negative_zero_iff_exact(self, estimates, truth):
        r = _rmse(estimates, truth)
        assert r >= 0
        assert (r == 0) == all(e == truth for e in estimates)


def _empty_report(mode="dual"):
    return MetricsReport(mode, [1, 2], np.array([1e12, 2e12]), (), -18.525, np.zeros((2, 0)),
                         np.zeros((2, 0)), np.zeros((2, 0)), np.zeros((0, 2, 2), dtype=int))


class TestEmitReport:
    def test_empty_sweep_is_header_only(self, tmp_path):
        paths = emit_report(_empty_report(), tmp_path)
        assert [len(p.read_text().splitlines()) for p in paths] == [1, 1]

    def test_reemit_identical(self, dual_cfg, tmp_path):
        rep = run_experiment(replace(dual_cfg, n_runs=2, distances=(1.0,)))
        first = [p.read_bytes() for p in emit_report(rep, tmp_path / "x", trials_jsonl=True)]
        second = [p.read_bytes() for p in emit_report(rep, tmp_path / "y", trials_jsonl=True)]
        assert first == second

    def test_confusion_columns_sum_to_runs(self, dual_cfg, tmp_path):
        rep = run_experiment(replace(dual_cfg, n_runs=3, distances=(0.02, 1.0)))
        _, conf_path = emit_report(rep, tmp_path)
        rows = [line.split(",") for line in conf_path.read_text().splitlines()[1:]]
        for d_r in ("0.02", "1.0"):
            block = np.array([[int(c) for c in r[3:]] for r in rows if r[1] == d_r and r[2] != "tpr"])
            assert np.all(block.sum(axis=0) == 3)
        # recompute from the trial list
        counts = np.zeros((6, 6), dtype=int)
        for r in rep.trials:
            if r.d_r == 1.0:
                counts[r.event_est - 1, r.event_true - 1] += 1
        assert np.array_equal(counts, rep.confusion[1])

    def test_metrics_long_format(self, dual_cfg, tmp_path):
        rep = run_experiment(replace(dual_cfg, n_runs=2, distances=(1.0,)))
        metrics, _ = emit_report(rep, tmp_path)
        lines = metrics.read_text().splitlines()
        assert lines[0] == "ula_mode,f_c_thz,d_r_m,metric,value"
        assert len(lines) == 1 + 6 * 3 + 4
        assert all(line.endswith("\n") is False and line.count(",") == 4 for line in lines)

    def test_trials_jsonl(self, dual_cfg, tmp_path):
        rep = run_experiment(replace(dual_cfg, n_runs=2, distances=(1.0,)))
        paths = emit_report(rep, tmp_path, trials_jsonl=True)
        objs = [json.loads(line) for line in paths[2].read_text().splitlines()]
        assert len(objs) == 12
        assert set(objs[0]) == {"event_true", "event_est", "theta_hat", "f_cen", "d_r", "seed"}

    def test_bad_format(self, tmp_path):
        with pytest.raises(ConfigError):
            emit_report(_empty_report(), tmp_path, fmt="xml")


def test_reference_comparison_layout(dual_cfg, single_cfg, tmp_path):
    reports = {m: run_experiment(replace(c, n_runs=2, distances=(1.0,))) for m, c in
               (("single", single_cfg), ("dual", dual_cfg))}
    path = compare_with_reference(reports, tmp_path)
    lines = path.read_text().splitlines()
    assert lines[0] == "ula_mode,row,true_thz,simulated,published,deviation"
    assert len(lines) == 1 + 2 * (36 + 6 + 1)
    for line in lines[1:]:
        _, _, _, sim, pub, dev = line.split(",")
        assert math.isclose(float(sim) - float(pub), float(dev), abs_tol=1e-12)
    assert all(sum(col) == 100 for col in zip(*REFERENCE_CONFUSION_1M["dual"]))
    assert all(sum(col) == 100 for col in zip(*REFERENCE_CONFUSION_1M["single"]))


def test_experiment_config_is_frozen(dual_cfg):
    assert isinstance(dual_cfg, ExperimentConfig)
    with pytest.raises(Exception):
        dual_cfg.n_runs = 5
