import math
from dataclasses import replace

import numpy as np
import pytest

from qrelay.analysis import fit_dip, fit_fringe, net_visibility
from qrelay.errors import ConfigError
from qrelay.scenarios import (
    background_probability,
    branch_weights,
    build_default_config,
    build_ideal_config,
    calibrate_dark_counts,
    config_keys,
    fringe_mean,
    mismatch_grid,
    phase_grid,
    run_blocking,
    run_mandel_scan,
    run_teleport_scan,
    teleport_acceptance,
)

IDEAL_DETECTORS = dict(
    eta_ge=1.0,
    eta_ingaas_bsa=1.0,
    dark_ge=0.0,
    dark_ingaas_bsa=0.0,
    dark_herald=0.0,
    dark_bob=0.0,
    loss_alice_db=0.0,
    loss_epr_db=0.0,
)


def test_config_validation():
    with pytest.raises(ConfigError):
        build_default_config().__class__(statistics="chaotic")
    with pytest.raises(ConfigError):
        replace(build_default_config(), eta_bob=1.5)
    with pytest.raises(ConfigError):
        replace(build_default_config(), pair_mean=-0.1)
    with pytest.raises(ConfigError):
        replace(build_default_config(), mandel_mode="sideways")
    with pytest.raises(ConfigError):
        replace(build_default_config(), mode="exact")
    with pytest.raises(ConfigError):
        replace(build_default_config(), max_bins=2)


def test_pair_mean_override():
    cfg = replace(build_default_config(), pair_mean=0.13).materialized()
    assert cfg.pair_mean is None
    assert cfg.alice_mean() == 0.13
    assert cfg.epr_mean() == 0.13
    assert "pair_mean" in config_keys()


def test_branch_weights_normalized():
    w = branch_weights(build_default_config())
    assert abs(sum(w.values()) - 1.0) < 1e-12
    assert set(w) == {(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (0, 2)}
    # forced single-pair mode collapses the enumeration
    wi = branch_weights(build_ideal_config())
    assert wi == {(1, 1): 1.0}


def test_branch_weights_thermal_identity():
    # for one thermal source, P0 * P2 equals P1 squared, so the double-pair
    # branches together weigh exactly as much as the coincidence branch
    w = branch_weights(replace(build_default_config(), pair_mean=0.09))
    assert abs(w[(2, 0)] - w[(1, 1)]) < 1e-15
    assert abs(w[(0, 2)] - w[(1, 1)]) < 1e-15


def test_ideal_acceptance_is_one_quarter():
    assert abs(teleport_acceptance(build_ideal_config()) - 0.25) < 1e-12


def test_ideal_fringe_unit_visibility():
    cfg = replace(build_ideal_config(), phase_alice=0.4, phase_pump=1.3)
    scan = run_teleport_scan(cfg, phase_grid(16, 1.0))
    fit = fit_fringe(scan.control, scan.counts)
    assert fit.visibility > 0.999999
    # destructive point sits where the analyzer undoes the preparation phases
    probe = run_teleport_scan(cfg, [cfg.phase_pump - cfg.phase_alice])
    assert probe.probability[0] < 1e-12


def test_ideal_mandel_null():
    short, long_ = run_mandel_scan(build_ideal_config(), [0.0])
    assert short.probability[0] < 1e-12
    assert long_.probability[0] < 1e-12


def test_thermal_dip_depth_one_third():
    cfg = replace(build_default_config(), pair_mean=1e-3, **IDEAL_DETECTORS)
    xs = mismatch_grid(21, 300.0)
    short, long_ = run_mandel_scan(cfg, xs)
    fs = fit_dip(xs, short.counts)
    fl = fit_dip(xs, long_.counts)
    assert abs(fs.depth - 1.0 / 3.0) < 1e-9
    assert abs(fl.depth - 1.0 / 3.0) < 1e-9
    assert abs(fs.fwhm - 144.0) < 1e-6
    assert abs(fs.center) < 1e-9
    assert abs(fl.center) < 1e-9


def test_poissonian_dip_depth_one_half():
    # poissonian pair numbers double-weight the single-source double pairs
    # relative to thermal, pushing the dip to one half
    cfg = replace(
        build_default_config(), pair_mean=1e-3, statistics="poissonian", **IDEAL_DETECTORS
    )
    xs = mismatch_grid(21, 300.0)
    short, _ = run_mandel_scan(cfg, xs)
    assert abs(fit_dip(xs, short.counts).depth - 0.5) < 1e-6


def test_entangled_mode_dip_depth():
    # two-bin relay emission dilutes which-path erasure; at equal means the
    # depth lands exactly at 6/25
    cfg = replace(
        build_default_config(), pair_mean=0.07, mandel_mode="entangled", **IDEAL_DETECTORS
    )
    xs = mismatch_grid(21, 300.0)
    short, long_ = run_mandel_scan(cfg, xs)
    assert abs(fit_dip(xs, short.counts).depth - 0.24) < 1e-9
    assert abs(fit_dip(xs, long_.counts).depth - 0.24) < 1e-9


def test_dip_depth_independent_of_pair_mean():
    # within the two-pair truncation the background-to-signal ratio is set
    # by the statistics alone, so thermal dips agree across pump powers
    xs = mismatch_grid(9, 200.0)
    depths = []
    for mu in (1e-3, 0.05):
        cfg = replace(build_default_config(), pair_mean=mu, **IDEAL_DETECTORS)
        short, _ = run_mandel_scan(cfg, xs)
        depths.append(fit_dip(xs, short.counts).depth)
    assert abs(depths[0] - depths[1]) < 1e-9


def test_analytic_counts_are_probability_times_pulses():
    cfg = replace(build_ideal_config(), pulses_per_point=12345)
    scan = run_teleport_scan(cfg, phase_grid(8, 1.0))
    assert np.array_equal(scan.counts, scan.probability * 12345.0)
    assert scan.pulses == 12345


def test_fringe_mean_independent_of_phases():
    base = replace(build_default_config(), **IDEAL_DETECTORS)
    m0 = fringe_mean(base)
    m1 = fringe_mean(replace(base, phase_alice=0.9))
    m2 = fringe_mean(replace(base, phase_pump=2.1))
    assert abs(m1 - m0) < 1e-9 * m0
    assert abs(m2 - m0) < 1e-9 * m0


def test_heralding_never_lowers_visibility():
    cal, _ = calibrate_dark_counts(build_default_config())
    phis = phase_grid(12, 1.0)
    v = {}
    for heralded in (False, True):
        cfg = replace(cal, heralded=heralded, pair_mean=0.13)
        v[heralded] = fit_fringe(phis, run_teleport_scan(cfg, phis).counts).visibility
    assert v[True] >= v[False] - 1e-12


def test_lower_pump_never_lowers_visibility():
    cal, _ = calibrate_dark_counts(build_default_config())
    phis = phase_grid(12, 1.0)
    v = {}
    for mu in (0.13, 0.13 / 4.0):
        cfg = replace(cal, pair_mean=mu)
        v[mu] = fit_fringe(phis, run_teleport_scan(cfg, phis).counts).visibility
    assert v[0.13 / 4.0] >= v[0.13] - 1e-12


def test_blocking_behaviour():
    base = build_default_config()
    # placeholder dark counts keep every blocked configuration clicking
    assert run_blocking(base, "epr") > 0.0
    assert run_blocking(base, "both") > 0.0
    cal, _ = calibrate_dark_counts(base)
    if cal.dark_bob == 0.0:
        # with dark-free calibrated detectors the receiver cannot click
        # unless the relay source fired
        assert run_blocking(cal, "epr") == 0.0
        assert run_blocking(cal, "both") == 0.0
    assert run_blocking(cal, "alice") > 0.0
    assert background_probability(cal) > 0.0
    with pytest.raises(ConfigError):
        run_blocking(base, "charlie")


def test_calibration_clamps_when_multipair_background_dominates():
    cal, report = calibrate_dark_counts(build_default_config())
    assert report.clamped
    assert report.achieved_ratio >= report.target_ratio
    assert cal.dark_ge == 0.0 and cal.dark_bob == 0.0
    assert cal.detectors_calibrated


def test_calibration_reaches_feasible_target():
    cfg = replace(build_default_config(), pair_mean_epr=0.005)
    cal, report = calibrate_dark_counts(cfg)
    assert not report.clamped
    assert abs(report.achieved_ratio - 1.0) < 1e-4
    assert cal.dark_bob > 0.0
    # the calibrated configuration reproduces the target ratio end to end
    b = background_probability(cal)
    s = fringe_mean(cal) - b
    assert abs(b / s - 1.0) < 1e-4


def test_montecarlo_reruns_byte_identical():
    cfg = replace(build_ideal_config(), mode="montecarlo", trials=10**5, seed=42)
    phis = phase_grid(8, 1.0)
    a = run_teleport_scan(cfg, phis)
    b = run_teleport_scan(cfg, phis)
    assert np.array_equal(a.counts, b.counts)
    c = run_teleport_scan(replace(cfg, seed=43), phis)
    assert not np.array_equal(a.counts, c.counts)


def test_montecarlo_matches_analytic_within_three_se():
    cfg = replace(build_ideal_config(), mode="montecarlo", trials=10**6, seed=7)
    phis = phase_grid(12, 1.0)
    scan = run_teleport_scan(cfg, phis)
    lam = scan.probability * scan.pulses
    assert abs(scan.counts.sum() - lam.sum()) <= 3.0 * math.sqrt(lam.sum())


def test_grid_validation():
    with pytest.raises(ConfigError):
        phase_grid(3)
    with pytest.raises(ConfigError):
        mismatch_grid(4)
