import math

import numpy as np
import pytest

from tracerflow import (FourierField, ObservableSpec, e_property_probe,
                        lln_test, moment_scan, occupation_fraction,
                        run_lagrangian, sample_stationary, sobolev_norm,
                        stability_probe, stationary_norm_moment, time_average,
                        zero_field)
from tracerflow.ergodic import time_average_with_stderr
from tracerflow.field import ens_norm_m, ens_sample_stationary
from conftest import zero_energy_model, single_pair_model

TANH_NORM = ObservableSpec("bounded_lipschitz_of_norm")


def lipschitz_of_tanh_sq() -> float:
    s = np.linspace(0.0, 3.0, 20001)
    return float((2 * s / np.cosh(s ** 2) ** 2).max())


# ---------------------------------------------------------------- averages

def test_time_average_of_constant_indicator(small_model):
    rec = run_lagrangian(small_model, T=1.0, dt=0.01, record_every=5, seed=0)
    one = ObservableSpec("indicator_ball", delta=1e9)
    assert time_average(rec, one) == pytest.approx(1.0, abs=0)


def test_time_average_dead_field_is_zero():
    rec = run_lagrangian(zero_energy_model(), T=1.0, dt=0.01, record_every=5,
                         seed=1)
    assert time_average(rec, TANH_NORM) == 0.0


def test_time_average_vector_observable(small_model):
    rec = run_lagrangian(small_model, T=1.0, dt=0.01, record_every=5, seed=2)
    v = time_average(rec, ObservableSpec("velocity_at_origin"))
    assert v.shape == (2,)
    c0 = time_average(rec, ObservableSpec("velocity_at_origin", component=0))
    assert float(v[0]) == pytest.approx(float(c0))


def test_long_runs_agree_from_independent_starts(small_model):
    # start-independence of the time average, checked between two seeds
    a = run_lagrangian(small_model, T=500.0, dt=0.01, record_every=10, seed=3)
    b = run_lagrangian(small_model, T=500.0, dt=0.01, record_every=10, seed=44)
    ma, sa = time_average_with_stderr(a, TANH_NORM)
    mb, sb = time_average_with_stderr(b, TANH_NORM)
    assert abs(ma - mb) <= 4.0 * math.hypot(sa, sb)


# ---------------------------------------------------------------- occupation

def test_occupation_saturates_for_large_radius(small_model):
    rec = run_lagrangian(small_model, T=2.0, dt=0.01, record_every=2, seed=4)
    rep = occupation_fraction(rec, None, delta=1e9)
    assert rep.fraction == 1.0
    assert rep.window_min == 1.0


def test_occupation_full_for_dead_field_at_origin():
    rec = run_lagrangian(zero_energy_model(), T=1.0, dt=0.01, record_every=2,
                         seed=5)
    rep = occupation_fraction(rec, None, delta=1e-6)
    assert rep.fraction == 1.0


def test_occupation_above_half_at_twice_median_norm(small_model):
    rec = run_lagrangian(small_model, T=200.0, dt=0.02, record_every=5, seed=6)
    delta = 2.0 * float(np.median(rec.field_norms))
    rep = occupation_fraction(rec, None, delta)
    assert rep.fraction > 0.5
    assert rep.window_min > 0.0
    assert 0.0 <= rep.fraction <= 1.0


def test_occupation_requires_positive_radius(small_model):
    rec = run_lagrangian(small_model, T=0.5, dt=0.01, record_every=5, seed=7)
    with pytest.raises(ValueError):
        occupation_fraction(rec, None, 0.0)


def test_occupation_distance_to_nonzero_center(small_model):
    z = sample_stationary(small_model, np.random.default_rng(8))
    rec = run_lagrangian(small_model, T=0.5, dt=0.01, record_every=5, seed=9,
                         reference_field=z)
    rep = occupation_fraction(rec, z, delta=1e9)
    assert rep.fraction == 1.0
    bare = run_lagrangian(small_model, T=0.5, dt=0.01, record_every=5, seed=9)
    with pytest.raises(ValueError):
        occupation_fraction(bare, z, delta=1.0)


# ---------------------------------------------------------------- moments

def test_moment_scan_zero_field_zero_radius():
    m = zero_energy_model()
    scan = moment_scan(m, R=0.0, n=1, T=2.0, ensemble=10, seed=10)
    assert scan.max_value == 0.0


def test_stationary_moment_closed_form_matches_sampling(default_model):
    m = default_model
    draws = ens_sample_stationary(m, 40000, np.random.default_rng(11))
    norms_sq = ens_norm_m(m, draws) ** 2
    s2 = stationary_norm_moment(m, 1)
    s4 = stationary_norm_moment(m, 2)
    assert abs(norms_sq.mean() - s2) / s2 < 0.03
    assert abs((norms_sq ** 2).mean() - s4) / s4 < 0.05


def test_moment_scan_settles_at_stationary_level(default_model):
    scan = moment_scan(default_model, R=math.sqrt(stationary_norm_moment(default_model, 1)),
                       n=1, T=50.0, ensemble=500, seed=12, grid_dt=0.5)
    assert abs(scan.settled_max - scan.stationary_value) / scan.stationary_value < 0.2


def test_moment_scan_decays_monotonically_from_large_start(default_model):
    scan = moment_scan(default_model, R=10.0, n=1, T=6.0, ensemble=500,
                       seed=13, grid_dt=0.2)
    means = scan.ensemble_means
    assert all(means[i + 1] <= means[i] * 1.10 + 0.2 for i in range(means.size - 1))
    assert scan.max_value == pytest.approx(100.0, rel=1e-9)  # R^2 at t=0


def test_moment_closed_form_limited_to_low_orders(default_model):
    with pytest.raises(ValueError):
        stationary_norm_moment(default_model, 3)


# ---------------------------------------------------------------- stability

def test_stability_certain_without_noise():
    m = zero_energy_model()
    rep = stability_probe(m, None, eps=1e-9, T=0.5, ensemble=16, seed=14,
                          dt=1e-2)
    assert rep.probability == 1.0


def test_stability_certain_for_huge_tolerance(small_model):
    rep = stability_probe(small_model, None, eps=1e9, T=0.2, ensemble=16,
                          seed=15, dt=1e-2)
    assert rep.probability == 1.0


def test_stability_high_within_noise_ball(default_model):
    eps = 3.0 * math.sqrt(stationary_norm_moment(default_model, 1))
    rep = stability_probe(default_model, None, eps, T=1.0, ensemble=200,
                          seed=16, dt=1e-3)
    assert rep.probability > 0.9


# ---------------------------------------------------------------- coupling

def test_coupling_gap_vanishes_at_zero_offset(small_model):
    rep = e_property_probe(small_model, None, [0.5, 0.0], TANH_NORM, T=0.3,
                           ensemble=40, seed=17, dt=1e-2, record_stride=5)
    assert rep.profile[-1] == 0.0


def test_coupling_gap_bounded_by_lipschitz_offset():
    # without noise the coupled pair contracts deterministically, so the gap
    # is at most the observable's Lipschitz constant times the offset
    m = zero_energy_model(gammas={(1, 0): 1.0, (0, 1): 1.0, (1, 1): 2.0})
    lip = lipschitz_of_tanh_sq()
    rep = e_property_probe(m, None, [1.0, 0.5], TANH_NORM, T=1.0,
                           ensemble=4, seed=18, dt=1e-2, record_stride=10)
    for h, gap in zip(rep.offsets, rep.profile):
        assert gap <= 1.1 * lip * h


def test_coupling_profile_monotone_within_noise(small_model):
    rep = e_property_probe(small_model, None, [1.0, 0.5, 0.25], TANH_NORM,
                           T=0.5, ensemble=60, seed=19, dt=2e-3,
                           record_stride=10)
    for i in range(rep.offsets.size - 1):
        noise = 3.0 * math.hypot(rep.stderr[i], rep.stderr[i + 1])
        assert rep.profile[i + 1] <= rep.profile[i] + noise


# ---------------------------------------------------------------- lln

def test_lln_variance_zero_for_constant_observable(small_model):
    one = ObservableSpec("indicator_ball", delta=1e9)
    rep = lln_test(small_model, one, horizons=[0.5, 1.0], ensemble=6, seed=20,
                   dt=0.01, record_every=5)
    np.testing.assert_array_equal(rep.variances, np.zeros(2))


def test_lln_variance_decays_with_horizon(small_model):
    psi = ObservableSpec("velocity_at_origin", component=0)
    rep = lln_test(small_model, psi, horizons=[10.0, 40.0], ensemble=40,
                   seed=21, dt=0.02, record_every=2)
    assert rep.variances[1] <= 0.8 * rep.variances[0]


def test_lln_requires_two_horizons(small_model):
    with pytest.raises(ValueError):
        lln_test(small_model, TANH_NORM, horizons=[1.0], ensemble=4, seed=22)


# ---------------------------------------------------------------- observables

def test_observable_validation():
    with pytest.raises(ValueError):
        ObservableSpec("nonsense")
    with pytest.raises(ValueError):
        ObservableSpec("indicator_ball")          # needs delta
    with pytest.raises(ValueError):
        ObservableSpec("indicator_ball", delta=0.0)


def test_indicator_observable_on_record(small_model):
    rec = run_lagrangian(small_model, T=0.5, dt=0.01, record_every=5, seed=23)
    ind = ObservableSpec("indicator_ball", delta=float(np.median(rec.field_norms)))
    series = ind.series(rec)
    assert set(np.unique(series)).issubset({0.0, 1.0})


def test_run_summary_bundles_diagnostics(small_model):
    from tracerflow import ErgodicReport, summarize_run
    rec = run_lagrangian(small_model, T=1.0, dt=0.01, record_every=5, seed=24)
    rep = summarize_run(rec, TANH_NORM)
    assert rep.horizon == pytest.approx(1.0)
    assert 0.0 <= rep.occupation_fraction <= 1.0
    assert rep.window_min <= rep.occupation_fraction + 1e-12
    assert rep.delta == pytest.approx(2.0 * float(np.median(rec.field_norms)))
    with pytest.raises(ValueError):
        ErgodicReport(1.0, 0.0, 0.0, 1.5, 0.0, 1.0, 0)


def test_coupling_offsets_must_decrease(small_model):
    with pytest.raises(ValueError):
        e_property_probe(small_model, None, [0.25, 0.5], TANH_NORM, T=0.1,
                         ensemble=4, seed=25, dt=0.01)
