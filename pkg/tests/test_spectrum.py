import math

import numpy as np
import pytest

from tracerflow import (SpectrumError, build_power_law_spectrum, check_h1,
                        check_h2, gamma_star, h2_tail_bound,
                        spectrum_from_tables)
from conftest import single_pair_model


def test_lattice_count_k1():
    m = build_power_law_spectrum(2, 1, 1.0, 14.0, "full", 1.0, 2.0)
    assert m.size == 8  # 3x3 block minus the origin


def test_incompressible_projector_orthogonal_to_k():
    m = build_power_law_spectrum(2, 1, 1.0, 0.0, "incompressible", 1.0, 2.0)
    np.testing.assert_allclose(m.energy_of((1, 0)).real, [[0, 0], [0, 1]],
                               atol=1e-15)
    # projector annihilates k itself
    e = m.energy_of((1, 1))
    assert np.abs(e @ np.array([1.0, 1.0])).max() < 1e-14


def test_potential_plus_incompressible_is_full():
    inc = build_power_law_spectrum(2, 2, 1.3, 5.0, "incompressible", 1.0, 2.0)
    pot = build_power_law_spectrum(2, 2, 1.3, 5.0, "potential", 1.0, 2.0)
    full = build_power_law_spectrum(2, 2, 1.3, 5.0, "full", 1.0, 2.0)
    np.testing.assert_allclose(inc.energy + pot.energy, full.energy, atol=1e-14)


def test_gamma_power_law_value():
    m = build_power_law_spectrum(2, 2, 1.0, 14.0, "full", 1.0, 2.0)
    assert m.gamma_of((2, 1)) == pytest.approx(5.0, abs=1e-14)


def test_gamma_star_quadratic_lattice(default_model):
    assert gamma_star(default_model) == pytest.approx(1.0, abs=0)


def test_gamma_star_cubic():
    m = build_power_law_spectrum(2, 4, 1.0, 14.0, "full", 0.5, 3.0)
    assert gamma_star(m) == pytest.approx(0.5, abs=1e-15)


def test_gamma_star_single_pair():
    m = single_pair_model(gamma=2.7)
    assert gamma_star(m) == 2.7


def test_gamma_star_enumeration_order_invariant():
    entries = {(1, 0): (1.5, np.eye(2)), (0, 1): (0.7, 2 * np.eye(2)),
               (1, 1): (3.0, np.eye(2))}
    a = spectrum_from_tables(2, 1, entries)
    b = spectrum_from_tables(2, 1, dict(reversed(list(entries.items()))))
    assert gamma_star(a) == gamma_star(b) == 0.7


def test_regularity_sum_single_pair_unit():
    # one conjugate pair at |k|=1 with unit total energy trace, gamma=1,
    # m=3, alpha=0.5: the site sum is gamma^0.5 * |k|^8 * (1/2 + 1/2) = 1
    m = single_pair_model(gamma=1.0, energy=0.25 * np.eye(2), m=3, alpha=0.5)
    assert check_h1(m) == pytest.approx(1.0, abs=1e-14)


def test_regularity_sum_zero_energy():
    m = single_pair_model(energy=np.zeros((2, 2)))
    assert check_h1(m) == 0.0


def test_regularity_sum_matches_direct_lattice_loop(default_model):
    m, alpha, sigma0, p = 3, 0.5, 1.0, 14.0
    total = 0.0
    for i in range(-8, 9):
        for j in range(-8, 9):
            if i == 0 and j == 0:
                continue
            k2 = float(i * i + j * j)
            gamma = k2
            trace = sigma0 * k2 ** (-p / 2.0) * 1.0  # incompressible trace = d-1
            total += gamma ** alpha * k2 ** (m + 1) * trace
    assert check_h1(default_model) == pytest.approx(total, rel=1e-12)


def test_mixing_integral_single_mode_exponential():
    m = single_pair_model(gamma=1.0)
    val = check_h2(m, t_max=20.0, quad_steps=4000)
    assert val == pytest.approx(1.0, abs=1e-3)
    assert h2_tail_bound(m, 20.0) < 1e-8


def test_mixing_integral_truncation_stable():
    a = build_power_law_spectrum(2, 8, 1.0, 14.0, "full", 1.0, 2.0)
    b = build_power_law_spectrum(2, 16, 1.0, 14.0, "full", 1.0, 2.0)
    va = check_h2(a, 20.0, 40000)
    vb = check_h2(b, 20.0, 40000)
    assert abs(vb - va) / va < 0.01


def test_sums_monotone_in_truncation():
    h1s, h2s = [], []
    for K in (1, 2, 3, 4):
        m = build_power_law_spectrum(2, K, 1.0, 14.0, "full", 1.0, 2.0)
        h1s.append(check_h1(m))
        h2s.append(check_h2(m, 20.0, 2000))
    assert all(b >= a - 1e-12 for a, b in zip(h1s, h1s[1:]))
    assert all(b >= a - 1e-9 for a, b in zip(h2s, h2s[1:]))
    assert min(h1s + h2s) >= 0.0


def test_energy_mirror_is_exact_conjugate(default_model):
    m = default_model
    for i, j in zip(m.pair_pos, m.pair_neg):
        assert np.array_equal(m.energy[j], m.energy[i].conj())


def test_mode_table_validation_rejects_bad_energy():
    with pytest.raises(SpectrumError):
        spectrum_from_tables(2, 1, {(1, 0): (1.0, np.array([[1.0, 2.0], [0.0, 1.0]]))})
    with pytest.raises(SpectrumError):
        spectrum_from_tables(2, 1, {(1, 0): (1.0, np.array([[1.0, 0], [0, -1.0]]))})
    with pytest.raises(SpectrumError):
        spectrum_from_tables(2, 1, {(1, 0): (0.0, np.eye(2))})  # gamma > 0
    with pytest.raises(SpectrumError):
        spectrum_from_tables(2, 1, {(0, 0): (1.0, np.eye(2))})


def test_builder_rejections():
    good = (2, 2, 1.0, 14.0, "full", 1.0, 2.0)
    for args in [(0, 2, 1.0, 14.0, "full", 1.0, 2.0),
                 (2, 0, 1.0, 14.0, "full", 1.0, 2.0),
                 (2, 2, 0.0, 14.0, "full", 1.0, 2.0),
                 (2, 2, 1.0, 14.0, "full", 0.0, 2.0),
                 (2, 2, 1.0, 14.0, "full", 1.0, 0.5),
                 (2, 2, 1.0, 14.0, "sideways", 1.0, 2.0)]:
        with pytest.raises(SpectrumError):
            build_power_law_spectrum(*args)
    build_power_law_spectrum(*good)


def test_psd_tolerance_accepts_projector_roundoff():
    # projectors produce eigenvalues at the -1e-16 level; they must pass
    m = build_power_law_spectrum(3, 2, 1.0, 4.0, "incompressible", 1.0, 2.0)
    assert m.size == 5 ** 3 - 1
