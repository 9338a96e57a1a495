from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import linregress

from conftest import PERTURBED_K, basic_config, fine_modes
from energy import (
    EnergyConfig,
    EnergyCurve,
    EnergyVersion,
    basic_case_decomposition,
    case_residual_by_m,
    curve_for_modes,
    energy_dF_analytic,
    energy_dF_fd,
    energy_F,
    identity_error,
    initial_energy_decomposition,
    local_basic_threshold,
    rho_for,
    rho_weight,
    v0_expansion,
    version_configs,
)
from errors import DomainError, GridTooCoarse, VersionParameterMissing
from geometry import log_grid, metric_from_family
from modes import ModeSolution, transform_v
from potential import PotentialSpec, builtin_family

# (metric family, params, n, extra metric kwargs, potential, lambda, a4, a5, l_max)
IDENTITY_CASES = {
    'h2-free': ('hyperbolic', [], 2, {}, None, 0.75, 1.0, 0.0, 1),
    'h3-free': ('hyperbolic', [], 3, {}, None, 1.5, 2.0, 0.0, 1),
    'h3-subthreshold': ('hyperbolic', [], 3, {}, None, 0.9, 2.0, 0.0, 1),
    'h3-power': ('hyperbolic', [], 3, {}, ('power', [0.1, 1.0]), 1.5, 2.0, 0.0, 1),
    'h3-longrange': ('hyperbolic', [], 3, {}, ('longrange', [0.1, 0.5]), 1.5, 2.0, 0.0, 1),
    'perturbed-A0.1': ('curvature', [], 3, {'expression': PERTURBED_K, 'A': 0.1}, None, 1.5, 2.0, 0.0, 1),
    'euclidean-oracle': ('euclidean', [], 3, {}, None, 1.0, 0.0, 2.0, 0),
}


def _identity_case(name):
    family, params, n, kwargs, pot, lam, a4, a5, l_max = IDENTITY_CASES[name]
    metric = metric_from_family(family, params, n, 1.0, 40.0, **kwargs)
    potential = PotentialSpec.zero() if pot is None else builtin_family(*pot)
    initial = {0: (np.sin(1.0), np.cos(1.0) - np.sin(1.0))} if family == 'euclidean' else None
    modes = fine_modes(metric, potential, lam, l_max=l_max, r_end=40.0, initial=initial)
    return metric, potential, modes, basic_config(lam, a4, a5)


def test_config_validation():
    with pytest.raises(VersionParameterMissing):
        EnergyConfig('goodbound', 0.0, 0.5, 1.0, 1.5, 2.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        EnergyConfig('goodbound', 0.0, 0.5, 1.0, 1.5, 2.0, 0.0, 1.0, sigma=1.5)
    with pytest.raises(DomainError):
        EnergyConfig('basic', 0.0, 1.0, 1.0, 1.5, 2.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        EnergyConfig('basic', -1.0, 0.5, 1.0, 1.5, 2.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        EnergyConfig('cubic', 0.0, 0.5, 1.0, 1.5, 2.0, 0.0, 1.0)

    cfg = EnergyConfig('goodbound', 0.0, 0.5, 1.0, 1.5, 2.0, 0.0, 1.0, sigma=0.25)
    assert cfg.version is EnergyVersion.GOODBOUND
    assert cfg.delta_bar_weight == 0.75
    assert cfg.label == 'goodbound(sigma=0.25)'
    assert basic_config(1.5, 2.0, 0.0).delta_bar_weight == 0.0


def test_version_configs():
    labels = [cfg.label for cfg in version_configs(basic_config(1.5, 2.0, 0.0))]
    assert labels == ['basic', 'gradient', 'mixed', 'goodbound(sigma=0)',
                      'goodbound(sigma=0.5)', 'goodbound(sigma=1)']


def test_rho_weight_examples():
    rho = rho_weight(2.0, 0.0, 1.0, 1.0, 10.0)
    assert rho.value(3.0) == pytest.approx(2.0)
    assert rho.d1(7.0) == pytest.approx(1.0)
    assert rho.d2(7.0) == 0.0

    log_rho = rho_weight(0.0, 2.0, 1.0, 1.0, 10.0)
    assert log_rho.value(np.e) == pytest.approx(1.0)
    assert log_rho.value(1.0) == 0.0


def test_v0_leading_term_on_flat_mean_curvature():
    # exp_power(2, 0) has Δr ≡ 2 in dimension 2
    metric = metric_from_family('exp_power', [2.0, 0.0], 2, 1.0, 40.0)
    frame = v0_expansion(2.0, 0.0, metric, log_grid(1.0, 40.0))
    assert_allclose(frame['V0'], 1.0, rtol=1e-13)
    assert_allclose(frame['remainder'], 0.0, atol=1e-13)


def test_v0_remainder_decays_like_inverse_square():
    metric = metric_from_family('exp_power', [1.0, 2.0], 3, 1.0, 40.0)
    frame = v0_expansion(2.0, 4.0, metric, log_grid(10.0, 40.0))
    assert_allclose(frame['remainder'], frame['predicted_remainder'], rtol=1e-8)
    assert_allclose(frame['remainder'], 2.0 / frame['r'] ** 2, rtol=1e-8)
    fit = linregress(np.log(frame['r']), np.log(np.abs(frame['remainder'])))
    assert fit.slope <= -1.9


def test_fd_polynomial_exact():
    r = np.linspace(1.0, 2.0, 21)
    curve = EnergyCurve(r, r ** 2)
    assert_allclose(energy_dF_fd(curve), 2 * r, rtol=1e-12)


def test_fd_exponential_on_log_grid():
    r = log_grid(0.1, 0.5, 64)
    dF = energy_dF_fd(EnergyCurve(r, np.exp(r)))
    assert_allclose(dF[2:-2], np.exp(r[2:-2]), rtol=1e-8)
    assert_allclose(dF, np.exp(r), rtol=1e-3)


def test_fd_too_coarse():
    r = np.array([1.0, 2.0, 3.0])
    with pytest.raises(GridTooCoarse):
        energy_dF_fd(EnergyCurve(r, r))


@pytest.mark.parametrize('name', sorted(IDENTITY_CASES))
def test_derivative_identity_all_versions(name):
    metric, potential, modes, base = _identity_case(name)
    for cfg in version_configs(base):
        for m in (0.0, 1.0):
            curve = curve_for_modes(replace(cfg, m=m), metric, potential, modes)
            assert identity_error(curve) <= 1e-6, (cfg.label, m)


def test_identity_error_is_relative_to_term_magnitudes():
    # F cancels to zero while its terms are large
    r = log_grid(1.0, 10.0, 64)
    curve = EnergyCurve(r, np.zeros_like(r), dF_analytic=np.full_like(r, 1e-3), dF_fd=np.zeros_like(r))
    assert identity_error(curve) == pytest.approx(1.0)
    curve.F_scale = np.full_like(r, 1e6)
    assert identity_error(curve) < 1e-8


def test_identity_needs_both_derivatives(h3, zero_potential, h3_modes):
    cfg = basic_config(1.5, 2.0, 0.0)
    curve = curve_for_modes(cfg, h3, zero_potential, h3_modes, with_derivative=False)
    assert curve.dF_analytic is None
    with pytest.raises(DomainError):
        identity_error(curve)


def test_term_groups_sum_to_derivative(h3, zero_potential, h3_modes):
    curve = curve_for_modes(basic_config(1.5, 2.0, 0.0, m=1.0), h3, zero_potential, h3_modes)
    frame = curve.to_frame()
    total = sum(frame[f'group{i}'] for i in range(1, 8))
    assert_allclose(total, frame['dF_analytic'], rtol=1e-12)
    assert list(frame.columns[:4]) == ['r', 'F', 'dF_analytic', 'dF_fd']


def test_analytic_derivative_without_fd(h3, zero_potential, h3_modes):
    cfg = basic_config(1.5, 2.0, 0.0, m=1.0)
    modes_v = transform_v(h3_modes, rho_for(cfg, 1.0, 100.0), cfg.m)
    curve = energy_dF_analytic(cfg, h3, zero_potential, modes_v)
    assert curve.dF_fd is None
    assert sorted(curve.term_groups) == [f'group{i}' for i in range(1, 8)]
    assert_allclose(curve.F, energy_F(cfg, h3, zero_potential, modes_v).F, rtol=1e-14)
    assert_allclose(sum(curve.term_groups.values()), curve.dF_analytic, rtol=1e-12, atol=1e-300)


def test_energy_is_quadratic(h3, zero_potential, h3_modes):
    cfg = basic_config(1.5, 2.0, 0.0)
    rho = rho_for(cfg, 1.0, 100.0)
    modes_v = transform_v(h3_modes, rho, 0.0)
    scaled = [type(tm)(tm.source, tm.m, tm.r_ref, tm.rho, 3 * tm.v, 3 * tm.v_prime, 3 * tm.v_second)
              for tm in modes_v]
    assert_allclose(energy_F(cfg, h3, zero_potential, scaled).F,
                    9 * energy_F(cfg, h3, zero_potential, modes_v).F, rtol=1e-12)


def test_energy_flat_closed_form():
    # u ≡ 1 with Δr ≡ a4 gives v = e^ρ, so K = P and T = 0
    metric = metric_from_family('exp_power', [2.0, 0.0], 2, 1.0, 10.0)
    grid = log_grid(1.0, 10.0, 16)
    mode = ModeSolution(0, 0.0, grid, np.ones_like(grid), np.zeros_like(grid),
                        np.zeros_like(grid), 2.0)
    cfg = EnergyConfig('basic', 0.0, 0.0, 0.0, 2.0, 2.0, 0.0, 1.0)
    curve = curve_for_modes(cfg, metric, PotentialSpec.zero(), [mode], with_derivative=False)
    P = 2 * np.pi * np.exp(2.0 * grid)
    assert_allclose(curve.P, P, rtol=1e-12)
    assert_allclose(curve.K, P, rtol=1e-12)
    assert_allclose(curve.F, 0.5 * (P + (-1.0 + 2.0) * P), rtol=1e-12)


def test_mismatched_transform_is_rejected(h3, zero_potential, h3_modes):
    cfg = basic_config(1.5, 2.0, 0.0)
    modes_v = transform_v(h3_modes, rho_for(cfg, 1.0, 100.0), 0.0)
    with pytest.raises(DomainError):
        energy_F(basic_config(1.5, 2.0, 0.0, m=1.0), h3, zero_potential, modes_v)
    other_rho = transform_v(h3_modes, rho_weight(2.0, 0.0, 2.0, 1.0, 100.0), 0.0)
    with pytest.raises(DomainError):
        energy_F(cfg, h3, zero_potential, other_rho)


def test_initial_decomposition_matches_direct(h3, zero_potential, h3_modes):
    cfg = basic_config(1.5, 2.0, 0.0, t=0.5, s=0.0)
    modes_v = transform_v(h3_modes, rho_for(cfg, 1.0, 100.0), 0.0)
    for m0 in (0.0, 1.0, 4.0, 16.0):
        split = initial_energy_decomposition(cfg, m0, h3, zero_potential, modes_v)
        scale = np.max(np.abs(split.direct))
        assert_allclose(split.total, split.direct, rtol=1e-10, atol=1e-12 * scale)
        assert split.max_rel_error < 1e-10
        assert np.all(split.scale >= np.abs(split.direct))

    with pytest.raises(DomainError):
        initial_energy_decomposition(basic_config(1.5, 2.0, 0.0), 1.0, h3, zero_potential, modes_v)


def test_initial_decomposition_collapses_at_zero(h3, zero_potential, h3_modes):
    cfg = basic_config(1.5, 2.0, 0.0, t=0.0, s=0.0)
    modes_v = transform_v(h3_modes, rho_for(cfg, 1.0, 100.0), 0.0)
    split = initial_energy_decomposition(cfg, 0.0, h3, zero_potential, modes_v)
    assert_allclose(split.bracket, 0.0)
    assert_allclose(split.remainder, 0.0)
    assert_allclose(split.scaled_base, split.direct, rtol=1e-14)


def test_initial_decomposition_gradient_version(h3, zero_potential, h3_modes):
    cfg = EnergyConfig('gradient', 0.0, 0.5, 0.0, 1.5, 2.0, 0.0, 1.0)
    modes_v = transform_v(h3_modes, rho_for(cfg, 1.0, 100.0), 0.0)
    split = initial_energy_decomposition(cfg, 4.0, h3, zero_potential, modes_v)
    assert_allclose(split.total, split.direct, rtol=1e-10, atol=1e-12 * np.max(np.abs(split.direct)))


def test_basic_case_decomposition(h3, zero_potential, h3_modes):
    cfg = basic_config(1.5, 2.0, 0.0)
    modes_v = transform_v(h3_modes, rho_for(cfg, 1.0, 100.0), 0.0)
    frame = basic_case_decomposition(cfg, h3, zero_potential, modes_v)
    assert {'case1', 'case2', 'case3', 'case4', 'case5', 'residual', 'scale'} <= set(frame.columns)
    tail = frame[frame['r'] >= 10.0]
    assert (tail['residual'].abs() / tail['scale']).max() < 1e-3

    gradient = EnergyConfig('gradient', 0.0, 0.5, 0.999, 1.5, 2.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        basic_case_decomposition(gradient, h3, zero_potential, modes_v)


def test_case_residual_by_m(h3, zero_potential, h3_modes):
    table = case_residual_by_m(basic_config(1.5, 2.0, 0.0), h3, zero_potential, h3_modes,
                               [0.0, 1.0, 2.0], 10.0)
    assert list(table['m']) == [0.0, 1.0, 2.0]
    assert (table['max_scaled_residual'] >= 0).all()


def test_local_basic_threshold(h3, zero_potential):
    grid = log_grid(5.0, 50.0)
    threshold = local_basic_threshold(basic_config(1.5, 2.0, 0.0), h3, zero_potential, grid)
    assert_allclose(threshold, 1.0, rtol=1e-5)

    potential = builtin_family('power', [0.1, 1.0])
    bumped = local_basic_threshold(basic_config(1.5, 2.0, 0.0), h3, potential, grid)
    assert np.all(bumped > threshold)
    assert np.all(np.isinf(local_basic_threshold(basic_config(1.5, 2.0, 0.0, s=0.0), h3,
                                                 zero_potential, grid)))
