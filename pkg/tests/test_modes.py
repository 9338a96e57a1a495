import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from energy import rho_weight
from errors import DomainError, GridMismatch
from geometry import log_grid, metric_from_family, profile_from_expression
from modes import (
    ModeSolution,
    SolveConfig,
    eigenvalue,
    integrate_mode,
    modes_table,
    residual_check,
    solve_modes,
    sphere_norms,
    transform_v,
    unit_sphere_area,
    wronskian,
)
from potential import manufactured_potential


def test_sphere_constants():
    assert unit_sphere_area(2) == pytest.approx(2 * np.pi)
    assert unit_sphere_area(3) == pytest.approx(4 * np.pi)
    assert eigenvalue(1, 3) == 2.0
    assert eigenvalue(2, 2) == 4.0


def test_solve_config_validation():
    with pytest.raises(DomainError):
        SolveConfig(lam=1.0, l_max=-1)
    with pytest.raises(DomainError):
        SolveConfig(lam=1.0, r_start=5.0, r_end=2.0)
    with pytest.raises(DomainError):
        SolveConfig(lam=1.0, l_max=0, initial={1: (1.0, 0.0)})
    assert SolveConfig(lam=1.0, l_max=2).initial_data(2) == (1.0, 0.0)


def test_euclidean_oracle(euclid3, zero_potential, euclid_oracle_initial):
    cfg = SolveConfig(lam=1.0, r_start=1.0, r_end=50.0, initial=euclid_oracle_initial)
    mode = integrate_mode(euclid3, zero_potential, cfg, 0)
    r = mode.grid
    exact = np.sin(r) / r
    assert_allclose(mode.u, exact, atol=1e-8 * np.max(np.abs(exact)))
    assert_allclose(mode.u_prime, np.cos(r) / r - np.sin(r) / r ** 2, atol=1e-8)
    assert_allclose(mode.u_second, -mode.u - 2.0 / r * mode.u_prime, atol=1e-12)


def test_hyperbolic_liouville_closed_form(h3, zero_potential):
    # w = sinh(r) u / sinh(1) solves w'' = -(lambda - 1) w on H^3 when l = 0
    cfg = SolveConfig(lam=1.5, r_start=1.0, r_end=100.0)
    mode = integrate_mode(h3, zero_potential, cfg, 0)
    r = mode.grid
    k = np.sqrt(0.5)
    w = np.cos(k * (r - 1.0)) + (1.0 / np.tanh(1.0)) / k * np.sin(k * (r - 1.0))
    assert_allclose(mode.u * np.sinh(r) / np.sinh(1.0), w, atol=1e-7)


def test_manufactured_round_trip(h3):
    u = profile_from_expression('exp(-r)', 1.0, 100.0)
    potential = manufactured_potential(h3, u, 1.0)
    cfg = SolveConfig(lam=1.0, r_start=1.0, r_end=100.0,
                      initial={0: (np.exp(-1.0), -np.exp(-1.0))})
    mode = integrate_mode(h3, potential, cfg, 0)
    assert_allclose(mode.u, np.exp(-mode.grid), rtol=1e-6)


def test_zero_initial_data_is_rejected(h3, zero_potential):
    cfg = SolveConfig(lam=1.5, l_max=1, initial={0: (0.0, 0.0)})
    with pytest.raises(DomainError):
        integrate_mode(h3, zero_potential, cfg, 0)
    modes = solve_modes(h3, zero_potential, cfg)
    assert [mode.l for mode in modes] == [1]

    with pytest.raises(DomainError):
        solve_modes(h3, zero_potential, SolveConfig(lam=1.5, initial={0: (0.0, 0.0)}))


def test_integration_outside_metric_domain(zero_potential):
    short = metric_from_family('hyperbolic', [], 3, 1.0, 10.0)
    with pytest.raises(DomainError):
        integrate_mode(short, zero_potential, SolveConfig(lam=1.5, r_end=20.0), 0)


def test_sphere_norms_euclidean(euclid3, zero_potential, euclid_oracle_initial):
    cfg = SolveConfig(lam=1.0, r_start=1.0, r_end=50.0, initial=euclid_oracle_initial)
    modes = solve_modes(euclid3, zero_potential, cfg)
    norms = sphere_norms(euclid3, modes)
    assert_allclose(norms.M2, 4 * np.pi * np.sin(norms.grid) ** 2, atol=1e-6)
    assert list(norms.to_frame().columns) == ['r', 'M2', 'N2']


def test_sphere_norms_add_over_modes(h3_modes, h3):
    both = sphere_norms(h3, h3_modes)
    single = [sphere_norms(h3, [mode]) for mode in h3_modes]
    assert_allclose(both.M2, single[0].M2 + single[1].M2, rtol=1e-14)
    assert_allclose(both.N2, single[0].N2 + single[1].N2, rtol=1e-14)
    assert set(both.per_mode_M2) == {0, 1}


def test_sphere_norms_grid_mismatch(h3_modes, h3):
    with pytest.raises(GridMismatch):
        sphere_norms(h3, [h3_modes[0], h3_modes[1].subsample(2)])


def test_wronskian_is_constant(h3, zero_potential):
    grid = log_grid(1.0, 50.0)
    first = integrate_mode(h3, zero_potential, SolveConfig(lam=1.5, l_max=1, r_end=50.0,
                                                           initial={1: (1.0, 0.0)}), 1, grid)
    second = integrate_mode(h3, zero_potential, SolveConfig(lam=1.5, l_max=1, r_end=50.0,
                                                            initial={1: (0.0, 1.0)}), 1, grid)
    assert_allclose(wronskian(h3, first, second), np.sinh(1.0) ** 2, rtol=1e-7)


def test_transform_identity_and_shift():
    grid = log_grid(1.0, 10.0, 16)
    ones = np.ones_like(grid)
    mode = ModeSolution(0, 0.0, grid, ones, np.zeros_like(grid), np.zeros_like(grid), 1.0)

    flat = rho_weight(0.0, 0.0, 1.0, 1.0, 10.0)
    (same,) = transform_v([mode], flat, 0.0)
    assert_allclose(same.v, 1.0)
    assert_allclose(same.v_prime, 0.0)

    (linear,) = transform_v([mode], flat, 1.0)
    assert_allclose(linear.v, grid)
    assert_allclose(linear.v_prime, 1.0)
    assert_allclose(linear.v_second, 0.0, atol=1e-14)

    decaying = ModeSolution(0, 0.0, grid, np.exp(-grid), -np.exp(-grid), np.exp(-grid), 1.0)
    (constant,) = transform_v([decaying], rho_weight(2.0, 0.0, 1.0, 1.0, 10.0), 0.0)
    assert_allclose(constant.v, np.exp(-1.0))
    assert_allclose(constant.v_prime, 0.0, atol=1e-15)

    with pytest.raises(DomainError):
        transform_v([mode], flat, -1.0)


def test_residual_manufactured(h3):
    u = profile_from_expression('exp(-r)', 1.0, 100.0)
    potential = manufactured_potential(h3, u, 1.0)
    cfg = SolveConfig(lam=1.0, initial={0: (np.exp(-1.0), -np.exp(-1.0))})
    modes = solve_modes(h3, potential, cfg)
    rho = rho_weight(2.0, 0.0, 1.0, 1.0, 100.0)
    for m in (0.0, 2.0):
        modes_v = transform_v(modes, rho, m)
        assert residual_check(h3, potential, rho, modes_v, 1.0, m) <= 1e-8


def test_residual_detects_perturbed_mode(h3, h3_modes, zero_potential):
    rho = rho_weight(2.0, 0.0, 1.0, 1.0, 100.0)
    modes_v = transform_v(h3_modes, rho, 0.0)
    assert residual_check(h3, zero_potential, rho, modes_v, 1.5, 0.0) <= 1e-8

    faulty = [dataclasses.replace(modes_v[0], v=1.01 * modes_v[0].v)] + modes_v[1:]
    assert residual_check(h3, zero_potential, rho, faulty, 1.5, 0.0) > 1e-3

    with pytest.raises(DomainError):
        residual_check(h3, zero_potential, rho, modes_v, 1.5, 1.0)


def test_modes_table(h3_modes):
    table = modes_table(h3_modes)
    assert list(table.columns) == ['r', 'l', 'u', 'u_prime', 'u_second']
    assert len(table) == 2 * h3_modes[0].grid.size
    assert sorted(table['l'].unique()) == [0, 1]
