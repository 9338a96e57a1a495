from pathlib import Path

import numpy as np
import pytest

import config
from energy import EnergyConfig
from geometry import metric_from_family
from modes import SolveConfig, solve_modes
from potential import PotentialSpec

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / 'scenarios'

PERTURBED_K = "-1 + 2*A*sin(log(r))/r"


def fine_modes(metric, potential, lam, l_max=1, r_end=40.0, initial=None):
    """Modes on the refined oracle grid over [1, r_end]"""
    cfg = SolveConfig(lam=lam, l_max=l_max, r_start=1.0, r_end=r_end, initial=initial or {})
    return solve_modes(metric, potential, cfg, grid=cfg.output_grid(config.FD_REFINEMENT))


def basic_config(lam, a4, a5, m=0.0, t=0.5, s=0.999):
    return EnergyConfig(version='basic', m=m, t=t, s=s, lam=lam, a4=a4, a5=a5, rho_anchor=1.0)


@pytest.fixture(scope='session')
def h3():
    return metric_from_family('hyperbolic', [], 3, 1.0, 100.0)


@pytest.fixture(scope='session')
def euclid3():
    return metric_from_family('euclidean', [], 3, 1.0, 100.0)


@pytest.fixture(scope='session')
def zero_potential():
    return PotentialSpec.zero()


@pytest.fixture(scope='session')
def h3_modes(h3, zero_potential):
    """Free modes l = 0, 1 on H^3 at lambda = 1.5, output grid on [1, 100]"""
    cfg = SolveConfig(lam=1.5, l_max=1, r_start=1.0, r_end=100.0)
    return solve_modes(h3, zero_potential, cfg)


@pytest.fixture(scope='session')
def euclid_oracle_initial():
    return {0: (np.sin(1.0), np.cos(1.0) - np.sin(1.0))}
