"""
Spherical-harmonic modes of -Δ + V - λ on a warped product

Each mode u_l solves u'' + Δr u' - (ν_l/f²) u + (λ - V) u = 0 with
ν_l = l(l + n - 2). Integration runs on the Liouville amplitude
w = (f/f(r_start))^{(n-1)/2} u, which stays O(1) when the volume grows
exponentially.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.special import gamma

import config
from errors import DomainError, GridMismatch, StiffnessFailure
from geometry import RadialProfile, WarpedMetric, log_grid
from logging_config import get_logger
from potential import PotentialSpec

logger = get_logger(__name__)


def unit_sphere_area(n: int) -> float:
    """Area ω of the unit sphere S^{n-1} in R^n"""
    return float(2.0 * np.pi ** (n / 2.0) / gamma(n / 2.0))


def eigenvalue(l: int, n: int) -> float:
    """Eigenvalue ν_l = l(l + n - 2) of -Δ on S^{n-1}"""
    return float(l * (l + n - 2))


@dataclass(frozen=True)
class SolveConfig:
    lam: float
    l_max: int = 0
    r_start: float = 1.0
    r_end: float = 100.0
    abs_tol: float = config.MODE_ABS_TOL
    rel_tol: float = config.MODE_REL_TOL
    points_per_decade: int = config.POINTS_PER_DECADE
    initial: Dict[int, Tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.lam):
            raise DomainError("lambda must be finite")
        if int(self.l_max) != self.l_max or self.l_max < 0:
            raise DomainError(f"l_max must be a nonnegative integer, got {self.l_max}")
        if not (0 < self.r_start < self.r_end):
            raise DomainError(f"need 0 < r_start < r_end, got [{self.r_start}, {self.r_end}]")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise DomainError("tolerances must be positive")
        stray = [l for l in self.initial if not 0 <= l <= self.l_max]
        if stray:
            raise DomainError(f"initial data given for modes {stray} beyond l_max = {self.l_max}")

    def initial_data(self, l: int) -> Tuple[float, float]:
        """(u_l(r_start), u_l'(r_start)), defaulting to (1, 0)"""
        if not 0 <= l <= self.l_max:
            raise DomainError(f"mode l = {l} outside 0..{self.l_max}")
        u0, u0_prime = self.initial.get(l, (1.0, 0.0))
        return float(u0), float(u0_prime)

    def output_grid(self, refine: int = 1) -> np.ndarray:
        return log_grid(self.r_start, self.r_end, self.points_per_decade, refine)


@dataclass(frozen=True, eq=False)
class ModeSolution:
    """Samples of one radial mode u_l with u', and u'' recovered from the ODE"""
    l: int
    nu_l: float
    grid: np.ndarray
    u: np.ndarray
    u_prime: np.ndarray
    u_second: np.ndarray
    lam: float

    def __post_init__(self):
        sizes = {self.grid.size, self.u.size, self.u_prime.size, self.u_second.size}
        if len(sizes) != 1:
            raise DomainError("mode arrays must share the grid's length")
        if np.any((self.u == 0.0) & (self.u_prime == 0.0)):
            raise DomainError(f"mode l = {self.l} has u and u' vanishing together")

    def subsample(self, step: int) -> 'ModeSolution':
        s = slice(None, None, int(step))
        return ModeSolution(self.l, self.nu_l, self.grid[s], self.u[s],
                            self.u_prime[s], self.u_second[s], self.lam)

    def at_index(self, index: int) -> 'ModeSolution':
        s = slice(index, index + 1)
        return ModeSolution(self.l, self.nu_l, self.grid[s], self.u[s],
                            self.u_prime[s], self.u_second[s], self.lam)


def _check_domains(metric: WarpedMetric, potential: PotentialSpec,
                   r_start: float, r_end: float) -> None:
    if r_start < metric.r0 or r_end > metric.r_max:
        raise DomainError(
            f"integration range [{r_start}, {r_end}] leaves the metric domain "
            f"[{metric.r0}, {metric.r_max}]"
        )
    if r_start < potential.r_min or r_end > potential.r_max:
        raise DomainError(f"integration range [{r_start}, {r_end}] leaves the potential domain")


def integrate_mode(metric: WarpedMetric, potential: PotentialSpec, cfg: SolveConfig,
                   l: int, grid: Optional[Sequence[float]] = None) -> ModeSolution:
    """
    Integrate mode l from its initial data at r_start

    Args:
        metric: Warped metric
        potential: Potential V = V1 + V2
        cfg: Solver settings and initial data
        l: Mode index
        grid: Output radii inside [r_start, r_end] (default: cfg.output_grid())

    Returns:
        ModeSolution sampled on the grid
    """
    u0, u0_prime = cfg.initial_data(l)
    if u0 == 0.0 and u0_prime == 0.0:
        raise DomainError(f"mode l = {l} has zero initial data and is not excited")
    _check_domains(metric, potential, cfg.r_start, cfg.r_end)

    grid = cfg.output_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing")
    if grid[0] < cfg.r_start or grid[-1] > cfg.r_end:
        raise DomainError("grid leaves [r_start, r_end]")

    n = metric.n
    nu = eigenvalue(l, n)
    lam = cfg.lam
    f = metric.f

    def rhs(r, y):
        fr = f.value(r)
        h = f.d1(r) / fr
        dr = (n - 1) * h
        dr_prime = (n - 1) * (f.d2(r) / fr - h * h)
        q = lam - potential.total(r) - nu / (fr * fr) - 0.25 * dr * dr - 0.5 * dr_prime
        return np.array([y[1], -q * y[0]])

    y0 = [u0, u0_prime + 0.5 * metric.delta_r(cfg.r_start) * u0]
    sol = solve_ivp(rhs, (cfg.r_start, cfg.r_end), y0, method=config.ODE_METHOD,
                    t_eval=grid, rtol=cfg.rel_tol, atol=cfg.abs_tol)
    if not sol.success:
        raise StiffnessFailure(f"mode l = {l} failed near r = {sol.t[-1] if sol.t.size else cfg.r_start}: "
                               f"{sol.message}")
    logger.debug("mode l=%d integrated: %d rhs evaluations", l, sol.nfev)

    w, w_prime = sol.y
    dr = metric.delta_r(grid)
    f_grid = f.value(grid)
    decay = np.exp(-0.5 * (n - 1) * np.log(f_grid / f.value(cfg.r_start)))
    u = decay * w
    u_prime = decay * (w_prime - 0.5 * dr * w)
    u_second = -dr * u_prime - (lam - potential.total(grid) - nu / f_grid ** 2) * u
    return ModeSolution(l, nu, grid, u, u_prime, u_second, lam)


def solve_modes(metric: WarpedMetric, potential: PotentialSpec, cfg: SolveConfig,
                grid: Optional[Sequence[float]] = None) -> List[ModeSolution]:
    """
    Integrate every excited mode 0..l_max

    Modes with zero initial data stay identically zero and are left out.
    """
    modes = []
    for l in range(cfg.l_max + 1):
        if cfg.initial_data(l) == (0.0, 0.0):
            logger.debug("mode l=%d not excited", l)
            continue
        modes.append(integrate_mode(metric, potential, cfg, l, grid))
    if not modes:
        raise DomainError("no mode is excited")
    return modes


def _common_grid(modes: Sequence) -> np.ndarray:
    if not modes:
        raise DomainError("at least one mode is required")
    grid = modes[0].grid
    for mode in modes[1:]:
        if mode.grid.shape != grid.shape or not np.array_equal(mode.grid, grid):
            raise GridMismatch(f"mode l = {mode.l} is sampled on a different grid")
    return grid


@dataclass(frozen=True, eq=False)
class SphereNorms:
    grid: np.ndarray
    M2: np.ndarray
    N2: np.ndarray
    per_mode_M2: Dict[int, np.ndarray]
    per_mode_N2: Dict[int, np.ndarray]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'r': self.grid, 'M2': self.M2, 'N2': self.N2})


def sphere_norms(metric: WarpedMetric, modes: Sequence[ModeSolution]) -> SphereNorms:
    """
    M² = ω f^{n-1} Σ u_l² and N² = ω f^{n-1} Σ u_l'² on the common grid
    """
    grid = _common_grid(modes)
    omega = unit_sphere_area(metric.n)
    amplitude = np.exp(0.5 * metric.log_volume_density(grid))
    per_M = {mode.l: omega * (amplitude * mode.u) ** 2 for mode in modes}
    per_N = {mode.l: omega * (amplitude * mode.u_prime) ** 2 for mode in modes}
    M2 = np.sum([per_M[mode.l] for mode in modes], axis=0)
    N2 = np.sum([per_N[mode.l] for mode in modes], axis=0)
    return SphereNorms(grid, M2, N2, per_M, per_N)


@dataclass(frozen=True, eq=False)
class TransformedMode:
    """v = (r/r_ref)^m e^ρ u with its first two derivatives"""
    source: ModeSolution
    m: float
    r_ref: float
    rho: RadialProfile
    v: np.ndarray
    v_prime: np.ndarray
    v_second: np.ndarray

    @property
    def grid(self) -> np.ndarray:
        return self.source.grid

    @property
    def l(self) -> int:
        return self.source.l

    @property
    def nu_l(self) -> float:
        return self.source.nu_l


def transform_v(modes: Sequence[ModeSolution], rho: RadialProfile, m: float,
                r_ref: float = 1.0) -> List[TransformedMode]:
    """
    Apply v = (r/r_ref)^m e^{ρ(r)} u to every mode

    r_ref only rescales v by a constant; it keeps r^m finite for large m.

    Args:
        modes: Mode solutions
        rho: Weight profile with two derivatives
        m: Nonnegative exponent
        r_ref: Reference radius

    Returns:
        One TransformedMode per input mode
    """
    if m < 0:
        raise DomainError(f"m must be nonnegative, got {m}")
    if r_ref <= 0:
        raise DomainError("r_ref must be positive")
    out = []
    for mode in modes:
        r = mode.grid
        a = rho.d1(r) + m / r
        g = np.exp(m * np.log(r / r_ref) + rho.value(r))
        v = g * mode.u
        v_prime = g * (mode.u_prime + a * mode.u)
        v_second = g * (mode.u_second + 2.0 * a * mode.u_prime
                        + (a * a + rho.d2(r) - m / r ** 2) * mode.u)
        out.append(TransformedMode(mode, float(m), float(r_ref), rho, v, v_prime, v_second))
    return out


def residual_check(metric: WarpedMetric, potential: PotentialSpec, rho: RadialProfile,
                   modes_v: Sequence[TransformedMode], lam: float, m: float) -> float:
    """
    Relative residual of the transformed mode equation

    w'' + Δr w' - (ν/f²) w - (2m/r + 2ρ') w' + c w = 0 with
    c = m(m+1)/r² + (m/r)(2ρ' - Δr) - V0 - V + λ and V0 = ρ'Δr + ρ'' - ρ'².
    Each term is scaled by the sum of the magnitudes of its pieces.

    Returns:
        max over grid and modes of |residual| / scale
    """
    worst = 0.0
    for tm in modes_v:
        if tm.m != m:
            raise DomainError(f"mode was transformed with m = {tm.m}, not {m}")
        r = tm.grid
        dr = metric.delta_r(r)
        f = metric.f.value(r)
        rp, rpp = rho.d1(r), rho.d2(r)
        V = potential.total(r)
        V0 = rp * dr + rpp - rp * rp
        pieces_c = [m * (m + 1) / r ** 2, (m / r) * (2.0 * rp - dr), -V0, -V, np.full_like(r, lam)]
        c = np.sum(pieces_c, axis=0)
        drift = 2.0 * m / r + 2.0 * rp
        angular = tm.nu_l / f ** 2

        residual = tm.v_second + dr * tm.v_prime - angular * tm.v - drift * tm.v_prime + c * tm.v
        scale = (np.abs(tm.v_second) + (np.abs(dr) + np.abs(drift)) * np.abs(tm.v_prime)
                 + (angular + np.sum(np.abs(pieces_c), axis=0)) * np.abs(tm.v))
        scale = np.where(scale > 0, scale, np.finfo(float).tiny)
        worst = max(worst, float(np.max(np.abs(residual) / scale)))
    return worst


def wronskian(metric: WarpedMetric, first: ModeSolution, second: ModeSolution) -> np.ndarray:
    """f^{n-1} (u1 u2' - u2 u1'), constant along r for two solutions of one mode"""
    if not np.array_equal(first.grid, second.grid):
        raise GridMismatch("wronskian needs both solutions on one grid")
    density = np.exp(metric.log_volume_density(first.grid))
    return density * (first.u * second.u_prime - second.u * first.u_prime)


def modes_table(modes: Sequence[ModeSolution]) -> pd.DataFrame:
    """Long-form table with one row per (r, l)"""
    frames = [
        pd.DataFrame({'r': mode.grid, 'l': mode.l, 'u': mode.u,
                      'u_prime': mode.u_prime, 'u_second': mode.u_second})
        for mode in modes
    ]
    return pd.concat(frames, ignore_index=True)
