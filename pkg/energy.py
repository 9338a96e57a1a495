"""
Energy functional F(m, r, t, s) and its radial derivative

For transformed modes v = r^m e^ρ u the sphere integrals are

    P = ∫ v² e^{-2ρ},  K = ∫ (∂v/∂r)² e^{-2ρ},  T = ∫ |∇_ω v|² e^{-2ρ},  X = ∫ v ∂v/∂r e^{-2ρ}

and F = r^s [ (K - T)/2 + (q1/2) X + (m(m+1)/r² - t/r + q2 + λ) P / 2 ].
The derivative is evaluated exactly as a sum of seven groups and checked
against finite differences of F.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from errors import DomainError, GridTooCoarse, VersionParameterMissing
from geometry import RadialProfile, WarpedMetric, delta_bar
from logging_config import get_logger
from modes import TransformedMode, transform_v, unit_sphere_area
from potential import PotentialSpec

logger = get_logger(__name__)

GROUP_NAMES = tuple(f'group{i}' for i in range(1, 8))


class EnergyVersion(str, Enum):
    BASIC = 'basic'
    GRADIENT = 'gradient'
    MIXED = 'mixed'
    GOODBOUND = 'goodbound'


@dataclass(frozen=True)
class EnergyConfig:
    version: EnergyVersion
    m: float
    t: float
    s: float
    lam: float
    a4: float
    a5: float
    rho_anchor: float
    sigma: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'version', EnergyVersion(self.version))
        if self.m < 0:
            raise DomainError(f"m must be nonnegative, got {self.m}")
        if not 0 <= self.t < 1:
            raise DomainError(f"t must lie in [0, 1), got {self.t}")
        if self.rho_anchor <= 0:
            raise DomainError("rho anchor must be a positive radius")
        if self.version is EnergyVersion.GOODBOUND:
            if self.sigma is None:
                raise VersionParameterMissing("goodbound energy needs sigma")
            if not 0 <= self.sigma <= 1:
                raise DomainError(f"sigma must lie in [0, 1], got {self.sigma}")

    @property
    def label(self) -> str:
        if self.version is EnergyVersion.GOODBOUND:
            return f"goodbound(sigma={self.sigma:g})"
        return self.version.value

    @property
    def delta_bar_weight(self) -> float:
        """Multiplier of -a4 δ̄/(2r) in q2"""
        if self.version is EnergyVersion.BASIC:
            return 0.0
        if self.version is EnergyVersion.GOODBOUND:
            return 1.0 - self.sigma
        return 1.0


def rho_weight(a4: float, a5: float, anchor: float, r_min: float, r_max: float) -> RadialProfile:
    """
    ρ(r) = (a4/2)(r - anchor) + (a5/2) ln(r/anchor), so 2ρ' = a4 + a5/r and ρ(anchor) = 0
    """
    if not (r_min > 0 and anchor > 0):
        raise DomainError("rho needs a domain inside (0, inf) and a positive anchor")
    a4, a5, anchor = float(a4), float(a5), float(anchor)
    return RadialProfile(
        name='rho',
        r_min=r_min,
        r_max=r_max,
        value_fn=lambda r: 0.5 * a4 * (r - anchor) + 0.5 * a5 * np.log(r / anchor),
        d1_fn=lambda r: 0.5 * a4 + 0.5 * a5 / r,
        d2_fn=lambda r: -0.5 * a5 / r ** 2,
        params={'a4': a4, 'a5': a5, 'anchor': anchor},
    )


def rho_for(cfg: EnergyConfig, r_min: float, r_max: float) -> RadialProfile:
    return rho_weight(cfg.a4, cfg.a5, cfg.rho_anchor, r_min, r_max)


@dataclass(eq=False)
class EnergyCurve:
    grid: np.ndarray
    F: np.ndarray
    cfg: Optional[EnergyConfig] = None
    dF_analytic: Optional[np.ndarray] = None
    dF_fd: Optional[np.ndarray] = None
    term_groups: Optional[Dict[str, np.ndarray]] = None
    P: Optional[np.ndarray] = None
    K: Optional[np.ndarray] = None
    T: Optional[np.ndarray] = None
    X: Optional[np.ndarray] = None
    # magnitudes of the summed pieces, the rounding scale of F and dF
    F_scale: Optional[np.ndarray] = None
    dF_scale: Optional[np.ndarray] = None

    def subsample(self, step: int) -> 'EnergyCurve':
        def cut(a):
            return None if a is None else a[::step]

        groups = None if self.term_groups is None else {k: v[::step] for k, v in self.term_groups.items()}
        return EnergyCurve(self.grid[::step], self.F[::step], self.cfg, cut(self.dF_analytic),
                           cut(self.dF_fd), groups, cut(self.P), cut(self.K), cut(self.T), cut(self.X),
                           cut(self.F_scale), cut(self.dF_scale))

    def to_frame(self) -> pd.DataFrame:
        nan = np.full_like(self.grid, np.nan)

        def col(a):
            return nan if a is None else a

        data = {'r': self.grid, 'F': self.F, 'dF_analytic': col(self.dF_analytic),
                'dF_fd': col(self.dF_fd)}
        for name in GROUP_NAMES:
            data[name] = col(None if self.term_groups is None else self.term_groups[name])
        data.update({'P': col(self.P), 'K': col(self.K), 'T': col(self.T), 'X': col(self.X)})
        return pd.DataFrame(data)


@dataclass(frozen=True, eq=False)
class _Coefficients:
    r: np.ndarray
    h: np.ndarray
    dr: np.ndarray
    rho_p: np.ndarray
    rho_pp: np.ndarray
    V0: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    db: np.ndarray
    q1: np.ndarray
    q1_p: np.ndarray
    q2: np.ndarray
    q2_p: np.ndarray


def _coefficients(cfg: EnergyConfig, metric: WarpedMetric, potential: PotentialSpec,
                  rho: RadialProfile, r: np.ndarray) -> _Coefficients:
    a4, a5 = cfg.a4, cfg.a5
    h = metric.hessian_ratio(r)
    dr = metric.delta_r(r)
    dr_p = metric.delta_r_prime(r)
    rho_p, rho_pp = rho.d1(r), rho.d2(r)
    db, db_p = delta_bar(metric, a4, a5, r)
    V2, V2_p = potential.V2.value(r), potential.V2.d1(r)

    kappa = cfg.delta_bar_weight
    q2 = -0.25 * a4 * a4 - a4 * a5 / (2.0 * r) - V2 - kappa * a4 * db / (2.0 * r)
    q2_p = a4 * a5 / (2.0 * r ** 2) - V2_p - kappa * a4 * (db_p / (2.0 * r) - db / (2.0 * r ** 2))

    if cfg.version is EnergyVersion.GRADIENT:
        q1 = dr - 2.0 * rho_p
        q1_p = dr_p - 2.0 * rho_pp
    else:
        q1 = np.zeros_like(r)
        q1_p = np.zeros_like(r)

    return _Coefficients(
        r=r, h=h, dr=dr, rho_p=rho_p, rho_pp=rho_pp,
        V0=rho_p * dr + rho_pp - rho_p * rho_p,
        V1=potential.V1.value(r), V2=V2, db=db,
        q1=q1, q1_p=q1_p, q2=q2, q2_p=q2_p,
    )


def sphere_integrals(metric: WarpedMetric, modes_v: Sequence[TransformedMode]):
    """
    (P, K, T, X) on the common grid of the transformed modes

    The weight ω f^{n-1} e^{-2ρ} is formed in log space.
    """
    grid = modes_v[0].grid
    for tm in modes_v[1:]:
        if not np.array_equal(tm.grid, grid):
            raise DomainError("transformed modes must share one grid")
    rho = modes_v[0].rho
    weight = unit_sphere_area(metric.n) * np.exp(metric.log_volume_density(grid) - 2.0 * rho.value(grid))
    f2 = metric.f.value(grid) ** 2

    P = np.sum([tm.v ** 2 for tm in modes_v], axis=0) * weight
    K = np.sum([tm.v_prime ** 2 for tm in modes_v], axis=0) * weight
    T = np.sum([(tm.nu_l / f2) * tm.v ** 2 for tm in modes_v], axis=0) * weight
    X = np.sum([tm.v * tm.v_prime for tm in modes_v], axis=0) * weight
    return P, K, T, X


def _check_modes(cfg: EnergyConfig, modes_v: Sequence[TransformedMode]) -> None:
    if not modes_v:
        raise DomainError("at least one transformed mode is required")
    expected = {'a4': float(cfg.a4), 'a5': float(cfg.a5), 'anchor': float(cfg.rho_anchor)}
    for tm in modes_v:
        if tm.m != cfg.m:
            raise DomainError(f"mode l = {tm.l} was transformed with m = {tm.m}, config has m = {cfg.m}")
        if tm.rho.params != expected:
            raise DomainError(f"mode l = {tm.l} was transformed with a different rho")


def _energy_values(cfg: EnergyConfig, c: _Coefficients, P, K, T, X):
    """F and the sum of the magnitudes of its terms"""
    r, m = c.r, cfg.m
    Q = m * (m + 1) / r ** 2 - cfg.t / r + c.q2 + cfg.lam
    rs = r ** cfg.s
    F = rs * (0.5 * (K - T) + 0.5 * c.q1 * X + 0.5 * Q * P)
    scale = 0.5 * rs * (np.abs(K) + np.abs(T) + np.abs(c.q1 * X) + np.abs(Q * P))
    return F, scale


def energy_F(cfg: EnergyConfig, metric: WarpedMetric, potential: PotentialSpec,
             modes_v: Sequence[TransformedMode]) -> EnergyCurve:
    """
    Evaluate F(m, r, t, s) on the grid of the transformed modes

    Args:
        cfg: Energy configuration
        metric: Warped metric
        potential: Potential
        modes_v: Modes transformed with the same m and ρ as cfg

    Returns:
        EnergyCurve with F and the sphere integrals
    """
    _check_modes(cfg, modes_v)
    grid = modes_v[0].grid
    c = _coefficients(cfg, metric, potential, modes_v[0].rho, grid)
    P, K, T, X = sphere_integrals(metric, modes_v)
    F, scale = _energy_values(cfg, c, P, K, T, X)
    return EnergyCurve(grid, F, cfg, P=P, K=K, T=T, X=X, F_scale=scale)


def energy_dF_analytic(cfg: EnergyConfig, metric: WarpedMetric, potential: PotentialSpec,
                       modes_v: Sequence[TransformedMode]) -> EnergyCurve:
    """
    Evaluate F and its exact radial derivative as seven groups

    Nothing is truncated: V0, q1, q2, Δr and δ̄ are all evaluated pointwise.

    Returns:
        EnergyCurve with F, dF_analytic and term_groups
    """
    curve = energy_F(cfg, metric, potential, modes_v)
    c = _coefficients(cfg, metric, potential, modes_v[0].rho, curve.grid)
    r, m, s, t, lam = c.r, cfg.m, cfg.s, cfg.t, cfg.lam
    P, K, T, X = curve.P, curve.K, curve.T, curve.X
    rs = r ** s
    rs1 = rs / r
    beta = c.dr - 2.0 * c.rho_p

    groups = {
        'group1': rs * (c.h - s / (2.0 * r) + c.rho_p - 0.5 * c.dr + 0.5 * c.q1) * T,
        'group2': (2.0 * m * rs1 - 0.5 * rs * beta + 0.5 * c.q1 * rs + 0.5 * s * rs1) * K,
        'group3': (rs * (c.V0 + c.V1 + c.V2 + c.q2 - t / r) + rs1 * m * beta) * X,
        'group4': (0.5 * s * rs1 * c.q1 + m * rs1 * c.q1 + 0.5 * rs * c.q1_p) * X,
        'group5': (0.5 * (s - 2.0) * rs1 / r ** 2 * m * (m + 1)
                   - 0.5 * (s - 1.0) * t * rs1 / r
                   + 0.5 * rs * c.q2_p
                   + 0.5 * s * rs1 * c.q2
                   + lam * 0.5 * s * rs1) * P,
        'group6': 0.5 * rs * beta * (m * (m + 1) / r ** 2 - t / r + c.q2 + lam) * P,
        'group7': -0.5 * rs * c.q1 * (m * (m + 1) / r ** 2 + (m / r) * (-beta)
                                      - c.V0 - c.V1 - c.V2 + lam) * P,
    }
    dF = groups['group1']
    for name in GROUP_NAMES[1:]:
        dF = dF + groups[name]
    curve.dF_analytic = dF
    curve.dF_scale = np.sum([np.abs(g) for g in groups.values()], axis=0)
    curve.term_groups = groups
    return curve


def _five_point_weights(offsets: np.ndarray) -> np.ndarray:
    """First-derivative weights for rows of five (scaled) stencil offsets"""
    powers = np.arange(5)
    vander = offsets[:, None, :] ** powers[None, :, None]
    rhs = np.zeros((offsets.shape[0], 5, 1))
    rhs[:, 1, 0] = 1.0
    return np.linalg.solve(vander, rhs)[..., 0]


def energy_dF_fd(curve: EnergyCurve) -> np.ndarray:
    """
    Finite-difference derivative of F on the (possibly nonuniform) grid

    Fourth-order five-point stencils on the interior, three-point centered
    stencils next to the ends and one-sided second order at the ends.
    """
    r = np.asarray(curve.grid, dtype=float)
    F = np.asarray(curve.F, dtype=float)
    if r.size < 5:
        raise GridTooCoarse(f"finite differences need at least 5 grid points, got {r.size}")

    dF = np.gradient(F, r, edge_order=2)
    idx = np.arange(2, r.size - 2)
    stencil = idx[:, None] + np.arange(-2, 3)[None, :]
    h = (r[idx + 1] - r[idx - 1])[:, None] / 2.0
    weights = _five_point_weights((r[stencil] - r[idx][:, None]) / h) / h
    dF[idx] = np.sum(weights * F[stencil], axis=1)
    return dF


def identity_error(curve: EnergyCurve) -> float:
    """
    Max over interior points of |dF_analytic - dF_fd| / (local F scale + local dF scale)

    The scales are the magnitudes of the terms summed into F and dF, falling
    back to |F| and |dF| when the curve does not carry them. F can cancel to
    rounding level while its terms stay large, so |F| alone is no scale.
    Local scales are maxima over the five-point stencil around each point.
    """
    if curve.dF_analytic is None or curve.dF_fd is None:
        raise DomainError("curve needs both analytic and finite-difference derivatives")
    F_mag = np.abs(curve.F) if curve.F_scale is None else np.maximum(curve.F_scale, np.abs(curve.F))
    dF_mag = (np.abs(curve.dF_analytic) if curve.dF_scale is None
              else np.maximum(curve.dF_scale, np.abs(curve.dF_analytic)))
    F_scale = sliding_window_view(F_mag, 5).max(axis=1)
    dF_scale = sliding_window_view(dF_mag, 5).max(axis=1)
    diff = np.abs(curve.dF_analytic - curve.dF_fd)[2:-2]
    scale = F_scale + dF_scale
    scale = np.where(scale > 0, scale, np.finfo(float).tiny)
    return float(np.max(diff / scale))


def energy_curve(cfg: EnergyConfig, metric: WarpedMetric, potential: PotentialSpec,
                 modes_v: Sequence[TransformedMode]) -> EnergyCurve:
    """F, dF_analytic and dF_fd in one pass"""
    curve = energy_dF_analytic(cfg, metric, potential, modes_v)
    if curve.grid.size >= 5:
        curve.dF_fd = energy_dF_fd(curve)
    return curve


def curve_for_modes(cfg: EnergyConfig, metric: WarpedMetric, potential: PotentialSpec,
                    modes: Sequence, r_ref: float = 1.0, with_derivative: bool = True) -> EnergyCurve:
    """Transform raw mode solutions with cfg's (ρ, m) and evaluate the energy"""
    grid = modes[0].grid
    rho = rho_for(cfg, grid[0], grid[-1])
    modes_v = transform_v(modes, rho, cfg.m, r_ref)
    logger.debug("energy %s on %d points, m=%g s=%g t=%g", cfg.label, grid.size, cfg.m, cfg.s, cfg.t)
    if with_derivative:
        return energy_curve(cfg, metric, potential, modes_v)
    return energy_F(cfg, metric, potential, modes_v)


@dataclass(eq=False)
class InitialDecomposition:
    m0: float
    grid: np.ndarray
    scaled_base: np.ndarray
    bracket: np.ndarray
    remainder: np.ndarray
    direct: np.ndarray
    scale: Optional[np.ndarray] = None

    @property
    def total(self) -> np.ndarray:
        return self.scaled_base + self.bracket + self.remainder

    @property
    def max_rel_error(self) -> float:
        scale = np.abs(self.direct) if self.scale is None else np.maximum(self.scale, np.abs(self.direct))
        scale = np.maximum(scale, np.finfo(float).tiny)
        return float(np.max(np.abs(self.total - self.direct) / scale))


def initial_energy_decomposition(cfg: EnergyConfig, m0: float, metric: WarpedMetric,
                                 potential: PotentialSpec,
                                 modes_v: Sequence[TransformedMode]) -> InitialDecomposition:
    """
    Split F(m0, r, t, 0) into r^{2m0} F(0, r, 0, 0), the bracket
    (m0 r^{2m0} / (2r)) (2X + (Δr - 2ρ')P) and the remainder
    (r^{2m0}/2) [(2m0² + m0)/r² - t/r - (m0/r)(Δr - 2ρ')] P

    P and X are the m = 0 sphere integrals. For the gradient version the
    extra (q1/2)(m0/r) r^{2m0} P lands in the remainder.

    Args:
        cfg: Energy configuration with s = 0
        m0: Exponent of the witness
        metric: Warped metric
        potential: Potential
        modes_v: Transformed modes (their sources are re-transformed)

    Returns:
        InitialDecomposition with the three summands and the direct F
    """
    if cfg.s != 0:
        raise DomainError("the initial energy decomposition needs s = 0")
    if m0 < 0:
        raise DomainError(f"m0 must be nonnegative, got {m0}")
    sources = [tm.source for tm in modes_v]
    rho = modes_v[0].rho
    grid = sources[0].grid

    base_cfg = replace(cfg, m=0.0, t=0.0, s=0.0)
    base_v = transform_v(sources, rho, 0.0)
    base = energy_F(base_cfg, metric, potential, base_v)
    direct = energy_F(replace(cfg, m=float(m0)), metric, potential, transform_v(sources, rho, m0))

    c = _coefficients(cfg, metric, potential, rho, grid)
    r = grid
    beta = c.dr - 2.0 * c.rho_p
    r2m = r ** (2.0 * m0)
    bracket = m0 * r2m / (2.0 * r) * (2.0 * base.X + beta * base.P)
    remainder = 0.5 * r2m * ((2.0 * m0 * m0 + m0) / r ** 2 - cfg.t / r - (m0 / r) * beta) * base.P
    remainder = remainder + 0.5 * c.q1 * (m0 / r) * r2m * base.P

    # errors are measured against the terms summed on both sides
    scale = direct.F_scale + r2m * base.F_scale + np.abs(bracket) + np.abs(remainder)
    return InitialDecomposition(float(m0), grid, r2m * base.F, bracket, remainder, direct.F, scale)


def v0_expansion(a4: float, a5: float, metric: WarpedMetric, grid: Sequence[float]) -> pd.DataFrame:
    """
    V0 = ρ'Δr + ρ'' - ρ'² against its leading terms a4²/4 + a4a5/(2r) + a4δ̄/(2r)

    The exact remainder is (a5²/4 + a5δ̄/2 - a5/2)/r².
    """
    r = np.asarray(grid, dtype=float)
    rho = rho_weight(a4, a5, r[0], r[0], r[-1])
    rho_p, rho_pp = rho.d1(r), rho.d2(r)
    dr = metric.delta_r(r)
    db, _ = delta_bar(metric, a4, a5, r)
    V0 = rho_p * dr + rho_pp - rho_p * rho_p
    leading = 0.25 * a4 * a4 + a4 * a5 / (2.0 * r) + a4 * db / (2.0 * r)
    return pd.DataFrame({
        'r': r,
        'V0': V0,
        'leading': leading,
        'remainder': V0 - leading,
        'predicted_remainder': (0.25 * a5 * a5 + 0.5 * a5 * db - 0.5 * a5) / r ** 2,
    })


def basic_case_decomposition(cfg: EnergyConfig, metric: WarpedMetric, potential: PotentialSpec,
                             modes_v: Sequence[TransformedMode]) -> pd.DataFrame:
    """
    Leading-order cases of the basic derivative expansion and their residual

    Each case is r^{s-1} times its leading coefficient times one sphere
    integral; the residual is dF_analytic minus the sum of the cases.
    """
    if cfg.version is not EnergyVersion.BASIC:
        raise DomainError("the case decomposition is defined for the basic version")
    curve = energy_dF_analytic(cfg, metric, potential, modes_v)
    c = _coefficients(cfg, metric, potential, modes_v[0].rho, curve.grid)
    r, m, s = c.r, cfg.m, cfg.s
    rs1 = r ** (s - 1.0)
    a4 = cfg.a4

    cases = {
        'case1': rs1 * (r * c.h - 0.5 * s - 0.5 * c.db) * curve.T,
        'case2': rs1 * (2.0 * m - 0.5 * c.db + 0.5 * s) * curve.K,
        'case3': rs1 * (r * c.V1 + 0.5 * a4 * c.db - cfg.t) * curve.X,
        'case4': rs1 * ((cfg.lam - 0.25 * a4 * a4) * 0.5 * (s + c.db)
                        - 0.5 * r * potential.V2.d1(r)) * curve.P,
        'case5': rs1 * (m * (m + 1) / r ** 2) * (0.5 * (s - 2.0) + 0.5 * c.db) * curve.P,
    }
    total = cases['case1'] + cases['case2'] + cases['case3'] + cases['case4'] + cases['case5']
    frame = pd.DataFrame({'r': r, **cases})
    frame['dF_analytic'] = curve.dF_analytic
    frame['residual'] = curve.dF_analytic - total
    frame['scale'] = rs1 * (np.abs(curve.K) + np.abs(curve.T) + np.abs(curve.X) + np.abs(curve.P))
    return frame


def case_residual_by_m(cfg: EnergyConfig, metric: WarpedMetric, potential: PotentialSpec,
                       modes: Sequence, ms: Sequence[float], r_from: float) -> pd.DataFrame:
    """Max scaled residual of the basic case decomposition on [r_from, r_end] for each m"""
    rows = []
    for m in ms:
        cfg_m = replace(cfg, m=float(m))
        rho = rho_for(cfg_m, modes[0].grid[0], modes[0].grid[-1])
        frame = basic_case_decomposition(cfg_m, metric, potential, transform_v(modes, rho, m))
        tail = frame[frame['r'] >= r_from]
        ratio = (tail['residual'].abs() / tail['scale']).max()
        rows.append({'m': float(m), 'max_scaled_residual': float(ratio)})
    return pd.DataFrame(rows)


def local_basic_threshold(cfg: EnergyConfig, metric: WarpedMetric, potential: PotentialSpec,
                          grid: Sequence[float]) -> np.ndarray:
    """
    Pointwise threshold a4²/4 + ā2/(s + δ̄) + ¼(2ā1 + δ̄a4)²/(s² - δ̄²)

    ā1 = r|V1| and ā2 = r|V2'|; +inf where s <= |δ̄|.
    """
    r = np.asarray(grid, dtype=float)
    a4, s = cfg.a4, cfg.s
    db, _ = delta_bar(metric, a4, cfg.a5, r)
    a1_bar = r * np.abs(potential.V1.value(r))
    a2_bar = r * np.abs(potential.V2.d1(r))
    ok = s > np.abs(db)
    with np.errstate(divide='ignore', invalid='ignore'):
        value = (0.25 * a4 * a4 + a2_bar / (s + db)
                 + 0.25 * (2.0 * a1_bar + db * a4) ** 2 / (s * s - db * db))
    return np.where(ok, value, np.inf)


def version_configs(base: EnergyConfig) -> List[EnergyConfig]:
    """Basic, Gradient, Mixed and GoodBound σ ∈ {0, 0.5, 1} sharing base's (m, t, s, λ, ρ)"""
    configs = [replace(base, version=v, sigma=None)
               for v in (EnergyVersion.BASIC, EnergyVersion.GRADIENT, EnergyVersion.MIXED)]
    configs += [replace(base, version=EnergyVersion.GOODBOUND, sigma=sigma) for sigma in (0.0, 0.5, 1.0)]
    return configs
