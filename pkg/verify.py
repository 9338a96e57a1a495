"""
Scenario verification pipeline

Builds a scenario's metric, potential and modes, then checks:
- the exact derivative identity for every energy version
- nonnegativity of dF beyond a radius (monotonicity of F)
- a finite-radius witness m0 with F(m0, R0, t, 0) > 0
- the initial-energy decomposition identity
- growth of the sphere norms on the tail
and reports the theorem hypotheses side by side with the conclusions.
"""

from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from scipy.stats import linregress

import config
from energy import (
    EnergyConfig,
    EnergyVersion,
    curve_for_modes,
    energy_dF_analytic,
    energy_F,
    identity_error,
    initial_energy_decomposition,
    rho_for,
    version_configs,
)
from errors import (
    ConstraintViolated,
    DomainError,
    KatoLabError,
    SphereNormVanishes,
    TailTooShort,
    WitnessNotFound,
)
from geometry import (
    ComparisonReport,
    GeometryAsymptotics,
    WarpedMetric,
    comparison_check,
    extract_asymptotics,
    metric_from_family,
    metric_table,
    profile_from_expression,
)
from logging_config import get_logger
from modes import (
    SolveConfig,
    SphereNorms,
    TransformedMode,
    modes_table,
    residual_check,
    solve_modes,
    sphere_norms,
    transform_v,
)
from potential import (
    PotentialAsymptotics,
    PotentialSpec,
    builtin_family,
    expression_potential,
    extract_potential_asymptotics,
    manufactured_potential,
)
from scenario_config import ScenarioConfig
from thresholds import THEOREMS, evaluate

logger = get_logger(__name__)

VERSION_THEOREM = {
    EnergyVersion.BASIC: 'basic',
    EnergyVersion.GRADIENT: 'gradient',
    EnergyVersion.MIXED: 'mixed',
    EnergyVersion.GOODBOUND: 'goodbound',
}
FREE_LAPLACIAN_THEOREMS = ('cor3', 'cor4', 'goodbound')


@dataclass
class GrowthReport:
    mu: float
    tail_start: float
    slope: float
    intercept: float
    stderr: float
    band: Tuple[float, float]
    margin: float
    min_over_tail: float
    value_at_tail_start: float

    @property
    def required_slope(self) -> float:
        return -self.mu + self.margin

    @property
    def passed(self) -> bool:
        return self.slope >= self.required_slope

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['band'] = list(self.band)
        data['required_slope'] = self.required_slope
        data['passed'] = self.passed
        return data


def check_growth(norms: SphereNorms, mu: float, tail_start: float,
                 margin: float = config.GROWTH_MARGIN) -> GrowthReport:
    """
    Fit log(M² + N²) against log r on [tail_start, r_end]

    Passes when the slope is at least -μ + margin.

    Raises:
        TailTooShort: when the tail spans less than one decade
    """
    grid = norms.grid
    if tail_start < grid[0] or grid[-1] < 10.0 * tail_start * (1.0 - 1e-12):
        raise TailTooShort(f"tail [{tail_start}, {grid[-1]}] spans less than one decade")
    mask = grid >= tail_start
    r = grid[mask]
    total = norms.M2[mask] + norms.N2[mask]
    if np.any(total <= 0):
        raise DomainError("M² + N² vanishes on the tail")

    fit = linregress(np.log(r), np.log(total))
    half = config.GROWTH_CONFIDENCE_Z * fit.stderr
    weighted = r ** mu * total
    return GrowthReport(
        mu=float(mu),
        tail_start=float(tail_start),
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        stderr=float(fit.stderr),
        band=(float(fit.slope - half), float(fit.slope + half)),
        margin=float(margin),
        min_over_tail=float(np.min(weighted)),
        value_at_tail_start=float(weighted[0]),
    )


@dataclass
class MonotonicityReport:
    config: Dict
    r_from: float
    first_positive_radius: Optional[float]
    violations: List[Tuple[float, float]]
    violation_count: int
    energy_floor: float

    @property
    def passed(self) -> bool:
        return self.violation_count == 0

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['violations'] = [list(v) for v in self.violations]
        data['passed'] = self.passed
        return data


def _cfg_echo(cfg: EnergyConfig) -> Dict:
    data = asdict(cfg)
    data['version'] = cfg.version.value
    return data


def check_monotone_F(cfg: EnergyConfig, metric: WarpedMetric, potential: PotentialSpec,
                     modes_v: Sequence[TransformedMode], r_from: float,
                     max_listed: int = 50) -> MonotonicityReport:
    """
    Scan dF_analytic for negative values on [r_from, r_end]

    A point counts as nonnegative when dF > -POSITIVE_TOL * (max over its
    five-point neighbourhood of the magnitude of the terms of F).

    Returns:
        MonotonicityReport (never raises for a failing curve)
    """
    curve = energy_dF_analytic(cfg, metric, potential, modes_v)
    r, F, dF = curve.grid, curve.F, curve.dF_analytic
    padded = np.pad(np.maximum(curve.F_scale, np.abs(F)), 2, mode='edge')
    scale = sliding_window_view(padded, 5).max(axis=1)
    ok = dF > -config.POSITIVE_TOL * scale

    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        first_positive = float(r[0])
    elif bad[-1] + 1 < r.size:
        first_positive = float(r[bad[-1] + 1])
    else:
        first_positive = None

    beyond = r >= r_from
    flagged = np.flatnonzero(beyond & ~ok)
    floor = float(np.min(F[beyond])) if beyond.any() else float('nan')
    return MonotonicityReport(
        config=_cfg_echo(cfg),
        r_from=float(r_from),
        first_positive_radius=first_positive,
        violations=[(float(r[i]), float(dF[i])) for i in flagged[:max_listed]],
        violation_count=int(flagged.size),
        energy_floor=floor,
    )


@dataclass
class PositivityWitness:
    m0: float
    R0: float
    F_scaled: float
    sphere_norm: float

    def to_dict(self) -> Dict:
        return asdict(self)


def initial_positivity(cfg: EnergyConfig, metric: WarpedMetric, potential: PotentialSpec,
                       modes_v: Sequence[TransformedMode], R0: float) -> PositivityWitness:
    """
    Double m0 from 1 until F(m0, R0, t, 0) > 0

    R0 snaps to the nearest grid radius. F is reported as F / R0^{2 m0},
    which has the same sign.

    Raises:
        SphereNormVanishes: when Σ u_l² at R0 is negligible against its maximum on [r0, R0]
        WitnessNotFound: when m0 passes WITNESS_M0_CAP
    """
    sources = [tm.source for tm in modes_v]
    rho = modes_v[0].rho
    grid = sources[0].grid
    index = int(np.argmin(np.abs(grid - R0)))
    radius = float(grid[index])

    norms = sphere_norms(metric, sources)
    level = float(norms.M2[index])
    local_scale = float(np.max(norms.M2[:index + 1]))
    if level <= config.SPHERE_NORM_FLOOR * local_scale:
        raise SphereNormVanishes(f"sphere norm {level:.3g} at R0 = {radius:g} is negligible")

    point = [mode.at_index(index) for mode in sources]
    m0 = 1
    while m0 <= config.WITNESS_M0_CAP:
        cfg_m = replace(cfg, m=float(m0), s=0.0)
        value = float(energy_F(cfg_m, metric, potential, transform_v(point, rho, m0, r_ref=radius)).F[0])
        if value > 0:
            return PositivityWitness(float(m0), radius, value, level)
        m0 *= 2
    raise WitnessNotFound(f"no m0 <= {config.WITNESS_M0_CAP} makes F positive at R0 = {radius:g}")


@dataclass
class HypothesisReport:
    theorem: str
    lam: float
    lambda_star: Optional[float]
    failed: List[str]
    reports: Dict[str, Dict] = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return not self.failed

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['satisfied'] = self.satisfied
        return data


def check_hypotheses(version: EnergyVersion, lam: float, mu: float, n: int,
                     geometry: Optional[GeometryAsymptotics],
                     potential: Optional[PotentialAsymptotics],
                     potential_is_zero: bool,
                     comparison: Optional[ComparisonReport] = None,
                     declared: Optional[Dict[str, float]] = None) -> HypothesisReport:
    """
    Evaluate every theorem side by side and name each failed assumption of
    the theorem matching the energy version

    Declared constants override the measured ones.
    """
    constants: Dict[str, float] = {'n': n, 'mu': mu}
    if geometry is not None:
        constants.update({key: getattr(geometry, key)
                          for key in ('a3', 'a4', 'delta', 'delta1', 'delta2', 'A')})
    if potential is not None:
        constants.update({'a1': potential.a1, 'a2': potential.a2})
    constants.update(declared or {})

    reports: Dict[str, Dict] = {}
    for theorem in THEOREMS:
        try:
            reports[theorem] = evaluate(theorem, constants).to_dict()
        except ConstraintViolated as exc:
            reports[theorem] = {'theorem': theorem, 'error': str(exc), 'constraint': exc.constraint}
        except KeyError as exc:
            reports[theorem] = {'theorem': theorem, 'error': str(exc.args[0])}

    theorem = VERSION_THEOREM[EnergyVersion(version)]
    selected = reports[theorem]
    failed: List[str] = []
    lambda_star = selected.get('lambda_star')
    if lambda_star is None:
        failed.append(f"{theorem}: {selected['error']}")
    elif not lam > lambda_star:
        failed.append(f"lambda>lambda_star ({lam:g} <= {lambda_star:.12g})")

    if potential is None:
        failed.append("potential asymptotics unavailable")
    elif potential.v2_sup > config.V2_SUP_WARN:
        failed.append(f"V2 small on the tail (sup|V2| = {potential.v2_sup:.4g})")
    if theorem in FREE_LAPLACIAN_THEOREMS:
        if not potential_is_zero:
            failed.append("free Laplacian (V = 0)")
        if comparison is not None and not comparison.passed:
            failed.append("Hessian comparison")

    return HypothesisReport(theorem, float(lam), lambda_star, failed, reports)


def build_metric(scenario: ScenarioConfig) -> WarpedMetric:
    section = scenario.metric
    return metric_from_family(section.family, section.params, section.n, section.r0, section.r_end,
                              expression=section.expression, A=section.A,
                              f0=section.f0, f0_prime=section.f0_prime)


def build_potential(scenario: ScenarioConfig, metric: WarpedMetric) -> PotentialSpec:
    section = scenario.potential
    if section.family == 'expression':
        return expression_potential(section.V1 or '0', section.V2 or '0')
    if section.family == 'manufactured':
        u = profile_from_expression(section.solution, metric.r0, metric.r_max, name='u')
        return manufactured_potential(metric, u, scenario.solve.lam)
    return builtin_family(section.family, section.params, split=section.split)


def build_solve_config(scenario: ScenarioConfig) -> SolveConfig:
    section = scenario.solve
    return SolveConfig(
        lam=section.lam,
        l_max=section.l_max,
        r_start=scenario.metric.r0,
        r_end=scenario.metric.r_end,
        abs_tol=section.abs_tol,
        rel_tol=section.rel_tol,
        points_per_decade=scenario.metric.points_per_decade,
        initial={l: (u, up) for l, u, up in section.initial},
    )


def build_energy_config(scenario: ScenarioConfig,
                        geometry: Optional[GeometryAsymptotics]) -> EnergyConfig:
    section = scenario.energy
    a4 = section.a4 if section.a4 is not None else (geometry.a4 if geometry else None)
    a5 = section.a5 if section.a5 is not None else (geometry.a5 if geometry else None)
    if a4 is None or a5 is None:
        raise DomainError("energy needs a4 and a5: extraction failed and none were configured")
    return EnergyConfig(
        version=EnergyVersion(section.version),
        m=section.m,
        t=section.t,
        s=scenario.s,
        lam=scenario.solve.lam,
        a4=a4,
        a5=a5,
        rho_anchor=scenario.anchor,
        sigma=section.sigma,
    )


@dataclass
class ScenarioBundle:
    summary: Dict
    tables: Dict[str, pd.DataFrame]

    @property
    def passed(self) -> bool:
        return bool(self.summary['verdict']['passed'])


def simulate_scenario(scenario: ScenarioConfig):
    """
    Integrate a scenario's modes on its output grid

    Returns:
        (metric, potential, modes, norms)
    """
    metric = build_metric(scenario)
    potential = build_potential(scenario, metric)
    modes = solve_modes(metric, potential, build_solve_config(scenario))
    return metric, potential, modes, sphere_norms(metric, modes)


def run_scenario(scenario: ScenarioConfig) -> ScenarioBundle:
    """
    Run the full verification pipeline for one scenario

    Component failures are recorded under 'errors' and fail the verdict
    instead of aborting the run.

    Returns:
        ScenarioBundle with a JSON-ready summary and CSV-ready tables
    """
    logger.info("running scenario %s", scenario.name)
    summary: Dict = {'scenario': scenario.name, 'inputs': scenario.to_dict(),
                     'settings': config.get_config_summary(), 'errors': {}}
    errors = summary['errors']
    tables: Dict[str, pd.DataFrame] = {}
    refine = config.FD_REFINEMENT

    metric = build_metric(scenario)
    potential = build_potential(scenario, metric)
    solve_cfg = build_solve_config(scenario)
    coarse_grid = solve_cfg.output_grid(refine)[::refine]
    tables['metric'] = metric_table(metric, coarse_grid)

    geometry = None
    try:
        geometry = extract_asymptotics(metric, scenario.metric.tail_start,
                                       scenario.metric.a4_hint, scenario.metric.a5_hint,
                                       scenario.metric.points_per_decade)
        summary['geometry'] = geometry.to_dict()
    except KatoLabError as exc:
        errors['geometry'] = f"{type(exc).__name__}: {exc}"

    comparison = None
    if scenario.metric.A is not None:
        try:
            comparison = comparison_check(metric, scenario.metric.A, scenario.metric.tail_start)
            summary['comparison'] = comparison.to_dict()
        except KatoLabError as exc:
            errors['comparison'] = f"{type(exc).__name__}: {exc}"

    potential_asym = extract_potential_asymptotics(potential, scenario.metric.tail_start,
                                                   scenario.metric.r_end)
    summary['potential'] = potential_asym.to_dict()
    potential_is_zero = potential.is_zero(coarse_grid)

    hypotheses = check_hypotheses(EnergyVersion(scenario.energy.version), scenario.solve.lam,
                                  scenario.verify.mu, metric.n, geometry, potential_asym,
                                  potential_is_zero, comparison, scenario.declared)
    summary['hypotheses'] = hypotheses.to_dict()

    fine_modes = solve_modes(metric, potential, solve_cfg, grid=solve_cfg.output_grid(refine))
    modes = [mode.subsample(refine) for mode in fine_modes]
    norms = sphere_norms(metric, modes)
    tables['modes'] = modes_table(modes)
    tables['norms'] = norms.to_frame()

    try:
        growth = check_growth(norms, scenario.verify.mu, scenario.verify.tail_start,
                              scenario.verify.growth_margin)
        summary['growth'] = growth.to_dict()
    except KatoLabError as exc:
        errors['growth'] = f"{type(exc).__name__}: {exc}"

    try:
        cfg = build_energy_config(scenario, geometry)
        _energy_checks(scenario, cfg, metric, potential, fine_modes, geometry, summary, tables)
    except KatoLabError as exc:
        errors['energy'] = f"{type(exc).__name__}: {exc}"

    summary['verdict'] = scenario_verdict(summary)
    reasons = summary['verdict']['reasons']
    logger.info("scenario %s verdict: %s", scenario.name, 'pass' if not reasons else reasons)
    return ScenarioBundle(summary, tables)


def scenario_verdict(summary: Dict) -> Dict:
    """
    Verdict of a scenario summary

    The derivative identity, the mode residual and the initial-energy
    decomposition must hold everywhere. Growth and monotonicity of F(0, r, 0, s)
    are asserted only when the hypotheses of the selected theorem hold.
    Any component error fails the verdict.
    """
    satisfied = bool(summary.get('hypotheses', {}).get('satisfied', False))
    reasons = []
    if not summary.get('identity', {}).get('passed', False):
        reasons.append("derivative identity")
    if not summary.get('residual', {}).get('passed', False):
        reasons.append("transformed mode residual")
    if not summary.get('decomposition', {}).get('passed', False):
        reasons.append("initial energy decomposition")
    if satisfied:
        if not summary.get('growth', {}).get('passed', False):
            reasons.append("growth under satisfied hypotheses")
        if not summary.get('monotonicity_base', {}).get('passed', False):
            reasons.append("monotonicity under satisfied hypotheses")
    if summary.get('errors'):
        reasons.append("component errors: " + ", ".join(sorted(summary['errors'])))
    return {
        'passed': not reasons,
        'hypotheses_satisfied': satisfied,
        'growth_asserted': satisfied,
        'reasons': reasons,
    }


def _energy_checks(scenario: ScenarioConfig, cfg: EnergyConfig, metric: WarpedMetric,
                   potential: PotentialSpec, fine_modes, geometry: Optional[GeometryAsymptotics],
                   summary: Dict, tables: Dict[str, pd.DataFrame]) -> None:
    refine = config.FD_REFINEMENT
    verify = scenario.verify
    errors = summary['errors']

    identity = {}
    for version_cfg in version_configs(cfg):
        curve = curve_for_modes(version_cfg, metric, potential, fine_modes)
        identity[version_cfg.label] = identity_error(curve)
        if version_cfg == cfg:
            tables['energy'] = curve.subsample(refine).to_frame()
    if 'energy' not in tables:
        tables['energy'] = curve_for_modes(cfg, metric, potential, fine_modes).subsample(refine).to_frame()
    identity_ok = all(err <= verify.identity_tol for err in identity.values())
    summary['identity'] = {'max_rel_error': identity, 'tolerance': verify.identity_tol,
                           'passed': identity_ok}

    grid = fine_modes[0].grid
    rho = rho_for(cfg, grid[0], grid[-1])
    modes_v = transform_v(fine_modes, rho, cfg.m)
    residual = residual_check(metric, potential, rho, modes_v, cfg.lam, cfg.m)
    residual_ok = residual <= verify.residual_tol
    summary['residual'] = {'max_rel_residual': residual, 'tolerance': verify.residual_tol,
                           'passed': residual_ok}

    configured = check_monotone_F(cfg, metric, potential, modes_v, verify.monotone_from)
    summary['monotonicity'] = configured.to_dict()
    base_cfg = replace(cfg, m=0.0, t=0.0)
    if base_cfg == cfg:
        summary['monotonicity_base'] = summary['monotonicity']
    else:
        base_v = transform_v(fine_modes, rho, 0.0)
        summary['monotonicity_base'] = check_monotone_F(base_cfg, metric, potential, base_v,
                                                        verify.monotone_from).to_dict()
    if geometry is not None and 2.0 * geometry.a3 - geometry.delta > 0:
        s0 = (2.0 * geometry.a3 - geometry.delta) * (1.0 - config.S_STANDOFF)
        summary['monotonicity_s0'] = check_monotone_F(replace(cfg, s=s0), metric, potential,
                                                      modes_v, verify.monotone_from).to_dict()

    try:
        summary['positivity'] = initial_positivity(cfg, metric, potential, modes_v, verify.R0).to_dict()
    except KatoLabError as exc:
        errors['positivity'] = f"{type(exc).__name__}: {exc}"

    decomposition = {}
    base = replace(cfg, s=0.0)
    for m0 in verify.decomposition_m0:
        split = initial_energy_decomposition(base, m0, metric, potential, modes_v)
        decomposition[f"{m0:g}"] = split.max_rel_error
    summary['decomposition'] = {
        'max_rel_error': decomposition,
        't': cfg.t,
        'tolerance': config.DECOMPOSITION_REL_TOL,
        'passed': all(err <= config.DECOMPOSITION_REL_TOL for err in decomposition.values()),
    }


def energy_scenario(scenario: ScenarioConfig):
    """
    Energy curve of a scenario's configured version on the refined grid

    Returns:
        (curve on the output grid, max identity error on the refined grid)
    """
    refine = config.FD_REFINEMENT
    metric = build_metric(scenario)
    potential = build_potential(scenario, metric)
    solve_cfg = build_solve_config(scenario)
    geometry = None
    if scenario.energy.a4 is None or scenario.energy.a5 is None:
        geometry = extract_asymptotics(metric, scenario.metric.tail_start,
                                       scenario.metric.a4_hint, scenario.metric.a5_hint,
                                       scenario.metric.points_per_decade)
    cfg = build_energy_config(scenario, geometry)
    fine_modes = solve_modes(metric, potential, solve_cfg, grid=solve_cfg.output_grid(refine))
    curve = curve_for_modes(cfg, metric, potential, fine_modes)
    return curve.subsample(refine), identity_error(curve)
