"""
Scenario configuration files

A scenario is a TOML file with the sections metric, potential, solve,
energy, verify and an optional asymptotics section of declared constants.
Unknown keys are rejected with their key path, and every physical
parameter is validated before anything is computed.
"""

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import config
from errors import ParseError
from thresholds import basic_constraints

METRIC_FAMILIES = ('euclidean', 'hyperbolic', 'power', 'exp_power', 'curvature')
POTENTIAL_FAMILIES = ('zero', 'power', 'oscillatory', 'longrange', 'expression', 'manufactured')
ENERGY_VERSIONS = ('basic', 'gradient', 'mixed', 'goodbound')
DECLARED_CONSTANTS = ('a1', 'a2', 'a3', 'a4', 'a5', 'delta', 'delta1', 'delta2', 'A')


@dataclass(frozen=True)
class MetricSection:
    family: str
    params: Tuple[float, ...] = ()
    n: int = 3
    r0: float = 1.0
    r_end: float = 100.0
    points_per_decade: int = config.POINTS_PER_DECADE
    tail_start: float = 10.0
    a4_hint: Optional[float] = None
    a5_hint: Optional[float] = None
    expression: Optional[str] = None
    A: Optional[float] = None
    f0: Optional[float] = None
    f0_prime: Optional[float] = None


@dataclass(frozen=True)
class PotentialSection:
    family: str = 'zero'
    params: Tuple[float, ...] = ()
    split: Optional[str] = None
    V1: Optional[str] = None
    V2: Optional[str] = None
    solution: Optional[str] = None


@dataclass(frozen=True)
class SolveSection:
    lam: float
    l_max: int = 0
    abs_tol: float = config.MODE_ABS_TOL
    rel_tol: float = config.MODE_REL_TOL
    initial: Tuple[Tuple[int, float, float], ...] = ()


@dataclass(frozen=True)
class EnergySection:
    version: str = 'basic'
    m: float = 0.0
    t: float = config.DEFAULT_T
    s: Optional[float] = None
    sigma: Optional[float] = None
    anchor: Optional[float] = None
    a4: Optional[float] = None
    a5: Optional[float] = None


@dataclass(frozen=True)
class VerifySection:
    mu: float = 1.0
    tail_start: float = 10.0
    growth_margin: float = config.GROWTH_MARGIN
    monotone_from: float = config.MONOTONE_FROM
    R0: float = 10.0
    decomposition_m0: Tuple[float, ...] = (1.0, 4.0, 16.0)
    identity_tol: float = config.IDENTITY_REL_TOL
    residual_tol: float = 1e-8


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    metric: MetricSection
    potential: PotentialSection
    solve: SolveSection
    energy: EnergySection = field(default_factory=EnergySection)
    verify: VerifySection = field(default_factory=VerifySection)
    asymptotics: Tuple[Tuple[str, float], ...] = ()
    output_dir: str = config.DEFAULT_OUTPUT_DIR

    @property
    def declared(self) -> Dict[str, float]:
        return dict(self.asymptotics)

    @property
    def s(self) -> float:
        """Energy exponent, defaulting to μ(1 - S_STANDOFF)"""
        if self.energy.s is not None:
            return self.energy.s
        return self.verify.mu * (1.0 - config.S_STANDOFF)

    @property
    def anchor(self) -> float:
        return self.energy.anchor if self.energy.anchor is not None else self.metric.r0

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['asymptotics'] = self.declared
        data['solve']['initial'] = {str(l): [u, up] for l, u, up in self.solve.initial}
        return data

    def with_overrides(self, lam: Optional[float] = None, A: Optional[float] = None,
                       c: Optional[float] = None) -> 'ScenarioConfig':
        """
        Variant of this scenario for a sweep

        Args:
            lam: Spectral parameter
            A: Pinching constant (curvature family only)
            c: Coupling constant, the first potential parameter

        Returns:
            New ScenarioConfig whose name records the overrides
        """
        scenario = self
        tags = []
        if lam is not None:
            scenario = replace(scenario, solve=replace(scenario.solve, lam=float(lam)))
            tags.append(f"lambda={lam:g}")
        if A is not None and scenario.metric.family == 'curvature':
            scenario = replace(scenario, metric=replace(scenario.metric, A=float(A)))
            tags.append(f"A={A:g}")
        if c is not None and scenario.potential.params:
            params = (float(c),) + tuple(scenario.potential.params[1:])
            scenario = replace(scenario, potential=replace(scenario.potential, params=params))
            tags.append(f"c={c:g}")
        if tags:
            scenario = replace(scenario, name=f"{self.name}@{','.join(tags)}")
        return scenario


def _reject_unknown(table: Dict[str, Any], allowed, prefix: str) -> None:
    for key in table:
        if key not in allowed:
            raise ParseError(f"{prefix}{key}", "unknown key")


def _number(table: Dict[str, Any], key: str, path: str, default=None, required: bool = False):
    if key not in table:
        if required:
            raise ParseError(path, "missing required key")
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(path, f"expected a number, got {value!r}")
    return float(value)


def _integer(table: Dict[str, Any], key: str, path: str, default: int) -> int:
    if key not in table:
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(path, f"expected an integer, got {value!r}")
    return value


def _string(table: Dict[str, Any], key: str, path: str, default=None, required: bool = False):
    if key not in table:
        if required:
            raise ParseError(path, "missing required key")
        return default
    value = table[key]
    if not isinstance(value, str):
        raise ParseError(path, f"expected a string, got {value!r}")
    return value


def _numbers(table: Dict[str, Any], key: str, path: str) -> Tuple[float, ...]:
    value = table.get(key, [])
    if not isinstance(value, list):
        raise ParseError(path, "expected a list of numbers")
    for item in value:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ParseError(path, f"expected a list of numbers, got {item!r}")
    return tuple(float(item) for item in value)


def _section(data: Dict[str, Any], name: str, required: bool = False) -> Dict[str, Any]:
    if name not in data:
        if required:
            raise ParseError(name, "missing required section")
        return {}
    table = data[name]
    if not isinstance(table, dict):
        raise ParseError(name, "expected a table")
    return table


def _parse_metric(table: Dict[str, Any]) -> MetricSection:
    keys = ('family', 'params', 'n', 'r0', 'r_end', 'points_per_decade', 'tail_start',
            'a4_hint', 'a5_hint', 'expression', 'A', 'f0', 'f0_prime')
    _reject_unknown(table, keys, 'metric.')
    family = _string(table, 'family', 'metric.family', required=True)
    if family not in METRIC_FAMILIES:
        raise ParseError('metric.family', f"unknown family '{family}'")

    section = MetricSection(
        family=family,
        params=_numbers(table, 'params', 'metric.params'),
        n=_integer(table, 'n', 'metric.n', 3),
        r0=_number(table, 'r0', 'metric.r0', 1.0),
        r_end=_number(table, 'r_end', 'metric.r_end', 100.0),
        points_per_decade=_integer(table, 'points_per_decade', 'metric.points_per_decade',
                                   config.POINTS_PER_DECADE),
        tail_start=_number(table, 'tail_start', 'metric.tail_start', 10.0),
        a4_hint=_number(table, 'a4_hint', 'metric.a4_hint'),
        a5_hint=_number(table, 'a5_hint', 'metric.a5_hint'),
        expression=_string(table, 'expression', 'metric.expression'),
        A=_number(table, 'A', 'metric.A'),
        f0=_number(table, 'f0', 'metric.f0'),
        f0_prime=_number(table, 'f0_prime', 'metric.f0_prime'),
    )
    if section.n < 2:
        raise ParseError('metric.n', "dimension must be at least 2")
    if section.r0 <= 0:
        raise ParseError('metric.r0', "inner radius must be positive")
    if section.r_end <= section.r0:
        raise ParseError('metric.r_end', "must exceed r0")
    if section.points_per_decade < 5:
        raise ParseError('metric.points_per_decade', "need at least 5 points per decade")
    if not section.r0 <= section.tail_start <= section.r_end / 4.0:
        raise ParseError('metric.tail_start', "must lie in [r0, r_end/4] for two dyadic windows")
    if family == 'curvature' and section.expression is None:
        raise ParseError('metric.expression', "curvature family needs an expression for K(r)")
    if section.A is not None and section.A < 0:
        raise ParseError('metric.A', "pinching constant must be nonnegative")
    if section.f0 is not None and section.f0 <= 0:
        raise ParseError('metric.f0', "initial warping value must be positive")
    return section


def _parse_potential(table: Dict[str, Any]) -> PotentialSection:
    _reject_unknown(table, ('family', 'params', 'split', 'V1', 'V2', 'solution'), 'potential.')
    family = _string(table, 'family', 'potential.family', default='zero')
    if family not in POTENTIAL_FAMILIES:
        raise ParseError('potential.family', f"unknown family '{family}'")
    section = PotentialSection(
        family=family,
        params=_numbers(table, 'params', 'potential.params'),
        split=_string(table, 'split', 'potential.split'),
        V1=_string(table, 'V1', 'potential.V1'),
        V2=_string(table, 'V2', 'potential.V2'),
        solution=_string(table, 'solution', 'potential.solution'),
    )
    if section.split not in (None, 'V1', 'V2'):
        raise ParseError('potential.split', "must be 'V1' or 'V2'")
    if family == 'manufactured' and section.solution is None:
        raise ParseError('potential.solution', "manufactured potential needs a solution expression")
    return section


def _parse_initial(value: Any) -> Tuple[Tuple[int, float, float], ...]:
    if not isinstance(value, dict):
        raise ParseError('solve.initial', "expected a table of l = [u, u']")
    out = []
    for key, pair in value.items():
        path = f"solve.initial.{key}"
        try:
            l = int(key)
        except ValueError:
            raise ParseError(path, "mode index must be an integer") from None
        if (not isinstance(pair, list) or len(pair) != 2
                or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in pair)):
            raise ParseError(path, "expected [u, u']")
        out.append((l, float(pair[0]), float(pair[1])))
    return tuple(sorted(out))


def _parse_solve(table: Dict[str, Any]) -> SolveSection:
    _reject_unknown(table, ('lambda', 'l_max', 'abs_tol', 'rel_tol', 'initial'), 'solve.')
    section = SolveSection(
        lam=_number(table, 'lambda', 'solve.lambda', required=True),
        l_max=_integer(table, 'l_max', 'solve.l_max', 0),
        abs_tol=_number(table, 'abs_tol', 'solve.abs_tol', config.MODE_ABS_TOL),
        rel_tol=_number(table, 'rel_tol', 'solve.rel_tol', config.MODE_REL_TOL),
        initial=_parse_initial(table.get('initial', {})),
    )
    if section.l_max < 0:
        raise ParseError('solve.l_max', "must be nonnegative")
    if section.abs_tol <= 0:
        raise ParseError('solve.abs_tol', "must be positive")
    if section.rel_tol <= 0:
        raise ParseError('solve.rel_tol', "must be positive")
    for l, _, _ in section.initial:
        if not 0 <= l <= section.l_max:
            raise ParseError(f"solve.initial.{l}", f"mode outside 0..{section.l_max}")
    return section


def _parse_energy(table: Dict[str, Any]) -> EnergySection:
    _reject_unknown(table, ('version', 'm', 't', 's', 'sigma', 'anchor', 'a4', 'a5'), 'energy.')
    section = EnergySection(
        version=_string(table, 'version', 'energy.version', default='basic'),
        m=_number(table, 'm', 'energy.m', 0.0),
        t=_number(table, 't', 'energy.t', config.DEFAULT_T),
        s=_number(table, 's', 'energy.s'),
        sigma=_number(table, 'sigma', 'energy.sigma'),
        anchor=_number(table, 'anchor', 'energy.anchor'),
        a4=_number(table, 'a4', 'energy.a4'),
        a5=_number(table, 'a5', 'energy.a5'),
    )
    if section.version not in ENERGY_VERSIONS:
        raise ParseError('energy.version', f"unknown version '{section.version}'")
    if section.m < 0:
        raise ParseError('energy.m', "must be nonnegative")
    if not 0 <= section.t < 1:
        raise ParseError('energy.t', "must lie in [0, 1)")
    if section.version == 'goodbound' and section.sigma is None:
        raise ParseError('energy.sigma', "goodbound version needs sigma")
    if section.sigma is not None and not 0 <= section.sigma <= 1:
        raise ParseError('energy.sigma', "must lie in [0, 1]")
    if section.anchor is not None and section.anchor <= 0:
        raise ParseError('energy.anchor', "must be a positive radius")
    return section


def _parse_verify(table: Dict[str, Any]) -> VerifySection:
    keys = ('mu', 'tail_start', 'growth_margin', 'monotone_from', 'R0', 'decomposition_m0',
            'identity_tol', 'residual_tol')
    _reject_unknown(table, keys, 'verify.')
    defaults = VerifySection()
    section = VerifySection(
        mu=_number(table, 'mu', 'verify.mu', defaults.mu),
        tail_start=_number(table, 'tail_start', 'verify.tail_start', defaults.tail_start),
        growth_margin=_number(table, 'growth_margin', 'verify.growth_margin', defaults.growth_margin),
        monotone_from=_number(table, 'monotone_from', 'verify.monotone_from', defaults.monotone_from),
        R0=_number(table, 'R0', 'verify.R0', defaults.R0),
        decomposition_m0=(_numbers(table, 'decomposition_m0', 'verify.decomposition_m0')
                          if 'decomposition_m0' in table else defaults.decomposition_m0),
        identity_tol=_number(table, 'identity_tol', 'verify.identity_tol', defaults.identity_tol),
        residual_tol=_number(table, 'residual_tol', 'verify.residual_tol', defaults.residual_tol),
    )
    if section.mu <= 0:
        raise ParseError('verify.mu', "must be positive")
    if section.growth_margin < 0:
        raise ParseError('verify.growth_margin', "must be nonnegative")
    if any(m0 < 0 for m0 in section.decomposition_m0):
        raise ParseError('verify.decomposition_m0', "entries must be nonnegative")
    return section


def _parse_asymptotics(table: Dict[str, Any]) -> Tuple[Tuple[str, float], ...]:
    _reject_unknown(table, DECLARED_CONSTANTS, 'asymptotics.')
    return tuple((key, _number(table, key, f"asymptotics.{key}")) for key in DECLARED_CONSTANTS
                 if key in table)


def _cross_validate(scenario: ScenarioConfig) -> None:
    metric, verify = scenario.metric, scenario.verify
    if not metric.r0 <= verify.tail_start or verify.tail_start * 10.0 > metric.r_end:
        raise ParseError('verify.tail_start', "growth fit needs one decade of tail inside [r0, r_end]")
    if not metric.r0 <= verify.R0 <= metric.r_end:
        raise ParseError('verify.R0', "must lie inside [r0, r_end]")
    if scenario.energy.anchor is not None and not metric.r0 <= scenario.energy.anchor <= metric.r_end:
        raise ParseError('energy.anchor', "must lie inside [r0, r_end]")

    declared = scenario.declared
    if scenario.energy.version in ('basic', 'mixed') and 'delta' in declared:
        checks = basic_constraints(verify.mu, declared['delta'], declared.get('a3', float('inf')))
        for name, check in checks.items():
            if not check.ok:
                raise ParseError('verify.mu', f"constraint {name} violated (margin {check.margin:g})")


def parse_config_text(text: str, source: str = '<string>') -> ScenarioConfig:
    """
    Parse scenario TOML text

    Raises:
        ParseError: with the key path of the first problem
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(source, f"invalid TOML: {exc}") from exc

    _reject_unknown(data, ('name', 'output_dir', 'metric', 'potential', 'solve', 'energy',
                           'verify', 'asymptotics'), '')
    name = _string(data, 'name', 'name', default=Path(source).stem)
    scenario = ScenarioConfig(
        name=name,
        metric=_parse_metric(_section(data, 'metric', required=True)),
        potential=_parse_potential(_section(data, 'potential')),
        solve=_parse_solve(_section(data, 'solve', required=True)),
        energy=_parse_energy(_section(data, 'energy')),
        verify=_parse_verify(_section(data, 'verify')),
        asymptotics=_parse_asymptotics(_section(data, 'asymptotics')),
        output_dir=_string(data, 'output_dir', 'output_dir',
                           default=str(Path(config.DEFAULT_OUTPUT_DIR) / name)),
    )
    _cross_validate(scenario)
    return scenario


def parse_config(path) -> ScenarioConfig:
    """
    Read and validate a scenario file

    Args:
        path: Path to a TOML scenario

    Returns:
        Validated ScenarioConfig
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ParseError(str(path), f"cannot read file: {exc}") from exc
    return parse_config_text(text, source=str(path))
