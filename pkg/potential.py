"""
Radial potentials V = V1 + V2

V1 is the short-range part (only r|V1| matters), V2 the long-range part
(its radial derivative enters the energy). Built-in families are sympy
expressions so every profile carries exact derivatives.
"""

from dataclasses import asdict, dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

import config
from errors import DerivativeUnavailable, DomainError, UnknownFamily, ZeroCrossing
from geometry import RadialProfile, WarpedMetric, log_grid, profile_from_expression
from logging_config import get_logger

logger = get_logger(__name__)

# name -> (expression, parameter names, default slot)
BUILTIN_FAMILIES: Dict[str, Tuple[str, Tuple[str, ...], str]] = {
    'zero': ('0', (), 'V1'),
    'power': ('c/r**p', ('c', 'p'), 'V1'),
    'oscillatory': ('c*sin(k*r)/r', ('c', 'k'), 'V1'),
    'longrange': ('c/r**p', ('c', 'p'), 'V2'),
}


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    V1: RadialProfile
    V2: RadialProfile
    family: str = 'custom'

    def __post_init__(self):
        if self.V2.d1_fn is None:
            raise DerivativeUnavailable("V2 must carry its radial derivative")

    @property
    def r_min(self) -> float:
        return max(self.V1.r_min, self.V2.r_min)

    @property
    def r_max(self) -> float:
        return min(self.V1.r_max, self.V2.r_max)

    def total(self, r):
        return self.V1.value(r) + self.V2.value(r)

    def is_zero(self, r) -> bool:
        return bool(np.all(self.V1.value(r) == 0.0) and np.all(self.V2.value(r) == 0.0))

    @classmethod
    def zero(cls, r_min: float = 0.0, r_max: float = np.inf) -> 'PotentialSpec':
        return cls(RadialProfile.constant(0.0, r_min, r_max, 'V1'),
                   RadialProfile.constant(0.0, r_min, r_max, 'V2'),
                   family='zero')


@dataclass(frozen=True)
class PotentialAsymptotics:
    a1: float
    a2: float
    v2_sup: float
    tail_start: float
    r_max: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def builtin_family(name: str, params: Sequence[float], r_min: float = 0.0,
                   r_max: float = np.inf, split: Optional[str] = None) -> PotentialSpec:
    """
    Build a named potential family

    Families:
        zero                 V = 0
        power(c, p)          V1 = c / r^p
        oscillatory(c, k)    V1 = c sin(kr) / r
        longrange(c, p)      V2 = c / r^p

    Args:
        name: Family name
        params: Family parameters in the order listed above
        r_min: Domain start
        r_max: Domain end
        split: Put the family into 'V1' or 'V2' instead of its default slot

    Returns:
        PotentialSpec
    """
    if name not in BUILTIN_FAMILIES:
        raise UnknownFamily(f"unknown potential family '{name}'")
    expression, names, slot = BUILTIN_FAMILIES[name]
    if len(params) != len(names):
        raise UnknownFamily(f"{name} takes {len(names)} parameter(s), got {len(params)}")
    slot = split or slot
    if slot not in ('V1', 'V2'):
        raise UnknownFamily(f"split must be 'V1' or 'V2', got '{slot}'")

    profile = profile_from_expression(expression, r_min, r_max, name=f"{name}",
                                      **dict(zip(names, map(float, params))))
    zero = RadialProfile.constant(0.0, r_min, r_max)
    if slot == 'V1':
        return PotentialSpec(profile, zero, family=name)
    return PotentialSpec(zero, profile, family=name)


def expression_potential(v1: str, v2: str, r_min: float = 0.0,
                         r_max: float = np.inf) -> PotentialSpec:
    """Potential from two expression strings in r"""
    return PotentialSpec(profile_from_expression(v1, r_min, r_max, name='V1'),
                         profile_from_expression(v2, r_min, r_max, name='V2'),
                         family='expression')


def extract_potential_asymptotics(potential: PotentialSpec, tail_start: float,
                                  r_max: float,
                                  points_per_decade: int = config.POINTS_PER_DECADE) -> PotentialAsymptotics:
    """
    Compute a1 = sup r|V1|, a2 = sup r|V2'| and sup|V2| on [tail_start, r_max]

    A warning is logged when sup|V2| is not small.
    """
    tail = log_grid(tail_start, r_max, points_per_decade)
    result = PotentialAsymptotics(
        a1=float(np.max(tail * np.abs(potential.V1.value(tail)))),
        a2=float(np.max(tail * np.abs(potential.V2.d1(tail)))),
        v2_sup=float(np.max(np.abs(potential.V2.value(tail)))),
        tail_start=float(tail_start),
        r_max=float(r_max),
    )
    if result.v2_sup > config.V2_SUP_WARN:
        logger.warning("sup|V2| = %.4g on the tail exceeds %.2g; V2 is not small",
                       result.v2_sup, config.V2_SUP_WARN)
    return result


def manufactured_potential(metric: WarpedMetric, u: RadialProfile, lam: float) -> PotentialSpec:
    """
    Potential for which the radial function u solves -Δu + Vu = λu

    V = λ + (u'' + Δr u') / u, stored entirely in V1.

    Args:
        metric: Warped metric
        u: Nonvanishing radial profile with two derivatives
        lam: Spectral parameter

    Returns:
        PotentialSpec with V2 = 0
    """
    if not u.has_derivatives:
        raise DerivativeUnavailable("manufactured solution needs two derivatives")
    lo, hi = max(metric.r0, u.r_min), min(metric.r_max, u.r_max)
    if not hi > lo:
        raise DomainError("manufactured solution and metric domains do not overlap")

    samples = np.geomspace(lo, hi, 4 * config.DOMAIN_SAMPLES)
    values = u.value(samples)
    scale = np.abs(values) + samples * np.abs(u.d1(samples))
    near_zero = np.abs(values) <= config.ZERO_CROSSING_REL_TOL * scale
    sign_change = np.signbit(values[:-1]) != np.signbit(values[1:])
    if near_zero.any():
        raise ZeroCrossing(float(samples[np.argmax(near_zero)]))
    if sign_change.any():
        raise ZeroCrossing(float(samples[np.argmax(sign_change)]))

    def value_fn(r):
        return lam + (u.d2(r) + metric.delta_r(r) * u.d1(r)) / u.value(r)

    V1 = RadialProfile(f"manufactured[{u.name}]", lo, hi, value_fn, params={'lambda': float(lam)})
    return PotentialSpec(V1, RadialProfile.constant(0.0, lo, hi, 'V2'), family='manufactured')
