"""
Closed-form eigenvalue-exclusion thresholds

Every bound excludes eigenvalues strictly above lambda_star. Each report
keeps the inputs, the per-constraint margins and the value of every branch
of a max so the binding regime is visible.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import config
from errors import ConstraintViolated

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ConstraintCheck:
    ok: bool
    margin: float


@dataclass
class ThresholdReport:
    theorem: str
    inputs: Dict[str, float]
    constraints: Dict[str, ConstraintCheck]
    lambda_star: float
    branches: Dict[str, float] = field(default_factory=dict)
    minimizer: Optional[Dict[str, float]] = None
    strict: bool = True

    @property
    def constraints_ok(self) -> bool:
        return all(check.ok for check in self.constraints.values())

    def excludes(self, lam: float) -> bool:
        """True when λ lies strictly above the bound"""
        return lam > self.lambda_star

    def to_dict(self) -> Dict:
        return {
            'theorem': self.theorem,
            'inputs': dict(self.inputs),
            'constraints': {name: {'ok': c.ok, 'margin': c.margin} for name, c in self.constraints.items()},
            'lambda_star': self.lambda_star,
            'branches': dict(self.branches),
            'minimizer': None if self.minimizer is None else dict(self.minimizer),
            'strict': self.strict,
        }


def _check(margin: float) -> ConstraintCheck:
    return ConstraintCheck(ok=margin > 0, margin=float(margin))


def _require(constraints: Dict[str, ConstraintCheck]) -> None:
    for name, check in constraints.items():
        if not check.ok:
            raise ConstraintViolated(name, check.margin)


def golden_section(objective: Callable[[float], float], lo: float, hi: float,
                   rel_tol: float = config.GOLDEN_REL_TOL) -> Tuple[float, float]:
    """
    Minimize a unimodal function on [lo, hi] by golden-section search

    Returns:
        (argmin, min value); the endpoints are compared against the interior result
    """
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = objective(c), objective(d)
    while (b - a) > rel_tol * max(abs(a), abs(b), 1.0):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = objective(d)
    x = 0.5 * (a + b)
    best = min(((objective(x), x), (objective(lo), lo), (objective(hi), hi)))
    return best[1], best[0]


def basic_constraints(mu: float, delta: float, a3: float) -> Dict[str, ConstraintCheck]:
    """μ > δ, 2a3 > μ + δ, a3 > 1 + δ with their margins"""
    return {
        'mu>delta': _check(mu - delta),
        '2a3>mu+delta': _check(2.0 * a3 - mu - delta),
        'a3>1+delta': _check(a3 - 1.0 - delta),
    }


def basic_threshold(a1: float, a2: float, a4: float, mu: float, delta: float,
                    a3: float) -> ThresholdReport:
    """
    max{a4²/4 + a2/(μ-δ) + ¼(2a1+δa4)²/(μ²-δ²), a4²/4 + a2/(2(a3-δ))}

    Raises:
        ConstraintViolated: naming the first failed inequality
    """
    constraints = basic_constraints(mu, delta, a3)
    _require(constraints)
    base = a4 * a4 / 4.0
    branches = {
        'energy': base + a2 / (mu - delta) + 0.25 * (2.0 * a1 + delta * a4) ** 2 / (mu * mu - delta * delta),
        'radial': base + a2 / (2.0 * (a3 - delta)),
    }
    return ThresholdReport(
        theorem='basic',
        inputs={'a1': a1, 'a2': a2, 'a4': a4, 'mu': mu, 'delta': delta, 'a3': a3},
        constraints=constraints,
        lambda_star=max(branches.values()),
        branches=branches,
    )


def gradient_objective(a2: float, a4: float, delta1: float, delta2: float,
                       a3: float) -> Callable[[float], float]:
    """s0 -> a2/s0 + a4δ1/(2s0) + δ2²/((8a3 - 4s0)s0)"""
    def objective(s0: float) -> float:
        return a2 / s0 + a4 * delta1 / (2.0 * s0) + delta2 * delta2 / ((8.0 * a3 - 4.0 * s0) * s0)
    return objective


def gradient_threshold(a1: float, a2: float, a4: float, mu: float, delta1: float,
                       delta2: float, a3: float) -> ThresholdReport:
    """
    Larger of the fixed-μ bound and the bound minimized over s0 in [2, 2a3)

    Raises:
        ConstraintViolated: when μ <= 0, 2a3 <= μ or a3 <= 1
    """
    constraints = {'mu>0': _check(mu), '2a3>mu': _check(2.0 * a3 - mu), 'a3>1': _check(a3 - 1.0)}
    _require(constraints)
    base = a4 * a4 / 4.0
    fixed = base + (a2 + (2.0 * a1 + delta1) ** 2 / (4.0 * mu)
                    + delta2 * delta2 / (8.0 * a3 - 4.0 * mu) + a4 * delta1 / 2.0) / mu

    if delta2 == 0:
        s0 = 2.0 * a3
        best = (a2 + a4 * delta1 / 2.0) / s0
    else:
        s0, best = golden_section(gradient_objective(a2, a4, delta1, delta2, a3),
                                  2.0, 2.0 * a3 * (1.0 - config.S0_STANDOFF))
    branches = {'fixed_mu': fixed, 'min_s0': base + best}
    return ThresholdReport(
        theorem='gradient',
        inputs={'a1': a1, 'a2': a2, 'a4': a4, 'mu': mu, 'delta1': delta1, 'delta2': delta2, 'a3': a3},
        constraints=constraints,
        lambda_star=max(branches.values()),
        branches=branches,
        minimizer={'s0': s0},
    )


def mixed_threshold(a1: float, a2: float, a4: float, mu: float, delta: float,
                    delta1: float, a3: float) -> ThresholdReport:
    """
    max{a4²/4 + a2/(μ-δ) + a4δ1/(2(μ-δ)) + a1²/(μ²-δ²), a4²/4 + (2a2 + a4δ1)/(4(a3-δ))}
    """
    constraints = basic_constraints(mu, delta, a3)
    _require(constraints)
    base = a4 * a4 / 4.0
    branches = {
        'energy': base + a2 / (mu - delta) + a4 * delta1 / (2.0 * (mu - delta))
                  + a1 * a1 / (mu * mu - delta * delta),
        'radial': base + (2.0 * a2 + a4 * delta1) / (4.0 * (a3 - delta)),
    }
    return ThresholdReport(
        theorem='mixed',
        inputs={'a1': a1, 'a2': a2, 'a4': a4, 'mu': mu, 'delta': delta, 'delta1': delta1, 'a3': a3},
        constraints=constraints,
        lambda_star=max(branches.values()),
        branches=branches,
    )


def cor_decay_bound(a4: float, a3: float) -> ThresholdReport:
    """a4²/4 when every perturbation decays faster than 1/r and a3 > 1"""
    constraints = {'a3>1': _check(a3 - 1.0)}
    _require(constraints)
    return ThresholdReport(
        theorem='cor2',
        inputs={'a4': a4, 'a3': a3},
        constraints=constraints,
        lambda_star=a4 * a4 / 4.0,
    )


def _pinching_constraints(n: int, A: float) -> Dict[str, ConstraintCheck]:
    return {'A>=0': ConstraintCheck(A >= 0, float(A)), '(n-1)A<1': _check(1.0 - (n - 1) * A)}


def _hessian_term(n: int, A: float) -> float:
    k = n - 1
    return k ** 4 * A * A / (4.0 * (1.0 - k * k * A * A))


def _mixed_curvature_term(n: int, A: float) -> float:
    k = n - 1
    return 2.0 * k * k * A / (1.0 - k * A)


def cor_hessian_bound(n: int, A: float) -> ThresholdReport:
    """(n-1)²/4 + (n-1)⁴A²/(4(1 - (n-1)²A²))"""
    constraints = _pinching_constraints(n, A)
    _require(constraints)
    return ThresholdReport(
        theorem='cor3',
        inputs={'n': n, 'A': A},
        constraints=constraints,
        lambda_star=(n - 1) ** 2 / 4.0 + _hessian_term(n, A),
    )


def cor_mixed_curvature_bound(n: int, A: float) -> ThresholdReport:
    """(n-1)²/4 + 2(n-1)²A/(1 - (n-1)A)"""
    constraints = _pinching_constraints(n, A)
    _require(constraints)
    return ThresholdReport(
        theorem='cor4',
        inputs={'n': n, 'A': A},
        constraints=constraints,
        lambda_star=(n - 1) ** 2 / 4.0 + _mixed_curvature_term(n, A),
    )


def goodbound_threshold(n: int, A: float) -> ThresholdReport:
    """
    (n-1)²/4 + min over σ in [0, 1] of σ²C3 + (1-σ)C4

    The quadratic is minimized at σ̂ = C4/(2C3) clamped to [0, 1]; σ* = 1 when C3 = 0.
    """
    constraints = _pinching_constraints(n, A)
    _require(constraints)
    C3 = _hessian_term(n, A)
    C4 = _mixed_curvature_term(n, A)
    sigma = 1.0 if C3 <= 0 else min(max(C4 / (2.0 * C3), 0.0), 1.0)
    return ThresholdReport(
        theorem='goodbound',
        inputs={'n': n, 'A': A},
        constraints=constraints,
        lambda_star=(n - 1) ** 2 / 4.0 + sigma * sigma * C3 + (1.0 - sigma) * C4,
        branches={'C3': C3, 'C4': C4},
        minimizer={'sigma': sigma},
    )


THEOREMS = {
    'basic': (basic_threshold, ('a1', 'a2', 'a4', 'mu', 'delta', 'a3')),
    'gradient': (gradient_threshold, ('a1', 'a2', 'a4', 'mu', 'delta1', 'delta2', 'a3')),
    'mixed': (mixed_threshold, ('a1', 'a2', 'a4', 'mu', 'delta', 'delta1', 'a3')),
    'cor2': (cor_decay_bound, ('a4', 'a3')),
    'cor3': (cor_hessian_bound, ('n', 'A')),
    'cor4': (cor_mixed_curvature_bound, ('n', 'A')),
    'goodbound': (goodbound_threshold, ('n', 'A')),
}


def evaluate(theorem: str, constants: Dict[str, float]) -> ThresholdReport:
    """
    Evaluate a theorem by name from a dictionary of constants

    Raises:
        KeyError: for an unknown theorem or a missing constant
        ConstraintViolated: when a constraint fails
    """
    fn, names = THEOREMS[theorem]
    missing = [name for name in names if constants.get(name) is None]
    if missing:
        raise KeyError(f"{theorem} needs {', '.join(missing)}")
    args = [int(constants[name]) if name == 'n' else float(constants[name]) for name in names]
    return fn(*args)
