"""
Rotationally symmetric metrics g = dr^2 + f(r)^2 g_S on (r0, r_max) x S^{n-1}

This module handles:
- Radial profiles (closed form, sympy expression, or ODE dense output)
- Warping functions from a prescribed radial curvature K(r)
- Mean curvature of the distance spheres, Δr = (n-1) f'/f
- Tail extraction of the asymptotic constants a3, a4, a5, δ, δ1
- Hessian comparison checks under curvature pinching
"""

from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np
import pandas as pd
import sympy as sp
from scipy.integrate import solve_ivp

import config
from errors import (
    ConjugatePoint,
    DerivativeUnavailable,
    DomainError,
    ExtractionUnstable,
    HypothesisViolated,
    StiffnessFailure,
    TailTooShort,
    UnknownFamily,
)
from logging_config import get_logger

logger = get_logger(__name__)

_DOMAIN_SLACK = 1e-12


def log_grid(r_min: float, r_max: float,
             points_per_decade: int = config.POINTS_PER_DECADE,
             refine: int = 1) -> np.ndarray:
    """
    Build a log-spaced radial grid

    The refined grid (refine > 1) contains the unrefined grid as the
    subsample grid[::refine].

    Args:
        r_min: First radius (> 0)
        r_max: Last radius
        points_per_decade: Grid density before refinement
        refine: Integer refinement factor

    Returns:
        Strictly increasing array starting at r_min and ending at r_max
    """
    if not (r_min > 0 and r_max > r_min):
        raise DomainError(f"log grid needs 0 < r_min < r_max, got [{r_min}, {r_max}]")
    if points_per_decade < 1 or refine < 1:
        raise DomainError("points_per_decade and refine must be positive")
    intervals = max(int(np.ceil(points_per_decade * np.log10(r_max / r_min))), 1)
    grid = np.geomspace(r_min, r_max, intervals * int(refine) + 1)
    grid[0], grid[-1] = r_min, r_max
    return grid


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """
    A smooth function of r on [r_min, r_max] with optional first and second
    derivatives

    Evaluation outside the domain raises DomainError. Scalars in, floats out;
    arrays in, arrays of the same shape out.
    """
    name: str
    r_min: float
    r_max: float
    value_fn: Callable
    d1_fn: Optional[Callable] = None
    d2_fn: Optional[Callable] = None
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.r_min >= 0 and self.r_max > self.r_min):
            raise DomainError(f"{self.name}: empty domain [{self.r_min}, {self.r_max}]")

    @property
    def has_derivatives(self) -> bool:
        return self.d1_fn is not None and self.d2_fn is not None

    def _checked(self, r) -> np.ndarray:
        arr = np.asarray(r, dtype=float)
        if arr.size:
            lo = self.r_min * (1.0 - _DOMAIN_SLACK)
            hi = self.r_max * (1.0 + _DOMAIN_SLACK)
            if np.isnan(arr).any() or arr.min() < lo or arr.max() > hi:
                raise DomainError(
                    f"{self.name}: r outside [{self.r_min:.12g}, {self.r_max:.12g}]"
                )
        return arr

    def _apply(self, fn: Callable, r):
        arr = self._checked(r)
        out = np.asarray(fn(arr), dtype=float)
        if out.shape != arr.shape:
            out = np.broadcast_to(out, arr.shape).copy()
        return float(out) if arr.ndim == 0 else out

    def value(self, r):
        return self._apply(self.value_fn, r)

    def d1(self, r):
        if self.d1_fn is None:
            raise DerivativeUnavailable(f"{self.name} has no first derivative")
        return self._apply(self.d1_fn, r)

    def d2(self, r):
        if self.d2_fn is None:
            raise DerivativeUnavailable(f"{self.name} has no second derivative")
        return self._apply(self.d2_fn, r)

    def __call__(self, r):
        return self.value(r)

    @classmethod
    def constant(cls, c: float, r_min: float = 0.0, r_max: float = np.inf,
                 name: Optional[str] = None) -> 'RadialProfile':
        c = float(c)
        return cls(name or f"const({c:g})", r_min, r_max,
                   lambda r: c, lambda r: 0.0, lambda r: 0.0, {'c': c})


def profile_from_expression(expression: str, r_min: float, r_max: float,
                            name: Optional[str] = None,
                            **constants: float) -> RadialProfile:
    """
    Build a profile from a sympy expression in r, with exact derivatives

    Args:
        expression: Expression string, e.g. "-1 + 2*A*sin(log(r))/r"
        r_min: Domain start
        r_max: Domain end
        name: Profile name (defaults to the expression)
        **constants: Numeric values for the other symbols in the expression

    Returns:
        RadialProfile with value, first and second derivative
    """
    r = sp.Symbol('r', positive=True)
    symbols = {'r': r}
    symbols.update({key: sp.Symbol(key) for key in constants})
    try:
        expr = sp.sympify(expression, locals=symbols)
    except (sp.SympifyError, SyntaxError, TypeError) as exc:
        raise UnknownFamily(f"cannot parse expression '{expression}': {exc}") from exc

    expr = expr.subs({symbols[key]: float(val) for key, val in constants.items()})
    unbound = sorted(str(s) for s in expr.free_symbols if s != r)
    if unbound:
        raise UnknownFamily(f"expression '{expression}' has unbound symbols {unbound}")

    first = sp.diff(expr, r)
    second = sp.diff(first, r)
    value_fn, d1_fn, d2_fn = (sp.lambdify(r, e, 'numpy') for e in (expr, first, second))
    params = {key: float(val) for key, val in constants.items()}
    return RadialProfile(name or expression, r_min, r_max, value_fn, d1_fn, d2_fn, params)


@dataclass(frozen=True, eq=False)
class WarpedMetric:
    """Warped product metric dr^2 + f(r)^2 g_S of dimension n"""
    n: int
    f: RadialProfile
    family: str = 'custom'
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.n}")
        if not self.f.has_derivatives:
            raise DerivativeUnavailable("warping function needs two derivatives")
        if not (self.f.r_min > 0 and np.isfinite(self.f.r_max)):
            raise DomainError("warping function needs a finite domain with r0 > 0")

        samples = np.geomspace(self.f.r_min, self.f.r_max, config.DOMAIN_SAMPLES)
        bad = np.flatnonzero(self.f.value(samples) <= 0)
        if bad.size:
            raise ConjugatePoint(float(samples[bad[0]]))

    @property
    def r0(self) -> float:
        return self.f.r_min

    @property
    def r_max(self) -> float:
        return self.f.r_max

    def hessian_ratio(self, r):
        """f'/f, the eigenvalue of the Hessian of r on tangent sphere directions"""
        return self.f.d1(r) / self.f.value(r)

    def delta_r(self, r):
        return (self.n - 1) * self.hessian_ratio(r)

    def delta_r_prime(self, r):
        f = self.f.value(r)
        h = self.f.d1(r) / f
        return (self.n - 1) * (self.f.d2(r) / f - h * h)

    def radial_curvature(self, r):
        return -self.f.d2(r) / self.f.value(r)

    def log_volume_density(self, r):
        """(n-1) ln f, the log of the area density of the distance sphere"""
        return (self.n - 1) * np.log(self.f.value(r))


def mean_curvature(metric: WarpedMetric) -> RadialProfile:
    """
    Mean curvature Δr = (n-1) f'/f of the distance spheres

    Args:
        metric: Warped metric

    Returns:
        Profile of Δr with its radial derivative (no second derivative)
    """
    return RadialProfile(
        name='delta_r',
        r_min=metric.r0,
        r_max=metric.r_max,
        value_fn=metric.delta_r,
        d1_fn=metric.delta_r_prime,
        params={'n': float(metric.n)},
    )


def warp_from_curvature(K: RadialProfile, n: int, f0: float, f0_prime: float,
                        grid: Sequence[float],
                        rtol: float = config.WARP_REL_TOL,
                        atol: float = config.WARP_ABS_TOL) -> WarpedMetric:
    """
    Solve f'' = -K f from (f0, f0') at grid[0] and wrap the dense output

    Args:
        K: Radial sectional curvature
        n: Dimension
        f0: f at grid[0], must be positive
        f0_prime: f' at grid[0]
        grid: Strictly increasing radii; the metric lives on [grid[0], grid[-1]]
        rtol: Relative tolerance
        atol: Absolute tolerance

    Returns:
        WarpedMetric whose f carries value, f' and f'' = -K f
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or grid[0] <= 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be a strictly increasing array of positive radii")
    if f0 <= 0:
        raise DomainError(f"f0 must be positive, got {f0}")
    K.value(grid[[0, -1]])

    def rhs(r, y):
        return np.array([y[1], -K.value(r) * y[0]])

    def hits_zero(r, y):
        return y[0]

    hits_zero.terminal = True
    hits_zero.direction = -1

    sol = solve_ivp(rhs, (grid[0], grid[-1]), [f0, f0_prime], method=config.ODE_METHOD,
                    rtol=rtol, atol=atol, dense_output=True, events=hits_zero)
    if sol.status == 1 and sol.t_events[0].size:
        raise ConjugatePoint(float(sol.t_events[0][0]))
    if not sol.success:
        raise StiffnessFailure(f"warp integration failed: {sol.message}")
    logger.debug("warp integrated with %d steps on [%g, %g]", sol.t.size, grid[0], grid[-1])

    dense = sol.sol
    profile = RadialProfile(
        name=f"warp[{K.name}]",
        r_min=float(grid[0]),
        r_max=float(grid[-1]),
        value_fn=lambda r: dense(r)[0],
        d1_fn=lambda r: dense(r)[1],
        d2_fn=lambda r: -K.value(r) * dense(r)[0],
        params={'f0': float(f0), 'f0_prime': float(f0_prime)},
    )
    return WarpedMetric(int(n), profile, family='curvature', params=dict(K.params))


def _closed_form_warp(family: str, params: Sequence[float]):
    if family == 'euclidean':
        _expect_params(family, params, 0)
        return (lambda r: r, lambda r: 1.0, lambda r: 0.0), {}
    if family == 'hyperbolic':
        _expect_params(family, params, 0)
        return (np.sinh, np.cosh, np.sinh), {}
    if family == 'power':
        _expect_params(family, params, 1)
        p = float(params[0])
        if p <= 0:
            raise UnknownFamily(f"power(p) needs p > 0, got {p}")
        return (lambda r: r ** p,
                lambda r: p * r ** (p - 1),
                lambda r: p * (p - 1) * r ** (p - 2)), {'p': p}
    if family == 'exp_power':
        _expect_params(family, params, 2)
        a, b = float(params[0]), float(params[1])

        def value(r):
            return np.exp(a * r + b * np.log(r))

        def d1(r):
            return value(r) * (a + b / r)

        def d2(r):
            return value(r) * ((a + b / r) ** 2 - b / r ** 2)

        return (value, d1, d2), {'a': a, 'b': b}
    raise UnknownFamily(f"unknown metric family '{family}'")


def _expect_params(family: str, params: Sequence[float], count: int) -> None:
    if len(params) != count:
        raise UnknownFamily(f"{family} takes {count} parameter(s), got {len(params)}")


def metric_from_family(family: str, params: Sequence[float], n: int, r0: float,
                       r_max: float, expression: Optional[str] = None,
                       A: Optional[float] = None, f0: Optional[float] = None,
                       f0_prime: Optional[float] = None) -> WarpedMetric:
    """
    Build a named metric family

    Families:
        euclidean            f = r
        hyperbolic           f = sinh r
        power(p)             f = r^p
        exp_power(a, b)      f = e^{ar} r^b
        curvature(expr, A)   f'' = -K f with K given by expr (may use A);
                             initial data defaults to f0 = sinh r0, f0' = cosh r0

    Args:
        family: Family name
        params: Family parameters
        n: Dimension
        r0: Inner radius
        r_max: Outer radius
        expression: Curvature expression for the curvature family
        A: Pinching constant for the curvature family
        f0: Initial value for the curvature family
        f0_prime: Initial slope for the curvature family

    Returns:
        WarpedMetric on [r0, r_max]
    """
    if family == 'curvature':
        if expression is None:
            raise UnknownFamily("curvature family needs an expression for K(r)")
        constants = {'A': float(A)} if A is not None else {}
        K = profile_from_expression(expression, r0, r_max, name='K', **constants)
        return warp_from_curvature(
            K, n,
            float(np.sinh(r0)) if f0 is None else float(f0),
            float(np.cosh(r0)) if f0_prime is None else float(f0_prime),
            log_grid(r0, r_max),
        )

    fns, named = _closed_form_warp(family, params)
    profile = RadialProfile(family, float(r0), float(r_max), *fns, params=named)
    return WarpedMetric(int(n), profile, family=family, params=named)


@dataclass(frozen=True)
class GeometryAsymptotics:
    a3: float
    a4: float
    a5: float
    delta: float
    delta1: float
    delta2: float
    A: float
    tail_start: float
    r_max: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def delta_bar(metric: WarpedMetric, a4: float, a5: float, r):
    """
    δ̄ = r(Δr - a4) - a5 and its radial derivative δ̄' = Δr + rΔr' - a4

    Returns:
        Tuple (delta_bar, delta_bar_prime)
    """
    r = np.asarray(r, dtype=float)
    dr = metric.delta_r(r)
    return r * (dr - a4) - a5, dr + r * metric.delta_r_prime(r) - a4


def _window_limits(metric: WarpedMetric, lo: float, hi: float,
                   a4_hint: Optional[float], points_per_decade: int):
    r = log_grid(lo, hi, points_per_decade)
    x = 1.0 / r
    dr = metric.delta_r(r)
    if a4_hint is None:
        coeffs = np.polynomial.polynomial.polyfit(x, dr, 2)
        return float(coeffs[0]), float(coeffs[1])
    coeffs = np.polynomial.polynomial.polyfit(x, r * (dr - a4_hint), 1)
    return float(a4_hint), float(coeffs[0])


def extract_asymptotics(metric: WarpedMetric, tail_start: float,
                        a4_hint: Optional[float] = None,
                        a5_hint: Optional[float] = None,
                        points_per_decade: int = config.POINTS_PER_DECADE) -> GeometryAsymptotics:
    """
    Extract a3, a4, a5, δ, δ1 (and A) from the tail [tail_start, r_max]

    a4 and a5 are extrapolated from dyadic windows [r_max/4, r_max/2] and
    [r_max/2, r_max]; the two windows must agree. Hinted constants are used
    as given.

    Args:
        metric: Warped metric
        tail_start: Start of the tail
        a4_hint: Known limit of Δr
        a5_hint: Known limit of r(Δr - a4)
        points_per_decade: Sampling density on the tail

    Returns:
        GeometryAsymptotics with delta2 = 0
    """
    r_max = metric.r_max
    if not (metric.r0 <= tail_start < r_max):
        raise DomainError(f"tail_start {tail_start} outside [{metric.r0}, {r_max})")
    if r_max < 4.0 * tail_start:
        raise TailTooShort(f"need r_max >= 4 * tail_start for two dyadic windows, got {r_max}")

    windows = [(r_max / 4.0, r_max / 2.0), (r_max / 2.0, r_max)]
    (a4_prev, a5_prev), (a4, a5) = (
        _window_limits(metric, lo, hi, a4_hint, points_per_decade) for lo, hi in windows
    )
    tol = config.WINDOW_AGREEMENT_TOL
    if a4_hint is None and abs(a4 - a4_prev) > tol * max(1.0, abs(a4)):
        raise ExtractionUnstable('a4', a4_prev, a4)
    if a5_hint is None and abs(a5 - a5_prev) > tol * max(1.0, abs(a5)):
        raise ExtractionUnstable('a5', a5_prev, a5)
    if a5_hint is not None:
        a5 = float(a5_hint)

    if abs(a4) < 1e-10:
        a4 = 0.0
    if a4 < 0:
        raise DomainError(f"extracted a4 = {a4:.6g} is negative")

    tail = log_grid(tail_start, r_max, points_per_decade)
    db, db_prime = delta_bar(metric, a4, a5, tail)
    floor = config.ROUNDING_FLOOR
    if a5_hint is None and np.ptp(db) <= floor * max(1.0, abs(a5)):
        # r(Δr - a4) is constant on the tail
        a5 = float(np.mean(db + a5))
        db, db_prime = delta_bar(metric, a4, a5, tail)
    delta = float(np.max(np.abs(db)))
    delta1 = float(np.max(np.abs(db_prime)))
    if delta <= floor * max(1.0, abs(a5)):
        delta = 0.0
    if delta1 <= floor * max(1.0, abs(a4), abs(a5)):
        delta1 = 0.0
    h = metric.hessian_ratio(tail)

    result = GeometryAsymptotics(
        a3=float(np.min(tail * h)),
        a4=float(a4),
        a5=float(a5),
        delta=delta,
        delta1=delta1,
        delta2=0.0,
        A=float(np.max(tail * np.abs(h - 1.0))),
        tail_start=float(tail_start),
        r_max=float(r_max),
    )
    logger.info("geometry asymptotics: %s", result)
    return result


@dataclass(frozen=True)
class ComparisonReport:
    passed: bool
    A: float
    slack: float
    hessian_deviation: float
    hessian_bound: float
    laplacian_deviation: float
    laplacian_bound: float

    def to_dict(self) -> Dict:
        return asdict(self)


def comparison_check(metric: WarpedMetric, A: float, tail_start: float,
                     points_per_decade: int = config.POINTS_PER_DECADE) -> ComparisonReport:
    """
    Check the Hessian and Laplacian comparison bounds under curvature pinching

    With -1 - 2A/r <= K(r) <= -1 + 2A/r on the tail, verifies
    r|f'/f - 1| <= A and r|∂Δr/∂r| <= 4(n-1)A, each up to a slack of
    0.1 * max(A, 0.01).

    Args:
        metric: Warped metric
        A: Declared pinching constant
        tail_start: Start of the checked region
        points_per_decade: Sampling density

    Returns:
        ComparisonReport
    """
    if A < 0:
        raise DomainError(f"pinching constant must be nonnegative, got {A}")
    if metric.f.d1(tail_start) < 0:
        raise HypothesisViolated("f' >= 0 at the start of the tail", tail_start)

    tail = log_grid(tail_start, metric.r_max, points_per_decade)
    K = metric.radial_curvature(tail)
    tol = config.PINCHING_TOL
    outside = (K < -1.0 - 2.0 * A / tail - tol) | (K > -1.0 + 2.0 * A / tail + tol)
    if outside.any():
        raise HypothesisViolated("curvature pinching", float(tail[np.argmax(outside)]))

    slack = config.COMPARISON_SLACK_FRACTION * max(A, 0.01)
    h = metric.hessian_ratio(tail)
    hessian_dev = float(np.max(tail * np.abs(h - 1.0)))
    laplacian_dev = float(np.max(tail * np.abs(metric.delta_r_prime(tail))))
    hessian_bound = A + slack
    laplacian_bound = 4.0 * (metric.n - 1) * A + slack

    return ComparisonReport(
        passed=hessian_dev <= hessian_bound and laplacian_dev <= laplacian_bound,
        A=float(A),
        slack=float(slack),
        hessian_deviation=hessian_dev,
        hessian_bound=float(hessian_bound),
        laplacian_deviation=laplacian_dev,
        laplacian_bound=float(laplacian_bound),
    )


def metric_table(metric: WarpedMetric, grid: Sequence[float]) -> pd.DataFrame:
    """Tabulate f, f', f'', Δr and the radial curvature on a grid"""
    r = np.asarray(grid, dtype=float)
    return pd.DataFrame({
        'r': r,
        'f': metric.f.value(r),
        'f_prime': metric.f.d1(r),
        'f_double_prime': metric.f.d2(r),
        'delta_r': metric.delta_r(r),
        'K_rad': metric.radial_curvature(r),
    })
