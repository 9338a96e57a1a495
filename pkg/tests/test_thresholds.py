import numpy as np
import pytest

from errors import ConstraintViolated
from thresholds import (
    THEOREMS,
    basic_constraints,
    basic_threshold,
    cor_decay_bound,
    cor_hessian_bound,
    cor_mixed_curvature_bound,
    evaluate,
    golden_section,
    goodbound_threshold,
    gradient_objective,
    gradient_threshold,
    mixed_threshold,
)


def test_basic_constraints():
    checks = basic_constraints(1.0, 0.0, 2.0)
    assert all(check.ok for check in checks.values())

    checks = basic_constraints(0.5, 0.5, 2.0)
    assert not checks['mu>delta'].ok
    assert checks['mu>delta'].margin == 0.0

    checks = basic_constraints(1.0, 0.0, 1.0)
    assert not checks['a3>1+delta'].ok


def test_basic_threshold():
    report = basic_threshold(a1=0.0, a2=0.0, a4=2.0, mu=1.0, delta=0.0, a3=3.0)
    assert report.lambda_star == pytest.approx(1.0)
    assert report.excludes(1.5)
    assert not report.excludes(1.0)

    report = basic_threshold(a1=0.0, a2=1.0, a4=0.0, mu=2.0, delta=0.0, a3=3.0)
    assert report.lambda_star == pytest.approx(0.5)
    assert report.branches['energy'] == pytest.approx(0.5)
    assert report.branches['radial'] == pytest.approx(1.0 / 6.0)
    assert report.constraints_ok

    with pytest.raises(ConstraintViolated) as exc:
        basic_threshold(a1=0.0, a2=0.0, a4=2.0, mu=0.5, delta=0.5, a3=3.0)
    assert exc.value.constraint == 'mu>delta'


def test_gradient_threshold():
    report = gradient_threshold(a1=0.0, a2=0.0, a4=2.0, mu=1.0, delta1=0.0, delta2=0.0, a3=3.0)
    assert report.lambda_star == pytest.approx(1.0)

    report = gradient_threshold(a1=0.0, a2=1.0, a4=0.0, mu=2.0, delta1=0.0, delta2=0.0, a3=2.0)
    assert report.branches['fixed_mu'] == pytest.approx(0.5)
    assert report.branches['min_s0'] == pytest.approx(0.25)
    assert report.minimizer == {'s0': 4.0}
    assert report.lambda_star == pytest.approx(0.5)

    with pytest.raises(ConstraintViolated):
        gradient_threshold(a1=0.0, a2=1.0, a4=0.0, mu=1.0, delta1=0.0, delta2=0.5, a3=1.0)

    with pytest.raises(ConstraintViolated) as exc:
        gradient_threshold(a1=0.0, a2=1.0, a4=2.0, mu=0.0, delta1=0.0, delta2=0.0, a3=2.0)
    assert exc.value.constraint == 'mu>0'


def test_gradient_golden_section_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(100):
        a2, a4, delta1 = rng.uniform(0.0, 2.0), rng.uniform(0.0, 3.0), rng.uniform(0.0, 1.0)
        delta2, a3 = rng.uniform(0.1, 2.0), rng.uniform(1.5, 5.0)
        objective = gradient_objective(a2, a4, delta1, delta2, a3)
        hi = 2.0 * a3 * (1.0 - 1e-9)
        s0, best = golden_section(objective, 2.0, hi)
        assert 2.0 <= s0 <= hi

        s = np.linspace(2.0, hi, 1_000_000)
        brute = np.min(a2 / s + a4 * delta1 / (2.0 * s) + delta2 ** 2 / ((8.0 * a3 - 4.0 * s) * s))
        assert best == pytest.approx(brute, abs=1e-8)


def test_golden_section_interior_minimum():
    x, fx = golden_section(lambda s: (s - 1.3) ** 2 + 0.5, 0.0, 4.0)
    assert x == pytest.approx(1.3, abs=1e-6)
    assert fx == pytest.approx(0.5)


def test_mixed_threshold():
    report = mixed_threshold(a1=0.0, a2=0.0, a4=2.0, mu=1.0, delta=0.0, delta1=0.0, a3=2.0)
    assert report.lambda_star == pytest.approx(1.0)

    report = mixed_threshold(a1=1.0, a2=0.0, a4=0.0, mu=2.0, delta=0.0, delta1=0.0, a3=2.0)
    assert report.lambda_star == pytest.approx(0.25)

    with pytest.raises(ConstraintViolated):
        mixed_threshold(a1=1.0, a2=0.0, a4=0.0, mu=1.0, delta=1.0, delta1=0.0, a3=3.0)


def test_decay_bound():
    assert cor_decay_bound(a4=2.0, a3=1.5).lambda_star == pytest.approx(1.0)
    with pytest.raises(ConstraintViolated):
        cor_decay_bound(a4=2.0, a3=1.0)


def test_pinched_curvature_bounds():
    assert cor_hessian_bound(2, 0.5).lambda_star == pytest.approx(1.0 / 3.0)
    assert cor_mixed_curvature_bound(2, 0.5).lambda_star == pytest.approx(2.25)
    for n in (2, 3, 5):
        assert cor_hessian_bound(n, 0.0).lambda_star == pytest.approx((n - 1) ** 2 / 4.0)
        assert cor_mixed_curvature_bound(n, 0.0).lambda_star == pytest.approx((n - 1) ** 2 / 4.0)

    with pytest.raises(ConstraintViolated) as exc:
        cor_hessian_bound(3, 0.5)
    assert exc.value.constraint == '(n-1)A<1'
    with pytest.raises(ConstraintViolated):
        cor_mixed_curvature_bound(2, 1.0)


def test_goodbound_threshold():
    report = goodbound_threshold(2, 0.5)
    assert report.branches['C3'] == pytest.approx(1.0 / 12.0)
    assert report.branches['C4'] == pytest.approx(2.0)
    assert report.minimizer == {'sigma': 1.0}
    assert report.lambda_star == pytest.approx(1.0 / 3.0)

    flat = goodbound_threshold(3, 0.0)
    assert flat.minimizer == {'sigma': 1.0}
    assert flat.lambda_star == 1.0

    instance = goodbound_threshold(4, 0.1).lambda_star
    assert instance <= min(cor_hessian_bound(4, 0.1).lambda_star,
                           cor_mixed_curvature_bound(4, 0.1).lambda_star)


def test_goodbound_dominates_corollaries():
    for n in range(2, 7):
        As = [A for A in (0.01 * k for k in range(200)) if (n - 1) * A < 1]
        previous = None
        for A in As:
            good = goodbound_threshold(n, A).lambda_star
            hessian = cor_hessian_bound(n, A).lambda_star
            mixed = cor_mixed_curvature_bound(n, A).lambda_star
            assert good <= min(hessian, mixed) * (1.0 + 1e-12)
            if previous is not None:
                assert hessian >= previous[0] and mixed >= previous[1]
            previous = (hessian, mixed)


def test_evaluate_by_name():
    report = evaluate('goodbound', {'n': 2.0, 'A': 0.5})
    assert report.theorem == 'goodbound'
    assert report.inputs['n'] == 2
    assert report.lambda_star == pytest.approx(1.0 / 3.0)

    with pytest.raises(KeyError):
        evaluate('basic', {'a1': 0.0})
    with pytest.raises(KeyError):
        evaluate('tightest', {})
    assert set(THEOREMS) == {'basic', 'gradient', 'mixed', 'cor2', 'cor3', 'cor4', 'goodbound'}


def test_report_to_dict():
    data = basic_threshold(0.0, 1.0, 0.0, 2.0, 0.0, 3.0).to_dict()
    assert data['constraints']['mu>delta'] == {'ok': True, 'margin': 2.0}
    assert data['strict'] is True
    assert data['minimizer'] is None
