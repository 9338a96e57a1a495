import pytest

from conftest import SCENARIOS
from errors import ParseError
from scenario_config import parse_config, parse_config_text

MINIMAL = """
name = "tiny"

[metric]
family = "hyperbolic"
n = 3
r_end = 40.0
tail_start = 4.0

[solve]
lambda = 1.5

[verify]
tail_start = 4.0
R0 = 5.0
"""


def _parse_error(text):
    with pytest.raises(ParseError) as exc:
        parse_config_text(text)
    return exc.value


@pytest.mark.parametrize('path', sorted(SCENARIOS.glob('*.toml')), ids=lambda p: p.stem)
def test_bundled_scenarios_parse(path):
    scenario = parse_config(path)
    assert scenario.name == path.stem


def test_hyperbolic_scenario_fields():
    scenario = parse_config(SCENARIOS / 'h3-free.toml')
    assert scenario.metric.family == 'hyperbolic'
    assert scenario.metric.n == 3
    assert scenario.solve.lam == 1.5
    assert scenario.solve.l_max == 1
    assert scenario.energy.t == 0.0
    assert scenario.s == pytest.approx(0.999)
    assert scenario.anchor == 1.0


def test_defaults_fill_missing_sections():
    scenario = parse_config_text(MINIMAL)
    assert scenario.potential.family == 'zero'
    assert scenario.energy.version == 'basic'
    assert scenario.verify.mu == 1.0
    assert scenario.declared == {}
    assert scenario.output_dir.endswith('tiny')


def test_unknown_key_names_its_path():
    error = _parse_error(MINIMAL.replace('n = 3', 'n = 3\nbogus = 1'))
    assert error.key == 'metric.bogus'


def test_duplicate_key_is_rejected():
    error = _parse_error(MINIMAL.replace('n = 3', 'n = 3\nn = 4'))
    assert 'invalid TOML' in error.reason


def test_missing_sections_and_values():
    assert _parse_error('name = "x"\n[solve]\nlambda = 1.0\n').key == 'metric'
    assert _parse_error(MINIMAL.replace('lambda = 1.5', 'l_max = 1')).key == 'solve.lambda'
    assert _parse_error(MINIMAL.replace('lambda = 1.5', 'lambda = "big"')).key == 'solve.lambda'


def test_physical_parameters_are_validated():
    assert _parse_error(MINIMAL.replace('n = 3', 'n = 1')).key == 'metric.n'
    assert _parse_error(MINIMAL.replace('tail_start = 4.0', 'tail_start = 20.0')).key == 'metric.tail_start'
    assert _parse_error(MINIMAL.replace('family = "hyperbolic"', 'family = "spherical"')).key == 'metric.family'
    assert _parse_error(MINIMAL + '\n[energy]\nt = 1.0\n').key == 'energy.t'
    assert _parse_error(MINIMAL + '\n[energy]\nversion = "goodbound"\n').key == 'energy.sigma'
    assert _parse_error(MINIMAL.replace("tail_start = 4.0\nR0", "tail_start = 10.0\nR0")).key == 'verify.tail_start'
    assert _parse_error(MINIMAL.replace("R0 = 5.0", "R0 = 50.0")).key == 'verify.R0'
    assert _parse_error(MINIMAL + '\n[solve.initial]\n"3" = [1.0, 0.0]\n').key == 'solve.initial.3'


def test_declared_delta_checked_against_mu():
    text = MINIMAL.replace("[verify]\n", "[verify]\nmu = 0.5\n") + "\n[asymptotics]\ndelta = 0.5\na3 = 3.0\n"
    error = _parse_error(text)
    assert error.key == 'verify.mu'
    assert 'mu>delta' in error.reason


def test_initial_data_table():
    scenario = parse_config(SCENARIOS / 'euclidean-oracle.toml')
    ((l, u, up),) = scenario.solve.initial
    assert l == 0
    assert u == pytest.approx(0.8414709848078965)
    assert up == pytest.approx(-0.30116867893975674)
    assert scenario.to_dict()['solve']['initial'] == {'0': [u, up]}


def test_with_overrides_records_name():
    scenario = parse_config(SCENARIOS / 'perturbed-hyperbolic-A0.05.toml')
    variant = scenario.with_overrides(lam=2.0, A=0.1)
    assert variant.name == 'perturbed-hyperbolic-A0.05@lambda=2,A=0.1'
    assert variant.solve.lam == 2.0
    assert variant.metric.A == 0.1
    assert scenario.metric.A == 0.05

    power = parse_config(SCENARIOS / 'h3-power.toml').with_overrides(c=0.3)
    assert power.potential.params == (0.3, 1.0)
    assert power.name == 'h3-power@c=0.3'

    hyperbolic = parse_config(SCENARIOS / 'h3-free.toml')
    assert hyperbolic.with_overrides(A=0.2) == hyperbolic
