#!/usr/bin/env python3
"""
Energy-method lab CLI

Subcommands:
    threshold   Evaluate a closed-form eigenvalue-exclusion bound
    simulate    Integrate a scenario's modes and sphere norms
    energy      Emit a scenario's energy curve and derivative identity error
    verify      Run the full verification bundle for one scenario
    sweep       Run a scenario matrix in parallel

Exit status: 0 pass, 1 verdict fail, 2 usage or configuration error.
"""

import argparse
import json
import re
import sys
from multiprocessing import Pool
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from dotenv import load_dotenv
from tabulate import tabulate

import config
from errors import ConstraintViolated, KatoLabError
from geometry import metric_table
from modes import modes_table
from report_store import ReportStore, dumps
from scenario_config import ScenarioConfig, parse_config
from thresholds import THEOREMS, evaluate
from verify import energy_scenario, run_scenario, simulate_scenario

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

THRESHOLD_CONSTANTS = ('n', 'A', 'a1', 'a2', 'a3', 'a4', 'mu', 'delta', 'delta1', 'delta2')


def print_banner(quiet: bool = False):
    """Print application banner"""
    if quiet:
        return
    print("""
╔═══════════════════════════════════════════════════════════╗
║        WARPED-PRODUCT ENERGY METHOD LAB                   ║
║        Embedded eigenvalue thresholds & growth checks     ║
╚═══════════════════════════════════════════════════════════╝
    """)


def verdict_emoji(passed: bool) -> str:
    return "✅" if passed else "❌"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='klab',
        description='Energy-method lab for -Δ + V on rotationally symmetric manifolds',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s threshold --theorem goodbound --n 2 --A 0.5
  %(prog)s threshold --theorem basic --a1 0 --a2 1 --a4 0 --mu 2 --delta 0 --a3 3 --json
  %(prog)s simulate scenarios/h3-free.toml
  %(prog)s verify scenarios/h3-free.toml
  %(prog)s sweep scenarios --lambda 1.2 1.5 --jobs 4 -o out/sweep
        """
    )
    sub = parser.add_subparsers(dest='command', required=True)

    threshold = sub.add_parser('threshold', help='Evaluate an exclusion bound')
    threshold.add_argument('--theorem', required=True, choices=sorted(THEOREMS),
                           help='Which bound to evaluate')
    for name in THRESHOLD_CONSTANTS:
        threshold.add_argument(f'--{name}', type=int if name == 'n' else float,
                               help=f'Constant {name}')
    threshold.add_argument('--json', action='store_true', help='Print the report as JSON')

    for name, text in (('simulate', 'Integrate modes and sphere norms'),
                       ('energy', 'Energy curve with analytic and finite-difference derivatives'),
                       ('verify', 'Full verification bundle')):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument('config', help='Scenario TOML file')
        cmd.add_argument('-o', '--output-dir', help='Output directory (default: from the scenario)')
        cmd.add_argument('--json', action='store_true', help='Print the summary as JSON')

    sweep = sub.add_parser('sweep', help='Run a scenario matrix')
    sweep.add_argument('configs', nargs='+', help='Scenario files or directories of *.toml')
    sweep.add_argument('--lambda', dest='lambdas', type=float, nargs='+', help='Spectral parameters')
    sweep.add_argument('--A', dest='As', type=float, nargs='+', help='Pinching constants (curvature metrics)')
    sweep.add_argument('--c', dest='cs', type=float, nargs='+', help='Potential couplings')
    sweep.add_argument('-j', '--jobs', type=int, default=None,
                       help=f'Worker processes (default: ${config.JOBS_ENV_VAR} or {config.DEFAULT_JOBS})')
    sweep.add_argument('-o', '--output-dir', default=str(Path(config.DEFAULT_OUTPUT_DIR) / 'sweep'),
                       help='Output directory')
    sweep.add_argument('--json', action='store_true', help='Print the sweep summary as JSON')
    return parser


def cmd_threshold(args) -> int:
    constants = {name: getattr(args, name) for name in THRESHOLD_CONSTANTS}
    try:
        report = evaluate(args.theorem, constants)
    except KeyError as exc:
        print(f"❌ Error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    except ConstraintViolated as exc:
        if args.json:
            print(json.dumps({'theorem': args.theorem, 'error': str(exc),
                              'constraint': exc.constraint, 'margin': exc.margin}, indent=2))
        else:
            print(f"❌ {args.theorem}: {exc}")
        return EXIT_FAIL

    if args.json:
        print(dumps(report.to_dict()), end='')
        return EXIT_PASS

    print(f"\n📐 Theorem: {report.theorem}")
    rows = [[name, check.margin, verdict_emoji(check.ok)] for name, check in report.constraints.items()]
    print(tabulate(rows, headers=['Constraint', 'Margin', 'OK'], tablefmt=config.TABLE_FORMAT))
    if report.branches:
        print(tabulate([[k, v] for k, v in report.branches.items()], headers=['Branch', 'Value'],
                       tablefmt=config.TABLE_FORMAT, floatfmt='.12g'))
    print(f"\nlambda_star = {report.lambda_star:.12g}  (eigenvalues λ > lambda_star are excluded)")
    if report.minimizer:
        for key, value in report.minimizer.items():
            symbol = 'σ*' if key == 'sigma' else f"{key}*"
            print(f"{symbol} = {value:.12g}")
    return EXIT_PASS


def _store_for(scenario: ScenarioConfig, output_dir: Optional[str]) -> ReportStore:
    return ReportStore(output_dir or scenario.output_dir)


def cmd_simulate(args) -> int:
    scenario = parse_config(args.config)
    print_banner(args.json)
    metric, potential, modes, norms = simulate_scenario(scenario)
    store = _store_for(scenario, args.output_dir)
    store.save_table('metric', metric_table(metric, norms.grid))
    store.save_table('modes', modes_table(modes))
    store.save_table('norms', norms.to_frame())
    summary = {'scenario': scenario.name, 'modes': [mode.l for mode in modes],
               'points': int(norms.grid.size), 'inputs': scenario.to_dict()}
    store.save_summary('simulate', summary)

    if args.json:
        print(dumps(summary), end='')
    else:
        step = max(norms.grid.size // 8, 1)
        frame = norms.to_frame().iloc[::step]
        print(tabulate(frame.values.tolist(), headers=['r', 'M²', 'N²'],
                       tablefmt=config.TABLE_FORMAT, floatfmt='.6g'))
        print(f"\n💾 Saved {len(modes)} mode(s) to {store.output_dir}")
    return EXIT_PASS


def cmd_energy(args) -> int:
    scenario = parse_config(args.config)
    print_banner(args.json)
    curve, error = energy_scenario(scenario)
    store = _store_for(scenario, args.output_dir)
    store.save_table('energy', curve.to_frame())
    passed = error <= scenario.verify.identity_tol
    summary = {'scenario': scenario.name, 'version': curve.cfg.label,
               'identity_max_rel_error': error, 'tolerance': scenario.verify.identity_tol,
               'passed': passed}
    store.save_summary('energy', summary)

    if args.json:
        print(dumps(summary), end='')
    else:
        print(f"{verdict_emoji(passed)} {curve.cfg.label}: max identity error {error:.3e} "
              f"(tolerance {scenario.verify.identity_tol:g})")
        print(f"💾 Saved energy curve to {store.output_dir}")
    return EXIT_PASS if passed else EXIT_FAIL


def print_bundle(summary: Dict):
    verdict = summary['verdict']
    hyp = summary['hypotheses']
    rows = [
        ['Hypotheses', verdict_emoji(hyp['satisfied']),
         f"{hyp['theorem']}: lambda_star = {hyp['lambda_star']}" if hyp['lambda_star'] is not None
         else '; '.join(hyp['failed'])],
    ]
    if 'identity' in summary:
        worst = max(summary['identity']['max_rel_error'].values())
        rows.append(['Derivative identity', verdict_emoji(summary['identity']['passed']), f"{worst:.3e}"])
    if 'residual' in summary:
        rows.append(['Mode residual', verdict_emoji(summary['residual']['passed']),
                     f"{summary['residual']['max_rel_residual']:.3e}"])
    if 'monotonicity' in summary:
        mono = summary['monotonicity']
        rows.append(['Monotonicity', verdict_emoji(mono['passed']),
                     f"{mono['violation_count']} violation(s) beyond r = {mono['r_from']:g}"])
    if 'positivity' in summary:
        rows.append(['Initial positivity', '✅', f"m0 = {summary['positivity']['m0']:g}"])
    if 'growth' in summary:
        growth = summary['growth']
        asserted = '' if verdict['growth_asserted'] else ' (not asserted)'
        rows.append(['Growth', verdict_emoji(growth['passed']),
                     f"slope {growth['slope']:.4f} vs {growth['required_slope']:.4f}{asserted}"])
    for key, message in summary['errors'].items():
        rows.append([key, '⚠️', message])
    print(f"\n🔬 Scenario: {summary['scenario']}")
    print(tabulate(rows, headers=['Check', 'OK', 'Detail'], tablefmt=config.TABLE_FORMAT))
    print(f"\n{verdict_emoji(verdict['passed'])} Verdict: {'PASS' if verdict['passed'] else 'FAIL'}")
    for reason in verdict['reasons']:
        print(f"   - {reason}")


def cmd_verify(args) -> int:
    scenario = parse_config(args.config)
    print_banner(args.json)
    bundle = run_scenario(scenario)
    store = _store_for(scenario, args.output_dir)
    store.save_bundle(bundle.summary, bundle.tables)
    if args.json:
        print(dumps(bundle.summary), end='')
    else:
        print_bundle(bundle.summary)
        print(f"💾 Saved bundle to {store.output_dir}")
    return EXIT_PASS if bundle.passed else EXIT_FAIL


def collect_configs(paths: Sequence[str]) -> List[Path]:
    """Expand directories into their *.toml files, sorted"""
    files = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            files.extend(sorted(path.glob('*.toml')))
        else:
            files.append(path)
    return files


def expand_matrix(base: Sequence[ScenarioConfig], lambdas=None, As=None, cs=None) -> List[ScenarioConfig]:
    """Cartesian product of each base scenario with the override lists"""
    out = []
    for scenario in base:
        for lam in lambdas or [None]:
            for A in As or [None]:
                for c in cs or [None]:
                    out.append(scenario.with_overrides(lam=lam, A=A, c=c))
    unique = {s.name: s for s in out}
    return [unique[name] for name in sorted(unique)]


def _safe_name(name: str) -> str:
    return re.sub(r'[^A-Za-z0-9._=-]+', '_', name)


def _run_bundle(scenario: ScenarioConfig) -> Tuple[str, Dict, Dict]:
    try:
        bundle = run_scenario(scenario)
        return scenario.name, bundle.summary, bundle.tables
    except KatoLabError as exc:
        summary = {'scenario': scenario.name, 'inputs': scenario.to_dict(),
                   'errors': {'scenario': f"{type(exc).__name__}: {exc}"},
                   'verdict': {'passed': False, 'reasons': ['scenario error']}}
        return scenario.name, summary, {}


def cmd_sweep(args) -> int:
    base = [parse_config(path) for path in collect_configs(args.configs)]
    if not base:
        print("❌ Error: no scenario files found", file=sys.stderr)
        return EXIT_USAGE
    scenarios = expand_matrix(base, args.lambdas, args.As, args.cs)
    jobs = args.jobs if args.jobs is not None else config.get_default_jobs()
    if jobs < 1:
        print("❌ Error: --jobs must be positive", file=sys.stderr)
        return EXIT_USAGE

    print_banner(args.json)
    if not args.json:
        print(f"Running {len(scenarios)} scenario(s) with {jobs} worker(s)...")

    if jobs == 1:
        results = [_run_bundle(s) for s in scenarios]
    else:
        with Pool(processes=jobs) as pool:
            results = list(pool.imap(_run_bundle, scenarios))

    root = Path(args.output_dir)
    overview = {}
    for name, summary, tables in sorted(results, key=lambda item: item[0]):
        ReportStore(root / _safe_name(name)).save_bundle(summary, tables)
        overview[name] = {
            'passed': summary['verdict']['passed'],
            'hypotheses_satisfied': summary['verdict'].get('hypotheses_satisfied'),
            'reasons': summary['verdict']['reasons'],
        }
    sweep_summary = {'scenarios': overview, 'count': len(overview),
                     'passed': sum(1 for item in overview.values() if item['passed'])}
    ReportStore(root).save_summary('sweep_summary', sweep_summary)

    if args.json:
        print(dumps(sweep_summary), end='')
    else:
        rows = [[name, verdict_emoji(item['passed']),
                 '-' if item['hypotheses_satisfied'] is None else verdict_emoji(item['hypotheses_satisfied'])]
                for name, item in overview.items()]
        print(tabulate(rows, headers=['Scenario', 'Verdict', 'Hypotheses'], tablefmt=config.TABLE_FORMAT))
        print(f"\n💾 Saved {len(overview)} bundle(s) to {root}")
    all_passed = all(item['passed'] for item in overview.values())
    return EXIT_PASS if all_passed else EXIT_FAIL


COMMANDS = {
    'threshold': cmd_threshold,
    'simulate': cmd_simulate,
    'energy': cmd_energy,
    'verify': cmd_verify,
    'sweep': cmd_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI application"""
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code in (0, None) else EXIT_USAGE

    try:
        return COMMANDS[args.command](args)
    except KatoLabError as exc:
        print(f"\n❌ Error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\nExiting...")
        sys.exit(EXIT_USAGE)
