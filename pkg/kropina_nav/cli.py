"""
Command line interface for Kropina Nav.

Usage:
    kropina-nav connect --manifold flat.json --problem problem.json [--out DIR]
    kropina-nav closed  --manifold hopf.json --problem loop.json
    kropina-nav reach   --manifold heisenberg.json --problem reach.json
    kropina-nav katok   [--eps 0.75 ...]
    kropina-nav orbits  --manifold torus.json [--problem alpha.json]
    kropina-nav scan    --manifold heisenberg.json [--seed N]

Exit codes: 0 converged or complete, 1 usage or spec error, 2 solver
non-convergence, 3 structural outcome (empty admissible class, no boundary,
no closed orbit).
"""

import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import click
import numpy as np

from . import __version__
from .closed import (closed_geodesic_in_class, katok_extrapolate, katok_table, killing_orbit_candidates,
                     perturbed_orbit_lengths, perturbed_orbit_numeric)
from .config import Config, get_config
from .connect import detour_seed, epsilon_homotopy, minimize_length
from .data_export import ResultExporter
from .exceptions import (BoundaryEmpty, ChartGuardError, DomainError, HypothesisViolated, InvalidArgument,
                         KropinaNavError, NoAdmissibleSeed, NoClosedOrbit, NotCriticalWind, SourceOutsideBox, SpecError)
from .logging_config import configure_logging
from .models import (CONVERGED, DEFAULT_EPSILON_SCHEDULE, STRUCTURAL_STATUSES, ConnectProblem, ConnectResult,
                     DiscretePath, LoopProblem)
from .parser import ManifoldSpec, ProblemSpec, SpecParser
from .reachable import boundary_tangency_test, nonintegrability_scan, propagate

logger = logging.getLogger(__name__)

COMMANDS = ('connect', 'closed', 'reach', 'katok', 'orbits', 'scan')
KATOK_EPSILONS = (0.9, 0.75, 0.5, 0.1, 0.01)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2
EXIT_STRUCTURAL = 3

STRUCTURAL_ERRORS = (NoAdmissibleSeed, BoundaryEmpty, NoClosedOrbit, HypothesisViolated, NotCriticalWind)
USAGE_ERRORS = (SpecError, DomainError, ChartGuardError, InvalidArgument, SourceOutsideBox)


@dataclass
class RunConfig:
    """One command invocation with every file path resolved."""
    command: str
    manifold_path: Optional[str] = None
    problem_path: Optional[str] = None
    output_dir: str = Config.OUTPUT_DIR
    epsilons: Tuple[float, ...] = ()
    tol: Optional[float] = None
    seed: int = Config.DEFAULT_SEED
    json_output: bool = False
    verbose: bool = False
    extrapolate: bool = False

    def resolve(self):
        """Absolutize paths and check the inputs exist before any computation."""
        if self.command not in COMMANDS:
            raise SpecError(f"unknown command '{self.command}'", operation='run')
        if self.command != 'katok' and self.manifold_path is None:
            raise SpecError(f"'{self.command}' needs --manifold", operation='run')
        if self.command in ('connect', 'closed', 'reach') and self.problem_path is None:
            raise SpecError(f"'{self.command}' needs --problem", operation='run')
        for name in ('manifold_path', 'problem_path'):
            path = getattr(self, name)
            if path is None:
                continue
            path = os.path.abspath(path)
            if not os.path.isfile(path):
                raise SpecError(f"spec file not found: {path}", operation='run')
            setattr(self, name, path)
        self.output_dir = os.path.abspath(self.output_dir)
        return self


@dataclass
class Outcome:
    """Report and tables produced by one command."""
    report: Dict[str, Any]
    exit_code: int = EXIT_OK
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)


def _status_exit(status: str) -> int:
    if status == CONVERGED:
        return EXIT_OK
    if status in STRUCTURAL_STATUSES:
        return EXIT_STRUCTURAL
    return EXIT_NOT_CONVERGED


def _gradient_tol(config: RunConfig, problem: ProblemSpec) -> float:
    return config.tol if config.tol is not None else problem.tolerance('gradient', 1e-8)


def _schedule(config: RunConfig, problem: ProblemSpec) -> Tuple[float, ...]:
    if config.epsilons:
        return tuple(sorted(config.epsilons, reverse=True))
    return problem.epsilon_schedule or DEFAULT_EPSILON_SCHEDULE


def _seed_path(model, problem: ProblemSpec) -> DiscretePath:
    if problem.x0 is None or problem.x1 is None:
        raise SpecError("connect problems need 'x0' and 'x1'", operation='run')
    if problem.seed == 'detour':
        return detour_seed(model, problem.x0, problem.x1)
    if isinstance(problem.seed, str):
        return DiscretePath.straight(problem.x0, problem.x1, problem.nodes or 33)
    points = np.asarray(problem.seed, dtype=float)
    return DiscretePath(params=np.linspace(0.0, 1.0, len(points)), points=points)


def _closed_rows(result: ConnectResult) -> List[Dict[str, Any]]:
    rows = result.solution.trajectory_rows()[:-1]
    rows.append(dict(rows[0]))
    return rows


def run_connect(config: RunConfig, model, problem: ProblemSpec) -> Outcome:
    connect_problem = ConnectProblem(
        model=model, x0=problem.x0, x1=problem.x1, seed_path=_seed_path(model, problem), nodes=problem.nodes or 33,
        gradient_tol=_gradient_tol(config, problem), length_tol=problem.tolerance('length', 1e-10),
        max_iterations=problem.max_iterations or 2000, epsilon_schedule=_schedule(config, problem),
        shooting_tol=problem.tolerance('shooting', 1e-8),
        integration_tol=problem.tolerance('integration', Config.INTEGRATION_TOL))
    solver = epsilon_homotopy if problem.method == 'homotopy' else minimize_length
    result = solver(connect_problem)
    tables = {'': result.solution.trajectory_rows()} if result.solution is not None else {}
    return Outcome(report=result.to_dict(), exit_code=_status_exit(result.status), tables=tables)


def run_closed(config: RunConfig, model, problem: ProblemSpec) -> Outcome:
    if isinstance(problem.seed, str):
        raise SpecError("closed problems need 'seed' as a list of loop points", operation='run')
    loop = DiscretePath.loop(np.asarray(problem.seed, dtype=float), shift=problem.shift)
    loop_problem = LoopProblem(
        model=model, seed_loop=loop, nodes=problem.nodes or 64, gradient_tol=_gradient_tol(config, problem),
        length_tol=problem.tolerance('length', 1e-10), max_iterations=problem.max_iterations or 3000,
        epsilon_schedule=_schedule(config, problem), use_homotopy=problem.use_homotopy,
        integration_tol=problem.tolerance('integration', Config.INTEGRATION_TOL))
    result = closed_geodesic_in_class(loop_problem)
    tables = {'': _closed_rows(result)} if result.solution is not None else {}
    return Outcome(report=result.to_dict(), exit_code=_status_exit(result.status), tables=tables)


def run_reach(config: RunConfig, model, problem: ProblemSpec) -> Outcome:
    if problem.source is None or problem.spacing is None:
        raise SpecError("reach problems need 'source' and 'spacing'", operation='run')
    box = problem.box or tuple(zip(model.lower, model.upper))
    rs = propagate(model, problem.source, box, problem.spacing, cone_samples=problem.cone_samples,
                   direction=problem.direction, budget=problem.budget)
    report = rs.to_dict()
    exit_code = EXIT_OK
    try:
        tangency = boundary_tangency_test(model, rs)
        tangency.pop('angles')
        report['boundary'] = tangency
    except BoundaryEmpty as e:
        report['boundary'] = {'status': 'BoundaryEmpty', 'reason': f"{e.reason}; {e.message}"}
        exit_code = EXIT_STRUCTURAL
    scan = nonintegrability_scan(model, box, samples=problem.samples or 1000,
                                 rng=np.random.default_rng(config.seed))
    report['nonintegrability_fraction'] = scan['fraction_nonzero']
    return Outcome(report=report, exit_code=exit_code, tables={'': rs.grid_rows()})


def run_katok(config: RunConfig, model=None, problem: Optional[ProblemSpec] = None) -> Outcome:
    epsilons = config.epsilons or (problem.epsilons if problem and problem.epsilons else KATOK_EPSILONS)
    rows = katok_table(epsilons)
    report = {'rows': rows, 'max_error': max(row['error'] for row in rows)}
    if config.extrapolate:
        report['extrapolated_short'] = katok_extrapolate()
    return Outcome(report=report, tables={'': rows})


def run_orbits(config: RunConfig, model, problem: Optional[ProblemSpec]) -> Outcome:
    alphas = problem.alpha if problem is not None and problem.alpha else ()
    try:
        candidates = killing_orbit_candidates(model, rng=np.random.default_rng(config.seed))
    except HypothesisViolated as e:
        # perturbed orbits do not need a closed Killing orbit
        if not alphas:
            raise
        logger.warning(str(e))
        candidates = []
    report: Dict[str, Any] = {'candidates': [candidate.to_dict() for candidate in candidates]}
    tables = {f'orbit{k}': candidate.orbit.trajectory_rows() for k, candidate in enumerate(candidates)}
    if alphas:
        report['perturbed'] = [{'alpha': alpha, 'closed_form': perturbed_orbit_lengths(model, alpha),
                                'numeric': perturbed_orbit_numeric(model, alpha)} for alpha in alphas]
    return Outcome(report=report, tables=tables)


def run_scan(config: RunConfig, model, problem: Optional[ProblemSpec]) -> Outcome:
    box = problem.box if problem is not None else None
    samples = problem.samples if problem is not None and problem.samples else 1000
    scan = nonintegrability_scan(model, box, samples=samples, rng=np.random.default_rng(config.seed))
    rows = []
    for point, value in zip(scan['points'], scan['values']):
        row = {f'x{axis + 1}': float(c) for axis, c in enumerate(point)}
        row['value'] = float(value)
        rows.append(row)
    report = {key: scan[key] for key in ('dim', 'samples', 'fraction_nonzero', 'extension')}
    return Outcome(report=report, tables={'': rows})


HANDLERS = {
    'connect': run_connect,
    'closed': run_closed,
    'reach': run_reach,
    'katok': run_katok,
    'orbits': run_orbits,
    'scan': run_scan,
}


def _run_payload(config: RunConfig, manifold: Optional[ManifoldSpec], problem: Optional[ProblemSpec]):
    return {
        'command': config.command,
        'manifold': manifold.to_dict() if manifold else None,
        'problem': problem.to_dict() if problem else None,
        'epsilons': list(config.epsilons),
        'tol': config.tol,
        'seed': config.seed,
    }


def emit_plotdata(outcome: Outcome, config: RunConfig, manifold_name: str, run_payload: Dict[str, Any],
                  exporter: Optional[ResultExporter] = None) -> List[str]:
    """Write the CSV tables of an outcome; returns the written paths."""
    exporter = exporter or ResultExporter(config.output_dir)
    paths = []
    for tag, rows in outcome.tables.items():
        if not rows:
            continue
        name = exporter.file_name(config.command, manifold_name, run_payload, 'csv', tag=tag or None)
        paths.append(exporter.write(name, exporter.export_to_csv(rows)))
    return paths


def run(config: RunConfig) -> int:
    """Execute one command; returns the process exit status."""
    parser = SpecParser()
    try:
        config.resolve()
        manifold_spec = model = problem = None
        if config.manifold_path:
            manifold_spec, model = parser.load_manifold(config.manifold_path)
        if config.problem_path:
            problem = parser.load_problem(config.problem_path, model.dim if model else None)
    except KropinaNavError as e:
        logger.error(str(e))
        click.echo(f"Error: {e}", err=True)
        return EXIT_USAGE

    manifold_name = manifold_spec.name if manifold_spec else 'sphere_hopf_3'
    payload = _run_payload(config, manifold_spec, problem)
    logger.info(f"Running '{config.command}' on '{manifold_name}'")
    try:
        outcome = HANDLERS[config.command](config, model, problem)
    except USAGE_ERRORS as e:
        logger.error(str(e))
        click.echo(f"Error: {e}", err=True)
        return EXIT_USAGE
    except STRUCTURAL_ERRORS as e:
        reason = getattr(e, 'reason', type(e).__name__)
        outcome = Outcome(report={'status': type(e).__name__, 'reason': f"{reason}; {e}"},
                          exit_code=EXIT_STRUCTURAL)
    except KropinaNavError as e:
        outcome = Outcome(report={'status': type(e).__name__, 'reason': str(e)}, exit_code=EXIT_NOT_CONVERGED)

    outcome.report['command'] = config.command
    outcome.report['manifold'] = manifold_name
    outcome.report['exit_code'] = outcome.exit_code
    exporter = ResultExporter(config.output_dir)
    try:
        text = exporter.export_to_json(outcome.report)
        report_path = exporter.write(exporter.file_name(config.command, manifold_name, payload, 'json'), text)
        csv_paths = emit_plotdata(outcome, config, manifold_name, payload, exporter)
    except OSError as e:
        click.echo(f"Error: {e}", err=True)
        return EXIT_USAGE

    if config.json_output:
        click.echo(text, nl=False)
    else:
        summary = outcome.report.get('status', 'complete')
        click.echo(f"{config.command} on {manifold_name}: {summary} (exit {outcome.exit_code})")
        if 'length' in outcome.report:
            click.echo(f"  length: {outcome.report['length']}")
        if 'reason' in outcome.report:
            click.echo(f"  reason: {outcome.report['reason']}")
        click.echo(f"  report: {report_path}")
        for path in csv_paths:
            click.echo(f"  data:   {path}")
    return outcome.exit_code


# -- click surface -------------------------------------------------------------------

def _common_options(func):
    options = [
        click.option('--manifold', 'manifold_path', type=click.Path(dir_okay=False), help='Manifold spec (JSON)'),
        click.option('--problem', 'problem_path', type=click.Path(dir_okay=False), help='Problem spec (JSON)'),
        click.option('--out', 'output_dir', default=Config.OUTPUT_DIR, show_default=True, help='Output directory'),
        click.option('--eps', 'epsilons', type=float, multiple=True, help='Epsilon values (repeatable)'),
        click.option('--tol', type=float, default=None, help='Optimizer gradient tolerance override'),
        click.option('--seed', type=int, default=Config.DEFAULT_SEED, show_default=True,
                     help='Seed for randomized sampling'),
        click.option('--json', 'json_output', is_flag=True, help='Print the JSON report to stdout'),
        click.option('-v', '--verbose', is_flag=True, help='Debug logging'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _invoke(command: str, **kwargs):
    verbose = kwargs.pop('verbose')
    configure_logging('cli', level='DEBUG' if verbose else get_config().LOG_LEVEL)
    config = RunConfig(command=command, verbose=verbose, epsilons=tuple(kwargs.pop('epsilons')), **kwargs)
    sys.exit(run(config))


@click.group()
@click.version_option(version=__version__, message='%(version)s')
def main():
    """Geodesics, closed geodesics and reachable sets of Kropina metrics."""


@main.command()
@_common_options
def connect(**kwargs):
    """Connecting geodesic between x0 and x1."""
    _invoke('connect', **kwargs)


@main.command()
@_common_options
def closed(**kwargs):
    """Closed geodesic in the free homotopy class of a seed loop."""
    _invoke('closed', **kwargs)


@main.command()
@_common_options
def reach(**kwargs):
    """Admissible reachable set and boundary tangency report."""
    _invoke('reach', **kwargs)


@main.command()
@_common_options
@click.option('--extrapolate', is_flag=True, help='Extrapolate the short length to eps -> 0')
def katok(**kwargs):
    """Katok Hopf-circle lengths: closed form against numeric integration."""
    _invoke('katok', **kwargs)


@main.command()
@_common_options
def orbits(**kwargs):
    """Closed geodesics among Killing orbits."""
    _invoke('orbits', **kwargs)


@main.command()
@_common_options
def scan(**kwargs):
    """Sample the omega ^ d omega density."""
    _invoke('scan', **kwargs)


if __name__ == '__main__':
    main()
