"""
Spec file parser for Kropina Nav.

This module turns manifold and problem spec files (JSON) into validated
value objects. Parsing is strict: unknown keys are rejected and every error
cites the line and column of the offending entry in the file.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .config import Config
from .exceptions import DomainError, ExpressionError, KropinaNavError, SpecError
from .expressions import compile_matrix, compile_matrix_jet, compile_vector, compile_vector_jet
from .geometries import BUILTINS
from .manifold import ManifoldModel, sample_chart_points

logger = logging.getLogger(__name__)

SEED_KINDS = ('straight', 'detour')
METHODS = ('direct', 'homotopy')
DIRECTIONS = ('forward', 'backward')
SPD_SAMPLES = 64


def _tuple(value):
    """Nested lists to nested tuples so parsed specs compare by value."""
    if isinstance(value, (list, tuple)):
        return tuple(_tuple(item) for item in value)
    return value


def _list(value):
    if isinstance(value, (list, tuple)):
        return [_list(item) for item in value]
    if isinstance(value, dict):
        return {key: _list(item) for key, item in value.items()}
    return value


def _frozen_dict(value: Optional[Dict[str, Any]]):
    return None if value is None else tuple(sorted((key, _tuple(item)) for key, item in value.items()))


@dataclass(frozen=True)
class ManifoldSpec:
    """Parsed manifold spec: a builtin with parameters or coordinate formulas."""
    name: str
    dim: Optional[int] = None
    periodic: Optional[Tuple[bool, ...]] = None
    builtin: Optional[str] = None
    params: Optional[Tuple[Tuple[str, Any], ...]] = None
    box: Optional[Tuple[Tuple[float, float], ...]] = None
    expressions: Optional[Tuple[Tuple[str, Any], ...]] = None
    guard_band: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        payload = {}
        for item in fields(self):
            value = getattr(self, item.name)
            if value is None:
                continue
            if item.name in ('params', 'expressions'):
                value = {key: _list(entry) for key, entry in value}
            payload[item.name] = _list(value)
        return payload


@dataclass(frozen=True)
class ProblemSpec:
    """
    Parsed problem spec.

    One schema serves every command; each command reads the keys it needs
    and ``to_dict`` emits only the keys that were set.
    """
    manifold: Optional[str] = None
    x0: Optional[Tuple[float, ...]] = None
    x1: Optional[Tuple[float, ...]] = None
    seed: Any = 'straight'
    shift: Optional[Tuple[float, ...]] = None
    nodes: Optional[int] = None
    method: str = 'direct'
    use_homotopy: bool = False
    epsilon_schedule: Optional[Tuple[float, ...]] = None
    tolerances: Optional[Tuple[Tuple[str, float], ...]] = None
    max_iterations: Optional[int] = None
    source: Optional[Tuple[float, ...]] = None
    box: Optional[Tuple[Tuple[float, float], ...]] = None
    spacing: Optional[float] = None
    cone_samples: int = 8
    direction: str = 'forward'
    budget: Optional[float] = None
    samples: Optional[int] = None
    alpha: Optional[Tuple[float, ...]] = None
    epsilons: Optional[Tuple[float, ...]] = None

    def tolerance(self, name: str, default: float) -> float:
        return dict(self.tolerances or ()).get(name, default)

    def to_dict(self) -> Dict[str, Any]:
        defaults = ProblemSpec()
        payload = {}
        for key, value in asdict(self).items():
            if value is None or value == getattr(defaults, key):
                continue
            if key == 'tolerances':
                value = dict(value)
            payload[key] = _list(value)
        return payload


class SpecParser:
    """
    Parser for manifold and problem spec files.

    Converts JSON documents into ``ManifoldSpec`` / ``ProblemSpec`` objects and
    builds ``ManifoldModel`` instances, rejecting unknown keys.
    """

    manifold_keys = {'name', 'dim', 'periodic', 'builtin', 'params', 'box', 'expressions', 'guard_band'}
    expression_keys = {'metric', 'one_form', 'killing'}
    problem_keys = {item.name for item in fields(ProblemSpec)}
    tolerance_keys = {'gradient', 'length', 'shooting', 'integration'}

    def __init__(self):
        self.text = ''
        self.source = '<string>'

    # -- documents --------------------------------------------------------

    def load(self, path: str) -> Dict[str, Any]:
        """Read and decode a spec file."""
        self.source = os.path.abspath(path)
        try:
            with open(self.source, 'r', encoding='utf-8') as handle:
                text = handle.read()
        except OSError as e:
            raise SpecError(f"cannot read spec file {self.source}: {e.strerror}", operation='load')
        return self.loads(text, self.source)

    def loads(self, text: str, source: str = '<string>') -> Dict[str, Any]:
        """Decode a JSON document; duplicate keys are errors."""
        self.text = text
        self.source = source

        def unique(pairs):
            result = {}
            for key, value in pairs:
                if key in result:
                    self._fail(f"duplicate key '{key}'", key)
                result[key] = value
            return result

        try:
            data = json.loads(text, object_pairs_hook=unique)
        except json.JSONDecodeError as e:
            raise SpecError(f"{source}: invalid JSON: {e.msg}", line=e.lineno, column=e.colno, operation='load')
        if not isinstance(data, dict):
            raise SpecError(f"{source}: top level must be an object", line=1, column=1, operation='load')
        return data

    def _locate(self, key: str) -> Tuple[Optional[int], Optional[int]]:
        offset = self.text.find(json.dumps(key))
        if offset < 0:
            return None, None
        line = self.text.count('\n', 0, offset) + 1
        return line, offset - self.text.rfind('\n', 0, offset)

    def _fail(self, message: str, key: Optional[str] = None):
        line, column = self._locate(key) if key else (None, None)
        raise SpecError(f"{self.source}: {message}", line=line, column=column, operation='parse')

    def _check_keys(self, data: Dict[str, Any], allowed, context: str):
        for key in data:
            if key not in allowed:
                self._fail(f"unknown key '{key}' in {context}", key)

    def _vector(self, data, key: str, length: Optional[int] = None) -> Tuple[float, ...]:
        value = data[key]
        try:
            vector = tuple(float(item) for item in value)
        except (TypeError, ValueError):
            self._fail(f"'{key}' must be a list of numbers", key)
        if length is not None and len(vector) != length:
            self._fail(f"'{key}' must have {length} entries, got {len(vector)}", key)
        return vector

    def _number(self, value, key: str, what: str = 'a number') -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
            self._fail(f"'{key}' must be {what}, got {value!r}", key)
        return float(value)

    def _box(self, data, key: str, dim: Optional[int]) -> Tuple[Tuple[float, float], ...]:
        value = data[key]
        if not isinstance(value, list) or any(not isinstance(row, list) or len(row) != 2 for row in value):
            self._fail(f"'{key}' must be a list of [lower, upper] pairs", key)
        what = 'a list of numeric [lower, upper] pairs'
        box = tuple((self._number(lo, key, what), self._number(hi, key, what)) for lo, hi in value)
        if dim is not None and len(box) != dim:
            self._fail(f"'{key}' must have {dim} rows, got {len(box)}", key)
        if any(hi <= lo for lo, hi in box):
            self._fail(f"'{key}' rows must have lower < upper", key)
        return box

    # -- manifold specs ---------------------------------------------------------

    def parse_manifold(self, data: Dict[str, Any]) -> ManifoldSpec:
        """Validate a decoded manifold spec."""
        self._check_keys(data, self.manifold_keys, 'manifold spec')
        if ('builtin' in data) == ('expressions' in data):
            self._fail("manifold spec needs exactly one of 'builtin' or 'expressions'")
        dim = data.get('dim')
        if dim is not None and (not isinstance(dim, int) or dim < 2):
            self._fail("'dim' must be an integer >= 2", 'dim')
        periodic = None
        if 'periodic' in data:
            if not isinstance(data['periodic'], list) or not all(isinstance(p, bool) for p in data['periodic']):
                self._fail("'periodic' must be a list of booleans", 'periodic')
            periodic = tuple(data['periodic'])
        params = None
        if 'builtin' in data:
            if data['builtin'] not in BUILTINS:
                self._fail(f"unknown builtin '{data['builtin']}', expected one of {sorted(BUILTINS)}", 'builtin')
            if not isinstance(data.get('params', {}), dict):
                self._fail("'params' must be an object", 'params')
            params = _frozen_dict(data.get('params'))
        elif 'params' in data:
            self._fail("'params' only applies to builtins", 'params')
        expressions = None
        if 'expressions' in data:
            expressions = self._expressions(data['expressions'], dim)
        box = self._box(data, 'box', dim) if 'box' in data else None
        if expressions is not None and box is None:
            self._fail("formula manifolds need a 'box'")
        guard_band = data.get('guard_band')
        if guard_band is not None:
            guard_band = self._number(guard_band, 'guard_band')
            if guard_band < 0:
                self._fail("'guard_band' must not be negative", 'guard_band')
        return ManifoldSpec(name=str(data.get('name', data.get('builtin', 'custom'))), dim=dim, periodic=periodic,
                            builtin=data.get('builtin'), params=params, box=box, expressions=expressions,
                            guard_band=guard_band)

    def _expressions(self, value, dim: Optional[int]):
        if dim is None:
            self._fail("formula manifolds need 'dim'")
        if not isinstance(value, dict):
            self._fail("'expressions' must be an object", 'expressions')
        self._check_keys(value, self.expression_keys, 'expressions')
        for key in ('metric', 'one_form'):
            if key not in value:
                self._fail(f"'expressions' is missing '{key}'", 'expressions')
        metric = value['metric']
        if (not isinstance(metric, list) or len(metric) != dim
                or any(not isinstance(row, list) or len(row) != dim for row in metric)):
            self._fail(f"'metric' must be a {dim}x{dim} table of formulas", 'metric')
        for key in ('one_form', 'killing'):
            if key in value and (not isinstance(value[key], list) or len(value[key]) != dim):
                self._fail(f"'{key}' must be a list of {dim} formulas", key)
        formulas = [item for row in metric for item in row] + list(value['one_form']) + list(value.get('killing', []))
        for formula in formulas:
            if not isinstance(formula, str):
                self._fail(f"formulas must be strings, got {formula!r}", 'expressions')
            self._compile_formula(formula, dim)
        return _frozen_dict(value)

    def _compile_formula(self, formula: str, dim: int):
        try:
            return compile_vector([formula], dim)
        except ExpressionError as e:
            offset = self.text.find(json.dumps(formula))
            if offset < 0 or e.line != 1:
                raise
            offset += e.column
            line = self.text.count('\n', 0, offset) + 1
            column = offset - self.text.rfind('\n', 0, offset)
            raise ExpressionError(f"{self.source}: in formula '{formula}': {e.message}", line=line, column=column,
                                  operation='parse_expression')

    def build_manifold(self, spec: ManifoldSpec) -> ManifoldModel:
        """Instantiate the model described by a manifold spec."""
        if spec.builtin is not None:
            try:
                model = BUILTINS[spec.builtin](**{key: _list(value) for key, value in (spec.params or ())})
            except TypeError as e:
                self._fail(f"invalid params for builtin '{spec.builtin}': {e}", 'params')
            except KropinaNavError as e:
                self._fail(f"builtin '{spec.builtin}' rejected its params: {e.message}", 'params')
            if spec.dim is not None and spec.dim != model.dim:
                self._fail(f"'dim' is {spec.dim} but builtin '{spec.builtin}' has dimension {model.dim}", 'dim')
            changes = {'name': spec.name}
            if spec.box is not None:
                if len(spec.box) != model.dim:
                    self._fail(f"'box' must have {model.dim} rows", 'box')
                changes['lower'] = tuple(lo for lo, _ in spec.box)
                changes['upper'] = tuple(hi for _, hi in spec.box)
            if spec.periodic is not None:
                changes['periodic'] = spec.periodic
            if spec.guard_band is not None:
                changes['guard_band'] = spec.guard_band
            return replace(model, **changes)

        expressions = dict(spec.expressions)
        dim = spec.dim
        metric = _list(expressions['metric'])
        one_form = _list(expressions['one_form'])
        killing = _list(expressions.get('killing'))
        model = ManifoldModel(
            name=spec.name,
            dim=dim,
            lower=tuple(lo for lo, _ in spec.box),
            upper=tuple(hi for _, hi in spec.box),
            periodic=spec.periodic or (False,) * dim,
            metric_fn=compile_matrix(metric, dim),
            one_form_fn=compile_vector(one_form, dim),
            metric_jet_fn=compile_matrix_jet(metric, dim),
            one_form_jet_fn=compile_vector_jet(one_form, dim),
            killing_fn=compile_vector(killing, dim) if killing else None,
            killing_jet_fn=compile_vector_jet(killing, dim) if killing else None,
            guard_band=spec.guard_band if spec.guard_band is not None else 0.0,
        )
        self._check_metric(model, spec)
        logger.info(f"Built formula manifold '{spec.name}' (dim {dim})")
        return model

    def _check_metric(self, model: ManifoldModel, spec: ManifoldSpec):
        """Require a symmetric positive definite metric at the box center and at sampled chart points."""
        center = np.asarray([(lo + hi) / 2 for lo, hi in spec.box])
        try:
            samples = sample_chart_points(model, SPD_SAMPLES, np.random.default_rng(Config.DEFAULT_SEED))
        except DomainError:
            self._fail('one_form formulas vanish on the whole box', 'one_form')
        points = np.vstack([center[None, :], samples])
        metric = model.metric_at(points)
        symmetric = np.allclose(metric, np.swapaxes(metric, -1, -2))
        if not (np.all(np.isfinite(metric)) and symmetric):
            self._fail('metric formulas are not finite and symmetric on the box', 'metric')
        smallest = np.linalg.eigvalsh(metric)[:, 0]
        if np.any(smallest <= 0):
            worst = points[int(np.argmin(smallest))]
            self._fail(f"metric formulas are not positive definite at {np.round(worst, 6).tolist()}", 'metric')

    def load_manifold(self, path: str) -> Tuple[ManifoldSpec, ManifoldModel]:
        spec = self.parse_manifold(self.load(path))
        return spec, self.build_manifold(spec)

    # -- problem specs ------------------------------------------------------------

    def parse_problem(self, data: Dict[str, Any], dim: Optional[int] = None) -> ProblemSpec:
        """Validate a decoded problem spec against the manifold dimension."""
        self._check_keys(data, self.problem_keys, 'problem spec')
        values: Dict[str, Any] = {}
        if 'manifold' in data:
            values['manifold'] = str(data['manifold'])
        for key in ('x0', 'x1', 'source', 'shift'):
            if key in data:
                values[key] = self._vector(data, key, dim)
        for key in ('epsilon_schedule', 'alpha', 'epsilons'):
            if key in data:
                values[key] = self._vector(data, key)
        if 'epsilon_schedule' in values:
            schedule = values['epsilon_schedule']
            if any(e <= 0 or e > 1 for e in schedule) or any(b >= a for a, b in zip(schedule, schedule[1:])):
                self._fail("'epsilon_schedule' must be strictly decreasing in (0, 1]", 'epsilon_schedule')
        if 'box' in data:
            values['box'] = self._box(data, 'box', dim)
        if 'seed' in data:
            values['seed'] = self._seed(data['seed'], dim)
            self._check_seed_ends(values)
        for key in ('nodes', 'max_iterations', 'cone_samples', 'samples'):
            if key in data:
                if not isinstance(data[key], int) or isinstance(data[key], bool) or data[key] < 2:
                    self._fail(f"'{key}' must be an integer >= 2", key)
                values[key] = data[key]
        for key in ('spacing', 'budget'):
            if key in data:
                if not isinstance(data[key], (int, float)) or data[key] <= 0:
                    self._fail(f"'{key}' must be a positive number", key)
                values[key] = float(data[key])
        if 'use_homotopy' in data:
            if not isinstance(data['use_homotopy'], bool):
                self._fail("'use_homotopy' must be a boolean", 'use_homotopy')
            values['use_homotopy'] = data['use_homotopy']
        for key, choices in (('method', METHODS), ('direction', DIRECTIONS)):
            if key in data:
                if data[key] not in choices:
                    self._fail(f"'{key}' must be one of {list(choices)}", key)
                values[key] = data[key]
        if 'tolerances' in data:
            tolerances = data['tolerances']
            if not isinstance(tolerances, dict):
                self._fail("'tolerances' must be an object", 'tolerances')
            self._check_keys(tolerances, self.tolerance_keys, 'tolerances')
            for key, value in tolerances.items():
                if self._number(value, key, 'a positive number') <= 0:
                    self._fail(f"'{key}' must be a positive number, got {value!r}", key)
            values['tolerances'] = tuple(sorted((key, float(value)) for key, value in tolerances.items()))
        return ProblemSpec(**values)

    def _seed(self, value, dim: Optional[int]):
        if isinstance(value, str):
            if value not in SEED_KINDS:
                self._fail(f"'seed' must be one of {list(SEED_KINDS)} or a list of points", 'seed')
            return value
        if not isinstance(value, list) or len(value) < 2:
            self._fail("'seed' polyline needs at least two points", 'seed')
        try:
            points = tuple(tuple(float(c) for c in point) for point in value)
        except (TypeError, ValueError):
            self._fail("'seed' polyline must be a list of coordinate lists", 'seed')
        if dim is not None and any(len(point) != dim for point in points):
            self._fail(f"'seed' points must have {dim} coordinates", 'seed')
        return points

    def _check_seed_ends(self, values: Dict[str, Any]):
        seed = values['seed']
        if isinstance(seed, str):
            return
        for key, point in (('x0', seed[0]), ('x1', seed[-1])):
            if key not in values:
                continue
            if len(point) != len(values[key]) or np.max(np.abs(np.subtract(point, values[key]))) > 1e-10:
                end = 'start' if key == 'x0' else 'end'
                self._fail(f"'seed' polyline must {end} at '{key}' {list(values[key])}, got {list(point)}", 'seed')

    def load_problem(self, path: str, dim: Optional[int] = None) -> ProblemSpec:
        return self.parse_problem(self.load(path), dim)
