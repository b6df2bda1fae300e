"""
Experiment Runner - chain generators, config files and result emission

An ExperimentSpec names a chain generator, a marked vertex and one
algorithm. run() builds the chain, executes the algorithm and writes one
result file plus a reproducibility sidecar next to it.
"""

import logging
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import networkx as nx
import numpy as np
import orjson

from . import __version__
from .errors import BadSpec, WalkError
from .logger_config import ERROR_MESSAGES, SUCCESS_MESSAGES
from .markov import (
    MarkovChain,
    adiabatic_sequence,
    graph_walk,
    hitting_time_classical,
    hitting_time_spectral,
    lazy,
    max_hitting_time,
    metropolis,
    validate,
)
from .search import alg1_search, alg2_search, qsample, success_curve

logger = logging.getLogger(__name__)

ALGORITHMS = ("ht", "alg1", "alg2", "qsample", "curve", "adiabatic", "gen")
GENERATORS = ("cycle", "grid2d-torus", "complete", "metropolis-random", "file")
HT_METHODS = ("spectral", "classical", "max")
INT_FIELDS = ("n", "width", "height", "seed", "marked", "r", "r_max", "jobs")
FLOAT_FIELDS = ("weight_low", "weight_high", "epsilon", "q")
STR_FIELDS = ("algorithm", "generator", "path", "mode", "schedule", "track", "curve_algorithm",
              "ht_method", "out", "format")
JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY


@dataclass
class ExperimentSpec:
    """One experiment: chain generator, marked vertex, algorithm and output."""
    algorithm: str = "ht"
    generator: str = "cycle"
    n: Optional[int] = None
    width: Optional[int] = None
    height: Optional[int] = None
    seed: int = 0
    weight_low: float = 0.5
    weight_high: float = 1.5
    path: Optional[str] = None
    marked: int = 0
    r: int = 1
    epsilon: float = 0.01
    mode: Optional[str] = None
    schedule: str = "auto"
    track: str = "auto"
    q: float = 0.99
    r_max: int = 10
    curve_algorithm: str = "alg1"
    ht_method: str = "spectral"
    out: Optional[str] = None
    format: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        self._check_types()
        if self.algorithm not in ALGORITHMS:
            raise BadSpec(f"unknown algorithm '{self.algorithm}'")
        if self.generator not in GENERATORS:
            raise BadSpec(f"unknown generator '{self.generator}'")
        if self.ht_method not in HT_METHODS:
            raise BadSpec(f"unknown hitting-time method '{self.ht_method}'")
        if self.format not in (None, "json", "csv"):
            raise BadSpec(f"unknown output format '{self.format}'")
        if self.jobs < 1:
            raise BadSpec("jobs must be at least 1")

    def _check_types(self) -> None:
        """Config values arrive from JSON untyped; reject anything of the wrong kind."""
        for name in INT_FIELDS:
            value = getattr(self, name)
            if value is None and name in ("n", "width", "height"):
                continue
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise BadSpec(f"{name} must be an integer, got {value!r}", field=name)
        for name in FLOAT_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
                raise BadSpec(f"{name} must be a number, got {value!r}", field=name)
        for name in STR_FIELDS:
            value = getattr(self, name)
            if value is not None and not isinstance(value, str):
                raise BadSpec(f"{name} must be a string, got {value!r}", field=name)

    @property
    def output_format(self) -> str:
        if self.format:
            return self.format
        return "csv" if self.algorithm == "curve" else "json"

    @property
    def output_path(self) -> Path:
        if self.out:
            return Path(self.out)
        return Path("results") / f"{self.algorithm}.{self.output_format}"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise BadSpec(f"unknown config keys: {', '.join(unknown)}", keys=unknown)
        return cls(**data)

    def merged(self, overrides: Dict[str, Any]) -> "ExperimentSpec":
        """Copy with every non-None override applied."""
        data = self.to_dict()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentSpec.from_dict(data)


def load_spec(path: Union[str, Path]) -> ExperimentSpec:
    try:
        data = orjson.loads(Path(path).read_bytes())
    except (OSError, orjson.JSONDecodeError) as exc:
        raise BadSpec(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise BadSpec("config must be a JSON object")
    return ExperimentSpec.from_dict(data)


def save_spec(spec: ExperimentSpec, path: Union[str, Path]) -> None:
    _write_atomic(Path(path), orjson.dumps(spec.to_dict(), option=JSON_OPTIONS))


# Generators

def _require(value: Optional[int], name: str, minimum: int) -> int:
    if value is None or value < minimum:
        raise BadSpec(f"{name} must be at least {minimum}, got {value}")
    return int(value)


def _random_metropolis(spec: ExperimentSpec) -> MarkovChain:
    n = _require(spec.n, "n", 2)
    if not 0.0 < spec.weight_low <= spec.weight_high:
        raise BadSpec(f"weight range [{spec.weight_low}, {spec.weight_high}] is invalid")
    rng = np.random.default_rng(spec.seed)
    weights = np.triu(rng.uniform(spec.weight_low, spec.weight_high, size=(n, n)), k=1)
    target = rng.uniform(1.0, 2.0, size=n)
    return lazy(metropolis(weights + weights.T, target))


def _from_file(spec: ExperimentSpec) -> MarkovChain:
    if not spec.path:
        raise BadSpec("file generator needs a path")
    try:
        data = orjson.loads(Path(spec.path).read_bytes())
    except (OSError, orjson.JSONDecodeError) as exc:
        raise BadSpec(f"cannot read chain file {spec.path}: {exc}") from exc
    if not isinstance(data, dict) or "rows" not in data:
        raise BadSpec(f"chain file {spec.path} must be an object with a 'rows' matrix")
    try:
        rows = np.asarray(data["rows"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise BadSpec(f"chain file {spec.path} has non-numeric rows: {exc}") from exc
    if rows.ndim != 2 or rows.shape[0] != data.get("n", rows.shape[0]):
        raise BadSpec(f"chain file {spec.path} has rows of shape {rows.shape}")
    return validate(rows)


def generate(spec: ExperimentSpec) -> MarkovChain:
    """Build the chain an experiment runs on; every output is reversible."""
    if spec.generator == "cycle":
        chain = graph_walk(nx.cycle_graph(_require(spec.n, "n", 2)))
    elif spec.generator == "grid2d-torus":
        graph = nx.grid_2d_graph(_require(spec.width, "width", 3), _require(spec.height, "height", 3), periodic=True)
        chain = graph_walk(graph)
    elif spec.generator == "complete":
        chain = graph_walk(nx.complete_graph(_require(spec.n, "n", 2)))
    elif spec.generator == "metropolis-random":
        chain = _random_metropolis(spec)
    else:
        chain = _from_file(spec)
    return validate(chain.P, require_reversible=True)


# Results

def _write_atomic(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.info(SUCCESS_MESSAGES['result_written'].format(path))


def _json(value: Any) -> bytes:
    return orjson.dumps(value, option=JSON_OPTIONS)


def _csv(frame) -> bytes:
    return frame.to_csv(index=False, lineterminator="\n").encode("utf-8")


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _baseline_path(path: Path) -> Path:
    return path.with_name(f"{path.stem}.baseline{path.suffix}")


def _sidecar(spec: ExperimentSpec, outputs: List[Path]) -> Dict[str, Any]:
    return {
        "spec": spec.to_dict(),
        "version": __version__,
        "seeds": {"generator": spec.seed},
        "outputs": [str(p) for p in outputs],
        "created_at": datetime.now(timezone.utc).isoformat(),
    }


def _hitting_time(spec: ExperimentSpec, chain: MarkovChain) -> float:
    if spec.ht_method == "classical":
        return hitting_time_classical(chain, spec.marked)
    if spec.ht_method == "max":
        return max_hitting_time(chain)
    return hitting_time_spectral(chain, spec.marked)


def execute(spec: ExperimentSpec) -> Dict[Path, bytes]:
    """Run one experiment and return the files it produces."""
    chain = generate(spec)
    path = spec.output_path
    fmt = spec.output_format

    if spec.algorithm == "gen":
        return {path: _json({"n": chain.n, "rows": chain.P.tolist()})}
    if spec.algorithm == "ht":
        return {path: _json(float(_hitting_time(spec, chain)))}
    if spec.algorithm == "adiabatic":
        return {path: _json(adiabatic_sequence(chain, spec.marked, spec.q).to_dict())}

    if spec.algorithm == "alg1":
        report = alg1_search(chain, spec.marked, spec.r, spec.epsilon,
                             mode=spec.mode or "filter", schedule=spec.schedule)
        return {path: _json(report.to_dict())}
    if spec.algorithm == "alg2":
        report = alg2_search(chain, spec.marked, spec.r, spec.epsilon,
                             mode=spec.mode or "explicit", schedule=spec.schedule, track=spec.track)
        return {path: _json(report.to_dict())}
    if spec.algorithm == "qsample":
        schedule = "stationary" if spec.schedule == "auto" else spec.schedule
        _state, report = qsample(chain, spec.marked, spec.r, spec.epsilon,
                                 mode=spec.mode or "explicit", schedule=schedule)
        return {path: _json(report.to_dict())}

    curve = success_curve(chain, spec.marked, spec.r_max, spec.epsilon, algorithm=spec.curve_algorithm,
                          mode=spec.mode, schedule=spec.schedule, jobs=spec.jobs)
    if fmt == "json":
        return {path: _json({
            "rows": curve.rows,
            "baseline": curve.baseline,
            "truncated_at": curve.truncated_at,
            "note": curve.note,
        })}
    return {path: _csv(curve.to_frame()), _baseline_path(path): _csv(curve.baseline_frame())}


def run(spec: ExperimentSpec) -> int:
    """Execute and write results; returns the process exit code."""
    try:
        outputs = execute(spec)
        for path, payload in outputs.items():
            _write_atomic(path, payload)
        _write_atomic(_sidecar_path(spec.output_path), _json(_sidecar(spec, list(outputs))))
        return 0
    except WalkError as exc:
        logger.error(ERROR_MESSAGES['run_failed'].format(exc.message))
        sys.stderr.write(orjson.dumps(exc.to_record()).decode("utf-8") + "\n")
        return exc.exit_code
