"""Experiment configuration files.

A config is a YAML document; matrices are lists of rows, or a path to a
whitespace/comma separated text file relative to the config. Example::

    plant:
      A: [[1.1, 0.2], [0.0, 0.9]]
      B: [[0.0], [1.0]]
    paths:
      - {name: fast, delay: 1, loss: 0.25}
      - {name: slow, delay: 5, loss: 0.0}
    horizon: 300
    x0: [1, 1]            # plant part; registers start empty
    weights: {M: plant-identity, Q: plant-identity, R: identity}
    schedules:
      fast: {paths: [fast]}
      both: {paths: [fast, slow]}
    simulation: {replicates: 5000, seed: 7}

Validation errors name the offending field and, when known, its line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .model import (CostWeights, NetworkSpec, PlantModel, RoutePath, SwitchedSystem,
                    all_actions, build_augmented, plant_identity_weights)
from .static_solver import RoutingSchedule

BUNDLED = {
    "two-path": "two_path_example.yaml",
    "desk": "desk_example.yaml",
}


class ConfigError(ValueError):
    def __init__(self, message: str, field: str = "", line: int | None = None,
                 source: str = ""):
        self.field, self.line, self.source = field, line, source
        where = source
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
        parts = [p for p in (where, field) if p]
        super().__init__(": ".join(parts + [message]))


def _node_lines(node, path=(), out=None) -> dict:
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            _node_lines(v, path + (k.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _node_lines(v, path + (i,), out)
    return out


def _number(v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ValueError(v)
    x = float(v)
    if not np.isfinite(x):
        raise ValueError(v)
    return x


def _fmt_path(path) -> str:
    s = ""
    for p in path:
        s += f"[{p}]" if isinstance(p, int) else (f".{p}" if s else str(p))
    return s


@dataclass
class ScheduleSpec:
    name: str
    paths: tuple[int, ...] | None = None        # constant use of these paths
    sequence: tuple[tuple[int, ...], ...] | None = None  # per-step action vectors


@dataclass
class ExperimentConfig:
    network: NetworkSpec
    horizon: int
    x0: np.ndarray
    weights: dict
    schedules: dict[str, ScheduleSpec]
    actions: list[tuple[int, ...]]
    replicates: int = 1000
    seed: int = 0
    record_trajectories: bool = True
    record_inputs: bool = True
    budget: int = 10_000
    samples: int = 10_000
    dynamic_seed: int = 0
    output: Path = Path("out")
    source: str = ""
    _lines: dict = field(default_factory=dict, repr=False)

    def error(self, message: str, *path) -> ConfigError:
        line = None
        for cut in range(len(path), -1, -1):
            line = self._lines.get(tuple(path[:cut]))
            if line is not None:
                break
        return ConfigError(message, _fmt_path(path), line, self.source)

    def x0_for(self, sys: SwitchedSystem) -> np.ndarray:
        x0 = self.x0
        if x0.shape[0] == sys.n:
            return x0.copy()
        plant = self.network.plant.n_states
        if x0.shape[0] == plant:
            out = np.zeros(sys.n)
            out[:plant] = x0
            return out
        raise self.error(f"x0 has {x0.shape[0]} entries; expected {plant} (plant) "
                         f"or {sys.n} (augmented)", "x0")

    def weights_for(self, sys: SwitchedSystem) -> CostWeights:
        plant = self.network.plant.n_states
        mats = {}
        for key in ("M", "Q"):
            v = self.weights[key]
            mats[key] = plant_identity_weights(sys.n, plant) if isinstance(v, str) else v
        v = self.weights["R"]
        mats["R"] = np.eye(sys.u_dim) if isinstance(v, str) else v
        for key, dim in (("M", sys.n), ("Q", sys.n), ("R", sys.u_dim)):
            if mats[key].shape != (dim, dim):
                raise self.error(f"is {mats[key].shape[0]}x{mats[key].shape[1]} but the "
                                 f"system needs {dim}x{dim}", "weights", key)
        try:
            return CostWeights(mats["M"], mats["R"], mats["Q"], self.horizon)
        except ValueError as exc:
            key = str(exc).split()[0]
            raise self.error(str(exc), *(("weights", key) if key in mats else ("weights",))) from exc

    def schedule_system(self, name: str):
        """(system, weights, schedule, x0) for a named static schedule.

        A ``paths`` schedule runs on the sub-network made of those paths only,
        sending on all of them at every step; a ``sequence`` schedule runs on
        the full network.
        """
        if name not in self.schedules:
            raise ConfigError(f"unknown schedule {name!r}; known: {', '.join(self.schedules)}",
                              "schedules", source=self.source)
        sch = self.schedules[name]
        if sch.paths is not None:
            sub = self.network.restrict(sch.paths)
            sys = build_augmented(sub, [(1,) * sub.n_paths])
            rs = RoutingSchedule.constant(0, self.horizon, name)
        else:
            catalog = sorted(set(sch.sequence))
            sys = build_augmented(self.network, catalog)
            rs = RoutingSchedule(tuple(catalog.index(a) for a in sch.sequence), name)
        return sys, self.weights_for(sys), rs, self.x0_for(sys)

    def dynamic_system(self):
        sys = build_augmented(self.network, self.actions)
        return sys, self.weights_for(sys), self.x0_for(sys)


def resolve_config_path(path: str) -> Path:
    p = Path(path)
    if p.is_file() or path not in BUNDLED:
        return p
    return Path(str(resources.files("netlqr") / "data" / BUNDLED[path]))


def load_config(path) -> ExperimentConfig:
    path = resolve_config_path(str(path))
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=str(path)) from exc
    return parse_config(text, source=str(path), base=path.parent)


def parse_config(text: str, source: str = "<string>", base: Path | None = None) -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"YAML parse error: {getattr(exc, 'problem', exc)}",
                          line=line, source=source) from exc
    lines = _node_lines(node) if node is not None else {}
    return _Parser(raw, lines, source, base or Path(".")).parse()


class _Parser:
    def __init__(self, raw, lines, source, base):
        self.raw, self.lines, self.source, self.base = raw, lines, source, base

    def err(self, message, *path):
        line = None
        for cut in range(len(path), -1, -1):
            line = self.lines.get(tuple(path[:cut]))
            if line is not None:
                break
        return ConfigError(message, _fmt_path(path), line, self.source)

    def get(self, mapping, key, *path, required=True, default=None):
        if not isinstance(mapping, dict):
            raise self.err("expected a mapping", *path)
        if key not in mapping:
            if required:
                raise self.err(f"missing required key {key!r}", *path)
            return default
        return mapping[key]

    def matrix(self, value, *path) -> np.ndarray:
        if isinstance(value, str):
            f = self.base / value
            try:
                text = f.read_text()
            except OSError as exc:
                raise self.err(f"cannot read matrix file {str(f)!r}", *path) from exc
            rows = [ln.replace(",", " ").split() for ln in text.splitlines() if ln.strip()]
            value = [[float(v) for v in r] for r in rows]
        if not isinstance(value, list) or not value:
            raise self.err("expected a non-empty list of rows", *path)
        if all(isinstance(v, (int, float, str)) for v in value):
            value = [[v] for v in value]
        width = None
        for i, row in enumerate(value):
            if not isinstance(row, list):
                raise self.err("each row must be a list of numbers", *path, i)
            try:
                # YAML 1.1 reads 1e5 (no exponent sign) as a string
                row = value[i] = [_number(v) for v in row]
            except ValueError:
                raise self.err("row contains a non-numeric entry", *path, i) from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise self.err(f"row {i} has {len(row)} entries, expected {width}", *path, i)
        return np.array(value, dtype=float)

    def integer(self, value, *path, minimum=None) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.err(f"expected an integer, got {value!r}", *path)
        if minimum is not None and value < minimum:
            raise self.err(f"must be >= {minimum}, got {value}", *path)
        return value

    def path_list(self, value, names, *path) -> tuple[int, ...]:
        if not isinstance(value, list):
            raise self.err("expected a list of path names", *path)
        idx = []
        for i, v in enumerate(value):
            if v not in names:
                raise self.err(f"unknown path {v!r}; known: {', '.join(names)}", *path, i)
            idx.append(names.index(v))
        return tuple(sorted(set(idx)))

    def parse(self) -> ExperimentConfig:
        raw = self.raw
        if not isinstance(raw, dict):
            raise self.err("config must be a mapping at top level")

        plant_raw = self.get(raw, "plant")
        A = self.matrix(self.get(plant_raw, "A", "plant"), "plant", "A")
        B = self.matrix(self.get(plant_raw, "B", "plant"), "plant", "B")
        try:
            plant = PlantModel(A, B)
        except ValueError as exc:
            raise self.err(str(exc), "plant") from exc

        paths_raw = self.get(raw, "paths")
        if not isinstance(paths_raw, list) or not paths_raw:
            raise self.err("expected a non-empty list of paths", "paths")
        paths = []
        for i, p in enumerate(paths_raw):
            delay = self.integer(self.get(p, "delay", "paths", i), "paths", i, "delay", minimum=1)
            loss = self.get(p, "loss", "paths", i)
            if isinstance(loss, bool) or not isinstance(loss, (int, float)) or not 0 <= loss <= 1:
                raise self.err(f"loss must be a probability in [0, 1], got {loss!r}",
                               "paths", i, "loss")
            name = str(self.get(p, "name", "paths", i, required=False, default=f"path{i + 1}"))
            paths.append(RoutePath(delay, float(loss), name))
        names = [p.name for p in paths]
        if len(set(names)) != len(names):
            raise self.err("path names must be unique", "paths")
        network = NetworkSpec(plant, tuple(paths))

        horizon = self.integer(self.get(raw, "horizon"), "horizon", minimum=1)

        x0 = self.get(raw, "x0")
        if not isinstance(x0, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in x0):
            raise self.err("expected a list of numbers", "x0")
        x0 = np.array(x0, dtype=float)

        w_raw = self.get(raw, "weights", required=False, default={}) or {}
        weights = {}
        for key, shorthand in (("M", "plant-identity"), ("Q", "plant-identity"), ("R", "identity")):
            v = w_raw.get(key, shorthand) if isinstance(w_raw, dict) else None
            if v is None:
                raise self.err("expected a mapping", "weights")
            if isinstance(v, str) and v == shorthand:
                weights[key] = v
            elif isinstance(v, str) and v in ("plant-identity", "identity"):
                raise self.err(f"shorthand {v!r} is not valid here (use {shorthand!r})",
                               "weights", key)
            else:
                weights[key] = self.matrix(v, "weights", key)

        schedules = {}
        s_raw = self.get(raw, "schedules", required=False, default=None)
        if s_raw is None:
            s_raw = {"all": {"paths": names}}
        if not isinstance(s_raw, dict):
            raise self.err("expected a mapping of schedule names", "schedules")
        for sname, sdef in s_raw.items():
            if not isinstance(sdef, dict) or ("paths" in sdef) == ("sequence" in sdef):
                raise self.err("give exactly one of 'paths' or 'sequence'", "schedules", sname)
            if "paths" in sdef:
                idx = self.path_list(sdef["paths"], names, "schedules", sname, "paths")
                if not idx:
                    raise self.err("a constant schedule needs at least one path",
                                   "schedules", sname, "paths")
                schedules[sname] = ScheduleSpec(sname, paths=idx)
            else:
                seq = sdef["sequence"]
                if not isinstance(seq, list) or len(seq) != horizon:
                    raise self.err(f"sequence must list one path set per step ({horizon})",
                                   "schedules", sname, "sequence")
                vecs = []
                for k, step in enumerate(seq):
                    idx = self.path_list(step, names, "schedules", sname, "sequence", k)
                    vecs.append(tuple(int(i in idx) for i in range(len(names))))
                schedules[sname] = ScheduleSpec(sname, sequence=tuple(vecs))

        a_raw = self.get(raw, "actions", required=False, default=None)
        if a_raw is None:
            actions = all_actions(len(names))
        else:
            if not isinstance(a_raw, list) or not a_raw:
                raise self.err("expected a non-empty list of path sets", "actions")
            actions = []
            for i, a in enumerate(a_raw):
                idx = self.path_list(a, names, "actions", i)
                vec = tuple(int(j in idx) for j in range(len(names)))
                if vec in actions:
                    raise self.err("duplicate action", "actions", i)
                actions.append(vec)

        sim = self.get(raw, "simulation", required=False, default={}) or {}
        dyn = self.get(raw, "dynamic", required=False, default={}) or {}
        cfg = ExperimentConfig(
            network=network, horizon=horizon, x0=x0, weights=weights,
            schedules=schedules, actions=actions,
            replicates=self.integer(sim.get("replicates", 1000), "simulation", "replicates",
                                    minimum=1),
            seed=self.integer(sim.get("seed", 0), "simulation", "seed", minimum=0),
            record_trajectories=bool(sim.get("record_trajectories", True)),
            record_inputs=bool(sim.get("record_inputs", True)),
            budget=self.integer(dyn.get("budget", 10_000), "dynamic", "budget", minimum=1),
            samples=self.integer(dyn.get("samples", 10_000), "dynamic", "samples", minimum=1),
            dynamic_seed=self.integer(dyn.get("seed", 0), "dynamic", "seed", minimum=0),
            output=self.base / str(raw.get("output", "out")),
            source=self.source,
        )
        cfg._lines = self.lines
        n_full = network.augmented_dim
        for key in ("M", "Q", "R"):
            if not isinstance(weights[key], str):
                # explicit matrices only fit one system; check against the full network
                dim = n_full if key != "R" else plant.n_inputs * len(paths)
                if weights[key].shape != (dim, dim):
                    raise self.err(f"is {weights[key].shape[0]}x{weights[key].shape[1]}, "
                                   f"expected {dim}x{dim} for the full network",
                                   "weights", key)
        if x0.shape[0] not in (plant.n_states, n_full):
            raise self.err(f"has {x0.shape[0]} entries; expected {plant.n_states} (plant) "
                           f"or {n_full} (augmented)", "x0")
        cfg.weights_for(build_augmented(network, actions))
        return cfg
