"""Serialization of solved schedules, partition policies and simulation CSVs.

Schedules and policies are JSON documents. Floats are written with Python's
shortest round-trip representation, so write -> read reproduces every
matrix bit for bit. CSV numbers use 17 significant digits.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .dynamic_solver import PartitionPolicy, QuadConstraint, Region
from .static_solver import GainSchedule

FORMAT_VERSION = 1


def _mat(a: np.ndarray) -> list:
    return np.asarray(a, dtype=float).tolist()


def _label(x):
    return list(x) if isinstance(x, tuple) else x


def _unlabel(x):
    return tuple(x) if isinstance(x, list) else x


def gain_schedule_to_dict(g: GainSchedule, meta: dict | None = None) -> dict:
    return {
        "kind": "gain_schedule",
        "version": FORMAT_VERSION,
        "name": g.name,
        "actions": list(g.actions),
        "K": [_mat(K) for K in g.K],
        "P": [_mat(P) for P in g.P],
        "meta": meta or {},
    }


def gain_schedule_from_dict(d: dict) -> GainSchedule:
    if d.get("kind") != "gain_schedule":
        raise ValueError(f"not a gain schedule document (kind={d.get('kind')!r})")
    return GainSchedule(tuple(np.array(K, dtype=float) for K in d["K"]),
                        tuple(np.array(P, dtype=float) for P in d["P"]),
                        tuple(int(a) for a in d["actions"]), d.get("name", ""))


def _region_to_dict(r: Region) -> dict:
    return {
        "constraints": [{"Y": _mat(c.Y), "relation": c.relation} for c in r.constraints],
        "action": r.action,
        "gain": _mat(r.gain),
        "value": _mat(r.value),
        "optimal": r.optimal,
        "successors": None if r.successors is None else list(r.successors),
    }


def _region_from_dict(d: dict) -> Region:
    return Region(
        tuple(QuadConstraint(np.array(c["Y"], dtype=float), c["relation"])
              for c in d["constraints"]),
        int(d["action"]),
        np.array(d["gain"], dtype=float),
        np.array(d["value"], dtype=float),
        bool(d["optimal"]),
        None if d["successors"] is None else tuple(int(j) for j in d["successors"]),
    )


def policy_to_dict(pol: PartitionPolicy, meta: dict | None = None) -> dict:
    return {
        "kind": "partition_policy",
        "version": FORMAT_VERSION,
        "horizon": pol.N,
        "action_labels": [_label(a) for a in pol.action_labels],
        "terminal": _mat(pol.terminal),
        "census": pol.census,
        "steps": [[_region_to_dict(r) for r in regions] for regions in pol.steps],
        "meta": meta or {},
    }


def policy_from_dict(d: dict) -> PartitionPolicy:
    if d.get("kind") != "partition_policy":
        raise ValueError(f"not a partition policy document (kind={d.get('kind')!r})")
    steps = [[_region_from_dict(r) for r in regions] for regions in d["steps"]]
    return PartitionPolicy(steps, np.array(d["terminal"], dtype=float),
                           tuple(_unlabel(a) for a in d.get("action_labels", [])),
                           list(d.get("census", [])))


def write_json(path, doc: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, allow_nan=False) + "\n")
    return path


def read_document(path) -> dict:
    return json.loads(Path(path).read_text())


def load_solution(path) -> GainSchedule | PartitionPolicy:
    """Read either kind of solution file."""
    d = read_document(path)
    kind = d.get("kind")
    if kind == "gain_schedule":
        return gain_schedule_from_dict(d)
    if kind == "partition_policy":
        return policy_from_dict(d)
    raise ValueError(f"{path}: unknown document kind {kind!r}")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(v) for v in row])


def write_csv_bundle(out_dir, report) -> list[Path]:
    """costs.csv, traj_mean.csv, actuation.csv and actions.csv for a SimReport."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    p = out / "costs.csv"
    _write_rows(p, ["replicate", "cost"], enumerate(report.costs))
    written.append(p)

    p = out / "traj_mean.csv"
    if report.traj_mean is not None:
        d = report.traj_mean.shape[1]
        header = (["k"] + [f"mean_x{i + 1}" for i in range(d)]
                  + [f"min_x{i + 1}" for i in range(d)] + [f"max_x{i + 1}" for i in range(d)])
        rows = ([k, *report.traj_mean[k], *report.traj_min[k], *report.traj_max[k]]
                for k in range(len(report.traj_mean)))
    else:
        header, rows = ["k"], []
    _write_rows(p, header, rows)
    written.append(p)

    p = out / "actuation.csv"
    if report.actuation is not None:
        m = report.actuation.shape[1]
        header = ["k"] + [f"v{i + 1}" for i in range(m)]
        rows = ([k, *report.actuation[k]] for k in range(len(report.actuation)))
    else:
        header, rows = ["k"], []
    _write_rows(p, header, rows)
    written.append(p)

    p = out / "actions.csv"
    counts = report.action_counts
    total = report.replicates
    rows = ([k, a, counts[k, a] / total]
            for k in range(counts.shape[0]) for a in range(counts.shape[1]) if counts[k, a])
    _write_rows(p, ["k", "action", "frequency"], rows)
    written.append(p)
    return written
