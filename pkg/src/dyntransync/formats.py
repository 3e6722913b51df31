"""JSON and CSV forms of graph sequences, observations and trajectories.

JSON layouts::

    graph:        {"n": int, "T": int, "edges": [[[i, j], ...] per step]}
    observations: graph fields plus "values": [[y, ...] per step]
    trajectory:   {"n": int, "T": int, "blocks": [[z_0, ..., z_{n-1}] per step]}

CSV layouts use a header row: observations ``step,i,j,y``; trajectories
``step,item,z``. Floats are written with ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import DimensionError
from .graphseq import GraphSequence, ObservationSet, StrengthTrajectory


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def graph_to_dict(g: GraphSequence) -> dict:
    return {"n": g.n, "T": g.horizon_T, "edges": [e.tolist() for e in g.edges]}


def graph_from_dict(d: dict) -> GraphSequence:
    edges = tuple(np.asarray(step, dtype=np.int64).reshape(-1, 2) for step in d["edges"])
    return GraphSequence(int(d["n"]), int(d["T"]), edges)


def observations_to_dict(obs: ObservationSet) -> dict:
    d = graph_to_dict(obs.graph)
    d["values"] = [v.tolist() for v in obs.values]
    return d


def observations_from_dict(d: dict) -> ObservationSet:
    return ObservationSet(graph_from_dict(d), tuple(np.asarray(v, dtype=float) for v in d["values"]))


def trajectory_to_dict(z: StrengthTrajectory) -> dict:
    return {"n": z.n, "T": z.horizon_T, "blocks": z.blocks.tolist()}


def trajectory_from_dict(d: dict) -> StrengthTrajectory:
    z = StrengthTrajectory(np.asarray(d["blocks"], dtype=float))
    if z.n != int(d["n"]) or z.horizon_T != int(d["T"]):
        raise DimensionError("trajectory blocks disagree with declared n/T")
    return z


def observations_to_csv(obs: ObservationSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "i", "j", "y"])
    for k, i, j, y in obs.records():
        w.writerow([k, i, j, repr(y)])
    return buf.getvalue()


def observations_from_csv(text: str, n: int | None = None, horizon_T: int | None = None) -> ObservationSet:
    """Parse ``step,i,j,y`` rows. Missing ``n``/``horizon_T`` are inferred from the largest indices."""
    rows = [(int(r["step"]), int(r["i"]), int(r["j"]), float(r["y"]))
            for r in csv.DictReader(io.StringIO(text))]
    if n is None:
        n = max(max(i, j) for _, i, j, _ in rows) + 1
    if horizon_T is None:
        horizon_T = max(k for k, *_ in rows)
    return ObservationSet.from_records(n, horizon_T, rows)


def trajectory_to_csv(z: StrengthTrajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "item", "z"])
    for k, block in enumerate(z.blocks.tolist()):
        for i, v in enumerate(block):
            w.writerow([k, i, repr(v)])
    return buf.getvalue()


def load_observations(path) -> ObservationSet:
    """Read observations from a ``.json`` or ``.csv`` file."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return observations_from_csv(path.read_text(encoding="utf-8"))
    return observations_from_dict(read_json(path))


def load_trajectory(path) -> StrengthTrajectory:
    return trajectory_from_dict(read_json(path))
