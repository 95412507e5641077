"""Trajectory CSV and model file formats.

Trajectory CSV::

    # schema_version: 1
    traj_id,t,x_0,...,x_{n-1}[,u_0,...,u_{m-1}]

One row per state, sorted by ``(traj_id, t)``.  The last state of a controlled
trajectory has empty ``u`` cells.

Model file: one ``field: <JSON value>`` per line, fields in a fixed order::

    schema_version: 1
    type: linear | koopman
    n, m, eps, A, B, lifting, clip_report

All floats are written with 17 significant digits so binary64 values survive
a round trip bit for bit.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import asdict
from typing import Union

import numpy as np

from .clip import ClipReport, LinearModel
from .errors import DimensionMismatch, ParseError, VersionMismatch
from .koopman import KoopmanModel, LiftingSpec
from .sysid import TrajectoryDataset

SCHEMA_VERSION = 1
MODEL_FIELDS = ("schema_version", "type", "n", "m", "eps", "A", "B", "lifting", "clip_report")

Model = Union[LinearModel, KoopmanModel]


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _json_value(value) -> str:
    """JSON text with floats at full precision."""
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return json.dumps(str(float(value)))  # inf cond_modal is stored as a string
        return fmt_float(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, np.ndarray):
        return _json_value(value.tolist())
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_json_value(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_json_value(v)}" for k, v in value.items()) + "}"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps_model(model: Model) -> str:
    if isinstance(model, KoopmanModel):
        fields = dict(type="koopman", n=model.spec.lifted_dim, m=0, eps=model.eps, A=model.K, B=None,
                      lifting={"degree": model.spec.degree, "n": model.spec.n})
    else:
        fields = dict(type="linear", n=model.n, m=model.m, eps=model.eps, A=model.A, B=model.B, lifting=None)
    fields["clip_report"] = None if model.clip_report is None else asdict(model.clip_report)
    lines = [f"schema_version: {SCHEMA_VERSION}"]
    lines += [f"{name}: {_json_value(fields[name])}" for name in MODEL_FIELDS[1:]]
    return "\n".join(lines) + "\n"


def save_model(model: Model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model))


def _matrix(value, rows, cols, field):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"not a numeric matrix: {exc}", field=field) from None
    if arr.shape != (rows, cols):
        raise ParseError(f"expected shape ({rows}, {cols}), got {arr.shape}", field=field)
    return arr


def _float(value) -> float:
    return float(value)  # also accepts the "inf" string written for infinite cond_modal


def loads_model(text: str) -> Model:
    fields, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        name, sep, rest = raw.partition(":")
        name = name.strip()
        if not sep:
            raise ParseError("expected 'field: value'", line=lineno)
        if name not in MODEL_FIELDS:
            raise ParseError("unknown field", line=lineno, field=name)
        try:
            fields[name] = json.loads(rest)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad value ({exc.msg} at column {exc.colno + len(name) + 1})",
                             line=lineno, field=name) from None
        lines[name] = lineno

    if "schema_version" not in fields:
        raise ParseError("missing field", field="schema_version")
    if fields["schema_version"] != SCHEMA_VERSION:
        raise VersionMismatch(f"model schema_version {fields['schema_version']!r}, expected {SCHEMA_VERSION}")
    for name in MODEL_FIELDS:
        if name not in fields:
            raise ParseError("missing field", field=name)

    kind, n, m = fields["type"], fields["n"], fields["m"]
    if not isinstance(n, int) or n < 1 or not isinstance(m, int) or m < 0:
        raise ParseError("n and m must be nonnegative integers", line=lines["n"], field="n")
    A = _matrix(fields["A"], n, n, "A")
    report = None
    if fields["clip_report"] is not None:
        try:
            r = dict(fields["clip_report"])
            report = ClipReport(eps=_float(r["eps"]), n_clipped=int(r["n_clipped"]),
                                radius_before=_float(r["radius_before"]), radius_after=_float(r["radius_after"]),
                                perturbation_applied=_float(r["perturbation_applied"]),
                                cond_modal=_float(r["cond_modal"]), rule=str(r.get("rule", "margin")))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad clip report: {exc}", line=lines["clip_report"], field="clip_report") from None
    eps = float(fields["eps"])

    if kind == "koopman":
        lifting = fields["lifting"]
        try:
            spec = LiftingSpec(n=int(lifting["n"]), degree=int(lifting["degree"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad lifting: {exc}", line=lines["lifting"], field="lifting") from None
        if spec.lifted_dim != n:
            raise ParseError(f"lifting implies dimension {spec.lifted_dim}, n says {n}", field="lifting")
        return KoopmanModel(A, spec, eps, report)
    if kind == "linear":
        B = None if m == 0 else _matrix(fields["B"], n, m, "B")
        return LinearModel(A, B, eps, report)
    raise ParseError(f"unknown model type {kind!r}", line=lines["type"], field="type")


def load_model(path) -> Model:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_model(fh.read())


def dumps_trajectories(dataset: TrajectoryDataset) -> str:
    n, m = dataset.state_dim, dataset.input_dim
    buf = _io.StringIO()
    buf.write(f"# schema_version: {SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["traj_id", "t"] + [f"x_{i}" for i in range(n)] + [f"u_{i}" for i in range(m)])
    for j, states in enumerate(dataset.states):
        for t, x in enumerate(states):
            row = [j, t] + [fmt_float(v) for v in x]
            if m:
                u = dataset.inputs[j]
                row += [fmt_float(v) for v in u[t]] if t < len(u) else [""] * m
            writer.writerow(row)
    return buf.getvalue()


def save_trajectories(dataset: TrajectoryDataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps_trajectories(dataset))


def loads_trajectories(text: str) -> TrajectoryDataset:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ParseError("missing '# schema_version' header", line=1, field="schema_version")
    key, _, value = lines[0].lstrip("#").partition(":")
    if key.strip() != "schema_version":
        raise ParseError("missing '# schema_version' header", line=1, field="schema_version")
    try:
        version = int(value)
    except ValueError:
        raise ParseError("bad schema_version", line=1, field="schema_version") from None
    if version != SCHEMA_VERSION:
        raise VersionMismatch(f"trajectory schema_version {version}, expected {SCHEMA_VERSION}")

    reader = csv.reader(lines[1:])
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("missing column header", line=2) from None
    if header[:2] != ["traj_id", "t"]:
        raise ParseError("header must start with traj_id,t", line=2)
    xcols = [h for h in header[2:] if h.startswith("x_")]
    ucols = [h for h in header[2:] if h.startswith("u_")]
    n, m = len(xcols), len(ucols)
    if n == 0 or header[2:] != [f"x_{i}" for i in range(n)] + [f"u_{i}" for i in range(m)]:
        raise ParseError("columns must be x_0..x_{n-1} then u_0..u_{m-1}", line=2)

    trajs = {}
    order = []
    for offset, row in enumerate(reader):
        lineno = offset + 3
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, got {len(row)}", line=lineno)
        try:
            tid, t = int(row[0]), int(row[1])
            x = [float(v) for v in row[2:2 + n]]
            ucells = row[2 + n:]
            u = None if all(c == "" for c in ucells) else [float(v) for v in ucells]
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if tid not in trajs:
            if order and tid < order[-1]:
                raise ParseError("rows must be sorted by traj_id", line=lineno, field="traj_id")
            trajs[tid] = ([], [], [])
            order.append(tid)
        elif tid != order[-1]:
            raise ParseError("rows of a trajectory must be contiguous", line=lineno, field="traj_id")
        xs, us, rows = trajs[tid]
        if t != len(xs):
            raise ParseError(f"expected t={len(xs)}, got {t}", line=lineno, field="t")
        xs.append(x)
        us.append(u)
        rows.append(lineno)

    if not trajs:
        raise ParseError("no data rows")
    states, inputs = [], []
    for tid in order:
        xs, us, rows = trajs[tid]
        if len(xs) < 2:
            raise DimensionMismatch(f"trajectory {tid} has {len(xs)} state(s); need at least 2")
        states.append(np.array(xs))
        if m:
            if us[-1] is not None:
                raise ParseError("last state of a trajectory must have empty inputs", line=rows[-1])
            missing = [rows[i] for i, u in enumerate(us[:-1]) if u is None]
            if missing:
                raise ParseError("missing inputs", line=missing[0])
            inputs.append(np.array(us[:-1]))
    try:
        return TrajectoryDataset(tuple(states), tuple(inputs) if m else None)
    except DimensionMismatch:
        raise
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def load_trajectories(path) -> TrajectoryDataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return loads_trajectories(fh.read())
