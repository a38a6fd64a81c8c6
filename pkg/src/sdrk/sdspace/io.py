"""Field snapshots: CSV of solution-point values plus a JSON sidecar."""

import csv
import json
import os

import numpy as np

from .. import _io
from .equations import EquationSet
from .residual import SDField


def sidecar_path(path):
    root, _ = os.path.splitext(os.fspath(path))
    return root + ".json"


def write_field(path, field, mesh_descriptor, time=0.0):
    v = field.values
    C, n, _, V = v.shape
    c, i, j = np.meshgrid(np.arange(C), np.arange(n), np.arange(n), indexing="ij")
    flat = v.reshape(-1, V)
    rows = [(int(a), int(b), int(d), *map(float, q))
            for a, b, d, q in zip(c.ravel(), i.ravel(), j.ravel(), flat)]
    header = ["cell", "i", "j"] + [f"var{k}" for k in range(V)]
    _io.atomic_write_text(path, _io.csv_text(header, rows))
    meta = {"p": field.p, "mesh": mesh_descriptor, "equation_set": field.eqset.describe(),
            "time": float(time)}
    _io.write_json(sidecar_path(path), meta)


def read_field(path):
    with open(sidecar_path(path), encoding="utf-8") as fh:
        meta = json.load(fh)
    eq_desc = dict(meta["equation_set"])
    variant = eq_desc.pop("variant")
    if "a" in eq_desc:
        eq_desc["a"] = tuple(eq_desc["a"])
    eqset = EquationSet(variant, eq_desc)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(x) for x in r] for r in reader if r])
    n = meta["p"] + 1
    V = len(header) - 3
    C = int(data[:, 0].max()) + 1 if data.size else 0
    values = np.empty((C, n, n, V))
    idx = data[:, :3].astype(int)
    values[idx[:, 0], idx[:, 1], idx[:, 2]] = data[:, 3:]
    return SDField(values, eqset), meta
