"""File formats: 16-bit binary PGM rasters, CSV tables and JSON reports."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .kernels import KernelFamily
from .sampling import MeasurementSet

PGM_MAXVAL = 65535


def write_pgm(path, image, vmax=None):
    """Write ``image`` as binary 16-bit PGM scaled so ``vmax`` maps to 65535.

    ``vmax`` defaults to ``max(1, image.max())`` so rasters in ``[0, 1]`` keep
    their absolute scale.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("PGM output needs a 2-D raster")
    if vmax is None:
        vmax = max(1.0, float(image.max()))
    q = np.rint(np.clip(image / vmax, 0.0, 1.0) * PGM_MAXVAL).astype(">u2")
    h, w = q.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{PGM_MAXVAL}\n".encode("ascii"))
        fh.write(q.tobytes())
    return vmax


def read_pgm(path, vmax=1.0):
    """Read a binary PGM written by :func:`write_pgm` back to floats."""
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end].decode("ascii"))
        pos = end
    pos += 1
    if tokens[0] != "P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    dtype = ">u2" if maxval > 255 else "u1"
    q = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos).reshape(h, w)
    return q.astype(float) / maxval * vmax


def write_raster_csv(path, image):
    """Raster as CSV with a header row of column indices."""
    image = np.asarray(image, dtype=float)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([f"c{j}" for j in range(image.shape[1])])
        for row in image:
            wr.writerow([repr(float(v)) for v in row])


def read_raster_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r] for r in rows[1:]])


def write_measurements_csv(path, meas: MeasurementSet):
    """One row per pixel: scan index ``k``, row ``i``, column ``j`` and value."""
    m = meas.m
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["k", "i", "j", "value"])
        for k, v in enumerate(meas.flat):
            j, i = divmod(k, m)
            wr.writerow([k, i, j, repr(float(v))])


def read_measurements_csv(path, family=None) -> MeasurementSet:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        rows = [(int(r["k"]), float(r["value"])) for r in rd]
    m = int(round(math.sqrt(len(rows))))
    if m * m != len(rows):
        raise ValueError("measurement CSV does not hold a square grid")
    flat = np.zeros(m * m)
    for k, v in rows:
        flat[k] = v
    return MeasurementSet(flat, family if family is not None else KernelFamily())


def write_table_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for r in rows:
            wr.writerow([_cell(v) for v in r])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "inf" if math.isinf(v) else repr(float(v))
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return None
        return v
    return obj


def write_json(path, data):
    """JSON with numpy values converted; infinities become the strings ``"inf"``."""
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
