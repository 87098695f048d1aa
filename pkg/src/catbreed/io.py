"""Plain-text file formats.

Every file starts with ``#`` header lines; the first carries the format name
and the second a JSON metadata object (sorted keys, no timestamps) holding
whatever is needed to regenerate the file. Floats are written with 17
significant digits, so reading a file back reproduces the arrays exactly.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import DomainError, OutputError
from .fock import DensityMatrix, FockVector, State
from .phasespace import GridAxis, WignerGrid
from .sampler import Histogram2D, SampleSet
from .units import from_internal, to_internal

FLOAT_FMT = "%.17g"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n"


def _write(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _read(path) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _header(kind: str, meta: dict) -> str:
    return f"# catbreed {kind}\n# meta {json.dumps(_jsonable(meta), sort_keys=True)}\n"


def _parse_header(text: str, kind: str):
    lines = text.splitlines()
    if len(lines) < 2 or lines[0].strip() != f"# catbreed {kind}" or not lines[1].startswith("# meta "):
        raise DomainError(f"not a catbreed {kind} file")
    return json.loads(lines[1][len("# meta "):]), lines[2:]


def write_json(path, obj) -> Path:
    return _write(path, dumps_json(obj))


def read_json(path):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path} is not valid JSON: {exc}") from exc


# -- states ------------------------------------------------------------------


def state_to_dict(state: State, meta: dict | None = None) -> dict:
    pairs = lambda arr: [[float(v.real), float(v.imag)] for v in arr]  # noqa: E731
    if isinstance(state, FockVector):
        body = {"kind": "fock_vector", "amplitudes": pairs(state.amplitudes)}
    else:
        body = {"kind": "density_matrix", "entries": [pairs(row) for row in state.entries]}
    body["meta"] = _jsonable({**state.meta, **(meta or {})})
    return body


def state_from_dict(d: dict) -> State:
    meta = d.get("meta", {})
    if d.get("kind") == "fock_vector":
        return FockVector(np.array([complex(a, b) for a, b in d["amplitudes"]]), meta)
    if d.get("kind") == "density_matrix":
        return DensityMatrix(np.array([[complex(a, b) for a, b in row] for row in d["entries"]]), meta)
    raise DomainError("unknown state kind")


def write_state(path, state: State, meta: dict | None = None) -> Path:
    return write_json(path, state_to_dict(state, meta))


def read_state(path) -> State:
    return state_from_dict(read_json(path))


# -- Wigner grids --------------------------------------------------------------


def write_wigner_grid(path, grid: WignerGrid, meta: dict | None = None) -> Path:
    m = {**(meta or {}), "units": grid.units,
         "x_axis": [grid.x_axis.min, grid.x_axis.max, grid.x_axis.step],
         "p_axis": [grid.p_axis.min, grid.p_axis.max, grid.p_axis.step]}
    lines = [_header("wigner-grid", m), "# rows: x ascending; columns: p ascending\n"]
    lines += [" ".join(FLOAT_FMT % v for v in row) + "\n" for row in grid.values]
    return _write(path, "".join(lines))


def read_wigner_grid(path) -> WignerGrid:
    meta, rest = _parse_header(_read(path), "wigner-grid")
    rows = [ln for ln in rest if ln and not ln.startswith("#")]
    values = np.array([[float(t) for t in ln.split()] for ln in rows])
    return WignerGrid(GridAxis(*meta["x_axis"]), GridAxis(*meta["p_axis"]), values, meta.get("units", "internal"))


def write_pgm(path, values: np.ndarray, comment: str = "") -> Path:
    """Greyscale preview (binary PGM). Zero maps to mid-grey so negative regions stand out dark."""
    v = np.asarray(values, float)
    scale = max(np.abs(v).max(), 1e-300)
    img = np.clip(np.round(127.5 + 127.5 * v / scale), 0, 255).astype(np.uint8)
    img = img.T[::-1]  # p upwards, x to the right
    head = f"P5\n# {comment.replace(chr(10), ' ')}\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(head + img.tobytes())
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


# -- generic 2D tables (joint-density grids) ---------------------------------


def write_table(path, kind: str, axes: dict, values: np.ndarray, meta: dict | None = None) -> Path:
    m = {**(meta or {}), "axes": _jsonable(axes)}
    lines = [_header(kind, m)]
    lines += [" ".join(FLOAT_FMT % v for v in row) + "\n" for row in np.atleast_2d(values)]
    return _write(path, "".join(lines))


def read_table(path, kind: str):
    meta, rest = _parse_header(_read(path), kind)
    rows = [ln for ln in rest if ln and not ln.startswith("#")]
    return meta, np.array([[float(t) for t in ln.split()] for ln in rows])


# -- samples -----------------------------------------------------------------


def write_samples(path, samples: SampleSet, units: str = "homodyne", meta: dict | None = None) -> Path:
    """Columns ``x0 x1 theta_deg accepted``; lengths in ``units``."""
    si = samples.to_internal()
    m = {**si.provenance, **(meta or {}), "units": units, "seed": si.seed, "n": len(si)}
    x0 = from_internal(si.x0, units)
    x1 = from_internal(si.x1, units)
    th = np.degrees(si.theta)
    out = [_header("samples", m), "# x0 x1 theta_deg accepted\n"]
    out += [f"{FLOAT_FMT % a} {FLOAT_FMT % b} {FLOAT_FMT % t} {int(ok)}\n" for a, b, t, ok in zip(x0, x1, th, si.accepted)]
    return _write(path, "".join(out))


def read_samples(path) -> SampleSet:
    meta, rest = _parse_header(_read(path), "samples")
    rows = [ln.split() for ln in rest if ln and not ln.startswith("#")]
    units = meta.get("units", "internal")
    if rows:
        arr = np.array([[float(t) for t in r] for r in rows])
        x0, x1, th, ok = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3] != 0
    else:
        x0 = x1 = th = np.zeros(0)
        ok = np.zeros(0, bool)
    prov = {k: v for k, v in meta.items() if k not in ("units", "seed", "n")}
    # sample sets are kept in internal units; the file's units are undone here
    return SampleSet(to_internal(x0, units), to_internal(x1, units), np.radians(th), ok,
                     "internal", meta.get("seed"), prov)


def write_histogram(path, h: Histogram2D, meta: dict | None = None) -> Path:
    m = {**(meta or {}), "edges_x0": h.edges_x0, "edges_x1": h.edges_x1, "total": h.total, "overflow": h.overflow}
    out = [_header("histogram2d", m)]
    out += [" ".join(str(int(c)) for c in row) + "\n" for row in h.counts]
    return _write(path, "".join(out))


def read_histogram(path) -> Histogram2D:
    meta, rest = _parse_header(_read(path), "histogram2d")
    counts = np.array([[int(t) for t in ln.split()] for ln in rest if ln and not ln.startswith("#")], dtype=np.int64)
    return Histogram2D(np.array(meta["edges_x0"]), np.array(meta["edges_x1"]), counts, meta["total"], meta["overflow"])


def default_outdir(env_var: str = "CATBREED_OUTDIR") -> Path:
    return Path(os.environ.get(env_var, "catbreed-out"))
