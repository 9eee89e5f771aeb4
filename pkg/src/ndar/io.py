"""Text file formats: networks, panels, parameter sets and JSON output.

Floats are written with 17 significant digits so that a value survives a
write/read cycle unchanged.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from ndar import __version__
from ndar.exceptions import NdarError, SchemaError
from ndar.model import NdarParams, Panel
from ndar.network import Network

__all__ = [
    "read_network",
    "write_edge_list",
    "write_dense",
    "read_panel",
    "write_panel",
    "sidecar_path",
    "read_params",
    "read_json",
    "write_json",
    "file_digest",
    "metadata",
    "FLOAT_FMT",
]

FLOAT_FMT = "%.17g"


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def metadata(command: str, seed: int | None = None, inputs: list[str | Path] = ()) -> dict:
    """Provenance block stored next to every output."""
    return {
        "tool": "ndar",
        "version": __version__,
        "command": command,
        "seed": seed,
        "inputs": {str(p): file_digest(p) for p in inputs},
    }


def _clean(obj: Any) -> Any:
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def write_json(obj: Any, path: str | Path) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2) + "\n")


def dumps(obj: Any) -> str:
    return json.dumps(_clean(obj), indent=2)


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


# ----------------------------------------------------------------------
# Networks

def write_edge_list(net: Network, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("src,dst\n")
        for i, j in net.edges():
            fh.write(f"{i},{j}\n")


def write_dense(net: Network, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        for row in net.adjacency:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def _parse_int(text: str, path: Path, row: int, col: int) -> int:
    try:
        value = int(text.strip())
    except ValueError:
        raise SchemaError(f"{path}: row {row}, column {col}: expected an integer, got {text!r}") from None
    return value


def read_network(path: str | Path, n_nodes: int | None = None) -> Network:
    """Load an edge list (header ``src,dst``) or a dense 0/1 matrix."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise SchemaError(f"{path}: empty network file")
    try:
        if [c.strip() for c in rows[0]] == ["src", "dst"]:
            edges = []
            for k, r in enumerate(rows[1:], start=2):
                if len(r) != 2:
                    raise SchemaError(f"{path}: row {k}: expected 2 columns, got {len(r)}")
                edges.append((_parse_int(r[0], path, k, 1), _parse_int(r[1], path, k, 2)))
            return Network.from_edges(np.array(edges, dtype=np.int64).reshape(-1, 2), n_nodes)
        n = len(rows)
        a = np.zeros((n, n), dtype=np.int8)
        for k, r in enumerate(rows, start=1):
            if len(r) != n:
                raise SchemaError(f"{path}: row {k}: expected {n} columns, got {len(r)}")
            for c, text in enumerate(r, start=1):
                v = _parse_int(text, path, k, c)
                if v not in (0, 1):
                    raise SchemaError(f"{path}: row {k}, column {c}: entry must be 0 or 1")
                a[k - 1, c - 1] = v
        return Network(a)
    except SchemaError:
        raise
    except NdarError as exc:
        raise SchemaError(f"{path}: {exc}") from None


# ----------------------------------------------------------------------
# Panels

def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def write_panel(panel: Panel, path: str | Path, meta: dict | None = None) -> None:
    """Write ``T + m`` rows of ``N`` reals plus the ``{"m": ...}`` sidecar."""
    np.savetxt(path, panel.full(), fmt=FLOAT_FMT, delimiter=",")
    side = {"m": panel.depth, "n_nodes": panel.n_nodes, "t_len": panel.t_len}
    if meta:
        side["metadata"] = meta
    write_json(side, sidecar_path(path))


def read_panel(path: str | Path, presample_rows: int | None = None) -> Panel:
    """Load a panel; the presample depth comes from the argument or the
    sidecar JSON."""
    path = Path(path)
    if presample_rows is None:
        side = sidecar_path(path)
        if not side.exists():
            raise SchemaError(f"{path}: no presample depth given and no sidecar {side.name}")
        info = read_json(side)
        if not isinstance(info, dict) or "m" not in info:
            raise SchemaError(f"{side}: sidecar must be an object with key 'm'")
        presample_rows = info["m"]
    if int(presample_rows) != presample_rows or presample_rows < 0:
        raise SchemaError(f"presample rows must be a non-negative integer, got {presample_rows!r}")
    data = []
    width = None
    with open(path, newline="") as fh:
        for k, r in enumerate(csv.reader(fh), start=1):
            if not r:
                continue
            if width is None:
                width = len(r)
            elif len(r) != width:
                raise SchemaError(f"{path}: row {k}: expected {width} columns, got {len(r)}")
            vals = []
            for c, text in enumerate(r, start=1):
                try:
                    v = float(text)
                except ValueError:
                    raise SchemaError(f"{path}: row {k}, column {c}: not a number: {text!r}") from None
                if not math.isfinite(v):
                    raise SchemaError(f"{path}: row {k}, column {c}: non-finite value")
                vals.append(v)
            data.append(vals)
    if not data:
        raise SchemaError(f"{path}: empty panel")
    m = int(presample_rows)
    if m >= len(data):
        raise SchemaError(f"{path}: presample depth {m} leaves no observations ({len(data)} rows)")
    arr = np.array(data)
    return Panel(arr[:m], arr[m:])


def read_params(path: str | Path) -> NdarParams:
    d = read_json(path)
    if not isinstance(d, dict):
        raise SchemaError(f"{path}: params must be a JSON object")
    try:
        return NdarParams.from_dict(d)
    except NdarError as exc:
        raise SchemaError(f"{path}: {exc}") from None
