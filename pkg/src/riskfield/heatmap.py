"""Heatmap export: PGM (P2/P5) and CSV grid dumps with a JSON sidecar.

PGM values are min-max normalized to 16 bit. Rows are written north-up:
row 0 of the file is the maximum-y grid row. The sidecar records the grid
pose, the normalization constants, and the row convention so raw values
can be recovered.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geometry import RiskGrid

PGM_MAXVAL = 65535


def _north_up(values: np.ndarray) -> np.ndarray:
    return values[::-1, :]


def write_pgm(riskgrid: RiskGrid, path, binary: bool = True) -> None:
    """16-bit PGM, min-max normalized; P5 (binary) by default, P2 on request."""
    vals = _north_up(riskgrid.values)
    vmin = float(vals.min())
    vmax = float(vals.max())
    span = vmax - vmin
    if span > 0:
        scaled = np.round((vals - vmin) / span * PGM_MAXVAL).astype(np.uint16)
    else:
        scaled = np.zeros_like(vals, dtype=np.uint16)
    h, w = scaled.shape
    header = f"{'P5' if binary else 'P2'}\n{w} {h}\n{PGM_MAXVAL}\n"
    if binary:
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(scaled.astype(">u2").tobytes())
    else:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(header)
            for row in scaled:
                fh.write(" ".join(str(int(v)) for v in row) + "\n")


def read_pgm(path) -> np.ndarray:
    """Read back a P2/P5 PGM written by write_pgm (for round-trip checks)."""
    with open(path, "rb") as fh:
        data = fh.read()
    # header is exactly three lines (magic, dims, maxval); the raster starts
    # right after the third newline, so binary data is never split-mangled
    third_nl = -1
    for _ in range(3):
        third_nl = data.index(b"\n", third_nl + 1)
    magic, dims, maxval_s = data[:third_nl].split(b"\n")
    w, h = (int(t) for t in dims.split())
    maxval = int(maxval_s)
    body = data[third_nl + 1 :]
    if magic == b"P5":
        arr = np.frombuffer(body[: w * h * 2], dtype=">u2").reshape(h, w).astype(np.uint16)
    elif magic == b"P2":
        arr = np.array(body.split(), dtype=np.uint16).reshape(h, w)
    else:
        raise ValueError(f"{path}: not a PGM file")
    if maxval != PGM_MAXVAL:
        raise ValueError(f"{path}: unexpected maxval {maxval}")
    return arr


def write_csv(riskgrid: RiskGrid, path) -> None:
    """Raw values, one text row per grid row (north-up, matching the PGM)."""
    vals = _north_up(riskgrid.values)
    with open(path, "w", encoding="ascii") as fh:
        for row in vals:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_csv(path) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            rows.append([float(tok) for tok in line.strip().split(",")])
    return _north_up(np.asarray(rows))


def write_sidecar(riskgrid: RiskGrid, path, extra: dict | None = None) -> None:
    vals = riskgrid.values
    grid = riskgrid.grid
    meta = {
        "center": [grid.center[0], grid.center[1]],
        "extent": grid.extent,
        "resolution": grid.resolution,
        "orientation": grid.orientation,
        "cells_per_axis": grid.n,
        "row_order": "north_up",
        "value_min": float(vals.min()),
        "value_max": float(vals.max()),
        "pgm_maxval": PGM_MAXVAL,
    }
    if extra:
        meta.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


def export_heatmap(riskgrid: RiskGrid, stem, formats=("pgm", "csv"), binary_pgm: bool = True, extra: dict | None = None) -> list[str]:
    """Write the requested formats plus one shared sidecar; returns paths."""
    stem = Path(stem)
    written = []
    if "pgm" in formats:
        p = stem.with_suffix(".pgm")
        write_pgm(riskgrid, p, binary=binary_pgm)
        written.append(str(p))
    if "csv" in formats:
        p = stem.with_suffix(".csv")
        write_csv(riskgrid, p)
        written.append(str(p))
    side = stem.with_suffix(".meta.json")
    write_sidecar(riskgrid, side, extra=extra)
    written.append(str(side))
    return written
