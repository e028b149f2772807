"""Deterministic writers for CSV tables, 16-bit PGM maps and key=value reports.

Floats are written in Python's shortest round-trip ``repr`` so a file read back
reproduces the same doubles; missing values are empty fields.

PGM intensity mappings (maxval 65535):

* class maps: real 0, error 16384, ep 32768, complex 65535;
* probability maps: ``log10(max(p, 1e-12))`` mapped linearly from
  ``[-12, log10(max p)]`` onto ``[0, 65535]``; an all-zero map is black.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CLASS_LEVELS = {"real": 0, "error": 16384, "ep": 32768, "complex": 65535}
PROBABILITY_FLOOR = 1e-12
MAXVAL = 65535


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
            count += 1
    return count


def read_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_pgm(path, image: np.ndarray) -> None:
    """Binary P5 greymap, 16-bit big-endian, rows top to bottom."""
    img = np.asarray(image)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("PGM image must be a non-empty 2-d array")
    if img.min() < 0 or img.max() > MAXVAL:
        raise ValueError("PGM levels must lie in [0, 65535]")
    rows, cols = img.shape
    header = f"P5\n{cols} {rows}\n{MAXVAL}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.astype(">u2").tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos].decode("ascii"))
    pos += 1
    magic, cols, rows, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic != "P5" or maxval != MAXVAL:
        raise ValueError(f"unsupported PGM header {fields}")
    return np.frombuffer(data[pos:pos + 2 * rows * cols], dtype=">u2").reshape(rows, cols)


def class_levels(labels: np.ndarray) -> np.ndarray:
    out = np.empty(labels.shape, dtype=np.uint16)
    for idx, label in np.ndenumerate(labels):
        out[idx] = CLASS_LEVELS[label]
    return out


def probability_levels(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    top = float(p.max()) if p.size else 0.0
    if not top > PROBABILITY_FLOOR:
        return np.zeros(p.shape, dtype=np.uint16)
    lo = math.log10(PROBABILITY_FLOOR)
    hi = math.log10(top)
    scaled = (np.log10(np.maximum(p, PROBABILITY_FLOOR)) - lo) / (hi - lo)
    return np.rint(np.clip(scaled, 0.0, 1.0) * MAXVAL).astype(np.uint16)


def write_report(path, items: Iterable[tuple]) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for key, value in items:
            fh.write(f"{key}={fmt(value)}\n")


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line:
            key, value = line.split("=", 1)
            out[key] = value
    return out
