"""CSV and edge-list file formats.

Design CSV: a header row of column names followed by one row per sample.
Missing cells hold the literal token ``NA``; an empty cell is an error.

Graph file: first line ``p=<count>``, then one ``i j`` edge per line
(0-based). Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import MaskedMatrix, SparsityGraph
from .errors import UnreadableInput

NA = "NA"


def format_float(x: float) -> str:
    """Shortest text that parses back to the same double."""
    return repr(float(x))


@dataclass
class CsvTable:
    masked: MaskedMatrix
    header: list
    tokens: list  # raw cell text, row-major, for byte-faithful rewrites


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def parse_masked_csv(text: str, source: str = "<string>") -> CsvTable:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows:
        raise UnreadableInput(f"{source}: empty file")
    first = [t.strip() for t in rows[0]]
    if all(t == NA or _is_number(t) for t in first):
        header = [f"x{j}" for j in range(len(first))]
        body = rows
    else:
        header = first
        body = rows[1:]
    if not body:
        raise UnreadableInput(f"{source}: no data rows")
    p = len(header)
    values = np.zeros((len(body), p))
    mask = np.zeros((len(body), p), dtype=bool)
    tokens = []
    for i, row in enumerate(body):
        row = [t.strip() for t in row]
        if len(row) != p:
            raise UnreadableInput(f"{source}: row {i + 1} has {len(row)} cells, expected {p}")
        for j, tok in enumerate(row):
            if tok == NA:
                continue
            if tok == "":
                raise UnreadableInput(f"{source}: empty cell at row {i + 1}, column {j + 1} (use NA)")
            try:
                values[i, j] = float(tok)
            except ValueError:
                raise UnreadableInput(f"{source}: bad number {tok!r} at row {i + 1}, column {j + 1}") from None
            mask[i, j] = True
        tokens.append(row)
    try:
        masked = MaskedMatrix(values, mask)
    except Exception as exc:
        raise UnreadableInput(f"{source}: {exc}") from None
    return CsvTable(masked, header, tokens)


def read_masked_csv(path) -> CsvTable:
    try:
        text = Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableInput(f"cannot read {path}: {exc}") from None
    return parse_masked_csv(text, str(path))


def format_masked_csv(masked: MaskedMatrix, header=None) -> str:
    header = header or [f"x{j}" for j in range(masked.p)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i in range(masked.n):
        w.writerow([format_float(masked.values[i, j]) if masked.mask[i, j] else NA for j in range(masked.p)])
    return buf.getvalue()


def write_masked_csv(masked: MaskedMatrix, path, header=None) -> None:
    Path(path).write_text(format_masked_csv(masked, header))


def write_dense_csv(data, path, header=None, mask=None, tokens=None) -> None:
    """Write a dense matrix; observed cells reuse their original text when given."""
    data = np.asarray(data)
    header = header or [f"x{j}" for j in range(data.shape[1])]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i in range(data.shape[0]):
        row = []
        for j in range(data.shape[1]):
            if tokens is not None and mask is not None and mask[i, j]:
                row.append(tokens[i][j])
            else:
                row.append(format_float(data[i, j]))
        w.writerow(row)
    Path(path).write_text(buf.getvalue())


def read_dense_csv(path) -> np.ndarray:
    table = read_masked_csv(path)
    if not table.masked.mask.all():
        raise UnreadableInput(f"{path}: dense input must not contain {NA}")
    return np.asarray(table.masked.values)


def read_vector(path) -> np.ndarray:
    """One number per line (a single header line is tolerated)."""
    try:
        lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableInput(f"cannot read {path}: {exc}") from None
    if lines and not _is_number(lines[0]):
        lines = lines[1:]
    try:
        return np.array([float(ln) for ln in lines])
    except ValueError as exc:
        raise UnreadableInput(f"{path}: {exc}") from None


def write_vector(v, path) -> None:
    Path(path).write_text("".join(format_float(x) + "\n" for x in np.ravel(v)))


def read_graph(path) -> SparsityGraph:
    try:
        lines = Path(path).read_text().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableInput(f"cannot read {path}: {exc}") from None
    lines = [ln.split("#", 1)[0].strip() for ln in lines]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("p="):
        raise UnreadableInput(f"{path}: first line must be 'p=<count>'")
    try:
        p = int(lines[0][2:])
        edges = [tuple(int(t) for t in ln.split()) for ln in lines[1:]]
    except ValueError as exc:
        raise UnreadableInput(f"{path}: {exc}") from None
    if any(len(e) != 2 for e in edges):
        raise UnreadableInput(f"{path}: each edge line needs exactly two indices")
    try:
        return SparsityGraph.from_edges(p, edges)
    except Exception as exc:
        raise UnreadableInput(f"{path}: {exc}") from None


def write_graph(graph: SparsityGraph, path) -> None:
    Path(path).write_text(f"p={graph.p}\n" + "".join(f"{i} {j}\n" for i, j in graph.edges()))
