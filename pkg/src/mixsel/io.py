"""CSV ingestion and emission.

External format: a header row of column names; the literal ``NA``
(case-sensitive) or an empty field marks a missing cell. Kinds come from a
sidecar schema (one ``name:kind`` line per column, kind in {cont, int, cat},
optionally ``name:cat:level1|level2``) or are inferred: numeric with a decimal
point/exponent -> cont, numeric integral and nonnegative -> int, otherwise cat
with levels mapped 1..m in sorted order. Level mappings always land in the run
manifest so results are reproducible.
"""
from __future__ import annotations

import csv

import numpy as np

from .data import CAT, CONT, INT, DataError, Dataset, VariableKind

MISSING_TOKEN = "NA"


def _is_missing(raw: str) -> bool:
    return raw == "" or raw == MISSING_TOKEN


def _numeric(raw: str):
    try:
        return float(raw)
    except ValueError:
        return None


def infer_kind(values: list[str]) -> str:
    """Kind of a column from its observed raw strings."""
    floats = []
    for raw in values:
        x = _numeric(raw)
        if x is None:
            return CAT
        floats.append((raw, x))
    if any(("." in raw) or ("e" in raw) or ("E" in raw) for raw, _ in floats):
        return CONT
    if any(x != np.floor(x) or x < 0 for _, x in floats):
        return CONT
    return INT


def read_schema(path: str) -> dict:
    """Parse ``name:kind[:lev1|lev2|...]`` lines into {name: (kind, levels)}."""
    out: dict[str, tuple[str, list[str] | None]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(":", 2)
            if len(parts) < 2:
                raise DataError(f"{path}:{lineno}: expected name:kind")
            name, kind = parts[0], parts[1]
            if kind not in (CONT, INT, CAT):
                raise DataError(f"{path}:{lineno}: unknown kind {kind!r}")
            levels = parts[2].split("|") if len(parts) == 3 else None
            if levels is not None and kind != CAT:
                raise DataError(f"{path}:{lineno}: only cat columns declare levels")
            out[name] = (kind, levels)
    return out


def read_csv(path: str, schema: dict | None = None):
    """Load a dataset; returns (Dataset, manifest info).

    The manifest info records, per column, the kind, whether it was declared
    or inferred, and the categorical level mapping.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh)
                if row and not (row[0].startswith("#") and len(row) == 1)]
    if len(rows) < 2:
        raise DataError(f"{path}: need a header row and at least one data row")
    names = [c.strip() for c in rows[0]]
    body = rows[1:]
    d = len(names)
    for r, row in enumerate(body, 2):
        if len(row) != d:
            raise DataError(f"{path}:{r}: expected {d} fields, got {len(row)}")
    cells = [[c.strip() for c in row] for row in body]
    n = len(cells)
    kinds: list[VariableKind] = []
    info = {"kinds": {}, "source": {}, "categorical_levels": {}}
    X = np.full((n, d), np.nan)
    cat_labels = {}
    for j, name in enumerate(names):
        observed = [cells[i][j] for i in range(n) if not _is_missing(cells[i][j])]
        declared = schema.get(name) if schema else None
        if schema is not None and declared is None:
            raise DataError(f"{path}: column {name!r} missing from the schema")
        tag, levels = declared if declared else (infer_kind(observed), None)
        info["source"][name] = "declared" if declared else "inferred"
        if tag == CAT:
            if levels is None:
                levels = sorted(set(observed))
            if len(levels) < 2:
                raise DataError(f"{path}: categorical column {name!r} needs >= 2 levels")
            code = {lab: h + 1 for h, lab in enumerate(levels)}
            kinds.append(VariableKind.categorical(len(levels)))
            cat_labels[j] = list(levels)
            info["categorical_levels"][name] = list(levels)
            for i in range(n):
                raw = cells[i][j]
                if _is_missing(raw):
                    continue
                if raw not in code:
                    raise DataError(
                        f"{path}: cell ({i + 1}, {name!r}) = {raw!r} is not a declared level")
                X[i, j] = code[raw]
        else:
            kinds.append(VariableKind.continuous() if tag == CONT
                         else VariableKind.integer())
            for i in range(n):
                raw = cells[i][j]
                if _is_missing(raw):
                    continue
                x = _numeric(raw)
                if x is None:
                    raise DataError(
                        f"{path}: cell ({i + 1}, {name!r}) = {raw!r} is not numeric")
                X[i, j] = x
        info["kinds"][name] = tag
    ds = Dataset(X, kinds, names=names, cat_labels=cat_labels)
    return ds, info


def write_csv(dataset: Dataset, path: str) -> None:
    """Emit the dataset in the external format (missing cells as NA)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(dataset.names)
        for i in range(dataset.n):
            row = []
            for j, kind in enumerate(dataset.kinds):
                if not dataset.mask[i, j]:
                    row.append(MISSING_TOKEN)
                elif kind.tag == CONT:
                    row.append(repr(float(dataset.X[i, j])))
                elif kind.tag == INT:
                    row.append(str(int(dataset.X[i, j])))
                else:
                    level = int(dataset.X[i, j])
                    labels = dataset.cat_labels.get(j)
                    row.append(labels[level - 1] if labels else str(level))
            w.writerow(row)


def write_schema(dataset: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for j, (name, kind) in enumerate(zip(dataset.names, dataset.kinds)):
            if kind.tag == CAT:
                labels = dataset.cat_labels.get(j) or [str(h + 1) for h in range(kind.levels)]
                fh.write(f"{name}:cat:{'|'.join(labels)}\n")
            else:
                fh.write(f"{name}:{kind.tag}\n")


def read_partition(path: str) -> np.ndarray:
    """Hard labels from a partition file: either our partition.csv (a
    ``label`` column) or one label per line."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and not row[0].startswith("#")]
    if not rows:
        raise DataError(f"{path}: empty partition file")
    header = [c.strip() for c in rows[0]]
    if "label" in header:
        col = header.index("label")
        return np.array([row[col] for row in rows[1:]])
    flat = [row[0].strip() for row in rows]
    if flat and flat[0].lower() in ("label", "labels"):
        flat = flat[1:]
    return np.array(flat)
