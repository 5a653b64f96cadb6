"""Dataset CSV export and ingestion.

Schema: UTF-8, comma-separated, ``.`` decimal, header
``x_0,...,x_{d-1},a,y[,mu_0,mu_1,e,cate]``. Treatment is written as 0/1 and
floats with 17 significant digits, so an export/ingest round trip is
bit-identical. Column order in ingested files is free; the four oracle
columns are optional (individually, but all four are needed for oracle
risks).
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .datagen import Dataset
from .errors import DataError

ORACLE_COLUMNS = ("mu_0", "mu_1", "e", "cate")


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def dataset_to_csv(data: Dataset) -> str:
    buf = io.StringIO()
    cols = [f"x_{j}" for j in range(data.d)] + ["a", "y"]
    blocks = [data.x, data.a[:, None], data.y[:, None]]
    if data.has_oracle:
        cols += list(ORACLE_COLUMNS)
        blocks += [data.mu0[:, None], data.mu1[:, None], data.e[:, None], data.cate[:, None]]
    buf.write(",".join(cols) + "\n")
    a_col = len([f for f in cols if f.startswith("x_")])
    for row in np.hstack(blocks):
        fields = [_fmt(v) for v in row]
        fields[a_col] = str(int(row[a_col]))
        buf.write(",".join(fields) + "\n")
    return buf.getvalue()


def write_dataset_csv(data: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dataset_to_csv(data))


def _parse_float(raw: str, column: str, row: int) -> float:
    try:
        value = float(raw)
    except ValueError as exc:
        raise DataError(f"column {column!r}, row {row}: not a number: {raw!r}") from exc
    if np.isnan(value):
        raise DataError(f"column {column!r}, row {row}: NaN value")
    return value


def ingest_csv(path: str) -> Dataset:
    """Load a dataset CSV, validating columns and values.

    Mandatory columns are ``x_0..x_{d-1}`` (contiguously numbered), ``a``
    (binary) and ``y``. Oracle columns present in the file are kept; errors
    name the offending column and 1-based data row.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        x_cols = sorted(
            (h for h in header if h.startswith("x_")),
            key=lambda h: int(h[2:]) if h[2:].isdigit() else -1,
        )
        if not x_cols or any(not h[2:].isdigit() for h in x_cols):
            raise DataError("header must contain covariate columns x_0, x_1, ...")
        expected = [f"x_{j}" for j in range(len(x_cols))]
        if x_cols != expected:
            raise DataError(f"covariate columns must be numbered 0..{len(x_cols) - 1}")
        for required in ("a", "y"):
            if required not in header:
                raise DataError(f"missing mandatory column {required!r}")
        pos = {name: header.index(name) for name in header}

        xs, a_vals, ys = [], [], []
        oracle = {name: [] for name in ORACLE_COLUMNS if name in header}
        for i, record in enumerate(reader, start=1):
            if len(record) != len(header):
                raise DataError(f"row {i}: expected {len(header)} fields, got {len(record)}")
            xs.append([_parse_float(record[pos[c]], c, i) for c in expected])
            a_raw = _parse_float(record[pos["a"]], "a", i)
            if a_raw not in (0.0, 1.0):
                raise DataError(f"column 'a', row {i}: treatment must be 0 or 1, got {a_raw}")
            a_vals.append(int(a_raw))
            ys.append(_parse_float(record[pos["y"]], "y", i))
            for name in oracle:
                oracle[name].append(_parse_float(record[pos[name]], name, i))

    if not xs:
        raise DataError(f"{path}: no data rows")
    data = Dataset(
        x=np.asarray(xs, dtype=float),
        a=np.asarray(a_vals, dtype=np.int64),
        y=np.asarray(ys, dtype=float),
        mu0=np.asarray(oracle["mu_0"], dtype=float) if "mu_0" in oracle else None,
        mu1=np.asarray(oracle["mu_1"], dtype=float) if "mu_1" in oracle else None,
        e=np.asarray(oracle["e"], dtype=float) if "e" in oracle else None,
        cate=np.asarray(oracle["cate"], dtype=float) if "cate" in oracle else None,
    )
    if data.e is not None and (np.any(data.e <= 0.0) or np.any(data.e >= 1.0)):
        bad = int(np.nonzero((data.e <= 0.0) | (data.e >= 1.0))[0][0]) + 1
        raise DataError(f"column 'e', row {bad}: propensity must lie in (0, 1)")
    if data.has_oracle:
        gap = np.max(np.abs(data.cate - (data.mu1 - data.mu0)))
        if gap > 1e-8:
            raise DataError(f"column 'cate': inconsistent with mu_1 - mu_0 (max gap {gap:g})")
    return data
