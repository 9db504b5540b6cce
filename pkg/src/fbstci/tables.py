"""Data ingestion, synthetic generation from CPT models, and aggregation of
raw records into per-slice contingency tables.

Records are triples of 1-based category indices (x, y, z).  CSV columns that
contain only positive integers are taken as indices directly (cardinality =
largest index); any other column is mapped to dense indices in first-appearance
order and the mapping is kept on the resulting :class:`Dataset`.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DomainError, ParseError, SchemaError

Z_GIVEN_X = "z_given_x"
Z_GIVEN_XY = "z_given_xy"

_POSITIVE_INT = re.compile(r"[0-9]+")
_PROB_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Dataset:
    """Sequence of (x, y, z) index triples plus declared cardinalities (k, r, c)."""

    records: np.ndarray
    cardinalities: tuple[int, int, int]
    category_maps: Mapping[str, tuple[str, ...] | None] | None = None

    def __post_init__(self):
        records = np.asarray(self.records, dtype=np.int64).reshape(-1, 3)
        records.setflags(write=False)
        object.__setattr__(self, "records", records)
        k, r, c = (int(v) for v in self.cardinalities)
        object.__setattr__(self, "cardinalities", (k, r, c))
        if min(k, r, c) < 1:
            raise DomainError(f"cardinalities must all be >= 1, got {(k, r, c)}")
        if records.size:
            if records.min() < 1:
                raise DomainError("record indices must be 1-based positive integers")
            if (records.max(axis=0) > np.array([k, r, c])).any():
                raise DomainError("record indices exceed the declared cardinalities")

    def __len__(self) -> int:
        return self.records.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.cardinalities == other.cardinalities
            and np.array_equal(self.records, other.records)
            and self.category_maps == other.category_maps
        )


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Co-occurrence counts of Y and Z within one conditioning slice X = x."""

    counts: np.ndarray
    slice_label: int

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise DomainError(f"counts must be a 2-D grid, got shape {counts.shape}")
        if not np.issubdtype(counts.dtype, np.integer):
            rounded = np.rint(counts)
            if not np.array_equal(rounded, counts):
                raise DomainError("counts must be integers")
            counts = rounded
        counts = counts.astype(np.int64)
        if (counts < 0).any():
            raise DomainError("counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "slice_label", int(self.slice_label))

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def grand_total(self) -> int:
        return int(self.counts.sum())

    @property
    def is_empty(self) -> bool:
        """True for all-zero slices (kept, but flagged degenerate at test time)."""
        return self.grand_total == 0

    def transposed(self) -> "ContingencyTable":
        return ContingencyTable(self.counts.T, self.slice_label)


@dataclass(frozen=True, eq=False)
class CptModel:
    """Generative spec: p(X), p(Y|X) and either p(Z|X) or p(Z|X,Y)."""

    px: np.ndarray
    py_given_x: np.ndarray
    mode: str
    pz: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.px, dtype=float)
        py = np.asarray(self.py_given_x, dtype=float)
        pz = np.asarray(self.pz, dtype=float)
        if self.mode not in (Z_GIVEN_X, Z_GIVEN_XY):
            raise DomainError(f"mode must be {Z_GIVEN_X!r} or {Z_GIVEN_XY!r}, got {self.mode!r}")
        if px.ndim != 1 or py.ndim != 2:
            raise DomainError("px must be a vector and py_given_x a k x r grid")
        k = px.shape[0]
        if py.shape[0] != k:
            raise DomainError("py_given_x must have one row per X state")
        if self.mode == Z_GIVEN_X:
            if pz.ndim != 2 or pz.shape[0] != k:
                raise DomainError("pz must be a k x c grid in z_given_x mode")
        else:
            if pz.ndim != 3 or pz.shape[:2] != (k, py.shape[1]):
                raise DomainError("pz must be a k x r x c grid in z_given_xy mode")
        for name, grid in (("px", px[None, :]), ("py_given_x", py), ("pz", pz.reshape(-1, pz.shape[-1]))):
            if (grid < 0).any():
                raise DomainError(f"{name} contains negative probabilities")
            if np.abs(grid.sum(axis=-1) - 1.0).max() > _PROB_TOL:
                raise DomainError(f"{name} rows must sum to 1 within {_PROB_TOL}")
        for arr in (px, py, pz):
            arr.setflags(write=False)
        object.__setattr__(self, "px", px)
        object.__setattr__(self, "py_given_x", py)
        object.__setattr__(self, "pz", pz)

    @property
    def k(self) -> int:
        return self.px.shape[0]

    @property
    def r(self) -> int:
        return self.py_given_x.shape[1]

    @property
    def c(self) -> int:
        return self.pz.shape[-1]


def _open_text(source, mode: str = "r"):
    """Return (stream, needs_close) for a path or an already-open file object."""
    if hasattr(source, "read") or hasattr(source, "write"):
        return source, False
    return open(Path(source), mode, encoding="utf-8", newline=""), True


def _decode_cell(raw: bytes | str) -> str:
    return raw.decode("utf-8") if isinstance(raw, bytes) else raw


def _encode_column(values: list[str]) -> tuple[np.ndarray, tuple[str, ...] | None, int]:
    """Map raw cells to dense 1-based indices.

    All-positive-integer columns keep their values as indices (cardinality is
    the largest index seen); anything else becomes categorical in
    first-appearance order.
    """
    if all(_POSITIVE_INT.fullmatch(v) for v in values) and all(int(v) >= 1 for v in values):
        idx = np.array([int(v) for v in values], dtype=np.int64)
        return idx, None, int(idx.max())
    mapping: dict[str, int] = {}
    idx = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values):
        idx[i] = mapping.setdefault(v, len(mapping) + 1)
    return idx, tuple(mapping), len(mapping)


def ingest_csv(source, x_column: str = "X", y_column: str = "Y", z_column: str = "Z") -> Dataset:
    """Read a header-row CSV into a Dataset, selecting columns by name.

    Raises SchemaError for missing/duplicate columns or an empty file, and
    ParseError (naming the 1-based line number) for malformed rows.
    """
    stream, needs_close = _open_text(source)
    try:
        reader = csv.reader(stream)
        try:
            header = [_decode_cell(h).strip().lstrip("﻿") for h in next(reader)]
        except StopIteration:
            raise SchemaError("empty file: no header row") from None
        positions = {}
        for name in (x_column, y_column, z_column):
            hits = [i for i, h in enumerate(header) if h == name]
            if not hits:
                raise SchemaError(f"missing column {name!r} (header: {header})")
            if len(hits) > 1:
                raise SchemaError(f"column {name!r} appears more than once")
            positions[name] = hits[0]
        raw: dict[str, list[str]] = {x_column: [], y_column: [], z_column: []}
        n_fields = len(header)
        for line_no, row in enumerate(reader, start=2):
            if len(row) != n_fields:
                raise ParseError(f"line {line_no}: expected {n_fields} fields, found {len(row)}")
            for name, pos in positions.items():
                cell = _decode_cell(row[pos]).strip()
                if not cell:
                    raise ParseError(f"line {line_no}: empty value in column {name!r}")
                raw[name].append(cell)
    finally:
        if needs_close:
            stream.close()
    if not raw[x_column]:
        raise SchemaError("no data rows after the header")
    columns = []
    maps = {}
    for role, name in (("x", x_column), ("y", y_column), ("z", z_column)):
        idx, mapping, card = _encode_column(raw[name])
        columns.append(idx)
        maps[role] = mapping
    records = np.stack(columns, axis=1)
    cards = tuple(int(records[:, i].max()) if maps[r] is None else len(maps[r])
                  for i, r in enumerate(("x", "y", "z")))
    return Dataset(records, cards, category_maps=maps)


def emit_csv(dataset: Dataset, sink, x_column: str = "X", y_column: str = "Y",
             z_column: str = "Z") -> None:
    """Write a Dataset back to CSV; ingest(emit(d)) == d when every category
    occurs in the records."""
    stream, needs_close = _open_text(sink, "w")
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow([x_column, y_column, z_column])
        maps = dataset.category_maps or {}
        labels = [maps.get(role) for role in ("x", "y", "z")]
        for rec in dataset.records:
            writer.writerow([
                labels[i][rec[i] - 1] if labels[i] is not None else int(rec[i])
                for i in range(3)
            ])
    finally:
        if needs_close:
            stream.close()


def contingency_slices(dataset: Dataset) -> tuple[ContingencyTable, ...]:
    """Aggregate records into one r x c table per conditioning value x in 1..k.

    Slices with zero records come back as all-zero tables (``is_empty``); they
    are kept so the composite hypothesis retains one component per slice.
    """
    if len(dataset) == 0:
        raise DomainError("dataset has no records")
    k, r, c = dataset.cardinalities
    counts = np.zeros((k, r, c), dtype=np.int64)
    rec = dataset.records
    np.add.at(counts, (rec[:, 0] - 1, rec[:, 1] - 1, rec[:, 2] - 1), 1)
    return tuple(ContingencyTable(counts[x], slice_label=x + 1) for x in range(k))


def sample_dataset(model: CptModel, n: int, seed: int) -> Dataset:
    """Draw n i.i.d. records from the model; bit-identical for equal inputs."""
    if n < 0:
        raise DomainError(f"record count must be >= 0, got {n}")
    rng = np.random.default_rng(seed)
    u = rng.random((3, n))
    k, r, c = model.k, model.r, model.c
    x = np.minimum(np.searchsorted(np.cumsum(model.px), u[0]), k - 1)
    cum_y = np.cumsum(model.py_given_x, axis=1)
    y = np.minimum((cum_y[x] < u[1][:, None]).sum(axis=1), r - 1)
    if model.mode == Z_GIVEN_X:
        cum_z = np.cumsum(model.pz, axis=1)[x]
    else:
        cum_z = np.cumsum(model.pz, axis=2)[x, y]
    z = np.minimum((cum_z < u[2][:, None]).sum(axis=1), c - 1)
    records = np.stack([x + 1, y + 1, z + 1], axis=1)
    return Dataset(records, (k, r, c))


def load_cpt_model(source) -> CptModel:
    """Load a CPT model document (JSON with fields k, r, c, px, py_given_x,
    mode, pz; see README for the schema)."""
    stream, needs_close = _open_text(source)
    try:
        try:
            doc = json.load(stream)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"CPT model is not valid JSON: {exc}") from None
    finally:
        if needs_close:
            stream.close()
    if not isinstance(doc, dict):
        raise SchemaError("CPT model document must be a JSON object")
    missing = [key for key in ("k", "r", "c", "px", "py_given_x", "mode", "pz") if key not in doc]
    if missing:
        raise SchemaError(f"CPT model is missing fields: {', '.join(missing)}")
    model = CptModel(px=doc["px"], py_given_x=doc["py_given_x"], mode=doc["mode"], pz=doc["pz"])
    declared = (int(doc["k"]), int(doc["r"]), int(doc["c"]))
    if declared != (model.k, model.r, model.c):
        raise SchemaError(
            f"declared dimensions {declared} do not match the tables "
            f"{(model.k, model.r, model.c)}"
        )
    return model
