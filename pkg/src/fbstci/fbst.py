"""End-to-end conditional-independence test.

For each conditioning value x the slice's table yields a posterior, a
constrained maximum log f*, a Monte Carlo truth function and an elementary
e-value; the composite e-value convolves the per-slice truth functions and
evaluates at the sum of the log f* values.

Per-slice random streams are keyed to the slice's canonical content (sorted
concentrations plus sorted dimensions) rather than its label, and the
convolution runs in canonical content order, so every reported e-value is
bit-identical under relabelling of X, Y or Z categories and under transposing
the tables.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .convolution import composite_evalue
from .errors import DomainError
from .posterior import constrained_map, from_table, sample_log_densities
from .tables import ContingencyTable, Dataset, contingency_slices
from .truthfn import (
    AXIS_BOTH,
    AXIS_HORIZONTAL,
    AXIS_VERTICAL,
    TruthFunction,
    elementary_evalue,
    point_truth_function,
    truth_function_from_log_densities,
)

SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class CiTestSpec:
    """Parameters of one conditional-independence test run."""

    seed: int
    alpha: float = 1.0
    n_samples: int = 1_000_000
    n_bins: int = 100
    axis_mode: str = AXIS_BOTH
    y_column: str = "Y"
    z_column: str = "Z"
    x_column: str = "X"

    def __post_init__(self):
        if self.axis_mode not in (AXIS_HORIZONTAL, AXIS_VERTICAL, AXIS_BOTH):
            raise DomainError(f"unknown axis mode {self.axis_mode!r}")
        if not (self.n_samples >= self.n_bins >= 2):
            raise DomainError(
                f"need n_samples >= n_bins >= 2, got {self.n_samples} and {self.n_bins}"
            )
        alpha = np.asarray(self.alpha, dtype=float)
        if (alpha <= 0).any():
            raise DomainError("alpha must be strictly positive")
        if int(self.seed) < 0:
            raise DomainError("seed must be a nonnegative integer")

    @property
    def wants_horizontal(self) -> bool:
        return self.axis_mode in (AXIS_HORIZONTAL, AXIS_BOTH)

    @property
    def wants_vertical(self) -> bool:
        return self.axis_mode in (AXIS_VERTICAL, AXIS_BOTH)


@dataclass(frozen=True, eq=False)
class SliceResult:
    """Per-slice outcome: totals, constrained maximum, elementary e-values."""

    label: int
    grand_total: int
    log_f_star: float
    degenerate: bool
    evalue_horizontal: tuple[float, float] | None
    evalue_vertical: float | None


@dataclass(frozen=True, eq=False)
class EvalueReport:
    """Elementary and composite e-values plus full provenance."""

    slices: tuple[SliceResult, ...]
    composite_horizontal: tuple[float, float] | None
    composite_vertical: float | None
    spec: CiTestSpec
    version: str
    category_maps: dict | None = None

    def to_dict(self) -> dict:
        alpha = np.asarray(self.spec.alpha)
        doc = {
            "schema_version": SCHEMA_VERSION,
            "software_version": self.version,
            "spec": {
                "seed": int(self.spec.seed),
                "alpha": alpha.tolist() if alpha.ndim else float(alpha),
                "n_samples": int(self.spec.n_samples),
                "n_bins": int(self.spec.n_bins),
                "axis_mode": self.spec.axis_mode,
                "y_column": self.spec.y_column,
                "z_column": self.spec.z_column,
                "x_column": self.spec.x_column,
            },
            "slices": [
                {
                    "x": s.label,
                    "n": s.grand_total,
                    "log_f_star": s.log_f_star,
                    "degenerate": s.degenerate,
                    "evalue": {
                        **({"horizontal": list(s.evalue_horizontal)}
                           if s.evalue_horizontal is not None else {}),
                        **({"vertical": s.evalue_vertical}
                           if s.evalue_vertical is not None else {}),
                    },
                }
                for s in self.slices
            ],
            "composite": {
                **({"horizontal": list(self.composite_horizontal)}
                   if self.composite_horizontal is not None else {}),
                **({"vertical": self.composite_vertical}
                   if self.composite_vertical is not None else {}),
            },
        }
        if self.category_maps is not None:
            doc["category_maps"] = {
                role: list(mapping) if mapping is not None else None
                for role, mapping in self.category_maps.items()
            }
        return doc

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True) + "\n"


@dataclass(frozen=True, eq=False)
class SliceTruth:
    """Per-slice truth functions kept alongside the report (for TSV export)."""

    label: int
    horizontal: TruthFunction | None
    vertical: TruthFunction | None


@dataclass(frozen=True, eq=False)
class CiTestRun:
    report: EvalueReport
    truth_functions: tuple[SliceTruth, ...]


def _slice_stream_key(table: ContingencyTable, alpha) -> int:
    """Stable 64-bit key from the slice's canonical content.

    Keyed on sorted concentrations and sorted dimensions so that category
    relabelling and transposition select the same random stream.
    """
    alpha_grid = np.broadcast_to(np.asarray(alpha, dtype=float), table.counts.shape)
    conc = np.sort(table.counts + alpha_grid, axis=None)
    digest = hashlib.sha256()
    digest.update(np.array(sorted(table.counts.shape), dtype=np.uint64).tobytes())
    digest.update(conc.tobytes())
    return int.from_bytes(digest.digest()[:8], "little")


@dataclass(frozen=True, eq=False)
class _SliceState:
    result: SliceResult
    truth: SliceTruth
    fold_key: tuple
    log_f_star: float


def _run_slice(table: ContingencyTable, spec: CiTestSpec) -> _SliceState:
    post = from_table(table, spec.alpha)
    cmap = constrained_map(table, spec.alpha)
    key = _slice_stream_key(table, spec.alpha)
    label = table.slice_label
    if table.is_empty:
        # no observations: no evidence against independence; the slice enters
        # the convolution as a point mass so the composite is unaffected
        tf_h = point_truth_function(cmap.log_f_star, AXIS_HORIZONTAL,
                                    source_label=f"x={label}") if spec.wants_horizontal else None
        tf_v = point_truth_function(cmap.log_f_star, AXIS_VERTICAL,
                                    source_label=f"x={label}") if spec.wants_vertical else None
        result = SliceResult(
            label=label, grand_total=0, log_f_star=cmap.log_f_star, degenerate=True,
            evalue_horizontal=(1.0, 1.0) if spec.wants_horizontal else None,
            evalue_vertical=1.0 if spec.wants_vertical else None,
        )
        return _SliceState(result, SliceTruth(label, tf_h, tf_v), (key, label), cmap.log_f_star)
    rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), key]))
    logd = sample_log_densities(post, spec.n_samples, rng)
    tf_h = tf_v = None
    ev_h = None
    ev_v = None
    if spec.wants_horizontal:
        tf_h = truth_function_from_log_densities(logd, spec.n_bins, AXIS_HORIZONTAL,
                                                 source_label=f"x={label}")
        ev_h = elementary_evalue(tf_h, cmap.log_f_star)
    if spec.wants_vertical:
        tf_v = truth_function_from_log_densities(logd, spec.n_bins, AXIS_VERTICAL,
                                                 source_label=f"x={label}")
        ev_v = elementary_evalue(tf_v, cmap.log_f_star)[0]
    result = SliceResult(
        label=label, grand_total=table.grand_total, log_f_star=cmap.log_f_star,
        degenerate=cmap.degenerate,
        evalue_horizontal=ev_h, evalue_vertical=ev_v,
    )
    return _SliceState(result, SliceTruth(label, tf_h, tf_v), (key, label), cmap.log_f_star)


def _composite(states: list[_SliceState], spec: CiTestSpec):
    ordered = sorted(states, key=lambda s: s.fold_key)
    stars = [s.log_f_star for s in ordered]
    comp_h = comp_v = None
    if spec.wants_horizontal:
        comp_h = composite_evalue([s.truth.horizontal for s in ordered], stars, AXIS_HORIZONTAL)
    if spec.wants_vertical:
        comp_v = composite_evalue([s.truth.vertical for s in ordered], stars, AXIS_VERTICAL)[0]
    return comp_h, comp_v


def run_ci_test_from_tables(tables, spec: CiTestSpec, category_maps=None,
                            version: str | None = None) -> CiTestRun:
    """Full pipeline on pre-aggregated per-slice tables."""
    tables = list(tables)
    if not tables:
        raise DomainError("need at least one contingency table")
    shapes = {t.counts.shape for t in tables}
    if len(shapes) > 1:
        raise DomainError(f"tables must share one shape, got {sorted(shapes)}")
    r, c = tables[0].counts.shape
    if r < 2 or c < 2:
        raise DomainError(f"hypothesis testing needs r >= 2 and c >= 2, got {r} x {c}")
    states = [_run_slice(t, spec) for t in tables]
    comp_h, comp_v = _composite(states, spec)
    from . import __version__
    report = EvalueReport(
        slices=tuple(s.result for s in sorted(states, key=lambda s: s.result.label)),
        composite_horizontal=comp_h,
        composite_vertical=comp_v,
        spec=spec,
        version=version or __version__,
        category_maps=category_maps,
    )
    truths = tuple(s.truth for s in sorted(states, key=lambda s: s.truth.label))
    return CiTestRun(report, truths)


def run_ci_test(dataset: Dataset, spec: CiTestSpec) -> CiTestRun:
    """Full pipeline on raw records: aggregate, then test per slice."""
    if len(dataset) == 0:
        raise DomainError("dataset has no records")
    for role, column, axis in (("y", spec.y_column, 1), ("z", spec.z_column, 2)):
        observed = np.unique(dataset.records[:, axis]).size
        if observed < 2:
            raise DomainError(
                f"column {column!r} has {observed} observed categor"
                f"{'y' if observed == 1 else 'ies'}; need at least 2"
            )
    _, r, c = dataset.cardinalities
    if r < 2 or c < 2:
        raise DomainError(f"hypothesis testing needs r >= 2 and c >= 2, got {r} x {c}")
    tables = contingency_slices(dataset)
    maps = dict(dataset.category_maps) if dataset.category_maps is not None else None
    return run_ci_test_from_tables(tables, spec, category_maps=maps)


def ci_test(dataset: Dataset, spec: CiTestSpec) -> EvalueReport:
    """Conditional-independence e-values for Y and Z given X on raw records."""
    return run_ci_test(dataset, spec).report


def ci_test_from_tables(tables, spec: CiTestSpec) -> EvalueReport:
    """Conditional-independence e-values from pre-aggregated tables."""
    return run_ci_test_from_tables(tables, spec).report
