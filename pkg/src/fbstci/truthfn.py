"""Truth functions: discretized CDFs of the posterior log density, and the
elementary e-values read off them.

A truth function W gives, for a density threshold f, the posterior probability
of the region where the density is at most f; the e-value of an elementary
independence hypothesis is W evaluated at the constrained maximum f*.  W is
estimated by Monte Carlo over the posterior and discretized either with bins
of equal width in log f (horizontal) or bins of equal CDF increment
(vertical).  Per bin, ``cdf_lower``/``cdf_upper`` are valid pointwise bounds
on the CDF anywhere inside the bin.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError
from .posterior import DirichletPosterior, sample_log_densities

AXIS_HORIZONTAL = "horizontal"
AXIS_VERTICAL = "vertical"
AXIS_BOTH = "both"

MASS_TOL = 1e-9

_TSV_COLUMNS = ("log_f_left", "log_f_right", "mass", "cdf_lower", "cdf_upper")


@dataclass(frozen=True, eq=False)
class TruthFunction:
    """Discretized CDF of the log-density random variable.

    ``rep`` is the per-bin atom position used when truth functions enter a
    convolution: the mass-weighted mean for vertical bins, the midpoint for
    horizontal ones.
    """

    axis_mode: str
    log_f_left: np.ndarray
    log_f_right: np.ndarray
    mass: np.ndarray
    cdf_lower: np.ndarray
    cdf_upper: np.ndarray
    rep: np.ndarray
    n_samples: int
    source_label: str = ""
    degenerate: bool = False
    uneven_tail: bool = False

    def __post_init__(self):
        if self.axis_mode not in (AXIS_HORIZONTAL, AXIS_VERTICAL):
            raise DomainError(f"unknown axis mode {self.axis_mode!r}")
        arrays = {}
        n = None
        for name in ("log_f_left", "log_f_right", "mass", "cdf_lower", "cdf_upper", "rep"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise DomainError(f"{name} must be 1-D")
            if n is None:
                n = arr.size
            elif arr.size != n:
                raise DomainError("bin arrays must all have the same length")
            arr.setflags(write=False)
            arrays[name] = arr
        if n == 0:
            raise DomainError("a truth function needs at least one bin")
        left, right = arrays["log_f_left"], arrays["log_f_right"]
        mass, lower, upper = arrays["mass"], arrays["cdf_lower"], arrays["cdf_upper"]
        if (right < left).any() or (np.diff(left) < 0).any() or (np.diff(right) < 0).any():
            raise DomainError("bin edges must be nondecreasing")
        if (mass < -MASS_TOL).any():
            raise DomainError("bin masses must be nonnegative")
        if abs(float(mass.sum()) - 1.0) > MASS_TOL:
            raise DomainError(f"bin masses must sum to 1 within {MASS_TOL}")
        if (np.diff(lower) < -MASS_TOL).any() or (np.diff(upper) < -MASS_TOL).any():
            raise DomainError("cdf bounds must be nondecreasing")
        if (lower > upper + MASS_TOL).any():
            raise DomainError("cdf_lower must not exceed cdf_upper")
        if abs(float(upper[-1]) - 1.0) > MASS_TOL:
            raise DomainError("final cdf_upper must be 1")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "n_samples", int(self.n_samples))

    @property
    def n_bins(self) -> int:
        return self.mass.size

    def bins(self):
        """Iterate (log_f_left, log_f_right, mass, cdf_lower, cdf_upper) tuples."""
        return zip(self.log_f_left, self.log_f_right, self.mass,
                   self.cdf_lower, self.cdf_upper)

    def relabeled(self, label: str) -> "TruthFunction":
        return replace(self, source_label=label)


def point_truth_function(log_f: float, axis_mode: str, n_samples: int = 0,
                         source_label: str = "") -> TruthFunction:
    """Single-bin point mass; used for degenerate (constant-density) slices."""
    v = np.array([float(log_f)])
    return TruthFunction(
        axis_mode=axis_mode,
        log_f_left=v, log_f_right=v,
        mass=np.array([1.0]),
        cdf_lower=np.array([0.0]), cdf_upper=np.array([1.0]),
        rep=v,
        n_samples=n_samples,
        source_label=source_label,
        degenerate=True,
    )


def truth_function_from_log_densities(log_densities: np.ndarray, n_bins: int,
                                      axis_mode: str, source_label: str = "") -> TruthFunction:
    """Discretize an array of sampled log densities into a truth function."""
    logd = np.asarray(log_densities, dtype=float).ravel()
    m = logd.size
    if axis_mode not in (AXIS_HORIZONTAL, AXIS_VERTICAL):
        raise DomainError(f"unknown axis mode {axis_mode!r}")
    if not (m >= n_bins >= 2):
        raise DomainError(f"need n_samples >= n_bins >= 2, got {m} and {n_bins}")
    if not np.isfinite(logd).all():
        raise DomainError("log densities must be finite")
    lo = float(logd.min())
    hi = float(logd.max())
    if lo == hi:
        return point_truth_function(lo, axis_mode, n_samples=m, source_label=source_label)
    if axis_mode == AXIS_HORIZONTAL:
        counts, edges = np.histogram(logd, bins=n_bins, range=(lo, hi))
        upper = np.cumsum(counts) / m
        lower = np.concatenate([[0.0], upper[:-1]])
        return TruthFunction(
            axis_mode=axis_mode,
            log_f_left=edges[:-1], log_f_right=edges[1:],
            mass=counts / m,
            cdf_lower=lower, cdf_upper=upper,
            rep=0.5 * (edges[:-1] + edges[1:]),
            n_samples=m,
            source_label=source_label,
        )
    s = np.sort(logd)
    # last sample index of each quantile slab ((i-1)/n, i/n]
    hi_idx = (np.arange(1, n_bins + 1) * m + n_bins - 1) // n_bins - 1
    lo_idx = np.concatenate([[0], hi_idx[:-1] + 1])
    sizes = hi_idx - lo_idx + 1
    upper = (hi_idx + 1) / m
    lower = np.concatenate([[0.0], upper[:-1]])
    prefix = np.concatenate([[0.0], np.cumsum(s)])
    rep = (prefix[hi_idx + 1] - prefix[lo_idx]) / sizes
    return TruthFunction(
        axis_mode=axis_mode,
        log_f_left=np.concatenate([[s[0]], s[hi_idx[:-1]]]),
        log_f_right=s[hi_idx],
        mass=sizes / m,
        cdf_lower=lower, cdf_upper=upper,
        rep=rep,
        n_samples=m,
        source_label=source_label,
        uneven_tail=(m % n_bins != 0),
    )


def estimate_truth_function(post: DirichletPosterior, n_samples: int, n_bins: int,
                            axis_mode: str, seed) -> TruthFunction:
    """Monte Carlo estimate of the truth function of one posterior.

    ``seed`` may be an integer or a ``numpy.random.Generator``.  A constant
    density posterior (all concentrations 1) short-circuits to a flagged
    single-bin point mass at its log density.
    """
    if not (n_samples >= n_bins >= 2):
        raise DomainError(f"need n_samples >= n_bins >= 2, got {n_samples} and {n_bins}")
    if post.is_uniform:
        return point_truth_function(post.log_norm_const, axis_mode, n_samples=n_samples)
    rng = np.random.default_rng(seed)
    logd = sample_log_densities(post, n_samples, rng)
    return truth_function_from_log_densities(logd, n_bins, axis_mode)


def _locate(w: TruthFunction, t: float) -> tuple[str, int]:
    """Classify a threshold: below support, above support, inside bin i, or in
    the gap right of bin i (where the CDF is exactly cdf_upper[i])."""
    if t < w.log_f_left[0]:
        return "below", -1
    if t > w.log_f_right[-1]:
        return "above", -1
    i = int(np.searchsorted(w.log_f_left, t, side="right")) - 1
    if t > w.log_f_right[i]:
        return "gap", i
    return "bin", i


def _unit(v: float) -> float:
    """Clamp cumulative-sum dust so reported probabilities stay in [0, 1]."""
    return min(max(float(v), 0.0), 1.0)


def elementary_evalue(w: TruthFunction, log_f_star: float) -> tuple[float, float]:
    """Evidence for one elementary hypothesis: the truth function at log f*.

    Horizontal mode returns the CDF bounds of the containing bin; vertical
    mode interpolates linearly inside the containing quantile bin and returns
    a point (equal endpoints).  Thresholds outside the support give [0, 0] or
    [1, 1].
    """
    t = float(log_f_star)
    where, i = _locate(w, t)
    if where == "below":
        return (0.0, 0.0)
    if where == "above":
        return (1.0, 1.0)
    if where == "gap":
        v = _unit(w.cdf_upper[i])
        return (v, v)
    width = float(w.log_f_right[i] - w.log_f_left[i])
    if width == 0.0:
        v = _unit(w.cdf_upper[i])
        return (v, v)
    if w.axis_mode == AXIS_HORIZONTAL:
        return (_unit(w.cdf_lower[i]), _unit(w.cdf_upper[i]))
    v = float(w.cdf_lower[i]) + (t - float(w.log_f_left[i])) / width * float(w.mass[i])
    return (_unit(v), _unit(v))


def format_truth_tsv(w: TruthFunction) -> str:
    """Render the bins as TSV with a '#'-prefixed header line."""
    lines = ["# " + "\t".join(_TSV_COLUMNS)]
    for left, right, mass, lower, upper in w.bins():
        lines.append("\t".join(repr(float(v)) for v in (left, right, mass, lower, upper)))
    return "\n".join(lines) + "\n"


def write_truth_tsv(w: TruthFunction, sink) -> None:
    if hasattr(sink, "write"):
        sink.write(format_truth_tsv(w))
    else:
        with open(sink, "w", encoding="utf-8") as fh:
            fh.write(format_truth_tsv(w))


def read_truth_tsv(source, axis_mode: str) -> TruthFunction:
    """Rebuild a truth function from its TSV export.

    The export does not carry the atom positions, so ``rep`` falls back to
    bin midpoints; evaluation via :func:`elementary_evalue` is unaffected.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = open(source, encoding="utf-8").read()
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != len(_TSV_COLUMNS):
            raise DomainError(f"expected {len(_TSV_COLUMNS)} TSV columns, found {len(parts)}")
        rows.append([float(p) for p in parts])
    if not rows:
        raise DomainError("truth-function TSV has no data rows")
    cols = np.array(rows).T
    left, right, mass, lower, upper = cols
    degenerate = rows and len(rows) == 1
    return TruthFunction(
        axis_mode=axis_mode,
        log_f_left=left, log_f_right=right,
        mass=mass, cdf_lower=lower, cdf_upper=upper,
        rep=0.5 * (left + right),
        n_samples=0,
        degenerate=bool(degenerate),
    )
