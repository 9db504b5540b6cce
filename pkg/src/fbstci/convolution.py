"""Numerical Mellin convolution of truth functions and condensation back to a
fixed bin budget.

A Mellin convolution gives the law of a product of independent positive
random variables; applied to density values it is implemented here as the
additive convolution of the log-density variables, which avoids the overflow
a linear-space product would cause.  Each input bin enters as one point mass
(atom) at the bin's representative position; the pairwise sums are sorted and
accumulated, then condensed back to n bins either horizontally (equal atom
count per bin, yielding guaranteed lower/upper CDF bounds on the atom
distribution) or vertically (equal CDF increment per bin).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import DomainError
from .truthfn import (
    AXIS_HORIZONTAL,
    AXIS_VERTICAL,
    MASS_TOL,
    TruthFunction,
    elementary_evalue,
)


@dataclass(frozen=True, eq=False)
class RawConvolution:
    """Sorted atoms of a pairwise convolution, with running CDF."""

    log_f: np.ndarray
    mass: np.ndarray
    cumulative: np.ndarray

    def __post_init__(self):
        log_f = np.asarray(self.log_f, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        cum = np.asarray(self.cumulative, dtype=float)
        if not (log_f.ndim == mass.ndim == cum.ndim == 1) or not (log_f.size == mass.size == cum.size):
            raise DomainError("log_f, mass and cumulative must be 1-D arrays of equal length")
        if log_f.size == 0:
            raise DomainError("a convolution needs at least one atom")
        if (np.diff(log_f) < 0).any():
            raise DomainError("atoms must be sorted by log_f")
        if (mass < -MASS_TOL).any():
            raise DomainError("atom masses must be nonnegative")
        if abs(float(mass.sum()) - 1.0) > MASS_TOL:
            raise DomainError(f"atom masses must sum to 1 within {MASS_TOL}")
        if (np.diff(cum) < -MASS_TOL).any() or abs(float(cum[-1]) - 1.0) > MASS_TOL:
            raise DomainError("cumulative must be nondecreasing and end at 1")
        for name, arr in (("log_f", log_f), ("mass", mass), ("cumulative", cum)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_atoms(self) -> int:
        return self.log_f.size


def convolve(wa: TruthFunction, wb: TruthFunction) -> RawConvolution:
    """All pairwise atom sums with product masses, sorted and accumulated.

    Ties on position keep the (a-bin, b-bin) source order, so the output is a
    deterministic total order.
    """
    sums = np.add.outer(wa.rep, wb.rep).ravel()
    mass = np.multiply.outer(wa.mass, wb.mass).ravel()
    order = np.argsort(sums, kind="stable")
    sums = sums[order]
    mass = mass[order]
    return RawConvolution(sums, mass, np.cumsum(mass))


def condense_horizontal(raw: RawConvolution, n_bins: int) -> TruthFunction:
    """Group sorted atoms into n_bins runs of equal atom count.

    Per output bin the running CDF at the first atom is a valid lower bound
    and at the last atom a valid upper bound for the atom CDF anywhere in the
    bin.  When the atom count is not divisible by n_bins the last group
    absorbs the remainder and the result is flagged.
    """
    n_atoms = raw.n_atoms
    if n_bins < 1:
        raise DomainError(f"n_bins must be >= 1, got {n_bins}")
    if n_atoms < n_bins:
        raise DomainError(f"cannot condense {n_atoms} atoms into {n_bins} bins")
    group = n_atoms // n_bins
    first = np.arange(n_bins) * group
    last = np.concatenate([first[1:] - 1, [n_atoms - 1]])
    upper = raw.cumulative[last]
    left = raw.log_f[first]
    right = raw.log_f[last]
    return TruthFunction(
        axis_mode=AXIS_HORIZONTAL,
        log_f_left=left, log_f_right=right,
        mass=np.diff(upper, prepend=0.0),
        cdf_lower=raw.cumulative[first], cdf_upper=upper,
        rep=0.5 * (left + right),
        n_samples=0,
        uneven_tail=(n_atoms % n_bins != 0),
    )


def condense_vertical(raw: RawConvolution, n_bins: int) -> TruthFunction:
    """Regroup atoms into n_bins slabs of equal CDF increment.

    A break falling inside an atom splits its mass proportionally between the
    neighbouring bins; each output bin carries the mass-weighted mean position
    of its atom parts as representative.
    """
    if n_bins < 1:
        raise DomainError(f"n_bins must be >= 1, got {n_bins}")
    if raw.n_atoms < n_bins:
        raise DomainError(f"cannot condense {raw.n_atoms} atoms into {n_bins} bins")
    mass = raw.mass / raw.mass.sum()
    cum = np.cumsum(mass)
    cum[-1] = 1.0
    weighted = np.concatenate([[0.0], np.cumsum(mass * raw.log_f)])
    cum0 = np.concatenate([[0.0], cum])
    breaks = np.arange(0, n_bins + 1) / n_bins
    # atom holding each break: first index with cum >= b
    idx = np.minimum(np.searchsorted(cum, breaks, side="left"), raw.n_atoms - 1)
    # weighted mass below each break, splitting the straddled atom linearly
    below = weighted[idx] + (breaks - cum0[idx]) * raw.log_f[idx]
    rep = (below[1:] - below[:-1]) * n_bins
    # left edge of slab i: the atom containing break i unless that break sits
    # exactly on its boundary, in which case the next atom starts the slab
    start = np.where(cum0[idx[:-1] + 1] > breaks[:-1], idx[:-1], np.minimum(idx[:-1] + 1, raw.n_atoms - 1))
    left = raw.log_f[start]
    right = raw.log_f[idx[1:]]
    upper = breaks[1:]
    return TruthFunction(
        axis_mode=AXIS_VERTICAL,
        log_f_left=left, log_f_right=right,
        mass=np.full(n_bins, 1.0 / n_bins),
        cdf_lower=breaks[:-1], cdf_upper=upper,
        rep=rep,
        n_samples=0,
    )


def _wrap_atoms(raw: RawConvolution, axis_mode: str) -> TruthFunction:
    """Represent a raw convolution as a truth function with zero-width bins
    (used when there are no more atoms than the bin budget)."""
    return TruthFunction(
        axis_mode=axis_mode,
        log_f_left=raw.log_f, log_f_right=raw.log_f,
        mass=raw.mass,
        cdf_lower=np.concatenate([[0.0], raw.cumulative[:-1]]),
        cdf_upper=raw.cumulative,
        rep=raw.log_f,
        n_samples=0,
        degenerate=True,
    )


def composite_evalue(ws, log_f_stars, axis_mode: str) -> tuple[float, float]:
    """E-value of the conjunction hypothesis.

    Left-fold over the truth functions: convolve, condense back to the bin
    budget, repeat; then evaluate the final truth function at the sum of the
    per-component log f* values.  With a single component this reduces to the
    elementary e-value.
    """
    ws = list(ws)
    stars = [float(v) for v in log_f_stars]
    if not ws or len(ws) != len(stars):
        raise DomainError("need equally many truth functions and log f* values, at least one")
    if axis_mode not in (AXIS_HORIZONTAL, AXIS_VERTICAL):
        raise DomainError(f"unknown axis mode {axis_mode!r}")
    for w in ws:
        if w.axis_mode != axis_mode:
            raise DomainError(
                f"mixed axis modes: expected {axis_mode!r}, got {w.axis_mode!r} "
                f"({w.source_label or 'unlabeled'})"
            )
    n_bins = max(w.n_bins for w in ws)
    condense = condense_horizontal if axis_mode == AXIS_HORIZONTAL else condense_vertical
    current = ws[0]
    for nxt in ws[1:]:
        raw = convolve(current, nxt)
        if raw.n_atoms <= n_bins:
            current = _wrap_atoms(raw, axis_mode)
        else:
            current = condense(raw, n_bins)
    return elementary_evalue(current, float(np.sum(stars)))


def lognormal_reference(mu: float, sigma: float, n_bins: int, axis_mode: str) -> TruthFunction:
    """Analytic oracle: discretized CDF of log Y for Y ~ lognormal(mu, sigma^2),
    i.e. a normal CDF truncated at +/- 6 sigma.

    Convolving two of these must reproduce a normal with summed means and
    variances, which is what the convolution tests check against.
    """
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if n_bins < 1:
        raise DomainError(f"n_bins must be >= 1, got {n_bins}")
    if axis_mode == AXIS_HORIZONTAL:
        edges = np.linspace(mu - 6.0 * sigma, mu + 6.0 * sigma, n_bins + 1)
        cdf = norm.cdf((edges - mu) / sigma)
        cdf = (cdf - cdf[0]) / (cdf[-1] - cdf[0])
        cdf[-1] = 1.0
        return TruthFunction(
            axis_mode=axis_mode,
            log_f_left=edges[:-1], log_f_right=edges[1:],
            mass=np.diff(cdf),
            cdf_lower=cdf[:-1], cdf_upper=cdf[1:],
            rep=0.5 * (edges[:-1] + edges[1:]),
            n_samples=0,
            source_label=f"lognormal(mu={mu}, sigma={sigma})",
        )
    if axis_mode != AXIS_VERTICAL:
        raise DomainError(f"unknown axis mode {axis_mode!r}")
    lo = norm.cdf(-6.0)
    hi = norm.cdf(6.0)
    quantiles = np.linspace(lo, hi, n_bins + 1)
    z = norm.ppf(quantiles)
    edges = mu + sigma * z
    slab = norm.cdf(z[1:]) - norm.cdf(z[:-1])
    rep = mu + sigma * (norm.pdf(z[:-1]) - norm.pdf(z[1:])) / slab
    upper = np.arange(1, n_bins + 1) / n_bins
    return TruthFunction(
        axis_mode=axis_mode,
        log_f_left=edges[:-1], log_f_right=edges[1:],
        mass=np.full(n_bins, 1.0 / n_bins),
        cdf_lower=upper - 1.0 / n_bins, cdf_upper=upper,
        rep=rep,
        n_samples=0,
        source_label=f"lognormal(mu={mu}, sigma={sigma})",
    )
