"""Dirichlet-multinomial posterior for one contingency-table slice.

Everything is handled in log space and densities are normalized: with ~1500
observations in a 9-cell slice the posterior mode density exceeds 1e15, so
linear-space products would overflow, while the log-gamma constant keeps
values reproducible across implementations.

Reductions over cells are performed in a canonical (sorted) order so that
relabelling rows or columns, or transposing a table, yields bit-identical
results; the e-value invariance tests rely on this.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError
from .tables import ContingencyTable

SIMPLEX_TOL = 1e-12

# samples per block are sized so one gamma block stays around 128 MB
_BLOCK_CELLS = 16_777_216


@dataclass(frozen=True, eq=False)
class SimplexPoint:
    """Point on the probability simplex over the r x c table cells."""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 2:
            raise DomainError(f"theta must be a 2-D grid, got shape {theta.shape}")
        if (theta < 0).any():
            raise DomainError("theta entries must be nonnegative")
        if abs(float(theta.sum()) - 1.0) > SIMPLEX_TOL:
            raise DomainError(f"theta must sum to 1 within {SIMPLEX_TOL}, got {theta.sum()!r}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def row_marginals(self) -> np.ndarray:
        return self.theta.sum(axis=1)

    @property
    def col_marginals(self) -> np.ndarray:
        return self.theta.sum(axis=0)


@dataclass(frozen=True, eq=False)
class DirichletPosterior:
    """Dirichlet law with concentrations counts + alpha over one slice."""

    concentrations: np.ndarray
    log_norm_const: float

    def __post_init__(self):
        conc = np.asarray(self.concentrations, dtype=float)
        if conc.ndim != 2:
            raise DomainError(f"concentrations must be a 2-D grid, got shape {conc.shape}")
        if (conc <= 0).any():
            raise DomainError("concentrations must be strictly positive")
        conc.setflags(write=False)
        object.__setattr__(self, "concentrations", conc)
        object.__setattr__(self, "log_norm_const", float(self.log_norm_const))

    @property
    def dims(self) -> tuple[int, int]:
        return self.concentrations.shape

    @property
    def is_uniform(self) -> bool:
        """True when the density is constant on the simplex (all a = 1)."""
        return bool(np.all(self.concentrations == 1.0))


@dataclass(frozen=True, eq=False)
class ConstrainedMap:
    """Posterior mode restricted to the independence surface, with its log density."""

    theta_star: SimplexPoint
    log_f_star: float
    degenerate: bool = False


def _broadcast_alpha(alpha, shape) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim == 0:
        alpha = np.full(shape, float(alpha))
    if alpha.shape != shape:
        raise DomainError(f"alpha shape {alpha.shape} does not match table shape {shape}")
    if (alpha <= 0).any():
        raise DomainError("alpha entries must be strictly positive")
    return alpha


def _log_norm_const(concentrations: np.ndarray) -> float:
    flat = np.sort(concentrations, axis=None)
    return float(gammaln(flat.sum()) - gammaln(flat).sum())


def from_table(table: ContingencyTable, alpha=1.0) -> DirichletPosterior:
    """Posterior for one slice: concentrations counts + alpha (alpha scalar or grid)."""
    alpha = _broadcast_alpha(alpha, table.counts.shape)
    conc = table.counts.astype(float) + alpha
    return DirichletPosterior(conc, _log_norm_const(conc))


def log_density(post: DirichletPosterior, point: SimplexPoint) -> float:
    """Normalized log density at a simplex point.

    Cells with exponent a - 1 = 0 contribute nothing even at theta = 0;
    a positive exponent at theta = 0 gives -inf (density zero).
    """
    theta = point.theta
    if theta.shape != post.concentrations.shape:
        raise DomainError(
            f"point shape {theta.shape} does not match posterior dims {post.concentrations.shape}"
        )
    flat_a = post.concentrations.ravel()
    order = np.argsort(flat_a, kind="stable")
    a = flat_a[order]
    t = theta.ravel()[order]
    exponent = a - 1.0
    live = exponent != 0.0
    if not live.any():
        return post.log_norm_const
    t_live = t[live]
    e_live = exponent[live]
    zero = t_live == 0.0
    if (zero & (e_live > 0)).any():
        return float("-inf")
    if (zero & (e_live < 0)).any():
        return float("inf")
    return post.log_norm_const + float(e_live @ np.log(t_live))


def sample(post: DirichletPosterior, rng: np.random.Generator) -> SimplexPoint:
    """One exact Dirichlet draw via gamma-variate normalization."""
    g = rng.gamma(post.concentrations)
    return SimplexPoint(g / g.sum())


def sample_log_densities(post: DirichletPosterior, n_samples: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Log densities of n_samples posterior draws, as a 1-D array.

    Cells are visited in sorted-concentration order, which makes the output
    bit-identical under any relabelling of the underlying table.  Work is
    blocked to bound peak memory; the blocking is a pure function of
    (n_samples, cell count), so results stay deterministic.
    """
    if n_samples < 1:
        raise DomainError(f"n_samples must be >= 1, got {n_samples}")
    a = np.sort(post.concentrations, axis=None)
    m = a.size
    live = a != 1.0
    weights = a[live] - 1.0
    out = np.empty(n_samples)
    block = max(1, _BLOCK_CELLS // m)
    done = 0
    while done < n_samples:
        take = min(block, n_samples - done)
        g = rng.gamma(a, size=(take, m))
        totals = g.sum(axis=1)
        if weights.size:
            with np.errstate(divide="ignore"):
                logt = np.log(g[:, live] / totals[:, None])
            out[done:done + take] = post.log_norm_const + logt @ weights
        else:
            out[done:done + take] = post.log_norm_const
        done += take
    return out


def constrained_map(table: ContingencyTable, alpha=1.0) -> ConstrainedMap:
    """Closed-form posterior mode under the independence factorization.

    For the factorized point theta[y, z] = p[y] * q[z] the log posterior
    separates into marginal terms, so the maximizer is p = A / T, q = B / T
    with A, B the row/column sums of (counts + alpha - 1) and T their total.
    Negative marginal sums (possible only for alpha < 1) leave the constrained
    density unbounded and are rejected; zero sums put the mode on the simplex
    boundary and flag the result as degenerate.
    """
    alpha = _broadcast_alpha(alpha, table.counts.shape)
    excess = table.counts.astype(float) + alpha - 1.0
    row_sums = np.sort(excess, axis=1).sum(axis=1)
    col_sums = np.sort(excess, axis=0).sum(axis=0)
    if (row_sums < 0).any() or (col_sums < 0).any():
        raise DomainError(
            "constrained mode requires nonnegative marginal sums of counts + alpha - 1; "
            "use alpha >= 1 or larger counts"
        )
    total = float(np.sort(excess, axis=None).sum())
    conc = table.counts.astype(float) + alpha
    lnc = _log_norm_const(conc)
    r, c = table.counts.shape
    if total == 0.0:
        # alpha all 1 on an empty table: the density is constant and every
        # factorized point attains the maximum
        theta = np.full((r, c), 1.0 / (r * c))
        return ConstrainedMap(SimplexPoint(theta), lnc, degenerate=True)

    def marginal_term(sums: np.ndarray) -> float:
        v = np.sort(sums)
        v = v[v > 0]
        return float(v @ np.log(v / total))

    p = row_sums / total
    q = col_sums / total
    theta = np.outer(p, q)
    pair = np.sort(np.array([marginal_term(row_sums), marginal_term(col_sums)]))
    log_f_star = lnc + float(pair.sum())
    degenerate = bool((row_sums == 0).any() or (col_sums == 0).any())
    return ConstrainedMap(SimplexPoint(theta), log_f_star, degenerate)
