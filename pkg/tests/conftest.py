"""Shared fixtures: benchmark tables and generative models for the regression
and property tests."""

import numpy as np
import pytest

from fbstci import ContingencyTable, CptModel

# Reference 3x3x3 benchmark: 5000 records aggregated per conditioning value.
# CI_TRUE comes from a model where Y and Z are independent given X; CI_FALSE
# from one where they are not.
CI_TRUE_COUNTS = {
    1: [[241, 187, 44], [139, 130, 30], [364, 302, 70]],
    2: [[42, 41, 323], [39, 41, 341], [15, 21, 171]],
    3: [[282, 35, 151], [131, 37, 79], [1055, 143, 546]],
}
CI_FALSE_COUNTS = {
    1: [[228, 179, 39], [25, 33, 211], [482, 75, 208]],
    2: [[77, 85, 248], [165, 135, 120], [188, 21, 24]],
    3: [[40, 87, 354], [119, 104, 27], [305, 1049, 372]],
}

PX = [0.3, 0.2, 0.5]
PY_GIVEN_X = [[0.3, 0.2, 0.5], [0.4, 0.4, 0.2], [0.2, 0.1, 0.7]]
PZ_GIVEN_X = [[0.5, 0.4, 0.1], [0.1, 0.1, 0.8], [0.6, 0.1, 0.3]]
PZ_GIVEN_XY = [
    [[0.5, 0.4, 0.1], [0.1, 0.1, 0.8], [0.6, 0.1, 0.3]],
    [[0.2, 0.2, 0.6], [0.4, 0.3, 0.3], [0.8, 0.1, 0.1]],
    [[0.1, 0.2, 0.7], [0.5, 0.4, 0.1], [0.2, 0.6, 0.2]],
]


def tables_from(counts_by_label) -> tuple[ContingencyTable, ...]:
    return tuple(ContingencyTable(np.array(counts_by_label[x]), slice_label=x)
                 for x in sorted(counts_by_label))


@pytest.fixture(scope="session")
def ci_true_tables():
    return tables_from(CI_TRUE_COUNTS)


@pytest.fixture(scope="session")
def ci_false_tables():
    return tables_from(CI_FALSE_COUNTS)


@pytest.fixture(scope="session")
def ci_true_model():
    return CptModel(px=PX, py_given_x=PY_GIVEN_X, mode="z_given_x", pz=PZ_GIVEN_X)


@pytest.fixture(scope="session")
def ci_false_model():
    return CptModel(px=PX, py_given_x=PY_GIVEN_X, mode="z_given_xy", pz=PZ_GIVEN_XY)


def random_table(rng, r=3, c=3, max_count=500) -> ContingencyTable:
    return ContingencyTable(rng.integers(0, max_count + 1, size=(r, c)),
                            slice_label=int(rng.integers(1, 10)))


def numerical_constrained_max(table, alpha=1.0) -> float:
    """Independent oracle for the constrained maximum: maximize the posterior
    over factorized simplex points through unconstrained logits (BFGS with
    analytic gradient, multi-start)."""
    from scipy import optimize

    from fbstci import from_table

    post = from_table(table, alpha)
    r, c = table.counts.shape
    row_exc = (post.concentrations - 1.0).sum(axis=1)
    col_exc = (post.concentrations - 1.0).sum(axis=0)

    def split(u):
        p = np.exp(u[:r] - u[:r].max())
        p /= p.sum()
        q = np.exp(u[r:] - u[r:].max())
        q /= q.sum()
        return p, q

    def objective(u):
        p, q = split(u)
        return -(row_exc @ np.log(p) + col_exc @ np.log(q))

    def gradient(u):
        p, q = split(u)
        return -np.concatenate([row_exc - p * row_exc.sum(),
                                col_exc - q * col_exc.sum()])

    best = np.inf
    for attempt in range(3):
        x0 = (np.zeros(r + c) if attempt == 0
              else np.random.default_rng(attempt).normal(size=r + c))
        res = optimize.minimize(objective, x0, jac=gradient, method="BFGS",
                                options={"gtol": 1e-12, "maxiter": 5000})
        best = min(best, float(res.fun))
    return post.log_norm_const - best
