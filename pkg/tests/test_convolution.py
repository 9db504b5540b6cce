"""Convolution, condensation, the bracketing theorem, and the log-normal oracle."""

import numpy as np
import pytest
from scipy.stats import norm

from fbstci import (
    AXIS_HORIZONTAL,
    AXIS_VERTICAL,
    ContingencyTable,
    DomainError,
    RawConvolution,
    TruthFunction,
    composite_evalue,
    condense_horizontal,
    condense_vertical,
    convolve,
    elementary_evalue,
    from_table,
    lognormal_reference,
    sample_log_densities,
    truth_function_from_log_densities,
)
from conftest import random_table


def atoms_tf(positions, masses, axis_mode=AXIS_HORIZONTAL) -> TruthFunction:
    """Truth function made of explicit point masses (zero-width bins)."""
    x = np.asarray(positions, dtype=float)
    m = np.asarray(masses, dtype=float)
    upper = np.cumsum(m)
    return TruthFunction(
        axis_mode=axis_mode,
        log_f_left=x, log_f_right=x, mass=m,
        cdf_lower=np.concatenate([[0.0], upper[:-1]]), cdf_upper=upper,
        rep=x, n_samples=0,
    )


def test_convolve_two_coin_atoms():
    w = atoms_tf([0.0, 1.0], [0.5, 0.5])
    raw = convolve(w, w)
    np.testing.assert_array_equal(raw.log_f, [0.0, 1.0, 1.0, 2.0])
    np.testing.assert_allclose(raw.mass, [0.25, 0.25, 0.25, 0.25])
    np.testing.assert_allclose(raw.cumulative, [0.25, 0.5, 0.75, 1.0])
    # grouped: mass 0.25 at 0, 0.5 at 1, 0.25 at 2; CDF at 1 is 0.75
    at_one = raw.cumulative[np.searchsorted(raw.log_f, 1.0, side="right") - 1]
    assert at_one == pytest.approx(0.75)


def test_convolve_identity_point_mass():
    wa = atoms_tf([-2.0, 0.5, 3.0], [0.2, 0.5, 0.3])
    unit = atoms_tf([0.0], [1.0])
    raw = convolve(wa, unit)
    np.testing.assert_array_equal(raw.log_f, wa.rep)
    np.testing.assert_array_equal(raw.mass, wa.mass)


def test_convolve_point_mass_shifts_positions():
    wa = atoms_tf([-2.0, 0.5, 3.0], [0.2, 0.5, 0.3])
    shiftb = atoms_tf([10.0], [1.0])
    raw = convolve(wa, shiftb)
    np.testing.assert_allclose(raw.log_f, wa.rep + 10.0)


def test_convolve_breaks_ties_by_source_order():
    # equal sums must keep (a-bin, b-bin) lexicographic order
    wa = atoms_tf([0.0, 1.0], [0.25, 0.75])
    wb = atoms_tf([0.0, 1.0], [0.7, 0.3])
    raw = convolve(wa, wb)
    np.testing.assert_array_equal(raw.log_f, [0.0, 1.0, 1.0, 2.0])
    # middle atoms: (a0,b1) before (a1,b0)
    np.testing.assert_allclose(raw.mass, [0.175, 0.075, 0.525, 0.225])


def test_condense_horizontal_hand_trace():
    raw = RawConvolution(np.array([0.0, 1.0, 2.0, 3.0]), np.full(4, 0.25),
                         np.array([0.25, 0.5, 0.75, 1.0]))
    tf = condense_horizontal(raw, 2)
    np.testing.assert_allclose(tf.cdf_lower, [0.25, 0.75])
    np.testing.assert_allclose(tf.cdf_upper, [0.5, 1.0])
    np.testing.assert_allclose(tf.log_f_left, [0.0, 2.0])
    np.testing.assert_allclose(tf.log_f_right, [1.0, 3.0])
    np.testing.assert_allclose(tf.mass, [0.5, 0.5])
    assert not tf.uneven_tail


def test_condense_horizontal_noop_at_full_budget():
    rng = np.random.default_rng(0)
    x = np.sort(rng.normal(size=12))
    m = rng.dirichlet(np.ones(12))
    raw = RawConvolution(x, m, np.cumsum(m))
    tf = condense_horizontal(raw, 12)
    np.testing.assert_array_equal(tf.cdf_lower, tf.cdf_upper)
    np.testing.assert_array_equal(tf.cdf_upper, raw.cumulative)
    np.testing.assert_array_equal(tf.log_f_left, x)


def test_condense_horizontal_remainder_flagged():
    rng = np.random.default_rng(1)
    x = np.sort(rng.normal(size=10))
    m = np.full(10, 0.1)
    tf = condense_horizontal(RawConvolution(x, m, np.cumsum(m)), 3)
    assert tf.uneven_tail
    assert tf.n_bins == 3
    assert tf.cdf_upper[-1] == pytest.approx(1.0)


def test_condense_vertical_hand_trace():
    raw = RawConvolution(np.array([0.0, 1.0, 2.0, 3.0]), np.full(4, 0.25),
                         np.array([0.25, 0.5, 0.75, 1.0]))
    tf = condense_vertical(raw, 2)
    np.testing.assert_allclose(tf.cdf_upper, [0.5, 1.0])
    np.testing.assert_allclose(tf.mass, [0.5, 0.5])
    # bins hold atoms {1,2} and {3,4}: mass-weighted representatives
    np.testing.assert_allclose(tf.rep, [0.5, 2.5])
    np.testing.assert_allclose(tf.log_f_left, [0.0, 2.0])
    np.testing.assert_allclose(tf.log_f_right, [1.0, 3.0])


def test_condense_vertical_uniform_masses_no_split():
    rng = np.random.default_rng(2)
    x = np.sort(rng.normal(size=100))
    m = np.full(100, 0.01)
    tf = condense_vertical(RawConvolution(x, m, np.cumsum(m)), 10)
    np.testing.assert_allclose(tf.rep, x.reshape(10, 10).mean(axis=1), atol=1e-12)
    np.testing.assert_allclose(tf.mass, 0.1, atol=1e-12)


def test_condense_vertical_splits_straddling_atom():
    # one heavy atom straddles the 0.5 break: its mass splits proportionally
    x = np.array([0.0, 1.0, 2.0])
    m = np.array([0.25, 0.5, 0.25])
    tf = condense_vertical(RawConvolution(x, m, np.cumsum(m)), 2)
    np.testing.assert_allclose(tf.mass, [0.5, 0.5])
    # first slab: 0.25 at 0.0 plus 0.25 of the straddler at 1.0
    np.testing.assert_allclose(tf.rep, [0.5, 1.5])
    np.testing.assert_allclose(tf.log_f_left, [0.0, 1.0])
    np.testing.assert_allclose(tf.log_f_right, [1.0, 2.0])


def test_condense_preconditions():
    raw = RawConvolution(np.array([0.0, 1.0]), np.array([0.5, 0.5]), np.array([0.5, 1.0]))
    with pytest.raises(DomainError):
        condense_horizontal(raw, 3)
    with pytest.raises(DomainError):
        condense_vertical(raw, 3)


def test_mass_conservation_through_pipeline():
    rng = np.random.default_rng(3)
    for _ in range(20):
        na, nb = rng.integers(3, 40, size=2)
        wa = atoms_tf(np.sort(rng.normal(size=na)), rng.dirichlet(np.ones(na)))
        wb = atoms_tf(np.sort(rng.normal(size=nb)), rng.dirichlet(np.ones(nb)))
        raw = convolve(wa, wb)
        assert raw.mass.sum() == pytest.approx(1.0, abs=1e-9)
        n_bins = int(rng.integers(2, na * nb + 1))
        for condense in (condense_horizontal, condense_vertical):
            tf = condense(raw, n_bins)
            assert tf.mass.sum() == pytest.approx(1.0, abs=1e-9)
            assert tf.cdf_upper[-1] == pytest.approx(1.0, abs=1e-9)


def _exact_product_cdf(wa, wb, points):
    """Brute-force CDF of the product distribution at the given points."""
    sums = np.add.outer(wa.rep, wb.rep).ravel()
    mass = np.multiply.outer(wa.mass, wb.mass).ravel()
    return np.array([mass[sums <= p].sum() for p in points])


def test_horizontal_condensation_brackets_exact_cdf():
    # containment of the exact discrete product CDF at every output bin edge
    rng = np.random.default_rng(4)
    for _ in range(30):
        na, nb = rng.integers(2, 21, size=2)
        wa = atoms_tf(np.sort(rng.normal(size=na) * 3), rng.dirichlet(np.ones(na)))
        wb = atoms_tf(np.sort(rng.normal(size=nb) * 3), rng.dirichlet(np.ones(nb)))
        n_bins = int(rng.integers(2, min(10, na * nb) + 1))
        tf = condense_horizontal(convolve(wa, wb), n_bins)
        edges = np.concatenate([tf.log_f_left, tf.log_f_right])
        exact = _exact_product_cdf(wa, wb, edges)
        for edge, value in zip(edges, exact):
            lo, hi = elementary_evalue(tf, edge)
            assert lo - 1e-12 <= value <= hi + 1e-12


def test_composite_single_component_equals_elementary():
    table = ContingencyTable([[30, 4], [7, 21]], 1)
    post = from_table(table, alpha=1.0)
    logd = sample_log_densities(post, 10_000, np.random.default_rng(5))
    t = float(np.quantile(logd, 0.4))
    for mode in (AXIS_HORIZONTAL, AXIS_VERTICAL):
        w = truth_function_from_log_densities(logd, 50, mode)
        assert composite_evalue([w], [t], mode) == elementary_evalue(w, t)


def test_composite_rejects_mixed_modes_and_bad_lengths():
    w_h = lognormal_reference(0.0, 1.0, 10, AXIS_HORIZONTAL)
    w_v = lognormal_reference(0.0, 1.0, 10, AXIS_VERTICAL)
    with pytest.raises(DomainError):
        composite_evalue([w_h, w_v], [0.0, 0.0], AXIS_HORIZONTAL)
    with pytest.raises(DomainError):
        composite_evalue([w_h], [0.0, 0.0], AXIS_HORIZONTAL)
    with pytest.raises(DomainError):
        composite_evalue([], [], AXIS_HORIZONTAL)


def test_composite_vertical_commutes_up_to_bin_budget():
    rng = np.random.default_rng(6)
    tables = [random_table(rng) for _ in range(3)]
    n_bins = 50
    ws, ts = [], []
    for i, table in enumerate(tables):
        post = from_table(table, alpha=1.0)
        logd = sample_log_densities(post, 20_000, np.random.default_rng(100 + i))
        ws.append(truth_function_from_log_densities(logd, n_bins, AXIS_VERTICAL))
        ts.append(float(np.quantile(logd, 0.3)))
    base = composite_evalue(ws, ts, AXIS_VERTICAL)[0]
    for perm in ((1, 0, 2), (2, 1, 0), (1, 2, 0)):
        permuted = composite_evalue([ws[i] for i in perm], [ts[i] for i in perm],
                                    AXIS_VERTICAL)[0]
        assert abs(permuted - base) <= 2.0 / n_bins


def test_composite_horizontal_permutations_stay_bracketed():
    # horizontal intervals under permuted inputs keep bracketing the same
    # exact value, so any two of them must overlap within the bin resolution
    rng = np.random.default_rng(7)
    ws, ts = [], []
    n_bins = 50
    for i in range(3):
        table = random_table(rng)
        post = from_table(table, alpha=1.0)
        logd = sample_log_densities(post, 20_000, np.random.default_rng(200 + i))
        ws.append(truth_function_from_log_densities(logd, n_bins, AXIS_HORIZONTAL))
        ts.append(float(np.quantile(logd, 0.6)))
    lo0, hi0 = composite_evalue(ws, ts, AXIS_HORIZONTAL)
    for perm in ((1, 0, 2), (2, 1, 0)):
        lo, hi = composite_evalue([ws[i] for i in perm], [ts[i] for i in perm],
                                  AXIS_HORIZONTAL)
        assert lo <= hi0 + 2.0 / n_bins and lo0 <= hi + 2.0 / n_bins


def test_lognormal_reference_median_and_coarse_quantiles():
    ref_h = lognormal_reference(0.0, 1.0, 100, AXIS_HORIZONTAL)
    lo, hi = elementary_evalue(ref_h, 0.0)
    assert lo - 1e-9 <= 0.5 <= hi + 1e-9
    ref_v = lognormal_reference(0.0, 1.0, 100, AXIS_VERTICAL)
    assert elementary_evalue(ref_v, 0.0)[0] == pytest.approx(0.5, abs=0.01)
    two = lognormal_reference(2.0, 0.5, 2, AXIS_VERTICAL)
    assert two.n_bins == 2
    assert two.log_f_right[0] == pytest.approx(2.0, abs=1e-9)  # split at the median
    np.testing.assert_allclose(two.mass, 0.5)


def test_lognormal_reference_rejects_bad_sigma():
    with pytest.raises(DomainError):
        lognormal_reference(0.0, 0.0, 10, AXIS_HORIZONTAL)
    with pytest.raises(DomainError):
        lognormal_reference(0.0, -1.0, 10, AXIS_VERTICAL)


def test_lognormal_product_law_horizontal_bounds():
    # product of two log-normals is log-normal with summed parameters; the
    # condensed bounds track its CDF to within the atom-placement error
    mu1, s1, mu2, s2 = 0.3, 1.0, -0.5, 0.7
    n_bins = 100
    wa = lognormal_reference(mu1, s1, n_bins, AXIS_HORIZONTAL)
    wb = lognormal_reference(mu2, s2, n_bins, AXIS_HORIZONTAL)
    tf = condense_horizontal(convolve(wa, wb), n_bins)
    mu, sigma = mu1 + mu2, np.hypot(s1, s2)
    for edge in np.concatenate([tf.log_f_left, tf.log_f_right]):
        lo, hi = elementary_evalue(tf, float(edge))
        analytic = norm.cdf((edge - mu) / sigma)
        assert lo - 0.02 <= analytic <= hi + 0.02


def test_lognormal_product_law_vertical_tracking():
    mu1, s1, mu2, s2 = 0.0, 1.0, 0.0, 1.0
    n_bins = 100
    wa = lognormal_reference(mu1, s1, n_bins, AXIS_VERTICAL)
    wb = lognormal_reference(mu2, s2, n_bins, AXIS_VERTICAL)
    tf = condense_vertical(convolve(wa, wb), n_bins)
    sigma = np.hypot(s1, s2)
    sup = 0.0
    for edge, value in ((tf.log_f_left, tf.cdf_lower), (tf.log_f_right, tf.cdf_upper)):
        sup = max(sup, np.abs(norm.cdf(edge / sigma) - value).max())
    assert sup <= 0.02


def test_lognormal_vertical_convergence_in_bins():
    sigma = np.hypot(1.0, 1.0)
    sups = []
    for n_bins in (50, 100, 200):
        wa = lognormal_reference(0.0, 1.0, n_bins, AXIS_VERTICAL)
        tf = condense_vertical(convolve(wa, wa), n_bins)
        sups.append(float(np.abs(norm.cdf(tf.log_f_right / sigma) - tf.cdf_upper).max()))
    assert sups[0] >= sups[1] >= sups[2]


def test_raw_convolution_validation():
    with pytest.raises(DomainError):
        RawConvolution(np.array([1.0, 0.0]), np.array([0.5, 0.5]), np.array([0.5, 1.0]))
    with pytest.raises(DomainError):
        RawConvolution(np.array([0.0, 1.0]), np.array([0.9, 0.5]), np.array([0.9, 1.4]))
