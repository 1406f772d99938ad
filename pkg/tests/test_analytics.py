import math

import numpy as np
import pytest

from wedgewalk import (
    ParameterError,
    Quadrature,
    QuadratureError,
    bessel3_hit,
    chi_square,
    generator_residual,
    kolmogorov_critical,
    ks_statistic,
    ks_test,
    linear_shape,
    power_shape,
    regularized_beta,
    scale_function,
    sc_deriv,
    sc_inverse,
    sc_map,
    watts_closed,
    watts_composed,
    watts_via_hypergeometric,
    watts_via_integral,
)
from wedgewalk.analytics import B_THIRD, B_TWO_THIRDS, kolmogorov_sf, log_beta


def test_beta_constants_from_log_gamma():
    # B(1/3,1/3) = Gamma(1/3)^2 / Gamma(2/3), cross-checked through the
    # reflection value Gamma(1/3)Gamma(2/3) = 2 pi / sqrt(3)
    g13 = math.exp(math.lgamma(1 / 3))
    g23 = math.exp(math.lgamma(2 / 3))
    assert g13 * g23 == pytest.approx(2 * math.pi / math.sqrt(3), rel=1e-14)
    assert B_THIRD == pytest.approx(g13 * g13 / g23, rel=1e-14)
    assert B_TWO_THIRDS == pytest.approx(g23 * g23 / math.exp(math.lgamma(4 / 3)),
                                         rel=1e-14)


def quad_incomplete_beta(a, x):
    """Independent oracle: direct quadrature of t^{a-1}(1-t)^{a-1} with the
    endpoint substitution t = v^{1/(1-a)}-style power flattening."""
    q = Quadrature(tolerance=1e-12)
    m = min(x, 0.5)
    p = 1.0 / a                       # t = v^p removes the t^{a-1} singularity
    total = q.integrate(lambda v: p * (1 - v ** p) ** (a - 1.0), 0.0, m ** a)
    if x > 0.5:
        total += q.integrate(lambda w: p * (1 - w ** p) ** (a - 1.0),
                             (1 - x) ** a, 0.5 ** a)
    return total / math.exp(log_beta(a, a))


@pytest.mark.parametrize("x", [0.05, 0.3, 0.5, 0.77, 0.99])
def test_regularized_beta_against_quadrature(x):
    assert regularized_beta(2 / 3, 2 / 3, x) == pytest.approx(
        quad_incomplete_beta(2 / 3, x), abs=1e-10)
    assert regularized_beta(1 / 3, 1 / 3, x) == pytest.approx(
        quad_incomplete_beta(1 / 3, x), abs=1e-10)


def test_watts_closed_basics():
    assert watts_closed(0.0) == 0.0
    assert watts_closed(1.0) == 1.0
    assert watts_closed(0.5) == pytest.approx(0.5, abs=1e-14)
    v = watts_closed(0.25)
    assert 0.0 < v < 0.5
    assert watts_closed(0.25) + watts_closed(0.75) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ParameterError):
        watts_closed(1.2)


def test_watts_symmetry_sweep():
    for s in np.linspace(0.01, 0.99, 37):
        assert watts_closed(s) + watts_closed(1 - s) == pytest.approx(1.0, abs=1e-12)


def test_watts_monotone():
    grid = np.linspace(0.0, 1.0, 1001)
    vals = [watts_closed(s) for s in grid]
    assert np.all(np.diff(vals) > 0)


def test_three_way_identity():
    for a in np.arange(0.1, 0.95, 0.1):
        c = watts_closed(a)
        h = watts_via_hypergeometric(a)
        v = watts_via_integral(a)
        assert abs(c - h) <= 1e-8
        assert abs(c - v) <= 1e-8
        assert abs(h - v) <= 1e-8


def test_hypergeometric_small_and_large_arguments():
    assert watts_via_hypergeometric(1e-6) == pytest.approx(0.0, abs=1e-3)
    assert watts_via_hypergeometric(0.5) == pytest.approx(0.5, abs=1e-8)
    # near one, the reflected branch takes over
    assert watts_via_hypergeometric(0.97) == pytest.approx(watts_closed(0.97),
                                                           abs=1e-8)


def test_integral_form_limits():
    assert watts_via_integral(0.999) > 0.98
    assert watts_via_integral(0.5) == pytest.approx(0.5, abs=1e-8)
    with pytest.raises(ParameterError):
        watts_via_integral(0.0)


def test_sc_map_basics():
    assert sc_map(0.0) == 0.0
    assert sc_map(1.0) == 1.0
    assert sc_map(0.5) == pytest.approx(0.5, abs=1e-12)
    for a in (0.1, 0.37, 0.92):
        assert sc_map(a) + sc_map(1 - a) == pytest.approx(1.0, abs=1e-12)
    grid = np.linspace(0, 1, 1001)
    vals = [sc_map(a) for a in grid]
    assert np.all(np.diff(vals) > 0)


@pytest.mark.parametrize("a", [0.05, 0.3, 0.5, 0.8, 0.97])
def test_sc_map_is_incomplete_beta_third(a):
    # dual route: quadrature map vs continued-fraction incomplete beta
    assert sc_map(a) == pytest.approx(regularized_beta(1 / 3, 1 / 3, a), abs=1e-10)


def test_sc_inverse_roundtrip():
    assert sc_inverse(sc_map(0.3)) == pytest.approx(0.3, abs=1e-9)
    assert sc_inverse(0.0) == 0.0 and sc_inverse(1.0) == 1.0
    with pytest.raises(ParameterError):
        sc_inverse(1.5)


def test_sc_deriv_matches_difference_quotient():
    a, e = 0.4, 1e-6
    fd = (sc_map(a + e) - sc_map(a - e)) / (2 * e)
    assert sc_deriv(a) == pytest.approx(fd, rel=1e-7)


def test_watts_composed_agrees_at_fixed_points():
    assert watts_composed(0.5) == pytest.approx(0.5, abs=1e-9)
    assert watts_composed(0.9) > 0.5 > watts_composed(0.1)
    # away from the fixed points the composed curve differs strongly
    assert abs(watts_composed(0.25) - watts_closed(0.25)) > 0.1


def test_bessel3_hit():
    assert bessel3_hit(25, 25, 200) == 1.0
    assert bessel3_hit(50, 25, 200) == pytest.approx(3 / 7, abs=1e-15)
    assert bessel3_hit(2, 1, 1e15) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ParameterError):
        bessel3_hit(10, 20, 30)


def test_scale_function_closed_forms():
    cot2 = 1.0 / math.tan(0.61) ** 2
    for x in (0.5, 2.0, 7.0):
        got = scale_function(linear_shape(math.tan(0.61)), x)
        assert got == pytest.approx(cot2 * (1 - 1 / x), abs=1e-10)
    # h = x^1.5: integral of u^-3 from 1 to x
    got = scale_function(power_shape(1.5), 4.0)
    assert got == pytest.approx((1 - 4.0 ** -2) / 2, abs=1e-10)
    assert scale_function(power_shape(1.5), 1.0) == 0.0
    with pytest.raises(ParameterError):
        scale_function(power_shape(1.5), 0.0)


def test_scale_consistency_with_bessel3():
    shape = linear_shape(math.tan(0.8))
    phi = lambda x: scale_function(shape, x)
    x, a, b = 3.0, 1.5, 9.0
    ratio = (phi(x) - phi(b)) / (phi(a) - phi(b))
    assert ratio == pytest.approx(bessel3_hit(x, a, b), abs=1e-12)


def test_generator_residual_bessel_case():
    shape = linear_shape(1.0)
    f = lambda x: x * x
    fp = lambda x: 2 * x
    fpp = lambda x: 2.0
    r64 = generator_residual(shape, f, fp, fpp, 1.0, 64)
    r256 = generator_residual(shape, f, fp, fpp, 1.0, 256)
    assert r256 < r64 < 0.1


def test_generator_residual_halves():
    shape = power_shape(2.0)
    f = lambda x: math.exp(-x)
    fp = lambda x: -math.exp(-x)
    fpp = lambda x: math.exp(-x)
    r32 = generator_residual(shape, f, fp, fpp, 1.0, 32)
    r64 = generator_residual(shape, f, fp, fpp, 1.0, 64)
    assert 0.3 <= r64 / r32 <= 0.7


def test_generator_residual_constant_function():
    shape = power_shape(2.0)
    zero = lambda x: 0.0
    r = generator_residual(shape, lambda x: 3.0, zero, zero, 1.0, 32)
    assert r == 0.0


def test_generator_residual_near_apex_error():
    with pytest.raises(ParameterError):
        generator_residual(power_shape(2.0), lambda x: x, lambda x: 1.0,
                           lambda x: 0.0, 0.05, 8)


def test_chi_square_exact_uniform():
    out = chi_square(np.full(20, 50))
    assert out["statistic"] == 0.0
    assert out["p_value"] == pytest.approx(1.0)


def test_chi_square_merging():
    # expected count 2 per bin forces adjacent merging
    counts = np.array([2, 1, 3, 2, 2, 2, 1, 3, 2, 2])
    out = chi_square(counts, min_expected=5.0)
    assert out["bins"] < 10
    assert out["merged_from"] == 10


def test_chi_square_detects_bias():
    counts = np.array([100, 100, 100, 100, 300])
    out = chi_square(counts)
    assert out["p_value"] < 1e-6


def test_ks_on_own_grid():
    n = 1000
    samples = (np.arange(1, n + 1) - 0.5) / n
    assert ks_statistic(samples) <= 0.5 / n + 1e-12


def test_kolmogorov_distribution():
    # classical table values of the Kolmogorov statistic
    assert kolmogorov_sf(1.3581) == pytest.approx(0.05, abs=2e-4)
    assert kolmogorov_sf(1.6276) == pytest.approx(0.01, abs=1e-4)
    c = kolmogorov_critical(0.05, 10000)
    assert c == pytest.approx(1.3581 / 100, rel=1e-3)


def test_gof_calibration_uniform():
    # median p-value over 20 seeded uniform runs sits in the bulk
    ps = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        counts, _ = np.histogram(rng.random(100000), bins=50, range=(0, 1))
        ps.append(chi_square(counts)["p_value"])
    assert 0.2 < float(np.median(ps)) < 0.8


def test_ks_test_pvalue_reasonable():
    rng = np.random.default_rng(5)
    out = ks_test(rng.random(20000))
    assert out["p_value"] > 0.001


def test_quadrature_tolerance_enforced():
    import warnings

    q = Quadrature(tolerance=1e-10, node_budget=3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(QuadratureError):
            # highly oscillatory integrand cannot meet the budget
            q.integrate(lambda x: math.sin(1000 * x * x), 0.0, 30.0)
