"""Closed forms and special functions: the incomplete-beta crossing curve,
its hypergeometric and excursion-integral equivalents, the triangle mapping,
diffusion scale functions, generator residuals, and goodness-of-fit tests.

Every endpoint-singular integral is tamed by a power substitution before
adaptive quadrature (u = v^3 at exponent -2/3 endpoints, u = v^{3/2} at
exponent -1/3 endpoints), so the quadrature engine only ever sees smooth
integrands.  Gamma/beta constants come from log-gamma, not typed-in decimals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import exp, lgamma, pi, sqrt
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError, QuadratureError
from .geometry import bisect_increasing, build_vase_grid, shape_from_spec
from .kernels import _layer_rates


def log_beta(a: float, b: float) -> float:
    return lgamma(a) + lgamma(b) - lgamma(a + b)


B_THIRD = exp(log_beta(1.0 / 3.0, 1.0 / 3.0))          # B(1/3, 1/3)
B_TWO_THIRDS = exp(log_beta(2.0 / 3.0, 2.0 / 3.0))     # B(2/3, 2/3)
GAMMA_TWO_THIRDS = exp(lgamma(2.0 / 3.0))


@dataclass
class Quadrature:
    """Adaptive quadrature with an enforced absolute-error budget."""

    tolerance: float = 1e-10
    node_budget: int = 200

    def integrate(self, fn: Callable[[float], float], a: float, b: float,
                  points=None) -> float:
        from scipy.integrate import quad

        val, err = quad(fn, a, b, epsabs=self.tolerance * 0.1,
                        epsrel=1e-12, limit=self.node_budget, points=points)
        if not math.isfinite(val) or err > self.tolerance:
            raise QuadratureError(
                f"error estimate {err} above tolerance {self.tolerance}")
        return val


_QUAD = Quadrature()


# ---------------------------------------------------------------------------
# regularized incomplete beta (continued fraction)
# ---------------------------------------------------------------------------

def _beta_contfrac(a: float, b: float, x: float, itmax: int = 300,
                   eps: float = 1e-16) -> float:
    """Continued fraction for the incomplete beta; modified Lentz scheme."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < 1e-300:
        d = 1e-300
    d = 1.0 / d
    h = d
    for m in range(1, itmax + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < 1e-300:
            d = 1e-300
        c = 1.0 + aa / c
        if abs(c) < 1e-300:
            c = 1e-300
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < 1e-300:
            d = 1e-300
        c = 1.0 + aa / c
        if abs(c) < 1e-300:
            c = 1e-300
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise QuadratureError("incomplete beta continued fraction did not converge")


def regularized_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) accurate to ~1e-15 on [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    front = exp(a * math.log(x) + b * math.log1p(-x) - log_beta(a, b))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_contfrac(a, b, x) / a
    return 1.0 - front * _beta_contfrac(b, a, 1.0 - x) / b


# ---------------------------------------------------------------------------
# the last-visited-side curve, three ways
# ---------------------------------------------------------------------------

def watts_closed(s: float) -> float:
    """Regularized incomplete beta I_s(2/3, 2/3); symmetric about 1/2."""
    return regularized_beta(2.0 / 3.0, 2.0 / 3.0, s)


def hyp2f1_near_one_third(z: float, quad: Quadrature = _QUAD) -> float:
    """2F1(1, 4/3; 5/3; z) for z in [0, 1) via the Euler integral with the
    t -> 1 singularity removed by 1 - t = v^3."""
    if not 0.0 <= z < 1.0:
        raise ParameterError(f"need z in [0,1), got {z}")
    integrand = lambda v: 3.0 * (1.0 - v ** 3) ** (1.0 / 3.0) \
        / (1.0 - z * (1.0 - v ** 3))
    val = quad.integrate(integrand, 0.0, 1.0)
    return val / exp(log_beta(4.0 / 3.0, 1.0 / 3.0))


def watts_via_hypergeometric(a: float, quad: Quadrature = _QUAD) -> float:
    """(pi sqrt(3) / (3 Gamma(2/3)^3)) (a(1-a))^{2/3} 2F1(1, 4/3; 5/3; a).

    Arguments above 1/2 route through the s <-> 1-s symmetry, away from the
    hypergeometric singularity at z = 1.
    """
    if not 0.0 <= a <= 1.0:
        raise ParameterError(f"need a in [0,1], got {a}")
    if a in (0.0, 1.0):
        return float(a)
    if a > 0.5:
        return 1.0 - watts_via_hypergeometric(1.0 - a, quad)
    pref = pi * sqrt(3.0) / (3.0 * GAMMA_TWO_THIRDS ** 3)
    return pref * (a * (1.0 - a)) ** (2.0 / 3.0) * hyp2f1_near_one_third(a, quad)


def watts_via_integral(a: float, quad: Quadrature = _QUAD) -> float:
    """The excursion-measure form: the hitting mass of the far reflecting
    side, collapsed to F'(a)^{-1} (sqrt(3)/(2 pi B(1/3,1/3)))
    int_1^inf du / ((u(u-1))^{2/3} (u - a)).

    The half-plane harmonic measure (a Cauchy kernel) and the excursion
    height weighting are already folded into this single integral; the
    u -> 1 endpoint is flattened by u = 1 + v^3 and the far field mapped to
    (0, 1/2] by u = 1/w.
    """
    if not 0.0 < a < 1.0:
        raise ParameterError(f"need a in (0,1), got {a}")
    near = lambda v: 3.0 * (1.0 + v ** 3) ** (-2.0 / 3.0) / (1.0 + v ** 3 - a)
    far = lambda w: w ** (1.0 / 3.0) * (1.0 - w) ** (-2.0 / 3.0) / (1.0 - a * w)
    J = quad.integrate(near, 0.0, 1.0) + quad.integrate(far, 0.0, 0.5)
    return (sqrt(3.0) / (2.0 * pi)) * (a * (1.0 - a)) ** (2.0 / 3.0) * J


# ---------------------------------------------------------------------------
# the triangle boundary map
# ---------------------------------------------------------------------------

def sc_map(a: float, quad: Quadrature = _QUAD) -> float:
    """F(a) = int_0^a u^{-2/3}(1-u)^{-2/3} du / B(1/3,1/3) on [0, 1].

    Real restriction of the half-plane-to-triangle map; fixes 0, 1/2, 1.
    """
    if not 0.0 <= a <= 1.0:
        raise ParameterError(f"need a in [0,1], got {a}")
    if a in (0.0, 1.0):
        return float(a)
    lo_piece = lambda v: 3.0 * (1.0 - v ** 3) ** (-2.0 / 3.0)
    hi_piece = lambda w: 3.0 * (1.0 - w ** 3) ** (-2.0 / 3.0)
    m = min(a, 0.5)
    total = quad.integrate(lo_piece, 0.0, m ** (1.0 / 3.0))
    if a > 0.5:
        total += quad.integrate(hi_piece, (1.0 - a) ** (1.0 / 3.0),
                                0.5 ** (1.0 / 3.0))
    return total / B_THIRD


def sc_deriv(a: float) -> float:
    if not 0.0 < a < 1.0:
        raise ParameterError(f"need a in (0,1), got {a}")
    return (a * (1.0 - a)) ** (-2.0 / 3.0) / B_THIRD


def sc_inverse(x: float, tol: float = 1e-10) -> float:
    """Monotone inverse of sc_map on [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"need x in [0,1], got {x}")
    if x in (0.0, 1.0):
        return float(x)
    return bisect_increasing(sc_map, x, lo=0.0, hi=1.0, tol=tol)


def watts_composed(s: float) -> float:
    """watts_closed evaluated at the map preimage of the exit position."""
    return watts_closed(sc_inverse(s))


# ---------------------------------------------------------------------------
# diffusion scale functions and generator checks
# ---------------------------------------------------------------------------

def bessel3_hit(x: float, a: float, b: float) -> float:
    """(1/x - 1/b)/(1/a - 1/b): scale-1/x hitting probability of a before b."""
    if not 0 < a <= x <= b:
        raise ParameterError(f"need 0 < a <= x <= b, got {(a, x, b)}")
    return (1.0 / x - 1.0 / b) / (1.0 / a - 1.0 / b)


def scale_function(shape, x: float, quad: Quadrature = _QUAD) -> float:
    """phi(x) = int_1^x du / h(u)^2, vanishing at 1."""
    shape = shape_from_spec(shape)
    if x <= 0:
        raise ParameterError("scale function needs x > 0")
    if x == 1.0:
        return 0.0
    integrand = lambda u: 1.0 / shape(u) ** 2
    try:
        return quad.integrate(integrand, 1.0, x)
    except QuadratureError as exc:
        raise QuadratureError(
            f"scale integral failed on [1, {x}]; divergent near the apex? "
            f"({exc})") from exc


def generator_residual(shape, f, f_prime, f_second, x: float, resolution: int) -> float:
    """|N^2 (Qproj f)(x_k) - ((h'/h) f' + f''/2)(x)| at the grid layer nearest x.

    First-order in 1/N for smooth f; the residual at a constant f is exactly
    zero because projected rate rows sum to zero.
    """
    shape = shape_from_spec(shape)
    N = int(resolution)
    k = round(N * shape(x))
    if k < 2:
        raise ParameterError("x too close to the apex for this resolution")
    grid = build_vase_grid(shape, N, k + 1)
    cot = grid.cot_angles()
    c, d = _layer_rates(cot, k)
    up = (2 * k + 3) / (2 * k + 1) * c
    dn = (2 * k - 1) / (2 * k + 1) * d
    xs = grid.abscissas
    qf = up * (f(xs[k + 1]) - f(xs[k])) + dn * (f(xs[k - 1]) - f(xs[k]))
    limit = shape.derivative(x) / shape(x) * f_prime(x) + 0.5 * f_second(x)
    return abs(N ** 2 * qf - limit)


# ---------------------------------------------------------------------------
# goodness of fit
# ---------------------------------------------------------------------------

def _merge_small_bins(counts: np.ndarray, expected: np.ndarray, min_expected: float):
    """Merge adjacent bins until every expected count reaches the floor."""
    cs, es = [], []
    acc_c = acc_e = 0.0
    for c, e in zip(counts, expected):
        acc_c += c
        acc_e += e
        if acc_e >= min_expected:
            cs.append(acc_c)
            es.append(acc_e)
            acc_c = acc_e = 0.0
    if acc_e > 0:
        if es:
            cs[-1] += acc_c
            es[-1] += acc_e
        else:
            cs, es = [acc_c], [acc_e]
    return np.array(cs), np.array(es)


def chi_square(counts, expected=None, min_expected: float = 5.0) -> dict:
    """Chi-square statistic and upper-tail p-value (regularized upper
    incomplete gamma).  Under-filled bins are merged with a report."""
    from scipy.special import gammaincc

    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    if expected is None:
        expected = np.full(counts.size, n / counts.size)
    else:
        expected = np.asarray(expected, dtype=float) * n / np.sum(expected)
    merged_from = counts.size
    counts, expected = _merge_small_bins(counts, expected, min_expected)
    if counts.size < 2:
        raise ParameterError("too few bins after merging")
    stat = float(((counts - expected) ** 2 / expected).sum())
    df = counts.size - 1
    pvalue = float(gammaincc(df / 2.0, stat / 2.0))
    return {"statistic": stat, "df": df, "p_value": pvalue,
            "bins": counts.size, "merged_from": merged_from}


def ks_statistic(samples, cdf: Optional[Callable[[float], float]] = None) -> float:
    """One-sample Kolmogorov-Smirnov distance; default null is uniform [0,1]."""
    u = np.sort(np.asarray(samples, dtype=float))
    n = u.size
    if cdf is not None:
        u = np.array([cdf(v) for v in u])
    grid = np.arange(1, n + 1) / n
    return float(max((grid - u).max(), (u - (grid - 1.0 / n)).max()))


def kolmogorov_sf(x: float, terms: int = 100) -> float:
    """Asymptotic Kolmogorov survival function 2 sum (-1)^{j-1} e^{-2 j^2 x^2}."""
    if x <= 0:
        return 1.0
    total = 0.0
    for j in range(1, terms + 1):
        term = math.exp(-2.0 * j * j * x * x)
        total += term if j % 2 == 1 else -term
        if term < 1e-18:
            break
    return min(1.0, max(0.0, 2.0 * total))


def kolmogorov_critical(alpha: float, n: int) -> float:
    """Critical KS distance at level alpha for sample size n (asymptotic)."""
    if not 0 < alpha < 1:
        raise ParameterError("alpha in (0,1)")
    lo, hi = 1e-6, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if kolmogorov_sf(mid) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) / math.sqrt(n)


def ks_test(samples, cdf=None) -> dict:
    d = ks_statistic(samples, cdf)
    n = len(samples)
    return {"distance": d, "n": n,
            "p_value": kolmogorov_sf(d * math.sqrt(n))}


# ---------------------------------------------------------------------------
# curve export
# ---------------------------------------------------------------------------

def export_watts_curves(path, n_grid: int = 99) -> None:
    """CSV of (s, watts_closed, watts_composed): the two candidate laws for
    the last-visited-side curve against the exit fraction."""
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "watts_closed", "watts_composed"])
        for i in range(1, n_grid + 1):
            s = i / (n_grid + 1)
            w.writerow([s, watts_closed(s), watts_composed(s)])
