"""Closed-form distributions, series coefficients and quadrature for the
selection-outage asymptotics.

Dimension bookkeeping for an (n_t, n_r, L) link:

* ``m = (n_t - 1) * (n_r - 1)`` is the two-stream selection diversity
  order; the small-threshold outage of the bounding variable behaves as
  ``leading * x^m``.
* For general L the achievable diversity order lies between
  ``m_lower = (n_t - L + 1) * (n_r - L + 1)`` and
  ``m_upper = (n_t - L + 1) * (n_r - 1)``; the bounds coincide at L = 2.

Chi-square convention: :func:`chi2n_cdf` (x, n) is the law of the squared
norm of an n-dimensional unit-variance complex Gaussian vector, i.e.
Gamma(shape n, scale 1).  Every formula in this module uses that
convention.

Coefficients are evaluated with exact rational arithmetic and reduced to
floats at the boundary: the leading outage coefficient is a difference of
nearly equal terms, which cancels catastrophically in naive floating
point for large m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate, special

HALF_PI = math.pi / 2.0


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge to the requested tolerance."""


@dataclass(frozen=True)
class AnalyticSpec:
    """Dimension parameters with the derived diversity constants."""

    n_t: int
    n_r: int
    L: int = 2

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"stream count must be positive, got {self.L}")
        if self.n_t < self.L or self.n_r < self.L:
            raise ValueError(f"need n_t >= L and n_r >= L, got ({self.n_t}, {self.n_r}, {self.L})")

    @property
    def m(self) -> int:
        """Two-stream selection diversity order (n_t - 1)(n_r - 1)."""
        return (self.n_t - 1) * (self.n_r - 1)

    @property
    def m_lower(self) -> int:
        return (self.n_t - self.L + 1) * (self.n_r - self.L + 1)

    @property
    def m_upper(self) -> int:
        return (self.n_t - self.L + 1) * (self.n_r - 1)

    @property
    def psi0(self) -> float:
        """Angle budget (pi/2)/(n_t - 1) splitting the quadrant across
        the n_t - 1 angles measured from one reference column."""
        if self.n_t < 2:
            raise ValueError("psi0 requires n_t >= 2")
        return HALF_PI / (self.n_t - 1)


def theta_pdf(theta, n_r: int):
    """Density of the angle between one column and another's span.

    For an n_r-dimensional complex Gaussian pair the angle density is
    (n_r - 1) sin(2 theta) sin(theta)^(2 n_r - 4) on (0, pi/2).
    """
    if n_r < 2:
        raise ValueError(f"angle density needs n_r >= 2, got {n_r}")
    th = np.asarray(theta, dtype=float)
    if np.any(th <= 0.0) or np.any(th >= HALF_PI):
        raise ValueError("theta must lie strictly inside (0, pi/2)")
    out = (n_r - 1) * np.sin(2 * th) * np.sin(th) ** (2 * n_r - 4)
    return float(out) if np.isscalar(theta) else out


def theta_cdf(theta, n_r: int):
    """Distribution function matching :func:`theta_pdf`: sin(theta)^(2(n_r-1))."""
    if n_r < 2:
        raise ValueError(f"angle law needs n_r >= 2, got {n_r}")
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0.0) or np.any(th > HALF_PI):
        raise ValueError("theta must lie in [0, pi/2]")
    out = np.sin(th) ** (2 * (n_r - 1))
    return float(out) if np.isscalar(theta) else out


def chi2n_cdf(x, n: int):
    """CDF 1 - e^{-x} sum_{k<n} x^k / k! of the Gamma(n, 1) law.

    This is the package's "chi-square with 2n degrees of freedom"; see the
    module docstring for the convention.
    """
    if n < 1:
        raise ValueError(f"degrees parameter must be positive, got {n}")
    xs = np.maximum(np.asarray(x, dtype=float), 0.0)
    out = special.gammainc(n, xs)
    return float(out) if np.isscalar(x) else out


def theta0_pdf(theta, m: int):
    """Density of the largest of the reference angles: m sin^2(theta)^(m-1) sin(2 theta)."""
    if m < 1:
        raise ValueError(f"order parameter must be positive, got {m}")
    th = np.asarray(theta, dtype=float)
    if np.any(th <= 0.0) or np.any(th >= HALF_PI):
        raise ValueError("theta must lie strictly inside (0, pi/2)")
    out = m * np.sin(th) ** (2 * (m - 1)) * np.sin(2 * th)
    return float(out) if np.isscalar(theta) else out


def theta0_cdf(theta, m: int):
    """Distribution function of the largest reference angle: sin^2(theta)^m."""
    if m < 1:
        raise ValueError(f"order parameter must be positive, got {m}")
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0.0) or np.any(th > HALF_PI):
        raise ValueError("theta must lie in [0, pi/2]")
    out = np.sin(th) ** (2 * m)
    return float(out) if np.isscalar(theta) else out


@dataclass(frozen=True)
class ExpansionCoefficients:
    """Small-threshold polynomial data of the bounding outage variable.

    ``leading`` multiplies x^m in the expansion and equals
    1/m! - b_m with b_m = m * tail_sum and
    tail_sum = sum_{k=0}^{n_t-3} k! / (m+k+1)!  (empty for n_t = 2).
    ``c`` are the e^{-x}-weighted polynomial coefficients of the head
    part; ``a`` its raw Taylor coefficients, which collapse to
    a_0 = 1, a_n = 0 for 0 < n < m, a_m = -1/m!.

    Exact rational values are kept alongside the float reductions so
    positivity can be decided without rounding.
    """

    n_t: int
    n_r: int
    m: int
    leading: float
    b_m: float
    tail_sum: float
    c: tuple[float, ...]
    a: tuple[float, ...]
    leading_exact: Fraction
    tail_sum_exact: Fraction


def _tail_sum_exact(n_t: int, m: int) -> Fraction:
    total = Fraction(0)
    for k in range(0, n_t - 2):  # k = 0 .. n_t - 3; empty sum for n_t = 2
        total += Fraction(math.factorial(k), math.factorial(m + k + 1))
    return total


def leading_coefficient_exact(n_t: int, n_r: int) -> Fraction:
    """Exact leading coefficient 1/m! - m * tail_sum, without the
    polynomial bookkeeping of :func:`outage_coefficient`."""
    if n_t < 2 or n_r < 2:
        raise ValueError(f"need n_t >= 2 and n_r >= 2, got ({n_t}, {n_r})")
    m = (n_t - 1) * (n_r - 1)
    return Fraction(1, math.factorial(m)) - m * _tail_sum_exact(n_t, m)


def outage_coefficient(n_t: int, n_r: int) -> ExpansionCoefficients:
    """All expansion coefficients for the (n_t, n_r) two-stream geometry."""
    if n_t < 2 or n_r < 2:
        raise ValueError(f"need n_t >= 2 and n_r >= 2, got ({n_t}, {n_r})")
    m = (n_t - 1) * (n_r - 1)
    tail = _tail_sum_exact(n_t, m)
    b_m = m * tail
    leading = Fraction(1, math.factorial(m)) - b_m

    c = []
    for k in range(m):  # defined for k <= m - 1
        ck = Fraction(0)
        for i in range(k + 1):
            ck += Fraction((-1) ** (k - i) * math.factorial(m - k - 1),
                           math.factorial(m - i) * math.factorial(i))
        c.append(ck)
    a = []
    for n in range(m + 1):
        an = Fraction(0)
        for k in range(min(n, m - 1) + 1):
            an += c[k] * Fraction((-1) ** (n - k), math.factorial(n - k))
        a.append(m * an)

    return ExpansionCoefficients(
        n_t=n_t,
        n_r=n_r,
        m=m,
        leading=float(leading),
        b_m=float(b_m),
        tail_sum=float(tail),
        c=tuple(float(v) for v in c),
        a=tuple(float(v) for v in a),
        leading_exact=leading,
        tail_sum_exact=tail,
    )


def _tail_integral(y: float, m: int, n: int) -> float:
    """integral_y^inf F_z(w) w^{-(m+1)} dw with F_z the Gamma(n, 1) CDF."""
    def integrand(w):
        return special.gammainc(n, w) * w ** (-(m + 1))

    result = integrate.quad(integrand, y, np.inf, epsabs=0.0, epsrel=1e-13, limit=400, full_output=True)
    if len(result) > 3:
        raise QuadratureError(f"tail quadrature failed at y={y:.3e}: {result[3]}")
    value, abserr = result[0], result[1]
    if value > 0 and abserr > 1e-8 * value:
        raise QuadratureError(f"tail quadrature at y={y:.3e} only reached relative error {abserr / value:.3e}")
    return value


def pr_outage_quadrature(x: float, n_t: int, n_r: int, restricted: bool = False) -> float:
    """Outage probability of the bounding variable z * sin^2(theta_0) at
    threshold ``x``, by adaptive quadrature.

    ``z`` is Gamma((n_t - 1) n_r, 1) distributed and theta_0 is the
    largest of the n_t - 1 reference angles.  With ``restricted`` the
    angles are conditioned into (0, psi0), which rescales the threshold
    but leaves the small-x exponent unchanged.

    The integral over the angle variable is transformed to
    m * x^m * integral_x^inf F_z(w) w^{-(m+1)} dw, which keeps full
    relative precision for arbitrarily small thresholds.
    """
    if x <= 0:
        raise ValueError(f"threshold must be positive, got {x}")
    spec = AnalyticSpec(n_t, n_r, 2)
    m = spec.m
    n = (n_t - 1) * n_r
    if restricted:
        a0 = math.sin(spec.psi0) ** 2
        norm_c = theta_cdf(spec.psi0, n_r)  # closed form of the angle-pdf integral over (0, psi0)
        prefactor = m * a0 ** m / norm_c ** (n_t - 1)
        y = x / a0
    else:
        prefactor = m
        y = x
    value = prefactor * y ** m * _tail_integral(y, m, n)
    return min(1.0, value)


def exp_integral(k: int, x: float) -> float:
    """Generalized exponential integral E_k(x) = int_1^inf e^{-x m} / m^k dm.

    Non-positive orders are the moment integrals int_1^inf m^{|k|} e^{-x m} dm,
    evaluated by their finite closed form; orders above one come from
    upward recursion k E_{k+1} = e^{-x} - x E_k starting at the library E_1.
    """
    if x <= 0:
        raise ValueError(f"argument must be positive, got {x}")
    k = int(k)
    if k <= 0:
        j = -k
        s = sum(x ** i / math.factorial(i) for i in range(j + 1))
        return math.factorial(j) * math.exp(-x) * s / x ** (j + 1)
    value = float(special.exp1(x))
    for i in range(1, k):
        value = (math.exp(-x) - x * value) / i
    return value


def series_partial(m: int, k_max: int) -> float:
    """Partial sum sum_{k=1}^{k_max} k! / (m+k+1)! via ratio recurrences.

    Non-decreasing in ``k_max`` and bounded by 1 / (m (m+1)!), its limit.
    """
    if m < 1 or k_max < 1:
        raise ValueError(f"need m >= 1 and k_max >= 1, got m={m}, k_max={k_max}")
    total = 0.0
    term = math.exp(math.lgamma(2.0) - math.lgamma(m + 3.0))  # 1!/(m+2)!
    for k in range(1, k_max + 1):
        total += term
        term *= (k + 1) / (m + k + 2)
    return total


def binomial_identity_check(m: int, k: int) -> bool:
    """Exact check of sum_{i<=k} (-1)^i C(m, i) == (-1)^k C(m-1, k)."""
    if k < 0 or k > m - 1:
        raise ValueError(f"need 0 <= k <= m-1, got m={m}, k={k}")
    lhs = sum((-1) ** i * math.comb(m, i) for i in range(k + 1))
    rhs = (-1) ** k * math.comb(m - 1, k)
    return lhs == rhs


def diversity_bounds(n_t: int, n_r: int, L: int) -> tuple[int, int]:
    """Lower and upper bounds on the achievable selection diversity order."""
    spec = AnalyticSpec(n_t, n_r, L)
    return spec.m_lower, spec.m_upper


def dmt_curve(n_t: int, n_r: int, L: int, r: float, bound: str = "exact-l2") -> float:
    """Diversity-multiplexing curve d(r) = m* (1 - r/L)^+.

    ``bound`` selects m*: "lower" and "upper" use the general-L bounds;
    "exact-l2" uses (n_t-1)(n_r-1) and requires L = 2.
    """
    if r < 0:
        raise ValueError(f"multiplexing gain must be non-negative, got {r}")
    spec = AnalyticSpec(n_t, n_r, L)
    kind = bound.lower()
    if kind == "exact-l2":
        if L != 2:
            raise ValueError("bound 'exact-l2' is defined for L = 2 only")
        m_star = spec.m
    elif kind == "lower":
        m_star = spec.m_lower
    elif kind == "upper":
        m_star = spec.m_upper
    else:
        raise ValueError(f"unknown bound {bound!r}; expected lower, upper or exact-l2")
    return m_star * max(0.0, 1.0 - r / L)
