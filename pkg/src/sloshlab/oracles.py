"""Closed-form reference solutions and special functions.

Bessel functions J0 and J1 are evaluated by their power series with
double-double compensated arithmetic (two-sum / two-product error terms),
which holds the absolute error near 1e-13 over the desk range; for the
extreme tail of the admitted range the same series is summed in exact
rational arithmetic.  On top of these sit the Newton iterations for the
first zeros, the cylinder spectrum formulas

    nu_11(U_h)       = j'_11 tanh(j'_11 h),
    nu_ds_01(U_h)    = j_01  coth(j_01 h),

the cylinder fundamental eigenfunction J1(j'_11 r) cosh(j'_11 (y + h)),
and the Troesch family's polynomial eigenfunction and Stokes stream
function (eigenvalue nu = lam for the body 4 y^2 + 8 y / lam + 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import InvalidParameterError, NumericError, RangeError
from .geometry import troesch_bottom_depth

__all__ = [
    "BesselTable",
    "CylinderSpectrum",
    "bessel_j",
    "bessel_zeros",
    "cylinder_spectrum",
    "cylinder_psi11",
    "troesch_eigenfunction",
    "troesch_stream",
]

#: admitted argument range of the series evaluation
BESSEL_RANGE = 50.0
#: beyond this the double-double series loses the 1e-13 contract; switch to
#: exact rational summation
_DD_LIMIT = 40.0
_SPLITTER = 134217729.0  # 2**27 + 1


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    return s, b - (s - a)


def _split(a: float) -> tuple[float, float]:
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def _two_prod(a: float, b: float) -> tuple[float, float]:
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_add(xh, xl, yh, yl):
    s, e = _two_sum(xh, yh)
    e += xl + yl
    return _quick_two_sum(s, e)


def _dd_mul(xh, xl, yh, yl):
    p, e = _two_prod(xh, yh)
    e += xh * yl + xl * yh
    return _quick_two_sum(p, e)


def _dd_div_scalar(xh, xl, d):
    q1 = xh / d
    p, pe = _two_prod(q1, d)
    r = ((xh - p) - pe) + xl
    return _quick_two_sum(q1, r / d)


def _series_dd(order: int, x: float) -> float:
    half = 0.5 * x
    qh, ql = _two_prod(half, half)
    if order == 0:
        th, tl = 1.0, 0.0
    else:
        th, tl = half, 0.0
    sh, sl = th, tl
    for k in range(1, 400):
        th, tl = _dd_mul(th, tl, -qh, -ql)
        th, tl = _dd_div_scalar(th, tl, float(k * (k + order)))
        sh, sl = _dd_add(sh, sl, th, tl)
        if abs(th) < 1e-35 * (1.0 + abs(sh)) and k > half:
            break
    else:
        raise NumericError("Bessel series did not terminate")
    return sh + sl


def _series_exact(order: int, x: float) -> float:
    half = Fraction(x) / 2
    q = half * half
    term = Fraction(1) if order == 0 else half
    total = term
    k = 1
    while True:
        term = -term * q / (k * (k + order))
        total += term
        if k > abs(x) and abs(float(term)) < 1e-40:
            break
        k += 1
        if k > 1000:
            raise NumericError("Bessel series did not terminate")
    return float(total)


def bessel_j(order: int, x: float) -> float:
    """Bessel function of the first kind, order 0 or 1, |x| <= 50."""
    if order not in (0, 1):
        raise InvalidParameterError(f"only orders 0 and 1 are supported, got {order}")
    x = float(x)
    if not math.isfinite(x) or abs(x) > BESSEL_RANGE:
        raise RangeError(f"argument {x} outside the supported range |x| <= {BESSEL_RANGE:g}")
    if abs(x) <= _DD_LIMIT:
        return _series_dd(order, x)
    return _series_exact(order, x)


def _j1prime(x: float) -> float:
    return bessel_j(0, x) - bessel_j(1, x) / x


def _j1second(x: float) -> float:
    # from the order-1 Bessel equation: J1'' = -J1'/x - (1 - 1/x^2) J1
    return -_j1prime(x) / x - (1.0 - 1.0 / (x * x)) * bessel_j(1, x)


@dataclass(frozen=True)
class BesselTable:
    """First positive zeros of J0 and of J1'."""

    j01: float
    j11p: float


def _newton(f, fprime, x0: float, tol: float = 1e-13, max_iter: int = 60) -> float:
    x = x0
    for _ in range(max_iter):
        fx = f(x)
        step = fx / fprime(x)
        x -= step
        if abs(step) <= tol * abs(x):
            fx = f(x)
            if abs(fx) <= 1e-12:
                return x
    raise NumericError(f"Newton iteration from {x0} did not converge")


def bessel_zeros() -> BesselTable:
    """Newton refinement of the seeds 2.4048 (J0) and 1.8412 (J1')."""
    j01 = _newton(lambda x: bessel_j(0, x), lambda x: -bessel_j(1, x), 2.4048)
    j11p = _newton(_j1prime, _j1second, 1.8412)
    return BesselTable(j01=j01, j11p=j11p)


_TABLE: BesselTable | None = None


def _table() -> BesselTable:
    global _TABLE
    if _TABLE is None:
        _TABLE = bessel_zeros()
    return _TABLE


@dataclass(frozen=True)
class CylinderSpectrum:
    """Closed-form cylinder eigenvalues with their universal bounds."""

    nu11: float
    nu_ds01: float
    nu11_below_j11p: bool
    nu_ds01_above_j01: bool


def cylinder_spectrum(h: float) -> CylinderSpectrum:
    """Fundamental sloshing and first Dirichlet-Steklov eigenvalue of U_h."""
    if not (h > 0.0 and math.isfinite(h)):
        raise InvalidParameterError(f"cylinder depth must be positive, got {h}")
    tab = _table()
    nu11 = tab.j11p * math.tanh(tab.j11p * h)
    nu_ds = tab.j01 / math.tanh(tab.j01 * h)
    return CylinderSpectrum(
        nu11=nu11,
        nu_ds01=nu_ds,
        nu11_below_j11p=nu11 < tab.j11p,
        nu_ds01_above_j01=nu_ds > tab.j01,
    )


def cylinder_psi11(r: float, y: float, h: float) -> float:
    """Unnormalized fundamental eigenfunction of the unit cylinder of depth h."""
    if not (h > 0.0):
        raise InvalidParameterError(f"cylinder depth must be positive, got {h}")
    tol = 1e-12
    if not (-tol <= r <= 1.0 + tol) or not (-h - tol <= y <= tol):
        raise RangeError(f"point (r={r}, y={y}) outside the cylinder meridian")
    j = _table().j11p
    return bessel_j(1, j * r) * math.cosh(j * (y + h))


def _troesch_check_point(r: float, y: float, lam: float) -> None:
    if not (0.0 < lam <= 2.0):
        raise InvalidParameterError(f"troesch parameter must lie in (0, 2], got {lam}")
    tol = 1e-10
    y0 = troesch_bottom_depth(lam)
    if not (y0 - tol <= y <= tol) or r < -tol:
        raise RangeError(f"point (r={r}, y={y}) outside the troesch meridian")
    g2 = 4.0 * y * y + 8.0 * y / lam + 1.0
    if r * r > g2 + 1e-9:
        raise RangeError(f"point (r={r}, y={y}) outside the troesch meridian")


def troesch_eigenfunction(r: float, y: float, lam: float) -> float:
    """Polynomial eigenfunction of the Troesch body (eigenvalue nu = lam)."""
    _troesch_check_point(r, y, lam)
    return (1.0 + lam * y + 4.0 * y * y - 2.0 * r * r
            + (4.0 / 3.0) * lam * y**3 - 2.0 * lam * r * r * y)


def troesch_stream(r: float, y: float, lam: float) -> float:
    """Stokes stream function conjugate to the Troesch eigenfunction."""
    _troesch_check_point(r, y, lam)
    return (lam / 2.0) * (r * r - r**4) + 4.0 * r * r * y + 2.0 * lam * r * r * y * y
