"""Comparison layer for welfare quantities that may be irrational.

Values are rationals; welfare figures involve ``n``-th roots and rational
powers of them.  Whenever a comparison can be cleared of roots it is done on
exact :class:`Fraction` objects; otherwise both sides are evaluated with
mpmath at :data:`PREC_BITS` bits and compared with relative tolerance
:data:`REL_TOL`.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Union

import gmpy2
import mpmath

PREC_BITS = 256
REL_TOL = mpmath.mpf("1e-30")

Number = Union[Fraction, mpmath.mpf]

__all__ = [
    "PREC_BITS",
    "REL_TOL",
    "exact_root",
    "rat_pow",
    "to_mpf",
    "mpf_to_fraction",
    "geq",
    "format_number",
    "rational_lower_bound",
]


def exact_root(x: Fraction, k: int) -> Fraction | None:
    """The exact ``k``-th root of a nonnegative rational, or ``None`` if it is irrational."""
    x = Fraction(x)
    if x < 0:
        raise ValueError("root of a negative number")
    if k == 1:
        return x
    num, ok_num = gmpy2.iroot(x.numerator, k)
    if not ok_num:
        return None
    den, ok_den = gmpy2.iroot(x.denominator, k)
    if not ok_den:
        return None
    return Fraction(int(num), int(den))


def to_mpf(x) -> mpmath.mpf:
    with mpmath.workprec(PREC_BITS):
        if isinstance(x, Fraction):
            return mpmath.mpf(x.numerator) / x.denominator
        return mpmath.mpf(x)


def rat_pow(x: Fraction, rho: Fraction) -> Number:
    """``x ** rho`` for rational ``rho``; exact whenever the result is rational."""
    x, rho = Fraction(x), Fraction(rho)
    if x == 0:
        return Fraction(0) if rho > 0 else Fraction(1)
    root = exact_root(x, rho.denominator)
    if root is not None:
        return root ** rho.numerator
    with mpmath.workprec(PREC_BITS):
        return mpmath.power(to_mpf(x), to_mpf(rho))


def mpf_to_fraction(x: mpmath.mpf) -> Fraction:
    """The exact dyadic rational carried by an mpf."""
    man, exp = mpmath.mpf(x).man_exp
    if exp >= 0:
        return Fraction(int(man) << int(exp))
    return Fraction(int(man), 1 << int(-exp))


def rational_lower_bound(x: mpmath.mpf, rel_bits: int = 64) -> Fraction:
    """A rational ``q <= x`` (for positive ``x`` evaluated at PREC_BITS) within relative 2**-rel_bits."""
    with mpmath.workprec(PREC_BITS):
        x = mpmath.mpf(x)
        if x <= 0:
            raise ValueError("expected a positive number")
        # shave a margin far above the evaluation error so the bound is safe
        shaved = x * (1 - mpmath.ldexp(1, -(PREC_BITS - 32)))
        _, e = mpmath.frexp(shaved)
        scale = rel_bits + 2 - int(e)
        q = int(mpmath.floor(mpmath.ldexp(shaved, scale)))
    if scale >= 0:
        return Fraction(q, 2**scale)
    return Fraction(q * 2 ** (-scale))


def geq(lhs: Number, rhs: Number, rel_tol=REL_TOL) -> bool:
    """``lhs >= rhs``: exact for two rationals, otherwise up to ``rel_tol`` relative slack."""
    if isinstance(lhs, (Fraction, int)) and isinstance(rhs, (Fraction, int)):
        return Fraction(lhs) >= Fraction(rhs)
    with mpmath.workprec(PREC_BITS):
        a, b = to_mpf(lhs), to_mpf(rhs)
        return a >= b - rel_tol * abs(b)


def format_number(x, digits: int = 12) -> str:
    """12-significant-digit decimal rendering shared by reports."""
    if x == float("inf"):
        return "inf"
    with mpmath.workprec(PREC_BITS):
        return mpmath.nstr(to_mpf(x), digits)
