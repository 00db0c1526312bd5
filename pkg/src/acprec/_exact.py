"""Shared extended-precision context and exact conversion helpers.

All "exact" reference computations (circuit evaluation, value analyses,
error-bound propagation) run on mpmath reals at PRECISION_BITS of mantissa.
Rounding-sensitive work (quantization, tie breaking) never trusts the
working precision: it converts to exact rationals first.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

import mpmath
from mpmath import mpf

PRECISION_BITS = 256

# One process-wide context; set once at import and never changed afterwards,
# so concurrent readers are safe.
if mpmath.mp.prec < PRECISION_BITS:
    mpmath.mp.prec = PRECISION_BITS

Real = Union[int, float, str, Fraction, mpf]

ZERO = mpf(0)
ONE = mpf(1)


def to_fraction(x: Real) -> Fraction:
    """Convert a non-negative real to an exact Fraction.

    Accepts ints, binary floats, mpmath values, Fractions and decimal
    strings. Floats and mpfs convert exactly (they are dyadic rationals);
    decimal strings parse exactly.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, mpf):
        p, q = mpmath.libmp.to_rational(x._mpf_)
        return Fraction(int(p), int(q))
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


def to_mpf(x: Real) -> mpf:
    """Convert to the working extended precision.

    Exact for dyadics that fit the working mantissa; decimal strings and
    general rationals are rounded once to PRECISION_BITS.
    """
    if isinstance(x, mpf):
        return x
    if isinstance(x, (int, float)):
        return mpf(x)
    fr = to_fraction(x)
    return mpf(fr.numerator) / mpf(fr.denominator)


def pow2(exp: int) -> mpf:
    """Exact power of two at working precision."""
    return mpmath.ldexp(ONE, exp)
