"""Bit-exact emulation of reduced-precision circuit arithmetic.

Two unsigned number families are supported:

- fixed point with I integer bits and F fraction bits (values raw / 2^F);
- normalized minifloat with E exponent bits and M stored mantissa bits,
  an implicit leading 1, a reserved all-zero encoding for exact zero, and
  no subnormals, infinities or NaNs.

Every operation rounds to nearest with ties to even, exactly as the
generated hardware does. Out-of-range results raise instead of saturating:
they indicate an integer/exponent sizing bug, not a recoverable condition.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import mpmath
from mpmath import mpf

from ._exact import Real, to_fraction
from .circuit import ArithmeticCircuit, Evidence, NodeKind, chain_order, indicator_is_on
from .errors import FormatError, RangeOverflowError, RangeUnderflowError

MAX_FIXED_WIDTH = 64
MAX_EXP_BITS = 16
MAX_MANT_BITS = 52


@dataclass(frozen=True)
class FixedPoint:
    """Unsigned fixed-point format: int_bits.frac_bits."""

    int_bits: int
    frac_bits: int

    def __post_init__(self):
        if self.int_bits < 1 or self.frac_bits < 0:
            raise FormatError(f"invalid fixed-point format {self}")
        if self.int_bits + self.frac_bits > MAX_FIXED_WIDTH:
            raise FormatError(
                f"fixed-point width {self.int_bits + self.frac_bits} exceeds {MAX_FIXED_WIDTH}"
            )

    @property
    def width(self) -> int:
        return self.int_bits + self.frac_bits

    @property
    def max_raw(self) -> int:
        return (1 << self.width) - 1

    @property
    def ulp(self) -> Fraction:
        return Fraction(1, 1 << self.frac_bits)

    @property
    def max_value(self) -> Fraction:
        """2^I - 2^-F, the largest representable value."""
        return Fraction(self.max_raw, 1 << self.frac_bits)

    def describe(self) -> str:
        return f"fixed({self.int_bits},{self.frac_bits})"


@dataclass(frozen=True)
class FloatPoint:
    """Unsigned normalized minifloat format with E exponent, M mantissa bits."""

    exp_bits: int
    mant_bits: int

    def __post_init__(self):
        if not 2 <= self.exp_bits <= MAX_EXP_BITS:
            raise FormatError(f"exponent bits must lie in [2, {MAX_EXP_BITS}]")
        if not 1 <= self.mant_bits <= MAX_MANT_BITS:
            raise FormatError(f"mantissa bits must lie in [1, {MAX_MANT_BITS}]")

    @property
    def width(self) -> int:
        return self.exp_bits + self.mant_bits

    @property
    def bias(self) -> int:
        return (1 << (self.exp_bits - 1)) - 1

    @property
    def min_exp(self) -> int:
        return 1 - self.bias

    @property
    def max_exp(self) -> int:
        return (1 << self.exp_bits) - 2 - self.bias

    @property
    def smallest_normalized(self) -> Fraction:
        return Fraction(2) ** self.min_exp

    @property
    def largest_normalized(self) -> Fraction:
        return ((1 << (self.mant_bits + 1)) - 1) * Fraction(2) ** (self.max_exp - self.mant_bits)

    @property
    def epsilon(self) -> Fraction:
        """Worst-case relative rounding error, 2^-(M+1)."""
        return Fraction(1, 1 << (self.mant_bits + 1))

    def describe(self) -> str:
        return f"float({self.exp_bits},{self.mant_bits})"


NumberFormat = Union[FixedPoint, FloatPoint]


# ---------------------------------------------------------------------------
# Rounding primitives (exact integer / rational arithmetic)


def _rshift_rne(x: int, k: int) -> int:
    """Drop the low k bits of a non-negative int, rounding to nearest even."""
    if k <= 0:
        return x << -k
    q = x >> k
    if (x >> (k - 1)) & 1:  # at least half
        if x & ((1 << (k - 1)) - 1) or (q & 1):
            q += 1
    return q


def _ratio_rne(num: int, den: int) -> int:
    """Round num/den (both non-negative, den > 0) to nearest even integer."""
    q, r = divmod(num, den)
    twice = 2 * r
    if twice > den or (twice == den and q & 1):
        q += 1
    return q


def _floor_log2(fr: Fraction) -> int:
    num, den = fr.numerator, fr.denominator
    k = num.bit_length() - den.bit_length()
    if k >= 0:
        return k if num >= den << k else k - 1
    return k if num << -k >= den else k - 1


# ---------------------------------------------------------------------------
# Values


@dataclass(frozen=True)
class FixedVal:
    """A fixed-point number: value = raw / 2^F."""

    raw: int
    fmt: FixedPoint

    def __post_init__(self):
        if not 0 <= self.raw <= self.fmt.max_raw:
            raise FormatError(f"raw {self.raw} out of range for {self.fmt.describe()}")

    def to_fraction(self) -> Fraction:
        return Fraction(self.raw, 1 << self.fmt.frac_bits)

    def to_mpf(self) -> mpf:
        return mpmath.ldexp(self.raw, -self.fmt.frac_bits)

    def pack(self) -> int:
        return self.raw

    @classmethod
    def unpack(cls, word: int, fmt: FixedPoint) -> "FixedVal":
        return cls(word, fmt)

    @property
    def is_zero(self) -> bool:
        return self.raw == 0


@dataclass(frozen=True)
class FloatVal:
    """A minifloat: zero, or mantissa * 2^(exponent - M) with the leading
    mantissa bit set (mantissa holds all M+1 significand bits)."""

    is_zero: bool
    exponent: int
    mantissa: int
    fmt: FloatPoint

    def __post_init__(self):
        if self.is_zero:
            if self.exponent != 0 or self.mantissa != 0:
                raise FormatError("zero must use the canonical (0, 0) encoding")
        else:
            m_bits = self.fmt.mant_bits
            if not (1 << m_bits) <= self.mantissa < (1 << (m_bits + 1)):
                raise FormatError("mantissa must have its leading bit set")
            if not self.fmt.min_exp <= self.exponent <= self.fmt.max_exp:
                raise FormatError(
                    f"exponent {self.exponent} outside "
                    f"[{self.fmt.min_exp}, {self.fmt.max_exp}]"
                )

    @classmethod
    def zero(cls, fmt: FloatPoint) -> "FloatVal":
        return cls(True, 0, 0, fmt)

    def to_fraction(self) -> Fraction:
        if self.is_zero:
            return Fraction(0)
        return self.mantissa * Fraction(2) ** (self.exponent - self.fmt.mant_bits)

    def to_mpf(self) -> mpf:
        if self.is_zero:
            return mpf(0)
        return mpmath.ldexp(self.mantissa, self.exponent - self.fmt.mant_bits)

    def pack(self) -> int:
        if self.is_zero:
            return 0
        m_bits = self.fmt.mant_bits
        return ((self.exponent + self.fmt.bias) << m_bits) | (self.mantissa - (1 << m_bits))

    @classmethod
    def unpack(cls, word: int, fmt: FloatPoint) -> "FloatVal":
        if not 0 <= word < (1 << fmt.width):
            raise FormatError(f"word {word} out of range for {fmt.describe()}")
        if word == 0:
            return cls.zero(fmt)
        biased = word >> fmt.mant_bits
        if biased == 0:
            raise FormatError("nonzero word with zero exponent field (no subnormals)")
        if biased == (1 << fmt.exp_bits) - 1:
            raise FormatError("reserved exponent field (no infinities or NaNs)")
        mantissa = (word & ((1 << fmt.mant_bits) - 1)) | (1 << fmt.mant_bits)
        return cls(False, biased - fmt.bias, mantissa, fmt)


Value = Union[FixedVal, FloatVal]


# ---------------------------------------------------------------------------
# Fixed-point operations


def fx_quantize(x: Real, fmt: FixedPoint) -> FixedVal:
    """Round a non-negative real to the nearest representable value."""
    fr = to_fraction(x)
    if fr < 0:
        raise FormatError("fixed-point values are unsigned")
    raw = _ratio_rne(fr.numerator << fmt.frac_bits, fr.denominator)
    if raw > fmt.max_raw:
        raise RangeOverflowError(
            f"{float(fr)} exceeds max {float(fmt.max_value)} of {fmt.describe()}"
        )
    return FixedVal(raw, fmt)


def _fx_add_raw(a: int, b: int, max_raw: int) -> int:
    s = a + b
    if s > max_raw:
        raise RangeOverflowError("fixed-point adder overflow (integer bits undersized)")
    return s


def _fx_mul_raw(a: int, b: int, frac_bits: int, max_raw: int) -> int:
    p = _rshift_rne(a * b, frac_bits)
    if p > max_raw:
        raise RangeOverflowError("fixed-point multiplier overflow (integer bits undersized)")
    return p


def _check_same_fmt(a: Value, b: Value) -> None:
    if a.fmt != b.fmt:
        raise FormatError(f"operand formats differ: {a.fmt.describe()} vs {b.fmt.describe()}")


def fx_add(a: FixedVal, b: FixedVal) -> FixedVal:
    """Exact adder; sized integer bits guarantee no overflow."""
    _check_same_fmt(a, b)
    return FixedVal(_fx_add_raw(a.raw, b.raw, a.fmt.max_raw), a.fmt)


def fx_mul(a: FixedVal, b: FixedVal) -> FixedVal:
    """Exact 2F-fraction product rounded to nearest F-fraction value."""
    _check_same_fmt(a, b)
    return FixedVal(_fx_mul_raw(a.raw, b.raw, a.fmt.frac_bits, a.fmt.max_raw), a.fmt)


# ---------------------------------------------------------------------------
# Minifloat operations. Nonzero values travel through the cores as
# (exponent, mantissa) pairs; None stands for exact zero.


def fl_quantize(x: Real, fmt: FloatPoint) -> FloatVal:
    """Round a non-negative real to the nearest normalized value (or zero)."""
    fr = to_fraction(x)
    if fr < 0:
        raise FormatError("minifloat values are unsigned")
    if fr == 0:
        return FloatVal.zero(fmt)
    if fr < fmt.smallest_normalized:
        raise RangeUnderflowError(
            f"{float(fr)} is below the smallest normalized value of {fmt.describe()}"
        )
    if fr > fmt.largest_normalized:
        raise RangeOverflowError(
            f"{float(fr)} is above the largest normalized value of {fmt.describe()}"
        )
    m_bits = fmt.mant_bits
    e = _floor_log2(fr)
    scale = e - m_bits
    if scale <= 0:
        m = _ratio_rne(fr.numerator << -scale, fr.denominator)
    else:
        m = _ratio_rne(fr.numerator, fr.denominator << scale)
    if m == 1 << (m_bits + 1):
        m >>= 1
        e += 1
    return FloatVal(False, e, m, fmt)


def _fl_add_core(
    ea: int, ma: int, eb: int, mb: int, m_bits: int, max_exp: int
) -> tuple[int, int]:
    if ea < eb:
        ea, ma, eb, mb = eb, mb, ea, ma
    d = ea - eb
    big = ma << 3
    if d <= m_bits + 3:
        part = mb << 3
        shifted = part >> d
        if part & ((1 << d) - 1):
            shifted |= 1
    else:
        shifted = 1  # contributes only a sticky bit
    s = big + shifted
    length = s.bit_length()  # m_bits+4, or +5 on carry
    m = _rshift_rne(s, length - 1 - m_bits)
    e = ea + length - (m_bits + 4)
    if m == 1 << (m_bits + 1):
        m >>= 1
        e += 1
    if e > max_exp:
        raise RangeOverflowError("minifloat adder overflow (exponent bits undersized)")
    return e, m


def _fl_mul_core(
    ea: int, ma: int, eb: int, mb: int, m_bits: int, min_exp: int, max_exp: int
) -> tuple[int, int]:
    p = ma * mb
    length = p.bit_length()  # 2M+1 or 2M+2
    m = _rshift_rne(p, length - 1 - m_bits)
    e = ea + eb + length - (2 * m_bits + 1)
    if m == 1 << (m_bits + 1):
        m >>= 1
        e += 1
    if e < min_exp:
        raise RangeUnderflowError("minifloat multiplier underflow (exponent bits undersized)")
    if e > max_exp:
        raise RangeOverflowError("minifloat multiplier overflow (exponent bits undersized)")
    return e, m


def fl_add(a: FloatVal, b: FloatVal) -> FloatVal:
    """Round-to-nearest of the exact sum; exact-zero operands pass through."""
    _check_same_fmt(a, b)
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    fmt = a.fmt
    e, m = _fl_add_core(
        a.exponent, a.mantissa, b.exponent, b.mantissa, fmt.mant_bits, fmt.max_exp
    )
    return FloatVal(False, e, m, fmt)


def fl_mul(a: FloatVal, b: FloatVal) -> FloatVal:
    """Round-to-nearest of the exact product; zero times anything is zero."""
    _check_same_fmt(a, b)
    fmt = a.fmt
    if a.is_zero or b.is_zero:
        return FloatVal.zero(fmt)
    e, m = _fl_mul_core(
        a.exponent, a.mantissa, b.exponent, b.mantissa,
        fmt.mant_bits, fmt.min_exp, fmt.max_exp,
    )
    return FloatVal(False, e, m, fmt)


# ---------------------------------------------------------------------------
# Whole-circuit emulation


_K_SUM, _K_PRODUCT, _K_PARAM, _K_INDICATOR = range(4)

_KIND_CODE = {
    NodeKind.SUM: _K_SUM,
    NodeKind.PRODUCT: _K_PRODUCT,
    NodeKind.PARAMETER: _K_PARAM,
    NodeKind.INDICATOR: _K_INDICATOR,
}


class LowPrecEvaluator:
    """Reusable emulator for one (circuit, format) pair.

    Parameters are quantized once at construction; each evaluation then runs
    on plain integers. Multi-input nodes fold two inputs at a time in
    canonical child order, exactly like the generated netlist, so overflow
    and rounding behaviour match the hardware step for step.
    """

    def __init__(self, ac: ArithmeticCircuit, fmt: NumberFormat):
        self.ac = ac
        self.fmt = fmt
        self.is_fixed = isinstance(fmt, FixedPoint)
        self._kinds: list[int] = []
        self._chains: list[tuple[int, ...]] = []
        self._leaf: list = []  # quantized parameter raws / indicator keys
        for node in ac.nodes:
            code = _KIND_CODE[node.kind]
            self._kinds.append(code)
            self._chains.append(chain_order(node.children) if node.children else ())
            if code == _K_PARAM:
                if self.is_fixed:
                    self._leaf.append(fx_quantize(node.value, fmt).raw)
                else:
                    q = fl_quantize(node.value, fmt)
                    self._leaf.append(None if q.is_zero else (q.exponent, q.mantissa))
            elif code == _K_INDICATOR:
                self._leaf.append((node.var, node.state))
            else:
                self._leaf.append(None)

    def evaluate_raw(self, evidence: Evidence = Evidence()) -> list:
        """Per-node machine values: ints for fixed point, (exponent,
        mantissa) pairs or None (zero) for minifloat."""
        self.ac.check_evidence(evidence)
        if self.is_fixed:
            return self._evaluate_fixed(evidence)
        return self._evaluate_float(evidence)

    def _evaluate_fixed(self, evidence: Evidence) -> list:
        fmt: FixedPoint = self.fmt
        frac_bits, max_raw = fmt.frac_bits, fmt.max_raw
        one = 1 << frac_bits
        vals: list[int] = [0] * len(self._kinds)
        get = evidence.get
        for i, code in enumerate(self._kinds):
            if code == _K_SUM:
                chain = self._chains[i]
                acc = vals[chain[0]]
                for c in chain[1:]:
                    acc += vals[c]
                    if acc > max_raw:
                        raise RangeOverflowError(
                            "fixed-point adder overflow (integer bits undersized)"
                        )
                vals[i] = acc
            elif code == _K_PRODUCT:
                chain = self._chains[i]
                acc = vals[chain[0]]
                for c in chain[1:]:
                    acc = _rshift_rne(acc * vals[c], frac_bits)
                    if acc > max_raw:
                        raise RangeOverflowError(
                            "fixed-point multiplier overflow (integer bits undersized)"
                        )
                vals[i] = acc
            elif code == _K_PARAM:
                vals[i] = self._leaf[i]
            else:
                var, state = self._leaf[i]
                assigned = get(var)
                vals[i] = one if (assigned is None or assigned == state) else 0
        return vals

    def _evaluate_float(self, evidence: Evidence) -> list:
        fmt: FloatPoint = self.fmt
        m_bits, min_exp, max_exp = fmt.mant_bits, fmt.min_exp, fmt.max_exp
        one = (0, 1 << m_bits)
        vals: list = [None] * len(self._kinds)
        get = evidence.get
        for i, code in enumerate(self._kinds):
            if code == _K_SUM:
                acc = None
                for c in self._chains[i]:
                    v = vals[c]
                    if acc is None:
                        acc = v
                    elif v is not None:
                        acc = _fl_add_core(acc[0], acc[1], v[0], v[1], m_bits, max_exp)
                vals[i] = acc
            elif code == _K_PRODUCT:
                chain = self._chains[i]
                acc = vals[chain[0]]
                for c in chain[1:]:
                    v = vals[c]
                    if acc is None or v is None:
                        acc = None
                    else:
                        acc = _fl_mul_core(
                            acc[0], acc[1], v[0], v[1], m_bits, min_exp, max_exp
                        )
                vals[i] = acc
            elif code == _K_PARAM:
                vals[i] = self._leaf[i]
            else:
                var, state = self._leaf[i]
                assigned = get(var)
                vals[i] = one if (assigned is None or assigned == state) else None
        return vals

    def wrap(self, raw) -> Value:
        """Turn an internal machine value into a FixedVal/FloatVal."""
        if self.is_fixed:
            return FixedVal(raw, self.fmt)
        if raw is None:
            return FloatVal.zero(self.fmt)
        return FloatVal(False, raw[0], raw[1], self.fmt)

    def evaluate(self, evidence: Evidence = Evidence()) -> tuple[Value, list[Value]]:
        raws = self.evaluate_raw(evidence)
        values = [self.wrap(r) for r in raws]
        return values[self.ac.root], values


def evaluate_lowprec(
    ac: ArithmeticCircuit, evidence: Evidence, fmt: NumberFormat
) -> tuple[Value, list[Value]]:
    """Emulate one upward pass; returns (root value, per-node values)."""
    return LowPrecEvaluator(ac, fmt).evaluate(evidence)
