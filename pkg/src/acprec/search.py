"""Minimal bit-width search and energy-based representation selection.

Precision search walks F (fraction bits) or M (mantissa bits) upward from 2
until the query-level bound meets the tolerance, then sizes the remaining
field: I so no fixed value or fold intermediate can overflow even with the
accumulated error on top, E so the float exponent range covers every
intermediate's worst-case drift envelope on both ends.

Selection runs both searches, prices each feasible candidate with the
energy model, and keeps the cheaper one. A relative-error conditional query
always lands on float: fixed point admits no relative guarantee for it.
"""

from __future__ import annotations

from dataclasses import dataclass

from mpmath import mpf

from ._exact import ONE, ZERO, pow2, to_mpf
from .arith import MAX_EXP_BITS, MAX_FIXED_WIDTH, MAX_MANT_BITS, FixedPoint, FloatPoint, NumberFormat
from .bounds import CircuitAnalysis, ErrorKind, QuerySpec, QueryType, fixed_query_bound, float_query_bound
from .circuit import ArithmeticCircuit
from .energy import EnergyModel, circuit_energy
from .errors import AcprecError, InfeasibleError

MIN_SEARCH_BITS = 2
DEFAULT_CAP = 64


def _tolerance(spec: QuerySpec) -> mpf:
    if spec.tolerance is None:
        raise AcprecError("bit-width search requires a tolerance")
    return to_mpf(spec.tolerance)


def min_fraction_bits(
    ac: "ArithmeticCircuit | CircuitAnalysis", spec: QuerySpec, cap: int = DEFAULT_CAP
) -> int:
    """Smallest F in [2, cap] whose fixed-point bound meets the tolerance."""
    if not MIN_SEARCH_BITS <= cap <= MAX_FIXED_WIDTH:
        raise AcprecError(f"fraction-bit cap must lie in [{MIN_SEARCH_BITS}, {MAX_FIXED_WIDTH}]")
    analysis = CircuitAnalysis.of(ac)
    tol = _tolerance(spec)
    for frac_bits in range(MIN_SEARCH_BITS, cap + 1):
        bound, reason = fixed_query_bound(analysis, frac_bits, spec.query, spec.error_kind)
        if bound is None:
            raise InfeasibleError(reason)
        if bound <= tol:
            return frac_bits
    raise InfeasibleError(
        f"no fixed-point format meets tolerance {spec.tolerance} within {cap} fraction bits"
    )


def min_mantissa_bits(
    ac: "ArithmeticCircuit | CircuitAnalysis", spec: QuerySpec, cap: int = DEFAULT_CAP
) -> int:
    """Smallest M in [2, cap] whose float bound meets the tolerance."""
    if cap < MIN_SEARCH_BITS:
        raise AcprecError(f"mantissa-bit cap must be at least {MIN_SEARCH_BITS}")
    analysis = CircuitAnalysis.of(ac)
    tol = _tolerance(spec)
    top = min(cap, MAX_MANT_BITS)
    for mant_bits in range(MIN_SEARCH_BITS, top + 1):
        bound, reason = float_query_bound(analysis, mant_bits, spec.query, spec.error_kind)
        if bound is None:
            raise InfeasibleError(reason)
        if bound <= tol:
            return mant_bits
    raise InfeasibleError(
        f"no float format meets tolerance {spec.tolerance} within {top} mantissa bits"
    )


def size_integer_bits(ac: "ArithmeticCircuit | CircuitAnalysis", frac_bits: int) -> int:
    """Smallest I >= 1 covering every node and fold intermediate, error included."""
    analysis = CircuitAnalysis.of(ac)
    need = analysis.fixed_peak(frac_bits)
    for int_bits in range(1, MAX_FIXED_WIDTH - frac_bits + 1):
        if pow2(int_bits) - pow2(-frac_bits) >= need:
            return int_bits
    raise InfeasibleError(
        f"values reach {float(need):.6g}: no integer width fits fixed({MAX_FIXED_WIDTH - frac_bits},{frac_bits})"
    )


def size_exponent_bits(ac: "ArithmeticCircuit | CircuitAnalysis", mant_bits: int) -> int:
    """Smallest E in [2, 16] whose normalized range covers the drift envelope.

    Every machine value stays within (1 +/- eps)^c of some exact node value
    or fold intermediate, so the range must reach peak_max * (1 + eps)^c at
    the top and min_positive * (1 - eps)^c at the bottom.
    """
    analysis = CircuitAnalysis.of(ac)
    eps = pow2(-(mant_bits + 1))
    c = max(analysis.fl_count)
    high = analysis.peak_max * (ONE + eps) ** c
    low = analysis.min_positive * (ONE - eps) ** c
    for exp_bits in range(2, MAX_EXP_BITS + 1):
        fmt = FloatPoint(exp_bits, mant_bits)
        if to_mpf(fmt.largest_normalized) < high:
            continue
        if low > ZERO and to_mpf(fmt.smallest_normalized) > low:
            continue
        return exp_bits
    raise InfeasibleError(
        f"value range needs exponents beyond {MAX_EXP_BITS} bits at M={mant_bits}"
    )


@dataclass(frozen=True)
class Candidate:
    fmt: NumberFormat
    bound: mpf
    energy_nj: float

    def to_json_dict(self) -> dict:
        if isinstance(self.fmt, FixedPoint):
            fmt_doc = {"kind": "fixed", "int_bits": self.fmt.int_bits, "frac_bits": self.fmt.frac_bits}
        else:
            fmt_doc = {"kind": "float", "exp_bits": self.fmt.exp_bits, "mant_bits": self.fmt.mant_bits}
        return {"format": fmt_doc, "bound": float(self.bound), "energy_nj": self.energy_nj}


@dataclass(frozen=True)
class SearchResult:
    fixed: Candidate | None
    floating: Candidate | None
    selected: str  # "fixed" or "float"
    fixed_reason: str | None = None
    float_reason: str | None = None

    @property
    def selected_candidate(self) -> Candidate:
        chosen = self.fixed if self.selected == "fixed" else self.floating
        assert chosen is not None
        return chosen

    @property
    def bound_at_selected(self) -> mpf:
        return self.selected_candidate.bound

    def to_json_dict(self) -> dict:
        return {
            "fixed": None if self.fixed is None else self.fixed.to_json_dict(),
            "float": None if self.floating is None else self.floating.to_json_dict(),
            "selected": self.selected,
            "bound_at_selected": float(self.bound_at_selected),
            "fixed_reason": self.fixed_reason,
            "float_reason": self.float_reason,
        }


def search_fixed(
    ac: "ArithmeticCircuit | CircuitAnalysis",
    spec: QuerySpec,
    cap: int = DEFAULT_CAP,
    model: EnergyModel | None = None,
) -> Candidate:
    analysis = CircuitAnalysis.of(ac)
    frac_bits = min_fraction_bits(analysis, spec, cap)
    int_bits = size_integer_bits(analysis, frac_bits)
    fmt = FixedPoint(int_bits, frac_bits)
    bound, _ = fixed_query_bound(analysis, frac_bits, spec.query, spec.error_kind)
    return Candidate(fmt, bound, circuit_energy(analysis.ac, fmt, model))


def search_float(
    ac: "ArithmeticCircuit | CircuitAnalysis",
    spec: QuerySpec,
    cap: int = DEFAULT_CAP,
    model: EnergyModel | None = None,
) -> Candidate:
    analysis = CircuitAnalysis.of(ac)
    mant_bits = min_mantissa_bits(analysis, spec, cap)
    exp_bits = size_exponent_bits(analysis, mant_bits)
    fmt = FloatPoint(exp_bits, mant_bits)
    bound, _ = float_query_bound(analysis, mant_bits, spec.query, spec.error_kind)
    return Candidate(fmt, bound, circuit_energy(analysis.ac, fmt, model))


def select_representation(
    ac: "ArithmeticCircuit | CircuitAnalysis",
    spec: QuerySpec,
    cap: int = DEFAULT_CAP,
    model: EnergyModel | None = None,
) -> SearchResult:
    """Search both families and keep the cheaper feasible one (ties: fixed)."""
    analysis = CircuitAnalysis.of(ac)

    fixed = floating = None
    fixed_reason = float_reason = None
    try:
        fixed = search_fixed(analysis, spec, cap, model)
    except InfeasibleError as exc:
        fixed_reason = str(exc)
    try:
        floating = search_float(analysis, spec, cap, model)
    except InfeasibleError as exc:
        float_reason = str(exc)

    if fixed is None and floating is None:
        raise InfeasibleError(
            f"no representation meets tolerance {spec.tolerance}: "
            f"fixed: {fixed_reason}; float: {float_reason}"
        )
    if fixed is None:
        selected = "float"
    elif floating is None:
        selected = "fixed"
    elif spec.query is QueryType.CONDITIONAL and spec.error_kind is ErrorKind.RELATIVE:
        selected = "float"  # unreachable: the fixed search is infeasible by rule
    else:
        selected = "fixed" if fixed.energy_nj <= floating.energy_nj else "float"
    return SearchResult(fixed, floating, selected, fixed_reason, float_reason)
