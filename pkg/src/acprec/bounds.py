"""Worst-case error analysis for reduced-precision circuit evaluation.

The model mirrors the emulator exactly: multi-input nodes are folded two
inputs at a time in canonical child order, and every intermediate of that
fold is analyzed as a real 2-input operator.

Fixed point carries an absolute error budget upward: leaves contribute half
an ulp, adders add budgets exactly, and each 2-input multiplier combines the
budgets of its operands with their value ceilings plus its own half-ulp
rounding. Minifloat instead counts the worst-case number of (1 +/- eps)
rounding factors accumulated on any value, from which relative bounds follow.

Value analyses supply the ceilings and floors: the max-value pass evaluates
the circuit with every indicator at 1 (sound per-node maxima, since the
circuit is monotone in its inputs); the min-value pass replaces sums by a
minimum over their positive children, yielding per-node floors over all
evidence settings with a 0 sentinel for nodes that can only be zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from mpmath import mpf

from ._exact import ONE, ZERO, pow2
from .circuit import ArithmeticCircuit, NodeKind, chain_order
from .arith import FixedPoint, FloatPoint, NumberFormat
from .errors import AcprecError


class QueryType(str, Enum):
    MARGINAL = "marginal"
    CONDITIONAL = "conditional"
    MPE = "mpe"


class ErrorKind(str, Enum):
    ABSOLUTE = "abs"
    RELATIVE = "rel"


@dataclass(frozen=True)
class QuerySpec:
    """What is being asked of the circuit and how accuracy is measured."""

    query: QueryType
    error_kind: ErrorKind
    tolerance: float | None = None

    def __post_init__(self):
        if self.tolerance is not None and not 0 < self.tolerance < 1:
            raise AcprecError(f"tolerance must lie in (0, 1), got {self.tolerance}")


@dataclass(frozen=True)
class NodeAnalysis:
    """Analysis results for one node; fx_delta is None for float reports."""

    max_val: mpf
    min_pos: mpf
    fx_delta: mpf | None
    fl_count: int

    def to_json_dict(self) -> dict:
        return {
            "max_val": float(self.max_val),
            "min_pos": float(self.min_pos),
            "fx_delta": None if self.fx_delta is None else float(self.fx_delta),
            "fl_count": self.fl_count,
        }


def max_value_analysis(ac: ArithmeticCircuit) -> list[mpf]:
    """Per-node value ceilings: the exact all-indicators-on evaluation."""
    vals: list[mpf] = [ZERO] * len(ac.nodes)
    for i, node in enumerate(ac.nodes):
        kind = node.kind
        if kind is NodeKind.SUM:
            acc = ZERO
            for c in node.children:
                acc += vals[c]
            vals[i] = acc
        elif kind is NodeKind.PRODUCT:
            acc = ONE
            for c in node.children:
                acc *= vals[c]
            vals[i] = acc
        elif kind is NodeKind.PARAMETER:
            vals[i] = node.value
        else:
            vals[i] = ONE
    return vals


def min_value_analysis(ac: ArithmeticCircuit) -> list[mpf]:
    """Per-node floors over all evidence: smallest achievable positive value.

    Indicators are held at 1 and each sum takes the minimum over its
    positive children. 0 marks a node that can only ever be zero.
    """
    vals: list[mpf] = [ZERO] * len(ac.nodes)
    for i, node in enumerate(ac.nodes):
        kind = node.kind
        if kind is NodeKind.SUM:
            best = None
            for c in node.children:
                v = vals[c]
                if v > ZERO and (best is None or v < best):
                    best = v
            vals[i] = best if best is not None else ZERO
        elif kind is NodeKind.PRODUCT:
            acc = ONE
            for c in node.children:
                v = vals[c]
                if v == ZERO:
                    acc = ZERO
                    break
                acc *= v
            vals[i] = acc
        elif kind is NodeKind.PARAMETER:
            vals[i] = node.value
        else:
            vals[i] = ONE
    return vals


def propagate_float(ac: ArithmeticCircuit) -> list[int]:
    """Per-node worst-case rounding-factor counts.

    Parameters carry one quantization factor, indicators none. Each 2-input
    adder takes the larger operand count plus one; each 2-input multiplier
    adds the operand counts plus one.
    """
    counts: list[int] = [0] * len(ac.nodes)
    for i, node in enumerate(ac.nodes):
        kind = node.kind
        if kind is NodeKind.SUM:
            chain = chain_order(node.children)
            acc = counts[chain[0]]
            for c in chain[1:]:
                acc = max(acc, counts[c]) + 1
            counts[i] = acc
        elif kind is NodeKind.PRODUCT:
            chain = chain_order(node.children)
            acc = counts[chain[0]]
            for c in chain[1:]:
                acc = acc + counts[c] + 1
            counts[i] = acc
        elif kind is NodeKind.PARAMETER:
            counts[i] = 1
    return counts


def propagate_fixed(
    ac: ArithmeticCircuit, frac_bits: int, max_vals: list[mpf] | None = None
) -> list[mpf]:
    """Per-node absolute error budgets for F fraction bits."""
    deltas, _ = _propagate_fixed_full(
        ac, frac_bits, max_vals if max_vals is not None else max_value_analysis(ac)
    )
    return deltas


def _propagate_fixed_full(
    ac: ArithmeticCircuit, frac_bits: int, max_vals: list[mpf]
) -> tuple[list[mpf], mpf]:
    """Error budgets plus the widest (value + budget) reach of any node or
    fold intermediate, which integer sizing must cover."""
    half_ulp = pow2(-(frac_bits + 1))
    deltas: list[mpf] = [ZERO] * len(ac.nodes)
    peak = ZERO
    for i, node in enumerate(ac.nodes):
        kind = node.kind
        if kind is NodeKind.SUM:
            acc = ZERO
            for c in node.children:
                acc += deltas[c]
            deltas[i] = acc
        elif kind is NodeKind.PRODUCT:
            chain = chain_order(node.children)
            first = chain[0]
            m_acc, d_acc = max_vals[first], deltas[first]
            for c in chain[1:]:
                d_acc = m_acc * deltas[c] + max_vals[c] * d_acc + d_acc * deltas[c] + half_ulp
                m_acc = m_acc * max_vals[c]
                reach = m_acc + d_acc
                if reach > peak:
                    peak = reach
            deltas[i] = d_acc
        elif kind is NodeKind.PARAMETER:
            deltas[i] = half_ulp
        reach = max_vals[i] + deltas[i]
        if reach > peak:
            peak = reach
    return deltas, peak


class CircuitAnalysis:
    """All per-circuit analyses, computed once and cached.

    Fixed-point budgets depend on the fraction-bit count and are cached per
    F; value ceilings/floors and rounding-factor counts are format-free.
    """

    def __init__(self, ac: ArithmeticCircuit):
        self.ac = ac
        self.max_val = max_value_analysis(ac)
        self.min_pos = min_value_analysis(ac)
        self.fl_count = propagate_float(ac)
        self._fixed_cache: dict[int, tuple[list[mpf], mpf]] = {}

        peak = ZERO
        for i, node in enumerate(ac.nodes):
            if node.kind is NodeKind.PRODUCT:
                chain = chain_order(node.children)
                acc = self.max_val[chain[0]]
                for c in chain[1:]:
                    acc = acc * self.max_val[c]
                    if acc > peak:
                        peak = acc
            if self.max_val[i] > peak:
                peak = self.max_val[i]
        self.peak_max: mpf = peak

        floor = None
        for v in self.min_pos:
            if v > ZERO and (floor is None or v < floor):
                floor = v
        self.min_positive: mpf = floor if floor is not None else ZERO

    @classmethod
    def of(cls, ac: "ArithmeticCircuit | CircuitAnalysis") -> "CircuitAnalysis":
        return ac if isinstance(ac, CircuitAnalysis) else cls(ac)

    def fixed(self, frac_bits: int) -> tuple[list[mpf], mpf]:
        cached = self._fixed_cache.get(frac_bits)
        if cached is None:
            cached = _propagate_fixed_full(self.ac, frac_bits, self.max_val)
            self._fixed_cache[frac_bits] = cached
        return cached

    def fixed_delta(self, frac_bits: int) -> list[mpf]:
        return self.fixed(frac_bits)[0]

    def fixed_peak(self, frac_bits: int) -> mpf:
        return self.fixed(frac_bits)[1]

    @property
    def root(self) -> int:
        return self.ac.root

    @property
    def root_max(self) -> mpf:
        return self.max_val[self.root]

    @property
    def root_min_pos(self) -> mpf:
        return self.min_pos[self.root]

    @property
    def root_count(self) -> int:
        return self.fl_count[self.root]

    def node_report(self, i: int, frac_bits: int | None = None) -> NodeAnalysis:
        delta = None if frac_bits is None else self.fixed_delta(frac_bits)[i]
        return NodeAnalysis(self.max_val[i], self.min_pos[i], delta, self.fl_count[i])


@dataclass(frozen=True)
class BoundReport:
    """A query-level guarantee for one number format."""

    fmt: NumberFormat
    query: QueryType
    error_kind: ErrorKind
    bound: mpf | None
    feasible: bool
    reason: str | None
    root: NodeAnalysis

    def to_json_dict(self) -> dict:
        if isinstance(self.fmt, FixedPoint):
            fmt_doc = {
                "kind": "fixed",
                "int_bits": self.fmt.int_bits,
                "frac_bits": self.fmt.frac_bits,
            }
        else:
            fmt_doc = {
                "kind": "float",
                "exp_bits": self.fmt.exp_bits,
                "mant_bits": self.fmt.mant_bits,
            }
        return {
            "format": fmt_doc,
            "query": self.query.value,
            "error": self.error_kind.value,
            "bound": None if self.bound is None else float(self.bound),
            "feasible": self.feasible,
            "reason": self.reason,
            "root": self.root.to_json_dict(),
        }


INFEASIBLE_CONDITIONAL_FIXED_REL = (
    "fixed point cannot bound the relative error of a conditional query; "
    "use a float representation"
)
INFEASIBLE_NEVER_POSITIVE = (
    "relative error is undefined: the root can only evaluate to zero"
)


def fixed_query_bound(
    analysis: CircuitAnalysis, frac_bits: int, query: QueryType, error_kind: ErrorKind
) -> tuple[mpf | None, str | None]:
    """Fixed-point bound at F fraction bits; (None, reason) if infeasible."""
    delta = analysis.fixed_delta(frac_bits)[analysis.root]
    if query is QueryType.CONDITIONAL:
        if error_kind is ErrorKind.RELATIVE:
            return None, INFEASIBLE_CONDITIONAL_FIXED_REL
        v_e = analysis.root_min_pos  # smallest positive evidence probability
        if v_e == ZERO:
            return None, INFEASIBLE_NEVER_POSITIVE
        return delta / v_e, None
    if error_kind is ErrorKind.ABSOLUTE:
        return delta, None
    v = analysis.root_min_pos
    if v == ZERO:
        return None, INFEASIBLE_NEVER_POSITIVE
    return delta / v, None


def float_query_bound(
    analysis: CircuitAnalysis, mant_bits: int, query: QueryType, error_kind: ErrorKind
) -> tuple[mpf | None, str | None]:
    """Minifloat bound at M mantissa bits; always feasible."""
    eps = pow2(-(mant_bits + 1))
    c = analysis.root_count
    grow = (ONE + eps) ** c
    if query is QueryType.CONDITIONAL:
        # Numerator and denominator each drift by at most (1 +/- eps)^c and
        # their ratio is taken exactly, so the conservative envelope below
        # covers the quotient.
        rel = grow / (ONE - eps) ** c - ONE
        if error_kind is ErrorKind.RELATIVE:
            return rel, None
        return min(ONE, rel), None
    rel = grow - ONE
    if error_kind is ErrorKind.RELATIVE:
        return rel, None
    return analysis.root_max * rel, None


def query_bound(
    ac: "ArithmeticCircuit | CircuitAnalysis", fmt: NumberFormat, spec: QuerySpec
) -> BoundReport:
    """Worst-case output error guarantee for one format and query."""
    analysis = CircuitAnalysis.of(ac)
    if isinstance(fmt, FixedPoint):
        bound, reason = fixed_query_bound(analysis, fmt.frac_bits, spec.query, spec.error_kind)
        root = analysis.node_report(analysis.root, fmt.frac_bits)
    else:
        bound, reason = float_query_bound(analysis, fmt.mant_bits, spec.query, spec.error_kind)
        root = analysis.node_report(analysis.root)
    return BoundReport(
        fmt=fmt,
        query=spec.query,
        error_kind=spec.error_kind,
        bound=bound,
        feasible=bound is not None,
        reason=reason,
        root=root,
    )
