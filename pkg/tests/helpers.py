"""Shared generators and independent oracles for the test suite.

The rounding oracles here deliberately avoid the package's shift-based
integer kernels: they work on Fractions with explicit floor/compare
arithmetic, so agreement between the two is a genuine cross-check.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from acprec import (
    AcNode,
    ArithmeticCircuit,
    BayesNet,
    Evidence,
    FixedPoint,
    FloatPoint,
    NodeKind,
    Variable,
)


# ---------------------------------------------------------------------------
# Independent rounding oracles


def floor_log2(fr: Fraction) -> int:
    assert fr > 0
    e = 0
    while fr >= 2:
        fr /= 2
        e += 1
    while fr < 1:
        fr *= 2
        e -= 1
    return e


def round_half_even(fr: Fraction) -> int:
    """Nearest integer, ties to the even neighbor."""
    floor = fr.numerator // fr.denominator
    rem = fr - floor
    if rem > Fraction(1, 2):
        return floor + 1
    if rem < Fraction(1, 2):
        return floor
    return floor if floor % 2 == 0 else floor + 1


def fixed_quantize_oracle(x: Fraction, fmt: FixedPoint) -> Fraction | None:
    """Nearest multiple of 2^-F; None when it exceeds the format's maximum."""
    raw = round_half_even(x * (1 << fmt.frac_bits))
    if raw > fmt.max_raw:
        return None
    return Fraction(raw, 1 << fmt.frac_bits)


def round_mantissa_oracle(x: Fraction, mant_bits: int) -> tuple[int, int]:
    """Unbounded-exponent round-to-nearest-even: (exponent, M+1-bit mantissa)."""
    e = floor_log2(x)
    m = round_half_even(x / Fraction(2) ** (e - mant_bits))
    if m == 1 << (mant_bits + 1):
        m >>= 1
        e += 1
    return e, m


def float_quantize_oracle(x: Fraction, fmt: FloatPoint) -> Fraction | str:
    """Nearest normalized value, or 'underflow'/'overflow' per the strict
    out-of-range contract (checked on the input value, before rounding)."""
    if x == 0:
        return Fraction(0)
    if x < fmt.smallest_normalized:
        return "underflow"
    if x > fmt.largest_normalized:
        return "overflow"
    e, m = round_mantissa_oracle(x, fmt.mant_bits)
    return Fraction(m, 1) * Fraction(2) ** (e - fmt.mant_bits)


def float_op_oracle(exact: Fraction, fmt: FloatPoint) -> Fraction | str:
    """Round-then-check-range semantics of the add/mul cores."""
    if exact == 0:
        return Fraction(0)
    e, m = round_mantissa_oracle(exact, fmt.mant_bits)
    if e < fmt.min_exp:
        return "underflow"
    if e > fmt.max_exp:
        return "overflow"
    return Fraction(m, 1) * Fraction(2) ** (e - fmt.mant_bits)


# ---------------------------------------------------------------------------
# Circuit builders


def ac_from_params(kind: NodeKind, values) -> ArithmeticCircuit:
    """One operator over parameter leaves (values as exact Fractions/strs)."""
    nodes = [AcNode(NodeKind.PARAMETER, value=_to_value(v)) for v in values]
    nodes.append(AcNode(kind, children=tuple(range(len(values)))))
    return ArithmeticCircuit(nodes)


def ac_single_param(value) -> ArithmeticCircuit:
    return ArithmeticCircuit([AcNode(NodeKind.PARAMETER, value=_to_value(value))])


def ac_product_chain(values) -> ArithmeticCircuit:
    """Left-deep chain of 2-input products over parameter leaves."""
    nodes = [AcNode(NodeKind.PARAMETER, value=_to_value(v)) for v in values]
    acc = 0
    for i in range(1, len(values)):
        nodes.append(AcNode(NodeKind.PRODUCT, children=(acc, i)))
        acc = len(nodes) - 1
    return ArithmeticCircuit(nodes)


def _to_value(v):
    from acprec.circuit import to_mpf  # exact conversion used by the parsers

    return to_mpf(Fraction(v) if isinstance(v, str) else v)


# ---------------------------------------------------------------------------
# Random generators (always seeded by the caller)


def rand_prob(rng: random.Random, lo=Fraction(1, 20), hi=Fraction(19, 20)) -> Fraction:
    span = hi - lo
    return lo + span * Fraction(rng.randrange(1001), 1000)


def random_bn(rng: random.Random, n_vars: int, card: int = 2, max_parents: int = 2) -> BayesNet:
    variables = [Variable(f"X{i}", card) for i in range(n_vars)]
    parents = []
    for i in range(n_vars):
        k = rng.randrange(min(i, max_parents) + 1)
        parents.append(tuple(sorted(rng.sample(range(i), k))))
    cpts = []
    for i in range(n_vars):
        rows = card ** len(parents[i])
        flat = []
        for _ in range(rows):
            weights = [rng.randrange(1, 20) for _ in range(card)]
            total = sum(weights)
            flat.extend(Fraction(w, total) for w in weights)
        cpts.append(flat)
    return BayesNet(variables, parents, cpts)


def random_evidence(rng: random.Random, variables, p_assign: float = 0.5) -> Evidence:
    assign = {}
    for i, var in enumerate(variables):
        if rng.random() < p_assign:
            assign[i] = rng.randrange(var.cardinality)
    return Evidence(assign)


def all_evidence(variables, max_vars: int):
    """Every evidence setting over at most max_vars variables (incl. empty)."""
    n = len(variables)
    for k in range(min(max_vars, n) + 1):
        for subset in itertools.combinations(range(n), k):
            cards = [variables[v].cardinality for v in subset]
            for states in itertools.product(*(range(c) for c in cards)):
                yield Evidence(dict(zip(subset, states)))


def random_ac(rng: random.Random, n_ops: int = 10, n_vars: int = 2, card: int = 2) -> ArithmeticCircuit:
    """Free-form random DAG over parameter and indicator leaves.

    Unlike BN compilations, node values may exceed 1, which stresses the
    range analyses and integer/exponent sizing.
    """
    variables = [Variable(f"V{i}", card) for i in range(n_vars)]
    nodes: list[AcNode] = []
    for v in range(n_vars):
        for s in range(card):
            nodes.append(AcNode(NodeKind.INDICATOR, var=v, state=s))
    for _ in range(rng.randrange(2, 5)):
        nodes.append(AcNode(NodeKind.PARAMETER, value=_to_value(rand_prob(rng))))
    for _ in range(n_ops):
        kind = NodeKind.SUM if rng.random() < 0.5 else NodeKind.PRODUCT
        arity = rng.randrange(2, 5)
        pool = range(len(nodes))
        children = tuple(rng.sample(pool, min(arity, len(nodes))))
        nodes.append(AcNode(kind, children=children))
    return ArithmeticCircuit(nodes, variables)


def register_counts_to_output(netlist) -> dict[int, set[int]]:
    """For every cell, the set of register counts over all paths to the output.

    Exhaustive path enumeration via memoized DFS; the balanced-pipeline
    invariant says every input cell's set is exactly {latency}.
    """
    from acprec.hwgen import CellKind

    consumers: dict[int, list[int]] = {i: [] for i in range(len(netlist.cells))}
    for i, cell in enumerate(netlist.cells):
        for src in cell.inputs:
            consumers[src].append(i)

    memo: dict[int, set[int]] = {}

    def walk(i: int) -> set[int]:
        if i == netlist.output:
            return {0}
        if i in memo:
            return memo[i]
        out: set[int] = set()
        for c in consumers[i]:
            inc = 1 if netlist.cells[c].kind is CellKind.REG else 0
            out.update(inc + tail for tail in walk(c))
        memo[i] = out
        return out

    counts = {}
    for i, cell in enumerate(netlist.cells):
        if cell.kind in (CellKind.INDICATOR, CellKind.PARAM):
            found = walk(i)
            if i == netlist.output:
                found = {0}
            counts[i] = found
    return counts


def exact_node_values(ac: ArithmeticCircuit, evidence: Evidence) -> list[Fraction]:
    """Bottom-up rational evaluation of every node (independent of the package's
    extended-precision evaluator)."""
    from acprec._exact import to_fraction

    vals: list[Fraction] = []
    for node in ac.nodes:
        if node.kind is NodeKind.PARAMETER:
            vals.append(to_fraction(node.value))
        elif node.kind is NodeKind.INDICATOR:
            observed = evidence.get(node.var)
            vals.append(Fraction(0 if observed is not None and observed != node.state else 1))
        elif node.kind is NodeKind.SUM:
            vals.append(sum(vals[c] for c in node.children))
        else:
            prod = Fraction(1)
            for c in node.children:
                prod *= vals[c]
            vals.append(prod)
    return vals


def evidence_settings(variables):
    """Exhaustive full and partial assignments for tiny variable sets."""
    # choice == cardinality means "unobserved"
    ranges = [range(var.cardinality + 1) for var in variables]
    for combo in itertools.product(*ranges):
        yield Evidence(
            {v: s for v, s in enumerate(combo) if s < variables[v].cardinality}
        )
