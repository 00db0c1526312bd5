"""Arithmetic-circuit and Bayesian-network core.

An arithmetic circuit (AC) is a DAG of sum and product nodes over two kinds
of leaves: parameters (conditional-probability table entries) and indicators
(0/1 switches, one per variable state). Evaluating the circuit bottom-up
with indicators set from an evidence assignment yields the probability of
that evidence; the all-ones indicator setting sums the full joint to 1 for
circuits compiled from a well-formed network.

This module provides the data types, the line-oriented AC file format, the
JSON network format, a naive network-to-circuit compiler, extended-precision
exact evaluation, and brute-force enumeration oracles used to validate
everything else.
"""

from __future__ import annotations

import itertools
import json
import logging
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import prod

from mpmath import mpf

from ._exact import ONE, ZERO, to_fraction, to_mpf
from .errors import (
    CircuitError,
    EnumerationCapError,
    EvidenceError,
    ParseError,
)

log = logging.getLogger("acprec.circuit")

DEFAULT_ENUM_CAP = 1 << 20

ROW_SUM_TOLERANCE = Fraction(1, 10**9)


@dataclass(frozen=True)
class Variable:
    """A discrete network variable."""

    name: str
    cardinality: int

    def __post_init__(self):
        if not self.name:
            raise CircuitError("variable name must be non-empty")
        if self.cardinality < 1:
            raise CircuitError(f"variable {self.name!r} has cardinality {self.cardinality}")


class NodeKind(Enum):
    SUM = "+"
    PRODUCT = "*"
    PARAMETER = "p"
    INDICATOR = "l"


@dataclass(frozen=True)
class AcNode:
    """One circuit node; leaves carry a value or a (variable, state) pair."""

    kind: NodeKind
    children: tuple[int, ...] = ()
    value: mpf | None = None  # parameters only
    var: int | None = None  # indicators only
    state: int | None = None  # indicators only

    @property
    def is_leaf(self) -> bool:
        return self.kind in (NodeKind.PARAMETER, NodeKind.INDICATOR)


def chain_order(children: Iterable[int]) -> tuple[int, ...]:
    """Canonical left-to-right order for decomposing an n-ary node.

    Every consumer of multi-input nodes (low-precision evaluation, error
    propagation, netlist generation) folds children two at a time in this
    order, so their intermediate results line up exactly.
    """
    return tuple(sorted(children))


class Evidence(Mapping):
    """Immutable partial assignment of variable indices to state indices."""

    __slots__ = ("_assign",)

    def __init__(self, assignment: Mapping[int, int] | Iterable[tuple[int, int]] = ()):
        items = dict(assignment)
        for v, s in items.items():
            if not isinstance(v, int) or not isinstance(s, int):
                raise EvidenceError("evidence keys and states must be integers")
        self._assign = dict(sorted(items.items()))

    @classmethod
    def by_name(cls, names: Mapping[str, int], variables: tuple[Variable, ...]) -> "Evidence":
        index = {v.name: i for i, v in enumerate(variables)}
        try:
            return cls({index[name]: state for name, state in names.items()})
        except KeyError as exc:
            raise EvidenceError(f"unknown variable {exc.args[0]!r}") from None

    def __getitem__(self, var: int) -> int:
        return self._assign[var]

    def __iter__(self):
        return iter(self._assign)

    def __len__(self) -> int:
        return len(self._assign)

    def __hash__(self) -> int:
        return hash(tuple(self._assign.items()))

    def __repr__(self) -> str:
        return f"Evidence({self._assign!r})"

    def compatible(self, other: "Evidence") -> bool:
        """True when no variable is assigned two different states."""
        small, big = (self, other) if len(self) <= len(other) else (other, self)
        return all(big.get(v, s) == s for v, s in small.items())

    def union(self, other: "Evidence") -> "Evidence":
        if not self.compatible(other):
            raise EvidenceError("conflicting evidence assignments")
        merged = dict(self._assign)
        merged.update(other._assign)
        return Evidence(merged)

    def validate_for(self, variables: tuple[Variable, ...]) -> None:
        for v, s in self._assign.items():
            if not 0 <= v < len(variables):
                raise EvidenceError(f"evidence variable index {v} out of range")
            if not 0 <= s < variables[v].cardinality:
                raise EvidenceError(
                    f"state {s} out of range for variable {variables[v].name!r}"
                )


def indicator_is_on(node: AcNode, evidence: Evidence) -> bool:
    """An indicator reads 1 unless the evidence assigns its variable elsewhere."""
    assigned = evidence.get(node.var)
    return assigned is None or assigned == node.state


class ArithmeticCircuit:
    """A validated sum-product DAG in topological storage order.

    Children always have smaller ids than their parent; the root is the
    designated output node (by convention the last node of a circuit file).
    """

    __slots__ = ("nodes", "root", "variables")

    def __init__(
        self,
        nodes: Iterable[AcNode],
        variables: Iterable[Variable] = (),
        root: int | None = None,
    ):
        self.nodes: tuple[AcNode, ...] = tuple(nodes)
        self.variables: tuple[Variable, ...] = tuple(variables)
        if not self.nodes:
            raise CircuitError("circuit has no nodes")
        self.root: int = len(self.nodes) - 1 if root is None else root
        if not 0 <= self.root < len(self.nodes):
            raise CircuitError(f"root id {self.root} out of range")
        self._validate()

    def _validate(self) -> None:
        for i, node in enumerate(self.nodes):
            if node.kind in (NodeKind.SUM, NodeKind.PRODUCT):
                if len(node.children) < 2:
                    raise CircuitError(f"node {i}: {node.kind.value} needs >= 2 children")
                for c in node.children:
                    if not 0 <= c < i:
                        raise CircuitError(
                            f"node {i}: child {c} is not an earlier node "
                            "(storage must be topological)"
                        )
            elif node.kind is NodeKind.PARAMETER:
                if node.children:
                    raise CircuitError(f"node {i}: parameter leaf cannot have children")
                if node.value is None or not (ZERO <= node.value <= ONE):
                    raise CircuitError(f"node {i}: parameter value must lie in [0, 1]")
            elif node.kind is NodeKind.INDICATOR:
                if node.children:
                    raise CircuitError(f"node {i}: indicator leaf cannot have children")
                if node.var is None or not 0 <= node.var < len(self.variables):
                    raise CircuitError(f"node {i}: indicator references unknown variable")
                if node.state is None or not 0 <= node.state < self.variables[node.var].cardinality:
                    raise CircuitError(
                        f"node {i}: indicator state {node.state} out of range"
                    )
        unreachable = len(self.nodes) - len(self.reachable_from_root())
        if unreachable:
            log.warning("%d node(s) unreachable from the root", unreachable)

    def reachable_from_root(self) -> set[int]:
        seen = {self.root}
        stack = [self.root]
        while stack:
            for c in self.nodes[stack.pop()].children:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def operator_arities(self) -> list[int]:
        """Child counts of all sum/product nodes, in id order."""
        return [
            len(n.children)
            for n in self.nodes
            if n.kind in (NodeKind.SUM, NodeKind.PRODUCT)
        ]

    def indicator_keys(self) -> list[tuple[int, int]]:
        """Distinct (variable, state) pairs used by indicator leaves, sorted."""
        return sorted({(n.var, n.state) for n in self.nodes if n.kind is NodeKind.INDICATOR})

    def check_evidence(self, evidence: Evidence) -> None:
        evidence.validate_for(self.variables)


def evaluate_exact(ac: ArithmeticCircuit, evidence: Evidence = Evidence()) -> mpf:
    """Evaluate the circuit at extended precision under the given evidence."""
    ac.check_evidence(evidence)
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
            vals[i] = ONE if indicator_is_on(node, evidence) else ZERO
    return vals[ac.root]


# ---------------------------------------------------------------------------
# AC file format


_TOKEN = re.compile(r"\S+")


def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def parse_ac(text: str) -> ArithmeticCircuit:
    """Parse the line-oriented circuit format.

    Lines (``#`` starts a comment anywhere):

    - ``v <name> <cardinality>``: declare a variable (before any use).
    - ``l <var-name> <state-index>``: indicator leaf.
    - ``p <probability>``: parameter leaf, decimal in [0, 1], parsed exactly
      then rounded once to the working precision.
    - ``+ <k> <id_1> ... <id_k>`` / ``* <k> <id_1> ... <id_k>``: operator
      node over earlier node ids.

    Node ids are implicit: the n-th non-declaration line is node n-1, and the
    last node is the root.
    """
    variables: list[Variable] = []
    var_index: dict[str, int] = {}
    nodes: list[AcNode] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = list(_TOKEN.finditer(_strip_comment(raw)))
        if not tokens:
            continue

        def fail(msg: str, tok: re.Match | None = None) -> ParseError:
            col = (tok.start() + 1) if tok is not None else tokens[0].start() + 1
            return ParseError(msg, line=lineno, column=col)

        head = tokens[0].group()
        args = tokens[1:]
        if head == "v":
            if len(args) != 2:
                raise fail("expected: v <name> <cardinality>")
            name = args[0].group()
            if name in var_index:
                raise fail(f"variable {name!r} already declared", args[0])
            try:
                card = int(args[1].group())
            except ValueError:
                raise fail("cardinality must be an integer", args[1]) from None
            if card < 1:
                raise fail("cardinality must be >= 1", args[1])
            var_index[name] = len(variables)
            variables.append(Variable(name, card))
        elif head == "l":
            if len(args) != 2:
                raise fail("expected: l <var-name> <state-index>")
            name = args[0].group()
            if name not in var_index:
                raise fail(f"unknown variable {name!r}", args[0])
            try:
                state = int(args[1].group())
            except ValueError:
                raise fail("state index must be an integer", args[1]) from None
            var = var_index[name]
            if not 0 <= state < variables[var].cardinality:
                raise fail(
                    f"state {state} out of range for {name!r} "
                    f"(cardinality {variables[var].cardinality})",
                    args[1],
                )
            nodes.append(AcNode(NodeKind.INDICATOR, var=var, state=state))
        elif head == "p":
            if len(args) != 1:
                raise fail("expected: p <probability>")
            try:
                value = Fraction(args[0].group())
            except (ValueError, ZeroDivisionError):
                raise fail("probability must be a decimal number", args[0]) from None
            if not 0 <= value <= 1:
                raise fail("probability must lie in [0, 1]", args[0])
            nodes.append(AcNode(NodeKind.PARAMETER, value=to_mpf(value)))
        elif head in ("+", "*"):
            if not args:
                raise fail(f"expected: {head} <k> <id_1> ... <id_k>")
            try:
                k = int(args[0].group())
            except ValueError:
                raise fail("child count must be an integer", args[0]) from None
            if k < 2:
                raise fail("operator nodes need at least 2 children", args[0])
            if len(args) - 1 != k:
                raise fail(f"expected {k} child ids, found {len(args) - 1}")
            children = []
            for tok in args[1:]:
                try:
                    c = int(tok.group())
                except ValueError:
                    raise fail("child id must be an integer", tok) from None
                if c < 0 or c >= len(nodes):
                    raise fail(
                        f"child id {c} is not an earlier node (forward reference?)", tok
                    )
                children.append(c)
            kind = NodeKind.SUM if head == "+" else NodeKind.PRODUCT
            nodes.append(AcNode(kind, children=tuple(children)))
        else:
            raise fail(f"unknown line type {head!r}")

    if not nodes:
        raise ParseError("circuit file declares no nodes")
    return ArithmeticCircuit(nodes, variables)


def _decimal_exact(fr: Fraction) -> str:
    """Exact decimal form of a rational whose denominator is 2^a * 5^b."""
    num, den = fr.numerator, fr.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        raise ValueError("not exactly representable in decimal")
    digits = max(twos, fives)
    scaled = num * 10**digits // fr.denominator
    text = str(scaled).rjust(digits + 1, "0")
    return (text[:-digits] + "." + text[-digits:]) if digits else text


def format_ac(ac: ArithmeticCircuit) -> str:
    """Serialize a circuit back to the line format (inverse of parse_ac)."""
    lines = [f"v {v.name} {v.cardinality}" for v in ac.variables]
    for node in ac.nodes:
        if node.kind is NodeKind.INDICATOR:
            lines.append(f"l {ac.variables[node.var].name} {node.state}")
        elif node.kind is NodeKind.PARAMETER:
            fr = to_fraction(node.value)
            try:
                text = _decimal_exact(fr)
            except ValueError:
                text = repr(float(node.value))
            lines.append(f"p {text}")
        else:
            ids = " ".join(str(c) for c in node.children)
            lines.append(f"{node.kind.value} {len(node.children)} {ids}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Bayesian networks


class BayesNet:
    """A discrete Bayesian network with tabular conditional distributions.

    Conditional tables are stored flat in row-major order: parent states vary
    slowest (in the order parents are listed), the variable's own state
    fastest. Rows must sum to 1 within 1e-9.
    """

    __slots__ = ("variables", "parents", "cpts")

    def __init__(
        self,
        variables: Iterable[Variable],
        parents: Iterable[Iterable[int]],
        cpts: Iterable[Iterable],
    ):
        self.variables = tuple(variables)
        self.parents = tuple(tuple(p) for p in parents)
        self.cpts = tuple(tuple(to_mpf(x) for x in cpt) for cpt in cpts)
        self._validate()

    def _validate(self) -> None:
        n = len(self.variables)
        if len(self.parents) != n or len(self.cpts) != n:
            raise CircuitError("variables, parents and cpts must have equal length")
        for i, ps in enumerate(self.parents):
            for p in ps:
                if not 0 <= p < n or p == i:
                    raise CircuitError(f"variable {i} has invalid parent {p}")
            if len(set(ps)) != len(ps):
                raise CircuitError(f"variable {i} lists a duplicate parent")
        self._check_acyclic()
        for i, cpt in enumerate(self.cpts):
            card = self.variables[i].cardinality
            rows = prod(self.variables[p].cardinality for p in self.parents[i])
            if len(cpt) != rows * card:
                raise CircuitError(
                    f"cpt for {self.variables[i].name!r} has {len(cpt)} entries, "
                    f"expected {rows * card}"
                )
            for x in cpt:
                if not (ZERO <= x <= ONE):
                    raise CircuitError(
                        f"cpt entry out of [0, 1] for {self.variables[i].name!r}"
                    )
            tol = to_mpf(ROW_SUM_TOLERANCE) * 2
            for r in range(rows):
                row_sum = ZERO
                for s in cpt[r * card : (r + 1) * card]:
                    row_sum += s
                if abs(row_sum - ONE) > tol:
                    raise CircuitError(
                        f"cpt row {r} for {self.variables[i].name!r} sums to "
                        f"{float(row_sum)!r}, not 1"
                    )

    def _check_acyclic(self) -> None:
        n = len(self.variables)
        indeg = [len(ps) for ps in self.parents]
        children: list[list[int]] = [[] for _ in range(n)]
        for i, ps in enumerate(self.parents):
            for p in ps:
                children[p].append(i)
        ready = [i for i in range(n) if indeg[i] == 0]
        seen = 0
        while ready:
            v = ready.pop()
            seen += 1
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if seen != n:
            raise CircuitError("parent graph contains a cycle")

    def __len__(self) -> int:
        return len(self.variables)

    def row_index(self, var: int, parent_states: tuple[int, ...]) -> int:
        idx = 0
        for p, s in zip(self.parents[var], parent_states):
            idx = idx * self.variables[p].cardinality + s
        return idx

    def cpt_value(self, var: int, parent_states: tuple[int, ...], state: int) -> mpf:
        card = self.variables[var].cardinality
        return self.cpts[var][self.row_index(var, parent_states) * card + state]

    @property
    def joint_size(self) -> int:
        return prod(v.cardinality for v in self.variables)

    def check_evidence(self, evidence: Evidence) -> None:
        evidence.validate_for(self.variables)


def parse_bn(text: str) -> BayesNet:
    """Parse the JSON network format.

    Expected shape::

        {"variables": [{"name": ..., "cardinality": ...}, ...],
         "parents": {name: [parent names]},
         "cpts": {name: nested row-major array}}

    CPT arrays may be nested per parent (outer dimensions follow the parent
    list, parent states varying slowest) or given flat in the same row-major
    order. Decimal values parse exactly before rounding to working precision.
    """
    try:
        doc = json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError("top-level JSON value must be an object")
    for key in ("variables", "parents", "cpts"):
        if key not in doc:
            raise ParseError(f"missing top-level key {key!r}")

    variables = []
    for i, entry in enumerate(doc["variables"]):
        if not isinstance(entry, dict) or "name" not in entry or "cardinality" not in entry:
            raise ParseError(f"variables[{i}] must have 'name' and 'cardinality'")
        if not isinstance(entry["cardinality"], int):
            raise ParseError(f"variables[{i}]: cardinality must be an integer")
        try:
            variables.append(Variable(str(entry["name"]), entry["cardinality"]))
        except CircuitError as exc:
            raise ParseError(str(exc)) from None
    index = {v.name: i for i, v in enumerate(variables)}
    if len(index) != len(variables):
        raise ParseError("duplicate variable names")

    def resolve(name) -> int:
        if name not in index:
            raise ParseError(f"unknown variable {name!r}")
        return index[name]

    parents: list[tuple[int, ...]] = [()] * len(variables)
    for name, plist in doc["parents"].items():
        if not isinstance(plist, list):
            raise ParseError(f"parents[{name!r}] must be a list")
        parents[resolve(name)] = tuple(resolve(p) for p in plist)

    def flatten(value, dims: list[int], path: str) -> list:
        if not dims:
            if isinstance(value, list):
                raise ParseError(f"{path}: too many nesting levels")
            return [value]
        if not isinstance(value, list) or len(value) != dims[0]:
            raise ParseError(
                f"{path}: expected a list of length {dims[0]}"
            )
        out = []
        for j, item in enumerate(value):
            out.extend(flatten(item, dims[1:], f"{path}[{j}]"))
        return out

    cpts: list[list[Fraction]] = [None] * len(variables)  # type: ignore[list-item]
    for name, table in doc["cpts"].items():
        v = resolve(name)
        dims = [variables[p].cardinality for p in parents[v]] + [variables[v].cardinality]
        if (
            isinstance(table, list)
            and not any(isinstance(x, list) for x in table)
            and len(dims) > 1
        ):
            flat = list(table)  # flat row-major form
            if len(flat) != prod(dims):
                raise ParseError(
                    f"cpts[{name!r}]: expected {prod(dims)} entries, found {len(flat)}"
                )
        else:
            flat = flatten(table, dims, f"cpts[{name!r}]")
        entries = []
        for x in flat:
            if isinstance(x, bool) or not isinstance(x, (int, Fraction)):
                raise ParseError(f"cpts[{name!r}]: entries must be numbers")
            fr = Fraction(x)
            if not 0 <= fr <= 1:
                raise ParseError(f"cpts[{name!r}]: entry {float(fr)} outside [0, 1]")
            entries.append(fr)
        card = variables[v].cardinality
        for r in range(len(entries) // card):
            row = entries[r * card : (r + 1) * card]
            if abs(sum(row) - 1) > ROW_SUM_TOLERANCE:
                raise ParseError(
                    f"cpts[{name!r}]: row {r} sums to {float(sum(row))!r}, not 1"
                )
        cpts[v] = entries
    for i, cpt in enumerate(cpts):
        if cpt is None:
            raise ParseError(f"missing cpt for variable {variables[i].name!r}")

    try:
        return BayesNet(variables, parents, cpts)
    except CircuitError as exc:
        raise ParseError(str(exc)) from None


def format_bn(bn: BayesNet) -> str:
    """Serialize a network to the JSON format (flat row-major CPTs)."""
    doc = {
        "variables": [
            {"name": v.name, "cardinality": v.cardinality} for v in bn.variables
        ],
        "parents": {
            bn.variables[i].name: [bn.variables[p].name for p in ps]
            for i, ps in enumerate(bn.parents)
        },
        "cpts": {
            bn.variables[i].name: [float(x) for x in cpt]
            for i, cpt in enumerate(bn.cpts)
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Naive compilation and enumeration oracles


def compile_naive_ac(bn: BayesNet, cap: int = DEFAULT_ENUM_CAP) -> ArithmeticCircuit:
    """Compile a network into the flat sum-of-instantiations circuit.

    One product per complete instantiation (its indicator and parameter
    leaves, all shared), one root sum. Exponential in network size; guarded
    by ``cap`` on the joint-instantiation count.
    """
    if bn.joint_size > cap:
        raise EnumerationCapError(
            f"joint space of {bn.joint_size} instantiations exceeds cap {cap}"
        )
    nodes: list[AcNode] = []
    indicator_id: dict[tuple[int, int], int] = {}
    for v, var in enumerate(bn.variables):
        for s in range(var.cardinality):
            indicator_id[(v, s)] = len(nodes)
            nodes.append(AcNode(NodeKind.INDICATOR, var=v, state=s))
    param_id: dict[tuple[int, int], int] = {}
    for v, cpt in enumerate(bn.cpts):
        for flat, value in enumerate(cpt):
            param_id[(v, flat)] = len(nodes)
            nodes.append(AcNode(NodeKind.PARAMETER, value=value))

    cards = [v.cardinality for v in bn.variables]
    products = []
    for inst in itertools.product(*(range(c) for c in cards)):
        children = []
        for v in range(len(bn.variables)):
            parent_states = tuple(inst[p] for p in bn.parents[v])
            flat = bn.row_index(v, parent_states) * cards[v] + inst[v]
            children.append(indicator_id[(v, inst[v])])
            children.append(param_id[(v, flat)])
        products.append(len(nodes))
        nodes.append(AcNode(NodeKind.PRODUCT, children=tuple(sorted(children))))
    nodes.append(AcNode(NodeKind.SUM, children=tuple(products)))
    return ArithmeticCircuit(nodes, bn.variables)


def oracle_marginal(bn: BayesNet, evidence: Evidence = Evidence(), cap: int = DEFAULT_ENUM_CAP) -> mpf:
    """Probability of the evidence by brute-force joint enumeration."""
    bn.check_evidence(evidence)
    n = len(bn.variables)
    free = [v for v in range(n) if v not in evidence]
    space = prod(bn.variables[v].cardinality for v in free)
    if space > cap:
        raise EnumerationCapError(
            f"enumeration space of {space} completions exceeds cap {cap}"
        )
    assign = [evidence.get(v, 0) for v in range(n)]
    parents = bn.parents
    total = ZERO
    for combo in itertools.product(*(range(bn.variables[v].cardinality) for v in free)):
        for v, s in zip(free, combo):
            assign[v] = s
        p = ONE
        for v in range(n):
            p *= bn.cpt_value(v, tuple(assign[q] for q in parents[v]), assign[v])
        total += p
    return total


def oracle_conditional(
    bn: BayesNet,
    query: Evidence,
    evidence: Evidence,
    cap: int = DEFAULT_ENUM_CAP,
) -> mpf:
    """Conditional probability of query given evidence, by enumeration."""
    bn.check_evidence(query)
    p_e = oracle_marginal(bn, evidence, cap=cap)
    if p_e == ZERO:
        raise EvidenceError("evidence has zero probability")
    if not query.compatible(evidence):
        return ZERO
    p_qe = oracle_marginal(bn, query.union(evidence), cap=cap)
    return p_qe / p_e
