"""Circuit model, file formats, naive compilation, and enumeration oracles."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acprec import (
    AcNode,
    ArithmeticCircuit,
    CircuitError,
    EnumerationCapError,
    Evidence,
    EvidenceError,
    NodeKind,
    ParseError,
    Variable,
    compile_naive_ac,
    evaluate_exact,
    format_ac,
    format_bn,
    oracle_conditional,
    oracle_marginal,
    parse_ac,
    parse_bn,
)
from helpers import all_evidence, random_bn, random_evidence

TWO_TERM = """\
v a 2
v b 2
l a 0
l b 0
p 0.5
p 0.5
* 2 0 2
* 2 1 3
+ 2 4 5
"""

CHAIN_BN = """\
{
  "variables": [
    {"name": "A", "cardinality": 2},
    {"name": "B", "cardinality": 2},
    {"name": "C", "cardinality": 2}
  ],
  "parents": {"A": [], "B": ["A"], "C": ["B"]},
  "cpts": {
    "A": [0.6, 0.4],
    "B": [[0.9, 0.1], [0.2, 0.8]],
    "C": [[0.3, 0.7], [0.5, 0.5]]
  }
}
"""


class TestParseAc:
    def test_two_term_polynomial(self):
        ac = parse_ac(TWO_TERM)
        assert len(ac.nodes) == 7
        assert ac.nodes[ac.root].kind is NodeKind.SUM
        assert [n.kind for n in ac.nodes[:2]] == [NodeKind.INDICATOR] * 2
        # lambda_a * 0.5 + lambda_b * 0.5
        assert evaluate_exact(ac) == 1
        assert evaluate_exact(ac, Evidence({0: 1})) == 0.5
        assert evaluate_exact(ac, Evidence({0: 1, 1: 1})) == 0

    def test_node_ids_follow_line_order(self):
        ac = parse_ac(TWO_TERM)
        assert ac.nodes[4].children == (0, 2)
        assert ac.nodes[5].children == (1, 3)
        assert ac.nodes[6].children == (4, 5)

    def test_forward_reference_rejected(self):
        with pytest.raises(ParseError) as exc:
            parse_ac("v a 2\nl a 0\np 0.5\n+ 2 0 3\n")
        assert exc.value.line == 4

    def test_self_reference_rejected(self):
        with pytest.raises(ParseError):
            parse_ac("p 0.5\n+ 2 0 1\n")

    @pytest.mark.parametrize(
        "text",
        [
            "q nonsense\n",
            "v a\n",
            "l a 0\n",  # variable never declared
            "v a 2\nl a 5\n",  # state out of range
            "p 1.5\n",  # parameter outside [0,1]
            "p -0.1\n",
            "v a 2\nl a 0\n+ 1 0\n",  # arity below 2
            "+ 2 0\n",  # child count mismatch
        ],
    )
    def test_malformed_lines(self, text):
        with pytest.raises(ParseError):
            parse_ac(text)

    def test_error_carries_position(self):
        with pytest.raises(ParseError) as exc:
            parse_ac("v a 2\nzz\n")
        assert exc.value.line == 2
        assert exc.value.column == 1

    def test_comments_and_blank_lines_ignored(self):
        ac = parse_ac("# two halves\n\np 0.5\np 0.5\n\n+ 2 0 1\n")
        assert len(ac.nodes) == 3
        assert evaluate_exact(ac) == 1

    def test_decimal_parsed_exactly(self):
        ac = parse_ac("p 0.1\n")
        # 0.1 is kept as the nearest 200+ bit value, not a binary64 double
        got = Fraction(str(evaluate_exact(ac)))
        assert abs(got - Fraction(1, 10)) < Fraction(1, 10**50)

    def test_roundtrip_through_format(self):
        ac = parse_ac(TWO_TERM)
        again = parse_ac(format_ac(ac))
        assert len(again.nodes) == len(ac.nodes)
        for ev in all_evidence(ac.variables, 2):
            assert evaluate_exact(again, ev) == evaluate_exact(ac, ev)


class TestParseBn:
    def test_single_variable(self):
        bn = parse_bn('{"variables":[{"name":"X","cardinality":2}],"parents":{"X":[]},"cpts":{"X":[0.7,0.3]}}')
        assert len(bn.variables) == 1
        assert oracle_marginal(bn, Evidence({0: 0})) == Fraction(7, 10)

    def test_three_variable_chain(self):
        bn = parse_bn(CHAIN_BN)
        assert bn.parents == ((), (0,), (1,))
        assert [v.name for v in bn.variables] == ["A", "B", "C"]

    def test_row_sum_violation(self):
        bad = CHAIN_BN.replace("[0.6, 0.4]", "[0.6, 0.5]")
        with pytest.raises(ParseError):
            parse_bn(bad)

    def test_cyclic_parents_rejected(self):
        text = """{
          "variables": [{"name":"A","cardinality":2}, {"name":"B","cardinality":2}],
          "parents": {"A": ["B"], "B": ["A"]},
          "cpts": {"A": [[0.5,0.5],[0.5,0.5]], "B": [[0.5,0.5],[0.5,0.5]]}
        }"""
        with pytest.raises(ParseError):
            parse_bn(text)

    def test_dimension_mismatch(self):
        bad = CHAIN_BN.replace('"B": [[0.9, 0.1], [0.2, 0.8]]', '"B": [0.9, 0.1]')
        with pytest.raises(ParseError):
            parse_bn(bad)

    def test_unknown_parent_name(self):
        bad = CHAIN_BN.replace('"B": ["A"]', '"B": ["Z"]')
        with pytest.raises(ParseError):
            parse_bn(bad)

    def test_roundtrip_through_format(self):
        bn = parse_bn(CHAIN_BN)
        again = parse_bn(format_bn(bn))
        assert again.parents == bn.parents
        for ev in all_evidence(bn.variables, 3):
            assert oracle_marginal(again, ev) == oracle_marginal(bn, ev)


class TestCompileNaive:
    def test_single_binary_variable(self):
        bn = random_bn(random.Random(0), 1)
        ac = compile_naive_ac(bn)
        root = ac.nodes[ac.root]
        assert root.kind is NodeKind.SUM
        assert len(root.children) == 2

    def test_three_binary_variables_shape(self):
        bn = random_bn(random.Random(1), 3)
        ac = compile_naive_ac(bn)
        root = ac.nodes[ac.root]
        assert root.kind is NodeKind.SUM
        assert len(root.children) == 8
        for c in root.children:
            prod = ac.nodes[c]
            assert prod.kind is NodeKind.PRODUCT
            assert len(prod.children) == 6  # 3 indicators + 3 parameters

    def test_enumeration_cap(self):
        bn = random_bn(random.Random(2), 6)
        with pytest.raises(EnumerationCapError):
            compile_naive_ac(bn, cap=32)

    def test_normalization(self):
        for seed in range(5):
            bn = random_bn(random.Random(seed), 4)
            assert abs(evaluate_exact(compile_naive_ac(bn)) - 1) < 1e-12


class TestExactEvaluation:
    def test_contradiction_gives_zero(self):
        bn = parse_bn('{"variables":[{"name":"X","cardinality":2}],"parents":{"X":[]},"cpts":{"X":[1.0,0.0]}}')
        ac = compile_naive_ac(bn)
        assert evaluate_exact(ac, Evidence({0: 1})) == 0

    def test_monotone_under_added_evidence(self):
        rng = random.Random(3)
        bn = random_bn(rng, 4)
        ac = compile_naive_ac(bn)
        for _ in range(50):
            ev = random_evidence(rng, bn.variables)
            free = [v for v in range(4) if v not in ev]
            if not free:
                continue
            v = rng.choice(free)
            bigger = Evidence({**dict(ev), v: rng.randrange(2)})
            assert evaluate_exact(ac, bigger) <= evaluate_exact(ac, ev)

    def test_evidence_validated(self):
        ac = parse_ac(TWO_TERM)
        with pytest.raises(EvidenceError):
            evaluate_exact(ac, Evidence({0: 7}))
        with pytest.raises(EvidenceError):
            evaluate_exact(ac, Evidence({9: 0}))


class TestOracles:
    def test_empty_evidence_is_one(self):
        bn = random_bn(random.Random(4), 3)
        assert abs(oracle_marginal(bn) - 1) < 1e-12

    def test_full_evidence_is_joint_product(self):
        bn = parse_bn(CHAIN_BN)
        # Pr(A=0,B=1,C=1) = 0.6 * 0.1 * 0.5
        got = oracle_marginal(bn, Evidence({0: 0, 1: 1, 2: 1}))
        assert abs(got - Fraction(6, 10) * Fraction(1, 10) * Fraction(5, 10)) < 1e-15

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10**9), n=st.integers(1, 5))
    def test_oracle_matches_compiled_circuit(self, seed, n):
        rng = random.Random(seed)
        bn = random_bn(rng, n)
        ac = compile_naive_ac(bn)
        for ev in all_evidence(bn.variables, 2):
            assert abs(evaluate_exact(ac, ev) - oracle_marginal(bn, ev)) < 1e-12

    def test_conditional_is_ratio(self):
        bn = parse_bn(CHAIN_BN)
        q, ev = Evidence({2: 1}), Evidence({0: 0})
        expect = oracle_marginal(bn, q.union(ev)) / oracle_marginal(bn, ev)
        assert abs(oracle_conditional(bn, q, ev) - expect) < 1e-15

    def test_conditional_of_subset_is_one(self):
        bn = parse_bn(CHAIN_BN)
        ev = Evidence({0: 0, 1: 1})
        assert oracle_conditional(bn, Evidence({1: 1}), ev) == 1

    def test_conditional_on_impossible_evidence(self):
        bn = parse_bn('{"variables":[{"name":"X","cardinality":2}],"parents":{"X":[]},"cpts":{"X":[1.0,0.0]}}')
        with pytest.raises(EvidenceError):
            oracle_conditional(bn, Evidence({0: 0}), Evidence({0: 1}))


class TestCircuitValidation:
    def test_children_must_precede_parent(self):
        with pytest.raises(CircuitError):
            ArithmeticCircuit(
                [
                    AcNode(NodeKind.SUM, children=(1, 2)),
                    AcNode(NodeKind.PARAMETER, value=0.5),
                    AcNode(NodeKind.PARAMETER, value=0.5),
                ]
            )

    def test_operator_arity(self):
        with pytest.raises(CircuitError):
            ArithmeticCircuit(
                [AcNode(NodeKind.PARAMETER, value=0.5), AcNode(NodeKind.SUM, children=(0,))]
            )

    def test_indicator_needs_known_variable(self):
        with pytest.raises(CircuitError):
            ArithmeticCircuit([AcNode(NodeKind.INDICATOR, var=0, state=0)], variables=())

    def test_parameter_range(self):
        with pytest.raises(CircuitError):
            ArithmeticCircuit([AcNode(NodeKind.PARAMETER, value=1.25)])

    def test_variables_exposed(self):
        ac = parse_ac(TWO_TERM)
        assert [v.name for v in ac.variables] == ["a", "b"]
        assert all(v.cardinality == 2 for v in ac.variables)
