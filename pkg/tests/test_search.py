"""Minimal bit-width search, range sizing, and representation selection."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acprec import (
    AcNode,
    ArithmeticCircuit,
    CircuitAnalysis,
    ErrorKind,
    EnergyModel,
    FixedPoint,
    FloatPoint,
    InfeasibleError,
    NodeKind,
    QuerySpec,
    QueryType,
    circuit_energy,
    compile_naive_ac,
    min_fraction_bits,
    min_mantissa_bits,
    query_bound,
    select_representation,
    size_exponent_bits,
    size_integer_bits,
)
from helpers import ac_from_params, ac_product_chain, ac_single_param, random_bn


def marg_abs(tol):
    return QuerySpec(QueryType.MARGINAL, ErrorKind.ABSOLUTE, tol)


def marg_rel(tol):
    return QuerySpec(QueryType.MARGINAL, ErrorKind.RELATIVE, tol)


def circuit_with_count_10():
    """Product chain of five parameters (count 9) summed with a sixth (count 10)."""
    chain = ac_product_chain([Fraction(1, 2)] * 5)
    nodes = list(chain.nodes)
    nodes.append(AcNode(NodeKind.PARAMETER, value=0.5))
    nodes.append(AcNode(NodeKind.SUM, children=(chain.root, len(nodes) - 1)))
    return ArithmeticCircuit(nodes)


class TestMinFractionBits:
    def test_hundred_term_sum(self):
        # root delta = 100 * 2^-(F+1); tolerance 0.01 forces F = 13
        ac = ac_from_params(NodeKind.SUM, ["0.005"] * 100)
        assert min_fraction_bits(ac, marg_abs(0.01)) == 13
        got = query_bound(ac, FixedPoint(1, 13), marg_abs(0.01))
        assert got.bound <= 0.01
        assert query_bound(ac, FixedPoint(1, 12), marg_abs(0.01)).bound > 0.01

    def test_loose_tolerance_hits_floor(self):
        assert min_fraction_bits(ac_single_param("0.5"), marg_abs(0.99)) == 2

    def test_requires_tolerance(self):
        from acprec import AcprecError

        with pytest.raises(AcprecError):
            min_fraction_bits(ac_single_param("0.5"), QuerySpec(QueryType.MARGINAL, ErrorKind.ABSOLUTE))

    def test_cap_exhaustion(self):
        with pytest.raises(InfeasibleError):
            min_fraction_bits(ac_single_param("0.5"), marg_abs(1e-30))

    def test_conditional_relative_structurally_infeasible(self):
        with pytest.raises(InfeasibleError):
            min_fraction_bits(ac_single_param("0.5"), QuerySpec(QueryType.CONDITIONAL, ErrorKind.RELATIVE, 0.1))

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10**9), tol=st.sampled_from([0.1, 0.01, 0.001]))
    def test_minimality(self, seed, tol):
        rng = random.Random(seed)
        ac = compile_naive_ac(random_bn(rng, rng.randrange(1, 4)))
        analysis = CircuitAnalysis.of(ac)
        spec = marg_abs(tol)
        best = min_fraction_bits(analysis, spec)
        assert query_bound(analysis, FixedPoint(1, best), spec).bound <= tol
        if best > 2:
            assert query_bound(analysis, FixedPoint(1, best - 1), spec).bound > tol


class TestMinMantissaBits:
    def test_count_ten_circuit(self):
        # (1+eps)^10 - 1 <= 0.01 first holds at M = 9
        ac = circuit_with_count_10()
        assert CircuitAnalysis.of(ac).root_count == 10
        assert min_mantissa_bits(ac, marg_rel(0.01)) == 9

    def test_loose_tolerance_hits_floor(self):
        assert min_mantissa_bits(ac_single_param("0.5"), marg_rel(0.5)) == 2

    def test_cap_exhaustion(self):
        with pytest.raises(InfeasibleError):
            min_mantissa_bits(ac_single_param("0.5"), marg_rel(1e-30))

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10**9), tol=st.sampled_from([0.1, 0.01, 0.001]))
    def test_minimality(self, seed, tol):
        rng = random.Random(seed)
        ac = compile_naive_ac(random_bn(rng, rng.randrange(1, 4)))
        analysis = CircuitAnalysis.of(ac)
        spec = marg_rel(tol)
        best = min_mantissa_bits(analysis, spec)
        assert query_bound(analysis, FloatPoint(8, best), spec).bound <= tol
        if best > 2:
            assert query_bound(analysis, FloatPoint(8, best - 1), spec).bound > tol


class TestIntegerSizing:
    def test_single_parameter_needs_one_bit(self):
        assert size_integer_bits(ac_single_param("0.5"), 8) == 1

    def test_max_around_three_point_seven(self):
        ac = ac_from_params(NodeKind.SUM, ["0.925"] * 4)
        assert size_integer_bits(ac, 8) == 2

    def test_error_headroom_forces_extra_bit(self):
        # exact max 1.9375 fits one integer bit at F=4, but max + delta = 2.0
        ac = ac_from_params(NodeKind.SUM, ["0.96875"] * 2)
        assert size_integer_bits(ac, 4) == 2

    def test_covers_product_partial_peaks(self):
        # partial products in a chain can exceed the final node maximum
        big = ac_from_params(NodeKind.PRODUCT, ["1.0", "1.0", "0.25"])
        fine = size_integer_bits(big, 12)
        analysis = CircuitAnalysis.of(big)
        from acprec._exact import to_fraction

        peak = to_fraction(analysis.fixed_peak(12))
        assert (1 << fine) - Fraction(1, 1 << 12) >= peak
        # the partial product of the two unit leaves exceeds the root max 0.25
        assert peak > to_fraction(analysis.max_val[big.root])

    def test_width_cap(self):
        ac = ac_from_params(NodeKind.SUM, ["1.0"] * 200)  # max 200 needs 8 int bits
        with pytest.raises(InfeasibleError):
            size_integer_bits(ac, 60)


class TestExponentSizing:
    def test_unit_window(self):
        # values within [2^-6, 1] led by min_pos 3/128
        ac = ac_from_params(NodeKind.SUM, ["0.0234375", "0.9765625"])
        assert size_exponent_bits(ac, 8) == 4

    def test_deep_underflow_needs_nine_bits(self):
        ac = ac_product_chain([Fraction(1, 2)] * 200)
        assert size_exponent_bits(ac, 8) == 9

    def test_all_ones_drift_headroom(self):
        # exact range is the point {1.0}, but rounding drift off 1.0 needs
        # exponents below 0, which two exponent bits cannot express
        assert size_exponent_bits(ac_single_param("1.0"), 8) == 3

    def test_cap_at_sixteen(self):
        ac = ac_product_chain([Fraction(1, 2)] * 40000)
        with pytest.raises(InfeasibleError):
            size_exponent_bits(ac, 8)


class TestSelection:
    def test_tie_prefers_fixed(self):
        res = select_representation(ac_single_param("0.5"), marg_abs(0.01))
        assert res.fixed.energy_nj == res.floating.energy_nj == 0.0
        assert res.selected == "fixed"

    def test_selected_candidate_is_cheaper(self):
        rng = random.Random(5)
        for _ in range(10):
            ac = compile_naive_ac(random_bn(rng, rng.randrange(2, 5)))
            res = select_representation(ac, marg_abs(0.01))
            cheaper = min(res.fixed.energy_nj, res.floating.energy_nj)
            assert res.selected_candidate.energy_nj == cheaper

    def test_candidate_energy_matches_circuit_energy(self):
        ac = compile_naive_ac(random_bn(random.Random(6), 3))
        res = select_representation(ac, marg_abs(0.01))
        assert res.fixed.energy_nj == pytest.approx(circuit_energy(ac, res.fixed.fmt), rel=1e-12)
        assert res.floating.energy_nj == pytest.approx(circuit_energy(ac, res.floating.fmt), rel=1e-12)

    def test_conditional_relative_always_selects_float(self):
        ac = circuit_with_count_10()
        res = select_representation(ac, QuerySpec(QueryType.CONDITIONAL, ErrorKind.RELATIVE, 0.01))
        assert res.selected == "float"
        assert res.fixed is None
        assert "float" in res.fixed_reason

    def test_both_infeasible_raises(self):
        with pytest.raises(InfeasibleError):
            select_representation(ac_single_param("0.5"), marg_abs(1e-30))

    def test_custom_energy_model_can_flip_choice(self):
        rng = random.Random(7)
        ac = compile_naive_ac(random_bn(rng, 3))
        base = select_representation(ac, marg_abs(0.01))
        assert base.selected == "fixed"
        # make fixed adders/multipliers ruinously expensive
        pricey = EnergyModel(fx_add_coeff=1e6, fx_mul_coeff=1e6)
        flipped = select_representation(ac, marg_abs(0.01), model=pricey)
        assert flipped.selected == "float"

    def test_report_shape(self):
        res = select_representation(circuit_with_count_10(), marg_abs(0.01))
        d = res.to_json_dict()
        assert set(d) == {"fixed", "float", "selected", "bound_at_selected", "fixed_reason", "float_reason"}
        assert d["selected"] in ("fixed", "float")
        sel = d[d["selected"]]
        assert sel["bound"] <= 0.01
        assert sel["energy_nj"] > 0

    def test_search_respects_cap_argument(self):
        ac = ac_single_param("0.5")
        with pytest.raises(InfeasibleError):
            min_fraction_bits(ac, marg_abs(1e-4), cap=8)
        assert min_fraction_bits(ac, marg_abs(1e-4), cap=16) == 13
