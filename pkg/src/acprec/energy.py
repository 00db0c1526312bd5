"""Operator-level energy models and whole-circuit energy prediction.

Per-operation costs in femtojoules, characterized at 1V:

    fixed add:  a * N            N = I + F datapath bits
    fixed mul:  b * N^2 * log N
    float add:  c * (M + 1)      M = mantissa bits (exponent width excluded)
    float mul:  d * (M + 1)^2 * log(M + 1)

Logarithms default to base 2. Coefficients are data: a JSON file can
replace them wholesale when a different technology node is characterized.

Circuit-level prediction sums the per-op cost over the binarized operator
multiset (an n-input node costs n - 1 two-input operators), matching the
generated netlist exactly, and reports nanojoules per evaluation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .circuit import ArithmeticCircuit, NodeKind
from .arith import FixedPoint, FloatPoint, NumberFormat
from .errors import AcprecError

FJ_PER_NJ = 1.0e6

_JSON_FIELDS = ("fx_add_coeff", "fx_mul_coeff", "fl_add_coeff", "fl_mul_coeff", "log_base")


@dataclass(frozen=True)
class EnergyModel:
    fx_add_coeff: float = 7.8
    fx_mul_coeff: float = 1.9
    fl_add_coeff: float = 44.74
    fl_mul_coeff: float = 2.9
    log_base: float = 2.0

    def __post_init__(self):
        for name in _JSON_FIELDS:
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not v > 0 or not math.isfinite(v):
                raise AcprecError(f"energy model field {name} must be a positive number, got {v!r}")
        if self.log_base <= 1:
            raise AcprecError(f"energy model log_base must exceed 1, got {self.log_base}")

    @classmethod
    def from_json_file(cls, path: str) -> "EnergyModel":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise AcprecError(f"energy model file {path} must hold a JSON object")
        unknown = sorted(set(doc) - set(_JSON_FIELDS))
        if unknown:
            raise AcprecError(f"unknown energy model fields in {path}: {', '.join(unknown)}")
        return replace(cls(), **doc)

    def _log(self, n: int) -> float:
        if self.log_base == 2.0:
            return math.log2(n)
        return math.log(n, self.log_base)

    def op_energy(self, kind: str, fmt: NumberFormat) -> float:
        """Energy of one 2-input operation in femtojoules."""
        if kind not in ("add", "mul"):
            raise AcprecError(f"operator kind must be 'add' or 'mul', got {kind!r}")
        if isinstance(fmt, FixedPoint):
            n = fmt.width
            if kind == "add":
                return self.fx_add_coeff * n
            return self.fx_mul_coeff * n * n * self._log(n)
        m1 = fmt.mant_bits + 1
        if kind == "add":
            return self.fl_add_coeff * m1
        return self.fl_mul_coeff * m1 * m1 * self._log(m1)


def op_energy(kind: str, fmt: NumberFormat, model: EnergyModel | None = None) -> float:
    return (model or EnergyModel()).op_energy(kind, fmt)


def operator_counts(ac: ArithmeticCircuit) -> tuple[int, int]:
    """(adds, muls) of the binarized circuit: n-input nodes cost n - 1 ops."""
    adds = muls = 0
    for node in ac.nodes:
        if node.kind is NodeKind.SUM:
            adds += len(node.children) - 1
        elif node.kind is NodeKind.PRODUCT:
            muls += len(node.children) - 1
    return adds, muls


def circuit_energy(
    ac: ArithmeticCircuit, fmt: NumberFormat, model: EnergyModel | None = None
) -> float:
    """Predicted energy per evaluation in nanojoules."""
    model = model or EnergyModel()
    adds, muls = operator_counts(ac)
    total_fj = adds * model.op_energy("add", fmt) + muls * model.op_energy("mul", fmt)
    return total_fj / FJ_PER_NJ
