"""Precision analysis and hardware generation for arithmetic-circuit inference.

Core flow: load or compile a circuit (`circuit`), bound its reduced-precision
error (`bounds`), search minimal bit-widths and pick a representation by
energy (`search`, `energy`), emulate bit-exactly (`arith`), and generate a
pipelined Verilog implementation (`hwgen`).
"""

from .errors import (
    AcprecError,
    CircuitError,
    EnumerationCapError,
    EvidenceError,
    FormatError,
    InfeasibleError,
    ParseError,
    RangeOverflowError,
    RangeUnderflowError,
)
from .circuit import (
    AcNode,
    ArithmeticCircuit,
    BayesNet,
    Evidence,
    NodeKind,
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
from .arith import (
    FixedPoint,
    FixedVal,
    FloatPoint,
    FloatVal,
    LowPrecEvaluator,
    NumberFormat,
    evaluate_lowprec,
    fl_add,
    fl_mul,
    fl_quantize,
    fx_add,
    fx_mul,
    fx_quantize,
)
from .bounds import (
    BoundReport,
    CircuitAnalysis,
    ErrorKind,
    QuerySpec,
    QueryType,
    max_value_analysis,
    min_value_analysis,
    propagate_fixed,
    propagate_float,
    query_bound,
)
from .search import (
    Candidate,
    SearchResult,
    min_fraction_bits,
    min_mantissa_bits,
    select_representation,
    size_exponent_bits,
    size_integer_bits,
)
from .energy import EnergyModel, circuit_energy, op_energy, operator_counts
from .hwgen import (
    Netlist,
    NetlistSimulator,
    binarize,
    build_netlist,
    emit_verilog,
    schedule_pipeline,
    simulate_netlist,
)

__version__ = "0.1.0"

__all__ = [
    "AcNode",
    "AcprecError",
    "ArithmeticCircuit",
    "BayesNet",
    "BoundReport",
    "Candidate",
    "CircuitAnalysis",
    "CircuitError",
    "EnergyModel",
    "EnumerationCapError",
    "ErrorKind",
    "Evidence",
    "EvidenceError",
    "FixedPoint",
    "FixedVal",
    "FloatPoint",
    "FloatVal",
    "FormatError",
    "InfeasibleError",
    "LowPrecEvaluator",
    "Netlist",
    "NetlistSimulator",
    "NodeKind",
    "NumberFormat",
    "ParseError",
    "QuerySpec",
    "QueryType",
    "RangeOverflowError",
    "RangeUnderflowError",
    "SearchResult",
    "Variable",
    "binarize",
    "build_netlist",
    "circuit_energy",
    "compile_naive_ac",
    "emit_verilog",
    "evaluate_exact",
    "evaluate_lowprec",
    "fl_add",
    "fl_mul",
    "fl_quantize",
    "format_ac",
    "format_bn",
    "fx_add",
    "fx_mul",
    "fx_quantize",
    "max_value_analysis",
    "min_fraction_bits",
    "min_mantissa_bits",
    "min_value_analysis",
    "op_energy",
    "operator_counts",
    "oracle_conditional",
    "oracle_marginal",
    "parse_ac",
    "parse_bn",
    "propagate_fixed",
    "propagate_float",
    "query_bound",
    "schedule_pipeline",
    "select_representation",
    "simulate_netlist",
    "size_exponent_bits",
    "size_integer_bits",
    "__version__",
]
