"""Pipelined netlist construction, Verilog emission, and netlist simulation.

The flow is: binarize the circuit into 2-input operators (left-to-right
chains in canonical child order, the same order the emulator folds), then
schedule each operator one pipeline stage after its latest input, with a
mandatory register on every operator output and shared delay chains bringing
early inputs into alignment. Every input-to-output path then crosses exactly
`latency` registers, so one fresh indicator vector can enter per cycle.

The netlist has its own cycle-accurate simulator built on the very same
integer arithmetic cores as the emulator; after `latency` cycles its output
is bit-exact to evaluate_lowprec. The Verilog printer targets plain
Verilog-2001 (no vendor primitives) and is byte-deterministic. The emitted
RTL omits overflow/underflow traps: formats sized by the search make those
unreachable, and the simulator raises on them during validation instead.

Cell `stage` is the number of clock edges after which the cell's registered
output is valid for a vector applied at cycle 0 (inputs are stage 0,
combinational).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import mpmath

from .arith import (
    FixedPoint,
    FloatPoint,
    NumberFormat,
    fl_quantize,
    fx_quantize,
    _fl_add_core,
    _fl_mul_core,
    _fx_add_raw,
    _fx_mul_raw,
)
from .circuit import AcNode, ArithmeticCircuit, Evidence, NodeKind, chain_order
from .errors import CircuitError

MAX_BALANCE_CHECK_NODES = 50  # exhaustive path walks stay cheap below this


def binarize(ac: ArithmeticCircuit) -> ArithmeticCircuit:
    """Rewrite every operator into a chain of 2-input operators.

    Chains run left to right over the children in canonical order, so the
    exact value is unchanged and low-precision evaluation of the result
    matches the emulator's fold of the original circuit step for step.
    """
    nodes: list[AcNode] = []
    mapping: list[int] = []
    for node in ac.nodes:
        if node.is_leaf:
            nodes.append(node)
            mapping.append(len(nodes) - 1)
            continue
        mapped = [mapping[c] for c in chain_order(node.children)]
        acc = mapped[0]
        for c in mapped[1:]:
            nodes.append(AcNode(node.kind, (acc, c)))
            acc = len(nodes) - 1
        mapping.append(acc)
    return ArithmeticCircuit(tuple(nodes), ac.variables, root=mapping[ac.root])


class CellKind(str, Enum):
    INDICATOR = "indicator"  # 1-bit port expanded to the format's 0/1
    PARAM = "param"  # constant, raw bit encoding
    ADD = "add"
    MUL = "mul"
    REG = "reg"


@dataclass(frozen=True)
class Cell:
    kind: CellKind
    inputs: tuple[int, ...] = ()
    stage: int = 0
    var: int | None = None
    state: int | None = None
    raw: int | None = None

    def to_json_dict(self) -> dict:
        doc: dict = {"kind": self.kind.value, "inputs": list(self.inputs), "stage": self.stage}
        if self.kind is CellKind.INDICATOR:
            doc["var"] = self.var
            doc["state"] = self.state
        elif self.kind is CellKind.PARAM:
            doc["raw"] = self.raw
        return doc


@dataclass(frozen=True)
class Netlist:
    fmt: NumberFormat
    cells: tuple[Cell, ...]
    output: int
    latency: int
    source: ArithmeticCircuit  # the binarized circuit the cells mirror

    def count(self, kind: CellKind | str) -> int:
        kind = CellKind(kind)
        return sum(1 for c in self.cells if c.kind is kind)

    def to_json_dict(self) -> dict:
        if isinstance(self.fmt, FixedPoint):
            fmt_doc = {"kind": "fixed", "int_bits": self.fmt.int_bits, "frac_bits": self.fmt.frac_bits}
        else:
            fmt_doc = {"kind": "float", "exp_bits": self.fmt.exp_bits, "mant_bits": self.fmt.mant_bits}
        return {
            "format": fmt_doc,
            "latency": self.latency,
            "output": self.output,
            "cells": [dict(cell.to_json_dict(), id=i) for i, cell in enumerate(self.cells)],
        }


def _quantize_param_raw(value, fmt: NumberFormat) -> int:
    if isinstance(fmt, FixedPoint):
        return fx_quantize(value, fmt).raw
    return fl_quantize(value, fmt).pack()


def schedule_pipeline(ac: ArithmeticCircuit, fmt: NumberFormat) -> Netlist:
    """Stage a binarized circuit into a register-balanced pipeline."""
    n = len(ac.nodes)
    stages = [0] * n
    for i, node in enumerate(ac.nodes):
        if node.is_leaf:
            continue
        if len(node.children) != 2:
            raise CircuitError("schedule_pipeline requires a binarized circuit")
        stages[i] = 1 + max(stages[c] for c in node.children)

    # Delay needed on each producer: consumer at stage s reads operands that
    # are valid at s-1, and a producer's value is valid at its own stage.
    need = [0] * n
    for i, node in enumerate(ac.nodes):
        for c in node.children:
            d = stages[i] - 1 - stages[c]
            if d > need[c]:
                need[c] = d

    # Shared delay chains. Ops always get the mandatory output register
    # (chain slot 0); leaves are tapped combinationally at delay 0.
    chain_ids: list[list[int]] = [[] for _ in range(n)]
    reg_inputs: list[int] = []
    reg_stages: list[int] = []
    next_id = n
    for p, node in enumerate(ac.nodes):
        count = need[p] if node.is_leaf else need[p] + 1
        base_stage = stages[p] if not node.is_leaf else 1
        prev = p
        for k in range(count):
            chain_ids[p].append(next_id)
            reg_inputs.append(prev)
            reg_stages.append(base_stage + k)
            prev = next_id
            next_id += 1

    def tap(producer: int, delay: int) -> int:
        if ac.nodes[producer].is_leaf:
            return producer if delay == 0 else chain_ids[producer][delay - 1]
        return chain_ids[producer][delay]

    cells: list[Cell] = []
    for i, node in enumerate(ac.nodes):
        if node.kind is NodeKind.PARAMETER:
            cells.append(Cell(CellKind.PARAM, raw=_quantize_param_raw(node.value, fmt)))
        elif node.kind is NodeKind.INDICATOR:
            cells.append(Cell(CellKind.INDICATOR, var=node.var, state=node.state))
        else:
            kind = CellKind.ADD if node.kind is NodeKind.SUM else CellKind.MUL
            a, b = node.children
            inputs = (tap(a, stages[i] - 1 - stages[a]), tap(b, stages[i] - 1 - stages[b]))
            cells.append(Cell(kind, inputs=inputs, stage=stages[i]))
    for rid in range(len(reg_inputs)):
        cells.append(Cell(CellKind.REG, inputs=(reg_inputs[rid],), stage=reg_stages[rid]))

    root = ac.root
    if ac.nodes[root].is_leaf:
        output, latency = root, 0
    else:
        output, latency = chain_ids[root][0], stages[root]
    return Netlist(fmt, tuple(cells), output, latency, ac)


def build_netlist(ac: ArithmeticCircuit, fmt: NumberFormat) -> Netlist:
    """binarize + schedule_pipeline in one step."""
    return schedule_pipeline(binarize(ac), fmt)


# ---------------------------------------------------------------------------
# Cycle-accurate simulation


class NetlistSimulator:
    """Simulates the pipeline one clock cycle at a time.

    All nets carry the packed raw encoding (an int), exactly as the RTL
    would; arithmetic runs through the same integer cores as the emulator.
    Registers power up holding raw zero, a valid value in both formats.
    """

    def __init__(self, netlist: Netlist):
        self.netlist = netlist
        fmt = netlist.fmt
        self.is_fixed = isinstance(fmt, FixedPoint)
        if self.is_fixed:
            self._one_raw = 1 << fmt.frac_bits
        else:
            self._one_raw = fmt.bias << fmt.mant_bits
        self._leaves: list[tuple[int, Cell]] = []
        self._ops: list[tuple[int, Cell]] = []
        self._regs: list[tuple[int, int]] = []
        for i, cell in enumerate(netlist.cells):
            if cell.kind in (CellKind.PARAM, CellKind.INDICATOR):
                self._leaves.append((i, cell))
            elif cell.kind is CellKind.REG:
                self._regs.append((i, cell.inputs[0]))
            else:
                self._ops.append((i, cell))
        self._state: dict[int, int] = {i: 0 for i, _ in self._regs}

    def reset(self) -> None:
        for i in self._state:
            self._state[i] = 0

    def _op_raw(self, cell: Cell, a: int, b: int) -> int:
        fmt = self.netlist.fmt
        if self.is_fixed:
            if cell.kind is CellKind.ADD:
                return _fx_add_raw(a, b, fmt.max_raw)
            return _fx_mul_raw(a, b, fmt.frac_bits, fmt.max_raw)
        if cell.kind is CellKind.ADD:
            if a == 0:
                return b
            if b == 0:
                return a
        elif a == 0 or b == 0:
            return 0
        m_bits, bias = fmt.mant_bits, fmt.bias
        hidden, mask = 1 << m_bits, (1 << m_bits) - 1
        ea, ma = (a >> m_bits) - bias, hidden | (a & mask)
        eb, mb = (b >> m_bits) - bias, hidden | (b & mask)
        if cell.kind is CellKind.ADD:
            e, m = _fl_add_core(ea, ma, eb, mb, m_bits, fmt.max_exp)
        else:
            e, m = _fl_mul_core(ea, ma, eb, mb, m_bits, fmt.min_exp, fmt.max_exp)
        return ((e + bias) << m_bits) | (m & mask)

    def step(self, evidence: Evidence) -> int:
        """Apply one indicator vector, return the output net's value during
        this cycle (pre-edge), then advance the clock."""
        state = self._state
        comb: dict[int, int] = {}
        get = evidence.get
        for i, cell in self._leaves:
            if cell.kind is CellKind.PARAM:
                comb[i] = cell.raw
            else:
                assigned = get(cell.var)
                comb[i] = self._one_raw if (assigned is None or assigned == cell.state) else 0
        for i, cell in self._ops:
            a, b = cell.inputs
            comb[i] = self._op_raw(cell, comb.get(a, state.get(a, 0)), comb.get(b, state.get(b, 0)))
        out = self.netlist.output
        sampled = state[out] if out in state else comb[out]
        new_state = {i: comb.get(src, state.get(src, 0)) for i, src in self._regs}
        self._state = new_state
        return sampled

    def run(self, vectors: Sequence[Evidence]) -> list[int]:
        """Pipelined run: vector k enters at cycle k; returns the raw output
        for each vector, observed `latency` cycles later."""
        if not vectors:
            return []
        for ev in vectors:
            self.netlist.source.check_evidence(ev)
        latency = self.netlist.latency
        outs: list[int] = []
        total = len(vectors) + latency
        for t in range(total):
            ev = vectors[t] if t < len(vectors) else vectors[-1]
            sampled = self.step(ev)
            if t >= latency:
                outs.append(sampled)
        return outs


def simulate_netlist(netlist: Netlist, vectors: Sequence[Evidence]) -> list[int]:
    """Fresh-simulator pipelined run; result k is the output for vector k."""
    return NetlistSimulator(netlist).run(vectors)


# ---------------------------------------------------------------------------
# Verilog emission


def _lit(width: int, value: int) -> str:
    return f"{width}'d{value}"


def _fx_mul_function(width: int, frac_bits: int) -> list[str]:
    lines = [
        f"  function [{width - 1}:0] fx_mul;",
        f"    input [{width - 1}:0] x;",
        f"    input [{width - 1}:0] y;",
        f"    reg [{2 * width - 1}:0] p;",
        f"    reg [{width}:0] q;",
        "    begin",
        "      p = x * y;",
    ]
    if frac_bits == 0:
        lines += [f"      fx_mul = p[{width - 1}:0];"]
    else:
        if frac_bits == 1:
            cond = "p[0] && q[0]"
        else:
            cond = f"p[{frac_bits - 1}] && (p[{frac_bits - 2}:0] != 0 || q[0])"
        lines += [
            f"      q = p >> {frac_bits};",
            f"      if ({cond})",
            "        q = q + 1;",
            f"      fx_mul = q[{width - 1}:0];",
        ]
    lines += ["    end", "  endfunction"]
    return lines


def _fl_add_function(fmt: FloatPoint) -> list[str]:
    e, m = fmt.exp_bits, fmt.mant_bits
    w = e + m
    return [
        f"  function [{w - 1}:0] fl_add;",
        f"    input [{w - 1}:0] x;",
        f"    input [{w - 1}:0] y;",
        f"    reg [{w - 1}:0] a;",
        f"    reg [{w - 1}:0] b;",
        f"    reg [{w - 1}:0] t;",
        f"    reg [{e - 1}:0] ea;",
        f"    reg [{e - 1}:0] d;",
        f"    reg [{m + 4}:0] big;",
        f"    reg [{m + 4}:0] small;",
        f"    reg [{m + 4}:0] s;",
        f"    reg [{m + 1}:0] q;",
        "    begin",
        f"      if (x == {_lit(w, 0)})",
        "        fl_add = y;",
        f"      else if (y == {_lit(w, 0)})",
        "        fl_add = x;",
        "      else begin",
        "        a = x;",
        "        b = y;",
        f"        if (b[{w - 1}:{m}] > a[{w - 1}:{m}]) begin",
        "          t = a; a = b; b = t;",
        "        end",
        f"        ea = a[{w - 1}:{m}];",
        f"        d = ea - b[{w - 1}:{m}];",
        f"        big = {{1'b1, a[{m - 1}:0]}} << 3;",
        f"        if (d <= {m + 3}) begin",
        f"          small = ({{1'b1, b[{m - 1}:0]}} << 3) >> d;",
        f"          if ((small << d) != ({{1'b1, b[{m - 1}:0]}} << 3))",
        f"            small = small | {_lit(m + 5, 1)};",
        "        end else",
        f"          small = {_lit(m + 5, 1)};",
        "        s = big + small;",
        f"        if (s[{m + 4}]) begin",
        f"          q = s[{m + 4}:4];",
        "          if (s[3] && (s[2:0] != 0 || q[0]))",
        "            q = q + 1;",
        f"          ea = ea + {_lit(e, 1)};",
        "        end else begin",
        f"          q = s[{m + 3}:3];",
        "          if (s[2] && (s[1:0] != 0 || q[0]))",
        "            q = q + 1;",
        "        end",
        f"        if (q[{m + 1}]) begin",
        "          q = q >> 1;",
        f"          ea = ea + {_lit(e, 1)};",
        "        end",
        f"        fl_add = {{ea, q[{m - 1}:0]}};",
        "      end",
        "    end",
        "  endfunction",
    ]


def _fl_mul_function(fmt: FloatPoint) -> list[str]:
    e, m = fmt.exp_bits, fmt.mant_bits
    w = e + m
    if m >= 2:
        low_cond = f"p[{m - 1}] && (p[{m - 2}:0] != 0 || q[0])"
    else:
        low_cond = f"p[{m - 1}] && q[0]"
    return [
        f"  function [{w - 1}:0] fl_mul;",
        f"    input [{w - 1}:0] x;",
        f"    input [{w - 1}:0] y;",
        f"    reg [{e + 1}:0] eo;",
        f"    reg [{2 * m + 1}:0] p;",
        f"    reg [{m + 1}:0] q;",
        "    begin",
        f"      if (x == {_lit(w, 0)} || y == {_lit(w, 0)})",
        f"        fl_mul = {_lit(w, 0)};",
        "      else begin",
        f"        p = {{1'b1, x[{m - 1}:0]}} * {{1'b1, y[{m - 1}:0]}};",
        f"        eo = x[{w - 1}:{m}] + y[{w - 1}:{m}];",
        f"        if (p[{2 * m + 1}]) begin",
        f"          q = p[{2 * m + 1}:{m + 1}];",
        f"          if (p[{m}] && (p[{m - 1}:0] != 0 || q[0]))",
        "            q = q + 1;",
        "          eo = eo + 1;",
        "        end else begin",
        f"          q = p[{2 * m}:{m}];",
        f"          if ({low_cond})",
        "            q = q + 1;",
        "        end",
        f"        if (q[{m + 1}]) begin",
        "          q = q >> 1;",
        "          eo = eo + 1;",
        "        end",
        f"        eo = eo - {fmt.bias};",
        f"        fl_mul = {{eo[{e - 1}:0], q[{m - 1}:0]}};",
        "      end",
        "    end",
        "  endfunction",
    ]


def emit_verilog(netlist: Netlist, module_name: str = "ac_top") -> str:
    """Deterministic Verilog-2001 for a scheduled netlist."""
    fmt = netlist.fmt
    if isinstance(fmt, FixedPoint):
        width = fmt.width
        one_raw = 1 << fmt.frac_bits
        fmt_desc = fmt.describe()
    else:
        width = fmt.exp_bits + fmt.mant_bits
        one_raw = fmt.bias << fmt.mant_bits
        fmt_desc = fmt.describe()
    cells = netlist.cells
    n_values = len(netlist.source.nodes)

    def net(i: int) -> str:
        return f"n{i}" if i < n_values else f"r{i - n_values}"

    ports: dict[tuple[int, int], str] = {}
    for cell in cells:
        if cell.kind is CellKind.INDICATOR:
            ports.setdefault((cell.var, cell.state), f"lam_{cell.var}_{cell.state}")
    port_names = [ports[key] for key in sorted(ports)]

    variables = netlist.source.variables

    def var_label(vi: int) -> str:
        return variables[vi].name if vi < len(variables) else f"var{vi}"

    lines = [
        "// Pipelined arithmetic-circuit evaluator.",
        f"// format: {fmt_desc}  latency: {netlist.latency} cycles",
        "// Formats are assumed range-sized: arithmetic wraps instead of trapping.",
        f"module {module_name} (",
        "  input wire clk,",
    ]
    for key in sorted(ports):
        vi, st = key
        lines.append(f"  input wire {ports[key]},  // indicator {var_label(vi)} = {st}")
    lines.append(f"  output wire [{width - 1}:0] out")
    lines.append(");")

    for i, cell in enumerate(cells):
        if cell.kind is CellKind.PARAM:
            shown = mpmath.nstr(netlist.source.nodes[i].value, 12)
            lines.append(
                f"  localparam [{width - 1}:0] P{i} = {_lit(width, cell.raw)};  // parameter {shown}"
            )

    for i, cell in enumerate(cells):
        if cell.kind is not CellKind.REG:
            lines.append(f"  wire [{width - 1}:0] n{i};")
    for i, cell in enumerate(cells):
        if cell.kind is CellKind.REG:
            lines.append(f"  reg [{width - 1}:0] r{i - n_values};")

    has_add = any(c.kind is CellKind.ADD for c in cells)
    has_mul = any(c.kind is CellKind.MUL for c in cells)
    if isinstance(fmt, FixedPoint):
        if has_mul:
            lines += _fx_mul_function(width, fmt.frac_bits)
    else:
        if has_add:
            lines += _fl_add_function(fmt)
        if has_mul:
            lines += _fl_mul_function(fmt)

    for i, cell in enumerate(cells):
        if cell.kind is CellKind.INDICATOR:
            port = ports[(cell.var, cell.state)]
            lines.append(f"  assign n{i} = {port} ? {_lit(width, one_raw)} : {_lit(width, 0)};")
        elif cell.kind is CellKind.PARAM:
            lines.append(f"  assign n{i} = P{i};")
        elif cell.kind is CellKind.ADD:
            a, b = cell.inputs
            if isinstance(fmt, FixedPoint):
                lines.append(f"  assign n{i} = {net(a)} + {net(b)};")
            else:
                lines.append(f"  assign n{i} = fl_add({net(a)}, {net(b)});")
        elif cell.kind is CellKind.MUL:
            a, b = cell.inputs
            op = "fx_mul" if isinstance(fmt, FixedPoint) else "fl_mul"
            lines.append(f"  assign n{i} = {op}({net(a)}, {net(b)});")

    regs = [(i, cell) for i, cell in enumerate(cells) if cell.kind is CellKind.REG]
    if regs:
        lines.append("  always @(posedge clk) begin")
        for i, cell in regs:
            lines.append(f"    r{i - n_values} <= {net(cell.inputs[0])};")
        lines.append("  end")

    lines.append(f"  assign out = {net(netlist.output)};")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"
