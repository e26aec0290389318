"""Arithmetic-circuit IR: evaluation, degree analysis, homogenization,
Baur-Strassen gradients, and the line-oriented text format.

Gates live in topological order; ids are list positions.  Add gates take
arbitrary fan-in, Mul gates are binary everywhere the transforms care
(the IR tolerates wider Mul so skew analysis can reject it).  Size is
the arc count: the sum of gate fan-ins.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

from .errors import (
    DegreeBound,
    NotSkew,
    ParseError,
    SingleOutputRequired,
    UnassignedInput,
)
from .fields import Field, parse_field_spec

OP_IN = 0
OP_CONST = 1
OP_ADD = 2
OP_MUL = 3

_OP_NAMES = {OP_IN: "in", OP_CONST: "const", OP_ADD: "add", OP_MUL: "mul"}


def subset_name(prefix: str, elems) -> str:
    """Structured input name, e.g. subset_name('x', [1,5]) == 'x:{1,5}'."""
    if isinstance(elems, int):
        elems = mask_bits(elems)
    body = ",".join(str(e) for e in elems)
    return f"{prefix}:{{{body}}}"


def name_elements(name: str) -> list[int]:
    """Inverse of subset_name for names of the form 'p:{i,j,...}'."""
    _, _, body = name.partition(":")
    body = body.strip("{}")
    return [int(t) for t in body.split(",")] if body else []


def mask_bits(mask: int) -> list[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def mask_of(elems) -> int:
    m = 0
    for e in elems:
        m |= 1 << e
    return m


@dataclass(frozen=True)
class Circuit:
    field: Field
    gates: tuple
    outputs: tuple
    meta: dict = dataclass_field(default_factory=dict, compare=False)

    @property
    def size(self) -> int:
        """Arc count."""
        total = 0
        for op, payload in self.gates:
            if op in (OP_ADD, OP_MUL):
                total += len(payload)
        return total

    def input_ids(self) -> dict[str, int]:
        return {payload: i for i, (op, payload) in enumerate(self.gates) if op == OP_IN}

    def input_names(self) -> list[str]:
        return [payload for op, payload in self.gates if op == OP_IN]

    def stats(self) -> dict:
        counts = {"in": 0, "const": 0, "add": 0, "mul": 0}
        for op, _ in self.gates:
            counts[_OP_NAMES[op]] += 1
        counts["gates"] = len(self.gates)
        counts["arcs"] = self.size
        counts["outputs"] = len(self.outputs)
        return counts


class CircuitBuilder:
    """Incremental circuit constructor with constant folding.

    Folding is local and value-level only (0/1 absorption, const*const,
    single-argument sums alias their argument); no algebraic rewriting,
    and no dead-gate removal: that stays an explicit pass.
    """

    def __init__(self, field: Field):
        self.field = field
        self.gates: list = []
        self._inputs: dict[str, int] = {}
        self._consts: dict[int, int] = {}
        self.outputs: list[int] = []

    def _push(self, op, payload) -> int:
        self.gates.append((op, payload))
        return len(self.gates) - 1

    def inp(self, name: str) -> int:
        if not name or any(ch.isspace() for ch in name):
            raise ValueError(f"bad input name {name!r}")
        gid = self._inputs.get(name)
        if gid is None:
            gid = self._push(OP_IN, name)
            self._inputs[name] = gid
        return gid

    def const(self, value: int) -> int:
        gid = self._consts.get(value)
        if gid is None:
            gid = self._push(OP_CONST, value)
            self._consts[value] = gid
        return gid

    @property
    def zero(self) -> int:
        return self.const(self.field.zero)

    @property
    def one(self) -> int:
        return self.const(self.field.one)

    def is_const(self, gid: int):
        op, payload = self.gates[gid]
        return payload if op == OP_CONST else None

    def is_zero(self, gid: int) -> bool:
        return self.gates[gid] == (OP_CONST, self.field.zero)

    def add(self, *args: int) -> int:
        live = [a for a in args if not self.is_zero(a)]
        if not live:
            return self.zero
        if len(live) == 1:
            return live[0]
        consts = [self.gates[a][1] for a in live if self.gates[a][0] == OP_CONST]
        if len(consts) == len(live):
            total = self.field.zero
            for c in consts:
                total = self.field.add(total, c)
            return self.const(total)
        return self._push(OP_ADD, tuple(live))

    def add_many(self, args) -> int:
        return self.add(*args)

    def mul(self, a: int, b: int) -> int:
        if self.is_zero(a) or self.is_zero(b):
            return self.zero
        ca, cb = self.is_const(a), self.is_const(b)
        if ca == self.field.one:
            return b
        if cb == self.field.one:
            return a
        if ca is not None and cb is not None:
            return self.const(self.field.mul(ca, cb))
        return self._push(OP_MUL, (a, b))

    def scale(self, coeff: int, gid: int) -> int:
        """coeff * gate, with const*const chains folded."""
        if coeff == self.field.zero:
            return self.zero
        if coeff == self.field.one:
            return gid
        op, payload = self.gates[gid]
        if op == OP_CONST:
            return self.const(self.field.mul(coeff, payload))
        if op == OP_MUL:
            x, y = payload
            cx = self.is_const(x)
            if cx is not None:
                return self.mul(self.const(self.field.mul(coeff, cx)), y)
        return self.mul(self.const(coeff), gid)

    def raw_mul(self, args) -> int:
        """Unnormalized fan-in-many Mul; only for constructing test subjects."""
        return self._push(OP_MUL, tuple(args))

    def set_outputs(self, outputs) -> None:
        self.outputs = list(outputs)

    @property
    def arcs(self) -> int:
        total = 0
        for op, payload in self.gates:
            if op in (OP_ADD, OP_MUL):
                total += len(payload)
        return total

    def build(self) -> Circuit:
        return Circuit(self.field, tuple(self.gates), tuple(self.outputs))


def evaluate(circ: Circuit, assignment: dict) -> tuple:
    """Evaluate all outputs under the given input assignment."""
    field = circ.field
    fadd = field.add
    fmul = field.mul
    vals = [None] * len(circ.gates)
    for gid, (op, payload) in enumerate(circ.gates):
        if op == OP_ADD:
            args = payload
            acc = vals[args[0]]
            for a in args[1:]:
                acc = fadd(acc, vals[a])
            vals[gid] = acc
        elif op == OP_MUL:
            args = payload
            acc = vals[args[0]]
            for a in args[1:]:
                acc = fmul(acc, vals[a])
            vals[gid] = acc
        elif op == OP_IN:
            try:
                vals[gid] = assignment[payload]
            except KeyError:
                raise UnassignedInput(f"no value for input {payload!r}") from None
        else:
            vals[gid] = payload
    return tuple(vals[o] for o in circ.outputs)


def formal_degrees(circ: Circuit, variables=None) -> list[int]:
    """Formal (syntactic) degree per gate.

    Inputs count as degree 1; when `variables` is given, inputs outside it
    count as degree 0 (they are treated as coefficients).
    """
    degs = [0] * len(circ.gates)
    for gid, (op, payload) in enumerate(circ.gates):
        if op == OP_IN:
            degs[gid] = 1 if variables is None or payload in variables else 0
        elif op == OP_ADD:
            degs[gid] = max(degs[a] for a in payload)
        elif op == OP_MUL:
            degs[gid] = sum(degs[a] for a in payload)
    return degs


def analyze_skew(circ: Circuit, variables=None):
    """Least q such that the circuit is q-skew, or None if no q works.

    Mul gates must be binary; the skew of a Mul is the smaller formal
    degree of its two sides, and the circuit's q is the max over Muls.
    """
    degs = formal_degrees(circ, variables)
    q = 0
    for op, payload in circ.gates:
        if op == OP_MUL:
            if len(payload) != 2:
                return None
            low = min(degs[payload[0]], degs[payload[1]])
            if low > q:
                q = low
    return q


def homogenize_components(circ: Circuit, max_degree: int, variables=None):
    """Split every gate into homogeneous components of degree 0..max_degree.

    Returns (builder, comp) where comp[gid] maps degree k to the new gate
    computing the degree-k component (missing keys are identically zero).
    The builder carries copies of the inputs; callers finish it.  When
    `variables` is given, degrees count only those inputs; other inputs sit
    in the degree-0 component like coefficients.
    """
    d = max_degree
    degs = formal_degrees(circ, variables)
    for out in circ.outputs:
        if degs[out] > d:
            raise DegreeBound(
                f"output gate {out} has formal degree {degs[out]} > {d}")
    bld = CircuitBuilder(circ.field)
    comp: list[dict[int, int]] = []
    for op, payload in circ.gates:
        if op == OP_IN:
            k = 1 if variables is None or payload in variables else 0
            comp.append({k: bld.inp(payload)} if d >= k else {})
        elif op == OP_CONST:
            comp.append({0: bld.const(payload)} if payload != circ.field.zero else {})
        elif op == OP_ADD:
            table: dict[int, list[int]] = {}
            for a in payload:
                for k, gid in comp[a].items():
                    table.setdefault(k, []).append(gid)
            comp.append({k: bld.add(*gids) for k, gids in sorted(table.items())})
        else:
            if len(payload) != 2:
                raise NotSkew("homogenize requires binary Mul gates")
            a, b = payload
            # keep the lower-degree side first so the q-skew property is
            # syntactically visible in every component product
            if degs[a] > degs[b]:
                a, b = b, a
            table = {}
            for i, ga in sorted(comp[a].items()):
                for j, gb in sorted(comp[b].items()):
                    if i + j > d:
                        break
                    table.setdefault(i + j, []).append(bld.mul(ga, gb))
            comp.append({k: bld.add(*gids) for k, gids in sorted(table.items())})
    return bld, comp


def homogenize(circ: Circuit, max_degree: int) -> Circuit:
    """Homogeneous version of the circuit.

    For each original output the new circuit has max_degree+1 outputs, the
    degree-0..max_degree components in order; their sum equals the original
    polynomial.  Size grows by at most 3*(q+1)*(max_degree+1) arcs per
    original arc for a q-skew circuit (K_HOMOGENIZE below documents the
    per-degree constant).
    """
    bld, comp = homogenize_components(circ, max_degree)
    outs = []
    for o in circ.outputs:
        for k in range(max_degree + 1):
            outs.append(comp[o].get(k, bld.zero))
    bld.set_outputs(outs)
    return bld.build()


def homogenize_size_bound(circ: Circuit, max_degree: int) -> int:
    """Documented arc bound for homogenize: K * max_degree * size, K = 3(q+1)."""
    q = analyze_skew(circ)
    if q is None:
        raise NotSkew("size bound documented for q-skew circuits only")
    return 3 * (q + 1) * max(1, max_degree) * max(1, circ.size)


# Baur-Strassen arc growth: forward copy (1x) plus, per original arc, one
# accumulation arc for an add-use or a product gate and an accumulation arc
# (3 arcs) for a mul-use: at most 4x overall.
K_BAUR_STRASSEN = 4


def baur_strassen(circ: Circuit, wrt) -> Circuit:
    """Gradient circuit: one output per name in wrt, computing dP/dx.

    Reverse-mode accumulation over a forward copy of the circuit; requires
    a single output and binary Mul gates.
    """
    if len(circ.outputs) != 1:
        raise SingleOutputRequired(f"expected 1 output, got {len(circ.outputs)}")
    for op, payload in circ.gates:
        if op == OP_MUL and len(payload) != 2:
            raise NotSkew("baur_strassen requires binary Mul gates")
    wrt = list(wrt)
    n = len(circ.gates)
    bld = CircuitBuilder(circ.field)
    # forward copy
    fwd = []
    for op, payload in circ.gates:
        if op == OP_IN:
            fwd.append(bld.inp(payload))
        elif op == OP_CONST:
            fwd.append(bld.const(payload))
        elif op == OP_ADD:
            fwd.append(bld.add(*[fwd[a] for a in payload]))
        else:
            a, b = payload
            fwd.append(bld.mul(fwd[a], fwd[b]))
    contribs: list[list[int]] = [[] for _ in range(n)]
    adjoint = [None] * n
    out = circ.outputs[0]
    adjoint[out] = bld.one
    for gid in range(n - 1, -1, -1):
        bar = adjoint[gid]
        if bar is None:
            terms = [t for t in contribs[gid] if not bld.is_zero(t)]
            if not terms:
                continue
            bar = bld.add(*terms)
            adjoint[gid] = bar
        op, payload = circ.gates[gid]
        if op == OP_ADD:
            for a in payload:
                contribs[a].append(bar)
        elif op == OP_MUL:
            a, b = payload
            contribs[a].append(bld.mul(bar, fwd[b]))
            contribs[b].append(bld.mul(bar, fwd[a]))
    by_name = {}
    for gid, (op, payload) in enumerate(circ.gates):
        if op == OP_IN:
            by_name[payload] = adjoint[gid]
    outs = []
    for name in wrt:
        g = by_name.get(name)
        outs.append(bld.zero if g is None else g)
    bld.set_outputs(outs)
    return bld.build()


def dead_gate_elimination(circ: Circuit) -> Circuit:
    """Explicit pass: drop gates unreachable from the outputs."""
    live = set(circ.outputs)
    for gid in range(len(circ.gates) - 1, -1, -1):
        if gid in live:
            op, payload = circ.gates[gid]
            if op in (OP_ADD, OP_MUL):
                live.update(payload)
    remap = {}
    bld = CircuitBuilder(circ.field)
    for gid in sorted(live):
        op, payload = circ.gates[gid]
        if op == OP_IN:
            remap[gid] = bld.inp(payload)
        elif op == OP_CONST:
            remap[gid] = bld.const(payload)
        elif op == OP_ADD:
            remap[gid] = bld._push(OP_ADD, tuple(remap[a] for a in payload))
        else:
            remap[gid] = bld._push(OP_MUL, tuple(remap[a] for a in payload))
    bld.set_outputs(remap[o] for o in circ.outputs)
    return bld.build()


def serialize(circ: Circuit) -> str:
    """Circuit text format v1 (see parse for the grammar)."""
    field = circ.field
    lines = ["circuit v1", f"field {field.spec_string()}"]
    for gid, (op, payload) in enumerate(circ.gates):
        if op == OP_IN:
            lines.append(f"in {gid} {payload}")
        elif op == OP_CONST:
            lines.append(f"const {gid} {field.format_value(payload)}")
        elif op == OP_ADD:
            lines.append(f"add {gid} " + " ".join(map(str, payload)))
        else:
            lines.append(f"mul {gid} " + " ".join(map(str, payload)))
    lines.append("out" + "".join(f" {o}" for o in circ.outputs))
    return "\n".join(lines) + "\n"


def parse(text: str) -> Circuit:
    """Parse circuit text format v1.

    Grammar (one record per line, '#' starts a comment):
        circuit v1
        field <spec>
        in <id> <name> | const <id> <value> | add <id> <id>+ | mul <id> <id> <id>
        out <id>*
    Ids must be consecutive from 0 in topological order.
    """
    field = None
    gates = []
    outputs = None
    saw_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if not saw_header:
            if toks != ["circuit", "v1"]:
                raise ParseError("expected 'circuit v1' header", lineno)
            saw_header = True
            continue
        kind = toks[0]
        if kind == "field":
            try:
                field = parse_field_spec(" ".join(toks[1:]))
            except ParseError as exc:
                raise ParseError(str(exc), lineno) from None
            continue
        if kind == "out":
            try:
                outputs = tuple(int(t) for t in toks[1:])
            except ValueError:
                raise ParseError("bad output id", lineno) from None
            continue
        if field is None:
            raise ParseError("gate before field declaration", lineno)
        if len(toks) < 3 and kind != "out":
            raise ParseError(f"truncated {kind} record", lineno)
        try:
            gid = int(toks[1])
        except ValueError:
            raise ParseError("bad gate id", lineno) from None
        if gid != len(gates):
            raise ParseError(f"gate id {gid} out of order (expected {len(gates)})", lineno)
        if kind == "in":
            gates.append((OP_IN, toks[2]))
        elif kind == "const":
            try:
                gates.append((OP_CONST, field.parse_value(toks[2])))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
        elif kind in ("add", "mul"):
            try:
                args = tuple(int(t) for t in toks[2:])
            except ValueError:
                raise ParseError("bad argument id", lineno) from None
            if kind == "mul" and len(args) != 2:
                raise ParseError("mul gates must be binary", lineno)
            if not args:
                raise ParseError("add gate needs arguments", lineno)
            for a in args:
                if not 0 <= a < gid:
                    raise ParseError(f"argument {a} does not precede gate {gid}", lineno)
            gates.append((OP_ADD if kind == "add" else OP_MUL, args))
        else:
            raise ParseError(f"unknown record kind {kind!r}", lineno)
    if field is None:
        raise ParseError("missing field declaration")
    if outputs is None:
        raise ParseError("missing out record")
    for o in outputs:
        if not 0 <= o < len(gates):
            raise ParseError(f"output id {o} out of range")
    return Circuit(field, tuple(gates), outputs)
