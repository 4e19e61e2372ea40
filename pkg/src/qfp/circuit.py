"""Circuit IR shared by every stage of the pipeline.

A :class:`Circuit` is an immutable, flat-register list of :class:`Instruction`
values.  Angles are double-precision radians and are never normalized here.
"""
from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence


class GateKind(str, Enum):
    X = "X"
    SX = "SX"
    H = "H"
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    CX = "CX"
    CRX = "CRX"
    CRY = "CRY"
    CRZ = "CRZ"
    SWAP = "SWAP"
    BARRIER = "BARRIER"

    @property
    def arity(self) -> int | None:
        """Fixed qubit count, or None for BARRIER (any width >= 1)."""
        if self is GateKind.BARRIER:
            return None
        return 2 if self in _TWO_QUBIT else 1

    @property
    def n_params(self) -> int:
        return 1 if self in _PARAMETERIZED else 0


_TWO_QUBIT = frozenset({GateKind.CX, GateKind.CRX, GateKind.CRY, GateKind.CRZ, GateKind.SWAP})
_PARAMETERIZED = frozenset(
    {GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.CRX, GateKind.CRY, GateKind.CRZ}
)
BASIS_GATES = frozenset({GateKind.X, GateKind.SX, GateKind.RZ, GateKind.CX})
_ARITY = {k: k.arity for k in GateKind}
_N_PARAMS = {k: k.n_params for k in GateKind}


class EncodingClass(str, Enum):
    """The five encoding labels; definition order fixes label indices 0..4."""

    Amplitude = "Amplitude"
    Basis = "Basis"
    AngleRX = "AngleRX"
    AngleRY = "AngleRY"
    AngleRZ = "AngleRZ"

    @property
    def index(self) -> int:
        return _CLASS_ORDER.index(self)

    @property
    def short_name(self) -> str:
        return {"AngleRX": "Rx", "AngleRY": "Ry", "AngleRZ": "Rz"}.get(self.value, self.value)

    @classmethod
    def from_index(cls, i: int) -> "EncodingClass":
        return _CLASS_ORDER[i]


_CLASS_ORDER = tuple(EncodingClass)
CLASS_NAMES = tuple(c.value for c in _CLASS_ORDER)


class CircuitError(ValueError):
    """Invalid circuit construction."""


class ParseError(CircuitError):
    """Malformed serialized circuit; carries line and field diagnostics when known."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.field = field


@dataclass(frozen=True)
class Instruction:
    kind: GateKind
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        kind = self.kind if type(self.kind) is GateKind else GateKind(self.kind)
        qubits = tuple(map(int, self.qubits))
        params = tuple(map(float, self.params))
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "params", params)
        arity = _ARITY[kind]
        if arity is None:
            if not qubits:
                raise CircuitError("BARRIER needs at least one qubit")
        elif len(qubits) != arity:
            raise CircuitError(f"{kind.value} takes {arity} qubit(s), got {len(qubits)}")
        if len(qubits) > 1 and len(set(qubits)) != len(qubits):
            raise CircuitError(f"{kind.value} has duplicate qubit operands {list(qubits)}")
        if min(qubits) < 0:
            raise CircuitError(f"negative qubit index in {list(qubits)}")
        if len(params) != _N_PARAMS[kind]:
            raise CircuitError(f"{kind.value} takes {_N_PARAMS[kind]} parameter(s), got {len(params)}")
        if params and not math.isfinite(params[0]):
            raise CircuitError(f"non-finite parameter in {kind.value}")

    @property
    def angle(self) -> float:
        return self.params[0]


def gate(kind: GateKind | str, *qubits: int, angle: float | None = None) -> Instruction:
    """Shorthand constructor: ``gate("RZ", 0, angle=0.5)``."""
    return Instruction(kind, qubits, () if angle is None else (angle,))


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    instructions: tuple[Instruction, ...] = ()
    label: EncodingClass | None = None
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.n_qubits) < 1:
            raise CircuitError("n_qubits must be positive")
        object.__setattr__(self, "n_qubits", int(self.n_qubits))
        object.__setattr__(self, "instructions", tuple(self.instructions))
        if self.label is not None:
            object.__setattr__(self, "label", EncodingClass(self.label))
        object.__setattr__(self, "meta", {str(k): str(v) for k, v in dict(self.meta).items()})
        n = self.n_qubits
        for i, inst in enumerate(self.instructions):
            if type(inst) is not Instruction:
                raise CircuitError(f"instruction {i} is not an Instruction")
            if max(inst.qubits) >= n:
                bad = max(inst.qubits)
                raise CircuitError(
                    f"instruction {i} ({inst.kind.value}) uses qubit {bad} outside a {n}-qubit register"
                )

    def __len__(self) -> int:
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def replace(self, instructions: Iterable[Instruction] | None = None, **changes) -> "Circuit":
        kw = dict(
            n_qubits=self.n_qubits,
            instructions=self.instructions if instructions is None else tuple(instructions),
            label=self.label,
            meta=dict(self.meta),
        )
        kw.update(changes)
        return Circuit(**kw)

    def with_meta(self, **items: object) -> "Circuit":
        meta = dict(self.meta)
        meta.update({k: str(v) for k, v in items.items()})
        return self.replace(meta=meta)

    def without_barriers(self) -> "Circuit":
        return self.replace(i for i in self.instructions if i.kind is not GateKind.BARRIER)


def depth(c: Circuit) -> int:
    """ASAP layer count; barriers synchronize their qubits but add no layer."""
    level = [0] * c.n_qubits
    for inst in c.instructions:
        top = max(level[q] for q in inst.qubits)
        if inst.kind is not GateKind.BARRIER:
            top += 1
        for q in inst.qubits:
            level[q] = top
    return max(level, default=0)


def gate_counts(c: Circuit) -> dict[GateKind, int]:
    counts = Counter(inst.kind for inst in c.instructions)
    return {k: counts.get(k, 0) for k in GateKind}


# -- JSON -----------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    s = "%.17g" % x
    # Keep a float marker so -0.0 and integral angles re-parse as floats.
    return s if any(ch in s for ch in ".en") else s + ".0"


def _instruction_json(inst: Instruction) -> str:
    qubits = ", ".join(str(q) for q in inst.qubits)
    params = ", ".join(_fmt_float(p) for p in inst.params)
    return f'{{"kind": "{inst.kind.value}", "qubits": [{qubits}], "params": [{params}]}}'


def emit_json(c: Circuit) -> str:
    """Canonical JSON text: one instruction per line, angles at 17 significant digits."""
    meta = json.dumps(dict(sorted(c.meta.items())))
    label = json.dumps(None if c.label is None else c.label.value)
    lines = [
        "{",
        f'  "n_qubits": {c.n_qubits},',
        f'  "label": {label},',
        f'  "meta": {meta},',
    ]
    if c.instructions:
        lines.append('  "instructions": [')
        body = [f"    {_instruction_json(i)}" for i in c.instructions]
        lines.append(",\n".join(body))
        lines.append("  ]")
    else:
        lines.append('  "instructions": []')
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit_json_line(c: Circuit) -> str:
    """Single-line variant of :func:`emit_json` for JSON-lines archives."""
    return " ".join(part.strip() for part in emit_json(c).splitlines())


def _instruction_lines(text: str) -> list[int]:
    # Line number of every '"kind"' key, in order; canonical text has one per instruction.
    return [text.count("\n", 0, m.start()) + 1 for m in re.finditer(r'"kind"\s*:', text)]


def parse_json(text: str) -> Circuit:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    return circuit_from_dict(doc, _instruction_lines(text))


def circuit_from_dict(doc: object, lines: Sequence[int] = ()) -> Circuit:
    if not isinstance(doc, dict):
        raise ParseError("top-level value must be an object")
    for key in ("n_qubits", "instructions"):
        if key not in doc:
            raise ParseError("missing required key", field=key)
    n = doc["n_qubits"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ParseError("must be a positive integer", field="n_qubits")
    label = doc.get("label")
    if label is not None:
        try:
            label = EncodingClass(label)
        except ValueError:
            raise ParseError(f"unknown encoding class {label!r}", field="label") from None
    meta = doc.get("meta") or {}
    if not isinstance(meta, dict):
        raise ParseError("must be an object", field="meta")
    raw = doc["instructions"]
    if not isinstance(raw, list):
        raise ParseError("must be a list", field="instructions")
    insts = []
    for i, item in enumerate(raw):
        where = f"instructions[{i}]"
        line = lines[i] if i < len(lines) else None
        if not isinstance(item, dict):
            raise ParseError("must be an object", line=line, field=where)
        try:
            kind = GateKind(item.get("kind"))
        except ValueError:
            raise ParseError(f"unknown gate kind {item.get('kind')!r}", line=line, field=f"{where}.kind") from None
        qubits = item.get("qubits", [])
        params = item.get("params", [])
        if not isinstance(qubits, list) or not all(isinstance(q, int) and not isinstance(q, bool) for q in qubits):
            raise ParseError("must be a list of integers", line=line, field=f"{where}.qubits")
        if not isinstance(params, list) or not all(
            isinstance(p, (int, float)) and not isinstance(p, bool) for p in params
        ):
            raise ParseError("must be a list of numbers", line=line, field=f"{where}.params")
        bad = [q for q in qubits if q >= n]
        if bad:
            raise ParseError(f"qubit {bad[0]} out of range for n_qubits={n}", line=line, field=f"{where}.qubits")
        try:
            insts.append(Instruction(kind, tuple(qubits), tuple(params)))
        except CircuitError as exc:
            raise ParseError(str(exc), line=line, field=where) from None
    return Circuit(n, tuple(insts), label, {str(k): str(v) for k, v in meta.items()})


# -- OpenQASM 2.0 subset ---------------------------------------------------------------

_QASM_HEADER = ('OPENQASM 2.0;', 'include "qelib1.inc";')
_QASM_STMT = re.compile(
    r"^(?P<name>[a-z]+)\s*(?:\((?P<param>[^)]*)\))?\s+(?P<args>q\[\d+\](?:\s*,\s*q\[\d+\])*)\s*;$"
)
_QASM_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def emit_qasm(c: Circuit) -> str:
    lines = list(_QASM_HEADER) + [f"qreg q[{c.n_qubits}];"]
    for inst in c.instructions:
        args = ",".join(f"q[{q}]" for q in inst.qubits)
        name = inst.kind.value.lower()
        if inst.params:
            lines.append(f"{name}({_fmt_float(inst.params[0])}) {args};")
        else:
            lines.append(f"{name} {args};")
    return "\n".join(lines) + "\n"


def parse_qasm(text: str) -> Circuit:
    n = None
    insts = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0].strip()
        if not line:
            continue
        if line.startswith("OPENQASM"):
            if line.replace(" ", "") != "OPENQASM2.0;":
                raise ParseError(f"unsupported version {line!r}", line=lineno)
            continue
        if line.startswith("include"):
            if line != _QASM_HEADER[1]:
                raise ParseError(f"unsupported include {line!r}", line=lineno)
            continue
        m = re.fullmatch(r"qreg\s+q\[(\d+)\]\s*;", line)
        if m:
            if n is not None:
                raise ParseError("only one quantum register is supported", line=lineno)
            n = int(m.group(1))
            continue
        m = _QASM_STMT.match(line)
        if not m:
            raise ParseError(f"cannot parse statement {line!r}", line=lineno)
        name = m.group("name")
        try:
            kind = GateKind(name.upper())
        except ValueError:
            raise ParseError(f"unsupported gate {name!r}", line=lineno) from None
        if name != kind.value.lower():
            raise ParseError(f"unsupported gate {name!r}", line=lineno)
        if n is None:
            raise ParseError("gate before qreg declaration", line=lineno)
        params = ()
        if m.group("param") is not None:
            p = m.group("param").strip()
            if not _QASM_NUMBER.match(p):
                raise ParseError(f"unsupported parameter expression {p!r}", line=lineno)
            params = (float(p),)
        qubits = tuple(int(q) for q in re.findall(r"q\[(\d+)\]", m.group("args")))
        if any(q >= n for q in qubits):
            raise ParseError(f"qubit index out of range for qreg q[{n}]", line=lineno)
        try:
            insts.append(Instruction(kind, qubits, params))
        except CircuitError as exc:
            raise ParseError(str(exc), line=lineno) from None
    if n is None:
        raise ParseError("missing qreg declaration")
    return Circuit(n, tuple(insts))
