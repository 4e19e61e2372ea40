import math

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import circuits, random_circuit
from qfp.circuit import (
    CLASS_NAMES, Circuit, CircuitError, EncodingClass, GateKind, Instruction, ParseError,
    depth, emit_json, emit_qasm, gate, gate_counts, parse_json, parse_qasm,
)
from qfp.encoding import basis_encode


def test_gate_kind_arity_and_params():
    for k in (GateKind.X, GateKind.SX, GateKind.H, GateKind.RX, GateKind.RY, GateKind.RZ):
        assert k.arity == 1
    for k in (GateKind.CX, GateKind.CRX, GateKind.CRY, GateKind.CRZ, GateKind.SWAP):
        assert k.arity == 2
    assert GateKind.BARRIER.arity is None
    assert {k for k in GateKind if k.n_params == 1} == {
        GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.CRX, GateKind.CRY, GateKind.CRZ}


def test_encoding_class_order():
    assert CLASS_NAMES == ("Amplitude", "Basis", "AngleRX", "AngleRY", "AngleRZ")
    assert [c.index for c in EncodingClass] == [0, 1, 2, 3, 4]
    assert EncodingClass.from_index(3) is EncodingClass.AngleRY


@pytest.mark.parametrize("kind, qubits, params", [
    ("CX", (0, 0), ()),
    ("RZ", (0,), ()),
    ("X", (0, 1), ()),
    ("H", (0,), (0.1,)),
    ("BARRIER", (), ()),
])
def test_instruction_invariants(kind, qubits, params):
    with pytest.raises(CircuitError):
        Instruction(GateKind(kind), qubits, params)


def test_circuit_rejects_out_of_range_qubit():
    with pytest.raises(CircuitError, match="outside"):
        Circuit(2, [gate("X", 2)])


def test_depth_examples():
    assert depth(Circuit(2)) == 0
    assert depth(Circuit(2, [gate("X", 0), gate("X", 0), gate("CX", 0, 1)])) == 3
    assert depth(Circuit(3, [gate("X", 0), gate("X", 1), gate("X", 2)])) == 1


def test_depth_barrier_orders_but_costs_nothing():
    c = Circuit(2, [gate("X", 0), gate("X", 0), gate("BARRIER", 0, 1), gate("X", 1)])
    assert depth(c) == 3
    assert depth(c.without_barriers()) == 2


def test_gate_counts_examples():
    counts = gate_counts(Circuit(2, [gate("X", 0), gate("SX", 1), gate("CX", 0, 1)]))
    assert (counts[GateKind.X], counts[GateKind.SX], counts[GateKind.CX]) == (1, 1, 1)
    assert sum(gate_counts(Circuit(3)).values()) == 0
    assert gate_counts(Circuit(1, [gate("RZ", 0, angle=0.5), gate("RZ", 0, angle=1.0)]))[GateKind.RZ] == 2


@settings(max_examples=150, deadline=None)
@given(circuits())
def test_depth_bounded_by_gate_count(c):
    non_barrier = sum(1 for i in c if i.kind is not GateKind.BARRIER)
    assert depth(c) <= non_barrier
    appended = c.replace(c.instructions + (gate("BARRIER", *range(c.n_qubits)),))
    assert depth(appended) == depth(c)


@settings(max_examples=150, deadline=None)
@given(circuits())
def test_json_round_trip(c):
    c = c.replace(label=EncodingClass.AngleRY, meta={"seed": "12", "pqc_layers": "3"})
    text = emit_json(c)
    back = parse_json(text)
    assert back == c
    assert emit_json(back) == text
    assert gate_counts(back) == gate_counts(c)


def test_json_angles_full_precision():
    c = Circuit(1, [gate("RZ", 0, angle=math.pi / 3)])
    assert "1.0471975511965976" in emit_json(c)
    assert parse_json(emit_json(c)).instructions[0].params[0] == math.pi / 3


def test_json_errors_carry_diagnostics():
    base = '{"n_qubits": 2, "label": null, "meta": {}, "instructions": [\n  %s\n]}'
    with pytest.raises(ParseError, match="duplicate") as exc:
        parse_json(base % '{"kind":"CX","qubits":[0,0],"params":[]}')
    assert exc.value.line == 2 and exc.value.field == "instructions[0]"
    with pytest.raises(ParseError, match="parameter"):
        parse_json(base % '{"kind":"RZ","qubits":[0],"params":[]}')
    with pytest.raises(ParseError, match="out of range"):
        parse_json(base % '{"kind":"X","qubits":[5],"params":[]}')
    with pytest.raises(ParseError) as exc:
        parse_json('{"n_qubits": 2,\n "instructions": [}')
    assert exc.value.line == 2


def test_qasm_basis_encode():
    text = emit_qasm(basis_encode([1, 0, 1]))
    gate_lines = [ln for ln in text.splitlines()[3:] if ln]
    assert gate_lines == ["x q[0];", "x q[2];"]
    assert text.startswith('OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[3];\n')


def test_qasm_round_trip_random(rng):
    c = random_circuit(rng, 5, 100)
    back = parse_qasm(emit_qasm(c))
    assert back.instructions == c.instructions
    assert np.array_equal([p for i in back for p in i.params], [p for i in c for p in i.params])


@pytest.mark.parametrize("text, match", [
    ('OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[2];\ncz q[0],q[1];\n', "unsupported gate"),
    ('OPENQASM 2.0;\ninclude "other.inc";\nqreg q[2];\n', "unsupported include"),
    ('OPENQASM 2.0;\nqreg q[2];\nrz(pi/2) q[0];\n', "parameter"),
    ('OPENQASM 2.0;\nqreg q[2];\nx q[2];\n', "out of range"),
])
def test_qasm_errors(text, match):
    with pytest.raises(ParseError, match=match):
        parse_qasm(text)
