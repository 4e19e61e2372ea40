import math

import numpy as np
import pytest

from conftest import random_circuit
from qfp.circuit import Circuit, GateKind, gate
from qfp.encoding import basis_encode
from qfp.statevector import (
    DimensionError, equivalent_up_to_global_phase, fidelity, permute_qubits, random_state, run,
    zero_state,
)
from qfp.transpiler import decompose_1q

PLUS = np.array([1, 1], dtype=complex) / math.sqrt(2)
ZERO = np.array([1, 0], dtype=complex)
ONE = np.array([0, 1], dtype=complex)


def test_little_endian():
    out = run(Circuit(2, [gate("X", 0)]))
    assert np.flatnonzero(np.abs(out) > 0.5).tolist() == [1]


def test_basis_encode_state():
    out = run(basis_encode([1, 0, 1]))
    assert abs(out[0b101]) == pytest.approx(1.0, abs=1e-12)


def test_empty_circuit_is_identity(rng):
    s = random_state(3, rng)
    assert np.array_equal(run(Circuit(3), s), s)


def test_ry_half_pi():
    out = run(Circuit(1, [gate("RY", 0, angle=math.pi / 2)]))
    assert np.allclose(out, PLUS, atol=1e-12)


def test_cx_control_is_first_operand():
    # |q1 q0> = |01> (q0 set) -> CX(0,1) -> |11>
    out = run(Circuit(2, [gate("X", 0), gate("CX", 0, 1)]))
    assert abs(out[0b11]) == pytest.approx(1.0)
    out = run(Circuit(2, [gate("X", 0), gate("CX", 1, 0)]))
    assert abs(out[0b01]) == pytest.approx(1.0)


def test_fidelity_examples(rng):
    s = random_state(2, rng)
    assert fidelity(s, s) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(ZERO, ONE) == 0.0
    assert fidelity(ZERO, PLUS) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(DimensionError):
        fidelity(ZERO, zero_state(2))


def test_equivalence_examples(rng):
    c = random_circuit(rng, 3, 20)
    assert equivalent_up_to_global_phase(c, c)
    x = Circuit(1, [gate("X", 0)])
    rz_pi = Circuit(1, [gate("RZ", 0, angle=math.pi)])
    assert not equivalent_up_to_global_phase(x, rz_pi)
    # On |+>: X|+> = |+>, RZ(pi)|+> ~ |->
    assert fidelity(run(x, PLUS), run(rz_pi, PLUS)) == pytest.approx(0.0, abs=1e-12)
    h = Circuit(1, [gate("H", 0)])
    assert equivalent_up_to_global_phase(h, Circuit(1, decompose_1q(gate("H", 0))))
    with pytest.raises(DimensionError):
        equivalent_up_to_global_phase(Circuit(1), Circuit(2))


@pytest.mark.parametrize("kind", list(GateKind))
def test_norm_preserved_per_gate(kind, rng):
    n = 3
    width = kind.arity or 3
    s = random_state(n, rng)
    inst = gate(kind, *range(width), angle=1.234 if kind.n_params else None)
    assert abs(np.linalg.norm(run(Circuit(n, [inst]), s)) - 1) < 1e-12


def test_norm_preserved_long_sequence(rng):
    c = random_circuit(rng, 4, 10_000)
    assert abs(np.linalg.norm(run(c, random_state(4, rng))) - 1) < 1e-9


@pytest.mark.parametrize("seq, other", [
    ([gate("X", 0), gate("X", 0)], []),
    ([gate("SX", 0), gate("SX", 0)], [gate("X", 0)]),
    ([gate("CX", 0, 1), gate("CX", 0, 1)], []),
    ([gate("RZ", 0, angle=0.77), gate("RZ", 0, angle=-0.77)], []),
])
def test_involutions(seq, other):
    assert equivalent_up_to_global_phase(Circuit(2, seq), Circuit(2, other))


def test_permutation_comparison():
    # SWAP(0,1) is the identity modulo relabelling qubits 0<->1.
    swap = Circuit(3, [gate("SWAP", 0, 1)])
    assert not equivalent_up_to_global_phase(Circuit(3), swap)
    assert equivalent_up_to_global_phase(Circuit(3), swap, permutation=[1, 0, 2])


def test_permute_qubits_moves_bits():
    psi = zero_state(3)
    psi = run(Circuit(3, [gate("X", 2)]), psi)  # physical qubit 2 set
    # Logical qubit 0 lives at physical position 2.
    out = permute_qubits(psi, [2, 0, 1], 3)
    assert abs(out[0b001]) == pytest.approx(1.0)
