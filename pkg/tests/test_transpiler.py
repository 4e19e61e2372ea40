import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import circuits, random_circuit
from qfp.circuit import BASIS_GATES, Circuit, CircuitError, GateKind, depth, emit_json, gate
from qfp.encoding import angle_encode, basis_encode
from qfp.statevector import equivalent_up_to_global_phase, min_fidelity
from qfp.transpiler import (
    CouplingMap, RoutingError, decompose_1q, decompose_2q, peephole, route, transpile,
)

ONE_Q = [GateKind.X, GateKind.SX, GateKind.H, GateKind.RX, GateKind.RY, GateKind.RZ]


def single(inst, n=None):
    return Circuit(n or (max(inst.qubits) + 1), [inst])


def test_decompose_1q_passthrough():
    for inst in (gate("RZ", 0, angle=1.3), gate("X", 0), gate("SX", 0)):
        assert decompose_1q(inst) == [inst]


def test_decompose_1q_h_pattern():
    out = decompose_1q(gate("H", 0))
    assert [i.kind for i in out] == [GateKind.RZ, GateKind.SX, GateKind.RZ]
    assert equivalent_up_to_global_phase(single(gate("H", 0)), Circuit(1, out))


def test_decompose_1q_zero_rotation():
    assert decompose_1q(gate("RX", 0, angle=0.0)) == []
    assert decompose_1q(gate("RY", 0, angle=4 * math.pi)) == []


@pytest.mark.parametrize("kind", [GateKind.RX, GateKind.RY])
@pytest.mark.parametrize("angle", [0.3, 1.0, 2.5, -1.7, math.pi, 5.9])
def test_decompose_1q_pattern_and_equivalence(kind, angle):
    inst = gate(kind, 0, angle=angle)
    out = decompose_1q(inst)
    assert len(out) <= 5
    assert {i.kind for i in out} <= {GateKind.RZ, GateKind.SX, GateKind.X}
    pattern = "".join("Z" if i.kind is GateKind.RZ else "S" for i in out)
    assert pattern in "ZSZSZ" or pattern.replace("Z", "") in ("S", "SS")
    assert equivalent_up_to_global_phase(single(inst), Circuit(1, out), trials=8, tol=1e-10)


def test_decompose_1q_rejects_2q():
    with pytest.raises(CircuitError):
        decompose_1q(gate("CX", 0, 1))


def test_decompose_2q_examples():
    assert decompose_2q(gate("CX", 0, 1)) == [gate("CX", 0, 1)]
    swap = decompose_2q(gate("SWAP", 0, 1))
    assert [i.kind for i in swap] == [GateKind.CX] * 3
    assert equivalent_up_to_global_phase(single(gate("SWAP", 0, 1)), Circuit(2, swap))
    zero = decompose_2q(gate("CRZ", 0, 1, angle=0.0))
    assert equivalent_up_to_global_phase(Circuit(2), Circuit(2, zero))
    with pytest.raises(CircuitError):
        decompose_2q(gate("H", 0))


@pytest.mark.parametrize("kind", [GateKind.CRX, GateKind.CRY, GateKind.CRZ])
@pytest.mark.parametrize("angle", [1.1, -0.4, 3.0])
@pytest.mark.parametrize("qubits", [(0, 1), (1, 0)])
def test_controlled_rotation_identity(kind, angle, qubits):
    inst = gate(kind, *qubits, angle=angle)
    out = decompose_2q(inst)
    assert sum(1 for i in out if i.kind is GateKind.CX) == 2
    assert all(i.kind.arity == 1 or i.kind is GateKind.CX for i in out)
    assert equivalent_up_to_global_phase(single(inst, 2), Circuit(2, out))


def test_route_all_to_all_is_identity(rng):
    c = random_circuit(rng, 4, 30, kinds=[GateKind.CX, GateKind.RZ, GateKind.SX])
    routed, layout = route(c, CouplingMap.all_to_all(4))
    assert routed.instructions == c.instructions
    assert layout == (0, 1, 2, 3)


def test_route_linear_inserts_swap():
    c = Circuit(3, [gate("CX", 0, 2)])
    routed, layout = route(c, CouplingMap.linear(3))
    assert sum(1 for i in routed if i.kind is GateKind.SWAP) >= 1
    res = transpile(c, CouplingMap.linear(3))
    assert {tuple(sorted(i.qubits)) for i in res.circuit if i.kind is GateKind.CX} <= {(0, 1), (1, 2)}
    assert equivalent_up_to_global_phase(c, res.circuit, permutation=res.final_layout)
    assert res.stats["swap_count"] >= 1


def test_route_preserves_semantics_random(rng):
    cmap = CouplingMap.linear(4)
    for _ in range(50):
        c = random_circuit(rng, 4, 25, kinds=[GateKind.CX, GateKind.RY, GateKind.RZ, GateKind.H])
        routed, layout = route(c, cmap)
        assert all(cmap.connected(*i.qubits) for i in routed if i.kind is GateKind.CX)
        assert sorted(layout) == [0, 1, 2, 3]
        assert equivalent_up_to_global_phase(c, routed, permutation=layout)


def test_route_disconnected_map_names_pair():
    cmap = CouplingMap(4, frozenset({(0, 1), (2, 3)}))
    with pytest.raises(RoutingError, match="0 and 3"):
        route(Circuit(4, [gate("CX", 0, 3)]), cmap)


def test_peephole_examples():
    out = peephole(Circuit(1, [gate("RZ", 0, angle=1.0), gate("RZ", 0, angle=2.0)]))
    assert len(out) == 1 and out.instructions[0].params[0] == pytest.approx(3.0)
    assert len(peephole(Circuit(2, [gate("CX", 0, 1), gate("CX", 0, 1)]))) == 0
    fenced = Circuit(1, [gate("RZ", 0, angle=1.0), gate("BARRIER", 0), gate("RZ", 0, angle=2.0)])
    assert peephole(fenced) == fenced


def test_peephole_cascade_and_non_adjacent():
    c = Circuit(2, [gate("CX", 0, 1), gate("RZ", 1, angle=0.5), gate("RZ", 1, angle=-0.5), gate("CX", 0, 1)])
    assert len(peephole(c)) == 0
    # CX pair separated by a gate on the control does not cancel.
    c = Circuit(2, [gate("CX", 0, 1), gate("SX", 0), gate("CX", 0, 1)])
    assert len(peephole(c)) == 3
    # Reversed CX is a different gate.
    c = Circuit(2, [gate("CX", 0, 1), gate("CX", 1, 0)])
    assert len(peephole(c)) == 2
    assert len(peephole(Circuit(1, [gate("X", 0)] * 3))) == 1
    assert len(peephole(Circuit(1, [gate("RZ", 0, angle=2 * math.pi)]))) == 0


@pytest.mark.parametrize("redex", [
    [gate("RZ", 0, angle=0.3), gate("RZ", 0, angle=0.4)],
    [gate("X", 0), gate("X", 0)],
    [gate("CX", 0, 1), gate("CX", 0, 1)],
    [gate("RZ", 0, angle=1.0), gate("RZ", 0, angle=-1.0)],
])
def test_barrier_blocks_every_rule(redex):
    assert len(peephole(Circuit(2, redex))) < 2
    fenced = Circuit(2, [redex[0], gate("BARRIER", 0, 1), redex[1]])
    assert peephole(fenced) == fenced


@settings(max_examples=60, deadline=None)
@given(circuits(max_qubits=4, max_gates=20, kinds=[GateKind.X, GateKind.SX, GateKind.RZ, GateKind.CX, GateKind.BARRIER]))
def test_peephole_preserves_semantics(c):
    out = peephole(c)
    assert len(out) <= len(c)
    assert equivalent_up_to_global_phase(c, out, trials=4)
    assert sum(1 for i in out if i.kind is GateKind.BARRIER) == sum(1 for i in c if i.kind is GateKind.BARRIER)


def test_transpile_examples():
    res = transpile(basis_encode([1, 0, 1]), CouplingMap.all_to_all(3))
    assert [(i.kind, i.qubits) for i in res.circuit] == [(GateKind.X, (0,)), (GateKind.X, (2,))]
    assert depth(res.circuit) == 1
    for cmap in (CouplingMap.linear(3), CouplingMap.all_to_all(3)):
        res = transpile(angle_encode([0.9] * 3, "Z"), cmap)
        assert [i.kind for i in res.circuit] == [GateKind.RZ] * 3
    enc = angle_encode([0.9] * 3, "Y")
    res = transpile(enc, CouplingMap.all_to_all(3))
    for q in range(3):
        pattern = "".join(i.kind.value[0] for i in res.circuit if i.qubits == (q,))
        assert pattern.replace("R", "Z") in ("SZSZ", "ZSZSZ")
    assert equivalent_up_to_global_phase(enc, res.circuit, permutation=res.final_layout)


@pytest.mark.parametrize("preset", ["linear", "all_to_all"])
def test_transpile_randomized_semantics(preset):
    rng = np.random.default_rng(7 if preset == "linear" else 8)
    for trial in range(100):
        n = int(rng.integers(1, 7))
        c = random_circuit(rng, n, int(rng.integers(0, 30)))
        cmap = CouplingMap.preset(preset, n)
        res = transpile(c, cmap)
        assert {i.kind for i in res.circuit} <= BASIS_GATES
        assert all(cmap.connected(*i.qubits) for i in res.circuit if i.kind is GateKind.CX)
        assert min_fidelity(c, res.circuit, 8, res.final_layout, seed=trial) >= 1 - 1e-9


def test_transpile_deterministic(rng):
    c = random_circuit(rng, 5, 60)
    a = transpile(c, CouplingMap.linear(5))
    b = transpile(c, CouplingMap.linear(5))
    assert emit_json(a.circuit) == emit_json(b.circuit) and a.final_layout == b.final_layout
    assert a.stats == b.stats
    assert a.stats["depth_after"] == depth(a.circuit) and a.stats["gates_after"] == len(a.circuit)


def test_coupling_presets():
    assert CouplingMap.linear(4).edges == {(0, 1), (1, 2), (2, 3)}
    assert len(CouplingMap.all_to_all(5).edges) == 10
    assert CouplingMap.linear(5).shortest_path(0, 3) == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        CouplingMap.preset("ring", 3)
    with pytest.raises(ValueError):
        CouplingMap(2, frozenset({(0, 2)}))
