import math

import numpy as np
import pytest

from qfp.circuit import Circuit, CircuitError, EncodingClass, GateKind, depth, emit_json
from qfp.defense import ObfuscationKey, defend, gen_key, inv_layer, obf_layer
from qfp.encoding import sample_encoding
from qfp.pqc import PQCConfig, augment, build_pqc, sample_pqc_config
from qfp.statevector import equivalent_up_to_global_phase, fidelity, random_state, run
from qfp.transpiler import CouplingMap, transpile


def layout(c):
    return [(i.kind, i.qubits) for i in c]


def test_gen_key():
    k = gen_key(6, 3)
    assert all(-math.pi <= t <= math.pi for t in k.thetas)
    assert k == gen_key(6, 3)
    assert k.thetas != gen_key(6, 4).thetas
    draws = np.concatenate([gen_key(1000, s).thetas for s in range(100)])
    assert abs(draws.mean()) < 0.02
    with pytest.raises(ValueError):
        ObfuscationKey(1, (4.0,))


def test_obf_layer_shapes():
    c = obf_layer(gen_key(1, 0))
    assert [i.kind for i in c] == [GateKind.H, GateKind.RX]
    c = obf_layer(gen_key(4, 0))
    kinds = [i.kind for i in c]
    assert kinds == [GateKind.H] * 4 + [GateKind.RX] * 4 + [GateKind.CX] * 2
    assert [i.qubits for i in c if i.kind is GateKind.CX] == [(0, 1), (2, 3)]
    assert sum(1 for i in obf_layer(gen_key(5, 0)) if i.kind is GateKind.CX) == 2


def test_inv_layer_order():
    key = gen_key(4, 1)
    c = inv_layer(key)
    assert layout(c)[:2] == [(GateKind.CX, (2, 3)), (GateKind.CX, (0, 1))]
    assert [i.params[0] for i in c if i.kind is GateKind.RX] == [-t for t in key.thetas]
    assert [i.kind for i in c][-4:] == [GateKind.H] * 4
    zero = inv_layer(ObfuscationKey(4, (0.0,) * 4))
    assert all(i.params[0] == 0 for i in zero if i.kind is GateKind.RX)


def test_invertibility_random():
    rng = np.random.default_rng(5)
    for trial in range(100):
        n = int(rng.integers(1, 9))
        key = gen_key(n, trial)
        s = random_state(n, rng)
        both = Circuit(n, obf_layer(key).instructions + inv_layer(key).instructions)
        assert fidelity(run(both, s), s) >= 1 - 1e-9


def test_defend_structure():
    enc = sample_encoding(EncodingClass.AngleRX, 3, 1)
    pqc = build_pqc(sample_pqc_config(2), 3)
    d = defend(enc, pqc, gen_key(3, 99))
    assert sum(1 for i in d if i.kind is GateKind.BARRIER) == 3
    assert d.label is EncodingClass.AngleRX
    assert d.meta["defended"] == "true" and d.meta["defense_key_seed"] == "99"
    assert d.instructions[: len(enc)] == enc.instructions
    assert d.instructions[-len(pqc):] == pqc.instructions
    with pytest.raises(CircuitError):
        defend(enc, pqc, gen_key(4, 0))


@pytest.mark.parametrize("cls", list(EncodingClass))
@pytest.mark.parametrize("preset", ["linear", "all_to_all"])
def test_defend_preserves_semantics_through_pipeline(cls, preset):
    n = 4
    cmap = CouplingMap.preset(preset, n)
    for s in range(4):
        enc = sample_encoding(cls, n, 10 + s)
        pqc = build_pqc(sample_pqc_config(20 + s, (5, 5)), n)
        plain = augment(enc, pqc)
        res = transpile(defend(enc, pqc, gen_key(n, 30 + s)), cmap)
        assert GateKind.BARRIER not in {i.kind for i in res.circuit}
        assert "defense_key_seed" not in res.circuit.meta
        assert equivalent_up_to_global_phase(plain, res.circuit, permutation=res.final_layout)
        base = transpile(plain, cmap)
        assert depth(res.circuit) >= depth(base.circuit)


def test_fresh_keys_change_defended_circuit():
    enc = sample_encoding(EncodingClass.Basis, 3, 1)
    pqc = build_pqc(sample_pqc_config(2), 3)
    a = defend(enc, pqc, gen_key(3, 1))
    b = defend(enc, pqc, gen_key(3, 2))
    assert [i.params for i in a] != [i.params for i in b]
    assert emit_json(a) != emit_json(b)
