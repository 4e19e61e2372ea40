"""Dense statevector simulation, used only as a semantics oracle.

Little-endian: qubit 0 is the least significant bit of the basis index.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .circuit import Circuit, GateKind, Instruction

MAX_ORACLE_QUBITS = 14

_FIXED = {
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.SX: 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex),
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
}


def rx(t: float) -> np.ndarray:
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(t: float) -> np.ndarray:
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(t: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * t), 0], [0, np.exp(0.5j * t)]], dtype=complex)


_ROT = {GateKind.RX: rx, GateKind.RY: ry, GateKind.RZ: rz}
_CONTROLLED = {GateKind.CRX: rx, GateKind.CRY: ry, GateKind.CRZ: rz}


class DimensionError(ValueError):
    pass


def matrix_1q(inst: Instruction) -> np.ndarray:
    if inst.kind in _FIXED:
        return _FIXED[inst.kind]
    if inst.kind in _ROT:
        return _ROT[inst.kind](inst.params[0])
    raise ValueError(f"{inst.kind.value} is not a single-qubit gate")


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0
    return psi


def basis_state(bits: Sequence[int]) -> np.ndarray:
    index = sum(int(b) << q for q, b in enumerate(bits))
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[index] = 1.0
    return psi


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return v / np.linalg.norm(v)


def _apply_1q(psi: np.ndarray, m: np.ndarray, q: int, n: int) -> np.ndarray:
    t = psi.reshape(2 ** (n - 1 - q), 2, 2**q)
    return np.einsum("ij,ajb->aib", m, t).reshape(-1)


def _apply_controlled(psi: np.ndarray, m: np.ndarray, c: int, t: int, n: int) -> np.ndarray:
    # Axis for qubit q in the C-ordered [2]*n tensor is n-1-q.
    out = psi.reshape([2] * n).copy()
    sel = [slice(None)] * n
    sel[n - 1 - c] = 1
    sub = out[tuple(sel)]
    axis = (n - 1 - t) - (1 if (n - 1 - t) > (n - 1 - c) else 0)
    sub = np.moveaxis(np.tensordot(m, sub, axes=([1], [axis])), 0, axis)
    out[tuple(sel)] = sub
    return out.reshape(-1)


def _apply_swap(psi: np.ndarray, a: int, b: int, n: int) -> np.ndarray:
    return np.swapaxes(psi.reshape([2] * n), n - 1 - a, n - 1 - b).reshape(-1)


def apply(psi: np.ndarray, inst: Instruction, n: int) -> np.ndarray:
    k = inst.kind
    if k is GateKind.BARRIER:
        return psi
    if k is GateKind.CX:
        return _apply_controlled(psi, _FIXED[GateKind.X], inst.qubits[0], inst.qubits[1], n)
    if k in _CONTROLLED:
        m = _CONTROLLED[k](inst.params[0])
        return _apply_controlled(psi, m, inst.qubits[0], inst.qubits[1], n)
    if k is GateKind.SWAP:
        return _apply_swap(psi, inst.qubits[0], inst.qubits[1], n)
    return _apply_1q(psi, matrix_1q(inst), inst.qubits[0], n)


def run(c: Circuit, initial: np.ndarray | None = None) -> np.ndarray:
    psi = zero_state(c.n_qubits) if initial is None else np.asarray(initial, dtype=complex)
    if psi.shape != (2**c.n_qubits,):
        raise DimensionError(f"state of length {psi.size} does not match {c.n_qubits} qubits")
    for inst in c.instructions:
        psi = apply(psi, inst, c.n_qubits)
    return psi


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch {a.shape} vs {b.shape}")
    return float(min(1.0, abs(np.vdot(a, b)) ** 2))


def permute_qubits(psi: np.ndarray, permutation: Sequence[int], n: int) -> np.ndarray:
    """Relabel qubits so that logical qubit i is read from position permutation[i]."""
    t = psi.reshape([2] * n)
    # Tensor axis n-1-i must receive source axis n-1-permutation[i].
    src = [n - 1 - permutation[n - 1 - ax] for ax in range(n)]
    return np.transpose(t, src).reshape(-1)


def equivalent_up_to_global_phase(
    c1: Circuit,
    c2: Circuit,
    trials: int = 8,
    tol: float = 1e-9,
    permutation: Sequence[int] | None = None,
    seed: int = 0,
) -> bool:
    """Compare two circuits on Haar-random inputs.

    ``permutation[i]`` is the output position in ``c2`` holding logical qubit ``i``
    of ``c1`` (a router's final layout).
    """
    return min_fidelity(c1, c2, trials, permutation, seed) >= 1 - tol


def min_fidelity(
    c1: Circuit,
    c2: Circuit,
    trials: int = 8,
    permutation: Sequence[int] | None = None,
    seed: int = 0,
) -> float:
    if c1.n_qubits != c2.n_qubits:
        raise DimensionError(f"qubit-count mismatch: {c1.n_qubits} vs {c2.n_qubits}")
    n = c1.n_qubits
    if n > MAX_ORACLE_QUBITS:
        raise DimensionError(f"oracle limited to {MAX_ORACLE_QUBITS} qubits")
    rng = np.random.default_rng(seed)
    worst = 1.0
    for _ in range(trials):
        s = random_state(n, rng)
        out2 = run(c2, s)
        if permutation is not None:
            out2 = permute_qubits(out2, permutation, n)
        worst = min(worst, fidelity(run(c1, s), out2))
    return worst

