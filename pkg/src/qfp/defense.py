"""Transient obfuscation: scramble after encoding, fence, unscramble before the PQC."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, CircuitError, GateKind, Instruction, gate


@dataclass(frozen=True)
class ObfuscationKey:
    n_qubits: int
    thetas: tuple[float, ...]
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        if len(self.thetas) != self.n_qubits:
            raise ValueError(f"key has {len(self.thetas)} angles for {self.n_qubits} qubits")
        if any(abs(t) > math.pi for t in self.thetas):
            raise ValueError("obfuscation angles must lie in [-pi, pi]")


def gen_key(n: int, seed: int) -> ObfuscationKey:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    return ObfuscationKey(n, tuple(rng.uniform(-math.pi, math.pi, size=n).tolist()), seed)


def _pairs(n: int) -> list[tuple[int, int]]:
    return [(2 * j, 2 * j + 1) for j in range(n // 2)]


def obf_layer(key: ObfuscationKey) -> Circuit:
    """H on all qubits, RX(theta_i) on each, then CX on (0,1), (2,3), ..."""
    n = key.n_qubits
    insts: list[Instruction] = [gate(GateKind.H, q) for q in range(n)]
    insts += [gate(GateKind.RX, q, angle=t) for q, t in enumerate(key.thetas)]
    insts += [gate(GateKind.CX, a, b) for a, b in _pairs(n)]
    return Circuit(n, insts)


def inv_layer(key: ObfuscationKey) -> Circuit:
    """Gate-wise inverse of :func:`obf_layer`."""
    n = key.n_qubits
    insts: list[Instruction] = [gate(GateKind.CX, a, b) for a, b in reversed(_pairs(n))]
    insts += [gate(GateKind.RX, q, angle=-t) for q, t in enumerate(key.thetas)]
    insts += [gate(GateKind.H, q) for q in range(n)]
    return Circuit(n, insts)


def defend(encoding: Circuit, pqc: Circuit, key: ObfuscationKey) -> Circuit:
    """encoding | obf | inv | pqc, with a full-width barrier at each seam."""
    n = encoding.n_qubits
    if pqc.n_qubits != n or key.n_qubits != n:
        raise CircuitError(
            f"qubit-count mismatch: encoding {n}, pqc {pqc.n_qubits}, key {key.n_qubits}"
        )
    fence = (gate(GateKind.BARRIER, *range(n)),)
    body = (
        encoding.instructions + fence
        + obf_layer(key).instructions + fence
        + inv_layer(key).instructions + fence
        + pqc.instructions
    )
    meta = dict(encoding.meta)
    meta.update(pqc.meta)
    meta["defended"] = "true"
    meta["defense_key_seed"] = "" if key.seed is None else str(key.seed)
    return Circuit(n, body, encoding.label, meta)
