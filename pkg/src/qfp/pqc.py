"""Randomized PQC blocks appended after the encoding layer."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, CircuitError, GateKind, Instruction, gate

START_GATES = (
    GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.CX, GateKind.X,
    GateKind.SX, GateKind.CRX, GateKind.CRY, GateKind.CRZ,
)
ROTATIONS = (GateKind.RX, GateKind.RY, GateKind.RZ)
ENTANGLEMENTS = ("linear", "circular", "full")


@dataclass(frozen=True)
class PQCConfig:
    layers: int
    start_gate: GateKind
    rotation_pool: tuple[GateKind, ...]
    entanglement: str
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "start_gate", GateKind(self.start_gate))
        pool = tuple(sorted({GateKind(k) for k in self.rotation_pool}, key=ROTATIONS.index))
        object.__setattr__(self, "rotation_pool", pool)
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.start_gate not in START_GATES:
            raise ValueError(f"start gate {self.start_gate.value} not in the start-gate set")
        if not pool or any(k not in ROTATIONS for k in pool):
            raise ValueError("rotation_pool must be a nonempty subset of {RX, RY, RZ}")
        if self.entanglement not in ENTANGLEMENTS:
            raise ValueError(f"unknown entanglement pattern {self.entanglement!r}")


def entangling_pairs(pattern: str, n: int) -> list[tuple[int, int]]:
    linear = [(i, i + 1) for i in range(n - 1)]
    if pattern == "linear":
        return linear
    if pattern == "circular":
        return linear + [(n - 1, 0)] if n > 1 else []
    if pattern == "full":
        return list(itertools.combinations(range(n), 2))
    raise ValueError(f"unknown entanglement pattern {pattern!r}")


def build_pqc(cfg: PQCConfig, n: int) -> Circuit:
    if cfg.start_gate.arity == 2 and n < 2:
        raise CircuitError(f"start gate {cfg.start_gate.value} needs at least 2 qubits")
    rng = np.random.default_rng(cfg.seed)
    start_qubits = (0, 1) if cfg.start_gate.arity == 2 else (0,)
    angle = float(rng.uniform(0, 2 * math.pi)) if cfg.start_gate.n_params else None
    insts: list[Instruction] = [gate(cfg.start_gate, *start_qubits, angle=angle)]
    pairs = entangling_pairs(cfg.entanglement, n)
    for _ in range(cfg.layers):
        kinds = rng.integers(0, len(cfg.rotation_pool), size=n)
        angles = rng.uniform(0, 2 * math.pi, size=n)
        for q in range(n):
            insts.append(gate(cfg.rotation_pool[kinds[q]], q, angle=float(angles[q])))
        insts += [gate(GateKind.CX, a, b) for a, b in pairs]
    meta = {"pqc_layers": cfg.layers, "pqc_start": cfg.start_gate.value,
            "pqc_entanglement": cfg.entanglement, "pqc_seed": cfg.seed}
    return Circuit(n, insts, meta=meta)


def sample_pqc_config(seed, layers: tuple[int, int] = (1, 5)) -> PQCConfig:
    """Uniform draw over start gate, entanglement, nonempty rotation pool and layer count."""
    rng = np.random.default_rng(seed)
    start = START_GATES[rng.integers(len(START_GATES))]
    entanglement = ENTANGLEMENTS[rng.integers(len(ENTANGLEMENTS))]
    mask = int(rng.integers(1, 8))
    pool = tuple(k for i, k in enumerate(ROTATIONS) if mask >> i & 1)
    n_layers = int(rng.integers(layers[0], layers[1] + 1))
    return PQCConfig(n_layers, start, pool, entanglement, int(rng.integers(2**63)))


def augment(encoding: Circuit, pqc: Circuit, barrier: bool = False) -> Circuit:
    """encoding followed by pqc; ``barrier`` inserts a fence between them."""
    if encoding.n_qubits != pqc.n_qubits:
        raise CircuitError(f"qubit-count mismatch: {encoding.n_qubits} vs {pqc.n_qubits}")
    mid = [gate(GateKind.BARRIER, *range(encoding.n_qubits))] if barrier else []
    meta = dict(encoding.meta)
    meta.update(pqc.meta)
    return Circuit(
        encoding.n_qubits,
        encoding.instructions + tuple(mid) + pqc.instructions,
        encoding.label,
        meta,
    )
