"""Lowering to the {X, SX, RZ, CX} basis under a coupling map.

Pipeline: decompose_2q -> route -> decompose_2q (inserted SWAPs) -> decompose_1q
-> peephole -> strip barriers.  Barriers fence the peephole pass and are removed
only at the very end, so the emitted artifact never contains one.
"""
from __future__ import annotations

import cmath
import math
from collections import deque
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np

from .circuit import BASIS_GATES, Circuit, CircuitError, GateKind, Instruction, depth, gate
from .statevector import matrix_1q

ZERO_TOL = 1e-12
TWO_PI = 2 * math.pi

_ONE_QUBIT = frozenset({GateKind.X, GateKind.SX, GateKind.H, GateKind.RX, GateKind.RY, GateKind.RZ})


class RoutingError(CircuitError):
    pass


@dataclass(frozen=True)
class CouplingMap:
    n_qubits: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        norm = frozenset(tuple(sorted(e)) for e in self.edges)
        for a, b in norm:
            if a == b or not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
                raise ValueError(f"invalid coupling edge ({a}, {b}) for {self.n_qubits} qubits")
        object.__setattr__(self, "edges", norm)

    @classmethod
    def all_to_all(cls, n: int) -> "CouplingMap":
        return cls(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))

    @classmethod
    def linear(cls, n: int) -> "CouplingMap":
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    @classmethod
    def preset(cls, name: str, n: int) -> "CouplingMap":
        try:
            return {"linear": cls.linear, "all_to_all": cls.all_to_all}[name](n)
        except KeyError:
            raise ValueError(f"unknown coupling preset {name!r}") from None

    def connected(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def neighbors(self, q: int) -> list[int]:
        return sorted([b for a, b in self.edges if a == q] + [a for a, b in self.edges if b == q])

    def shortest_path(self, a: int, b: int) -> list[int] | None:
        path = _bfs(self, a, b)
        return None if path is None else list(path)


@lru_cache(maxsize=4096)
def _bfs(cmap: CouplingMap, a: int, b: int) -> tuple[int, ...] | None:
    prev = {a: None}
    todo = deque([a])
    while todo:
        q = todo.popleft()
        if q == b:
            path = [b]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            return tuple(path[::-1])
        for nb in cmap.neighbors(q):
            if nb not in prev:
                prev[nb] = q
                todo.append(nb)
    return None


@dataclass(frozen=True)
class TranspileResult:
    circuit: Circuit
    final_layout: tuple[int, ...]
    stats: dict = field(default_factory=dict)


def _wrap(theta: float) -> float:
    """Representative in (-pi, pi]."""
    t = math.remainder(theta, TWO_PI)
    return math.pi if t == -math.pi else t


def _is_zero_angle(theta: float) -> bool:
    return abs(math.remainder(theta, TWO_PI)) < ZERO_TOL


def euler_zyz(u: np.ndarray) -> tuple[float, float, float]:
    """(theta, phi, lam) with u ~ RZ(phi) RY(theta) RZ(lam) up to global phase."""
    coeff = 1 / cmath.sqrt(np.linalg.det(u))
    su = coeff * u
    theta = 2 * math.atan2(abs(su[1, 0]), abs(su[0, 0]))
    plus = cmath.phase(su[1, 1])
    minus = cmath.phase(su[1, 0])
    return theta, plus + minus, plus - minus


def decompose_1q(inst: Instruction) -> list[Instruction]:
    """Rewrite a 1-qubit gate into RZ-SX-RZ-SX-RZ form, zero RZ terms dropped."""
    if inst.kind not in _ONE_QUBIT:
        raise CircuitError(f"decompose_1q got non-1q gate {inst.kind.value}")
    if inst.kind in BASIS_GATES:
        return [inst]
    (q,) = inst.qubits
    theta, phi, lam = euler_zyz(matrix_1q(inst))
    if abs(theta) < ZERO_TOL:
        angles, sx = [phi + lam], 0
    elif abs(theta - math.pi / 2) < ZERO_TOL:
        angles, sx = [lam - math.pi / 2, phi + math.pi / 2], 1
    else:
        angles, sx = [lam, theta + math.pi, phi + math.pi], 2
    out = []
    for k, a in enumerate(angles):
        if not _is_zero_angle(a):
            out.append(gate(GateKind.RZ, q, angle=_wrap(a)))
        if k < sx:
            out.append(gate(GateKind.SX, q))
    return out


def decompose_2q(inst: Instruction) -> list[Instruction]:
    """CX unchanged, SWAP -> 3 CX, controlled rotations -> 2 CX plus 1q rotations."""
    k = inst.kind
    if k is GateKind.CX:
        return [inst]
    if k is GateKind.SWAP:
        a, b = inst.qubits
        return [gate(GateKind.CX, a, b), gate(GateKind.CX, b, a), gate(GateKind.CX, a, b)]
    if k not in (GateKind.CRX, GateKind.CRY, GateKind.CRZ):
        raise CircuitError(f"decompose_2q does not handle {k.value}")
    c, t = inst.qubits
    half = inst.params[0] / 2
    rot = GateKind.RZ if k is GateKind.CRZ else GateKind.RY
    core = [
        gate(rot, t, angle=half),
        gate(GateKind.CX, c, t),
        gate(rot, t, angle=-half),
        gate(GateKind.CX, c, t),
    ]
    if k is GateKind.CRX:
        # RX(a) = RZ(-pi/2) RY(a) RZ(pi/2)
        return [gate(GateKind.RZ, t, angle=math.pi / 2), *core, gate(GateKind.RZ, t, angle=-math.pi / 2)]
    return core


def route(c: Circuit, cmap: CouplingMap) -> tuple[Circuit, tuple[int, ...]]:
    """Greedy shortest-path SWAP insertion.

    Returns the routed circuit over physical qubits and ``final_layout`` where
    ``final_layout[logical] = physical`` at the end of the circuit.
    """
    if cmap.n_qubits != c.n_qubits:
        raise RoutingError(f"coupling map has {cmap.n_qubits} qubits, circuit has {c.n_qubits}")
    l2p = list(range(c.n_qubits))
    p2l = list(range(c.n_qubits))
    out: list[Instruction] = []
    for inst in c.instructions:
        if inst.kind.arity == 2:
            if inst.kind is not GateKind.CX:
                raise RoutingError(f"route expects CX-only 2q gates, got {inst.kind.value}")
            la, lb = inst.qubits
            pa, pb = l2p[la], l2p[lb]
            if not cmap.connected(pa, pb):
                path = cmap.shortest_path(pa, pb)
                if path is None:
                    raise RoutingError(f"no coupling path between qubits {la} and {lb}")
                # Walk the control along the path until it neighbours the target.
                for u, v in zip(path[:-2], path[1:-1]):
                    out.append(gate(GateKind.SWAP, u, v))
                    lu, lv = p2l[u], p2l[v]
                    p2l[u], p2l[v] = lv, lu
                    l2p[lu], l2p[lv] = v, u
                pa = l2p[la]
            out.append(gate(GateKind.CX, pa, pb))
        else:
            out.append(Instruction(inst.kind, tuple(l2p[q] for q in inst.qubits), inst.params))
    return c.replace(out), tuple(l2p)


def peephole(c: Circuit) -> Circuit:
    """Local cancellations that never cross a barrier.

    Merges adjacent same-qubit RZ (sum mod 2pi), drops RZ(0 mod 2pi), cancels
    adjacent identical CX pairs and adjacent X pairs.  A per-qubit stack of the
    last surviving instruction lets one pass cascade (e.g. CX RZ(a) RZ(-a) CX -> []).
    """
    out: list[Instruction | None] = []
    stacks: list[list[int]] = [[] for _ in range(c.n_qubits)]

    def top(q: int) -> int | None:
        return stacks[q][-1] if stacks[q] else None

    def drop(i: int) -> None:
        for q in out[i].qubits:
            stacks[q].pop()
        out[i] = None

    def push(inst: Instruction) -> None:
        out.append(inst)
        for q in inst.qubits:
            stacks[q].append(len(out) - 1)

    for inst in c.instructions:
        k = inst.kind
        if k is GateKind.RZ:
            (q,) = inst.qubits
            p = top(q)
            if p is not None and out[p].kind is GateKind.RZ:
                merged = math.fmod(out[p].params[0] + inst.params[0], TWO_PI)
                if merged < 0:
                    merged += TWO_PI
                if _is_zero_angle(merged):
                    drop(p)
                else:
                    out[p] = gate(GateKind.RZ, q, angle=merged)
            elif not _is_zero_angle(inst.params[0]):
                push(inst)
        elif k is GateKind.X:
            p = top(inst.qubits[0])
            if p is not None and out[p].kind is GateKind.X:
                drop(p)
            else:
                push(inst)
        elif k is GateKind.CX:
            a, b = inst.qubits
            p = top(a)
            if p is not None and p == top(b) and out[p].kind is GateKind.CX and out[p].qubits == inst.qubits:
                drop(p)
            else:
                push(inst)
        else:
            push(inst)
    return c.replace(i for i in out if i is not None)


def transpile(c: Circuit, cmap: CouplingMap) -> TranspileResult:
    lowered = []
    for inst in c.instructions:
        lowered += decompose_2q(inst) if inst.kind.arity == 2 else [inst]
    routed, layout = route(c.replace(lowered), cmap)
    swaps = sum(1 for i in routed.instructions if i.kind is GateKind.SWAP)
    basis = []
    for inst in routed.instructions:
        if inst.kind is GateKind.SWAP:
            basis += decompose_2q(inst)
        elif inst.kind.arity == 1:
            basis += decompose_1q(inst)
        else:
            basis.append(inst)
    optimized = peephole(routed.replace(basis))
    meta = {k: v for k, v in c.meta.items() if not k.startswith("defense_")}
    final = optimized.without_barriers().replace(meta=meta)
    stats = {
        "depth_before": depth(c),
        "depth_after": depth(final),
        "swap_count": swaps,
        "gates_after": len(final),
    }
    return TranspileResult(final, layout, stats)
