"""Encoding-layer constructors for the five labeled classes."""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

import numpy as np

from .circuit import Circuit, CircuitError, EncodingClass, GateKind, Instruction, gate

TWO_PI = 2 * math.pi

_AXIS_KIND = {"X": GateKind.RX, "Y": GateKind.RY, "Z": GateKind.RZ}
_AXIS_CLASS = {"X": EncodingClass.AngleRX, "Y": EncodingClass.AngleRY, "Z": EncodingClass.AngleRZ}


def basis_encode(bits: Sequence[int]) -> Circuit:
    if len(bits) == 0:
        raise CircuitError("basis_encode needs at least one bit")
    insts = [gate(GateKind.X, q) for q, b in enumerate(bits) if int(b) == 1]
    return Circuit(len(bits), insts, EncodingClass.Basis)


def angle_encode(features: Sequence[float], axis: str) -> Circuit:
    """One R_axis(x_i) on qubit i per feature."""
    if len(features) == 0:
        raise CircuitError("angle_encode needs at least one feature")
    axis = axis.upper()
    kind = _AXIS_KIND[axis]
    insts = [gate(kind, q, angle=float(x)) for q, x in enumerate(features)]
    return Circuit(len(features), insts, _AXIS_CLASS[axis])


def haar_random_state(n: int, seed, real: bool = False) -> np.ndarray:
    """Normalized i.i.d. standard (complex) Gaussian amplitudes."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(2**n)
    if not real:
        v = v + 1j * rng.standard_normal(2**n)
    return (v / np.linalg.norm(v)).astype(complex)


def _gray(j: int) -> int:
    return j ^ (j >> 1)


@lru_cache(maxsize=None)
def _gray_signs(m: int) -> np.ndarray:
    # Row j holds (-1)^popcount(k & gray(j)) over select values k.
    k = np.arange(2**m)
    g = k ^ (k >> 1)
    signs = 1.0 - 2.0 * (np.bitwise_count(g[:, None] & k[None, :]) % 2)
    signs.setflags(write=False)
    return signs


def multiplexed_rotation(
    kind: GateKind, angles: Sequence[float], controls: Sequence[int], target: int
) -> list[Instruction]:
    """Uniformly controlled rotation: angle[k] applies when the controls read k.

    Bit j of the select index k is the state of ``controls[j]``.  Expands into
    2**m rotations interleaved with 2**m CX gates (Gray-code ordering); with no
    controls it is a single rotation.
    """
    m = len(controls)
    angles = np.asarray(angles, dtype=float)
    if angles.size != 2**m:
        raise ValueError(f"expected {2**m} angles for {m} controls, got {angles.size}")
    if m == 0:
        return [gate(kind, target, angle=float(angles[0]))]
    size = 2**m
    thetas = _gray_signs(m) @ angles / size
    out = []
    for j in range(size):
        out.append(gate(kind, target, angle=float(thetas[j])))
        flip = _gray(j) ^ _gray((j + 1) % size)
        out.append(gate(GateKind.CX, controls[flip.bit_length() - 1], target))
    return out


def _disentangling_angles(v: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-qubit (RY magnitudes, RZ phases), qubit 0 first, that reduce v to |0...0>."""
    out = []
    while v.size > 1:
        a, b = v[0::2], v[1::2]
        ra, rb = np.abs(a), np.abs(b)
        pa = np.where(ra > 0, np.angle(a), 0.0)
        pb = np.where(rb > 0, np.angle(b), 0.0)
        thetas = 2 * np.arctan2(rb, ra)
        phis = pb - pa
        out.append((thetas, phis))
        v = np.hypot(ra, rb) * np.exp(0.5j * (pa + pb))
    return out


def amplitude_encode(v: Sequence[complex]) -> Circuit:
    """State preparation over {RY, RZ, CX} by inverting recursive disentanglement."""
    v = np.asarray(v, dtype=complex)
    dim = v.size
    if dim < 2 or dim & (dim - 1):
        raise CircuitError(f"amplitude vector length {dim} is not a power of two >= 2")
    norm = float(np.linalg.norm(v))
    if abs(norm - 1) > 1e-9:
        raise CircuitError(f"amplitude vector is not normalized (norm={norm!r})")
    n = dim.bit_length() - 1
    steps = _disentangling_angles(v)
    insts: list[Instruction] = []
    for q in reversed(range(n)):
        thetas, phis = steps[q]
        controls = list(range(q + 1, n))
        insts += multiplexed_rotation(GateKind.RY, thetas, controls, q)
        insts += multiplexed_rotation(GateKind.RZ, phis, controls, q)
    return Circuit(n, insts, EncodingClass.Amplitude)


def sample_encoding(cls: EncodingClass, n: int, seed, real_amplitudes: bool = False) -> Circuit:
    """Encoding circuit for ``cls`` on random inputs; pure function of its arguments."""
    cls = EncodingClass(cls)
    if n < 1:
        raise ValueError("n must be >= 1")
    if cls is EncodingClass.Amplitude:
        c = amplitude_encode(haar_random_state(n, seed, real=real_amplitudes))
    else:
        rng = np.random.default_rng(seed)
        if cls is EncodingClass.Basis:
            c = basis_encode(rng.integers(0, 2, size=n).tolist())
        else:
            axis = cls.value[-1]
            c = angle_encode(rng.uniform(0.0, TWO_PI, size=n).tolist(), axis)
    return c.with_meta(encoding_seed=seed)
