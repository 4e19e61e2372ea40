"""Structural fingerprint of a transpiled circuit: 27 globals + 2 per qubit.

Registry v1 is frozen; changing any definition below requires bumping
``REGISTRY_VERSION`` so stored models are rejected instead of silently misread.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .circuit import BASIS_GATES, Circuit, CircuitError, GateKind

REGISTRY_VERSION = 1
N_GLOBAL = 27
TWO_PI = 2 * math.pi
N_BINS = 16
CLIFFORD_TOL = 1e-6
DISTINCT_DECIMALS = 6

GLOBAL_NAMES = (
    "depth",
    "total_gates",
    "ratio_x",
    "ratio_sx",
    "ratio_rz",
    "ratio_cx",
    "frac_qubits_first_gate_x",
    "frac_qubits_binary_prefix",
    "rz_sx_bigram_rate",
    "sx_rz_sx_trigram_rate",
    "rz_angle_mean",
    "rz_angle_std",
    "rz_angle_entropy",
    "frac_rz_clifford",
    "rz_distinct_ratio",
    "rot_lag1_autocorr",
    "rot_mod_mean",
    "rot_mod_std",
    "rot_mod_entropy",
    "cx_per_qubit",
    "cx_pair_entropy",
    "distinct_cx_pair_frac",
    "max_qubit_cx_share",
    "first_cx_layer_frac",
    "frac_gates_before_first_cx",
    "mean_gates_per_qubit_norm",
    "var_gates_per_qubit_norm",
)
assert len(GLOBAL_NAMES) == N_GLOBAL


class FeatureError(CircuitError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]
    names: tuple[str, ...]
    registry_version: int = REGISTRY_VERSION

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __getitem__(self, name: str) -> float:
        return self.values[self.names.index(name)]


def n_features(n: int) -> int:
    return N_GLOBAL + 2 * n


def feature_names(n: int) -> list[str]:
    if n < 1:
        raise ValueError("n must be >= 1")
    per_qubit = []
    for i in range(n):
        per_qubit += [f"q{i}_rot_norm", f"q{i}_xsx_norm"]
    return list(GLOBAL_NAMES) + per_qubit


def _entropy(counts: Iterable[int], n_outcomes: int) -> float:
    """Shannon entropy normalized by ln(n_outcomes); 0 for an empty sample."""
    counts = np.asarray([c for c in counts if c > 0], dtype=float)
    if counts.size == 0 or n_outcomes < 2:
        return 0.0
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum() / math.log(n_outcomes))


def _angle_stats(angles: np.ndarray, lo: float) -> tuple[float, float, float]:
    """Mean, std and 16-bin entropy of angles already reduced into [lo, lo + 2pi)."""
    if angles.size == 0:
        return 0.0, 0.0, 0.0
    bins = np.minimum((((angles - lo) / TWO_PI) * N_BINS).astype(int), N_BINS - 1)
    return float(angles.mean()), float(angles.std()), _entropy(np.bincount(bins, minlength=N_BINS), N_BINS)


def _lag1_autocorr(x: np.ndarray) -> float:
    if x.size < 3:
        return 0.0
    a, b = x[:-1], x[1:]
    sa, sb = a.std(), b.std()
    if sa < 1e-12 or sb < 1e-12:
        return 0.0
    r = float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb))
    return max(-1.0, min(1.0, r))


def extract(c: Circuit) -> FeatureVector:
    """Registry-v1 features of a basis-gate circuit (barriers are ignored)."""
    n = c.n_qubits
    insts = [i for i in c.instructions if i.kind is not GateKind.BARRIER]
    for i in insts:
        if i.kind not in BASIS_GATES:
            raise FeatureError(f"non-basis gate {i.kind.value}; extract expects a transpiled circuit")
    total = len(insts)
    denom = max(1, total)

    count = {k: 0 for k in BASIS_GATES}
    per_qubit: list[list[GateKind]] = [[] for _ in range(n)]
    rot_q = [0] * n
    xsx_q = [0] * n
    angles = []
    cx_pairs: dict[tuple[int, int], int] = {}
    cx_incidence = [0] * n
    level = [0] * n
    first_cx_layer = None
    first_cx_index = None
    for idx, inst in enumerate(insts):
        k = inst.kind
        count[k] += 1
        for q in inst.qubits:
            per_qubit[q].append(k)
        layer = max(level[q] for q in inst.qubits) + 1
        for q in inst.qubits:
            level[q] = layer
        if k is GateKind.RZ:
            rot_q[inst.qubits[0]] += 1
            angles.append(inst.params[0])
        elif k is GateKind.CX:
            pair = tuple(sorted(inst.qubits))
            cx_pairs[pair] = cx_pairs.get(pair, 0) + 1
            for q in inst.qubits:
                cx_incidence[q] += 1
            if first_cx_index is None:
                first_cx_index, first_cx_layer = idx, layer
        else:
            xsx_q[inst.qubits[0]] += 1
    circuit_depth = max(level, default=0)
    n_x, n_sx, n_rz, n_cx = count[GateKind.X], count[GateKind.SX], count[GateKind.RZ], count[GateKind.CX]

    first_x = sum(1 for seq in per_qubit if seq and seq[0] is GateKind.X)
    binary_prefix = 0
    bigrams = 0
    trigrams = 0
    for seq in per_qubit:
        prefix = seq[: seq.index(GateKind.CX)] if GateKind.CX in seq else seq
        if prefix and all(k is GateKind.X for k in prefix):
            binary_prefix += 1
        for a, b in zip(seq, seq[1:]):
            bigrams += a is GateKind.RZ and b is GateKind.SX
        for a, b, d in zip(seq, seq[1:], seq[2:]):
            trigrams += a is GateKind.SX and b is GateKind.RZ and d is GateKind.SX

    theta = np.asarray(angles, dtype=float)
    mod = np.mod(theta, TWO_PI)
    mod[mod >= TWO_PI] = 0.0
    signed = np.where(mod >= math.pi, mod - TWO_PI, mod)
    a_mean, a_std, a_ent = _angle_stats(signed, -math.pi)
    m_mean, m_std, m_ent = _angle_stats(mod, 0.0)
    if n_rz:
        quarter = mod / (math.pi / 2)
        clifford = float(np.mean(np.abs(quarter - np.round(quarter)) * (math.pi / 2) < CLIFFORD_TOL))
        distinct = len(set(np.round(mod, DISTINCT_DECIMALS).tolist())) / n_rz
    else:
        clifford = distinct = 0.0

    n_pairs = n * (n - 1) // 2
    gates_on_qubit = np.asarray([len(seq) for seq in per_qubit], dtype=float)
    values = [
        circuit_depth,
        total,
        n_x / denom,
        n_sx / denom,
        n_rz / denom,
        n_cx / denom,
        first_x / n,
        binary_prefix / n,
        bigrams / max(1, n_rz),
        trigrams / max(1, n_sx),
        a_mean,
        a_std,
        a_ent,
        clifford,
        distinct,
        _lag1_autocorr(mod),
        m_mean,
        m_std,
        m_ent,
        n_cx / n,
        _entropy(cx_pairs.values(), n_pairs),
        len(cx_pairs) / n_pairs if n_pairs else 0.0,
        max(cx_incidence) / (2 * n_cx) if n_cx else 0.0,
        first_cx_layer / circuit_depth if first_cx_layer is not None and circuit_depth else 1.0,
        first_cx_index / total if first_cx_index is not None else 1.0,
        gates_on_qubit.mean() / total if total else 0.0,
        gates_on_qubit.var() / total**2 if total else 0.0,
    ]
    for q in range(n):
        values += [rot_q[q] / denom, xsx_q[q] / denom]
    return FeatureVector(tuple(float(v) for v in values), tuple(feature_names(n)))


def _fmt(v: float) -> str:
    return "%.9g" % v


def csv_header(n: int) -> str:
    return ",".join(["label"] + feature_names(n))


def csv_row(label: str, fv: FeatureVector | Sequence[float]) -> str:
    values = fv.values if isinstance(fv, FeatureVector) else fv
    return ",".join([label] + [_fmt(v) for v in values])


def write_csv(out: TextIO, n: int, rows: Iterable[tuple[str, FeatureVector]]) -> int:
    out.write(csv_header(n) + "\n")
    written = 0
    for label, fv in rows:
        out.write(csv_row(label, fv) + "\n")
        written += 1
    return written


def read_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    """Return (feature names, labels, feature matrix) from a feature CSV."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        if not header or header[0] != "label":
            raise ValueError(f"{path}: first column must be 'label'")
        labels, rows = [], []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(header):
                raise ValueError(f"{path}: row {len(rows) + 2} has {len(parts)} columns, expected {len(header)}")
            labels.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    return header[1:], labels, np.asarray(rows, dtype=float).reshape(len(rows), len(header) - 1)
