import math

import numpy as np
import pytest
from hypothesis import strategies as st

from qfp.circuit import Circuit, GateKind, Instruction

ALL_KINDS = list(GateKind)


def random_circuit(rng: np.random.Generator, n: int, n_gates: int, kinds=ALL_KINDS,
                   angle_range=(-2 * math.pi, 2 * math.pi)) -> Circuit:
    insts = []
    while len(insts) < n_gates:
        k = kinds[rng.integers(len(kinds))]
        width = k.arity or int(rng.integers(1, n + 1))
        if width > n:
            continue
        qubits = tuple(int(q) for q in rng.permutation(n)[:width])
        params = tuple(float(a) for a in rng.uniform(*angle_range, size=k.n_params))
        insts.append(Instruction(k, qubits, params))
    return Circuit(n, insts)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@st.composite
def circuits(draw, max_qubits=5, max_gates=25, kinds=ALL_KINDS):
    n = draw(st.integers(1, max_qubits))
    usable = [k for k in kinds if (k.arity or 1) <= n]
    insts = []
    for _ in range(draw(st.integers(0, max_gates))):
        k = draw(st.sampled_from(usable))
        width = k.arity or draw(st.integers(1, n))
        qubits = draw(st.permutations(range(n)))[:width]
        params = [draw(st.floats(-1e3, 1e3, allow_nan=False)) for _ in range(k.n_params)]
        insts.append(Instruction(k, tuple(qubits), tuple(params)))
    return Circuit(n, insts)


# Acceptance tests append one verdict line each; they are echoed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
