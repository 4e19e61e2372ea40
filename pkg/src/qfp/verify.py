"""Oracle suites that gate every experiment.

Each suite draws its trials from ``SeedSequence(base_seed, spawn_key=(suite, trial))``
and reports the worst trial together with the seed that reproduces it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import defense
from .circuit import Circuit, GateKind, Instruction
from .config import ExperimentConfig
from .encoding import amplitude_encode, haar_random_state
from .fingerprint import n_features
from .mlp import backward, forward, init_model, loss
from .statevector import fidelity, min_fidelity, random_state, run
from .transpiler import CouplingMap, transpile

FIDELITY_TOL = 1e-9
GRAD_TOL = 1e-5
CHANCE_BAND = (0.14, 0.26)

_MIXED_KINDS = [k for k in GateKind if k is not GateKind.BARRIER]


@dataclass
class SuiteResult:
    name: str
    trials: int
    failures: int
    worst: float
    worst_seed: int | None
    criterion: str
    skipped: str = ""

    @property
    def passed(self) -> bool:
        return not self.skipped and self.failures == 0

    def line(self) -> str:
        if self.skipped:
            return f"{self.name:<14} SKIP  {self.skipped}"
        status = "PASS" if self.passed else "FAIL"
        where = "" if self.passed else f"  counterexample seed {self.worst_seed}"
        return (f"{self.name:<14} {status}  {self.trials:>4d} trials  {self.failures} failed  "
                f"worst {self.worst:.3e} ({self.criterion}){where}")


def _trial_rng(base_seed: int, suite: int, trial: int) -> tuple[np.random.Generator, int]:
    ss = np.random.SeedSequence(base_seed, spawn_key=(suite, trial))
    seed = int(ss.generate_state(1, dtype=np.uint64)[0])
    return np.random.default_rng(seed), seed


def random_mixed_circuit(rng: np.random.Generator, n: int, n_gates: int) -> Circuit:
    insts = []
    kinds = [k for k in _MIXED_KINDS if k.arity == 1 or n >= 2]
    for _ in range(n_gates):
        kind = kinds[int(rng.integers(len(kinds)))]
        qubits = tuple(int(q) for q in rng.choice(n, size=kind.arity, replace=False))
        params = (float(rng.uniform(-2 * math.pi, 2 * math.pi)),) if kind.n_params else ()
        insts.append(Instruction(kind, qubits, params))
    return Circuit(n, insts)


def suite_transpile(base_seed: int, trials: int = 200) -> SuiteResult:
    worst, worst_seed, failures = 0.0, None, 0
    for t in range(trials):
        rng, seed = _trial_rng(base_seed, 0, t)
        n = int(rng.integers(1, 7))
        c = random_mixed_circuit(rng, n, int(rng.integers(1, 40)))
        res = transpile(c, CouplingMap.preset(("linear", "all_to_all")[t % 2], n))
        err = 1.0 - min_fidelity(c, res.circuit, 8, res.final_layout, seed=seed)
        failures += err > FIDELITY_TOL
        if err >= worst:
            worst, worst_seed = err, seed
    return SuiteResult("transpile", trials, failures, worst, worst_seed, "1 - fidelity <= 1e-9")


def suite_stateprep(base_seed: int, trials: int = 100) -> SuiteResult:
    worst, worst_seed, failures = 0.0, None, 0
    for t in range(trials):
        _, seed = _trial_rng(base_seed, 1, t)
        n = 2 + t % 5
        v = haar_random_state(n, seed)
        err = 1.0 - fidelity(run(amplitude_encode(v)), v)
        failures += err > FIDELITY_TOL
        if err >= worst:
            worst, worst_seed = err, seed
    return SuiteResult("stateprep", trials, failures, worst, worst_seed, "1 - fidelity <= 1e-9")


def suite_invertibility(base_seed: int, trials: int = 100) -> SuiteResult:
    worst, worst_seed, failures = 0.0, None, 0
    for t in range(trials):
        rng, seed = _trial_rng(base_seed, 2, t)
        n = int(rng.integers(1, 9))
        key = defense.gen_key(n, seed)
        # Looked up through the module so a patched inverse is what gets tested.
        both = Circuit(n, defense.obf_layer(key).instructions + defense.inv_layer(key).instructions)
        s = random_state(n, rng)
        err = 1.0 - fidelity(run(both, s), s)
        failures += err > FIDELITY_TOL
        if err >= worst:
            worst, worst_seed = err, seed
    return SuiteResult("invertibility", trials, failures, worst, worst_seed, "1 - fidelity <= 1e-9")


def suite_gradcheck(base_seed: int, probes: int = 100, n_qubits: int = 3, h: float = 1e-5) -> SuiteResult:
    rng, seed = _trial_rng(base_seed, 3, 0)
    model = init_model(n_features(n_qubits), rng)
    x = rng.normal(size=(10, n_features(n_qubits)))
    y = rng.integers(0, 5, size=10)
    grads = backward(model, x, y)
    params = model.params()
    worst, failures = 0.0, 0
    for _ in range(probes):
        k = int(rng.integers(len(params)))
        idx = tuple(int(rng.integers(s)) for s in params[k].shape)
        old = params[k][idx]
        params[k][idx] = old + h
        up = loss(forward(model, x), y)
        params[k][idx] = old - h
        down = loss(forward(model, x), y)
        params[k][idx] = old
        num, ana = (up - down) / (2 * h), grads[k][idx]
        scale = max(abs(num), abs(ana))
        err = abs(num - ana) / scale if scale else 0.0
        failures += err >= GRAD_TOL
        worst = max(worst, err)
    return SuiteResult("gradcheck", probes, failures, worst, seed, "relative error < 1e-5")


def suite_chance(cfg: ExperimentConfig) -> SuiteResult:
    from .experiment import chance_floor

    if not (cfg.out / "manifest.json").exists():
        return SuiteResult("chance", 0, 0, 0.0, None, "", skipped=f"no dataset at {cfg.out}")
    acc = chance_floor(cfg)
    lo, hi = CHANCE_BAND
    return SuiteResult("chance", 1, int(not lo <= acc <= hi), acc, cfg.base_seed,
                       f"shuffled-label accuracy in [{lo}, {hi}]")


SUITES: dict[str, Callable[[ExperimentConfig], SuiteResult]] = {
    "transpile": lambda cfg: suite_transpile(cfg.base_seed),
    "stateprep": lambda cfg: suite_stateprep(cfg.base_seed),
    "invertibility": lambda cfg: suite_invertibility(cfg.base_seed),
    "gradcheck": lambda cfg: suite_gradcheck(cfg.base_seed, n_qubits=cfg.n_qubits),
    "chance": suite_chance,
}


def cmd_verify(cfg: ExperimentConfig, suites: list[str] | None = None) -> list[SuiteResult]:
    names = suites or list(SUITES)
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    return [SUITES[name](cfg) for name in names]
