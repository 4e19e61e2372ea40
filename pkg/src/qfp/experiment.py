"""End-to-end experiment commands: gen, train, eval, scaling, defense-eval, defend.

Every command is a pure function of its config and input files.  Per-sample
seeds come from ``SeedSequence(base_seed, spawn_key=(stream, class, index))``,
so the worker count and scheduling order cannot change any output byte.
"""
from __future__ import annotations

import hashlib
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import plotting
from .circuit import (
    CLASS_NAMES, Circuit, EncodingClass, depth, emit_json, emit_json_line, emit_qasm, parse_json,
    parse_qasm,
)
from .config import ExperimentConfig
from .defense import defend, gen_key
from .encoding import sample_encoding
from .fingerprint import csv_header, csv_row, extract, n_features, read_csv
from .mlp import (
    Dataset, EvalReport, SplitIndices, evaluate, load_model, save_model, stratified_split, train,
)
from .pqc import augment, build_pqc, sample_pqc_config
from .transpiler import CouplingMap, transpile

log = logging.getLogger(__name__)

DISPLAY_NAMES = tuple(c.short_name for c in EncodingClass)

# spawn-key streams; never reorder
STREAM_ATTACK, STREAM_DEFENSE, STREAM_SPLIT, STREAM_TRAIN, STREAM_SHUFFLE, STREAM_RETRAIN = range(6)


class ArtifactError(RuntimeError):
    """A required input file is missing or inconsistent with the config."""


def derive_seeds(base_seed: int, *key: int, count: int = 1) -> tuple[int, ...]:
    ss = np.random.SeedSequence(base_seed, spawn_key=tuple(key))
    return tuple(int(x) for x in ss.generate_state(count, dtype=np.uint64))


def _dump_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    """Order-preserving map, in-process for one worker and over a process pool otherwise."""
    if workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


# -- per-sample builders (top level so worker processes can unpickle them) ----------

@dataclass(frozen=True)
class _Job:
    n_qubits: int
    coupling: str
    base_seed: int
    layers: tuple[int, int]
    barrier: bool = False


def _attack_sample(job: _Job, item: tuple[int, int]) -> tuple[str, list[float]]:
    cls_idx, idx = item
    enc_seed, pqc_seed = derive_seeds(job.base_seed, STREAM_ATTACK, cls_idx, idx, count=2)
    cls = EncodingClass.from_index(cls_idx)
    enc = sample_encoding(cls, job.n_qubits, enc_seed)
    pqc = build_pqc(sample_pqc_config(pqc_seed, job.layers), job.n_qubits)
    res = transpile(augment(enc, pqc, barrier=job.barrier), CouplingMap.preset(job.coupling, job.n_qubits))
    circ = res.circuit.with_meta(sample_index=idx)
    return emit_json_line(circ), extract(circ).values


def _defense_sample(job: _Job, item: tuple[int, int]) -> tuple[int, int, list[float], list[float]]:
    cls_idx, idx = item
    enc_seed, pqc_seed, key_seed = derive_seeds(job.base_seed, STREAM_DEFENSE, cls_idx, idx, count=3)
    cls = EncodingClass.from_index(cls_idx)
    cmap = CouplingMap.preset(job.coupling, job.n_qubits)
    enc = sample_encoding(cls, job.n_qubits, enc_seed)
    pqc = build_pqc(sample_pqc_config(pqc_seed, job.layers), job.n_qubits)
    plain = transpile(augment(enc, pqc, barrier=job.barrier), cmap).circuit
    cloaked = transpile(defend(enc, pqc, gen_key(job.n_qubits, key_seed)), cmap).circuit
    return depth(plain), depth(cloaked), extract(plain).values, extract(cloaked).values


def _items(per_class: int) -> list[tuple[int, int]]:
    return [(c, i) for c in range(len(CLASS_NAMES)) for i in range(per_class)]


# -- gen ----------------------------------------------------------------------------

def cmd_gen(cfg: ExperimentConfig) -> dict:
    out = cfg.out
    (out / "circuits").mkdir(parents=True, exist_ok=True)
    job = _Job(cfg.n_qubits, cfg.coupling, cfg.base_seed, cfg.pqc_layers, cfg.baseline_barrier)
    items = _items(cfg.samples_per_class)
    t0 = time.perf_counter()
    results = _map(partial(_attack_sample, job), items, cfg.n_workers)
    log.info("generated %d circuits at n=%d in %.1fs", len(results), cfg.n_qubits, time.perf_counter() - t0)

    buf = io.StringIO()
    buf.write(csv_header(cfg.n_qubits) + "\n")
    files = {}
    for cls_idx, name in enumerate(CLASS_NAMES):
        block = results[cls_idx * cfg.samples_per_class:(cls_idx + 1) * cfg.samples_per_class]
        path = out / "circuits" / f"{name}.jsonl"
        path.write_text("".join(line + "\n" for line, _ in block))
        files[f"circuits/{name}.jsonl"] = _sha256(path)
        for _, values in block:
            buf.write(csv_row(name, values) + "\n")
    features = out / "features.csv"
    features.write_text(buf.getvalue())
    files["features.csv"] = _sha256(features)

    manifest = {
        "config_hash": cfg.dataset_hash(),
        "config": cfg.dataset_fields(),
        "n_features": n_features(cfg.n_qubits),
        "counts": {name: cfg.samples_per_class for name in CLASS_NAMES},
        "rows": len(results),
        "files": files,
    }
    _dump_json(out / "manifest.json", manifest)
    return manifest


def _check_manifest(cfg: ExperimentConfig) -> dict:
    path = cfg.out / "manifest.json"
    if not path.exists():
        raise ArtifactError(f"no dataset at {cfg.out}: run 'qfp gen' first")
    manifest = json.loads(path.read_text())
    if manifest.get("config_hash") != cfg.dataset_hash():
        raise ArtifactError(
            f"{path} was generated with a different config "
            f"(manifest {manifest.get('config_hash', '?')[:12]}, current {cfg.dataset_hash()[:12]}); "
            "regenerate the dataset or restore the matching config"
        )
    features = cfg.out / "features.csv"
    if not features.exists() or _sha256(features) != manifest["files"]["features.csv"]:
        raise ArtifactError(f"{features} is missing or does not match the manifest checksum")
    return manifest


def load_dataset(path: Path, n_qubits: int) -> Dataset:
    try:
        names, labels, x = read_csv(path)
        y = np.array([EncodingClass(lbl).index for lbl in labels], dtype=int)
    except ValueError as exc:
        raise ArtifactError(f"malformed feature file: {exc}") from None
    if len(names) != n_features(n_qubits):
        raise ArtifactError(f"{path}: {len(names)} feature columns, expected {n_features(n_qubits)}")
    return Dataset(x, y, CLASS_NAMES, n_qubits)


def _split_from_doc(doc: dict) -> SplitIndices:
    return SplitIndices(*(np.asarray(doc[k], dtype=int) for k in ("train", "val", "test")))


# -- train / eval -----------------------------------------------------------------------

def cmd_train(cfg: ExperimentConfig) -> dict:
    _check_manifest(cfg)
    ds = load_dataset(cfg.out / "features.csv", cfg.n_qubits)
    (split_seed,) = derive_seeds(cfg.base_seed, STREAM_SPLIT)
    (train_seed,) = derive_seeds(cfg.base_seed, STREAM_TRAIN)
    split = stratified_split(ds.labels, seed=split_seed)
    t0 = time.perf_counter()
    model, scaler, rep = train(ds, split, seed=train_seed, epochs=cfg.epochs, batch_size=cfg.batch_size,
                               lr=cfg.learning_rate, hidden=cfg.hidden)
    log.info("trained %d epochs in %.1fs", cfg.epochs, time.perf_counter() - t0)

    _dump_json(cfg.out / "split.json", {k: getattr(split, k).tolist() for k in ("train", "val", "test")})
    save_model(cfg.out / "model.json", model, scaler, config_hash=cfg.dataset_hash(),
               registry_version=cfg.registry_version, n_qubits=cfg.n_qubits, class_names=list(CLASS_NAMES))
    (cfg.out / "curves.csv").write_text(rep.to_csv())
    summary = {
        "epochs": cfg.epochs,
        "train_size": int(split.train.size),
        "val_size": int(split.val.size),
        "test_size": int(split.test.size),
        "first_train_loss": rep.train_loss[0],
        "final_train_loss": rep.train_loss[-1],
        "final_train_acc": rep.train_acc[-1],
        "final_val_loss": rep.val_loss[-1],
        "final_val_acc": rep.val_acc[-1],
    }
    _dump_json(cfg.out / "train_report.json", summary)
    if cfg.plots:
        plotting.training_curves(rep, cfg.out / "curves.png", title=f"{cfg.n_qubits} qubits")
    return summary


def _load_trained(cfg: ExperimentConfig):
    path = cfg.out / "model.json"
    if not path.exists():
        raise ArtifactError(f"no model at {path}: run 'qfp train' first")
    model, scaler, doc = load_model(path)
    if doc.get("config_hash") != cfg.dataset_hash():
        raise ArtifactError(f"{path} was trained on a dataset from a different config")
    return model, scaler


def cmd_eval(cfg: ExperimentConfig) -> EvalReport:
    model, scaler = _load_trained(cfg)
    _check_manifest(cfg)
    split_path = cfg.out / "split.json"
    if not split_path.exists():
        raise ArtifactError(f"no split at {split_path}: run 'qfp train' first")
    split = _split_from_doc(json.loads(split_path.read_text()))
    ds = load_dataset(cfg.out / "features.csv", cfg.n_qubits)
    report = evaluate(model, scaler, *ds.subset(split.test), CLASS_NAMES)
    _dump_json(cfg.out / "eval_report.json", report.to_dict())
    (cfg.out / "eval_table.txt").write_text(report.table(DISPLAY_NAMES))
    if cfg.plots:
        plotting.confusion_matrix(report.confusion, DISPLAY_NAMES, cfg.out / "confusion.png",
                                  title=f"Test set, {cfg.n_qubits} qubits")
    return report


def chance_floor(cfg: ExperimentConfig) -> float:
    """Test accuracy of the same training recipe after the labels are shuffled."""
    _check_manifest(cfg)
    ds = load_dataset(cfg.out / "features.csv", cfg.n_qubits)
    (shuffle_seed,) = derive_seeds(cfg.base_seed, STREAM_SHUFFLE)
    shuffled = Dataset(ds.features, np.random.default_rng(shuffle_seed).permutation(ds.labels),
                       ds.class_names, ds.n_qubits)
    (split_seed,) = derive_seeds(cfg.base_seed, STREAM_SPLIT)
    (train_seed,) = derive_seeds(cfg.base_seed, STREAM_TRAIN)
    split = stratified_split(shuffled.labels, seed=split_seed)
    model, scaler, _ = train(shuffled, split, seed=train_seed, epochs=cfg.epochs, batch_size=cfg.batch_size,
                             lr=cfg.learning_rate, hidden=cfg.hidden)
    return evaluate(model, scaler, *shuffled.subset(split.test), CLASS_NAMES).accuracy


# -- defense evaluation ---------------------------------------------------------------

@dataclass
class DepthRow:
    name: str
    original: float
    obfuscated: float

    @property
    def delta(self) -> float:
        return self.obfuscated - self.original

    @property
    def delta_pct(self) -> float:
        return 100.0 * self.delta / self.original


def depth_table(rows: Sequence[DepthRow], instances: int) -> str:
    head = f"{'Encoding':<10}  {'Original':>8}  {'Obfuscated':>10}  {'Delta':>6}  {'Delta %':>7}  {'N':>5}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.name:<10}  {r.original:>8.1f}  {r.obfuscated:>10.1f}  {r.delta:>6.1f}  "
                     f"{r.delta_pct:>6.1f}%  {instances:>5d}")
    return "\n".join(lines) + "\n"


def cmd_defense_eval(cfg: ExperimentConfig, retrain_adversary: bool | None = None) -> dict:
    """Evaluate the trained classifier on freshly keyed, defended circuits.

    Every instance is built twice from the same encoding and PQC, once plain and
    once cloaked, so the depth comparison is paired.  The overall overhead is the
    ratio of the mean depths, the same aggregation as the per-class rows.
    """
    if retrain_adversary is None:
        retrain_adversary = cfg.defense == "both"
    model, scaler = _load_trained(cfg)
    per = cfg.defense_samples_per_class
    layers = cfg.defense_pqc_layers
    job = _Job(cfg.n_qubits, cfg.coupling, cfg.base_seed, (layers, layers), cfg.baseline_barrier)
    t0 = time.perf_counter()
    results = _map(partial(_defense_sample, job), _items(per), cfg.n_workers)
    log.info("built %d plain/defended pairs in %.1fs", len(results), time.perf_counter() - t0)

    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    labels = np.repeat(np.arange(len(CLASS_NAMES)), per)
    # Round-trip through the CSV text so the classifier sees exactly what is archived.
    for fname, col in (("defense_plain_features.csv", 2), ("defense_features.csv", 3)):
        text = csv_header(cfg.n_qubits) + "\n" + "".join(
            csv_row(CLASS_NAMES[lbl], r[col]) + "\n" for lbl, r in zip(labels, results))
        (out / fname).write_text(text)
    plain_x = read_csv(out / "defense_plain_features.csv")[2]
    cloak_x = read_csv(out / "defense_features.csv")[2]
    d_plain = np.array([r[0] for r in results], dtype=float)
    d_cloak = np.array([r[1] for r in results], dtype=float)
    (out / "defense_depths.csv").write_text("label,index,original_depth,defended_depth\n" + "".join(
        f"{CLASS_NAMES[lbl]},{i % per},{int(a)},{int(b)}\n"
        for i, (lbl, a, b) in enumerate(zip(labels, d_plain, d_cloak))))

    undefended = evaluate(model, scaler, plain_x, labels, CLASS_NAMES)
    defended = evaluate(model, scaler, cloak_x, labels, CLASS_NAMES)

    rows = [DepthRow(short, float(d_plain[labels == k].mean()), float(d_cloak[labels == k].mean()))
            for k, short in enumerate(DISPLAY_NAMES)]
    overall = DepthRow("Overall", float(d_plain.mean()), float(d_cloak.mean()))
    doc = {
        "n_qubits": cfg.n_qubits,
        "instances_per_class": per,
        "pqc_layers": layers,
        "adversary": "pretrained",
        "undefended_accuracy": undefended.accuracy,
        "defended_accuracy": defended.accuracy,
        "undefended": undefended.to_dict(),
        "defended": defended.to_dict(),
        "depth": {
            "per_class": {r.name: {"original_mean": r.original, "obfuscated_mean": r.obfuscated,
                                   "delta_abs": r.delta, "delta_pct": r.delta_pct} for r in rows},
            "overall": {"original_mean": overall.original, "obfuscated_mean": overall.obfuscated,
                        "delta_abs": overall.delta, "delta_pct": overall.delta_pct},
            "mean_instance_overhead_pct": float(100.0 * np.mean((d_cloak - d_plain) / d_plain)),
            "frac_defended_ge_undefended": float(np.mean(d_cloak >= d_plain)),
        },
    }
    if retrain_adversary:
        ds = Dataset(cloak_x, labels, CLASS_NAMES, cfg.n_qubits)
        (seed,) = derive_seeds(cfg.base_seed, STREAM_RETRAIN)
        split = stratified_split(labels, seed=seed)
        m2, s2, _ = train(ds, split, seed=seed, epochs=cfg.epochs, batch_size=cfg.batch_size,
                          lr=cfg.learning_rate, hidden=cfg.hidden)
        doc["retrained"] = evaluate(m2, s2, *ds.subset(split.test), CLASS_NAMES).to_dict()

    _dump_json(out / "defense_report.json", doc)
    (out / "depth_table.txt").write_text(depth_table(rows + [overall], per))
    (out / "defense_table.txt").write_text(defended.table(DISPLAY_NAMES))
    if cfg.plots:
        plotting.depth_bars(rows, out / "depth.png", title=f"{layers}-layer PQCs, {cfg.n_qubits} qubits")
        plotting.confusion_matrix(defended.confusion, DISPLAY_NAMES, out / "defense_confusion.png",
                                  title="Defended circuits, pre-trained classifier")
    return doc


# -- scaling ------------------------------------------------------------------------------

def cmd_scaling(cfg: ExperimentConfig, qubits: Iterable[int]) -> list[dict]:
    rows = []
    for n in qubits:
        sub = cfg.replace(n_qubits=n, output_dir=str(cfg.out / f"n{n}"))
        log.info("scaling: n=%d", n)
        cmd_gen(sub)
        cmd_train(sub)
        rep = cmd_eval(sub)
        row = {"n": n, "n_features": n_features(n), "test_accuracy": rep.accuracy, "defended_accuracy": None}
        if cfg.defense != "off":
            row["defended_accuracy"] = cmd_defense_eval(sub)["defended_accuracy"]
        rows.append(row)
    cfg.out.mkdir(parents=True, exist_ok=True)
    lines = ["n,n_features,test_accuracy,defended_accuracy"]
    for r in rows:
        dacc = "" if r["defended_accuracy"] is None else "%.6f" % r["defended_accuracy"]
        lines.append(f"{r['n']},{r['n_features']},{r['test_accuracy']:.6f},{dacc}")
    (cfg.out / "scaling.csv").write_text("\n".join(lines) + "\n")
    if cfg.plots:
        plotting.scaling(rows, cfg.out / "scaling.png")
    return rows


# -- defend (user-facing) -------------------------------------------------------------

def read_circuit(path: str | Path) -> Circuit:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".qasm":
        return parse_qasm(text)
    return parse_json(text)


def cmd_defend(
    encoding_path: str | Path,
    out_prefix: str | Path,
    seed: int,
    pqc_path: str | Path | None = None,
    boundary: int | None = None,
) -> tuple[Circuit, Path, Path]:
    """Insert a freshly keyed cloak between encoding and PQC; write ``.json`` and ``.qasm``.

    Either pass the PQC as its own file, or a single circuit plus the instruction
    index where the PQC begins.
    """
    if (pqc_path is None) == (boundary is None):
        raise ValueError("give exactly one of a PQC file or a boundary index")
    first = read_circuit(encoding_path)
    if pqc_path is not None:
        enc, pqc = first, read_circuit(pqc_path)
    else:
        if not 0 <= boundary <= len(first):
            raise ValueError(f"boundary {boundary} outside 0..{len(first)}")
        enc = first.replace(first.instructions[:boundary])
        pqc = Circuit(first.n_qubits, first.instructions[boundary:])
    circ = defend(enc, pqc, gen_key(enc.n_qubits, seed))
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    json_path = prefix.with_name(prefix.name + ".json")
    qasm_path = prefix.with_name(prefix.name + ".qasm")
    json_path.write_text(emit_json(circ))
    qasm_path.write_text(emit_qasm(circ))
    return circ, json_path, qasm_path
