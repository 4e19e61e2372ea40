"""PNG figures written next to the CSV/JSON reports.

Uses the object-oriented Figure API with the Agg canvas, so nothing touches
pyplot's global state and no display is needed.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

_DPI = 120
_METADATA = {"Software": None}  # keep PNG bytes stable across matplotlib builds


def _figure(width=6.4, height=4.0) -> Figure:
    fig = Figure(figsize=(width, height), dpi=_DPI, layout="constrained")
    FigureCanvasAgg(fig)
    return fig


def _save(fig: Figure, path: Path) -> Path:
    path = Path(path)
    fig.savefig(path, format="png", metadata=_METADATA)
    return path


def training_curves(report, path: Path, title: str = "") -> Path:
    epochs = np.arange(1, len(report.train_loss) + 1)
    fig = _figure(9.0, 3.6)
    ax_loss, ax_acc = fig.subplots(1, 2)
    ax_loss.plot(epochs, report.train_loss, label="train")
    ax_loss.plot(epochs, report.val_loss, label="validation")
    ax_loss.set(xlabel="epoch", ylabel="cross-entropy loss", title="Loss")
    ax_acc.plot(epochs, report.train_acc, label="train")
    ax_acc.plot(epochs, report.val_acc, label="validation")
    ax_acc.set(xlabel="epoch", ylabel="accuracy", ylim=(0, 1.02), title="Accuracy")
    for ax in (ax_loss, ax_acc):
        ax.grid(alpha=0.3)
        ax.legend(frameon=False)
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def confusion_matrix(confusion: np.ndarray, names: Sequence[str], path: Path, title: str = "") -> Path:
    conf = np.asarray(confusion)
    rows = conf.sum(axis=1, keepdims=True)
    frac = np.divide(conf, rows, out=np.zeros(conf.shape), where=rows > 0)
    fig = _figure(5.0, 4.4)
    ax = fig.subplots()
    im = ax.imshow(frac, cmap="Blues", vmin=0, vmax=1)
    ax.set_xticks(range(len(names)), names)
    ax.set_yticks(range(len(names)), names)
    ax.set(xlabel="predicted", ylabel="true", title=title)
    for i in range(conf.shape[0]):
        for j in range(conf.shape[1]):
            ax.text(j, i, str(conf[i, j]), ha="center", va="center",
                    color="white" if frac[i, j] > 0.5 else "black", fontsize=9)
    fig.colorbar(im, ax=ax, shrink=0.8, label="row fraction")
    return _save(fig, path)


def scaling(rows: Sequence[dict], path: Path) -> Path:
    ns = [r["n"] for r in rows]
    fig = _figure()
    ax = fig.subplots()
    ax.plot(ns, [r["test_accuracy"] for r in rows], "o-", label="undefended")
    defended = [r.get("defended_accuracy") for r in rows]
    if any(d is not None for d in defended):
        pts = [(n, d) for n, d in zip(ns, defended) if d is not None]
        ax.plot(*zip(*pts), "s--", label="defended")
    ax.axhline(0.2, color="grey", lw=0.8, ls=":", label="chance")
    ax.set(xlabel="qubits", ylabel="test accuracy", ylim=(0, 1.02), xticks=ns)
    ax.grid(alpha=0.3)
    ax.legend(frameon=False)
    return _save(fig, path)


def depth_bars(rows, path: Path, title: str = "") -> Path:
    names = [r.name for r in rows]
    x = np.arange(len(rows))
    fig = _figure()
    ax = fig.subplots()
    ax.bar(x - 0.2, [r.original for r in rows], 0.4, label="original")
    bars = ax.bar(x + 0.2, [r.obfuscated for r in rows], 0.4, label="obfuscated")
    ax.bar_label(bars, labels=[f"+{r.delta_pct:.1f}%" for r in rows], fontsize=8, padding=2)
    ax.set_xticks(x, names)
    ax.set(ylabel="mean transpiled depth", title=title)
    ax.legend(frameon=False, loc="lower right")
    return _save(fig, path)
