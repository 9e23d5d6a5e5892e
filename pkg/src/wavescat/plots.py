"""Vector-graphics rendering of scenario artifacts."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .runner import ArtifactEntry, ArtifactIndex

log = logging.getLogger(__name__)


def _read_csv(path: Path):
    comments = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    rows = []
    header = None
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            comments[key.strip()] = value.strip()
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append([float(c) for c in line.split(",")])
    data = np.array(rows) if rows else np.empty((0, len(header or [])))
    return header or [], data, comments


def _plot_spectrum(path: Path, out: Path, details: dict) -> None:
    header, data, comments = _read_csv(path)
    idx, s = data[:, 0], data[:, 1]
    fig, ax = plt.subplots(figsize=(5, 4))
    positive = s > 0
    ax.loglog(idx[positive], s[positive], ".", ms=3, label="s_n")
    alpha = details.get("alpha")
    if alpha is not None and np.any(positive):
        n0 = idx[positive][min(5, positive.sum() - 1)]
        s0 = s[positive][min(5, positive.sum() - 1)]
        ref = s0 * (idx[positive] / n0) ** alpha
        ax.loglog(idx[positive], ref, "--", lw=1,
                  label=f"slope {alpha:.2f}")
    thr = details.get("threshold_p")
    if thr is not None:
        ax.loglog(idx[positive], s.max() * idx[positive] ** (-1.0 / thr),
                  ":", lw=1, label=f"p({thr:.2f}) boundary")
    ax.set_xlabel("n")
    ax.set_ylabel("singular value")
    ax.set_title(path.stem, fontsize=9)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)


def _plot_cauchy(path: Path, out: Path, details: dict) -> None:
    header, data, comments = _read_csv(path)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(data[:, 0], np.maximum(data[:, 1], 1e-300), "o-", ms=3)
    tol = float(comments.get("tolerance", "nan"))
    if np.isfinite(tol):
        ax.axhline(tol, color="crimson", ls="--", lw=1,
                   label=f"tolerance {tol:g}")
        ax.legend(fontsize=8)
    ax.set_xlabel("t")
    ax.set_ylabel("|| image(t_{i+1}) - image(t_i) ||")
    ax.set_title(path.stem, fontsize=9)
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)


def _plot_curves(path: Path, out: Path, details: dict) -> None:
    header, data, comments = _read_csv(path)
    fig, ax = plt.subplots(figsize=(5, 4))
    for j, name in enumerate(header[1:], start=1):
        ax.semilogy(data[:, 0], np.maximum(data[:, j], 1e-300),
                    "o-", ms=3, label=name)
    ax.set_xlabel(header[0])
    ax.legend(fontsize=8)
    ax.set_title(path.stem, fontsize=9)
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)


def _plot_counting(path: Path, out: Path, details: dict) -> None:
    header, data, comments = _read_csv(path)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.step(data[:, 0], data[:, 1], where="post", label="perturbed")
    ax.step(data[:, 0], data[:, 2], where="post", label="background")
    ax.set_xlabel("lambda")
    ax.set_ylabel("eigenvalues counted")
    ax.legend(fontsize=8)
    ax.set_title(path.stem, fontsize=9)
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)


def _renderer_for(name: str):
    if "spectrum" in name or "commutator" in name or "isometry" in name:
        return _plot_spectrum
    if "cauchy" in name:
        return _plot_cauchy
    if "counting" in name:
        return _plot_counting
    if name.endswith(".csv"):
        return _plot_curves
    return None


def emit_plots(index: ArtifactIndex) -> list:
    """Render one SVG per CSV artifact; update and rewrite the manifest.

    Missing artifacts are skipped with a warning recorded in the manifest
    meta block.
    """
    out_dir = Path(index.out_dir)
    produced = []
    warnings = []
    seen = {e.file for e in index.entries}
    for entry in list(index.entries):
        if not entry.file.endswith(".csv"):
            continue
        src = out_dir / entry.file
        render = _renderer_for(entry.file)
        if render is None:
            continue
        if not src.exists():
            warnings.append(f"missing artifact {entry.file}")
            log.warning("missing artifact %s", entry.file)
            continue
        out = src.with_suffix(".svg")
        render(src, out, entry.details)
        produced.append(out.name)
        if out.name not in seen:
            index.entries.append(ArtifactEntry(
                file=out.name, experiment=entry.experiment,
                resolution=entry.resolution, wall_time_s=0.0,
                verdict="not-applicable", details={"plot_of": entry.file}))
            seen.add(out.name)
    if warnings:
        index.meta.setdefault("plot_warnings", []).extend(warnings)
    index.save(out_dir / "manifest.json")
    return produced
