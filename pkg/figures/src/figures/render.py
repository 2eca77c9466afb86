"""Render figures from coarsegauss CSV outputs.

Rendering is a pure function of (CSV bytes, spec): fixed matplotlib style,
no timestamps or environment-dependent metadata in the output, so
re-rendering the same inputs yields an identical image checksum.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("varred_panel", "error_scaling", "flatness_bars")

# Fixed style: deterministic output regardless of user rc files.
_STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "figures",
}


class FigureError(Exception):
    """CSV parsing/validation or rendering failure."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: Tuple[Path, ...]
    out: Path
    style: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {', '.join(KINDS)}")
        if not self.inputs:
            raise FigureError("at least one input CSV is required")


def _read_csv(path: Path, required: Sequence[str]) -> List[Dict[str, str]]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames
            rows = list(reader)
    except OSError as e:
        raise FigureError(f"cannot read {path}: {e}") from e
    if header is None or not rows:
        raise FigureError(f"{path}: empty CSV")
    missing = [c for c in required if c not in header]
    if missing:
        raise FigureError(f"{path}: missing columns: {', '.join(missing)}")
    return rows


def _save(fig, spec: FigureSpec) -> None:
    # Strip the writer-identifying metadata matplotlib embeds by default;
    # everything else is fixed by the rcParams above.
    fmt = spec.out.suffix.lstrip(".").lower() or "png"
    meta = {"Software": None} if fmt == "png" else {"Date": None, "Creator": None}
    spec.out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out, format=fmt, metadata=meta)
    plt.close(fig)


def _varred_panel(spec: FigureSpec):
    rows: List[Dict[str, str]] = []
    for p in spec.inputs:
        rows.extend(_read_csv(p, ["family", "truncation", "var_orig",
                                  "var_trunc", "r"]))
    # One bar pair per (family, truncation); first row wins on duplicates
    # (repeat rows) — we visualize, never aggregate.
    seen: Dict[Tuple[str, str], Dict[str, str]] = {}
    for row in rows:
        seen.setdefault((row["family"], row["truncation"]), row)
    pairs = list(seen.items())

    fig, ax = plt.subplots(figsize=(max(6.0, 1.2 * len(pairs)), 4.0))
    width = 0.38
    xs = np.arange(len(pairs))
    vo = [float(r["var_orig"]) for _, r in pairs]
    vt = [float(r["var_trunc"]) for _, r in pairs]
    ax.bar(xs - width / 2, vo, width, label="original", color="#4878d0")
    ax.bar(xs + width / 2, vt, width, label="truncated", color="#ee854a")
    for x, ((_, _), r), o, t in zip(xs, pairs, vo, vt):
        ax.annotate(f"r={float(r['r']):.3f}", (x, max(o, t)),
                    ha="center", va="bottom", fontsize=8)
    ax.set_xticks(xs)
    ax.set_xticklabels([f"{f}\n{t}" for (f, t), _ in pairs], fontsize=8)
    ax.set_ylabel("empirical variance")
    ax.set_title("variance under truncation")
    ax.legend()
    fig.tight_layout()
    return fig, None


def _error_scaling(spec: FigureSpec):
    points: List[Tuple[float, float]] = []
    for p in spec.inputs:
        rows = _read_csv(p, ["metric", "median"])
        vals = {r["metric"]: r["median"] for r in rows}
        for col in ("err_l2", "n_samples_median"):
            if col not in vals:
                raise FigureError(f"{p}: missing metric row {col!r}")
        points.append((float(vals["n_samples_median"]), float(vals["err_l2"])))
    if len(points) < 2:
        raise FigureError("error_scaling needs at least two summary CSVs "
                          "(one per sample budget)")
    points.sort()
    n = np.array([p[0] for p in points])
    err = np.array([p[1] for p in points])
    if np.any(n <= 0) or np.any(err <= 0):
        raise FigureError("error_scaling requires positive n and error values")
    slope, intercept = np.polyfit(np.log(n), np.log(err), 1)

    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.loglog(n, err, "o-", color="#4878d0", label="median error")
    fit = np.exp(intercept) * n ** slope
    ax.loglog(n, fit, "--", color="#6acc64",
              label=f"fit slope {slope:.3f}")
    ax.set_xlabel("samples consumed")
    ax.set_ylabel("median $\\ell_2$ error")
    ax.set_title("error vs sample budget")
    ax.legend()
    fig.tight_layout()
    return fig, f"log-log slope: {slope:.4f}"


def _flatness_bars(spec: FigureSpec):
    rows: List[Dict[str, str]] = []
    for p in spec.inputs:
        rows.extend(_read_csv(p, ["verdict", "direction",
                                  "flatness", "flatness_se"]))
    scored = [r for r in rows if r["flatness"].strip()]
    if not scored:
        raise FigureError("no flatness scores in input CSVs")
    labels = [f"({r['direction'].replace(' ', ', ')})" for r in scored]
    vals = [float(r["flatness"]) for r in scored]
    ses = [float(r["flatness_se"]) for r in scored]
    verdict = rows[0]["verdict"]

    fig, ax = plt.subplots(figsize=(max(5.0, 1.0 * len(scored)), 4.0))
    xs = np.arange(len(scored))
    colors = ["#d65f5f" if abs(v) <= 3 * s else "#4878d0"
              for v, s in zip(vals, ses)]
    ax.bar(xs, vals, yerr=[3 * s for s in ses], color=colors, capsize=3)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(xs)
    ax.set_xticklabels(labels, fontsize=8, rotation=20)
    ax.set_ylabel("directional curvature score")
    ax.set_title(f"flatness by direction (verdict: {verdict})")
    fig.tight_layout()
    return fig, None


_RENDERERS = {
    "varred_panel": _varred_panel,
    "error_scaling": _error_scaling,
    "flatness_bars": _flatness_bars,
}


def render(spec: FigureSpec) -> str:
    """Render the figure; returns a one-line status (error_scaling includes
    the fitted log-log slope). Raises FigureError before any file is written
    when inputs are empty or columns are missing."""
    with plt.rc_context({**_STYLE, **spec.style}):
        fig, note = _RENDERERS[spec.kind](spec)
        _save(fig, spec)
    msg = f"wrote {spec.out}"
    return f"{msg} ({note})" if note else msg
