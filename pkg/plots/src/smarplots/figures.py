"""Render analysis CSVs into figures.

Two figure kinds:

* ``curve`` — per-layer distance envelopes. Each input CSV becomes one
  series: a line through ``d_mean`` with a shaded ``d_min``..``d_max``
  band, plus optional horizontal target-band lines.
* ``pref`` — per-layer expert modality preference. One axes per layer
  with, for every expert, the vision and text traffic shares stacked.

The renderer never computes statistics: every series is read straight
from named CSV columns, and inputs are never modified.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

CURVE_COLUMNS = ["layer", "d_min", "d_mean", "d_max"]
PREF_COLUMNS = ["layer", "expert", "vision_share", "text_share"]
MISSING = "missing"

CURVE_X_LABEL = "layer"
CURVE_Y_LABEL = "modality distance d"
PREF_X_LABEL = "expert"
PREF_Y_LABEL = "share of modality traffic"

VISION_COLOR = "#4477aa"
TEXT_COLOR = "#ee6677"


class SchemaError(Exception):
    """An input CSV does not match the expected analysis schema."""


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    inputs: tuple[Path, ...]
    output: Path | None = None
    title: str | None = None
    band: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in ("curve", "pref"):
            raise ValueError(f"unknown figure kind {self.kind!r}; use 'curve' or 'pref'")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")
        if self.kind == "pref" and len(self.inputs) != 1:
            raise ValueError("pref figures take exactly one input CSV")
        if self.band is not None:
            lo, hi = self.band
            if not lo < hi:
                raise ValueError(f"band requires d_min < d_max, got [{lo}, {hi}]")


@dataclass(frozen=True)
class FigureSummary:
    """Structural description of a rendered figure, for golden checks."""

    kind: str
    n_axes: int
    n_series: int
    x_label: str
    y_label: str
    series_labels: tuple[str, ...]
    band: tuple[float, float] | None
    placeholder: bool


def _read_rows(path: Path, expected: list[str]) -> list[list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if header != expected:
            raise SchemaError(
                f"{path}: header {header} does not match the expected columns {expected}")
        return list(reader)


def _series_labels(paths: tuple[Path, ...]) -> list[str]:
    stems = [Path(p).stem for p in paths]
    if len(set(stems)) == len(stems):
        return stems
    return [f"{Path(p).parent.name}/{Path(p).stem}" for p in paths]


def _read_curve(path: Path):
    layers, d_min, d_mean, d_max = [], [], [], []
    for row in _read_rows(Path(path), CURVE_COLUMNS):
        try:
            layers.append(int(row[0]))
            d_min.append(float(row[1]))
            d_mean.append(float(row[2]))
            d_max.append(float(row[3]))
        except (ValueError, IndexError):
            raise SchemaError(
                f"{path}: row {row!r} is not valid for columns {CURVE_COLUMNS}") from None
    return layers, d_min, d_mean, d_max


def _read_pref(path: Path):
    def share(cell, row):
        if cell == MISSING:
            return None
        try:
            return float(cell)
        except ValueError:
            raise SchemaError(
                f"{path}: row {row!r} is not valid for columns {PREF_COLUMNS}") from None

    per_layer: dict[int, list[tuple[int, float | None, float | None]]] = {}
    for row in _read_rows(Path(path), PREF_COLUMNS):
        try:
            layer, expert = int(row[0]), int(row[1])
            v, t = share(row[2], row), share(row[3], row)
        except (ValueError, IndexError):
            raise SchemaError(
                f"{path}: row {row!r} is not valid for columns {PREF_COLUMNS}") from None
        per_layer.setdefault(layer, []).append((expert, v, t))
    return {k: sorted(v) for k, v in sorted(per_layer.items())}


def _placeholder(fig, ax, spec, x_label, y_label) -> FigureSummary:
    ax.text(0.5, 0.5, "no data", ha="center", va="center",
            fontsize=18, color="gray", transform=ax.transAxes)
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    if spec.title:
        ax.set_title(spec.title)
    return FigureSummary(kind=spec.kind, n_axes=1, n_series=0,
                         x_label=x_label, y_label=y_label,
                         series_labels=(), band=spec.band, placeholder=True)


def _build_curve(spec: PlotSpec):
    labels = _series_labels(spec.inputs)
    series = [(label, _read_curve(path)) for label, path in zip(labels, spec.inputs)]
    series = [(label, data) for label, data in series if data[0]]

    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=120)
    if not series:
        return fig, _placeholder(fig, ax, spec, CURVE_X_LABEL, CURVE_Y_LABEL)

    for label, (layers, d_min, d_mean, d_max) in series:
        line, = ax.plot(layers, d_mean, marker="o", label=label)
        ax.fill_between(layers, d_min, d_max, alpha=0.2,
                        linewidth=0, color=line.get_color())
    if spec.band is not None:
        lo, hi = spec.band
        ax.axhline(lo, linestyle="--", color="gray", linewidth=1.0,
                   label=f"band [{lo:g}, {hi:g}]")
        ax.axhline(hi, linestyle="--", color="gray", linewidth=1.0)
    ax.set_xlabel(CURVE_X_LABEL)
    ax.set_ylabel(CURVE_Y_LABEL)
    ax.set_xticks(sorted({l for _, (layers, *_) in series for l in layers}))
    ax.legend(loc="best", fontsize=9)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return fig, FigureSummary(kind="curve", n_axes=1, n_series=len(series),
                              x_label=CURVE_X_LABEL, y_label=CURVE_Y_LABEL,
                              series_labels=tuple(label for label, _ in series),
                              band=spec.band, placeholder=False)


def _build_pref(spec: PlotSpec):
    per_layer = _read_pref(spec.inputs[0])

    if not per_layer:
        fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=120)
        return fig, _placeholder(fig, ax, spec, PREF_X_LABEL, PREF_Y_LABEL)

    n = len(per_layer)
    fig, axes = plt.subplots(1, n, figsize=(2.4 * n + 1.0, 3.6),
                             dpi=120, sharey=True, squeeze=False)
    for ax, (layer, rows) in zip(axes[0], per_layer.items()):
        experts = [e for e, _, _ in rows]
        vision = [0.0 if v is None else v for _, v, _ in rows]
        text = [0.0 if t is None else t for _, _, t in rows]
        ax.bar(experts, vision, color=VISION_COLOR, label="vision")
        ax.bar(experts, text, bottom=vision, color=TEXT_COLOR, label="text")
        ax.set_title(f"layer {layer}", fontsize=10)
        ax.set_xlabel(PREF_X_LABEL)
        ax.set_xticks(experts)
        ax.tick_params(labelsize=8)
    axes[0][0].set_ylabel(PREF_Y_LABEL)
    handles, labels = axes[0][0].get_legend_handles_labels()
    fig.legend(handles, labels, loc="upper right", fontsize=9)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout(rect=(0, 0, 1, 0.94))
    return fig, FigureSummary(kind="pref", n_axes=n, n_series=2,
                              x_label=PREF_X_LABEL, y_label=PREF_Y_LABEL,
                              series_labels=("vision", "text"),
                              band=spec.band, placeholder=False)


def _build(spec: PlotSpec):
    if spec.kind == "curve":
        return _build_curve(spec)
    return _build_pref(spec)


def describe(spec: PlotSpec) -> FigureSummary:
    """Build the figure without saving it and return its structure."""
    fig, summary = _build(spec)
    plt.close(fig)
    return summary


def render(spec: PlotSpec) -> FigureSummary:
    """Write the figure to spec.output and return its structure."""
    if spec.output is None:
        raise ValueError("render requires an output path; use describe() otherwise")
    fig, summary = _build(spec)
    try:
        out = Path(spec.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out)
    finally:
        plt.close(fig)
    return summary
