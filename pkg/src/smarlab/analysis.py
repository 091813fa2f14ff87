"""Post-hoc routing diagnostics over evaluation statistics.

Three reports, each with a CSV form:

* mrd_curves: per-layer min/mean/max of the routing distance across
  evaluation batches -> mrd_curves.csv (layer,d_min,d_mean,d_max)
* expert_preference: per-layer per-expert share of each modality's
  selections (counting rule identical to the frequency statistic F)
  -> expert_pref.csv (layer,expert,vision_share,text_share)
* detect_collapse: per-layer max expert load and selection entropy
  -> collapse.csv (layer,max_load,entropy,flag)

Load convention: an expert's load is the fraction of tokens whose top-k
set contains it, so "every token uses expert e" reads as load 1.0 no
matter what k is, and a threshold like 0.6 is meaningful for k > 1.
Entropy is over the aggregate (token, slot) selection distribution:
ln(E) at uniform, 0 when a single expert takes everything (k = 1).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from smarlab.errors import ParameterError
from smarlab.trainer import EvalStats

MRD_CURVES_COLUMNS = ["layer", "d_min", "d_mean", "d_max"]
EXPERT_PREF_COLUMNS = ["layer", "expert", "vision_share", "text_share"]
COLLAPSE_COLUMNS = ["layer", "max_load", "entropy", "flag"]


@dataclass
class MrdCurve:
    layer: int
    d_min: float
    d_mean: float
    d_max: float


@dataclass
class ExpertPreference:
    """Selection shares per expert; a modality absent from the whole log
    gets None rows as the missing-modality marker."""

    layer: int
    vision_shares: list[float] | None
    text_shares: list[float] | None


@dataclass
class CollapseReport:
    threshold: float
    max_load: list[float]      # per layer
    entropy: list[float]       # per layer, nats
    flagged: list[int]         # layer indices with max_load > threshold


def mrd_curves(stats: EvalStats) -> list[MrdCurve]:
    """Exact min/mean/max of the recorded distances; layers (or whole
    runs) without any two-modality batch are dropped, an empty input gives
    an empty report."""
    curves = []
    for layer, values in enumerate(stats.d_values):
        if not values:
            continue
        arr = np.asarray(values, dtype=np.float64)
        curves.append(MrdCurve(layer, float(arr.min()), float(arr.mean()), float(arr.max())))
    return curves


def expert_preference(stats: EvalStats) -> list[ExpertPreference]:
    prefs = []
    for layer in range(stats.n_layers):
        row = []
        for counts in (stats.counts_vision[layer], stats.counts_text[layer]):
            total = counts.sum()
            row.append((counts / total).tolist() if total > 0 else None)
        prefs.append(ExpertPreference(layer, row[0], row[1]))
    return prefs


def detect_collapse(stats: EvalStats, load_threshold: float = 0.6) -> CollapseReport:
    if stats.n_experts and not (1.0 / stats.n_experts < load_threshold <= 1.0):
        raise ParameterError(
            f"detect_collapse: threshold {load_threshold} outside (1/{stats.n_experts}, 1]"
        )
    n_tokens = stats.tokens_vision + stats.tokens_text
    max_load = []
    entropy = []
    flagged = []
    for layer in range(stats.n_layers):
        combined = stats.counts_vision[layer] + stats.counts_text[layer]
        total = combined.sum()
        if total == 0 or n_tokens == 0:
            max_load.append(0.0)
            entropy.append(0.0)
            continue
        load = float(combined.max() / n_tokens)
        p = combined / total
        # + 0.0 turns the -0.0 of an all-zero sum into plain 0.0
        h = float(-np.sum([pi * math.log(pi) for pi in p if pi > 0.0]) + 0.0)
        max_load.append(load)
        entropy.append(h)
        if load > load_threshold:
            flagged.append(layer)
    return CollapseReport(load_threshold, max_load, entropy, flagged)


def mean_selection_entropy(report: CollapseReport) -> float:
    return float(np.mean(report.entropy)) if report.entropy else 0.0


# ---------------------------------------------------------------------------
# CSV artifacts (UTF-8, header row, fixed column order)


def write_mrd_curves_csv(path, curves: list[MrdCurve]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MRD_CURVES_COLUMNS)
        for c in curves:
            writer.writerow([c.layer, repr(c.d_min), repr(c.d_mean), repr(c.d_max)])


def write_expert_pref_csv(path, prefs: list[ExpertPreference]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EXPERT_PREF_COLUMNS)
        for p in prefs:
            n_experts = len(p.vision_shares or p.text_shares or [])
            for e in range(n_experts):
                v = repr(p.vision_shares[e]) if p.vision_shares is not None else "missing"
                t = repr(p.text_shares[e]) if p.text_shares is not None else "missing"
                writer.writerow([p.layer, e, v, t])


def write_collapse_csv(path, report: CollapseReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLLAPSE_COLUMNS)
        for layer, (load, h) in enumerate(zip(report.max_load, report.entropy)):
            writer.writerow([layer, repr(load), repr(h), int(layer in report.flagged)])
