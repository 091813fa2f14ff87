"""Modality-biased linear router.

Logits for token i are h_i @ gate plus a per-modality bias row (one
learned 1xE vector per modality, added to whichever tokens carry that
modality label). Softmax over experts gives P, the top-k entries of each
row are kept with ties broken toward the lower expert index, and the
kept probabilities are renormalized to the combination weights w. The
selection itself is discrete and outside the gradient graph; gradients
flow through P and w only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

import smarlab.autodiff as ad
from smarlab import kernels
from smarlab.autodiff import Tensor
from smarlab.errors import InputError, ParameterError, ShapeError

VISION = 0
TEXT = 1


@dataclass
class TokenBatch:
    """Hidden states plus a modality label per token (0=vision, 1=text)."""

    hidden: Tensor
    modality: np.ndarray

    def __post_init__(self):
        self.modality = np.asarray(self.modality, dtype=np.int64).ravel()
        if self.modality.shape[0] != self.hidden.rows:
            raise ShapeError(
                f"TokenBatch: {self.modality.shape[0]} labels for {self.hidden.rows} tokens"
            )
        bad = (self.modality != VISION) & (self.modality != TEXT)
        if bad.any():
            raise InputError("TokenBatch: modality labels must be 0 (vision) or 1 (text)")

    @property
    def n_tokens(self) -> int:
        return self.hidden.rows

    @property
    def n_vision(self) -> int:
        return int((self.modality == VISION).sum())

    @property
    def n_text(self) -> int:
        return int((self.modality == TEXT).sum())

    def rows_of(self, modality: int) -> np.ndarray:
        return np.flatnonzero(self.modality == modality)


@dataclass
class RouterParams:
    """gate: HxE; bias_vision/bias_text: 1xE, zero-initialized. When
    modality_bias_enabled is false the bias rows are ignored entirely and
    stay out of the optimizer's parameter list."""

    gate: Tensor
    bias_vision: Tensor
    bias_text: Tensor
    modality_bias_enabled: bool = True

    def __post_init__(self):
        e = self.gate.cols
        if e < 2:
            raise ParameterError(f"RouterParams: need at least 2 experts, got {e}")
        for name in ("bias_vision", "bias_text"):
            b = getattr(self, name)
            if b.shape != (1, e):
                raise ShapeError(f"RouterParams: {name} must be 1x{e}, got {b.shape}")
        if not np.isfinite(self.gate.values).all():
            raise ParameterError("RouterParams: non-finite gate weights")

    @property
    def n_experts(self) -> int:
        return self.gate.cols


@dataclass
class RoutingOutcome:
    """Everything downstream consumers need from one routing pass."""

    logits: Tensor           # N x E, bias included
    probs: Tensor            # N x E, rows sum to 1
    selected: np.ndarray     # N x k int64, ascending expert index per row
    weights: Tensor          # N x E, renormalized over the selected set
    top_k: int

    @property
    def n_experts(self) -> int:
        return self.probs.cols


def route(params: RouterParams, batch: TokenBatch, top_k: int) -> RoutingOutcome:
    if not isinstance(top_k, int) or isinstance(top_k, bool):
        raise ParameterError(f"route: top_k must be an int, got {top_k!r}")
    if not 1 <= top_k <= params.n_experts:
        raise ParameterError(
            f"route: top_k={top_k} outside [1, {params.n_experts}]"
        )
    if batch.n_tokens == 0:
        raise InputError("route: empty batch")
    if batch.hidden.cols != params.gate.rows:
        raise ShapeError(
            f"route: hidden width {batch.hidden.cols} vs gate input {params.gate.rows}"
        )

    logits = ad.matmul(batch.hidden, params.gate)
    if params.modality_bias_enabled:
        # a [2 x E] table indexed by the per-token modality label; identical
        # to splitting the batch by modality, biasing each block, and
        # re-interleaving, but keeps the original token order
        bias_table = ad.concat_rows([params.bias_vision, params.bias_text])
        logits = ad.add(logits, ad.gather_rows(bias_table, batch.modality))

    probs = ad.row_softmax(logits)
    selected, mask = kernels.topk_rows(probs.values, top_k)
    kept = ad.mul(probs, ad.constant(mask))
    denom = ad.matmul(ad.row_sum(kept), ad.ones(1, params.n_experts))
    weights = ad.div(kept, denom)
    return RoutingOutcome(logits, probs, selected, weights, top_k)


def top_k_select(probabilities, top_k: int):
    """One row of routing, outside the gradient graph: returns the chosen
    expert indices (ascending) and the full-length renormalized weight
    vector. The input must already be a probability row."""
    row = np.asarray(probabilities, dtype=np.float64).ravel()
    if row.size < 1:
        raise InputError("top_k_select: empty probability row")
    if not isinstance(top_k, int) or isinstance(top_k, bool):
        raise ParameterError(f"top_k_select: top_k must be an int, got {top_k!r}")
    if not 1 <= top_k <= row.size:
        raise ParameterError(f"top_k_select: top_k={top_k} outside [1, {row.size}]")
    if not np.isfinite(row).all() or abs(row.sum() - 1.0) > 1e-9 or (row < 0).any():
        raise InputError("top_k_select: input is not a probability row")

    sel, mask = kernels.topk_rows(row[None, :], top_k)
    kept = row * mask[0]
    return sel[0].copy(), kept / kept.sum()
