"""Modality routing distribution (MRD) statistics.

For one routing pass and one mini-batch, each modality m gets

    F[m,e] = (1 / (k * N_m)) * sum_i 1[e selected for token i]   (frequency)
    R[m,e] = (1 / N_m) * sum_i w[i,e]                            (mean weight)
    Q[m,e] = F[m,e] * R[m,e]
    qtilde[m] = (Q[m] + eps) / sum_e (Q[m,e] + eps)

and the distance between the two modality profiles is the symmetric KL

    d = 0.5 * (KL(qv || qt) + KL(qt || qv))

in nats. F is an indicator count (piecewise constant in the parameters),
so it is held out of the gradient graph; gradients reach the router only
through R. The eps floor keeps the normalized profiles strictly positive
so the KL is always finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

import smarlab.autodiff as ad
from smarlab import kernels
from smarlab.autodiff import Tensor
from smarlab.errors import MrdUndefinedError, NumericError, ShapeError
from smarlab.router import TEXT, VISION, RoutingOutcome, TokenBatch

EPSILON = 1e-8


@dataclass
class MrdStats:
    """Per-batch routing distribution summary for one layer.

    freq_* are plain arrays (stop-gradient by construction); weight_*,
    profile_* and distance stay in the graph so the tolerance-band loss
    can differentiate through them.
    """

    freq_vision: np.ndarray      # E, selection frequencies F_v
    freq_text: np.ndarray        # E, selection frequencies F_t
    weight_vision: Tensor        # 1 x E, mean renormalized weights R_v
    weight_text: Tensor          # 1 x E
    profile_vision: Tensor       # 1 x E, normalized qtilde_v
    profile_text: Tensor         # 1 x E
    distance: Tensor             # 1 x 1, symmetric KL in nats
    n_vision: int
    n_text: int
    layer_index: int = 0


def sym_kl(p, q) -> Tensor:
    """Symmetric KL divergence 0.5*(KL(p||q) + KL(q||p)) between two
    strictly positive probability rows; differentiable in both."""
    p = p if isinstance(p, Tensor) else ad.constant(np.asarray(p, dtype=np.float64).reshape(1, -1))
    q = q if isinstance(q, Tensor) else ad.constant(np.asarray(q, dtype=np.float64).reshape(1, -1))
    if p.shape != q.shape or p.rows != 1:
        raise ShapeError(f"sym_kl: want matching 1xE rows, got {p.shape} and {q.shape}")
    if np.any(p.values <= 0.0) or np.any(q.values <= 0.0):
        raise NumericError("sym_kl: distributions must be strictly positive")
    log_ratio = ad.sub(ad.log(p), ad.log(q))
    forward = ad.sum_all(ad.mul(p, log_ratio))
    reverse = ad.sum_all(ad.mul(q, ad.smul(log_ratio, -1.0)))
    return ad.smul(ad.add(forward, reverse), 0.5)


def _modality_profile(freq: np.ndarray, weight: Tensor, n_experts: int) -> Tensor:
    q = ad.mul(ad.constant(freq.reshape(1, -1)), weight)
    smoothed = ad.add(q, ad.constant(np.full((1, n_experts), EPSILON)))
    total = ad.matmul(ad.row_sum(smoothed), ad.ones(1, n_experts))
    return ad.div(smoothed, total)


def compute_mrd(outcome: RoutingOutcome, batch: TokenBatch, layer_index: int = 0) -> MrdStats:
    """MRD statistics for one routing pass. Raises MrdUndefinedError when
    the batch holds a single modality; callers skip the band loss then."""
    n_v, n_t = batch.n_vision, batch.n_text
    if n_v == 0 or n_t == 0:
        raise MrdUndefinedError(
            f"MRD needs both modalities in the batch (vision={n_v}, text={n_t})"
        )
    e = outcome.n_experts
    k = outcome.top_k

    counts = kernels.selection_counts(outcome.selected, batch.modality, e)
    freq_v = counts[VISION] / (k * n_v)
    freq_t = counts[TEXT] / (k * n_t)

    weight_v = ad.col_mean(ad.gather_rows(outcome.weights, batch.rows_of(VISION)))
    weight_t = ad.col_mean(ad.gather_rows(outcome.weights, batch.rows_of(TEXT)))

    profile_v = _modality_profile(freq_v, weight_v, e)
    profile_t = _modality_profile(freq_t, weight_t, e)

    return MrdStats(
        freq_vision=freq_v,
        freq_text=freq_t,
        weight_vision=weight_v,
        weight_text=weight_t,
        profile_vision=profile_v,
        profile_text=profile_t,
        distance=sym_kl(profile_v, profile_t),
        n_vision=n_v,
        n_text=n_t,
        layer_index=layer_index,
    )
