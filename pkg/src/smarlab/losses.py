"""Training losses: tolerance-band routing loss, load-balance penalty,
cross-entropy, and their weighted composition.

The band loss is the one-sided hinge

    smar(d) = d_min - d   if d < d_min
              d - d_max   if d > d_max
              0           otherwise

so its gradient with respect to d is -1 below the band, +1 above, and 0
inside (including exactly at the boundaries). The load-balance term is
the classic count-times-probability product E * sum_e f_e * pbar_e with
the selection fractions f outside the gradient graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

import smarlab.autodiff as ad
from smarlab.autodiff import Tensor
from smarlab.errors import InputError, ParameterError
from smarlab.router import RoutingOutcome


@dataclass(frozen=True)
class SmarBand:
    """Target interval [d_min, d_max] for the modality routing distance."""

    d_min: float
    d_max: float

    def __post_init__(self):
        if not (np.isfinite(self.d_min) and np.isfinite(self.d_max)):
            raise ParameterError("SmarBand: bounds must be finite")
        if self.d_min < 0 or self.d_min >= self.d_max:
            raise ParameterError(
                f"SmarBand: need 0 <= d_min < d_max, got [{self.d_min}, {self.d_max}]"
            )


@dataclass
class LossBundle:
    main: Tensor
    balance: Tensor
    smar: Tensor
    total: Tensor
    alpha: float
    beta: float


def _as_scalar(x) -> Tensor:
    t = x if isinstance(x, Tensor) else ad.constant([[float(x)]])
    if t.shape != (1, 1):
        raise InputError(f"expected a 1x1 scalar tensor, got {t.shape}")
    return t


def smar_loss(distance, band: SmarBand) -> Tensor:
    """Piecewise-linear tolerance penalty on a (1x1) routing distance."""
    d = _as_scalar(distance)
    value = d.item()
    if value < 0:
        raise InputError(f"smar_loss: distance must be nonnegative, got {value}")
    if value < band.d_min:
        return ad.sub(ad.constant([[band.d_min]]), d)
    if value > band.d_max:
        return ad.sub(d, ad.constant([[band.d_max]]))
    return ad.constant([[0.0]])


def load_balance_loss(outcome: RoutingOutcome) -> Tensor:
    """E * sum_e f_e * pbar_e. f_e is the fraction of the batch's N*k
    selections landing on expert e (a constant with respect to the
    parameters); pbar is the mean routing probability and carries the
    gradient. 1.0 at perfectly uniform routing, E at total collapse."""
    n, e = outcome.probs.shape
    counts = np.bincount(outcome.selected.ravel(), minlength=e).astype(np.float64)
    fractions = counts / (n * outcome.top_k)
    mean_probs = ad.col_mean(outcome.probs)
    return ad.smul(ad.sum_all(ad.mul(ad.constant(fractions.reshape(1, -1)), mean_probs)), float(e))


def total_loss(main, balance, smar_per_layer, alpha: float, beta: float) -> LossBundle:
    """total = main + alpha * balance + beta * mean_l smar_l.

    An empty smar_per_layer means the band loss is disabled for this step
    and contributes an exact zero.
    """
    if alpha < 0 or beta < 0:
        raise ParameterError(f"total_loss: coefficients must be >= 0, got alpha={alpha} beta={beta}")
    main = _as_scalar(main)
    balance = _as_scalar(balance)

    terms = [_as_scalar(s) for s in smar_per_layer]
    if terms:
        acc = terms[0]
        for t in terms[1:]:
            acc = ad.add(acc, t)
        smar = ad.smul(acc, 1.0 / len(terms))
    else:
        smar = ad.constant([[0.0]])

    total = ad.add(ad.add(main, ad.smul(balance, alpha)), ad.smul(smar, beta))
    return LossBundle(main=main, balance=balance, smar=smar, total=total, alpha=alpha, beta=beta)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer class labels under a row
    softmax of the logits."""
    labels = np.asarray(labels, dtype=np.int64).ravel()
    n, c = logits.shape
    if labels.shape[0] != n:
        raise InputError(f"cross_entropy: {labels.shape[0]} labels for {n} rows")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise InputError(f"cross_entropy: label outside [0, {c})")
    onehot = np.zeros((n, c))
    onehot[np.arange(n), labels] = 1.0
    log_probs = ad.log(ad.row_softmax(logits))
    picked = ad.sum_all(ad.mul(ad.constant(onehot), log_probs))
    return ad.smul(picked, -1.0 / n)
