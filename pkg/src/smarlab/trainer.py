"""Training loop, evaluation, and the metrics log.

Training is plain SGD with momentum 0.9 on mini-batches that are pure
functions of (seed, step). The band loss joins the objective once the
step counter reaches smar_start_step; the balance term joins only when
enabled. A non-finite total loss aborts immediately with the last logged
metrics attached to the exception.

The metrics log is JSONL, one self-describing record per logged step:

    {"schema_version": 1, "step": 0,
     "losses": {"main": ..., "balance": ..., "smar": ..., "total": ...},
     "per_layer": [{"layer": 0, "d_sym_kl": ...,
                    "expert_shares_vision": [...], "expert_shares_text": [...]}, ...],
     "accuracy": ...}

losses.smar and losses.balance are the *active contributions*: exactly
0.0 while a term is disabled or not yet started. d_sym_kl is logged for
every layer regardless (null if a batch ever held one modality).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

import smarlab.autodiff as ad
from smarlab import kernels
from smarlab.autodiff import Tensor
from smarlab.config import TrainConfig
from smarlab.data import SynthConfig, generate_batch
from smarlab.errors import InputError, NumericError, TrainingDivergedError
from smarlab.losses import SmarBand, cross_entropy, load_balance_loss, smar_loss, total_loss
from smarlab.model import MoeModel, forward, parameters

METRICS_SCHEMA = 1
EVAL_SCHEMA = 1
EVAL_STEP_OFFSET = 1_000_000  # evaluation batches never overlap training steps


def synth_config(cfg: TrainConfig) -> SynthConfig:
    """Data geometry for a training configuration. Feature dimensions,
    vision fraction and cluster layout are fixed package defaults; the
    config contributes the seed, batch size and class count."""
    return SynthConfig(
        seed=cfg.seed,
        tokens_per_batch=cfg.batch_size,
        classes=cfg.classes,
        clusters_per_modality=cfg.classes,
    )


class SgdMomentum:
    """v <- mu*v + grad; w <- w - lr*v. Parameters with no gradient this
    step (nothing reached them) are skipped."""

    def __init__(self, named_params: list[tuple[str, Tensor]], learning_rate: float, momentum: float = 0.9):
        self.named_params = named_params
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity = {name: np.zeros_like(t.values) for name, t in named_params}

    def step(self) -> None:
        for name, t in self.named_params:
            if t.grad is None:
                continue
            v = self.momentum * self.velocity[name] + t.grad
            self.velocity[name] = v
            t.values = t.values - self.learning_rate * v

    def zero_grad(self) -> None:
        ad.zero_grad(t for _, t in self.named_params)


@dataclass
class LayerMetrics:
    layer: int
    d_sym_kl: float | None
    expert_shares_vision: list[float]
    expert_shares_text: list[float]


@dataclass
class StepMetrics:
    step: int
    losses: dict[str, float]
    per_layer: list[LayerMetrics]
    accuracy: float

    def to_record(self) -> dict:
        return {
            "schema_version": METRICS_SCHEMA,
            "step": self.step,
            "losses": self.losses,
            "per_layer": [asdict(l) for l in self.per_layer],
            "accuracy": self.accuracy,
        }


def _layer_metrics(per_layer) -> list[LayerMetrics]:
    out = []
    for li, (outcome, stats) in enumerate(per_layer):
        if stats is None:
            e = outcome.n_experts
            out.append(LayerMetrics(li, None, [0.0] * e, [0.0] * e))
            continue
        out.append(
            LayerMetrics(
                layer=li,
                d_sym_kl=stats.distance.item(),
                expert_shares_vision=stats.freq_vision.tolist(),
                expert_shares_text=stats.freq_text.tolist(),
            )
        )
    return out


def _accuracy(logits: Tensor, classes: np.ndarray) -> float:
    return float((logits.values.argmax(axis=1) == classes).mean())


def train(cfg: TrainConfig, metrics_path=None) -> tuple[MoeModel, list[StepMetrics]]:
    """Run the full loop; returns the trained model and the logged
    metrics. When metrics_path is given, records are appended to the file
    as they are produced (one JSON object per line)."""
    model = MoeModel.build(cfg.model_config(), cfg.seed)
    data_cfg = synth_config(cfg)
    band = SmarBand(cfg.d_min, cfg.d_max)
    optimizer = SgdMomentum(parameters(model), cfg.learning_rate)

    metrics: list[StepMetrics] = []
    sink = open(metrics_path, "w", encoding="utf-8") if metrics_path else None
    try:
        for step in range(cfg.steps):
            batch = generate_batch(data_cfg, step)
            try:
                logits, per_layer = forward(model, batch)
                main = cross_entropy(logits, batch.classes)

                smar_active = cfg.beta > 0 and step >= cfg.smar_start_step
                smar_terms = [
                    smar_loss(stats.distance, band)
                    for _, stats in per_layer
                    if stats is not None
                ] if smar_active else []

                if cfg.load_balance_enabled:
                    per_layer_balance = [load_balance_loss(outcome) for outcome, _ in per_layer]
                    acc = per_layer_balance[0]
                    for t in per_layer_balance[1:]:
                        acc = ad.add(acc, t)
                    balance = ad.smul(acc, 1.0 / len(per_layer_balance))
                    alpha = cfg.alpha
                else:
                    balance = ad.constant([[0.0]])
                    alpha = 0.0

                bundle = total_loss(main, balance, smar_terms, alpha=alpha, beta=cfg.beta)
            except NumericError as exc:
                # saturated probabilities make the loss infinite before the
                # arithmetic ever produces an inf; same abort, same dump
                last = metrics[-1].to_record() if metrics else None
                raise TrainingDivergedError(
                    f"numeric failure at step {step}: {exc}; last metrics: {json.dumps(last)}",
                    last_metrics=last,
                )
            total_value = bundle.total.item()

            logged = step % cfg.log_every == 0 or step == cfg.steps - 1
            if logged:
                metrics.append(
                    StepMetrics(
                        step=step,
                        losses={
                            "main": main.item(),
                            "balance": bundle.balance.item() if cfg.load_balance_enabled else 0.0,
                            "smar": bundle.smar.item() if smar_active else 0.0,
                            "total": total_value,
                        },
                        per_layer=_layer_metrics(per_layer),
                        accuracy=_accuracy(logits, batch.classes),
                    )
                )
                if sink:
                    sink.write(json.dumps(metrics[-1].to_record()) + "\n")
                    sink.flush()

            if not np.isfinite(total_value):
                last = metrics[-1].to_record() if metrics else None
                raise TrainingDivergedError(
                    f"non-finite loss {total_value} at step {step}; last metrics: {json.dumps(last)}",
                    last_metrics=last,
                )

            ad.backward(bundle.total)
            optimizer.step()
            optimizer.zero_grad()
    finally:
        if sink:
            sink.close()
    return model, metrics


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalStats:
    """Aggregated no-gradient evaluation over fresh batches. d_values[l]
    lists the per-batch routing distances of layer l (batches that held a
    single modality are skipped there); counts_* accumulate expert
    selections over all batches."""

    n_batches: int
    n_layers: int
    n_experts: int
    top_k: int
    d_values: list[list[float]]
    counts_vision: np.ndarray   # layers x experts
    counts_text: np.ndarray     # layers x experts
    tokens_vision: int
    tokens_text: int
    accuracy: float | None

    @property
    def empty(self) -> bool:
        return self.n_batches == 0

    def mean_d(self, layer: int) -> float | None:
        vals = self.d_values[layer]
        return float(np.mean(vals)) if vals else None


def evaluate(model: MoeModel, cfg: TrainConfig, n_batches: int) -> EvalStats:
    """Pure function of (model, cfg, n_batches): batches come from a
    dedicated step range, nothing is trained, no gradient graph survives.
    n_batches == 0 yields the explicit empty marker."""
    if n_batches < 0:
        raise InputError("evaluate: n_batches must be >= 0")
    mcfg = model.config
    stats = EvalStats(
        n_batches=n_batches,
        n_layers=mcfg.layers,
        n_experts=mcfg.experts,
        top_k=mcfg.top_k,
        d_values=[[] for _ in range(mcfg.layers)],
        counts_vision=np.zeros((mcfg.layers, mcfg.experts)),
        counts_text=np.zeros((mcfg.layers, mcfg.experts)),
        tokens_vision=0,
        tokens_text=0,
        accuracy=None,
    )
    if n_batches == 0:
        return stats

    data_cfg = synth_config(cfg)
    hits = 0
    total = 0
    for i in range(n_batches):
        batch = generate_batch(data_cfg, EVAL_STEP_OFFSET + i)
        logits, per_layer = forward(model, batch)
        hits += int((logits.values.argmax(axis=1) == batch.classes).sum())
        total += batch.n_tokens
        stats.tokens_vision += batch.n_vision
        stats.tokens_text += batch.n_text
        for li, (outcome, layer_stats) in enumerate(per_layer):
            if layer_stats is not None:
                stats.d_values[li].append(layer_stats.distance.item())
            counts = kernels.selection_counts(outcome.selected, batch.modality, mcfg.experts)
            stats.counts_vision[li] += counts[0]
            stats.counts_text[li] += counts[1]
    stats.accuracy = hits / total
    return stats


# ---------------------------------------------------------------------------
# log files


def write_metrics(path, metrics: list[StepMetrics]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m in metrics:
            fh.write(json.dumps(m.to_record()) + "\n")


def read_metrics(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    for rec in records:
        if rec.get("schema_version") != METRICS_SCHEMA:
            raise InputError(f"{path}: unsupported metrics schema {rec.get('schema_version')}")
    return records


def write_eval_log(path, stats: EvalStats, cfg: TrainConfig, per_batch: list[dict] | None = None) -> None:
    """Evaluation log: a header with the aggregate, then (optionally) one
    record per batch. Selection counts are exact, so analysis results
    derived from this file match the in-process EvalStats."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "schema_version": EVAL_SCHEMA,
            "kind": "smarlab-eval",
            "n_batches": stats.n_batches,
            "n_layers": stats.n_layers,
            "n_experts": stats.n_experts,
            "top_k": stats.top_k,
            "tokens_vision": stats.tokens_vision,
            "tokens_text": stats.tokens_text,
            "accuracy": stats.accuracy,
            "d_values": stats.d_values,
            "counts_vision": stats.counts_vision.tolist(),
            "counts_text": stats.counts_text.tolist(),
            "config": asdict(cfg),
        }
        fh.write(json.dumps(header) + "\n")
        for rec in per_batch or []:
            fh.write(json.dumps(rec) + "\n")


def read_eval_log(path) -> EvalStats:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if not first.strip():
        raise InputError(f"{path}: empty evaluation log")
    header = json.loads(first)
    if header.get("kind") != "smarlab-eval" or header.get("schema_version") != EVAL_SCHEMA:
        raise InputError(f"{path}: not a supported evaluation log")
    return EvalStats(
        n_batches=header["n_batches"],
        n_layers=header["n_layers"],
        n_experts=header["n_experts"],
        top_k=header["top_k"],
        d_values=[list(map(float, v)) for v in header["d_values"]],
        counts_vision=np.asarray(header["counts_vision"], dtype=np.float64),
        counts_text=np.asarray(header["counts_text"], dtype=np.float64),
        tokens_vision=header["tokens_vision"],
        tokens_text=header["tokens_text"],
        accuracy=header["accuracy"],
    )
