"""The toy multimodal mixture-of-experts classifier.

Raw features enter through one projection per modality (D_v x H and
D_t x H), pass through L residual MoE layers, and exit through a linear
class head. Each layer routes every token to its top-k experts and adds
the weight-combined expert outputs back onto the token:

    y_i = x_i + sum_{e in T_i} w[i,e] * FFN_e(x_i)

Only the selected experts run, on gathered sub-batches; a dense
reference (every expert on every token, masked by w) must agree to
within accumulation noise, which the tests pin at 1e-9.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

import smarlab.autodiff as ad
from smarlab.autodiff import Tensor
from smarlab.errors import CheckpointError, MrdUndefinedError, ParameterError
from smarlab.mrd import MrdStats, compute_mrd
from smarlab.router import VISION, TEXT, RouterParams, RoutingOutcome, TokenBatch, route

CHECKPOINT_SCHEMA = 1


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 4
    experts: int = 8
    top_k: int = 2
    hidden: int = 64
    ffn_hidden: int = 128
    classes: int = 8
    d_vision: int = 16
    d_text: int = 12
    modality_bias_enabled: bool = True

    def __post_init__(self):
        for name in ("layers", "experts", "top_k", "hidden", "ffn_hidden", "classes", "d_vision", "d_text"):
            if getattr(self, name) < 1:
                raise ParameterError(f"ModelConfig: {name} must be >= 1")
        if self.experts < 2:
            raise ParameterError("ModelConfig: need at least 2 experts")
        if self.top_k > self.experts:
            raise ParameterError(
                f"ModelConfig: top_k={self.top_k} exceeds experts={self.experts}"
            )

    def content_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class ExpertFfn:
    """Two-layer ReLU feed-forward block, H -> ffn_hidden -> H."""

    def __init__(self, w1: Tensor, w2: Tensor):
        self.w1 = w1
        self.w2 = w2

    def __call__(self, x: Tensor) -> Tensor:
        return ad.matmul(ad.relu(ad.matmul(x, self.w1)), self.w2)


class MoeLayer:
    def __init__(self, router: RouterParams, experts: list[ExpertFfn]):
        self.router = router
        self.experts = experts


class MoeModel:
    def __init__(self, config: ModelConfig, proj_vision: Tensor, proj_text: Tensor,
                 moe_layers: list[MoeLayer], head: Tensor):
        self.config = config
        self.proj_vision = proj_vision
        self.proj_text = proj_text
        self.moe_layers = moe_layers
        self.head = head

    @classmethod
    def build(cls, config: ModelConfig, seed: int) -> "MoeModel":
        """Deterministic initialization: every weight matrix is uniform in
        +-1/sqrt(fan_in); router bias rows start at zero (and draw nothing
        from the stream, so toggling the bias flag never shifts the other
        initial weights for a given seed)."""
        rng = np.random.default_rng(seed)

        def weight(fan_in, fan_out):
            bound = 1.0 / np.sqrt(fan_in)
            return ad.parameter(rng.uniform(-bound, bound, size=(fan_in, fan_out)))

        proj_vision = weight(config.d_vision, config.hidden)
        proj_text = weight(config.d_text, config.hidden)
        layers = []
        for _ in range(config.layers):
            router = RouterParams(
                gate=weight(config.hidden, config.experts),
                bias_vision=ad.parameter(np.zeros((1, config.experts))),
                bias_text=ad.parameter(np.zeros((1, config.experts))),
                modality_bias_enabled=config.modality_bias_enabled,
            )
            experts = [
                ExpertFfn(weight(config.hidden, config.ffn_hidden),
                          weight(config.ffn_hidden, config.hidden))
                for _ in range(config.experts)
            ]
            layers.append(MoeLayer(router, experts))
        head = weight(config.hidden, config.classes)
        return cls(config, proj_vision, proj_text, layers, head)


def parameters(model: MoeModel) -> list[tuple[str, Tensor]]:
    """Named parameters in a fixed order. Router bias rows appear only
    when the modality bias is enabled, so a disabled model never feeds
    them to the optimizer."""
    out = [("proj_vision", model.proj_vision), ("proj_text", model.proj_text)]
    for li, layer in enumerate(model.moe_layers):
        out.append((f"layer{li}.gate", layer.router.gate))
        if model.config.modality_bias_enabled:
            out.append((f"layer{li}.bias_vision", layer.router.bias_vision))
            out.append((f"layer{li}.bias_text", layer.router.bias_text))
        for ei, expert in enumerate(layer.experts):
            out.append((f"layer{li}.expert{ei}.w1", expert.w1))
            out.append((f"layer{li}.expert{ei}.w2", expert.w2))
    out.append(("head", model.head))
    return out


def _combine_experts(layer: MoeLayer, x: Tensor, outcome: RoutingOutcome) -> Tensor:
    """Residual sparse combine: gather each expert's tokens, run the FFN
    on the sub-batch, scale by that expert's renormalized weight column,
    scatter back."""
    n = x.rows
    e = len(layer.experts)
    hidden = x.cols
    y = x
    for ei in range(e):
        rows = np.flatnonzero((outcome.selected == ei).any(axis=1))
        if rows.size == 0:
            continue
        sub = ad.gather_rows(x, rows)
        ffn_out = layer.experts[ei](sub)
        column = np.zeros((e, 1))
        column[ei, 0] = 1.0
        w_col = ad.matmul(ad.gather_rows(outcome.weights, rows), ad.constant(column))
        scaled = ad.mul(ad.matmul(w_col, ad.ones(1, hidden)), ffn_out)
        y = ad.add(y, ad.scatter_rows(scaled, rows, n))
    return y


def forward(model: MoeModel, batch) -> tuple[Tensor, list[tuple[RoutingOutcome, MrdStats | None]]]:
    """Run the classifier. `batch` is a synthetic batch with per-modality
    feature blocks (see smarlab.data.SynthBatch). Returns class logits and,
    per layer, the routing outcome with its MRD statistics (None when the
    batch held a single modality)."""
    cfg = model.config
    modality = np.asarray(batch.modality, dtype=np.int64)
    n = modality.shape[0]

    vis_rows = np.flatnonzero(modality == VISION)
    txt_rows = np.flatnonzero(modality == TEXT)
    parts = []
    if vis_rows.size:
        emb = ad.matmul(ad.constant(batch.vision), model.proj_vision)
        parts.append(ad.scatter_rows(emb, vis_rows, n))
    if txt_rows.size:
        emb = ad.matmul(ad.constant(batch.text), model.proj_text)
        parts.append(ad.scatter_rows(emb, txt_rows, n))
    x = parts[0] if len(parts) == 1 else ad.add(parts[0], parts[1])

    per_layer = []
    for li, layer in enumerate(model.moe_layers):
        tokens = TokenBatch(x, modality)
        outcome = route(layer.router, tokens, cfg.top_k)
        try:
            stats = compute_mrd(outcome, tokens, layer_index=li)
        except MrdUndefinedError:
            stats = None
        per_layer.append((outcome, stats))
        x = _combine_experts(layer, x, outcome)

    logits = ad.matmul(x, model.head)
    return logits, per_layer


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(model: MoeModel, path, extra: dict | None = None) -> None:
    """Single-file .npz: every named parameter matrix plus a JSON metadata
    entry (schema version, model config and its hash, optional extras such
    as the training configuration)."""
    named = dict(parameters(model))
    # bias rows are part of the model even when excluded from the optimizer
    for li, layer in enumerate(model.moe_layers):
        named.setdefault(f"layer{li}.bias_vision", layer.router.bias_vision)
        named.setdefault(f"layer{li}.bias_text", layer.router.bias_text)
    meta = {
        "schema": CHECKPOINT_SCHEMA,
        "config": asdict(model.config),
        "config_hash": model.config.content_hash(),
        "extra": extra or {},
    }
    arrays = {name: t.values for name, t in named.items()}
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path) -> tuple[MoeModel, dict]:
    """Rebuild a model from a checkpoint; validates schema version, config
    hash, presence and shape of every expected matrix. Returns the model
    and the 'extra' metadata dict stored at save time."""
    try:
        with np.load(path) as blob:
            arrays = {k: blob[k] for k in blob.files}
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}")
    except Exception as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}")

    if "__meta__" not in arrays:
        raise CheckpointError(f"{path}: missing metadata entry")
    meta = json.loads(arrays.pop("__meta__").tobytes().decode("utf-8"))
    if meta.get("schema") != CHECKPOINT_SCHEMA:
        raise CheckpointError(
            f"{path}: schema {meta.get('schema')} unsupported (want {CHECKPOINT_SCHEMA})"
        )
    try:
        config = ModelConfig(**meta["config"])
    except (KeyError, TypeError, ParameterError) as exc:
        raise CheckpointError(f"{path}: bad model config in metadata: {exc}")
    if config.content_hash() != meta.get("config_hash"):
        raise CheckpointError(f"{path}: config hash mismatch")

    model = MoeModel.build(config, seed=0)
    expected = dict(parameters(model))
    for li, layer in enumerate(model.moe_layers):
        expected.setdefault(f"layer{li}.bias_vision", layer.router.bias_vision)
        expected.setdefault(f"layer{li}.bias_text", layer.router.bias_text)
    for name, tensor in expected.items():
        if name not in arrays:
            raise CheckpointError(f"{path}: missing parameter {name}")
        if arrays[name].shape != tensor.values.shape:
            raise CheckpointError(
                f"{path}: {name} has shape {arrays[name].shape}, want {tensor.values.shape}"
            )
        tensor.values = np.ascontiguousarray(arrays[name], dtype=np.float64)
    return model, meta.get("extra", {})
