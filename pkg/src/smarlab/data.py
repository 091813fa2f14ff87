"""Synthetic two-modality classification data.

Each modality owns a set of Gaussian clusters in its own feature space.
Cluster centers are unit directions scaled to CENTER_RADIUS plus a
constant per-modality offset (+MODALITY_OFFSET on every vision
coordinate, -MODALITY_OFFSET on every text coordinate), so the two
modalities differ in their marginal statistics by construction and a
router can separate them from content alone. A token's class is its
cluster index modulo the class count.

Batches are pure functions of (seed, step): the per-batch RNG is seeded
with SeedSequence([seed, step]) and the centers depend on the seed only.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from smarlab.errors import InputError, ParameterError
from smarlab.router import TEXT, VISION

CENTER_RADIUS = 2.0
MODALITY_OFFSET = 0.25
_CENTER_STREAM = 7919  # distinguishes the center draw from batch draws
BATCH_SCHEMA = 1


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    vision_fraction: float = 0.8
    tokens_per_batch: int = 64
    d_vision: int = 16
    d_text: int = 12
    classes: int = 8
    clusters_per_modality: int = 8
    cluster_spread: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.vision_fraction < 1.0:
            raise ParameterError(
                f"SynthConfig: vision_fraction must lie strictly in (0,1), got {self.vision_fraction}"
            )
        if self.seed < 0:
            raise ParameterError("SynthConfig: seed must be nonnegative")
        if self.tokens_per_batch < 2:
            raise ParameterError("SynthConfig: need at least 2 tokens per batch")
        for name in ("d_vision", "d_text", "classes", "clusters_per_modality"):
            if getattr(self, name) < 1:
                raise ParameterError(f"SynthConfig: {name} must be >= 1")
        if self.cluster_spread < 0:
            raise ParameterError("SynthConfig: cluster_spread must be >= 0")


@dataclass
class SynthBatch:
    """One mini-batch. Token i is vision when modality[i] == 0 and then
    consumes the next row of `vision`, otherwise the next row of `text`;
    classes[i] is its target label."""

    vision: np.ndarray    # n_vision x d_vision
    text: np.ndarray      # n_text x d_text
    modality: np.ndarray  # n_tokens, values 0/1
    classes: np.ndarray   # n_tokens, int64

    @property
    def n_tokens(self) -> int:
        return self.modality.shape[0]

    @property
    def n_vision(self) -> int:
        return self.vision.shape[0]

    @property
    def n_text(self) -> int:
        return self.text.shape[0]


def cluster_centers(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic per-modality center matrices (clusters x dims)."""
    rng = np.random.default_rng([cfg.seed, _CENTER_STREAM])
    centers = []
    for dims, offset in ((cfg.d_vision, MODALITY_OFFSET), (cfg.d_text, -MODALITY_OFFSET)):
        raw = rng.standard_normal((cfg.clusters_per_modality, dims))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        centers.append(raw * CENTER_RADIUS + offset)
    return centers[0], centers[1]


def modality_split(cfg: SynthConfig) -> tuple[int, int]:
    """Deterministic per-batch token counts; both modalities always get at
    least one token."""
    n = cfg.tokens_per_batch
    n_vision = int(round(cfg.vision_fraction * n))
    n_vision = min(max(n_vision, 1), n - 1)
    return n_vision, n - n_vision


def generate_batch(cfg: SynthConfig, step: int) -> SynthBatch:
    if step < 0:
        raise InputError(f"generate_batch: step must be >= 0, got {step}")
    rng = np.random.default_rng([cfg.seed, int(step)])
    centers_v, centers_t = cluster_centers(cfg)
    n_vision, n_text = modality_split(cfg)

    modality = np.concatenate([
        np.full(n_vision, VISION, dtype=np.int64),
        np.full(n_text, TEXT, dtype=np.int64),
    ])
    rng.shuffle(modality)

    cluster_v = rng.integers(0, cfg.clusters_per_modality, size=n_vision)
    cluster_t = rng.integers(0, cfg.clusters_per_modality, size=n_text)
    vision = centers_v[cluster_v] + cfg.cluster_spread * rng.standard_normal((n_vision, cfg.d_vision))
    text = centers_t[cluster_t] + cfg.cluster_spread * rng.standard_normal((n_text, cfg.d_text))

    classes = np.empty(cfg.tokens_per_batch, dtype=np.int64)
    classes[modality == VISION] = cluster_v % cfg.classes
    classes[modality == TEXT] = cluster_t % cfg.classes
    return SynthBatch(vision=vision, text=text, modality=modality, classes=classes)


# ---------------------------------------------------------------------------
# batch dumps (JSONL, one header record then one record per batch)


def dump_batches(cfg: SynthConfig, steps, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"schema_version": BATCH_SCHEMA, "kind": "smarlab-batches", "config": asdict(cfg)}
        fh.write(json.dumps(header) + "\n")
        for step in steps:
            batch = generate_batch(cfg, step)
            record = {
                "step": int(step),
                "modality": batch.modality.tolist(),
                "classes": batch.classes.tolist(),
                "vision": batch.vision.tolist(),
                "text": batch.text.tolist(),
            }
            fh.write(json.dumps(record) + "\n")


def load_batches(path) -> tuple[SynthConfig, list[tuple[int, SynthBatch]]]:
    with open(path, encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("kind") != "smarlab-batches":
        raise InputError(f"{path}: not a batch dump")
    if lines[0].get("schema_version") != BATCH_SCHEMA:
        raise InputError(f"{path}: unsupported batch schema {lines[0].get('schema_version')}")
    cfg = SynthConfig(**lines[0]["config"])
    out = []
    for rec in lines[1:]:
        batch = SynthBatch(
            vision=np.asarray(rec["vision"], dtype=np.float64).reshape(-1, cfg.d_vision),
            text=np.asarray(rec["text"], dtype=np.float64).reshape(-1, cfg.d_text),
            modality=np.asarray(rec["modality"], dtype=np.int64),
            classes=np.asarray(rec["classes"], dtype=np.int64),
        )
        out.append((rec["step"], batch))
    return cfg, out
