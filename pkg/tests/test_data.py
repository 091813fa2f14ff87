"""Synthetic data: determinism, split arithmetic, modality separation,
learnability in the small-spread limit, dump/load fidelity."""

import numpy as np
import pytest
from sklearn.linear_model import LogisticRegression

from smarlab.data import (
    MODALITY_OFFSET,
    SynthConfig,
    cluster_centers,
    dump_batches,
    generate_batch,
    load_batches,
    modality_split,
)
from smarlab.errors import InputError, ParameterError


def test_batches_are_pure_functions_of_seed_and_step():
    cfg = SynthConfig(seed=3)
    a = generate_batch(cfg, 7)
    b = generate_batch(cfg, 7)
    np.testing.assert_array_equal(a.vision, b.vision)
    np.testing.assert_array_equal(a.text, b.text)
    np.testing.assert_array_equal(a.modality, b.modality)
    np.testing.assert_array_equal(a.classes, b.classes)

    c = generate_batch(cfg, 8)
    assert not np.array_equal(a.modality, c.modality) or not np.array_equal(a.vision, c.vision)

    d = generate_batch(SynthConfig(seed=4), 7)
    assert not np.array_equal(a.vision, d.vision)


def test_modality_split_is_deterministic_rounding():
    assert modality_split(SynthConfig(vision_fraction=0.5, tokens_per_batch=64)) == (32, 32)
    assert modality_split(SynthConfig(vision_fraction=0.8, tokens_per_batch=64)) == (51, 13)
    # extreme fractions still leave one token for the minority modality
    assert modality_split(SynthConfig(vision_fraction=0.99, tokens_per_batch=10)) == (9, 1)

    batch = generate_batch(SynthConfig(vision_fraction=0.5, tokens_per_batch=64), 0)
    assert batch.n_vision == 32 and batch.n_text == 32
    assert (batch.modality == 0).sum() == 32


def test_centers_fixed_across_steps():
    cfg = SynthConfig(seed=9)
    cv1, ct1 = cluster_centers(cfg)
    cv2, ct2 = cluster_centers(cfg)
    np.testing.assert_array_equal(cv1, cv2)
    np.testing.assert_array_equal(ct1, ct2)
    assert cv1.shape == (cfg.clusters_per_modality, cfg.d_vision)
    assert ct1.shape == (cfg.clusters_per_modality, cfg.d_text)


def test_modality_marginals_are_separated():
    cfg = SynthConfig(seed=5, tokens_per_batch=512, vision_fraction=0.5)
    means_v, means_t = [], []
    for step in range(4):
        batch = generate_batch(cfg, step)
        means_v.append(batch.vision.mean())
        means_t.append(batch.text.mean())
    separation = np.mean(means_v) - np.mean(means_t)
    # construction places vision at +offset and text at -offset; cluster
    # directions are zero-mean so the grand means sit near +-offset
    assert np.mean(means_v) > 0.5 * MODALITY_OFFSET
    assert np.mean(means_t) < -0.5 * MODALITY_OFFSET
    assert separation >= 1.5 * MODALITY_OFFSET


def test_vanishing_spread_is_linearly_separable():
    """With spread -> 0 a linear probe on the (block-padded) features
    reaches 100% accuracy; the probe is an external oracle, not the
    package's own classifier."""
    cfg = SynthConfig(seed=2, tokens_per_batch=256, vision_fraction=0.5,
                      cluster_spread=1e-3)

    def embed(batch):
        n = batch.n_tokens
        x = np.zeros((n, cfg.d_vision + cfg.d_text))
        x[batch.modality == 0, :cfg.d_vision] = batch.vision
        x[batch.modality == 1, cfg.d_vision:] = batch.text
        return x

    train, test = generate_batch(cfg, 0), generate_batch(cfg, 1)
    probe = LogisticRegression(max_iter=2000)
    probe.fit(embed(train), train.classes)
    assert probe.score(embed(test), test.classes) == 1.0


def test_class_labels_follow_clusters():
    cfg = SynthConfig(seed=1, cluster_spread=1e-6, tokens_per_batch=128,
                      clusters_per_modality=8, classes=8)
    batch = generate_batch(cfg, 0)
    centers_v, _ = cluster_centers(cfg)
    vision_classes = batch.classes[batch.modality == 0]
    for row, cls in zip(batch.vision, vision_classes):
        nearest = np.argmin(np.linalg.norm(centers_v - row, axis=1))
        assert nearest % cfg.classes == cls


def test_config_validation():
    with pytest.raises(ParameterError):
        SynthConfig(vision_fraction=0.0)
    with pytest.raises(ParameterError):
        SynthConfig(vision_fraction=1.0)
    with pytest.raises(ParameterError):
        SynthConfig(seed=-1)
    with pytest.raises(ParameterError):
        SynthConfig(cluster_spread=-0.1)
    with pytest.raises(InputError):
        generate_batch(SynthConfig(), -1)


def test_dump_and_load_roundtrip(tmp_path):
    cfg = SynthConfig(seed=13, tokens_per_batch=16)
    path = tmp_path / "batches.jsonl"
    dump_batches(cfg, range(3), path)

    loaded_cfg, batches = load_batches(path)
    assert loaded_cfg == cfg
    assert [s for s, _ in batches] == [0, 1, 2]
    for step, loaded in batches:
        fresh = generate_batch(cfg, step)
        np.testing.assert_array_equal(loaded.vision, fresh.vision)
        np.testing.assert_array_equal(loaded.text, fresh.text)
        np.testing.assert_array_equal(loaded.modality, fresh.modality)
        np.testing.assert_array_equal(loaded.classes, fresh.classes)


def test_load_rejects_foreign_files(tmp_path):
    path = tmp_path / "junk.jsonl"
    path.write_text('{"kind": "other"}\n')
    with pytest.raises(InputError):
        load_batches(path)
