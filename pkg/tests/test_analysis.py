"""Diagnostics over evaluation statistics: curve arithmetic, preference
normalization, collapse detection, and the CSV artifacts."""

import csv
import math

import numpy as np
import pytest

from smarlab.analysis import (
    COLLAPSE_COLUMNS,
    EXPERT_PREF_COLUMNS,
    MRD_CURVES_COLUMNS,
    detect_collapse,
    expert_preference,
    mean_selection_entropy,
    mrd_curves,
    write_collapse_csv,
    write_expert_pref_csv,
    write_mrd_curves_csv,
)
from smarlab.errors import ParameterError
from smarlab.trainer import EvalStats


def make_stats(d_values, counts_vision, counts_text, top_k=2,
               tokens_vision=None, tokens_text=None):
    cv = np.atleast_2d(np.asarray(counts_vision, dtype=np.float64))
    ct = np.atleast_2d(np.asarray(counts_text, dtype=np.float64))
    n_layers, n_experts = cv.shape
    first_v = cv[0].sum() if n_layers else 0
    first_t = ct[0].sum() if n_layers else 0
    tv = tokens_vision if tokens_vision is not None else int(first_v / top_k)
    tt = tokens_text if tokens_text is not None else int(first_t / top_k)
    return EvalStats(
        n_batches=max(len(v) for v in d_values) if d_values else 0,
        n_layers=n_layers,
        n_experts=n_experts,
        top_k=top_k,
        d_values=[list(v) for v in d_values],
        counts_vision=cv,
        counts_text=ct,
        tokens_vision=tv,
        tokens_text=tt,
        accuracy=None,
    )


def random_stats(rng, n_layers=3, n_experts=8, top_k=2, n_tokens=40, n_batches=6):
    """Counts built from actual random top-k draws so they satisfy the
    counting identities (sum over experts = k * tokens per modality)."""
    d_values = [list(rng.uniform(0, 3, size=n_batches)) for _ in range(n_layers)]
    n_vision = n_tokens // 2
    cv = np.zeros((n_layers, n_experts))
    ct = np.zeros((n_layers, n_experts))
    for layer in range(n_layers):
        for token in range(n_tokens * n_batches):
            experts = rng.choice(n_experts, size=top_k, replace=False)
            target = cv if token % n_tokens < n_vision else ct
            for e in experts:
                target[layer, e] += 1
    return make_stats(d_values, cv, ct, top_k,
                      tokens_vision=n_vision * n_batches,
                      tokens_text=(n_tokens - n_vision) * n_batches)


# ---------------------------------------------------------------------------
# mrd_curves


def test_curve_arithmetic_1_2_3():
    stats = make_stats([[1.0, 2.0, 3.0]], [[4, 4]], [[4, 4]])
    (curve,) = mrd_curves(stats)
    assert (curve.d_min, curve.d_mean, curve.d_max) == (1.0, 2.0, 3.0)


def test_curve_singleton_min_equals_mean_equals_max():
    stats = make_stats([[0.7]], [[4, 4]], [[4, 4]])
    (curve,) = mrd_curves(stats)
    assert curve.d_min == curve.d_mean == curve.d_max == 0.7


def test_curves_empty_input_is_empty_report():
    stats = make_stats([], np.zeros((0, 4)), np.zeros((0, 4)))
    assert mrd_curves(stats) == []
    stats = make_stats([[]], [[0, 0]], [[0, 0]], tokens_vision=0, tokens_text=0)
    assert mrd_curves(stats) == []


def test_curves_match_streaming_recomputation():
    rng = np.random.default_rng(17)
    stats = random_stats(rng)
    for curve in mrd_curves(stats):
        lo, hi, total, count = math.inf, -math.inf, 0.0, 0
        for d in stats.d_values[curve.layer]:
            lo, hi = min(lo, d), max(hi, d)
            total += d
            count += 1
        assert curve.d_min == lo and curve.d_max == hi
        assert curve.d_mean == pytest.approx(total / count, rel=1e-12)


def test_curves_are_batch_order_invariant():
    rng = np.random.default_rng(3)
    stats = random_stats(rng)
    shuffled = make_stats(
        [list(rng.permutation(v)) for v in stats.d_values],
        stats.counts_vision, stats.counts_text, stats.top_k,
        stats.tokens_vision, stats.tokens_text)
    for a, b in zip(mrd_curves(stats), mrd_curves(shuffled)):
        assert a.d_min == b.d_min and a.d_max == b.d_max
        assert a.d_mean == pytest.approx(b.d_mean, rel=1e-12)


def test_curve_ordering_invariant_on_random_stats():
    rng = np.random.default_rng(29)
    for _ in range(20):
        stats = random_stats(rng, n_layers=2, n_batches=5)
        for curve in mrd_curves(stats):
            assert 0.0 <= curve.d_min <= curve.d_mean <= curve.d_max


# ---------------------------------------------------------------------------
# expert_preference


def test_preference_shares_sum_to_one():
    rng = np.random.default_rng(5)
    stats = random_stats(rng)
    for pref in expert_preference(stats):
        assert sum(pref.vision_shares) == pytest.approx(1.0, abs=1e-12)
        assert sum(pref.text_shares) == pytest.approx(1.0, abs=1e-12)


def test_preference_hand_values():
    stats = make_stats([[1.0]], [[6, 2, 0, 0]], [[0, 0, 4, 4]])
    (pref,) = expert_preference(stats)
    assert pref.vision_shares == [0.75, 0.25, 0.0, 0.0]
    assert pref.text_shares == [0.0, 0.0, 0.5, 0.5]


def test_preference_missing_modality_marker():
    stats = make_stats([[1.0]], [[4, 4]], [[0, 0]], tokens_text=0)
    (pref,) = expert_preference(stats)
    assert pref.vision_shares is not None
    assert pref.text_shares is None


# ---------------------------------------------------------------------------
# detect_collapse


def test_collapse_all_tokens_on_one_expert():
    # K=1 and every token picks expert 0: load 1, entropy 0
    stats = make_stats([[0.1]], [[10, 0, 0, 0]], [[10, 0, 0, 0]], top_k=1)
    report = detect_collapse(stats, load_threshold=0.6)
    assert report.max_load == [1.0]
    assert report.entropy == [0.0]
    assert report.flagged == [0]


def test_collapse_uniform_routing_unflagged():
    # K=2, E=8, uniform selections: load k/E = 0.25, entropy ln 8
    cv = np.full((1, 8), 10.0)
    ct = np.full((1, 8), 10.0)
    stats = make_stats([[0.5]], cv, ct, top_k=2, tokens_vision=40, tokens_text=40)
    report = detect_collapse(stats, load_threshold=0.6)
    assert report.max_load == [pytest.approx(0.25)]
    assert report.entropy == [pytest.approx(math.log(8))]
    assert report.flagged == []


def test_collapse_flag_monotone_in_threshold():
    rng = np.random.default_rng(23)
    for _ in range(10):
        stats = random_stats(rng, n_layers=4)
        flags = [set(detect_collapse(stats, load_threshold=t).flagged)
                 for t in (0.3, 0.45, 0.6, 0.9)]
        for tighter, looser in zip(flags[1:], flags):
            assert tighter <= looser


def test_collapse_load_is_within_bounds():
    rng = np.random.default_rng(31)
    stats = random_stats(rng)
    report = detect_collapse(stats)
    for load in report.max_load:
        assert 1.0 / stats.n_experts <= load <= 1.0


@pytest.mark.parametrize("threshold", [0.0, 0.125, 1.5, -0.1])
def test_collapse_threshold_validation(threshold):
    stats = make_stats([[0.1]], [[4, 4, 4, 4, 4, 4, 4, 4]],
                       [[4, 4, 4, 4, 4, 4, 4, 4]])
    with pytest.raises(ParameterError):
        detect_collapse(stats, load_threshold=threshold)


def test_mean_selection_entropy():
    stats = make_stats([[0.1]], [[10, 0, 0, 0]], [[10, 0, 0, 0]], top_k=1)
    report = detect_collapse(stats)
    assert mean_selection_entropy(report) == 0.0
    rng = np.random.default_rng(41)
    stats = random_stats(rng)
    report = detect_collapse(stats)
    assert mean_selection_entropy(report) == pytest.approx(np.mean(report.entropy))


# ---------------------------------------------------------------------------
# CSV artifacts


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_mrd_curves_csv_schema(tmp_path):
    stats = make_stats([[1.0, 2.0]], [[4, 4]], [[4, 4]])
    path = tmp_path / "mrd_curves.csv"
    write_mrd_curves_csv(path, mrd_curves(stats))
    rows = read_rows(path)
    assert rows[0] == MRD_CURVES_COLUMNS
    assert rows[1][0] == "0"
    assert float(rows[1][1]) == 1.0
    assert float(rows[1][2]) == 1.5
    assert float(rows[1][3]) == 2.0


def test_csv_float_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(7)
    stats = random_stats(rng)
    curves = mrd_curves(stats)
    path = tmp_path / "mrd_curves.csv"
    write_mrd_curves_csv(path, curves)
    rows = read_rows(path)[1:]
    for row, curve in zip(rows, curves):
        assert float(row[1]) == curve.d_min
        assert float(row[2]) == curve.d_mean
        assert float(row[3]) == curve.d_max


def test_expert_pref_csv_schema(tmp_path):
    stats = make_stats([[1.0]], [[6, 2]], [[0, 0]], tokens_text=0)
    path = tmp_path / "expert_pref.csv"
    write_expert_pref_csv(path, expert_preference(stats))
    rows = read_rows(path)
    assert rows[0] == EXPERT_PREF_COLUMNS
    assert [r[1] for r in rows[1:]] == ["0", "1"]
    assert float(rows[1][2]) == 0.75
    # missing modality is an explicit textual marker, not a number
    assert rows[1][3] == "missing"


def test_collapse_csv_schema(tmp_path):
    stats = make_stats([[0.1]], [[10, 0, 0, 0]], [[10, 0, 0, 0]], top_k=1)
    path = tmp_path / "collapse.csv"
    write_collapse_csv(path, detect_collapse(stats, load_threshold=0.6))
    rows = read_rows(path)
    assert rows[0] == COLLAPSE_COLUMNS
    assert rows[1] == ["0", "1.0", "0.0", "1"]
