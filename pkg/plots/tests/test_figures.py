import csv

import pytest

from smarplots import (
    CURVE_COLUMNS,
    PREF_COLUMNS,
    PlotSpec,
    SchemaError,
    describe,
    render,
)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def curve_csv(path, scale=1.0):
    rows = [[layer, 0.1 * scale * (layer + 1), 0.2 * scale * (layer + 1),
             0.3 * scale * (layer + 1)] for layer in range(4)]
    return write_csv(path, CURVE_COLUMNS, rows)


def pref_csv(path, layers=2, experts=3):
    rows = []
    for layer in range(layers):
        shares = [(e + 1) / sum(range(1, experts + 1)) for e in range(experts)]
        for e in range(experts):
            rows.append([layer, e, shares[e], shares[experts - 1 - e]])
    return write_csv(path, PREF_COLUMNS, rows)


# --- curve figures ---------------------------------------------------------


def test_curve_render_writes_image(tmp_path):
    src = curve_csv(tmp_path / "run.csv")
    out = tmp_path / "fig.png"
    summary = render(PlotSpec(kind="curve", inputs=(src,), output=out))
    assert out.exists() and out.stat().st_size > 0
    assert summary.kind == "curve"
    assert summary.n_series == 1
    assert summary.series_labels == ("run",)
    assert not summary.placeholder


def test_curve_overlay_one_series_per_input(tmp_path):
    srcs = tuple(curve_csv(tmp_path / f"band_{i}.csv", scale=i + 1.0) for i in range(3))
    summary = describe(PlotSpec(kind="curve", inputs=srcs))
    assert summary.n_series == 3
    assert summary.series_labels == ("band_0", "band_1", "band_2")
    assert summary.x_label == "layer"
    assert summary.y_label == "modality distance d"


def test_curve_duplicate_stems_get_directory_labels(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    srcs = (curve_csv(tmp_path / "a" / "mrd_curves.csv"),
            curve_csv(tmp_path / "b" / "mrd_curves.csv"))
    summary = describe(PlotSpec(kind="curve", inputs=srcs))
    assert summary.series_labels == ("a/mrd_curves", "b/mrd_curves")


def test_curve_band_recorded(tmp_path):
    src = curve_csv(tmp_path / "run.csv")
    summary = describe(PlotSpec(kind="curve", inputs=(src,), band=(1.5, 2.0)))
    assert summary.band == (1.5, 2.0)


def test_header_only_csv_renders_placeholder(tmp_path):
    src = write_csv(tmp_path / "empty.csv", CURVE_COLUMNS, [])
    out = tmp_path / "fig.png"
    summary = render(PlotSpec(kind="curve", inputs=(src,), output=out))
    assert out.exists() and out.stat().st_size > 0
    assert summary.placeholder
    assert summary.n_series == 0
    assert summary.series_labels == ()


def test_zero_byte_csv_renders_placeholder(tmp_path):
    src = tmp_path / "none.csv"
    src.touch()
    summary = describe(PlotSpec(kind="curve", inputs=(src,)))
    assert summary.placeholder


def test_wrong_header_raises_schema_error(tmp_path):
    src = write_csv(tmp_path / "bad.csv", ["layer", "low", "mid", "high"],
                    [[0, 0.1, 0.2, 0.3]])
    with pytest.raises(SchemaError) as err:
        describe(PlotSpec(kind="curve", inputs=(src,)))
    assert "d_mean" in str(err.value)
    assert "bad.csv" in str(err.value)


def test_malformed_row_raises_schema_error(tmp_path):
    src = write_csv(tmp_path / "bad.csv", CURVE_COLUMNS, [[0, 0.1, "oops", 0.3]])
    with pytest.raises(SchemaError) as err:
        describe(PlotSpec(kind="curve", inputs=(src,)))
    assert "oops" in str(err.value)


# --- pref figures ----------------------------------------------------------


def test_pref_render_one_axes_per_layer(tmp_path):
    src = pref_csv(tmp_path / "pref.csv", layers=3, experts=4)
    out = tmp_path / "fig.png"
    summary = render(PlotSpec(kind="pref", inputs=(src,), output=out))
    assert out.exists() and out.stat().st_size > 0
    assert summary.kind == "pref"
    assert summary.n_axes == 3
    assert summary.n_series == 2
    assert summary.series_labels == ("vision", "text")
    assert summary.x_label == "expert"


def test_pref_missing_modality_marker_renders(tmp_path):
    rows = [[0, 0, 0.5, "missing"], [0, 1, 0.5, "missing"]]
    src = write_csv(tmp_path / "pref.csv", PREF_COLUMNS, rows)
    summary = describe(PlotSpec(kind="pref", inputs=(src,)))
    assert summary.n_axes == 1
    assert not summary.placeholder


def test_pref_single_expert_collapse_case(tmp_path):
    rows = [[0, e, 1.0 if e == 0 else 0.0, 1.0 if e == 0 else 0.0]
            for e in range(4)]
    src = write_csv(tmp_path / "collapse.csv", PREF_COLUMNS, rows)
    out = tmp_path / "fig.png"
    summary = render(PlotSpec(kind="pref", inputs=(src,), output=out))
    assert out.exists()
    assert not summary.placeholder


def test_pref_header_only_placeholder(tmp_path):
    src = write_csv(tmp_path / "pref.csv", PREF_COLUMNS, [])
    summary = describe(PlotSpec(kind="pref", inputs=(src,)))
    assert summary.placeholder


def test_pref_wrong_header_diagnostic(tmp_path):
    src = write_csv(tmp_path / "pref.csv", ["layer", "expert", "v", "t"],
                    [[0, 0, 0.5, 0.5]])
    with pytest.raises(SchemaError) as err:
        describe(PlotSpec(kind="pref", inputs=(src,)))
    assert "vision_share" in str(err.value)


# --- spec validation -------------------------------------------------------


def test_pref_rejects_multiple_inputs(tmp_path):
    srcs = (pref_csv(tmp_path / "a.csv"), pref_csv(tmp_path / "b.csv"))
    with pytest.raises(ValueError):
        PlotSpec(kind="pref", inputs=srcs)


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(ValueError):
        PlotSpec(kind="heatmap", inputs=(tmp_path / "a.csv",))


def test_no_inputs_rejected():
    with pytest.raises(ValueError):
        PlotSpec(kind="curve", inputs=())


def test_inverted_band_rejected(tmp_path):
    with pytest.raises(ValueError):
        PlotSpec(kind="curve", inputs=(tmp_path / "a.csv",), band=(2.0, 1.5))


def test_render_without_output_rejected(tmp_path):
    src = curve_csv(tmp_path / "run.csv")
    with pytest.raises(ValueError):
        render(PlotSpec(kind="curve", inputs=(src,)))


def test_missing_input_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        describe(PlotSpec(kind="curve", inputs=(tmp_path / "nope.csv",)))


# --- purity and determinism ------------------------------------------------


def test_render_does_not_mutate_inputs_and_is_deterministic(tmp_path):
    src = curve_csv(tmp_path / "run.csv")
    before = src.read_bytes()
    out_a, out_b = tmp_path / "a.png", tmp_path / "b.png"
    render(PlotSpec(kind="curve", inputs=(src,), output=out_a, band=(1.5, 2.0)))
    render(PlotSpec(kind="curve", inputs=(src,), output=out_b, band=(1.5, 2.0)))
    assert src.read_bytes() == before
    assert out_a.read_bytes() == out_b.read_bytes()


def test_rerender_to_same_path_idempotent(tmp_path):
    src = pref_csv(tmp_path / "pref.csv")
    out = tmp_path / "fig.png"
    render(PlotSpec(kind="pref", inputs=(src,), output=out))
    first = out.read_bytes()
    render(PlotSpec(kind="pref", inputs=(src,), output=out))
    assert out.read_bytes() == first
