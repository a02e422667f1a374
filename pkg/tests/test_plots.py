"""SVG rendering: box panels, p-value scatters, artifact emission."""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET

import pytest

from bslbench.bench import PairwiseComparison, RunRecord, compare_topologies
from bslbench.evaluation import boxplot_summary
from bslbench.plots import emit_plots, render_box_panel, render_pvalue_scatter


def mk_record(topology="B", sens=0.5, rep=0, **overrides) -> RunRecord:
    base = dict(
        topology=topology,
        gamma=0.25 if topology == "B" else 1.25,
        model="linear",
        n_nodes=8,
        sigma=1.0,
        sample_size=64,
        algorithm="pc_stable",
        rep=rep,
        run_seed=rep,
        sensitivity=sens,
        specificity=0.9,
        tp=3,
        fp=1,
        fn=1,
        tn=10,
        max_in_degree=2,
        n_ci_tests=40,
        runtime_ms=None,
        status="ok",
    )
    base.update(overrides)
    return RunRecord(**base)


def grid_records(models=("linear",), reps=20) -> list[RunRecord]:
    records = []
    for model in models:
        for algorithm in ("pc_stable", "grow_shrink", "fast_iamb"):
            for rep in range(reps):
                records.append(
                    mk_record("B", 0.85 + 0.001 * rep, rep,
                              model=model, algorithm=algorithm)
                )
                records.append(
                    mk_record("U", 0.20 + 0.001 * rep, rep,
                              model=model, algorithm=algorithm)
                )
    return records


def assert_valid_svg(text: str) -> None:
    root = ET.fromstring(text)
    assert root.tag == "{http://www.w3.org/2000/svg}svg"


def attr_values(svg: str, tag: str, cls: str, attr: str) -> list[float]:
    pattern = rf'<{tag} class="{cls}"[^>]*\b{attr}="([-0-9.]+)"'
    return [float(m) for m in re.findall(pattern, svg)]


# ---------------------------------------------------------------------------
# Box panels
# ---------------------------------------------------------------------------


def test_box_panel_rejects_empty_and_bad_range():
    with pytest.raises(ValueError):
        render_box_panel([], "empty")
    summary = boxplot_summary([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        render_box_panel([("a", summary)], "bad", y_range=(1.0, 1.0))
    with pytest.raises(ValueError):
        render_box_panel([("a", summary)], "bad", y_range=(0.0, float("inf")))


def test_box_panel_single_glyph():
    summary = boxplot_summary([0.4, 0.5, 0.5, 0.6])
    svg = render_box_panel([("B/pc", summary)], "one box", y_range=(0.0, 1.0))
    assert_valid_svg(svg)
    assert svg.count('<rect class="box"') == 1
    assert svg.count('class="median"') == 1
    assert svg.count('class="whisker"') == 2
    assert ">one box<" in svg
    assert ">B/pc<" in svg


def test_box_panel_median_geometry():
    # median 0.5 of y_range (0, 1) sits halfway down the 214px plot area
    summary = boxplot_summary([0.5, 0.5, 0.5])
    svg = render_box_panel([("g", summary)], "geom", y_range=(0.0, 1.0))
    (y_med,) = attr_values(svg, "line", "median", "y1")
    assert y_med == pytest.approx(34.0 + 0.5 * 214.0)


def test_box_panel_degenerate_box_keeps_visible_height():
    summary = boxplot_summary([0.5, 0.5, 0.5, 0.5])
    svg = render_box_panel([("g", summary)], "flat", y_range=(0.0, 1.0))
    (height,) = attr_values(svg, "rect", "box", "height")
    assert height == 0.5  # IQR of zero still renders a sliver


def test_box_panel_outlier_circles():
    summary = boxplot_summary([1.0, 2.0, 2.5, 3.0, 3.5, 4.0, 50.0])
    svg = render_box_panel([("g", summary)], "outliers")
    assert svg.count('<circle class="outlier"') == 1


def test_box_panel_infers_padded_range():
    summary = boxplot_summary([2.0, 2.0])
    svg = render_box_panel([("g", summary)], "flat range")  # lo == hi
    assert_valid_svg(svg)


def test_box_panel_group_order_left_to_right():
    a = boxplot_summary([0.1, 0.2])
    b = boxplot_summary([0.8, 0.9])
    svg = render_box_panel([("left", a), ("right", b)], "two", y_range=(0.0, 1.0))
    assert svg.index(">left<") < svg.index(">right<")
    xs = attr_values(svg, "rect", "box", "x")
    assert xs == sorted(xs)


# ---------------------------------------------------------------------------
# P-value scatters
# ---------------------------------------------------------------------------


def make_comparison(p_value, group=("linear", 8, 1.0, "pc_stable"),
                    method="exact") -> PairwiseComparison:
    return PairwiseComparison(
        ("model", "n_nodes", "sigma", "algorithm"), group,
        "B", "U", 5, 5, 15.0, p_value, method,
        None if p_value is None else p_value < 0.05,
    )


def test_pvalue_scatter_requires_computable_rows():
    with pytest.raises(ValueError):
        render_pvalue_scatter([make_comparison(None, method="missing")], 0.05, "t")


def test_pvalue_scatter_skips_missing_rows():
    rows = [make_comparison(0.01), make_comparison(None, method="missing")]
    svg = render_pvalue_scatter(rows, 0.05, "scatter")
    assert_valid_svg(svg)
    assert svg.count('<circle class="pvalue"') == 1


def test_pvalue_scatter_alpha_line_and_label():
    svg = render_pvalue_scatter([make_comparison(0.2)], 0.05, "t")
    assert svg.count('class="alpha-line"') == 1
    assert "alpha=0.05" in svg


def test_pvalue_scatter_log_scale_geometry():
    # smaller p-values sit further down (larger SVG y) than the alpha line
    rows = [
        make_comparison(0.001, group=("linear", 8, 1.0, "pc_stable")),
        make_comparison(0.5, group=("linear", 8, 1.0, "grow_shrink")),
    ]
    svg = render_pvalue_scatter(rows, 0.05, "geom")
    (y_alpha,) = attr_values(svg, "line", "alpha-line", "y1")
    y_small, y_large = attr_values(svg, "circle", "pvalue", "cy")
    assert y_small > y_alpha  # p = 0.001 rejected, below the threshold line
    assert y_large < y_alpha  # p = 0.5 retained, above it
    assert y_small > y_large


def test_pvalue_scatter_slot_labels_compact():
    svg = render_pvalue_scatter(
        [make_comparison(0.01, group=("linear", 16, 3.0, "fast_iamb"))], 0.05, "t"
    )
    assert ">n16/s3/fiamb<" in svg


# ---------------------------------------------------------------------------
# emit_plots
# ---------------------------------------------------------------------------


def test_emit_plots_file_set(tmp_path):
    records = grid_records(models=("linear", "nonlinear"))
    written = emit_plots(records, tmp_path, alpha=0.05, pair=("B", "U"))
    names = sorted(p.name for p in written)
    assert names == [
        "box_linear_n8_s1.svg",
        "box_nonlinear_n8_s1.svg",
        "pvalues_linear.svg",
        "pvalues_nonlinear.svg",
    ]
    assert sorted(p.name for p in tmp_path.iterdir()) == names
    for path in written:
        assert_valid_svg(path.read_text(encoding="utf-8"))


def test_emit_plots_box_glyph_count(tmp_path):
    written = emit_plots(grid_records(), tmp_path)
    box = next(p for p in written if p.name.startswith("box_"))
    svg = box.read_text(encoding="utf-8")
    # 2 topologies x 3 algorithms, ordered topology-major then algorithm rank
    assert svg.count('<rect class="box"') == 6
    labels = ["B/pc", "B/gs", "B/fiamb", "U/pc", "U/gs", "U/fiamb"]
    positions = [svg.index(f">{label}<") for label in labels]
    assert positions == sorted(positions)


def test_emit_plots_pvalue_panel_shows_rejections(tmp_path):
    written = emit_plots(grid_records(), tmp_path)
    scatter = next(p for p in written if p.name.startswith("pvalues_"))
    svg = scatter.read_text(encoding="utf-8")
    assert svg.count('<circle class="pvalue"') == 3  # one per algorithm
    (y_alpha,) = attr_values(svg, "line", "alpha-line", "y1")
    for cy in attr_values(svg, "circle", "pvalue", "cy"):
        assert cy > y_alpha  # every group strongly separated, so p < alpha


def test_emit_plots_warns_and_skips_unscorable_panel(tmp_path):
    records = grid_records()
    failed = [
        mk_record("B", None, rep=i, n_nodes=16,
                  status="failed: RuntimeError: x")
        for i in range(3)
    ]
    with pytest.warns(UserWarning, match="n_nodes=16.*panel skipped"):
        written = emit_plots(records + failed, tmp_path)
    names = {p.name for p in written}
    assert "box_linear_n8_s1.svg" in names
    assert not any("n16" in n for n in names)


def test_emit_plots_all_failed_warns_everything_away(tmp_path):
    failed = [
        mk_record("B", None, rep=i, status="failed: RuntimeError: x")
        for i in range(3)
    ]
    with pytest.warns(UserWarning):
        written = emit_plots(failed, tmp_path)
    assert written == []
    assert sorted(tmp_path.iterdir()) == []


def test_emit_plots_warns_when_pair_side_absent(tmp_path):
    records = [
        mk_record("B", 0.5 + 0.001 * i, rep=i) for i in range(6)
    ]  # no "U" runs at all
    with pytest.warns(UserWarning, match="B vs U comparisons.*skipped"):
        written = emit_plots(records, tmp_path)
    assert [p.name for p in written] == ["box_linear_n8_s1.svg"]


def test_emit_plots_matches_compare_topologies(tmp_path):
    records = grid_records()
    written = emit_plots(records, tmp_path)
    scatter = next(p for p in written if p.name.startswith("pvalues_"))
    svg = scatter.read_text(encoding="utf-8")
    rows = [c for c in compare_topologies(records) if c.p_value is not None]
    assert svg.count('<circle class="pvalue"') == len(rows)
