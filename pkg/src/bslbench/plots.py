"""Self-contained SVG rendering of benchmark results.

Two artifact kinds are produced, both as plain SVG strings with no plotting
dependency: box-whisker panels of sensitivity grouped by topology and
algorithm (one panel per model / node count / noise level), and per-model
p-value scatters on a log scale with the rejection threshold drawn as a
reference line.  Every drawn element carries a CSS class (``box``,
``median``, ``whisker``, ``outlier``, ``pvalue``, ``alpha-line``, ...) so
the files stay inspectable and testable.
"""

from __future__ import annotations

import math
import warnings
from pathlib import Path
from typing import Iterable, Sequence

from .bench import PairwiseComparison, RunRecord, compare_topologies
from .evaluation import BoxplotSummary, boxplot_summary
from .learners import ALGORITHMS

__all__ = ["render_box_panel", "render_pvalue_scatter", "emit_plots"]

_MARGIN_LEFT = 54.0
_MARGIN_RIGHT = 14.0
_MARGIN_TOP = 34.0
_MARGIN_BOTTOM = 72.0
_SLOT_WIDTH = 46.0
_BOX_WIDTH = 26.0
_PANEL_HEIGHT = 320.0


def _fmt(value: float) -> str:
    return f"{value:.2f}".rstrip("0").rstrip(".")


def _svg_document(width: float, height: float, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">'
    )
    style = (
        "<style>"
        "text{font-family:sans-serif;font-size:10px;fill:#222;}"
        ".title{font-size:12px;}"
        ".box{fill:#c6dbef;stroke:#333;}"
        ".median{stroke:#d62728;stroke-width:1.5;}"
        ".whisker,.cap{stroke:#333;}"
        ".outlier{fill:none;stroke:#555;}"
        ".axis{stroke:#000;}"
        ".gridline{stroke:#ddd;}"
        ".pvalue{fill:#1f77b4;}"
        ".alpha-line{stroke:#d62728;stroke-dasharray:4 3;}"
        "</style>"
    )
    return "\n".join([head, style, *body, "</svg>"]) + "\n"


def _line(x1: float, y1: float, x2: float, y2: float, cls: str) -> str:
    return (
        f'<line class="{cls}" x1="{_fmt(x1)}" y1="{_fmt(y1)}" '
        f'x2="{_fmt(x2)}" y2="{_fmt(y2)}"/>'
    )


def _text(x: float, y: float, content: str, cls: str, extra: str = "") -> str:
    return f'<text class="{cls}" x="{_fmt(x)}" y="{_fmt(y)}"{extra}>{content}</text>'


def render_box_panel(
    groups: Sequence[tuple[str, BoxplotSummary]],
    title: str,
    y_range: tuple[float, float] | None = None,
    y_label: str = "sensitivity",
) -> str:
    """Render labeled box-whisker glyphs side by side.

    Parameters
    ----------
    groups : sequence of (label, BoxplotSummary)
        One glyph per entry, drawn left to right.
    title : str
        Panel title.
    y_range : (float, float), optional
        Fixed vertical data range; inferred from the summaries (with 5%
        padding) when omitted.
    """
    if not groups:
        raise ValueError("cannot render an empty panel")
    if y_range is None:
        lo = min(s.minimum for _, s in groups)
        hi = max(s.maximum for _, s in groups)
        pad = 0.05 * (hi - lo) if hi > lo else 0.5
        y_range = (lo - pad, hi + pad)
    y_lo, y_hi = y_range
    if not (math.isfinite(y_lo) and math.isfinite(y_hi) and y_hi > y_lo):
        raise ValueError(f"bad y_range: {y_range}")

    width = _MARGIN_LEFT + _SLOT_WIDTH * len(groups) + _MARGIN_RIGHT
    height = _PANEL_HEIGHT
    plot_h = height - _MARGIN_TOP - _MARGIN_BOTTOM

    def y_of(v: float) -> float:
        frac = (v - y_lo) / (y_hi - y_lo)
        return _MARGIN_TOP + (1.0 - frac) * plot_h

    body: list[str] = [_text(width / 2.0, 18.0, title, "title", ' text-anchor="middle"')]
    # Horizontal grid and tick labels at five even divisions.
    for i in range(5):
        v = y_lo + (y_hi - y_lo) * i / 4.0
        y = y_of(v)
        body.append(_line(_MARGIN_LEFT, y, width - _MARGIN_RIGHT, y, "gridline"))
        body.append(
            _text(_MARGIN_LEFT - 6.0, y + 3.0, f"{v:.2f}", "tick-label", ' text-anchor="end"')
        )
    body.append(
        _text(
            14.0,
            _MARGIN_TOP + plot_h / 2.0,
            y_label,
            "axis-label",
            f' text-anchor="middle" transform="rotate(-90 14 {_fmt(_MARGIN_TOP + plot_h / 2.0)})"',
        )
    )
    body.append(
        _line(_MARGIN_LEFT, _MARGIN_TOP, _MARGIN_LEFT, _MARGIN_TOP + plot_h, "axis")
    )
    body.append(
        _line(
            _MARGIN_LEFT,
            _MARGIN_TOP + plot_h,
            width - _MARGIN_RIGHT,
            _MARGIN_TOP + plot_h,
            "axis",
        )
    )

    for slot, (label, s) in enumerate(groups):
        cx = _MARGIN_LEFT + _SLOT_WIDTH * (slot + 0.5)
        half = _BOX_WIDTH / 2.0
        y_q1, y_q3 = y_of(s.q1), y_of(s.q3)
        y_med = y_of(s.median)
        y_wlo, y_whi = y_of(s.whisker_low), y_of(s.whisker_high)
        body.append(_line(cx, y_whi, cx, y_q3, "whisker"))
        body.append(_line(cx, y_q1, cx, y_wlo, "whisker"))
        body.append(_line(cx - half / 2.0, y_whi, cx + half / 2.0, y_whi, "cap"))
        body.append(_line(cx - half / 2.0, y_wlo, cx + half / 2.0, y_wlo, "cap"))
        body.append(
            f'<rect class="box" x="{_fmt(cx - half)}" y="{_fmt(y_q3)}" '
            f'width="{_fmt(_BOX_WIDTH)}" height="{_fmt(max(y_q1 - y_q3, 0.5))}"/>'
        )
        body.append(_line(cx - half, y_med, cx + half, y_med, "median"))
        for v in s.outliers:
            body.append(
                f'<circle class="outlier" cx="{_fmt(cx)}" cy="{_fmt(y_of(v))}" r="2.5"/>'
            )
        anchor_y = _MARGIN_TOP + plot_h + 12.0
        body.append(
            _text(
                cx,
                anchor_y,
                label,
                "x-label",
                f' text-anchor="end" transform="rotate(-45 {_fmt(cx)} {_fmt(anchor_y)})"',
            )
        )
    return _svg_document(width, height, body)


def render_pvalue_scatter(
    comparisons: Sequence[PairwiseComparison],
    alpha: float,
    title: str,
) -> str:
    """Render comparison p-values on a log axis with the alpha threshold.

    Rows with no computable p-value (method ``"missing"``) are skipped.
    """
    rows = [c for c in comparisons if c.p_value is not None]
    if not rows:
        raise ValueError("no p-values to render")
    width = _MARGIN_LEFT + _SLOT_WIDTH * len(rows) + _MARGIN_RIGHT
    height = _PANEL_HEIGHT
    plot_h = height - _MARGIN_TOP - _MARGIN_BOTTOM

    lo_exp = math.floor(min(math.log10(c.p_value) for c in rows))
    lo_exp = min(lo_exp, math.floor(math.log10(alpha)) - 1)
    hi_exp = 0

    def y_of(p: float) -> float:
        frac = (math.log10(p) - lo_exp) / (hi_exp - lo_exp)
        return _MARGIN_TOP + (1.0 - frac) * plot_h

    body: list[str] = [_text(width / 2.0, 18.0, title, "title", ' text-anchor="middle"')]
    n_ticks = min(-lo_exp, 12)
    for k in range(0, -lo_exp + 1, max(1, (-lo_exp) // n_ticks if n_ticks else 1)):
        p = 10.0 ** (-k)
        y = y_of(p)
        body.append(_line(_MARGIN_LEFT, y, width - _MARGIN_RIGHT, y, "gridline"))
        body.append(
            _text(_MARGIN_LEFT - 6.0, y + 3.0, f"1e-{k}" if k else "1", "tick-label", ' text-anchor="end"')
        )
    y_alpha = y_of(alpha)
    body.append(_line(_MARGIN_LEFT, y_alpha, width - _MARGIN_RIGHT, y_alpha, "alpha-line"))
    body.append(
        _text(width - _MARGIN_RIGHT, y_alpha - 4.0, f"alpha={alpha:g}", "alpha-label", ' text-anchor="end"')
    )
    body.append(_line(_MARGIN_LEFT, _MARGIN_TOP, _MARGIN_LEFT, _MARGIN_TOP + plot_h, "axis"))
    body.append(
        _line(_MARGIN_LEFT, _MARGIN_TOP + plot_h, width - _MARGIN_RIGHT, _MARGIN_TOP + plot_h, "axis")
    )
    for slot, c in enumerate(rows):
        cx = _MARGIN_LEFT + _SLOT_WIDTH * (slot + 0.5)
        p = max(c.p_value, 10.0**lo_exp)
        body.append(f'<circle class="pvalue" cx="{_fmt(cx)}" cy="{_fmt(y_of(p))}" r="3.5"/>')
        label = _group_label(c)
        anchor_y = _MARGIN_TOP + plot_h + 12.0
        body.append(
            _text(
                cx,
                anchor_y,
                label,
                "x-label",
                f' text-anchor="end" transform="rotate(-45 {_fmt(cx)} {_fmt(anchor_y)})"',
            )
        )
    return _svg_document(width, height, body)


_ALGORITHM_SHORT = {"pc_stable": "pc", "grow_shrink": "gs", "fast_iamb": "fiamb"}


def _short_algorithm(name: str) -> str:
    return _ALGORITHM_SHORT.get(name, name)


def _group_label(c: PairwiseComparison) -> str:
    """Compact slot label from a comparison's group values (model omitted:
    scatters are already per model)."""
    parts: list[str] = []
    for key, value in zip(c.group_keys, c.group):
        if key == "model":
            continue
        if key == "n_nodes":
            parts.append(f"n{value}")
        elif key == "sigma":
            parts.append(f"s{value:g}")
        elif key == "algorithm":
            parts.append(_short_algorithm(str(value)))
        else:
            parts.append(str(value))
    return "/".join(parts) if parts else "all"


def emit_plots(
    records: Iterable[RunRecord],
    out_dir: str | Path,
    alpha: float = 0.05,
    pair: tuple[str, str] = ("B", "U"),
) -> list[Path]:
    """Write all panels for a set of run records; returns the created paths.

    One sensitivity box panel is written per (model, n_nodes, sigma) with a
    box for each topology-algorithm combination, plus one p-value scatter
    per model comparing the topologies in ``pair``.  Groups with no
    scorable runs are skipped with a warning.
    """
    all_records = list(records)
    records = [r for r in all_records if r.status == "ok" and r.sensitivity is not None]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    raw_panels = {(r.model, r.n_nodes, r.sigma) for r in all_records}
    panels: dict[tuple, dict[tuple, list[float]]] = {}
    for r in records:
        panel_key = (r.model, r.n_nodes, r.sigma)
        group_key = (r.topology, r.algorithm)
        panels.setdefault(panel_key, {}).setdefault(group_key, []).append(r.sensitivity)

    for model, n_nodes, sigma in sorted(raw_panels - set(panels)):
        warnings.warn(
            f"no scorable runs for model={model} n_nodes={n_nodes} "
            f"sigma={sigma:g}; panel skipped",
            stacklevel=2,
        )

    algorithm_rank = {name: i for i, name in enumerate(ALGORITHMS)}
    for model, n_nodes, sigma in sorted(panels):
        cell = panels[(model, n_nodes, sigma)]
        ordered = sorted(
            cell, key=lambda k: (k[0], algorithm_rank.get(k[1], len(algorithm_rank)))
        )
        groups = [
            (f"{topo}/{_short_algorithm(alg)}", boxplot_summary(cell[(topo, alg)]))
            for topo, alg in ordered
        ]
        svg = render_box_panel(
            groups,
            title=f"sensitivity: {model}, n={n_nodes}, sigma={sigma:g}",
            y_range=(0.0, 1.0),
        )
        path = out / f"box_{model}_n{n_nodes}_s{sigma:g}.svg"
        path.write_text(svg, encoding="utf-8")
        written.append(path)

    for model in sorted({r.model for r in all_records}):
        model_records = [r for r in records if r.model == model]
        comparisons = (
            compare_topologies(model_records, pair=pair, alpha=alpha)
            if model_records
            else []
        )
        rows = [c for c in comparisons if c.p_value is not None]
        if not rows:
            warnings.warn(
                f"no {pair[0]} vs {pair[1]} comparisons for model={model}; "
                "p-value panel skipped",
                stacklevel=2,
            )
            continue
        svg = render_pvalue_scatter(
            rows, alpha, title=f"{pair[0]} vs {pair[1]} rank-sum p-values: {model}"
        )
        path = out / f"pvalues_{model}.svg"
        path.write_text(svg, encoding="utf-8")
        written.append(path)
    return written
