"""Static SVG line plots and CSV tables for metrics and loss logs."""

from __future__ import annotations

import csv
import io
from typing import Dict, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 480, 360
MARGIN = 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def axis_bounds(values: Sequence[float], pad: float = 0.05) -> Tuple[float, float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        span = abs(hi) or 1.0
        return lo - pad * span, hi + pad * span
    span = hi - lo
    return lo - pad * span, hi + pad * span


def line_plot(
    series: Dict[str, Sequence[Tuple[float, float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    xlim: Optional[Tuple[float, float]] = None,
    ylim: Optional[Tuple[float, float]] = None,
) -> str:
    """Render named (x, y) series as one self-contained SVG document.

    Axis bounds are written to the root element as ``data-xmin`` etc. so
    callers can check them without parsing geometry.
    """
    pts = [p for s in series.values() for p in s]
    if not pts:
        raise ValueError("nothing to plot")
    xlim = xlim or axis_bounds([p[0] for p in pts])
    ylim = ylim or axis_bounds([p[1] for p in pts])
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(x):
        return MARGIN + (x - xlim[0]) / (xlim[1] - xlim[0]) * pw

    def sy(y):
        return HEIGHT - MARGIN - (y - ylim[0]) / (ylim[1] - ylim[0]) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'data-xmin="{xlim[0]:g}" data-xmax="{xlim[1]:g}" data-ymin="{ylim[0]:g}" data-ymax="{ylim[1]:g}">',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]
    for v, anchor in ((xlim[0], "start"), (xlim[1], "end")):
        out.append(f'<text x="{sx(v):.2f}" y="{HEIGHT - MARGIN + 14}" text-anchor="{anchor}" font-size="10">{v:.3g}</text>')
    for v in ylim:
        out.append(f'<text x="{MARGIN - 4}" y="{sy(v):.2f}" text-anchor="end" font-size="10">{v:.3g}</text>')
    for k, (name, s) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in s)
        out.append(
            f'<polyline data-series="{escape(name)}" data-points="{" ".join(f"{x:g},{y:g}" for x, y in s)}" '
            f'points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        if len(s) == 1:
            x, y = s[0]
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        out.append(
            f'<text x="{WIDTH - MARGIN - 4}" y="{MARGIN + 14 * (k + 1)}" text-anchor="end" '
            f'font-size="11" fill="{color}">{escape(name)}</text>'
        )
    out.append("</svg>\n")
    return "\n".join(out)


def pr_curve_svg(points: Sequence[Tuple[float, float]], class_name: str) -> str:
    """Precision (y) against recall (x) on fixed unit axes."""
    series = {class_name: list(points) if points else [(0.0, 0.0)]}
    return line_plot(series, f"PR curve: {class_name}", "recall", "precision", (0.0, 1.0), (0.0, 1.0))


def summary_rows(metrics: Dict, class_names: Sequence[str]) -> List[Tuple[str, str, str]]:
    """(metric, class, value) rows from an evaluation JSON document."""
    rows = []
    for key in ("map50", "map50_95", "precision", "recall", "f1", "confidence"):
        rows.append((key, "all", _fmt(metrics.get(key))))
    for entry in metrics.get("per_class", []):
        cid = entry["class_id"]
        name = class_names[cid] if cid < len(class_names) else str(cid)
        rows.append(("ap50", name, _fmt(entry.get("ap50"))))
        rows.append(("ap50_95", name, _fmt(entry.get("ap50_95"))))
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, (int, float)) else str(v)


def rows_to_csv(rows: Sequence[Sequence], header: Sequence[str] = ("metric", "class", "value")) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def parse_loss_log(text: str) -> Dict[str, List[Tuple[float, float]]]:
    """CSV with an ``epoch`` column and one numeric column per loss component."""
    reader = csv.DictReader(io.StringIO(text))
    if not reader.fieldnames or "epoch" not in reader.fieldnames:
        raise ValueError("loss log needs an 'epoch' column")
    series: Dict[str, List[Tuple[float, float]]] = {k: [] for k in reader.fieldnames if k != "epoch"}
    for lineno, row in enumerate(reader, start=2):
        try:
            epoch = float(row["epoch"])
            for k in series:
                series[k].append((epoch, float(row[k])))
        except (TypeError, ValueError):
            raise ValueError(f"line {lineno}: malformed loss log row {row}") from None
    return series
