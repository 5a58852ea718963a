"""Reading rating files and writing curve/report artifacts (CSV, JSON, SVG)."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ObservedHistogram
from .regret import WorstCaseRecord

CURVE_HEADER = ("q", "aggregator", "regret", "ln_regret")
SVG_WIDTH, SVG_HEIGHT = 800, 600
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f", "#8c564b")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class OutOfRange(ValueError):
    pass


class BadScale(ValueError):
    pass


class BadTotal(ValueError):
    pass


@dataclass(frozen=True)
class RatingRecord:
    rating: int
    source: str | None = None

    def __post_init__(self):
        if self.rating < 1:
            raise OutOfRange(f"ratings start at 1, got {self.rating}")


@dataclass(frozen=True)
class CurvePoint:
    q: float
    aggregator: str
    regret: float

    @property
    def ln_regret(self) -> float | None:
        return math.log(self.regret) if self.regret > 0 else None


def remap_rating(s: int) -> int:
    """Collapse a 1..10 rating onto 1..7: 1-4 become 1, 5..10 shift down by 3."""
    if int(s) != s or not 1 <= s <= 10:
        raise OutOfRange(f"remap expects an integer rating in [1, 10], got {s}")
    return 1 if s <= 4 else int(s) - 3


def read_ratings_csv(path, column: str = "rating", remap: bool = False,
                     source: str | None = None) -> list[RatingRecord]:
    """Observed ratings from one column of a headed CSV file.

    Blank cells and 0 mean "not reported" and are skipped.
    """
    source = column if source is None else source
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError("missing header row", line=1)
        if column not in reader.fieldnames:
            raise ParseError(f"no column named {column!r} in header {reader.fieldnames}", line=1)
        for row in reader:
            line = reader.line_num
            cell = (row.get(column) or "").strip()
            if not cell:
                continue
            try:
                value = int(cell)
            except ValueError:
                raise ParseError(f"rating {cell!r} is not an integer", line=line) from None
            if value == 0:
                continue
            try:
                if remap:
                    value = remap_rating(value)
                records.append(RatingRecord(value, source))
            except OutOfRange as exc:
                raise OutOfRange(f"line {line}: {exc}") from None
    return records


def count_rows(path) -> int:
    """Number of data rows (raters) in a headed CSV file."""
    with open(path, newline="", encoding="utf-8") as fh:
        return sum(1 for _ in csv.DictReader(fh))


def build_histogram(records, m: int, n_known: int | None = None) -> ObservedHistogram:
    counts = np.zeros(m, dtype=np.int64)
    for rec in records:
        r = rec.rating if isinstance(rec, RatingRecord) else int(rec)
        if not 1 <= r <= m:
            raise BadScale(f"rating {r} does not fit the 1..{m} scale")
        counts[r - 1] += 1
    n_u = 0
    if n_known is not None:
        if n_known < len(records):
            raise BadTotal(f"n={n_known} is smaller than the {len(records)} observed ratings")
        n_u = n_known - len(records)
    return ObservedHistogram(counts, n_u)


def _fmt(x: float) -> str:
    return repr(float(x))


def format_curve_csv(points) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_HEADER)
    for pt in points:
        ln = pt.ln_regret
        writer.writerow([_fmt(pt.q), pt.aggregator, _fmt(pt.regret), "" if ln is None else _fmt(ln)])
    return buf.getvalue()


def write_curve_csv(points, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(format_curve_csv(points))


def read_curve_csv(path) -> list[CurvePoint]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [CurvePoint(float(row["q"]), row["aggregator"], float(row["regret"]))
                for row in csv.DictReader(fh)]


def write_report_json(record: WorstCaseRecord, path) -> None:
    Path(path).write_text(json.dumps(record.to_dict(), indent=2) + "\n", encoding="utf-8")


def read_report_json(path) -> WorstCaseRecord:
    return WorstCaseRecord.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def render_svg_line_chart(points, path, title: str | None = None) -> None:
    """Multi-series line chart of ln regret against q, one polyline per series."""
    series: dict[str, list[tuple[float, float]]] = {}
    for pt in points:
        series.setdefault(pt.aggregator, [])
        if pt.ln_regret is not None:
            series[pt.aggregator].append((pt.q, pt.ln_regret))

    left, right, top, bottom = 80, 160, 50, 70
    plot_w = SVG_WIDTH - left - right
    plot_h = SVG_HEIGHT - top - bottom
    xs = [x for s in series.values() for x, _ in s]
    ys = [y for s in series.values() for _, y in s]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def sx(x):
        return left + (x - x0) / (x1 - x0) * plot_w

    def sy(y):
        return top + (y1 - y) / (y1 - y0) * plot_h

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_WIDTH}" '
        f'height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{SVG_WIDTH / 2}" y="30" text-anchor="middle" font-size="18">{title}</text>')
    for i in range(6):
        fx = x0 + (x1 - x0) * i / 5
        fy = y0 + (y1 - y0) * i / 5
        out.append(f'<text x="{sx(fx):.1f}" y="{top + plot_h + 20}" text-anchor="middle" '
                   f'font-size="12">{fx:.2f}</text>')
        out.append(f'<text x="{left - 8}" y="{sy(fy) + 4:.1f}" text-anchor="end" '
                   f'font-size="12">{fy:.2f}</text>')
    out.append(f'<text x="{left + plot_w / 2}" y="{SVG_HEIGHT - 20}" text-anchor="middle" '
               f'font-size="14">q</text>')
    out.append(f'<text x="20" y="{top + plot_h / 2}" text-anchor="middle" font-size="14" '
               f'transform="rotate(-90 20 {top + plot_h / 2})">ln regret</text>')
    for i, (name, pts) in enumerate(series.items()):
        if not pts:
            continue
        colour = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in sorted(pts))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" '
                   f'data-series="{name}" points="{coords}"/>')
        ly = top + 20 + 22 * i
        out.append(f'<line x1="{left + plot_w + 15}" y1="{ly}" x2="{left + plot_w + 45}" '
                   f'y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{left + plot_w + 52}" y="{ly + 4}" font-size="13">{name}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
