"""CSV, JSON and SVG writers for matrices, ownership profiles and series.

All output is deterministic: no timestamps, fixed key order, ``\\n`` line ends.
"""

from __future__ import annotations

import csv
import io
import json
import os
from collections.abc import Mapping, Sequence
from html import escape
from pathlib import Path

import numpy as np

from .coupling import Band, CouplingMatrix, classify
from .errors import EmptyMatrix
from .evolution import EvolutionSeries, series_delta
from .history import format_timestamp, parse_timestamp
from .ownership import OwnershipProfile

BAND_HEX = {
    Band.VERY_HIGH: "#d7301f",
    Band.HIGH: "#fc8d3c",
    Band.LOOSE: "#fed976",
    Band.VERY_LOOSE: "#78c679",
}
DIAGONAL_HEX = "#ffffff"


def _write_text(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


# -------------------------------------------------------------------- matrix


def matrix_to_csv(matrix: CouplingMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["service", *matrix.services])
    for i, name in enumerate(matrix.services):
        w.writerow([name, *(f"{v:.2f}" for v in matrix.values[i])])
    return buf.getvalue()


def matrix_to_dict(matrix: CouplingMatrix, developers: bool = True) -> dict:
    pairs = []
    for a, b, oc, band, p in matrix.pairs():
        entry = {"a": a, "b": b, "oc": oc, "band": band.value, "shared_developers": p}
        if developers:
            entry["developers"] = [
                {
                    "developer": d.developer,
                    "contribution_a": d.contribution_a,
                    "contribution_b": d.contribution_b,
                    "n": d.n,
                    "k": d.k,
                    "switch_weight": d.switch_weight,
                    "oc": d.oc,
                }
                for d in matrix.developers(a, b)
            ]
        pairs.append(entry)
    return {
        "services": list(matrix.services),
        "values": matrix.values.tolist(),
        "pairs": pairs,
    }


def matrix_from_dict(data: Mapping) -> CouplingMatrix:
    services = tuple(data["services"])
    values = np.asarray(data["values"], dtype=float).reshape(len(services), len(services))
    shared = np.zeros(values.shape, dtype=np.int64)
    index = {s: i for i, s in enumerate(services)}
    for p in data.get("pairs", ()):
        i, j = index[p["a"]], index[p["b"]]
        shared[i, j] = shared[j, i] = int(p.get("shared_developers", 0))
    return CouplingMatrix(services, values, shared)


def write_matrix(matrix: CouplingMatrix, out_dir: str | os.PathLike, stem: str = "matrix",
                 formats: Sequence[str] = ("csv", "json")) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    if "csv" in formats:
        written.append(_write_text(out_dir / f"{stem}.csv", matrix_to_csv(matrix)))
    if "json" in formats:
        written.append(_write_text(out_dir / f"{stem}.json", _dumps(matrix_to_dict(matrix))))
    if "svg" in formats:
        svg_name = "heatmap.svg" if stem == "matrix" else f"{stem}.svg"
        written.append(_write_text(out_dir / svg_name, render_heatmap(matrix)))
    return written


def read_matrix(path: str | os.PathLike) -> CouplingMatrix:
    with open(path, encoding="utf-8") as fh:
        return matrix_from_dict(json.load(fh))


# ----------------------------------------------------------------- ownership


def ownership_to_csv(profile: OwnershipProfile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["developer", "contribution", "ownership", "role"])
    for e in profile.entries:
        w.writerow([e.developer, e.contribution, f"{e.ownership:.6f}", e.role.value])
    return buf.getvalue()


def ownership_summary(profiles: Mapping[str, OwnershipProfile]) -> dict:
    """Teamleader(s) and Major contributors of every service, as percentages."""
    out = {}
    for service, prof in sorted(profiles.items()):
        leaders = prof.leaders
        out[service] = {
            "total_contribution": prof.total,
            "team_size": len(prof.entries),
            "teamleaders": [
                {"developer": e.developer, "ownership_pct": round(100 * e.ownership, 2)}
                for e in leaders
            ],
            "major": [
                {"developer": e.developer, "ownership_pct": round(100 * e.ownership, 2)}
                for e in prof.majors
                if e not in leaders
            ],
            "major_count_including_leaders": len(prof.majors),
        }
    return out


def write_ownership(profiles: Mapping[str, OwnershipProfile], out_dir: str | os.PathLike) -> list[Path]:
    out_dir = Path(out_dir)
    written = [
        _write_text(out_dir / "ownership" / f"{svc}.csv", ownership_to_csv(p))
        for svc, p in sorted(profiles.items())
    ]
    written.append(_write_text(out_dir / "ownership.json", _dumps(ownership_summary(profiles))))
    return written


# -------------------------------------------------------------------- series


def window_stem(i: int) -> str:
    return f"window-{i + 1:02d}"


def series_to_dict(series: EvolutionSeries) -> dict:
    windows = []
    for i, ((lo, hi), m) in enumerate(series.windows):
        windows.append({
            "index": i,
            "start": format_timestamp(lo),
            "end": format_timestamp(hi),
            "matrix": window_stem(i),
            "values": m.values.tolist(),
            "bands": [[classify(v).value if r != c else None for c, v in enumerate(row)]
                      for r, row in enumerate(m.values.tolist())],
        })
    data = {"services": list(series.services), "windows": windows}
    if len(series) >= 2:
        data["deltas"] = series_delta(series).tolist()
    return data


def series_from_dict(data: Mapping) -> EvolutionSeries:
    services = tuple(data["services"])
    windows = []
    n = len(services)
    for w in data["windows"]:
        values = np.asarray(w["values"], dtype=float).reshape(n, n)
        m = CouplingMatrix(services, values, np.zeros((n, n), dtype=np.int64))
        windows.append(((parse_timestamp(w["start"]), parse_timestamp(w["end"])), m))
    return EvolutionSeries(tuple(windows), services)


def write_series(series: EvolutionSeries, out_dir: str | os.PathLike,
                 formats: Sequence[str] = ("csv", "json")) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    for i, (_, m) in enumerate(series.windows):
        written += write_matrix(m, out_dir, window_stem(i), [f for f in formats if f != "svg"])
    written.append(_write_text(out_dir / "series.json", _dumps(series_to_dict(series))))
    if "svg" in formats:
        written.append(_write_text(out_dir / "evolution.svg", render_series(series)))
    return written


# ----------------------------------------------------------------------- svg

CELL = 56
FONT = "sans-serif"


def _heatmap_group(matrix: CouplingMatrix, x0: int, y0: int, label_w: int,
                   title: str | None = None) -> tuple[list[str], int, int]:
    names = matrix.services
    n = len(names)
    parts = []
    top = y0 + (20 if title else 0)
    if title:
        parts.append(f'<text x="{x0}" y="{y0 + 14}" font-size="13" font-weight="bold">'
                     f'{escape(title)}</text>')
    head = label_w
    gx, gy = x0 + label_w, top + head
    for j, name in enumerate(names):
        cx = gx + j * CELL + CELL // 2
        parts.append(f'<text x="{cx}" y="{gy - 6}" font-size="11" text-anchor="start" '
                     f'transform="rotate(-45 {cx} {gy - 6})">{escape(name)}</text>')
    for i, name in enumerate(names):
        y = gy + i * CELL
        parts.append(f'<text x="{gx - 6}" y="{y + CELL // 2 + 4}" font-size="11" '
                     f'text-anchor="end">{escape(name)}</text>')
        for j in range(n):
            x = gx + j * CELL
            if i == j:
                parts.append(f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                             f'fill="{DIAGONAL_HEX}" stroke="#999999"/>')
                continue
            v = float(matrix.values[i, j])
            band = classify(v)
            parts.append(f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                         f'fill="{BAND_HEX[band]}" stroke="#999999" class="{band.value}">'
                         f'<title>{escape(names[i])} / {escape(names[j])}: {v:.2f}</title></rect>')
            parts.append(f'<text x="{x + CELL // 2}" y="{y + CELL // 2 + 4}" font-size="9" '
                         f'text-anchor="middle">{v:.2f}</text>')
    width = label_w + n * CELL
    height = (top - y0) + head + n * CELL
    return parts, width, height


def _legend(x: int, y: int) -> list[str]:
    parts = []
    labels = {
        Band.VERY_HIGH: "OC ≥ 10,000",
        Band.HIGH: "1,000 ≤ OC < 10,000",
        Band.LOOSE: "100 ≤ OC < 1,000",
        Band.VERY_LOOSE: "OC < 100",
    }
    for i, band in enumerate(Band):
        yy = y + i * 18
        parts.append(f'<rect x="{x}" y="{yy}" width="14" height="14" fill="{BAND_HEX[band]}" '
                     f'stroke="#999999"/>')
        parts.append(f'<text x="{x + 20}" y="{yy + 11}" font-size="11">'
                     f'{escape(band.label)}: {escape(labels[band])}</text>')
    return parts


def _document(parts: list[str], width: int, height: int) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="{FONT}">\n'
        + "\n".join(parts)
        + "\n</svg>\n"
    )


def _label_width(names: Sequence[str]) -> int:
    return 20 + 7 * max((len(s) for s in names), default=0)


def render_heatmap(matrix: CouplingMatrix, out: str | os.PathLike | None = None,
                   title: str | None = None) -> str:
    """Service-by-service grid colored by coupling band, diagonal left blank.

    Returns the SVG text and also writes it to *out* when given.
    """
    if not matrix.services:
        raise EmptyMatrix("cannot render a heatmap without services")
    pad = 10
    grid, w, h = _heatmap_group(matrix, pad, pad, _label_width(matrix.services), title)
    legend = _legend(pad, pad + h + 12)
    svg = _document(grid + legend, max(w, 260) + 2 * pad, h + 12 + 4 * 18 + 2 * pad)
    if out is not None:
        _write_text(out, svg)
    return svg


def render_series(series: EvolutionSeries, columns: int = 3) -> str:
    """One heatmap per window, laid out in a grid."""
    if not series.services or not series.windows:
        raise EmptyMatrix("cannot render an evolution series without services")
    pad = 10
    label_w = _label_width(series.services)
    parts: list[str] = []
    cell_w = cell_h = 0
    groups = []
    for (lo, hi), m in series.windows:
        title = f"{lo.date().isoformat()} to {hi.date().isoformat()}"
        g, w, h = _heatmap_group(m, 0, 0, label_w, title)
        groups.append(g)
        cell_w, cell_h = max(cell_w, w), max(cell_h, h)
    for k, g in enumerate(groups):
        x = pad + (k % columns) * (cell_w + pad)
        y = pad + (k // columns) * (cell_h + pad)
        parts.append(f'<g transform="translate({x},{y})">')
        parts.extend(g)
        parts.append("</g>")
    rows = (len(groups) + columns - 1) // columns
    ncols = min(columns, len(groups))
    legend_y = pad + rows * (cell_h + pad) + 4
    parts.extend(_legend(pad, legend_y))
    return _document(parts, ncols * (cell_w + pad) + pad, legend_y + 4 * 18 + pad)
