"""Atomic text output, CSV tables and a small SVG line-plot writer."""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from typing import Iterable, Sequence


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    atomic_write_text(path, csv_text(header, rows))


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")


def svg_lines(series, title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False,
              width: int = 640, height: int = 420) -> str:
    """Polyline plot of ``series = [(label, x, y), ...]`` with a framed axis box."""
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    pts = []
    for label, xs, ys in series:
        cur = []
        for x, y in zip(xs, ys):
            x, y = float(x), float(y)
            if (logx and x <= 0) or (logy and y <= 0) or not (math.isfinite(x) and math.isfinite(y)):
                continue
            cur.append((tx(x), ty(y)))
        pts.append((label, cur))
    allp = [q for _, cur in pts for q in cur] or [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(q[0] for q in allp), max(q[0] for q in allp)
    y0, y1 = min(q[1] for q in allp), max(q[1] for q in allp)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    ml, mr, mt, mb = 70, 20, 30, 50
    W, H = width - ml - mr, height - mt - mb

    def X(v):
        return ml + (v - x0) / (x1 - x0) * W

    def Y(v):
        return mt + H - (v - y0) / (y1 - y0) * H

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{ml}" y="{mt}" width="{W}" height="{H}" fill="none" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<text x="{ml + W / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="12">'
        f'{_esc(xlabel)}</text>',
        f'<text x="14" y="{mt + H / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {mt + H / 2:.1f})">{_esc(ylabel)}</text>',
    ]
    for k in range(5):
        fx = x0 + (x1 - x0) * k / 4
        fy = y0 + (y1 - y0) * k / 4
        lx = f"1e{fx:.2g}" if logx else f"{fx:.3g}"
        ly = f"1e{fy:.2g}" if logy else f"{fy:.3g}"
        out.append(f'<text x="{X(fx):.1f}" y="{mt + H + 16}" text-anchor="middle" font-size="10">{lx}</text>')
        out.append(f'<text x="{ml - 4}" y="{Y(fy) + 3:.1f}" text-anchor="end" font-size="10">{ly}</text>')
    for i, (label, cur) in enumerate(pts):
        col = _COLORS[i % len(_COLORS)]
        if cur:
            path = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in cur)
            out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{path}"/>')
        out.append(f'<text x="{ml + 8}" y="{mt + 14 + 14 * i}" font-size="11" fill="{col}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
