"""Deterministic CSV/SVG report files with a sha256 manifest.

Nothing time- or host-dependent is written, so identical results give
identical bytes.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
import os

from ..errors import IoError

FIT_COLUMNS = ("probe", "slope", "intercept", "r2", "n_points", "status", "note")
MANIFEST = "manifest.txt"


def fmt(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    if hasattr(v, "item"):  # numpy scalar
        return fmt(v.item())
    return str(v)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _fit_row(res):
    f = res.fit
    if f is None:
        return (res.name, "", "", "", "", res.status, res.note)
    return (res.name, f.slope, f.intercept, f.r2, f.n_points, res.status, res.note)


# ---------------------------------------------------------------------------
# SVG


W, H = 480, 360
ML, MR, MT, MB = 64, 16, 28, 48


def _span(vals):
    lo, hi = min(vals), max(vals)
    if hi - lo < 1e-9:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def svg_plot(res):
    """Log-log scatter of ``res.plot`` with the fitted line and optional slope guide."""
    pts = [(x, y) for x, y in res.plot if x > 0 and y > 0]
    lx = [math.log10(x) for x, _ in pts]
    ly = [math.log10(y) for _, y in pts]
    sign = res.extra.get("fit_sign", 1.0)
    fit = res.fit
    xlo, xhi = _span(lx)
    # keep the fitted and guide lines inside the y-range
    extra_y = []
    if fit is not None and math.isfinite(fit.slope):
        extra_y += [(fit.intercept + sign * fit.slope * x * math.log(10)) / math.log(10) for x in (min(lx), max(lx))]
    if res.guide_slope is not None:
        x0, y0 = lx[-1], ly[-1]
        extra_y += [y0 + res.guide_slope * (x - x0) for x in (min(lx), max(lx))]
    ylo, yhi = _span(ly + extra_y)

    def px(x):
        return ML + (x - xlo) / (xhi - xlo) * (W - ML - MR)

    def py(y):
        return H - MB - (y - ylo) / (yhi - ylo) * (H - MT - MB)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           "<style>.pt{fill:#1f4e9a}.fit{stroke:#1f4e9a;stroke-width:1.5}"
           ".guide{stroke:#b03a2e;stroke-dasharray:5,4}.ax{stroke:#333}text{font:11px sans-serif}</style>",
           f'<text x="{W / 2:.1f}" y="16" text-anchor="middle">{_esc(res.name)}</text>',
           f'<line class="ax" x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}"/>',
           f'<line class="ax" x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}"/>',
           f'<text x="{(ML + W - MR) / 2:.1f}" y="{H - 12}" text-anchor="middle">log10 {_esc(res.axes[0])}</text>',
           f'<text x="14" y="{(MT + H - MB) / 2:.1f}" text-anchor="middle" '
           f'transform="rotate(-90 14 {(MT + H - MB) / 2:.1f})">log10 {_esc(res.axes[1])}</text>']
    for v in (xlo, xhi):
        out.append(f'<text x="{px(v):.2f}" y="{H - MB + 14}" text-anchor="middle">{v:.2f}</text>')
    for v in (ylo, yhi):
        out.append(f'<text x="{ML - 4}" y="{py(v) + 4:.2f}" text-anchor="end">{v:.2f}</text>')
    legend = []
    if fit is not None and math.isfinite(fit.slope):
        a, b = min(lx), max(lx)
        ya = (fit.intercept / math.log(10)) + sign * fit.slope * a
        yb = (fit.intercept / math.log(10)) + sign * fit.slope * b
        out.append(f'<line class="fit" x1="{px(a):.2f}" y1="{py(ya):.2f}" x2="{px(b):.2f}" y2="{py(yb):.2f}"/>')
        legend.append(("fit", f"fitted slope {fit.slope:.4g}"))
    if res.guide_slope is not None:
        a, b = min(lx), max(lx)
        x0, y0 = lx[-1], ly[-1]
        out.append(f'<line class="guide" x1="{px(a):.2f}" y1="{py(y0 + res.guide_slope * (a - x0)):.2f}" '
                   f'x2="{px(b):.2f}" y2="{py(y0 + res.guide_slope * (b - x0)):.2f}"/>')
        legend.append(("guide", f"slope {res.guide_slope:.4g}: {res.guide_label}"))
    for x, y in zip(lx, ly):
        out.append(f'<circle class="pt" cx="{px(x):.2f}" cy="{py(y):.2f}" r="3"/>')
    for k, (cls, text) in enumerate(legend):
        yy = MT + 6 + 14 * k
        out.append(f'<line class="{cls}" x1="{ML + 8}" y1="{yy}" x2="{ML + 28}" y2="{yy}"/>')
        out.append(f'<text x="{ML + 32}" y="{yy + 4}">{_esc(text)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# emission


def _write(outdir, name, text, manifest):
    path = os.path.join(outdir, name)
    data = text.encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    manifest[name] = hashlib.sha256(data).hexdigest()


def emit_report(results, outdir, meta=None):
    """Write ``fit.csv``, ``records.csv``, one ``<probe>.csv`` and ``plot_<probe>.svg``
    per probe, and ``manifest.txt``; returns ``{file: sha256}`` (manifest excluded)."""
    try:
        os.makedirs(outdir, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {outdir}: {exc}") from exc
    manifest = {}
    _write(outdir, "fit.csv", _csv_text(FIT_COLUMNS, [_fit_row(r) for r in results]), manifest)
    long_rows = [(r.name, i, c, v) for r in results for i, row in enumerate(r.rows) for c, v in zip(r.columns, row)]
    if long_rows:
        _write(outdir, "records.csv", _csv_text(("probe", "row", "column", "value"), long_rows), manifest)
    for r in results:
        if r.rows:
            _write(outdir, f"{r.name}.csv", _csv_text(r.columns, r.rows), manifest)
        if any(x > 0 and y > 0 for x, y in r.plot):
            _write(outdir, f"plot_{r.name}.svg", svg_plot(r), manifest)
    if meta:
        _write(outdir, "meta.csv", _csv_text(("key", "value"), sorted(meta.items())), manifest)
    lines = "".join(f"{h}  {n}\n" for n, h in sorted(manifest.items()))
    try:
        with open(os.path.join(outdir, MANIFEST), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(lines)
    except OSError as exc:
        raise IoError(f"cannot write manifest: {exc}") from exc
    return manifest


def spec_meta(spec):
    """Settings echoed into ``meta.csv``; each protocol choice is flagged as a design decision."""
    meta = {
        "kind": spec.kind, "domain": spec.domain, "gen": spec.gen, "g": spec.g,
        "eps": ",".join(fmt(e) for e in spec.eps), "seeds": ",".join(str(s) for s in spec.seeds),
        "trials": spec.trials, "tol": spec.tol, "oracle_tol": spec.oracle_tol,
        "probes": ",".join(spec.probes),
        "protocol": "design decision: no experiment protocol is given by the theory",
        "bulk_split": "design decision: near-boundary means distance < 4*eps",
    }
    for k in sorted(spec.params):
        meta[f"param.{k}"] = spec.params[k]
    return {k: fmt(v) for k, v in meta.items()}
