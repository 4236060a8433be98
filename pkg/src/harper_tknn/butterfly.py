"""Butterfly sweep over all admissible fluxes, its on-disk cache, and SVG output."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import __version__
from .errors import HarperError
from .numtheory import farey, validate_model
from .serialize import SCHEMA_VERSION, edge_value
from .spectral import DEFAULT_GAP_TOL, KGrid
from .tknn import analyse, make_record

log = logging.getLogger(__name__)

CACHE_ENV = "HARPER_CACHE_DIR"


@dataclass
class ButterflyRow:
    M: int
    N: int
    bands: list  # [[e_min, e_max], ...] per band
    gaps: list  # [{"d", "t", "s", "e_lo", "e_hi", "match"}, ...] per open gap
    verified: bool
    error: Optional[str] = None

    @property
    def theta(self):
        return self.M / self.N

    def to_dict(self):
        return {
            "M": self.M,
            "N": self.N,
            "theta": self.theta,
            "bands": self.bands,
            "gaps": self.gaps,
            "verified": self.verified,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(int(obj["M"]), int(obj["N"]), obj["bands"], obj["gaps"], bool(obj["verified"]), obj["error"])


@dataclass
class ButterflyDataset:
    q: int
    r: int
    n_max: int
    grid: KGrid
    gap_tol: float
    rows: list[ButterflyRow] = field(default_factory=list)

    @property
    def verified(self):
        return all(row.verified for row in self.rows)

    def to_dict(self):
        return {
            "q": self.q,
            "r": self.r,
            "n_max": self.n_max,
            "grid": [self.grid.n1, self.grid.n2],
            "gap_tol": self.gap_tol,
            "rows": [row.to_dict() for row in self.rows],
        }

    @classmethod
    def from_dict(cls, obj):
        ds = cls(int(obj["q"]), int(obj["r"]), int(obj["n_max"]), KGrid(*obj["grid"]), obj["gap_tol"])
        ds.rows = [ButterflyRow.from_dict(row) for row in obj["rows"]]
        return ds


class ResultCache:
    """Directory of JSON blobs keyed by a canonical parameter string.

    Writes go to a temporary file in the same directory and are renamed into
    place, so concurrent writers never leave a partial file behind.
    """

    def __init__(self, root=None):
        if root is None:
            root = os.environ.get(CACHE_ENV) or Path.home() / ".cache" / "harper_tknn"
        self.root = Path(root)

    @staticmethod
    def key(q, r, M, N, grid, gap_tol):
        return f"v{SCHEMA_VERSION}|{__version__}|q={q}|r={r}|M={M}|N={N}|grid={grid.n1}x{grid.n2}|gap_tol={gap_tol!r}"

    def path(self, key):
        return self.root / (hashlib.sha256(key.encode()).hexdigest()[:32] + ".json")

    def get(self, key):
        try:
            blob = json.loads(self.path(key).read_text())
        except (OSError, ValueError):
            return None
        return blob.get("value") if blob.get("key") == key else None

    def put(self, key, value):
        self.root.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump({"key": key, "value": value}, fh)
            os.replace(tmp, self.path(key))
        except BaseException:
            os.unlink(tmp)
            raise


def compute_row(q, r, M, N, grid, gap_tol) -> ButterflyRow:
    model = validate_model(q, r, M, N)
    try:
        bands, chart = analyse(model, grid, gap_tol)
        edges = [[float(lo), float(hi)] for lo, hi in chart.band_edges]
        gaps = []
        ok = True
        for gap in chart.open_gaps:
            rec = make_record(model, chart, bands, gap.d, grid, gap_tol, False)
            ok &= rec.match and rec.satisfies(model)
            gaps.append({
                "d": rec.d,
                "t": rec.t_num,
                "s": rec.s_num,
                "e_lo": edge_value(rec.e_lo),
                "e_hi": edge_value(rec.e_hi),
                "match": rec.match,
            })
        return ButterflyRow(M, N, edges, gaps, bool(ok))
    except HarperError as exc:
        log.warning("flux %d/%d failed: %s", M, N, exc)
        return ButterflyRow(M, N, [], [], False, f"{type(exc).__name__}: {exc}")


def sweep(q, r, n_max, grid=KGrid(32, 32), gap_tol=DEFAULT_GAP_TOL, cache: Optional[ResultCache] = None, jobs=1) -> ButterflyDataset:
    """Verify every admissible flux M/N with N <= n_max, in ascending flux order."""
    fluxes = farey(n_max, q)
    if fluxes:
        validate_model(q, r, fluxes[0].numerator, fluxes[0].denominator)

    def one(theta: Fraction):
        M, N = theta.numerator, theta.denominator
        key = ResultCache.key(q, r, M, N, grid, gap_tol)
        if cache is not None:
            hit = cache.get(key)
            if hit is not None:
                return ButterflyRow.from_dict(hit)
        row = compute_row(q, r, M, N, grid, gap_tol)
        if cache is not None and row.error is None:
            cache.put(key, row.to_dict())
        return row

    ds = ButterflyDataset(q, r, n_max, grid, gap_tol)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            ds.rows = list(pool.map(one, fluxes))
    else:
        ds.rows = [one(f) for f in fluxes]
    return ds


# positive integers warm, negative cool, zero grey
_POSITIVE = ["#f4a582", "#d6604d", "#b2182b", "#67001f", "#fdae61", "#f46d43", "#a50026"]
_NEGATIVE = ["#92c5de", "#4393c3", "#2166ac", "#053061", "#abd9e9", "#74add1", "#313695"]


def integer_color(n: int) -> str:
    if n == 0:
        return "#d9d9d9"
    palette = _POSITIVE if n > 0 else _NEGATIVE
    return palette[(abs(n) - 1) % len(palette)]


def render_svg(ds: ButterflyDataset, color: str = "t", width: int = 800, height: int = 800, margin: int = 40) -> str:
    """Butterfly as an SVG document: energy across, flux upward.

    One black rectangle per (flux, band interval); internal open gaps are
    filled with :func:`integer_color` of ``t`` or ``s`` unless ``color`` is
    ``"none"``.  Output depends only on the dataset, so it is byte-stable.
    """
    if color not in ("t", "s", "none"):
        raise ValueError(f"color must be t, s or none, got {color!r}")
    W, H = width - 2 * margin, height - 2 * margin
    strip = max(1.0, H / (2.0 * max(ds.n_max, 2) ** 2))

    def x(e):
        return margin + (e + 4.0) / 8.0 * W

    def y(theta):
        return margin + (1.0 - theta) * H - strip / 2

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{W}" height="{H}" fill="none" stroke="black" stroke-width="0.5"/>',
        f'<text x="{width / 2:.1f}" y="{height - 10}" font-size="12" text-anchor="middle">energy</text>',
        f'<text x="12" y="{height / 2:.1f}" font-size="12" transform="rotate(-90 12 {height / 2:.1f})" text-anchor="middle">flux</text>',
    ]
    for row in ds.rows:
        yy = y(row.theta)
        out.append(f'<g data-flux="{row.M}/{row.N}">')
        if color != "none":
            for gap in row.gaps:
                if gap["e_lo"] is None or gap["e_hi"] is None or gap[color] is None:
                    continue
                x0, x1 = x(gap["e_lo"]), x(gap["e_hi"])
                out.append(
                    f'<rect x="{x0:.3f}" y="{yy:.3f}" width="{x1 - x0:.3f}" height="{strip:.3f}" '
                    f'fill="{integer_color(gap[color])}"/>'
                )
        for lo, hi in row.bands:
            x0, x1 = x(lo), x(hi)
            out.append(f'<rect x="{x0:.3f}" y="{yy:.3f}" width="{max(x1 - x0, 0.5):.3f}" height="{strip:.3f}" fill="black"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def row_is_symmetric(row: ButterflyRow, tol=1e-9) -> bool:
    """Band intervals invariant under E -> -E."""
    lows = [lo for lo, _ in row.bands]
    highs = [hi for _, hi in row.bands]
    return all(abs(lo + hi_r) <= tol for lo, hi_r in zip(lows, reversed(highs)))

