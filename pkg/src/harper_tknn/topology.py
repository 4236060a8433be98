"""Chern numbers of gap projections by lattice field-strength integration.

Link variables are normalized determinants of frame overlaps between
neighbouring grid points; the field strength of a plaquette is the principal
argument of the ordered product of its four links.  The sum of all plaquettes
is an exact multiple of 2π on a closed torus, and equals 2π times the Chern
number once every plaquette flux is small.

Orientation convention: plaquettes are traversed k2 first, then k1.  With this
orientation the reference-bundle Chern number of the lowest band at flux 1/3
is -1, which is the sign that makes ``q d + M0 c`` divisible by N.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import GapClosed, GridTooCoarse, NotInteger, RangeError
from .noncomm import CANONICAL, REFERENCE, check_rep
from .numtheory import HarperModel
from .spectral import DEFAULT_GAP_TOL, KGrid, grid_eigensystem

log = logging.getLogger(__name__)

DEFAULT_GRID = KGrid(32, 32)
#: Plaquette flux above which the grid is considered too coarse (radians).
MAX_PLAQUETTE = math.pi / 2
#: Escalation stops once n1 or n2/span2 would exceed this.
GRID_CAP = 512
#: Largest eigenvector array (n1 * n2 * N * N complex entries) a single field
#: may need; about 512 MB.  Escalation stops here as well.
MAX_FIELD_ENTRIES = 2**25


@dataclass
class ProjectorField:
    """Rank-d projector field stored through an orthonormal frame.

    ``frames[i, j]`` is an ``N x d`` matrix whose columns span Range P(k_ij);
    ``P`` is materialized on demand.  The field is periodic on the grid torus:
    links leaving the last row/column use the first one.
    """

    grid: KGrid
    frames: np.ndarray  # (n1, n2, N, d)
    d: int

    @property
    def P(self):
        F = self.frames
        return F @ np.conj(np.swapaxes(F, -1, -2))

    def check(self, idem_tol=1e-9, herm_tol=1e-12):
        P = self.P
        PH = np.conj(np.swapaxes(P, -1, -2))
        idem = np.abs(P @ P - P).max()
        herm = np.abs(P - PH).max()
        tr = np.abs(np.trace(P, axis1=-2, axis2=-1) - self.d).max()
        if idem > idem_tol or herm > herm_tol or tr > idem_tol:
            raise ValueError(f"projector field invalid: idempotency {idem:.1e}, hermiticity {herm:.1e}, trace {tr:.1e}")
        return True


@dataclass(frozen=True)
class ChernResult:
    c: int
    max_plaquette: float
    grid: KGrid


def _required_span(model, rep):
    return model.N if rep == CANONICAL else 1


def projector_field(model: HarperModel, rep: str, d: int, grid: KGrid, gap_tol: float = DEFAULT_GAP_TOL) -> ProjectorField:
    """Spectral projection onto the d lowest bands, sampled on ``grid``.

    The canonical field must be sampled on the extended zone ``k2 in [0, N)``,
    where it is periodic; the reference field on the unit torus.
    """
    check_rep(rep)
    N = model.N
    if not 1 <= d <= N:
        raise RangeError(f"rank d={d} outside [1, {N}]")
    span = _required_span(model, rep)
    if grid.span2 != span:
        raise RangeError(f"{rep} projector fields need span2={span}, got {grid.span2}")
    if d == N:
        frames = np.broadcast_to(np.eye(N, dtype=complex), (grid.n1, grid.n2, N, N))
        return ProjectorField(grid, frames, d)
    values, vectors = grid_eigensystem(model, rep, grid)
    direct_gap = float((values[..., d] - values[..., d - 1]).min())
    if direct_gap <= gap_tol:
        raise GapClosed(d, direct_gap)
    return ProjectorField(grid, vectors[..., :d], d)


def _links(frames, axis):
    nxt = np.roll(frames, -1, axis=axis)
    ov = np.linalg.det(np.conj(np.swapaxes(frames, -1, -2)) @ nxt)
    mag = np.abs(ov)
    if mag.min() < 1e-12:
        raise GridTooCoarse(math.pi, None)
    return ov / mag


def fhs_chern(field: ProjectorField, max_plaquette: float = MAX_PLAQUETTE) -> ChernResult:
    """Integer Chern number of a projector field on the grid torus."""
    U1 = _links(field.frames, 0)
    U2 = _links(field.frames, 1)
    # k2 link, then k1 link at k+e2, then back
    loop = U2 * np.roll(U1, -1, axis=1) * np.conj(np.roll(U2, -1, axis=0)) * np.conj(U1)
    F = np.angle(loop)
    fmax = float(np.abs(F).max())
    if fmax >= max_plaquette:
        raise GridTooCoarse(fmax, field.grid)
    total = float(F.sum()) / (2 * math.pi)
    c = round(total)
    assert abs(total - c) < 1e-6, total
    return ChernResult(int(c), fmax, field.grid)


def _entries(grid, N):
    return grid.n1 * grid.n2 * N * N


def chern_of_projection(model, rep, d, grid=DEFAULT_GRID, gap_tol=DEFAULT_GAP_TOL, max_plaquette=MAX_PLAQUETTE, cap=GRID_CAP):
    """Chern number of the rank-d gap projection with automatic grid doubling.

    ``grid`` is given per unit cell (span2 = 1); for the canonical
    representation it is stretched over the extended zone ``[0, N)``.
    """
    check_rep(rep)
    if grid.span2 != 1:
        raise RangeError("pass the per-cell grid; the extended zone is built here")
    if d == 0:
        g = grid.extended(_required_span(model, rep))
        return ChernResult(0, 0.0, g)
    g = grid.extended(_required_span(model, rep))
    if _entries(g, model.N) > MAX_FIELD_ENTRIES:
        raise RangeError(f"grid {g} for N={model.N} exceeds the memory budget of {MAX_FIELD_ENTRIES} entries")
    while True:
        g = grid.extended(_required_span(model, rep))
        field = projector_field(model, rep, d, g, gap_tol)
        try:
            return fhs_chern(field, max_plaquette)
        except GridTooCoarse as exc:
            if 2 * max(grid.n1, grid.n2) > cap or 4 * _entries(g, model.N) > MAX_FIELD_ENTRIES:
                raise
            log.info("grid %s too coarse for %s d=%d (%.3f rad); doubling", g, model, d, exc.max_plaquette)
            grid = grid.doubled()


def reference_chern(model: HarperModel, d: int, grid: KGrid = DEFAULT_GRID, **kw) -> int:
    """First Chern number of the reference gap bundle (equals -s)."""
    return chern_of_projection(model, REFERENCE, d, grid, **kw).c


def canonical_extended_chern(model: HarperModel, d: int, grid: KGrid = DEFAULT_GRID, **kw) -> int:
    """Chern number of the canonical gap projection over ``[0,1) x [0,N)``.

    The field there is the reference field composed with a degree-M0 map, so
    the result should be ``M0 * reference_chern``.  ``grid`` may be given per
    cell (span2 = 1) or already extended (span2 = N).
    """
    if grid.span2 == model.N and model.N != 1:
        grid = KGrid(grid.n1, grid.n2 // model.N)
    return chern_of_projection(model, CANONICAL, d, grid, **kw).c


def hall_chern(model: HarperModel, d: int, c_ref: int) -> int:
    """Strong-field conductance ``t = (q d + M0 c_ref) / N``.

    Divisibility is not guaranteed by arithmetic alone; it holds only when
    ``c_ref`` is the true reference Chern number, so a remainder means the
    upstream lattice computation failed.
    """
    if not 0 <= d <= model.N:
        raise RangeError(f"gap label d={d} outside [0, {model.N}]")
    num = model.q * d + model.M0 * c_ref
    t, rem = divmod(num, model.N)
    if rem:
        raise NotInteger(num, model.N)
    return t


def total_bundle_chern(model: HarperModel, grid: KGrid = DEFAULT_GRID) -> int:
    """Chern number of the full fiber bundle, via the full projection."""
    return hall_chern(model, model.N, reference_chern(model, model.N, grid))
