"""Band structures on Brillouin-torus grids, gap charts and the integrated
density of states."""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NoConvergence, NotHermitian, RangeError
from .noncomm import REFERENCE, check_rep, harper_batch
from .numtheory import HarperModel

log = logging.getLogger(__name__)

#: Largest fiber dimension accepted for dense diagonalization.
DENSE_N_CAP = 256

OPEN = "open"
CLOSED = "closed"
INDETERMINATE = "indeterminate"

DEFAULT_GAP_TOL = 1e-6
#: A gap narrower than this after band-edge refinement counts as a touching.
TOUCH_TOL = 1e-9
#: Band-edge searches stop after this many halvings without improvement.
STALL_LEVELS = 4


@dataclass(frozen=True)
class KGrid:
    """Uniform grid ``k = (i/n1, span2*j/n2)`` on ``[0,1) x [0,span2)``."""

    n1: int
    n2: int
    span2: int = 1

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1 or self.span2 < 1:
            raise RangeError(f"grid sizes must be positive: {self}")

    @property
    def k1(self):
        return np.arange(self.n1) / self.n1

    @property
    def k2(self):
        return self.span2 * np.arange(self.n2) / self.n2

    def mesh(self):
        return np.meshgrid(self.k1, self.k2, indexing="ij")

    def doubled(self):
        return KGrid(2 * self.n1, 2 * self.n2, self.span2)

    def extended(self, span2):
        """Same density per unit k2, covering ``[0, span2)``."""
        return KGrid(self.n1, self.n2 * span2, span2)

    def __str__(self):
        s = f"{self.n1}x{self.n2}"
        return s if self.span2 == 1 else f"{s}/span{self.span2}"


def parse_grid(text: str) -> KGrid:
    try:
        a, b = text.lower().split("x")
        return KGrid(int(a), int(b))
    except (ValueError, TypeError):
        raise RangeError(f"grid must look like 32x32, got {text!r}") from None


@dataclass
class EigenSystem:
    values: np.ndarray
    vectors: np.ndarray


def eigh(H, herm_tol: float = 1e-10) -> EigenSystem:
    """Dense Hermitian eigendecomposition with ascending eigenvalues.

    LAPACK's divide-and-conquer driver is deterministic for fixed input;
    degenerate eigenvalues are fine.
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise NotHermitian(f"expected a square matrix, got shape {H.shape}")
    asym = np.abs(H - H.conj().T).max() if H.size else 0.0
    if asym > herm_tol:
        raise NotHermitian(f"|H - H†|_max = {asym:.3e} > {herm_tol:.0e}")
    try:
        values, vectors = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"eigh failed on {H.shape[0]}x{H.shape[0]} matrix: {exc}") from exc
    return EigenSystem(values, vectors)


def _eigh_stack(H):
    try:
        return np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"eigh failed on a stack of {H.shape[:-2]} matrices: {exc}") from exc


@functools.lru_cache(maxsize=8)
def grid_eigensystem(model: HarperModel, rep: str, grid: KGrid):
    """Eigenvalues ``(n1, n2, N)`` and eigenvectors ``(n1, n2, N, N)`` of the
    Harper fibers on ``grid``.  Cached; the returned arrays are read-only."""
    check_rep(rep)
    if model.N > DENSE_N_CAP:
        raise RangeError(f"N={model.N} exceeds the dense diagonalization cap {DENSE_N_CAP}")
    K1, K2 = grid.mesh()
    values, vectors = _eigh_stack(harper_batch(model, K1, K2, rep))
    values.flags.writeable = False
    vectors.flags.writeable = False
    return values, vectors


@dataclass
class BandStructure:
    model: HarperModel
    rep: str
    grid: KGrid
    energies: np.ndarray  # (n1, n2, N), ascending along the last axis

    @property
    def N(self):
        return self.model.N

    def band_extrema(self):
        """Grid minimum and maximum of every band, shape ``(N, 2)``."""
        E = self.energies.reshape(-1, self.N)
        return np.stack([E.min(axis=0), E.max(axis=0)], axis=1)


def band_structure(model: HarperModel, grid: KGrid, rep: str = REFERENCE) -> BandStructure:
    values, _ = grid_eigensystem(model, rep, grid)
    return BandStructure(model, rep, grid, values)


def refine_band_edges(bands: BandStructure, levels: int = 40) -> np.ndarray:
    """Band minima and maxima polished by a shrinking pattern search.

    Starts from the best grid point of each extremum and samples a 5x5 stencil
    that halves in size each level, keeping the best value seen.  All 2N
    searches share one batched eigensolve per level over their distinct points.  Values only ever move
    outward from the grid extrema, so closed gaps cannot be reported open
    because the grid missed a touching point.
    """
    model, rep, grid, N = bands.model, bands.rep, bands.grid, bands.N
    E = bands.energies.reshape(-1, N)
    k1s, k2s = (a.ravel() for a in grid.mesh())
    # rows 0..N-1 are minima of band b, rows N..2N-1 maxima
    band = np.concatenate([np.arange(N), np.arange(N)])
    sign = np.concatenate([np.ones(N), -np.ones(N)])  # minimize sign * E
    start = np.concatenate([E.argmin(axis=0), E.argmax(axis=0)])
    best_k = np.stack([k1s[start], k2s[start]], axis=1)
    best_v = sign * E[start, band]

    steps = np.arange(-2, 3)
    off1, off2 = np.meshgrid(steps, steps, indexing="ij")
    h = np.array([1.0 / grid.n1, grid.span2 / grid.n2])
    stall = np.zeros(2 * N, dtype=int)
    for _ in range(levels):
        # a search that has not moved for STALL_LEVELS halvings sits on its extremum
        rows = np.flatnonzero(stall < STALL_LEVELS)
        if rows.size == 0:
            break
        c1 = best_k[rows, 0, None] + off1.ravel() * h[0]
        c2 = best_k[rows, 1, None] + off2.ravel() * h[1]
        # searches that sit at the same k share their stencil, so solve each point once
        pts, inv = np.unique(np.stack([c1.ravel(), c2.ravel()], axis=1), axis=0, return_inverse=True)
        vals = np.linalg.eigvalsh(harper_batch(model, pts[:, 0], pts[:, 1], rep))[inv.ravel()].reshape(c1.shape + (N,))
        cand = sign[rows, None] * np.take_along_axis(vals, band[rows, None, None], axis=2)[..., 0]
        i = cand.argmin(axis=1)
        sel = np.arange(rows.size)
        better = cand[sel, i] < best_v[rows]
        moved = rows[better]
        best_v[moved] = cand[sel, i][better]
        best_k[moved] = np.stack([c1[sel, i], c2[sel, i]], axis=1)[better]
        stall[rows] = np.where(better, 0, stall[rows] + 1)
        h = h / 2
    edges = np.empty((N, 2))
    edges[:, 0] = best_v[:N]
    edges[:, 1] = -best_v[N:]
    return edges


@dataclass(frozen=True)
class Gap:
    d: int
    status: str
    e_lo: float
    e_hi: float
    g: Optional[int] = None

    @property
    def is_open(self):
        return self.status == OPEN

    @property
    def width(self):
        return self.e_hi - self.e_lo

    @property
    def midpoint(self):
        if np.isinf(self.e_lo):
            return self.e_hi - 1.0
        if np.isinf(self.e_hi):
            return self.e_lo + 1.0
        return 0.5 * (self.e_lo + self.e_hi)


@dataclass
class GapChart:
    """Every candidate gap ``d = 0..N`` with its status.

    Only open gaps carry an ordinal ``g``; ordinals count open gaps from the
    bottom, so ``g = 0`` is always the inf-gap.
    """

    gaps: list[Gap]
    band_edges: np.ndarray = field(repr=False, default=None)

    @property
    def open_gaps(self):
        return [gap for gap in self.gaps if gap.is_open]

    @property
    def open_labels(self):
        return [gap.d for gap in self.open_gaps]

    def by_d(self, d):
        return self.gaps[d]

    def by_ordinal(self, g):
        for gap in self.gaps:
            if gap.g == g:
                return gap
        raise RangeError(f"no open gap with ordinal {g}")


def classify_gap(width: float, gap_tol: float) -> str:
    if width > gap_tol:
        return OPEN
    if width <= TOUCH_TOL:
        return CLOSED
    return INDETERMINATE


def gap_chart(bands: BandStructure, gap_tol: float = DEFAULT_GAP_TOL, refine: bool = True) -> GapChart:
    """Classify the gap above every band.

    A gap is open when (refined) min of the upper band minus max of the lower
    band exceeds ``gap_tol``, closed when bands overlap or touch to
    ``TOUCH_TOL``, indeterminate in between.
    """
    if bands.grid.span2 != 1:
        raise RangeError("gap_chart expects a grid with span2 = 1")
    N = bands.N
    edges = refine_band_edges(bands) if refine else bands.band_extrema()
    gaps = [Gap(0, OPEN, -np.inf, float(edges[0, 0]))]
    for d in range(1, N):
        lo, hi = float(edges[d - 1, 1]), float(edges[d, 0])
        status = classify_gap(hi - lo, gap_tol)
        if status == INDETERMINATE:
            log.warning("gap above band %d of %s has width %.3e: indeterminate", d, bands.model, hi - lo)
        gaps.append(Gap(d, status, lo, hi))
    gaps.append(Gap(N, OPEN, float(edges[N - 1, 1]), np.inf))
    g = 0
    numbered = []
    for gap in gaps:
        if gap.is_open:
            gap = Gap(gap.d, gap.status, gap.e_lo, gap.e_hi, g)
            g += 1
        numbered.append(gap)
    return GapChart(numbered, edges)


def ids(bands: BandStructure, energy: float) -> float:
    """Fraction of grid eigenvalues strictly below ``energy``."""
    if bands.grid.span2 != 1:
        raise RangeError("ids expects a grid with span2 = 1")
    E = bands.energies
    return int(np.count_nonzero(E < energy)) / E.size


def hofstadter_gap_labels(N: int) -> list[int]:
    """Band-count labels ``d_g`` of the open gaps, ``g = 0..N_max``.

    N odd: d_g = g.  N even: the central gap is closed, so d_g = g below
    N/2 and g + 1 from there on.
    """
    if N % 2:
        return list(range(N + 1))
    return [g if g < N // 2 else g + 1 for g in range(N)]

