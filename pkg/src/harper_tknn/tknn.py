"""Gap-by-gap verification of the generalized TKNN equations, and tracking of
a gap along the continued-fraction convergents of an irrational flux."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import Ambiguous, GapNotFound, NoSolutionInWindow, NotCoprime, RangeError
from .numtheory import HarperModel, convergents, tknn_solve, validate_model
from .spectral import CLOSED, DEFAULT_GAP_TOL, GapChart, band_structure, gap_chart, ids
from .topology import DEFAULT_GRID, canonical_extended_chern, hall_chern, reference_chern

log = logging.getLogger(__name__)


@dataclass
class TknnRecord:
    g: Optional[int]
    d: int
    status: str
    e_lo: float
    e_hi: float
    t_num: Optional[int] = None
    s_num: Optional[int] = None
    t_dio: Optional[int] = None
    s_dio: Optional[int] = None
    ids_value: Optional[float] = None
    c_ext: Optional[int] = None
    match: bool = False

    def satisfies(self, model: HarperModel) -> bool:
        """Numeric pair solves ``N t + M0 s = q d`` exactly."""
        if self.t_num is None or self.s_num is None:
            return False
        return model.N * self.t_num + model.M0 * self.s_num == model.q * self.d


def analyse(model, grid, gap_tol):
    bands = band_structure(model, grid)
    return bands, gap_chart(bands, gap_tol)


def make_record(model, chart: GapChart, bands, d, grid, gap_tol, with_canonical):
    gap = chart.by_d(d)
    rec = TknnRecord(gap.g, d, gap.status, gap.e_lo, gap.e_hi)
    try:
        dio = tknn_solve(model, d)
        rec.t_dio, rec.s_dio = dio.t, dio.s
    except NoSolutionInWindow:
        pass
    if not gap.is_open:
        return rec
    rec.ids_value = ids(bands, gap.midpoint)
    c_ref = 0 if d in (0, model.N) else reference_chern(model, d, grid, gap_tol=gap_tol)
    rec.s_num = -c_ref
    rec.t_num = hall_chern(model, d, c_ref)
    if with_canonical:
        rec.c_ext = canonical_extended_chern(model, d, grid, gap_tol=gap_tol)
    rec.match = (rec.t_num, rec.s_num) == (rec.t_dio, rec.s_dio)
    return rec


def verify_label(model: HarperModel, d: int, grid=DEFAULT_GRID, gap_tol=DEFAULT_GAP_TOL, with_canonical=False) -> TknnRecord:
    """Record for the gap above ``d`` bands, open or not."""
    if not 0 <= d <= model.N:
        raise RangeError(f"gap label d={d} outside [0, {model.N}]")
    bands, chart = analyse(model, grid, gap_tol)
    return make_record(model, chart, bands, d, grid, gap_tol, with_canonical)


def verify_gap(model: HarperModel, g: int, grid=DEFAULT_GRID, gap_tol=DEFAULT_GAP_TOL, with_canonical=False) -> TknnRecord:
    """Record for the open gap with ordinal ``g`` (0 = inf-gap)."""
    bands, chart = analyse(model, grid, gap_tol)
    d = chart.by_ordinal(g).d
    return make_record(model, chart, bands, d, grid, gap_tol, with_canonical)


def verify_all(model: HarperModel, grid=DEFAULT_GRID, gap_tol=DEFAULT_GAP_TOL, with_canonical=False) -> list[TknnRecord]:
    """One record per open or indeterminate gap; closed gaps are left out."""
    bands, chart = analyse(model, grid, gap_tol)
    return [
        make_record(model, chart, bands, gap.d, grid, gap_tol, with_canonical)
        for gap in chart.gaps
        if gap.status != CLOSED
    ]


def rational_identity_holds(model: HarperModel, rec: TknnRecord) -> bool:
    """``t + (q θ - r) s - q d/N == 0`` in exact rational arithmetic."""
    if rec.t_num is None:
        return False
    theta = Fraction(model.M, model.N)
    lhs = rec.t_num + (model.q * theta - model.r) * rec.s_num - Fraction(model.q * rec.d, model.N)
    return lhs == 0


def gap_label(tau: float, theta: float, c_max: int, tol: float = 1e-9) -> tuple[int, int]:
    """Integer pair ``(m, c)`` with ``|c| <= c_max`` and ``tau ≈ m - theta c``.

    The best candidate must lie within ``tol`` and every other one farther
    than ``2 tol``; otherwise :class:`Ambiguous` carries all candidates within
    ``2 tol``.
    """
    if not 0 <= tau <= 1:
        raise RangeError(f"tau must lie in [0, 1], got {tau}")
    if c_max < 1:
        raise RangeError("c_max must be at least 1")
    scored = []
    for c in range(-c_max, c_max + 1):
        m = round(tau + theta * c)
        scored.append((abs(tau - (m - theta * c)), m, c))
    scored.sort()
    err, m, c = scored[0]
    close = [(mm, cc) for e, mm, cc in scored if e <= 2 * tol]
    if err >= tol or len(close) > 1:
        raise Ambiguous(close)
    return m, c


@dataclass
class TraceEntry:
    M: int
    N: int
    status: str  # "ok", "inadmissible" or "gap-not-found"
    record: Optional[TknnRecord] = None
    identity: Optional[bool] = None
    note: str = ""


@dataclass
class GapTrace:
    theta: float
    q: int
    r: int
    target_ids: float
    window: float
    label: Optional[tuple[int, int]]
    entries: list[TraceEntry] = field(default_factory=list)

    @property
    def hits(self):
        return [e for e in self.entries if e.status == "ok"]

    @property
    def stable(self) -> bool:
        s_values = {e.record.s_num for e in self.hits}
        return len(s_values) == 1

    @property
    def identities_hold(self) -> bool:
        return all(e.identity for e in self.hits)


def _locate(chart, N, target_ids, window, label, theta_k):
    """Open gap to track at one convergent.

    With a label ``(m, c)`` the gap is the one with IDS ``m - theta_k c``
    exactly; without one, the open gap whose IDS is nearest ``target_ids``
    within ``window``.
    """
    if label is not None:
        m, c = label
        tau = m - theta_k * c
        if 0 <= tau <= 1 and (tau * N).denominator == 1:
            gap = chart.by_d(int(tau * N))
            if gap.is_open:
                return gap
            raise GapNotFound(f"gap d={int(tau * N)} at {theta_k} is {gap.status}")
        raise GapNotFound(f"label {label} has no gap at {theta_k}")
    best = min(chart.open_gaps, key=lambda gp: abs(gp.d / N - target_ids))
    if abs(best.d / N - target_ids) > window:
        raise GapNotFound(f"no open gap with IDS within {window} of {target_ids} at {theta_k}")
    return best


def _track_one(theta_k, q, r, target_ids, window, label, grid, gap_tol):
    M, N = theta_k.numerator, theta_k.denominator
    try:
        model = validate_model(q, r, M, N)
    except NotCoprime as exc:
        return TraceEntry(M, N, "inadmissible", note=str(exc))
    bands, chart = analyse(model, grid, gap_tol)
    try:
        gap = _locate(chart, N, target_ids, window, label, theta_k)
    except GapNotFound as exc:
        return TraceEntry(M, N, "gap-not-found", note=str(exc))
    rec = make_record(model, chart, bands, gap.d, grid, gap_tol, False)
    return TraceEntry(M, N, "ok", rec, rational_identity_holds(model, rec))


def track_irrational(theta, q, r, depth, target_ids, window=1e-2, grid=DEFAULT_GRID,
                     gap_tol=DEFAULT_GAP_TOL, c_max=None, jobs=1) -> GapTrace:
    """Follow the gap with IDS ≈ ``target_ids`` along the convergents of ``theta``.

    The gap label ``(m, c)`` is first identified at ``theta`` itself (within
    ``window``); at each convergent M_k/N_k the tracked gap is then the one
    with IDS ``m - (M_k/N_k) c``.  If no unique label exists (e.g. rational
    ``theta``) tracking falls back to the nearest IDS within ``window``.
    """
    if depth < 2:
        raise RangeError("depth must be at least 2")
    fracs = convergents(theta, depth)
    if c_max is None:
        c_max = max(1, (max(f.denominator for f in fracs) - 1) // 2)
    try:
        label = gap_label(target_ids, float(Fraction(theta)), c_max, tol=window)
    except Ambiguous:
        label = None
    trace = GapTrace(float(Fraction(theta)), q, r, target_ids, window, label)
    args = (q, r, target_ids, window, label, grid, gap_tol)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            trace.entries = list(pool.map(lambda f: _track_one(f, *args), fracs))
    else:
        trace.entries = [_track_one(f, *args) for f in fracs]
    for e in trace.entries:
        log.info("convergent %d/%d: %s %s", e.M, e.N, e.status, e.note)
    return trace


def label_for_record(model: HarperModel, rec: TknnRecord) -> tuple[int, int]:
    """``(m, c)`` with ``d/N = m - θ c`` implied by a rational-flux record.

    For q = 1 this is ``(t, -s)``; in general ``m = (t - r s)/q``.
    """
    m = Fraction(rec.t_num - model.r * rec.s_num, model.q)
    assert m.denominator == 1
    return int(m), -rec.s_num

