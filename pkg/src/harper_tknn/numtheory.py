"""Exact integer arithmetic: model validation, Bezout data, continued fractions
and the generalized TKNN Diophantine solver.

Everything here works on Python ints and :class:`fractions.Fraction`; nothing
touches floating point except the continued-fraction expansion of a float flux.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import NamedTuple

from .errors import Degenerate, NoSolutionInWindow, NotCoprime, RangeError

#: Hard cap on N (and q) so every intermediate product fits a 64-bit integer.
N_LIMIT = 10_000


class BezoutData(NamedTuple):
    alpha: int
    beta: int
    d_r: int
    n_r: int
    M0: int


class DiophantineSolution(NamedTuple):
    t: int
    s: int
    d: int


@dataclass(frozen=True)
class HarperModel:
    """Validated (q, r, M, N) together with the derived Bezout data.

    Build instances with :func:`validate_model`; the constructor does not check
    anything by itself.
    """

    q: int
    r: int
    M: int
    N: int
    alpha: int
    beta: int
    d_r: int
    n_r: int
    M0: int

    @property
    def theta(self) -> Fraction:
        return Fraction(self.M, self.N)

    @property
    def bezout(self) -> BezoutData:
        return BezoutData(self.alpha, self.beta, self.d_r, self.n_r, self.M0)

    @property
    def params(self) -> tuple[int, int, int, int]:
        return (self.q, self.r, self.M, self.N)

    def __str__(self):
        return f"HarperModel(q={self.q}, r={self.r}, theta={self.M}/{self.N})"


def _check_int(name, value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError(f"{name} must be an integer, got {value!r}")


def bezout_alpha_beta(q: int, r: int) -> tuple[int, int]:
    """Solve ``beta*q - alpha*r = 1`` with ``alpha`` in ``[0, q)``."""
    if gcd(q, r) != 1:
        raise NotCoprime(("q", "r"), q, r)
    if q == 1:
        return 0, 1
    # alpha = -r^{-1} mod q
    alpha = (-pow(r, -1, q)) % q
    beta, rem = divmod(1 + alpha * r, q)
    assert rem == 0
    return alpha, beta


def dr_nr(q: int, N: int) -> tuple[int, int]:
    """Solve ``q*d_r + N*n_r = 1`` with the smallest ``|d_r|`` (ties go positive)."""
    if gcd(q, N) != 1:
        raise NotCoprime(("q", "N"), q, N)
    d = pow(q, -1, N)
    if 2 * d > N:
        d -= N
    n, rem = divmod(1 - q * d, N)
    assert rem == 0
    return d, n


def validate_model(q: int, r: int, M: int, N: int) -> HarperModel:
    """Check the admissibility conditions and return the populated model.

    Raises :class:`NotCoprime` naming the violated pair, or
    :class:`RangeError` for out-of-range parameters.
    """
    for name, v in (("q", q), ("r", r), ("M", M), ("N", N)):
        _check_int(name, v)
    if q < 1 or N < 1:
        raise RangeError(f"q and N must be positive (q={q}, N={N})")
    if N > N_LIMIT or q > N_LIMIT:
        raise RangeError(f"q and N must not exceed {N_LIMIT} (q={q}, N={N})")
    if not 0 < M < N:
        raise RangeError(f"M must lie in (0, N): M={M}, N={N}")
    if abs(r) >= q:
        raise RangeError(f"r must lie in {{0, ±1, ..., ±(q-1)}}: r={r}, q={q}")
    if gcd(M, N) != 1:
        raise NotCoprime(("M", "N"), M, N)
    if gcd(q, r) != 1:
        raise NotCoprime(("q", "r"), q, r)
    if gcd(q, N) != 1:
        raise NotCoprime(("q", "N"), q, N)
    alpha, beta = bezout_alpha_beta(q, r)
    d_r, n_r = dr_nr(q, N)
    M0 = q * M - r * N
    # gcd(M0, N) = gcd(qM, N) = 1 follows from the two checks above
    assert gcd(M0, N) == 1
    return HarperModel(q, r, M, N, alpha, beta, d_r, n_r, M0)


def tknn_solve(model: HarperModel, d: int) -> DiophantineSolution:
    """Unique ``(t, s)`` with ``N t + M0 s = q d`` and ``2|s| < N``."""
    _check_int("d", d)
    N, q, M0 = model.N, model.q, model.M0
    if not 0 <= d <= N:
        raise RangeError(f"gap label d={d} outside [0, {N}]")
    s = (q * d * pow(M0, -1, N)) % N
    if 2 * s > N:
        s -= N
    if 2 * abs(s) >= N:
        raise NoSolutionInWindow(d, s, N)
    t, rem = divmod(q * d - M0 * s, N)
    assert rem == 0
    return DiophantineSolution(t, s, d)


def convergents(theta, depth: int, tol: float = 1e-12) -> list[Fraction]:
    """Continued-fraction convergents of ``theta`` lying in (0, 1).

    ``theta`` may be a float, a :class:`~fractions.Fraction` or a string
    accepted by ``Fraction``.  Expansion stops after ``depth`` convergents, when
    a rational input is exhausted, or when a float is matched to ``tol``.
    """
    if depth < 1:
        raise RangeError("depth must be positive")
    exact = not isinstance(theta, float)
    x = Fraction(theta)
    if not 0 < x < 1:
        raise Degenerate(f"theta must lie in (0, 1), got {theta}")
    out = []
    p0, q0, p1, q1 = 0, 1, 1, 0  # p_{-2}/q_{-2}, p_{-1}/q_{-1}
    rest = x
    while len(out) < depth:
        a = rest.numerator // rest.denominator
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        c = Fraction(p1, q1)
        if 0 < c < 1:
            out.append(c)
        frac = rest - a
        if frac == 0:
            break
        if not exact and abs(float(x - c)) <= tol:
            break
        rest = 1 / frac
    return out


def farey(n_max: int, q: int = 1) -> list[Fraction]:
    """Reduced fractions in (0, 1) with denominator ``<= n_max`` coprime to ``q``."""
    out = [
        Fraction(M, N)
        for N in range(2, n_max + 1)
        if gcd(N, q) == 1
        for M in range(1, N)
        if gcd(M, N) == 1
    ]
    return sorted(out)
