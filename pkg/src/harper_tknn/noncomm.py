"""Fiber matrices of the canonical and reference bundle representations.

At rational flux M/N every element of the rotation algebra is represented by an
N x N matrix field over the Brillouin torus.  The two generators are

    canonical:  U(k) = exp(2πi M0 k2 / N) C^{qM},   V(k) = exp(2πi n_r k1) S_{k1}^{d_r}
    reference:  U(k) = exp(2πi k2) C^{qM},          V(k) = same as canonical

with C the N x N clock matrix and S_{k1} the shift whose wrap-around entry
carries the phase exp(2πi q k1).  k is never reduced: canonical fibers have
period N in k2, reference fibers period 1.

The ``*_batch`` functions accept broadcastable arrays of k1, k2 and return
stacks of matrices; they are what the spectral and topology modules use.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .numtheory import HarperModel

CANONICAL = "canonical"
REFERENCE = "reference"
REPS = (CANONICAL, REFERENCE)


def check_rep(rep):
    if rep not in REPS:
        raise ValueError(f"representation must be one of {REPS}, got {rep!r}")
    return rep


class KPoint(NamedTuple):
    k1: float
    k2: float


@dataclass(frozen=True)
class FiberMatrix:
    entries: np.ndarray
    model: HarperModel
    k: KPoint
    rep: str

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    @property
    def N(self):
        return self.entries.shape[-1]


class AlgebraElement:
    """Finite sum ``sum a_nm U^n V^m`` with the ordering U-powers first.

    Terms are kept in a dict keyed by ``(n, m)``; repeated keys passed to the
    constructor are summed.
    """

    def __init__(self, terms=()):
        self.terms: dict[tuple[int, int], complex] = {}
        for n, m, a in terms:
            a = complex(a)
            if not cmath.isfinite(a):
                raise ValueError(f"non-finite coefficient for U^{n} V^{m}")
            key = (int(n), int(m))
            self.terms[key] = self.terms.get(key, 0j) + a

    def __iter__(self):
        for (n, m), a in self.terms.items():
            yield n, m, a

    def __len__(self):
        return len(self.terms)

    def __add__(self, other):
        return AlgebraElement(list(self) + list(other))

    def __eq__(self, other):
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        return self.terms == other.terms

    def __repr__(self):
        return f"AlgebraElement({sorted(self)})"

    def coefficient(self, n, m):
        return self.terms.get((n, m), 0j)


def harper_symbol() -> AlgebraElement:
    """U + U† + V + V†."""
    return AlgebraElement([(1, 0, 1), (-1, 0, 1), (0, 1, 1), (0, -1, 1)])


def clock_matrix(N: int) -> np.ndarray:
    return np.diag(np.exp(2j * np.pi * np.arange(N) / N))


def twisted_shift(N: int, q: int, k1: float) -> np.ndarray:
    """Cyclic shift e_j -> e_{j+1} with e_{N-1} -> exp(2πi q k1) e_0."""
    return shift_power_batch(N, q, np.asarray(k1, dtype=float), 1)


def shift_power_batch(N, q, k1, p):
    """``S_{k1}^p`` for integer p, stacked over the shape of ``k1``.

    Column j of the p-th power has a single entry at row (j+p) mod N carrying
    the phase exp(2πi q k1) once per wrap past index N-1.  Negative powers are
    adjoints of positive ones.
    """
    k1 = np.asarray(k1, dtype=float)
    a = abs(p)
    j = np.arange(N)
    rows = (j + a) % N
    wraps = (j + a) // N
    out = np.zeros(k1.shape + (N, N), dtype=complex)
    out[..., rows, j] = np.exp(2j * np.pi * q * k1[..., None] * wraps)
    if p < 0:
        out = np.conj(np.swapaxes(out, -1, -2))
    return out


def _u_phase(model, k2, rep):
    if check_rep(rep) == CANONICAL:
        return model.M0 * np.asarray(k2, dtype=float) / model.N
    return np.asarray(k2, dtype=float)


def u_power_batch(model, k1, k2, rep, n):
    """Diagonal of ``U(k)^n``, shape ``broadcast(k1, k2) + (N,)``."""
    N = model.N
    k1, k2 = np.broadcast_arrays(np.asarray(k1, float), np.asarray(k2, float))
    exps = (n * model.q * model.M * np.arange(N)) % N / N
    return np.exp(2j * np.pi * (n * _u_phase(model, k2, rep)[..., None] + exps))


def v_power_batch(model, k1, k2, rep, m):
    check_rep(rep)
    k1, k2 = np.broadcast_arrays(np.asarray(k1, float), np.asarray(k2, float))
    phase = np.exp(2j * np.pi * m * model.n_r * k1)
    return phase[..., None, None] * shift_power_batch(model.N, model.q, k1, m * model.d_r)


def generators_batch(model, k1, k2, rep):
    U = u_power_batch(model, k1, k2, rep, 1)
    V = v_power_batch(model, k1, k2, rep, 1)
    diag = np.zeros(U.shape + (model.N,), dtype=complex)
    idx = np.arange(model.N)
    diag[..., idx, idx] = U
    return diag, V


def generators(model: HarperModel, k, rep: str) -> tuple[np.ndarray, np.ndarray]:
    """``(U(k), V(k))`` for one k-point."""
    k = KPoint(*k)
    U, V = generators_batch(model, k.k1, k.k2, rep)
    return U, V


def fiber_batch(model, element: AlgebraElement, k1, k2, rep):
    k1, k2 = np.broadcast_arrays(np.asarray(k1, float), np.asarray(k2, float))
    N = model.N
    out = np.zeros(k1.shape + (N, N), dtype=complex)
    for n, m, a in element:
        if a == 0:
            continue
        Vm = v_power_batch(model, k1, k2, rep, m)
        Un = u_power_batch(model, k1, k2, rep, n)
        out += a * Un[..., :, None] * Vm
    return out


def fiber(model: HarperModel, element: AlgebraElement, k, rep: str) -> FiberMatrix:
    k = KPoint(float(k[0]), float(k[1]))
    return FiberMatrix(fiber_batch(model, element, k.k1, k.k2, rep), model, k, rep)


def harper_batch(model, k1, k2, rep):
    """Generalized Harper fibers ``U + U† + V + V†`` stacked over k."""
    U = u_power_batch(model, k1, k2, rep, 1)
    V = v_power_batch(model, k1, k2, rep, 1)
    H = V + np.conj(np.swapaxes(V, -1, -2))
    idx = np.arange(model.N)
    H[..., idx, idx] += 2 * U.real
    return H


def harper_fiber(model: HarperModel, k, rep: str) -> FiberMatrix:
    k = KPoint(float(k[0]), float(k[1]))
    return FiberMatrix(harper_batch(model, k.k1, k.k2, rep), model, k, rep)


def adjoint(element: AlgebraElement, model: HarperModel) -> AlgebraElement:
    """Adjoint reordered into the U^n V^m convention.

    ``(U^n V^m)† = V^-m U^-n = exp(-2πi θ n m) U^-n V^-m``.
    """
    theta = model.M / model.N
    return AlgebraElement(
        (-n, -m, np.conj(a) * cmath.exp(-2j * cmath.pi * theta * n * m)) for n, m, a in element
    )


def hermitize(element: AlgebraElement, model: HarperModel) -> AlgebraElement:
    """B + B†."""
    return element + adjoint(element, model)
