"""Exception hierarchy shared by all modules."""

from math import gcd


class HarperError(Exception):
    """Base class for every error raised by this package."""


class NotCoprime(HarperError, ValueError):
    def __init__(self, which, a, b):
        self.which = which
        self.values = (a, b)
        super().__init__(f"gcd({which[0]},{which[1]}) != 1 (gcd({a},{b}) = {gcd(a, b)})")


class RangeError(HarperError, ValueError):
    pass


class Degenerate(HarperError, ValueError):
    pass


class NoSolutionInWindow(HarperError):
    """No (t, s) with 2|s| < N solves the TKNN equation for this label.

    This is the arithmetic signature of a closed gap, not a bug.
    """

    def __init__(self, d, residue, N):
        self.d = d
        self.residue = residue
        self.N = N
        super().__init__(f"no solution with 2|s| < {N} for d={d} (s = {residue} mod {N})")


class NotHermitian(HarperError, ValueError):
    pass


class NoConvergence(HarperError, ArithmeticError):
    pass


class GapClosed(HarperError):
    def __init__(self, d, min_gap=None):
        self.d = d
        self.min_gap = min_gap
        msg = f"gap above band {d} is not spectrally isolated"
        if min_gap is not None:
            msg += f" (min direct gap {min_gap:.3e})"
        super().__init__(msg)


class GridTooCoarse(HarperError, ArithmeticError):
    def __init__(self, max_plaquette, grid=None):
        self.max_plaquette = max_plaquette
        self.grid = grid
        super().__init__(f"plaquette flux {max_plaquette:.3f} rad exceeds admissibility bound (grid {grid})")


class NotInteger(HarperError, ArithmeticError):
    def __init__(self, numerator, N):
        self.numerator = numerator
        self.N = N
        super().__init__(f"{numerator} is not divisible by N={N}; upstream Chern number is wrong")


class Ambiguous(HarperError):
    """Several gap labels fit the measured IDS within tolerance."""

    def __init__(self, candidates):
        self.candidates = list(candidates)
        super().__init__(f"ambiguous gap label, candidates {self.candidates}")


class GapNotFound(HarperError):
    pass

