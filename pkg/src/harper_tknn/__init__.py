"""Generalized (q, r)-Harper operators at rational flux: fiber matrices, gap
charts, Chern numbers in the canonical and reference bundles, and the
generalized TKNN equations."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    Ambiguous,
    Degenerate,
    GapClosed,
    GapNotFound,
    GridTooCoarse,
    HarperError,
    NoConvergence,
    NoSolutionInWindow,
    NotCoprime,
    NotHermitian,
    NotInteger,
    RangeError,
)
from .numtheory import (  # noqa: E402
    HarperModel,
    bezout_alpha_beta,
    convergents,
    dr_nr,
    farey,
    tknn_solve,
    validate_model,
)
from .noncomm import (  # noqa: E402
    CANONICAL,
    REFERENCE,
    AlgebraElement,
    KPoint,
    clock_matrix,
    fiber,
    generators,
    harper_fiber,
    harper_symbol,
    hermitize,
    twisted_shift,
)
from .spectral import KGrid, band_structure, eigh, gap_chart, ids  # noqa: E402
from .topology import (  # noqa: E402
    canonical_extended_chern,
    fhs_chern,
    hall_chern,
    projector_field,
    reference_chern,
    total_bundle_chern,
)
from .tknn import gap_label, track_irrational, verify_all, verify_gap  # noqa: E402
