"""Exceptional points of complex symmetric matrices.

Normalized Jordan chains, Puiseux scenario classification, loop monodromy
and geometric phases, and a Newton search for EP2/EP3 locations.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AmbiguousStructure,
    ChainBreaks,
    DegenerateNormalization,
    DimensionMismatch,
    EPAtlasError,
    EPOnPath,
    InconsistentCycles,
    InvalidInput,
    MatchingAmbiguous,
    NoConvergence,
    NonConvergence,
    NonSymmetricFile,
    Singular,
    WrongOrder,
)
from .linalg import c_dot, char_poly, eig, null_space, poly_roots, solve_linear  # noqa: E402
from .jordan import JordanChain, build_chain, detect_ep, jordan_chain, normalize_chain  # noqa: E402
from .models import LinearFamily, PolynomialFamily, get_family, waveguide  # noqa: E402
from .puiseux import Kind, PuiseuxClass, classify_ep2, classify_ep3, fit_exponents  # noqa: E402
from .tracking import ComplexCircle, LoopSpec, RealEllipse, track_loop  # noqa: E402
from .epfind import EPSearchProblem, find_ep  # noqa: E402
