"""Perturbation scenarios of a linear family ``H0 + z H1`` at an exceptional point.

At an EP3 with normalized chain ``(u0, u1, u2)`` the scalar
``c = u0^T H1 u0`` decides the scenario:

* ``c != 0``: all three eigenvalues are branches of one third-root series,
  ``lambda_k = lambda0 + c**(1/3) w**k z**(1/3) + ...`` with ``w = exp(2 pi i/3)``;
* ``c == 0``, ``d = 2 u1^T H1 u0 != 0``: a square-root pair
  ``lambda0 +- d**(1/2) z**(1/2)`` plus a Taylor branch ``lambda0 + kappa z``,
  ``kappa = u0^T H1 G^-1 H1 u0 / (2 u0^T H1 u1)``.

``G`` is ``H0 - lambda0 - u2 u2^T``. The rank-one term removes the kernel of
``H0 - lambda0``: ``G u0 = -u2`` because ``u2^T u0 = 1``, and ``G`` is
invertible because the bilinear form pairs ``u0`` with ``u2``. (The variant
``H0 - lambda0 - u0 u2^T`` annihilates ``u0 + u1`` and cannot be inverted.)

At an EP2 with chain ``(u0, u1)`` the pair is
``lambda0 +- (u0^T H1 u0)**(1/2) z**(1/2)``.

Fractional powers use the principal branch ``z**(1/N) = exp(log(z)/N)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import linalg
from .errors import InconsistentCycles, InvalidInput
from .jordan import JordanChain

VANISH_TOL = 1e-8
OMEGA3 = np.exp(2j * np.pi / 3)


class Kind(str, Enum):
    THIRD_ROOT = "ThirdRoot"
    SQUARE_ROOT_PLUS_TAYLOR = "SquareRootPlusTaylor"
    SQUARE_ROOT = "SquareRoot"
    TAYLOR_ONLY = "TaylorOnly"
    DEGENERATE_OTHER = "DegenerateOther"


@dataclass(frozen=True)
class PuiseuxClass:
    """Classified scenario with leading coefficients.

    ``coefficients[k]`` multiplies ``z**exponents[k]`` in branch ``k``; the
    branch order is principal root first, then counterclockwise, with the
    Taylor branch last. ``scalars`` keeps the raw bilinear quantities.
    """

    kind: Kind
    lambda0: complex
    order: int
    scalars: dict
    coefficients: tuple
    exponents: tuple
    tol: float
    h1: np.ndarray = field(repr=False, compare=False)

    @property
    def lambda1(self) -> Optional[complex]:
        if self.kind in (Kind.THIRD_ROOT, Kind.SQUARE_ROOT, Kind.SQUARE_ROOT_PLUS_TAYLOR):
            return self.coefficients[0]
        return None

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "order": self.order,
            "lambda0": _pair(self.lambda0),
            "tol": self.tol,
            "scalars": {k: _pair(v) for k, v in self.scalars.items()},
            "branches": [
                {"coefficient": _pair(c), "exponent": str(e)}
                for c, e in zip(self.coefficients, self.exponents)
            ],
        }


def _pair(x: complex) -> list:
    x = complex(x)
    return [x.real, x.imag]


def principal_root(x: complex, n: int) -> complex:
    """``x**(1/n)`` on the principal branch (cut along the negative real axis)."""
    x = complex(x)
    if x == 0:
        return 0j
    return complex(np.exp(np.log(x) / n))


def vanish_tol(chain: JordanChain, h1, tol: Optional[float] = None) -> float:
    """Absolute threshold below which a bilinear scalar counts as zero."""
    t = VANISH_TOL if tol is None else tol
    return t * (1.0 + linalg.matrix_norm(h1)) * chain.scale**2


def _check_h1(chain: JordanChain, h1) -> np.ndarray:
    a = linalg.as_matrix(h1)
    if a.shape != chain.matrix.shape:
        raise InvalidInput(f"H1 has shape {a.shape}, chain matrix {chain.matrix.shape}")
    if not linalg.is_symmetric(a):
        raise InvalidInput("H1 must be exactly symmetric")
    return a


def kernel_removed_operator(chain: JordanChain) -> np.ndarray:
    """``H0 - lambda0 - u2 u2^T`` for a length-3 chain."""
    if chain.length != 3:
        raise InvalidInput("the kernel-removed operator needs a length-3 chain")
    h0 = chain.matrix
    u2 = chain.vectors[2]
    return h0 - chain.lambda0 * np.eye(h0.shape[0]) - np.outer(u2, u2)


def classify_ep3(chain: JordanChain, h1, tol: Optional[float] = None) -> PuiseuxClass:
    """Decide between the third-root and square-root-plus-Taylor scenarios.

    ``tol`` is relative; the absolute threshold is
    ``tol * (1 + ||H1||) * scale**2`` with ``scale`` the largest chain-vector
    norm (default tol 1e-8).

    Raises
    ------
    Singular
        The kernel-removed operator cannot be inverted (inconsistent chain).
    """
    if chain.length != 3:
        raise InvalidInput("classify_ep3 needs a length-3 chain")
    h1 = _check_h1(chain, h1)
    u0, u1, _ = chain.vectors
    thresh = vanish_tol(chain, h1, tol)
    c = linalg.c_dot(u0, h1 @ u0)
    scalars = {"c": c}
    lam0 = chain.lambda0
    if abs(c) > thresh:
        l1 = principal_root(c, 3)
        coeffs = tuple(l1 * OMEGA3**k for k in range(3))
        return PuiseuxClass(Kind.THIRD_ROOT, lam0, 3, scalars, coeffs,
                            (Fraction(1, 3),) * 3, thresh, h1)
    d = 2 * linalg.c_dot(u1, h1 @ u0)
    scalars["d"] = d
    if abs(d) > thresh:
        g = kernel_removed_operator(chain)
        x = linalg.solve_linear(g, h1 @ u0).x
        kappa = linalg.c_dot(u0, h1 @ x) / (2 * linalg.c_dot(u0, h1 @ u1))
        scalars["kappa"] = kappa
        l1 = principal_root(d, 2)
        return PuiseuxClass(Kind.SQUARE_ROOT_PLUS_TAYLOR, lam0, 3, scalars,
                            (l1, -l1, kappa), (Fraction(1, 2), Fraction(1, 2), Fraction(1)),
                            thresh, h1)
    return PuiseuxClass(Kind.DEGENERATE_OTHER, lam0, 3, scalars, (), (), thresh, h1)


def classify_ep2(chain: JordanChain, h1, tol: Optional[float] = None) -> PuiseuxClass:
    """Square-root pair when ``u0^T H1 u0`` is nonzero, otherwise TaylorOnly.

    TaylorOnly carries no coefficients: only the zeroth order is known.
    """
    if chain.length != 2:
        raise InvalidInput("classify_ep2 needs a length-2 chain")
    h1 = _check_h1(chain, h1)
    u0 = chain.vectors[0]
    thresh = vanish_tol(chain, h1, tol)
    c = linalg.c_dot(u0, h1 @ u0)
    scalars = {"c": c}
    if abs(c) > thresh:
        l1 = principal_root(c, 2)
        return PuiseuxClass(Kind.SQUARE_ROOT, chain.lambda0, 2, scalars, (l1, -l1),
                            (Fraction(1, 2),) * 2, thresh, h1)
    return PuiseuxClass(Kind.TAYLOR_ONLY, chain.lambda0, 2, scalars, (), (), thresh, h1)


def classify(chain: JordanChain, h1, tol: Optional[float] = None) -> PuiseuxClass:
    return classify_ep3(chain, h1, tol) if chain.length == 3 else classify_ep2(chain, h1, tol)


def _zpow(z: complex, e: Fraction) -> complex:
    if e == 1:
        return complex(z)
    return principal_root(z, e.denominator) ** e.numerator


def predict_eigenvalues(cls: PuiseuxClass, lambda0: complex, z: complex) -> list[complex]:
    """Leading-order eigenvalues in branch order.

    TaylorOnly returns ``lambda0`` twice (zeroth order only).
    """
    if cls.kind is Kind.DEGENERATE_OTHER:
        raise InvalidInput("no expansion is available for a DegenerateOther class")
    if cls.kind is Kind.TAYLOR_ONLY:
        return [complex(lambda0)] * cls.order
    return [complex(lambda0) + c * _zpow(z, e) for c, e in zip(cls.coefficients, cls.exponents)]


def predict_eigenvectors(cls: PuiseuxClass, chain: JordanChain, z: complex) -> list[np.ndarray]:
    """Unnormalized leading-order eigenvectors in branch order.

    Root branches: ``u0 + lambda1_k z**(1/N) u1``. Taylor branch:
    ``u0 + (kappa u1 - G^-1 H1 u0) z``.
    """
    if cls.kind is Kind.DEGENERATE_OTHER:
        raise InvalidInput("no expansion is available for a DegenerateOther class")
    u0, u1 = chain.vectors[0], chain.vectors[1]
    if cls.kind is Kind.TAYLOR_ONLY:
        return [u0.copy() for _ in range(cls.order)]
    out = []
    for c, e in zip(cls.coefficients, cls.exponents):
        if e == 1:
            x = linalg.solve_linear(kernel_removed_operator(chain), cls.h1 @ u0).x
            out.append(u0 + (c * u1 - x) * z)
        else:
            out.append(u0 + c * _zpow(z, e) * u1)
    return out


@dataclass(frozen=True)
class ExponentGroup:
    """Branches forming one monodromy orbit and their fitted power law."""

    members: tuple
    size: int
    slope: float
    intercept: float
    constant: bool
    means: tuple
    floors: tuple
    used: tuple

    def to_json(self) -> dict:
        return {
            "members": list(self.members),
            "size": self.size,
            "slope": None if not math.isfinite(self.slope) else self.slope,
            "constant": self.constant,
            "intercept": None if not math.isfinite(self.intercept) else self.intercept,
            "means": list(self.means),
            "floors": list(self.floors),
            "used": list(self.used),
        }


@dataclass(frozen=True)
class ExponentFit:
    radii: tuple
    lambda0: complex
    groups: tuple

    @property
    def cycle_structure(self) -> list[int]:
        return [g.size for g in self.groups]

    def to_json(self) -> dict:
        return {
            "lambda0": _pair(self.lambda0),
            "radii": list(self.radii),
            "cycle_structure": self.cycle_structure,
            "groups": [g.to_json() for g in self.groups],
        }


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("EP3_ATLAS_THREADS", "1")))
    except ValueError:
        return 1


def _circle_groups(family, lambda0, radius, steps, center):
    from . import tracking

    spec = tracking.LoopSpec(family, tracking.ComplexCircle(center, radius), steps, 1)
    report = tracking.track_loop(spec)
    samples = report.samples[:-1]
    groups, floors = [], []
    for orbit in tracking.monodromy_summary(report)["orbits"]:
        dist = [abs(s.values[b] - lambda0) for s in samples for b in orbit]
        groups.append((tuple(orbit), float(np.mean(dist))))
        # rounding floor: forward-error estimate of the same eigenvalues
        floors.append(float(np.mean([s.errors[b] for s in samples for b in orbit])))
    return groups, floors


def fit_exponents(family, lambda0: complex, radii: Sequence[float], phases_per_circle: int = 128,
                  center: complex = 0.0) -> ExponentFit:
    """Fit ``mean |lambda - lambda0| ~ r**slope`` per monodromy orbit.

    For each radius the family is tracked once around ``|z - center| = r``;
    branches are grouped by the orbits of the monodromy permutation and the
    mean distance to ``lambda0`` over the circle is recorded. Slopes are least
    squares fits of log-mean against log-radius. Radii where a group's mean
    is within ten times its rounding floor are left out; a group that is at
    the floor for every radius does not move at all and is reported with
    ``constant=True`` and ``slope=inf``.

    Circles are independent and are evaluated on up to ``EP3_ATLAS_THREADS``
    worker threads; results are merged by radius index.

    Raises
    ------
    InconsistentCycles
        The orbit sizes differ between radii (a radius is too large).
    """
    radii = [float(r) for r in radii]
    if len(radii) < 2:
        raise InvalidInput("need at least two radii")
    if any(not (r >= 1e-8) or not math.isfinite(r) for r in radii):
        raise InvalidInput("radii must be finite and >= 1e-8")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise InvalidInput("radii must be strictly descending")

    def work(r):
        return _circle_groups(family, lambda0, r, phases_per_circle, center)

    nthreads = min(_threads(), len(radii))
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as pool:
            results = list(pool.map(work, radii))
    else:
        results = [work(r) for r in radii]

    def key(item):
        (orbit, mean) = item
        return (-len(orbit), mean, orbit)

    per_radius = []
    structure = None
    for r, (groups, floors) in zip(radii, results):
        order = sorted(range(len(groups)), key=lambda i: key(groups[i]))
        sizes = [len(groups[i][0]) for i in order]
        if structure is None:
            structure = sizes
        elif sizes != structure:
            raise InconsistentCycles(
                f"orbit sizes {sizes} at radius {r:g} differ from {structure} at radius {radii[0]:g}"
            )
        per_radius.append([(groups[i][0], groups[i][1], floors[i]) for i in order])

    log_r = np.log(radii)
    out = []
    for gi in range(len(structure)):
        means = [per_radius[k][gi][1] for k in range(len(radii))]
        floors = [per_radius[k][gi][2] for k in range(len(radii))]
        used = [m > 10 * f for m, f in zip(means, floors)]
        members = per_radius[0][gi][0]
        if not any(used):
            slope, icpt, const = math.inf, -math.inf, True
        elif sum(used) < 2:
            slope, icpt, const = math.nan, math.nan, False
        else:
            idx = np.nonzero(used)[0]
            slope, icpt = np.polyfit(log_r[idx], np.log(np.array(means)[idx]), 1)
            slope, icpt, const = float(slope), float(icpt), False
        out.append(ExponentGroup(members, len(members), slope, icpt, const,
                                 tuple(means), tuple(floors), tuple(used)))
    return ExponentFit(tuple(radii), complex(lambda0), tuple(out))
