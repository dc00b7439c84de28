"""Built-in matrix families and the JSON family-file format.

The three-waveguide Hamiltonian has diagonal ``(a - 2i gamma, 0, b + 2i gamma)``
and nearest-neighbour couplings ``sqrt(2) v``. At ``gamma = v`` and
``a = b = 0`` it has a single third-order exceptional point at 0.

Family file schema::

    {"name": str, "degree": d,
     "matrices": [H_0, ..., H_d]}     # each H_k: rows of [re, im] pairs

describing ``H(z) = sum_k z**k H_k``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import linalg
from .errors import DimensionMismatch, InvalidInput, NonSymmetricFile

SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class WaveguideParams:
    gamma: float = 1.0
    v: float = 1.0
    a: complex = 0.0
    b: complex = 0.0

    def __post_init__(self):
        for name in ("gamma", "v"):
            x = getattr(self, name)
            if isinstance(x, complex) or not np.isfinite(x):
                raise InvalidInput(f"{name} must be a finite real number")
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise InvalidInput("a and b must be finite")

    def matrix(self) -> np.ndarray:
        return waveguide(self.a, self.b, self.gamma, self.v)


def waveguide(a: complex = 0.0, b: complex = 0.0, gamma: float = 1.0, v: float = 1.0) -> np.ndarray:
    """Three coupled waveguides with gain/loss ``gamma`` and coupling ``v``."""
    g = 2j * gamma
    c = SQRT2 * v
    return np.array(
        [[a - g, c, 0.0], [c, 0.0, c], [0.0, c, b + g]],
        dtype=np.complex128,
    )


class Family:
    """Parameter-to-matrix map. Subclasses set ``name`` and ``nparams``."""

    name: str = "family"
    nparams: int = 1

    def __call__(self, *params) -> np.ndarray:
        raise NotImplementedError

    def _check(self, params):
        if len(params) != self.nparams:
            raise DimensionMismatch(
                f"family {self.name!r} takes {self.nparams} parameter(s), got {len(params)}"
            )


class PolynomialFamily(Family):
    """``H(z) = sum_k z**k H_k`` with symmetric coefficient matrices."""

    def __init__(self, matrices: Sequence, name: str = "polynomial"):
        mats = [np.array(m, dtype=np.complex128) for m in matrices]
        if len(mats) < 2:
            raise InvalidInput("a polynomial family needs degree >= 1 (at least two matrices)")
        shape = mats[0].shape
        for k, m in enumerate(mats):
            if m.ndim != 2 or m.shape != shape or shape[0] != shape[1]:
                raise DimensionMismatch(f"matrix {k} has shape {m.shape}, expected square {shape}")
            if not linalg.is_symmetric(m):
                raise NonSymmetricFile(f"matrix {k} is not symmetric")
            m.setflags(write=False)
        self.matrices = tuple(mats)
        self.name = name
        self.nparams = 1

    @property
    def degree(self) -> int:
        return len(self.matrices) - 1

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    def __call__(self, *params) -> np.ndarray:
        self._check(params)
        (z,) = params
        out = self.matrices[-1].copy()
        for m in self.matrices[-2::-1]:
            out = out * z + m
        return out

    def derivative(self, z: complex = 0.0) -> np.ndarray:
        out = np.zeros_like(self.matrices[0])
        for k in range(self.degree, 0, -1):
            out = out * z + k * self.matrices[k]
        return out

    def derivative_at_zero(self) -> np.ndarray:
        return self.matrices[1].copy()

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "degree": self.degree,
            "matrices": [
                [[[float(x.real), float(x.imag)] for x in row] for row in m] for m in self.matrices
            ],
        }


class LinearFamily(PolynomialFamily):
    """``H(z) = h0 + z h1``."""

    def __init__(self, h0, h1, name: str = "linear"):
        super().__init__([h0, h1], name=name)

    @property
    def h0(self) -> np.ndarray:
        return self.matrices[0]

    @property
    def h1(self) -> np.ndarray:
        return self.matrices[1]

    def __call__(self, *params) -> np.ndarray:
        self._check(params)
        (z,) = params
        return self.h0 + z * self.h1


class WaveguideTwoParam(Family):
    """Waveguide with independent detunings ``(a, b)``."""

    def __init__(self, gamma: float = 1.0, v: float = 1.0, name: str = "waveguide-2param"):
        self.gamma = gamma
        self.v = v
        self.name = name
        self.nparams = 2

    def __call__(self, *params) -> np.ndarray:
        self._check(params)
        a, b = params
        return waveguide(a, b, self.gamma, self.v)


def waveguide_ab_equal(gamma: float = 1.0, v: float = 1.0) -> LinearFamily:
    """``a = b = z``; third-root scenario at the EP3."""
    return LinearFamily(waveguide(0, 0, gamma, v), np.diag([1.0, 0.0, 1.0]), name="waveguide-ab-equal")


def waveguide_ab_opposite(gamma: float = 1.0, v: float = 1.0) -> LinearFamily:
    """``a = -b = z``; square-root-plus-Taylor scenario at the EP3."""
    return LinearFamily(waveguide(0, 0, gamma, v), np.diag([1.0, 0.0, -1.0]), name="waveguide-ab-opposite")


def symmetric_ep2() -> LinearFamily:
    """``[[i, 1], [1, -i]] + z diag(1, -1)``; EP2 at z = 0 and z = -2i."""
    return LinearFamily(np.array([[1j, 1], [1, -1j]]), np.diag([1.0, -1.0]), name="symmetric-ep2")


BUILTIN: dict[str, Callable[[], Family]] = {
    "waveguide-ab-equal": waveguide_ab_equal,
    "waveguide-ab-opposite": waveguide_ab_opposite,
    "waveguide-2param": WaveguideTwoParam,
    "symmetric-ep2": symmetric_ep2,
}


def load_family(path) -> PolynomialFamily:
    """Read a family file; raises on bad shapes or non-symmetric matrices."""
    data = json.loads(Path(path).read_text())
    return family_from_json(data)


def family_from_json(data: dict) -> PolynomialFamily:
    try:
        mats = [
            np.array([[complex(re, im) for re, im in row] for row in m], dtype=np.complex128)
            for m in data["matrices"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed family file: {exc}") from exc
    degree = data.get("degree", len(mats) - 1)
    if degree != len(mats) - 1:
        raise DimensionMismatch(f"degree {degree} does not match {len(mats)} matrices")
    fam = PolynomialFamily(mats, name=data.get("name", "file"))
    if fam.degree == 1:
        fam = LinearFamily(*mats, name=fam.name)
    return fam


def save_family(family: PolynomialFamily, path) -> None:
    Path(path).write_text(json.dumps(family.to_json(), indent=1))


def get_family(selector: str) -> Family:
    """Resolve a built-in name or ``file:PATH``."""
    if selector.startswith("file:"):
        return load_family(selector[len("file:"):])
    try:
        return BUILTIN[selector]()
    except KeyError:
        raise InvalidInput(
            f"unknown family {selector!r}; choose one of {sorted(BUILTIN)} or file:PATH"
        ) from None
