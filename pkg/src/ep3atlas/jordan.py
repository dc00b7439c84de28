"""Jordan chains at exceptional points of complex symmetric matrices.

A chain of length L at a defective eigenvalue ``lambda0`` satisfies::

    (H - lambda0) u0 = 0,    (H - lambda0) u_j = u_{j-1}.

For symmetric H the chain can be fixed (up to one overall sign) by bilinear
normalization conditions:

* length 2: ``u0.u1 = 1`` and ``u1.u1 = 0``;
* length 3: ``u0.u2 = 1``, ``u2.u1 = 0`` and ``u2.u2 = 0``.

The remaining identities (``u0.u0 = 0`` for both lengths, plus ``u0.u1 = 0``
and ``u0.u2 = u1.u1`` for length 3) hold automatically and are reported as
residuals. Here ``a.b`` is the unconjugated product ``a^T b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .errors import AmbiguousStructure, ChainBreaks, DegenerateNormalization, InvalidInput

CONDITION_TOL = 1e-8


@dataclass(frozen=True)
class EPRecord:
    lambda0: complex
    algebraic_multiplicity: int
    geometric_multiplicity: int

    @property
    def is_ep(self) -> bool:
        return self.algebraic_multiplicity >= 2 and self.geometric_multiplicity == 1

    @property
    def order(self) -> int:
        """N for an EPN, 1 otherwise."""
        return self.algebraic_multiplicity if self.is_ep else 1


def _require_symmetric(m) -> np.ndarray:
    a = linalg.as_matrix(m)
    if not linalg.is_symmetric(a):
        raise InvalidInput("matrix must be exactly symmetric")
    return a


def detect_ep(m, tol: Optional[float] = None, rank_tol: float = linalg.DEFAULT_RANK_TOL) -> list[EPRecord]:
    """One record per eigenvalue cluster of a symmetric matrix.

    ``tol`` is the relative clustering tolerance handed to :func:`linalg.eig`.
    A cluster of N >= 2 eigenvalues with a one-dimensional kernel is an EPN;
    an N-fold cluster with an N-dimensional kernel is a diabolic degeneracy.
    Anything in between raises :class:`AmbiguousStructure`.
    """
    a = _require_symmetric(m)
    spec = linalg.eig(a, cluster_tol=tol, rank_tol=rank_tol)
    records = []
    for members, dim in zip(spec.clusters, spec.kernel_dims):
        k = len(members)
        if k >= 2 and dim not in (1, k):
            raise AmbiguousStructure(
                f"{k}-fold eigenvalue near {spec.values[members[0]]:.6g} has "
                f"{dim} independent eigenvectors"
            )
        records.append(EPRecord(complex(spec.values[members[0]]), k, dim))
    return records


@dataclass(frozen=True)
class RawChain:
    """Un-normalized chain ``[u0~, u1~, ...]`` with per-step solve residuals."""

    matrix: np.ndarray = field(repr=False)
    lambda0: complex
    vectors: tuple
    residuals: tuple

    @property
    def length(self) -> int:
        return len(self.vectors)


def build_chain(m, lambda0: complex, length: int, tol: Optional[float] = None) -> RawChain:
    """Construct a raw Jordan chain by successive minimum-norm solves.

    ``u0~`` is the right singular vector of ``H - lambda0`` for the smallest
    singular value. Each later vector is the least-squares solution of
    ``(H - lambda0) x = u_{j-1}~`` with that kernel direction truncated, so it
    carries no kernel component. A relative residual above
    ``tol * (1 + ||H||)`` (default tol 1e-8) raises :class:`ChainBreaks`.
    """
    a = linalg.as_matrix(m)
    n = a.shape[0]
    if length not in (2, 3):
        raise InvalidInput("chain length must be 2 or 3")
    if tol is None:
        tol = CONDITION_TOL
    norm = linalg.matrix_norm(a)
    if length > n:
        raise ChainBreaks(f"a chain of length {length} cannot exist in dimension {n}")
    shifted = a - lambda0 * np.eye(n)
    u, s, vh = np.linalg.svd(shifted)
    # pseudo-inverse with the smallest singular direction removed
    pinv = (vh[:-1].conj().T / s[:-1]) @ u[:, :-1].conj().T
    vecs = [vh[-1].conj()]
    residuals = [float(s[-1])]
    for j in range(1, length):
        prev = vecs[-1]
        x = pinv @ prev
        res = float(np.linalg.norm(shifted @ x - prev) / np.linalg.norm(prev))
        if res > tol * (1.0 + norm):
            raise ChainBreaks(
                f"(H - lambda0) x = u{j - 1} is insoluble (relative residual {res:.3e}); "
                f"chain ends at length {j}"
            )
        vecs.append(x)
        residuals.append(res)
    return RawChain(a, complex(lambda0), tuple(vecs), tuple(residuals))


@dataclass(frozen=True)
class JordanChain:
    """Normalized Jordan chain. ``residuals`` maps condition names to |violation|."""

    matrix: np.ndarray = field(repr=False)
    lambda0: complex
    vectors: tuple
    residuals: dict = field(compare=False)

    @property
    def length(self) -> int:
        return len(self.vectors)

    @property
    def scale(self) -> float:
        return max(float(np.linalg.norm(v)) for v in self.vectors)

    def max_residual(self) -> float:
        return max(self.residuals.values())

    def to_json(self) -> dict:
        return {
            "lambda0": [self.lambda0.real, self.lambda0.imag],
            "length": self.length,
            "vectors": [[[float(x.real), float(x.imag)] for x in v] for v in self.vectors],
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }

    @classmethod
    def from_json(cls, data: dict, matrix) -> "JordanChain":
        vecs = tuple(np.array([complex(re, im) for re, im in v]) for v in data["vectors"])
        lam = complex(*data["lambda0"])
        return cls(linalg.as_matrix(matrix), lam, vecs, chain_residuals(matrix, lam, vecs))


def chain_residuals(m, lambda0: complex, vectors) -> dict:
    """Violation of every chain and bilinear condition, keyed by name."""
    a = linalg.as_matrix(m)
    shifted = a - lambda0 * np.eye(a.shape[0])
    res = {"(H-l0)u0": float(np.linalg.norm(shifted @ vectors[0]))}
    for j in range(1, len(vectors)):
        res[f"(H-l0)u{j}-u{j - 1}"] = float(np.linalg.norm(shifted @ vectors[j] - vectors[j - 1]))
    d = linalg.c_dot
    if len(vectors) == 2:
        u0, u1 = vectors
        res["u0.u0"] = abs(d(u0, u0))
        res["u0.u1-1"] = abs(d(u0, u1) - 1)
        res["u1.u1"] = abs(d(u1, u1))
    else:
        u0, u1, u2 = vectors
        res["u0.u0"] = abs(d(u0, u0))
        res["u0.u1"] = abs(d(u0, u1))
        res["u0.u2-u1.u1"] = abs(d(u0, u2) - d(u1, u1))
        res["u0.u2-1"] = abs(d(u0, u2) - 1)
        res["u2.u1"] = abs(d(u2, u1))
        res["u2.u2"] = abs(d(u2, u2))
    return res


def _gauge_sign(u0: np.ndarray) -> float:
    """+1 or -1 so that the first nonzero entry of ``sign * u0`` has Re >= 0."""
    mags = np.abs(u0)
    first = int(np.argmax(mags > 1e-8 * mags.max()))
    x = u0[first]
    if abs(x.real) > 1e-8 * abs(x):
        return 1.0 if x.real > 0 else -1.0
    return 1.0 if x.imag >= 0 else -1.0


def normalize_chain(raw: RawChain, length: Optional[int] = None) -> JordanChain:
    """Fix the gauge freedom of a raw chain by the bilinear conditions.

    The general chain with the same Jordan structure is::

        u0 = s u0~,  u1 = s u1~ + c1 u0~,  u2 = s u2~ + c1 u1~ + c2 u0~

    and ``s**2``, ``c1``, ``c2`` are solved in that order. Of the two roots
    ``+-s`` the one giving ``u0`` a nonnegative real part in its first
    nonzero entry is kept.
    """
    if length is None:
        length = raw.length
    if length != raw.length:
        raise InvalidInput(f"raw chain has length {raw.length}, not {length}")
    d = linalg.c_dot
    v = raw.vectors
    size = max(float(np.linalg.norm(x)) for x in v)
    if length == 2:
        u0, u1 = v
        g = d(u0, u1)
        if abs(g) <= 1e-12 * size**2:
            raise DegenerateNormalization("u0~ . u1~ vanishes; cannot impose u0.u1 = 1")
        s = 1 / np.sqrt(g)
        s *= _gauge_sign(s * u0)
        c1 = -s * d(u1, u1) / (2 * g)
        vecs = (s * u0, s * u1 + c1 * u0)
    else:
        u0, u1, u2 = v
        g = d(u0, u2)
        if abs(g) <= 1e-12 * size**2:
            raise DegenerateNormalization("u0~ . u2~ vanishes; cannot impose u0.u2 = 1")
        p = d(u1, u2)
        q = d(u2, u2)
        s = 1 / np.sqrt(g)
        s *= _gauge_sign(s * u0)
        c1 = -s * p / (2 * g)
        c2 = -(s * s * q + c1 * c1 * g + 2 * s * c1 * p) / (2 * s * g)
        vecs = (s * u0, s * u1 + c1 * u0, s * u2 + c1 * u1 + c2 * u0)
    vecs = tuple(np.array(x) for x in vecs)
    for x in vecs:
        x.setflags(write=False)
    return JordanChain(raw.matrix, raw.lambda0, vecs, chain_residuals(raw.matrix, raw.lambda0, vecs))


def ep_eigenvalue(m, record: EPRecord) -> complex:
    """The multiple eigenvalue of an EP record, refined beyond the cluster mean.

    The mean of an N-fold cluster is only good to ~eps**(1/N); chain
    equations and expansions need the multiple eigenvalue itself.
    """
    return linalg.refine_multiple_root(linalg.char_poly(m), record.lambda0, record.order)


def jordan_chain(m, lambda0: Optional[complex] = None, length: Optional[int] = None,
                 tol: Optional[float] = None) -> JordanChain:
    """Detect, build and normalize in one call.

    Without ``lambda0`` the highest-order EP of ``m`` is used, with its
    eigenvalue refined as a simple root of the (N-1)-th derivative of the
    characteristic polynomial.
    """
    if lambda0 is None or length is None:
        eps = [r for r in detect_ep(m, tol) if r.is_ep]
        if lambda0 is not None:
            eps = [min(eps, key=lambda r: abs(r.lambda0 - lambda0))] if eps else []
        if not eps:
            raise AmbiguousStructure("matrix has no exceptional point")
        rec = max(eps, key=lambda r: r.order)
        if lambda0 is None:
            lambda0 = ep_eigenvalue(m, rec)
        length = rec.order if length is None else length
    if length > 3:
        raise InvalidInput("only chains of length 2 and 3 can be normalized")
    return normalize_chain(build_chain(m, lambda0, length), length)
