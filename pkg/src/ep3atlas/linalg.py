"""Dense complex linear algebra for small matrices.

Everything here is sized for n <= 16. Eigenvalues come from the characteristic
polynomial and a simultaneous (Aberth-Ehrlich) root iteration, which keeps
multiplicity handling explicit near exceptional points. Eigenvectors come
from SVD null spaces of the shifted matrix.

The bilinear product ``c_dot(a, b) = a^T b`` (no conjugation) is the natural
pairing for complex symmetric matrices; eigenvectors returned by :func:`eig`
are normalized with it whenever that is numerically safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial
from typing import NamedTuple, Optional, Sequence

import math
import warnings

import numpy as np
import scipy.linalg

from .errors import InvalidInput, NonConvergence, Singular

MAX_DIM = 16
EPS = np.finfo(np.float64).eps
# Working precision of the characteristic-polynomial accumulation.
_EXT_EPS = float(np.finfo(np.longdouble).eps)

DEFAULT_CLUSTER_TOL = 1e-6
DEFAULT_RANK_TOL = 1e-8
SELF_ORTHOGONAL_TOL = 1e-10
# below this degree the root iteration runs on Python scalars
_SCALAR_MAX = 8


def as_matrix(m, *, max_dim: int = MAX_DIM) -> np.ndarray:
    """Validate ``m`` as a finite square complex matrix and return a copy."""
    a = np.array(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InvalidInput(f"expected a non-empty square matrix, got shape {a.shape}")
    if a.shape[0] > max_dim:
        raise InvalidInput(f"dimension {a.shape[0]} exceeds the supported maximum {max_dim}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix has non-finite entries")
    return a


def as_vector(v) -> np.ndarray:
    a = np.array(v, dtype=np.complex128)
    if a.ndim != 1 or a.size == 0:
        raise InvalidInput(f"expected a non-empty vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("vector has non-finite entries")
    return a


def is_symmetric(m) -> bool:
    """Exact (bitwise) symmetry test; no tolerance."""
    a = np.asarray(m)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and bool(np.array_equal(a, a.T))


def matrix_norm(m) -> float:
    """Frobenius norm, the scale used by every relative tolerance."""
    return float(np.linalg.norm(m))


def c_dot(a, b) -> complex:
    """Bilinear product ``a^T b`` without complex conjugation."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidInput(f"length mismatch: {a.shape} vs {b.shape}")
    return complex(np.dot(a, b))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Polynomial:
    """Complex polynomial with ascending coefficients ``c[0] + c[1] x + ...``."""

    coeffs: np.ndarray
    # optional extended-precision copy of the same coefficients
    extended: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128).ravel()
        if c.size == 0:
            raise InvalidInput("polynomial needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise InvalidInput("polynomial has non-finite coefficients")
        if c[-1] == 0:
            raise InvalidInput("leading coefficient must be nonzero")
        object.__setattr__(self, "coeffs", _frozen(c))
        if self.extended is not None:
            e = np.array(self.extended, dtype=np.clongdouble).ravel()
            if e.shape != c.shape:
                raise InvalidInput("extended coefficients must match coeffs")
            object.__setattr__(self, "extended", _frozen(e))

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, x):
        return _horner(self.coeffs, np.asarray(x, dtype=np.complex128))

    def derivatives(self, x: complex, upto: int) -> np.ndarray:
        """Values ``p(x), p'(x), ..., p^(upto)(x)``."""
        out = np.zeros(upto + 1, dtype=np.complex128)
        c = [complex(v) for v in self.coeffs]
        x = complex(x)
        for j in range(upto + 1):
            if not c:
                break
            acc = c[-1]
            for ck in c[-2::-1]:
                acc = acc * x + ck
            out[j] = acc
            c = [c[k] * k for k in range(1, len(c))]
        return out

    def scale(self, x):
        """Rounding scale ``sum |c_k| |x|^k`` used for backward-error tests."""
        return _horner(np.abs(self.coeffs), np.abs(np.asarray(x)))

    def __repr__(self):
        return f"Polynomial(degree={self.degree}, coeffs={self.coeffs!r})"


def _horner(c: np.ndarray, x):
    acc = np.zeros_like(x, dtype=np.result_type(c, x)) + c[-1]
    for ck in c[-2::-1]:
        acc = acc * x + ck
    return acc


def char_poly(m) -> Polynomial:
    """Monic ``det(lambda I - m)`` by the Faddeev-LeVerrier recurrence.

    The recurrence is accumulated in extended precision (``np.clongdouble``)
    and rounded once at the end. At an exceptional point of order N the roots
    react to coefficient noise like ``noise**(1/N)``, so the extra bits are
    what lets a stored EP3 matrix come out as a tight triple cluster.
    """
    a = as_matrix(m).astype(np.clongdouble)
    n = a.shape[0]
    coeffs = np.zeros(n + 1, dtype=np.clongdouble)
    coeffs[n] = 1
    eye = np.eye(n, dtype=np.clongdouble)
    acc = np.zeros_like(a)
    for k in range(1, n + 1):
        acc = a @ acc + coeffs[n - k + 1] * eye
        coeffs[n - k] = -np.trace(a @ acc) / k
    return Polynomial(coeffs.astype(np.complex128), extended=coeffs)


def poly_roots(p: Polynomial, tol: float = 1e-13, max_iter: int = 200) -> np.ndarray:
    """All roots of ``p`` with multiplicity (Aberth-Ehrlich iteration).

    Initial guesses sit on a slightly rotated circle around the root centroid,
    so the result is a deterministic function of the coefficients. Each root
    is accepted once ``|p(r)| <= tol * sum|c_k||r|^k`` or its correction
    stalls at rounding level, then receives one guarded Newton polish.

    Raises
    ------
    NonConvergence
        If some root is still moving after ``max_iter`` sweeps.
    """
    if p.degree < 1:
        raise InvalidInput("poly_roots needs degree >= 1")
    c = p.coeffs / p.coeffs[-1]
    # exact zero roots are split off without iterating
    nzero = 0
    while c[nzero] == 0:
        nzero += 1
    c = c[nzero:]
    n = c.size - 1
    zeros = np.zeros(nzero, dtype=np.complex128)
    if n == 0:
        return zeros
    if n == 1:
        return np.concatenate([[-c[0]], zeros])

    centre = -c[n - 1] / n
    shifted = _taylor_shift(c, centre)
    radius = max(abs(shifted[n - k]) ** (1.0 / k) for k in range(1, n + 1))
    if radius == 0.0:
        return np.concatenate([np.full(n, centre), zeros])
    angles = 2 * np.pi * np.arange(n) / n + 0.4
    z = centre + radius * np.exp(1j * angles)

    if n <= _SCALAR_MAX:
        z = _aberth_scalar(c, z, tol, max_iter, radius)
    else:
        z = _aberth_vector(c, z, tol, max_iter, radius)
    dc = c[1:] * np.arange(1, n + 1)

    # guarded Newton polish
    pz = _horner(c, z)
    dpz = _horner(dc, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = z - pz / dpz
    ok = np.isfinite(cand)
    ok[ok] = np.abs(_horner(c, cand[ok])) < np.abs(pz[ok])
    z = np.where(ok, cand, z)
    if p.extended is not None and n <= _SCALAR_MAX:
        z = _polish_clusters(p.extended[nzero:] / p.extended[-1], z, radius)
    return np.concatenate([z, zeros])


def _polish_clusters(c, z, radius, sweeps: int = 30):
    """Aberth sweeps in extended precision on roots that sit close together.

    Rounding the coefficients to double moves a k-fold root by about
    ``eps**(1/k)``; re-solving near-coincident roots against the extended
    coefficients shrinks that by the ratio of the two precisions.
    """
    n = z.size
    near = 1e-3 * (1.0 + radius)
    idx = [i for i in range(n) if any(j != i and abs(z[i] - z[j]) < near for j in range(n))]
    if not idx:
        return z
    cl = [np.clongdouble(x) for x in c]
    dc = [cl[k] * k for k in range(1, n + 1)]
    w = [np.clongdouble(x) for x in z]
    # identical starting values would never separate
    for a, i in enumerate(idx):
        if any(w[i] == w[j] for j in idx[:a]):
            w[i] += np.clongdouble(1e-8 * (1.0 + radius) * np.exp(1j * (0.4 + a)))
    eps = np.longdouble(_EXT_EPS)
    for _ in range(sweeps):
        moved = False
        for i in idx:
            x = w[i]
            pv = cl[-1]
            for ck in cl[-2::-1]:
                pv = pv * x + ck
            ax = abs(x)
            noise = abs(cl[-1])
            for ck in cl[-2::-1]:
                noise = noise * ax + abs(ck)
            if abs(pv) <= 8 * eps * noise:
                continue  # at the rounding floor; further steps are noise
            dv = dc[-1]
            for ck in dc[-2::-1]:
                dv = dv * x + ck
            sm = sum(1 / (x - w[j]) for j in range(n) if j != i and w[j] != x)
            denom = dv - pv * sm
            if denom == 0:
                continue
            step = pv / denom
            if not np.isfinite(step):
                continue
            w[i] = x - step
            if abs(step) > 4 * eps * abs(w[i]):
                moved = True
        if not moved:
            break
    return np.array([complex(x) for x in w], dtype=np.complex128)


def _aberth_vector(c, z, tol, max_iter, radius):
    n = z.size
    absc = np.abs(c)
    dc = c[1:] * np.arange(1, n + 1)
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        pz = _horner(c, z)
        scale = _horner(absc, np.abs(z))
        active &= ~(np.abs(pz) <= tol * scale)
        if not active.any():
            break
        dpz = _horner(dc, z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        diff[diff == 0] = EPS * (1 + radius)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        s = inv.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = pz / dpz
            w = ratio / (1.0 - ratio * s)
        bad = ~np.isfinite(w)
        w[bad] = EPS * (1 + np.abs(z[bad]))
        w[~active] = 0.0
        z = z - w
        stalled = np.abs(w) <= 2 * EPS * np.abs(z)
        active &= ~stalled
    else:
        raise NonConvergence(f"Aberth iteration did not converge in {max_iter} sweeps")
    return z



def _aberth_scalar(c, z0, tol, max_iter, radius):
    """Same iteration as :func:`_aberth_vector` on Python scalars (fast for small n)."""
    n = z0.size
    cs = [complex(x) for x in c]
    absc = [abs(x) for x in cs]
    dcs = [cs[k] * k for k in range(1, n + 1)]
    z = [complex(x) for x in z0]
    active = [True] * n
    tiny = EPS * (1 + radius)
    for _ in range(max_iter):
        pz = [0j] * n
        for i in range(n):
            if not active[i]:
                continue
            x = z[i]
            p = cs[n]
            s = absc[n]
            ax = abs(x)
            for k in range(n - 1, -1, -1):
                p = p * x + cs[k]
                s = s * ax + absc[k]
            pz[i] = p
            if abs(p) <= tol * s:
                active[i] = False
        if not any(active):
            return np.array(z)
        w = [0j] * n
        for i in range(n):
            if not active[i]:
                continue
            x = z[i]
            dp = dcs[n - 1]
            for k in range(n - 2, -1, -1):
                dp = dp * x + dcs[k]
            acc = 0j
            for j in range(n):
                if j != i:
                    d = x - z[j]
                    acc += 1.0 / (d if d != 0 else tiny)
            try:
                ratio = pz[i] / dp
                wi = ratio / (1.0 - ratio * acc)
            except ZeroDivisionError:
                wi = complex(EPS * (1 + abs(x)))
            if not (math.isfinite(wi.real) and math.isfinite(wi.imag)):
                wi = complex(EPS * (1 + abs(x)))
            w[i] = wi
        for i in range(n):
            if active[i]:
                z[i] = z[i] - w[i]
                if abs(w[i]) <= 2 * EPS * abs(z[i]):
                    active[i] = False
    raise NonConvergence(f"Aberth iteration did not converge in {max_iter} sweeps")


def _taylor_shift(c: np.ndarray, x0: complex) -> np.ndarray:
    """Coefficients of q(y) = p(y + x0)."""
    q = [complex(x) for x in c]
    x0 = complex(x0)
    n = len(q) - 1
    for i in range(n):
        for j in range(n - 1, i - 1, -1):
            q[j] += x0 * q[j + 1]
    return np.array(q)


def null_space(m, rank_tol: float = DEFAULT_RANK_TOL) -> list[np.ndarray]:
    """Orthonormal basis of the numerical kernel of ``m``.

    Singular values below ``rank_tol * sigma_max`` count as zero. The basis
    is returned smallest singular value first; an empty list means full rank.
    """
    a = as_matrix(m)
    _, s, vh = np.linalg.svd(a)
    if s[0] == 0.0:
        count = a.shape[0]
    else:
        count = int(np.sum(s < rank_tol * s[0]))
    return [vh[-1 - i].conj() for i in range(count)]


def numerical_rank(m, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    a = as_matrix(m)
    return a.shape[0] - len(null_space(a, rank_tol))


class Solution(NamedTuple):
    x: np.ndarray
    cond: float


def solve_linear(m, b, pivot_tol: float = 1e-13) -> Solution:
    """Solve ``m x = b`` by LU with partial pivoting.

    Returns the solution together with the 1-norm condition number of ``m``.
    Raises :class:`Singular` when a pivot falls below ``pivot_tol`` relative
    to the largest pivot.
    """
    a = as_matrix(m)
    rhs = as_vector(b)
    if rhs.shape[0] != a.shape[0]:
        raise InvalidInput("right-hand side length does not match the matrix")
    with warnings.catch_warnings():
        # exact-zero pivots are reported below as Singular
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.max() == 0.0 or pivots.min() <= pivot_tol * pivots.max():
        raise Singular(
            f"pivot {pivots.min():.3e} below threshold (largest {pivots.max():.3e})"
        )
    x = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    return Solution(x, float(np.abs(np.linalg.cond(a, 1))))


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues with clustering metadata and right eigenvectors.

    ``values[i]`` of a multi-member cluster is the cluster mean. ``vectors[i]``
    is None when the cluster's kernel has fewer directions than members.
    Simple-cluster vectors are c-normalized (``u^T u = 1``) unless flagged in
    ``self_orthogonal``, in which case they are Hermitian-normalized.
    """

    values: np.ndarray
    vectors: tuple
    clusters: tuple
    kernel_dims: tuple
    defect_flags: tuple
    residuals: np.ndarray
    errors: np.ndarray
    self_orthogonal: tuple
    norm: float
    poly: Polynomial = field(repr=False)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def defective(self) -> bool:
        return any(self.defect_flags)

    def cluster_index(self, i: int) -> int:
        for k, members in enumerate(self.clusters):
            if i in members:
                return k
        raise IndexError(i)

    def min_gap(self) -> float:
        v = self.values
        if v.size < 2:
            return np.inf
        d = np.abs(v[:, None] - v[None, :])
        d[np.diag_indices(v.size)] = np.inf
        return float(d.min())


def _clusters(values: np.ndarray, tol: float) -> list[tuple[int, ...]]:
    n = values.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= tol:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [tuple(groups[k]) for k in sorted(groups)]


def c_normalize(u: np.ndarray, tol: float = SELF_ORTHOGONAL_TOL) -> tuple[np.ndarray, bool]:
    """Scale ``u`` so that ``u^T u = 1``.

    Returns ``(vector, self_orthogonal)``. When ``|u^T u| < tol * u^H u`` the
    vector is near self-orthogonal and is returned Hermitian-normalized.
    """
    u = np.asarray(u, dtype=np.complex128)
    q = np.dot(u, u)
    h = float(np.vdot(u, u).real)
    if h == 0.0:
        return u, True
    if abs(q) < tol * h:
        return u / np.sqrt(h), True
    return u / np.sqrt(q), False


def eig(m, cluster_tol: Optional[float] = None, rank_tol: float = DEFAULT_RANK_TOL) -> Spectrum:
    """Eigen-decomposition of a small complex matrix.

    Parameters
    ----------
    m : array_like
        Square complex matrix, n <= 16.
    cluster_tol : float, optional
        Eigenvalues closer than ``cluster_tol * (1 + ||m||)`` are grouped.
        Default 1e-6.
    rank_tol : float
        Relative singular-value threshold for kernel dimensions.
    """
    a = as_matrix(m)
    n = a.shape[0]
    if cluster_tol is None:
        cluster_tol = DEFAULT_CLUSTER_TOL
    norm = matrix_norm(a)
    poly = char_poly(a)
    roots = poly_roots(poly)
    roots = roots[np.lexsort((roots.imag, roots.real))]
    clusters = _clusters(roots, cluster_tol * (1.0 + norm))

    values = roots.copy()
    vectors: list = [None] * n
    so_flags = [False] * n
    kernel_dims = []
    defects = []
    residuals = np.full(n, np.nan)
    errors = np.zeros(n)
    eye = np.eye(n)
    for members in clusters:
        k = len(members)
        lam = complex(np.mean(roots[list(members)])) if k > 1 else complex(roots[members[0]])
        values[list(members)] = lam
        shifted = a - lam * eye
        _, s, vh = np.linalg.svd(shifted)
        below = int(np.sum(s < rank_tol * s[0])) if s[0] > 0 else n
        d = max(1, min(k, below))
        kernel_dims.append(d)
        defects.append(d < k)
        basis = [vh[-1 - i].conj() for i in range(d)]
        if k == 1:
            u, so = c_normalize(basis[0])
            basis = [u]
            so_flags[members[0]] = so
        for idx, u in zip(members, basis):
            vectors[idx] = _frozen(np.array(u))
            residuals[idx] = np.linalg.norm(a @ u - lam * u) / np.linalg.norm(u)
        errors[list(members)] = _root_error(poly, lam, k, norm)

    return Spectrum(
        values=_frozen(values),
        vectors=tuple(vectors),
        clusters=tuple(clusters),
        kernel_dims=tuple(kernel_dims),
        defect_flags=tuple(defects),
        residuals=_frozen(residuals),
        errors=_frozen(errors),
        self_orthogonal=tuple(so_flags),
        norm=norm,
        poly=poly,
    )


def refine_multiple_root(p: Polynomial, x0: complex, k: int, max_iter: int = 8) -> complex:
    """Sharpen an estimate of a k-fold root of ``p``.

    A k-fold root is a simple root of ``p^(k-1)``; Newton steps on that
    derivative (in extended precision when available) converge to it even
    though the individual roots are only known to ``eps**(1/k)``. Steps that
    do not reduce ``|p^(k-1)|`` are rejected, so the result never gets worse.
    """
    if k < 2:
        return complex(x0)
    c = p.extended if p.extended is not None else p.coeffs.astype(np.clongdouble)
    c = [np.clongdouble(v) for v in c]
    for _ in range(k - 1):
        c = [c[j] * j for j in range(1, len(c))]
    dc = [c[j] * j for j in range(1, len(c))]

    def ev(cs, x):
        acc = cs[-1]
        for cj in cs[-2::-1]:
            acc = acc * x + cj
        return acc

    x = np.clongdouble(x0)
    fx = ev(c, x)
    for _ in range(max_iter):
        d = ev(dc, x) if dc else 0
        if fx == 0 or d == 0:
            break
        cand = x - fx / d
        fc = ev(c, cand)
        if not abs(fc) < abs(fx):
            break
        x, fx = cand, fc
    return complex(x)


def _root_error(poly: Polynomial, lam: complex, k: int, norm: float) -> float:
    """Forward error estimate for a k-fold root cluster of the char. polynomial."""
    n = poly.degree
    x = abs(lam)
    # coefficient perturbation: final rounding plus extended-precision accumulation
    dp = 0.0
    for j, cj in enumerate(poly.coeffs):
        dp += (EPS * abs(cj) + n * _EXT_EPS * comb(n, j) * norm ** (n - j)) * x**j
    dk = abs(poly.derivatives(lam, k)[k]) / factorial(k)
    if dk == 0.0:
        return float("inf")
    return float((dp / dk) ** (1.0 / k))


def eigenvalue_multisets_close(a: Sequence[complex], b: Sequence[complex], tol: float) -> bool:
    """True when two multisets of complex numbers match within ``tol`` (optimal pairing)."""
    from scipy.optimize import linear_sum_assignment

    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        return False
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return bool(cost[r, c].max() <= tol)
