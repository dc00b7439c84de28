"""Locate exceptional points of a matrix family by Newton's method.

An N-fold eigenvalue ``lambda`` of ``H(params)`` is a common root of the
characteristic polynomial and its first ``N - 1`` derivatives::

    F(lambda, params) = [p(lambda), p'(lambda), ..., p^(N-1)(lambda)] = 0.

That is N complex equations in ``1 + len(params)`` complex unknowns, so an
EP3 generically needs two parameters. The polynomial conditions cannot tell
an EP from a diabolic point, so every converged solution is checked with
:func:`jordan.detect_ep`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import jordan, linalg
from .errors import InvalidInput, NoConvergence, WrongOrder

FD_STEP = 1e-6
MAX_HALVINGS = 20
POLISH_STEPS = 3
# EP3 eigenvalues split like (parameter error)**(1/3); verification clusters loosely
VERIFY_CLUSTER_TOL = 1e-4


@dataclass(frozen=True)
class EPSearchProblem:
    family: object
    order: int
    guess_params: tuple
    guess_lambda: Optional[complex] = None

    def __post_init__(self):
        if self.order not in (2, 3):
            raise InvalidInput("order must be 2 or 3")
        nparams = getattr(self.family, "nparams", 1)
        if len(self.guess_params) != nparams:
            raise InvalidInput(f"family takes {nparams} parameter(s), guess has {len(self.guess_params)}")
        if self.order - 1 > nparams:
            raise InvalidInput(
                f"an EP{self.order} has codimension {self.order - 1}; "
                f"the family has only {nparams} parameter(s)"
            )


@dataclass(frozen=True)
class EPResult:
    lambda0: complex
    params: tuple
    residual: float
    verified_order: int
    iterations: int
    derivatives: tuple

    def to_json(self) -> dict:
        return {
            "lambda0": [self.lambda0.real, self.lambda0.imag],
            "params": [[complex(p).real, complex(p).imag] for p in self.params],
            "residual": self.residual,
            "verified_order": self.verified_order,
            "iterations": self.iterations,
            "derivative_magnitudes": [abs(d) for d in self.derivatives],
        }


def _residual(family, order, lam, params):
    m = family(*params)
    poly = linalg.char_poly(m)
    vals = poly.derivatives(lam, order - 1)
    return vals, poly, linalg.matrix_norm(m)


def _lambda_guess(family, params, order) -> complex:
    """Mean of the ``order`` eigenvalues with the smallest spread."""
    from itertools import combinations

    vals = linalg.eig(family(*params)).values
    best = min(combinations(range(vals.size), order),
               key=lambda idx: np.ptp(vals[list(idx)].real) + np.ptp(vals[list(idx)].imag))
    return complex(np.mean(vals[list(best)]))


def find_ep(problem: EPSearchProblem, tol: float = 1e-12, max_iter: int = 100) -> EPResult:
    """Damped Newton on the multiplicity conditions.

    The Jacobian is exact in ``lambda`` (higher polynomial derivatives) and
    uses central differences of relative step 1e-6 in the parameters, which
    assumes the family is holomorphic in each parameter. Steps are halved
    (at most 20 times) until ``||F||`` decreases; convergence means
    ``||F|| <= tol * (1 + ||H||**n)``, after which up to three more steps
    are taken while they still reduce the residual.

    Raises
    ------
    NoConvergence
        ``max_iter`` iterations without convergence, or no damped step
        decreases the residual.
    WrongOrder
        The converged point is a degeneracy of lower order than requested.
    """
    fam = problem.family
    order = problem.order
    params = np.array(problem.guess_params, dtype=np.complex128)
    lam = problem.guess_lambda
    if lam is None:
        lam = _lambda_guess(fam, params, order)
    x = np.concatenate([[lam], params])

    def F(x):
        vals, poly, norm = _residual(fam, order, x[0], x[1:])
        return vals, poly, norm

    vals, poly, norm = F(x)
    n = poly.degree
    it = 0
    converged = False
    polish = 0
    while it < max_iter:
        fnorm = float(np.linalg.norm(vals))
        if fnorm <= tol * (1.0 + norm**n):
            converged = True
            # a few extra steps cost little and tighten the parameters
            if polish >= POLISH_STEPS or fnorm == 0.0:
                break
            polish += 1
        it += 1
        jac = np.zeros((order, x.size), dtype=np.complex128)
        jac[:, 0] = poly.derivatives(x[0], order)[1:]
        for k in range(1, x.size):
            h = FD_STEP * max(1.0, abs(x[k]))
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            jac[:, k] = (F(xp)[0] - F(xm)[0]) / (2 * h)
        step = np.linalg.lstsq(jac, -vals, rcond=None)[0]
        alpha = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = x + alpha * step
            tvals, tpoly, tnorm = F(trial)
            if np.linalg.norm(tvals) < fnorm:
                break
            alpha *= 0.5
        else:
            if converged:
                break
            raise NoConvergence(f"no damped Newton step reduces the residual (iteration {it})")
        x, vals, poly, norm = trial, tvals, tpoly, tnorm
    if not converged and np.linalg.norm(vals) > tol * (1.0 + norm**n):
        raise NoConvergence(
            f"EP search did not converge in {max_iter} iterations "
            f"(residual {np.linalg.norm(vals):.3e})"
        )

    lam0 = complex(x[0])
    params = tuple(complex(p) for p in x[1:])
    records = jordan.detect_ep(fam(*params), tol=VERIFY_CLUSTER_TOL)
    rec = min(records, key=lambda r: abs(r.lambda0 - lam0))
    verified = rec.order
    if verified < order:
        raise WrongOrder(
            f"converged to a degeneracy of order {verified} (requested {order}) "
            f"at params {params}"
        )
    derivs = tuple(complex(v) for v in poly.derivatives(lam0, order))
    return EPResult(lam0, params, float(np.linalg.norm(vals)), verified, it, derivs)
