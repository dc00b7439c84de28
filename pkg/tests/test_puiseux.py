import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from ep3atlas import jordan, models, puiseux, tracking
from ep3atlas.errors import InconsistentCycles, InvalidInput
from ep3atlas.puiseux import Kind

from conftest import random_symmetric

WG = models.waveguide(0, 0, 1, 1)
EP2 = np.array([[1j, 1], [1, -1j]])
EQUAL = np.diag([1.0, 0.0, 1.0]).astype(complex)
OPPOSITE = np.diag([1.0, 0.0, -1.0]).astype(complex)


@pytest.fixture(scope="module")
def wg_chain():
    return jordan.jordan_chain(WG)


@pytest.fixture(scope="module")
def ep2_chain():
    return jordan.jordan_chain(EP2)


def match(pred, exact):
    """Reorder ``exact`` to follow ``pred`` branch by branch."""
    assign, _ = tracking.match_branches(np.asarray(pred), np.asarray(exact))
    return np.asarray(exact)[assign]


def herm_angle(u, v):
    """Hermitian angle between two vectors (sine form, accurate for small angles)."""
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    s = np.linalg.norm(v - np.vdot(u, v) * u)
    return math.asin(min(1.0, float(s)))


def exact_eig(h):
    w, v = np.linalg.eig(h)  # LAPACK oracle, independent of the package solver
    return w, v.T


def loglog_slope(r, e):
    return float(np.polyfit(np.log(r), np.log(e), 1)[0])


def square_root_h1(rng, chain):
    """Random symmetric H1 with u0^T H1 u0 removed (square-root-plus-Taylor)."""
    h1 = random_symmetric(rng, 3)
    u0 = chain.vectors[0]
    ub = u0.conj()
    c = u0 @ h1 @ u0
    return h1 - c * np.outer(ub, ub) / np.vdot(u0, u0).real ** 2


# -- classification -------------------------------------------------------------


def test_classify_waveguide_equal(wg_chain):
    cls = puiseux.classify_ep3(wg_chain, EQUAL)
    assert cls.kind is Kind.THIRD_ROOT
    # oracle: direct bilinear evaluation of u0^T H1 u0
    u0 = wg_chain.vectors[0]
    c = u0[0] ** 2 + u0[2] ** 2
    assert abs(cls.scalars["c"] - c) < 1e-12
    assert abs(cls.lambda1 ** 3 - c) < 1e-10


def test_classify_waveguide_opposite(wg_chain):
    cls = puiseux.classify_ep3(wg_chain, OPPOSITE)
    assert cls.kind is Kind.SQUARE_ROOT_PLUS_TAYLOR
    assert abs(cls.scalars["c"]) <= cls.tol
    u0, u1, _ = wg_chain.vectors
    assert abs(cls.scalars["d"] - 2 * u1 @ OPPOSITE @ u0) < 1e-12
    l1, l1m, kappa = cls.coefficients
    assert abs(l1 ** 2 - cls.scalars["d"]) < 1e-10
    assert l1m == -l1
    assert cls.exponents == (Fraction(1, 2), Fraction(1, 2), Fraction(1))


def test_classify_zero_perturbation(wg_chain):
    cls = puiseux.classify_ep3(wg_chain, np.zeros((3, 3)))
    assert cls.kind is Kind.DEGENERATE_OTHER
    with pytest.raises(InvalidInput):
        puiseux.predict_eigenvalues(cls, 0, 1e-3)


def test_classify_ep2(ep2_chain):
    h1 = np.diag([1.0, -1.0]).astype(complex)
    cls = puiseux.classify_ep2(ep2_chain, h1)
    assert cls.kind is Kind.SQUARE_ROOT
    u0 = ep2_chain.vectors[0]
    assert abs(cls.lambda1 ** 2 - u0 @ h1 @ u0) < 1e-12
    assert puiseux.classify_ep2(ep2_chain, np.eye(2)).kind is Kind.TAYLOR_ONLY
    assert puiseux.classify_ep2(ep2_chain, np.zeros((2, 2))).kind is Kind.TAYLOR_ONLY


def test_classify_rejects_bad_h1(wg_chain):
    with pytest.raises(InvalidInput):
        puiseux.classify_ep3(wg_chain, np.eye(2))
    with pytest.raises(InvalidInput):
        puiseux.classify_ep3(wg_chain, np.triu(np.ones((3, 3))))


def test_kind_dispatch(wg_chain, ep2_chain):
    assert puiseux.classify(wg_chain, EQUAL).order == 3
    assert puiseux.classify(ep2_chain, np.diag([1.0, -1.0])).order == 2


def test_stored_scalars_reproducible(rng, wg_chain):
    for _ in range(20):
        h1 = random_symmetric(rng, 3)
        cls = puiseux.classify_ep3(wg_chain, h1)
        u0 = wg_chain.vectors[0]
        assert abs(cls.scalars["c"] - u0 @ h1 @ u0) < 1e-10
        assert abs(cls.coefficients[0] - puiseux.principal_root(u0 @ h1 @ u0, 3)) < 1e-10


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_gauge_flip_invariance(seed):
    rng = np.random.default_rng(seed)
    chain = jordan.jordan_chain(WG)
    flipped = jordan.JordanChain(chain.matrix, chain.lambda0,
                                 tuple(-v for v in chain.vectors), chain.residuals)
    for h1 in (random_symmetric(rng, 3), square_root_h1(rng, chain)):
        a = puiseux.classify_ep3(chain, h1)
        b = puiseux.classify_ep3(flipped, h1)
        assert a.kind is b.kind
        assert np.allclose(np.abs(a.coefficients), np.abs(b.coefficients), rtol=1e-10, atol=1e-14)


def test_root_enumeration_order():
    r = [puiseux.principal_root(-8, 3) * puiseux.OMEGA3 ** k for k in range(3)]
    assert abs(r[0] - (1 + 1j * math.sqrt(3))) < 1e-12
    args = [math.atan2(x.imag, x.real) % (2 * math.pi) for x in r]
    assert args[0] < args[1] < args[2]


def test_literal_rank_one_variant_is_singular(wg_chain):
    u0, _, u2 = wg_chain.vectors
    literal = WG - np.outer(u0, u2)
    g = puiseux.kernel_removed_operator(wg_chain)
    s_lit = np.linalg.svd(literal, compute_uv=False)
    s_g = np.linalg.svd(g, compute_uv=False)
    assert s_lit[-1] < 1e-12 * s_lit[0]
    assert s_g[-1] > 1e-3 * s_g[0]
    # G u0 = -u2 because u2^T u0 = 1
    assert np.linalg.norm(g @ u0 + u2) < 1e-12


# -- predictions ------------------------------------------------------------------


def test_predict_at_zero(wg_chain):
    for h1 in (EQUAL, OPPOSITE):
        cls = puiseux.classify_ep3(wg_chain, h1)
        assert puiseux.predict_eigenvalues(cls, 0.25, 0) == [0.25] * 3
        for u in puiseux.predict_eigenvectors(cls, wg_chain, 0):
            assert np.allclose(u, wg_chain.vectors[0])


def test_predict_cube_roots_of_small_z():
    cls = puiseux.PuiseuxClass(Kind.THIRD_ROOT, 0j, 3, {"c": 1}, tuple(puiseux.OMEGA3 ** k for k in range(3)),
                               (Fraction(1, 3),) * 3, 1e-8, np.zeros((3, 3)))
    vals = puiseux.predict_eigenvalues(cls, 0, 1e-3)
    assert np.allclose(np.abs(vals), 0.1, rtol=1e-12)
    assert np.allclose(np.array(vals) ** 3, 1e-3, rtol=1e-10)


def test_predict_a_equals_b(wg_chain):
    cls = puiseux.classify_ep3(wg_chain, EQUAL)
    for z in (1e-4, 1e-4j, -1e-4 + 1e-5j):
        pred = puiseux.predict_eigenvalues(cls, 0, z)
        exact = match(pred, exact_eig(models.waveguide(z, z, 1, 1))[0])
        assert np.max(np.abs(exact - pred)) <= 5 * abs(z) ** (2 / 3)


def test_predict_a_equals_minus_b(wg_chain):
    cls = puiseux.classify_ep3(wg_chain, OPPOSITE)
    z = 1e-4
    pred = puiseux.predict_eigenvalues(cls, 0, z)
    exact = match(pred, exact_eig(models.waveguide(z, -z, 1, 1))[0])
    assert np.max(np.abs(exact[:2] - pred[:2])) <= 5 * z
    assert abs(exact[2] - pred[2]) <= 5 * z ** 2


def test_branch_sum_third_root(rng, wg_chain):
    for _ in range(20):
        cls = puiseux.classify_ep3(wg_chain, random_symmetric(rng, 3))
        assert cls.kind is Kind.THIRD_ROOT
        z = complex(*rng.normal(size=2)) * 1e-3
        lam0 = complex(*rng.normal(size=2))
        assert abs(sum(puiseux.predict_eigenvalues(cls, lam0, z)) - 3 * lam0) < 1e-12


def test_predict_ep2(ep2_chain):
    h1 = np.diag([1.0, -1.0])
    cls = puiseux.classify_ep2(ep2_chain, h1)
    z = 1e-4
    pred = puiseux.predict_eigenvalues(cls, 0, z)
    exact = match(pred, exact_eig(EP2 + z * h1)[0])
    assert np.max(np.abs(exact - pred)) <= 5 * z


def test_taylor_only_predictions(ep2_chain):
    cls = puiseux.classify_ep2(ep2_chain, np.eye(2))
    assert puiseux.predict_eigenvalues(cls, 0.5, 1e-3) == [0.5, 0.5]
    assert all(np.allclose(u, ep2_chain.vectors[0]) for u in puiseux.predict_eigenvectors(cls, ep2_chain, 1e-3))


# -- error scaling (exact diagonalization oracle) ------------------------------------

RADII = np.logspace(-6, -3, 7)


def branch_errors(cls, h0, h1, lam0, radii, phase=0.3):
    errs = []
    for r in radii:
        z = r * np.exp(1j * phase)
        pred = np.array(puiseux.predict_eigenvalues(cls, lam0, z))
        errs.append(np.abs(match(pred, exact_eig(h0 + z * h1)[0]) - pred))
    return np.array(errs)


def test_third_root_error_slope(wg_chain):
    cls = puiseux.classify_ep3(wg_chain, EQUAL)
    e = branch_errors(cls, WG, EQUAL, 0, RADII).max(axis=1)
    assert loglog_slope(RADII, e) >= 0.55


def test_third_root_error_slope_random(rng, wg_chain):
    for _ in range(5):
        h1 = random_symmetric(rng, 3)
        cls = puiseux.classify_ep3(wg_chain, h1)
        e = branch_errors(cls, WG, h1, 0, RADII).max(axis=1)
        assert loglog_slope(RADII, e) >= 0.55


def test_square_root_plus_taylor_error_slopes(wg_chain):
    cls = puiseux.classify_ep3(wg_chain, OPPOSITE)
    e = branch_errors(cls, WG, OPPOSITE, 0, RADII)
    assert loglog_slope(RADII, e[:, :2].max(axis=1)) >= 0.85
    # here the Taylor branch is exactly lambda0 (det H does not depend on z),
    # so its error is rounding only; the slope check runs on random families
    assert abs(cls.coefficients[2]) < 1e-12
    assert e[:, 2].max() < 1e-8


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_square_root_plus_taylor_error_slopes_random(seed):
    rng = np.random.default_rng(seed)
    chain = jordan.jordan_chain(WG)
    h1 = square_root_h1(rng, chain)
    cls = puiseux.classify_ep3(chain, h1)
    assert cls.kind is Kind.SQUARE_ROOT_PLUS_TAYLOR
    # keep clear of a vanishing square-root coefficient, where the pair degenerates
    if abs(cls.scalars["d"]) < 1e-2:
        return
    radii = np.logspace(-6, -3, 7)
    e = branch_errors(cls, WG, h1, 0, radii)
    assert loglog_slope(radii, e[:, :2].max(axis=1)) >= 0.85
    # the Taylor error ~ r**2 meets a rounding floor ~ eps / r (the nearby pair
    # has gap ~ r**(1/2)), so its slope is fitted where r**2 dominates
    radii = np.logspace(-3, -2, 4)
    e = branch_errors(cls, WG, h1, 0, radii)
    assume(e[0, 2] > 1e-9)  # a vanishing next-order coefficient leaves nothing to fit
    assert loglog_slope(radii, e[:, 2]) >= 1.4


def test_third_root_eigenvector_angle(wg_chain):
    cls = puiseux.classify_ep3(wg_chain, EQUAL)
    ratios = []
    for r in (1e-6, 1e-5, 1e-4):
        z = r * np.exp(0.3j)
        pred_vals = puiseux.predict_eigenvalues(cls, 0, z)
        pred_vecs = puiseux.predict_eigenvectors(cls, wg_chain, z)
        w, v = exact_eig(WG + z * EQUAL)
        assign, _ = tracking.match_branches(np.array(pred_vals), w)
        for k in range(3):
            ang = herm_angle(pred_vecs[k], v[assign[k]])
            ratios.append(ang / r ** (1 / 3))
    # leading order is exact through z**(1/3): the angle is well inside C |z|**(1/3)
    assert max(ratios) < 0.1


def test_taylor_branch_eigenvector_first_order(rng, wg_chain):
    for _ in range(5):
        h1 = square_root_h1(rng, wg_chain)
        cls = puiseux.classify_ep3(wg_chain, h1)
        angles, zeroth = [], []
        radii = [1e-3, 3e-4, 1e-4]
        for r in radii:
            z = r * np.exp(0.7j)
            vals = puiseux.predict_eigenvalues(cls, 0, z)
            vecs = puiseux.predict_eigenvectors(cls, wg_chain, z)
            w, v = exact_eig(WG + z * h1)
            assign, _ = tracking.match_branches(np.array(vals), w)
            angles.append(herm_angle(vecs[2], v[assign[2]]))
            zeroth.append(herm_angle(wg_chain.vectors[0], v[assign[2]]))
        # u0 alone is off at first order; the first-order correction removes that
        assert loglog_slope(radii, zeroth) > 0.9
        assert loglog_slope(radii, angles) > 1.5
        assert all(a < z0 for a, z0 in zip(angles, zeroth))


# -- exponent fits -------------------------------------------------------------------


def test_fit_equal_family():
    fit = puiseux.fit_exponents(models.waveguide_ab_equal(), 0, [1e-3, 1e-4, 1e-5, 1e-6])
    assert fit.cycle_structure == [3]
    assert abs(fit.groups[0].slope - 1 / 3) < 0.02


def test_fit_opposite_family():
    fit = puiseux.fit_exponents(models.waveguide_ab_opposite(), 0, [1e-3, 1e-4, 1e-5, 1e-6])
    assert fit.cycle_structure == [2, 1]
    pair, single = fit.groups
    assert abs(pair.slope - 0.5) < 0.02
    # the singleton is constant to rounding for this family (det H is z-independent)
    assert single.constant or single.slope >= 0.98


def test_fit_diagonal_family():
    fam = models.LinearFamily(np.diag([1.0, 2.0, 3.0]), np.eye(3))
    fit = puiseux.fit_exponents(fam, 1.0, [1e-1, 1e-2, 1e-3], phases_per_circle=64)
    (g,) = [g for g in fit.groups if min(abs(m) for m in g.means) < 0.5]
    assert abs(g.slope - 1.0) < 0.01


def test_fit_radius_preconditions():
    fam = models.waveguide_ab_equal()
    for radii in ([1e-3], [1e-4, 1e-3], [1e-3, 1e-9], [1e-3, -1e-4]):
        with pytest.raises(InvalidInput):
            puiseux.fit_exponents(fam, 0, radii)


def test_fit_inconsistent_cycles():
    # the large circle encloses both EP2s of this family, the small one only z = 0
    with pytest.raises(InconsistentCycles):
        puiseux.fit_exponents(models.symmetric_ep2(), 0, [3.0, 1e-2], phases_per_circle=256)


def test_fit_threads_deterministic(monkeypatch):
    fam = models.waveguide_ab_opposite()
    a = puiseux.fit_exponents(fam, 0, [1e-3, 1e-4, 1e-5], phases_per_circle=64)
    monkeypatch.setenv("EP3_ATLAS_THREADS", "3")
    b = puiseux.fit_exponents(fam, 0, [1e-3, 1e-4, 1e-5], phases_per_circle=64)
    assert json.dumps(a.to_json(), allow_nan=True) == json.dumps(b.to_json(), allow_nan=True)


def test_class_json(wg_chain):
    data = puiseux.classify_ep3(wg_chain, OPPOSITE).to_json()
    assert data["kind"] == "SquareRootPlusTaylor"
    assert [b["exponent"] for b in data["branches"]] == ["1/2", "1/2", "1"]
    json.dumps(data)
