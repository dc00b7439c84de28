"""Third-root scenario: perturbing the waveguide EP3 along a = b.

The three eigenvalues split as z**(1/3), the leading-order expansion
predicts them, and one loop around z = 0 permutes them cyclically.
"""
import numpy as np

from ep3atlas import jordan, models, puiseux, tracking

h0 = models.waveguide(0, 0, 1, 1)
family = models.waveguide_ab_equal()
h1 = family.matrices[1]

chain = jordan.jordan_chain(h0)
print("Jordan chain at lambda0 =", chain.lambda0)
print("  largest condition residual: %.2e" % chain.max_residual())

cls = puiseux.classify(chain, h1)
print("scenario:", cls.kind.value)

print("\n   r        max |exact - predicted|   5 r^(2/3)")
for r in (1e-2, 1e-3, 1e-4, 1e-5):
    z = r * np.exp(0.3j)
    pred = np.array(puiseux.predict_eigenvalues(cls, chain.lambda0, z))
    exact = np.linalg.eigvals(h0 + z * h1)
    assign, _ = tracking.match_branches(pred, exact)
    print("  %.0e   %.3e                 %.3e" % (r, np.abs(exact[assign] - pred).max(), 5 * r ** (2 / 3)))

fit = puiseux.fit_exponents(family, 0, [1e-3, 1e-4, 1e-5, 1e-6])
print("\nfitted exponent of the single orbit: %.4f (expect 1/3)" % fit.groups[0].slope)

rep = tracking.track_loop(tracking.LoopSpec(family, tracking.ComplexCircle(0, 0.1), 512))
mono = tracking.monodromy_summary(rep)
print("\nloop |z| = 0.1: permutation", rep.permutation, "orbits", mono["orbits"])
print("cycles to return:", rep.cycles_to_return)
print("phases after a full orbit:", np.round(rep.phases, 6) + 0.0)
