"""Square-root-plus-Taylor scenario: the waveguide EP3 perturbed along a = -b.

Here u0^T H1 u0 vanishes: two eigenvalues split as z**(1/2) and the third
follows an ordinary power series. Around a loop the pair swaps while the
third branch returns to itself with a minus sign on its eigenvector.
"""
import numpy as np

from ep3atlas import jordan, models, puiseux, tracking

h0 = models.waveguide(0, 0, 1, 1)
family = models.waveguide_ab_opposite()
h1 = family.matrices[1]

chain = jordan.jordan_chain(h0)
cls = puiseux.classify(chain, h1)
print("scenario:", cls.kind.value)
print("u0^T H1 u0 = %.1e" % abs(chain.vectors[0] @ h1 @ chain.vectors[0]))

fit = puiseux.fit_exponents(family, 0, [1e-3, 1e-4, 1e-5, 1e-6])
for g in fit.groups:
    slope = "constant" if g.constant else "%.4f" % g.slope
    print("orbit %s: exponent %s" % (list(g.members), slope))

rep = tracking.track_loop(tracking.LoopSpec(family, tracking.ComplexCircle(0, 0.1), 512, cycles=2))
mono = tracking.monodromy_summary(rep)
print("\ntwo loops |z| = 0.1")
print("  orbits:", mono["orbits"])
print("  per-cycle signs:", rep.signs)
print("  phase per orbit:", np.round(mono["phase_per_orbit"], 6) + 0.0)
