"""Geometric phase at a symmetric EP2.

[[i + z, 1], [1, -i - z]] is defective at z = 0. One loop swaps the two
eigenvectors; after two loops each returns to itself with a phase of pi.
"""
import numpy as np

from ep3atlas import jordan, models, tracking

family = models.symmetric_ep2()
chain = jordan.jordan_chain(family(0))
print("EP2 chain residual: %.1e" % chain.max_residual())
print("u0 =", np.round(chain.vectors[0], 6), " u0^T u0 = %.1e" % abs(chain.vectors[0] @ chain.vectors[0]))

for center, label in ((0.0, "around the EP"), (0.5, "beside the EP")):
    rep = tracking.track_loop(tracking.LoopSpec(family, tracking.ComplexCircle(center, 0.1), 512, cycles=2))
    print("\nloop %s: one-cycle permutation %s, back after %d cycles, phases %s"
          % (label, rep.permutation, rep.cycles_to_return, np.round(rep.phases, 6) + 0.0))
