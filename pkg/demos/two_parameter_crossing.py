"""Eigenvalue trajectories for a loop in the real (a, b) plane.

With two independent real parameters the loop a = r cos(phi),
b = r sin(phi) no longer winds around the EP3 in a single complex
plane, and the eigenvalue trajectories cross themselves.
"""
import numpy as np

from ep3atlas import models, tracking

family = models.WaveguideTwoParam()
rep = tracking.track_loop(tracking.LoopSpec(family, tracking.RealEllipse(0.5), 512))
mono = tracking.monodromy_summary(rep)
print("orbits:", mono["orbits"], "phases:", np.round(rep.phases, 6) + 0.0)

crossings = tracking.detect_self_crossings(rep)
print("\n%d self-crossing(s) of the eigenvalue trajectories" % len(crossings))
for c in crossings:
    print("  ", c)
