"""Locating the EP3 of the two-parameter waveguide from random guesses."""
import time

import numpy as np

from ep3atlas import epfind, models

family = models.WaveguideTwoParam()
rng = np.random.default_rng(0)
start = time.perf_counter()
for _ in range(5):
    x = rng.normal(size=4)
    x *= 0.2 * rng.uniform() ** 0.25 / np.linalg.norm(x)
    guess = (complex(x[0], x[1]), complex(x[2], x[3]))
    res = epfind.find_ep(epfind.EPSearchProblem(family, 3, guess))
    print("guess (%.3f%+.3fj, %.3f%+.3fj) -> |(a, b)| = %.1e, lambda0 = %.1e, order %d"
          % (guess[0].real, guess[0].imag, guess[1].real, guess[1].imag,
             max(abs(p) for p in res.params), abs(res.lambda0), res.verified_order))
print("total %.2f s" % (time.perf_counter() - start))
