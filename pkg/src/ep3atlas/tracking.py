"""Eigenvalue and eigenvector continuation around closed parameter loops.

A loop is sampled at ``steps_per_cycle`` equally spaced angles per cycle.
At every sample the matrix is diagonalized and the new eigenvalues are
matched to the previous ones by the cheapest assignment over all
permutations. Steps whose best and second-best assignments are too close to
call are bisected. Eigenvectors are c-normalized (``u^T u = 1``) and their
sign is chosen to continue smoothly.

After one cycle branch ``i`` lands on the starting branch ``sigma(i)`` with
a factor ``f_i = u_{sigma(i)}(0)^T u_i(2 pi)``, which is +-1 for c-normalized
vectors. Following a branch around its orbit of ``sigma`` multiplies these
factors; the argument of that product (0 or pi) is the branch's geometric
phase, and it does not depend on the signs chosen for the initial vectors.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import permutations
from typing import Optional, Union

import numpy as np

from . import linalg
from .errors import EPOnPath, InvalidInput, MatchingAmbiguous

MAX_TRACK_DIM = 6
MAX_DEPTH = 12
MIN_STEPS = 64
GAP_TOL = 1e-9
MAX_ABSENT = 2


@dataclass(frozen=True)
class ComplexCircle:
    """``z = center + radius * exp(+-i phi)`` for a one-parameter family."""

    center: complex = 0.0
    radius: float = 0.1
    orientation: int = 1

    nparams = 1

    def __post_init__(self):
        if not (self.radius > 0 and np.isfinite(self.radius)):
            raise InvalidInput("loop radius must be positive and finite")
        if self.orientation not in (1, -1):
            raise InvalidInput("orientation must be +1 or -1")

    def params(self, unit: complex) -> tuple:
        if self.orientation < 0:
            unit = unit.conjugate()
        return (complex(self.center) + self.radius * unit,)

    def reversed(self) -> "ComplexCircle":
        return ComplexCircle(self.center, self.radius, -self.orientation)

    def describe(self) -> dict:
        c = complex(self.center)
        return {"type": "ComplexCircle", "center": [c.real, c.imag], "radius": self.radius,
                "orientation": self.orientation}


@dataclass(frozen=True)
class RealEllipse:
    """``(a, b) = center + (r cos phi, rb sin phi)`` for a two-real-parameter family."""

    r: float = 0.5
    rb: Optional[float] = None
    center: tuple = (0.0, 0.0)
    orientation: int = 1

    nparams = 2

    def __post_init__(self):
        rb = self.r if self.rb is None else self.rb
        if not (self.r > 0 and rb > 0 and np.isfinite(self.r) and np.isfinite(rb)):
            raise InvalidInput("ellipse radii must be positive and finite")
        if self.orientation not in (1, -1):
            raise InvalidInput("orientation must be +1 or -1")

    def params(self, unit: complex) -> tuple:
        rb = self.r if self.rb is None else self.rb
        a0, b0 = self.center
        return (a0 + self.r * unit.real, b0 + self.orientation * rb * unit.imag)

    def reversed(self) -> "RealEllipse":
        return RealEllipse(self.r, self.rb, self.center, -self.orientation)

    def describe(self) -> dict:
        return {"type": "RealEllipse", "r": self.r, "rb": self.r if self.rb is None else self.rb,
                "center": list(self.center), "orientation": self.orientation}


Path = Union[ComplexCircle, RealEllipse]


@dataclass(frozen=True)
class LoopSpec:
    family: object
    path: Path
    steps_per_cycle: int = 512
    cycles: int = 1

    def __post_init__(self):
        if self.steps_per_cycle < MIN_STEPS or self.steps_per_cycle % 2:
            raise InvalidInput(f"steps_per_cycle must be even and >= {MIN_STEPS}")
        if self.cycles < 1:
            raise InvalidInput("cycles must be >= 1")
        nparams = getattr(self.family, "nparams", 1)
        if nparams != self.path.nparams:
            raise InvalidInput(
                f"{type(self.path).__name__} needs a {self.path.nparams}-parameter family, "
                f"got {nparams}"
            )

    def unit(self, t: float) -> complex:
        """``exp(2 pi i t / steps)``, exact at quarter turns so loops hit grid points exactly."""
        n = self.steps_per_cycle
        if float(t).is_integer() and (4 * int(t)) % n == 0:
            return (1.0 + 0j, 1j, -1.0 + 0j, -1j)[(4 * int(t) // n) % 4]
        return complex(np.exp(2j * np.pi * (t % n) / n))

    def matrix(self, t: float) -> np.ndarray:
        return self.family(*self.path.params(self.unit(t)))

    def reversed(self) -> "LoopSpec":
        return LoopSpec(self.family, self.path.reversed(), self.steps_per_cycle, self.cycles)


@dataclass(frozen=True)
class Sample:
    cycle: int
    step: int
    phi: float
    values: np.ndarray
    vectors: tuple
    errors: np.ndarray = field(repr=False, default=None)


@lru_cache(maxsize=None)
def _perms(n: int) -> np.ndarray:
    return np.array(list(permutations(range(n))), dtype=np.intp)


def match_branches(prev, nxt) -> tuple[np.ndarray, bool]:
    """Assign each previous value to one new value, minimizing total distance.

    Returns ``(assign, ambiguous)`` where ``nxt[assign[i]]`` continues
    ``prev[i]``. The step is ambiguous when the second-best assignment costs
    less than twice the largest single-branch displacement more than the best.
    """
    prev = np.asarray(prev)
    nxt = np.asarray(nxt)
    n = prev.size
    if n == 1:
        return np.zeros(1, dtype=np.intp), False
    if n > MAX_TRACK_DIM:
        raise InvalidInput(f"branch matching is limited to n <= {MAX_TRACK_DIM}")
    cost = np.abs(prev[:, None] - nxt[None, :])
    perms = _perms(n)
    totals = cost[np.arange(n), perms].sum(axis=1)
    order = np.argsort(totals, kind="stable")
    best = perms[order[0]]
    motion = cost[np.arange(n), best].max()
    margin = totals[order[1]] - totals[order[0]]
    return best.copy(), bool(margin < 2.0 * motion)


@dataclass
class _State:
    t: float
    values: np.ndarray
    vectors: list
    last_vectors: list
    absent: list
    transport: np.ndarray
    errors: np.ndarray


class _Tracker:
    def __init__(self, spec: LoopSpec):
        self.spec = spec
        self.refinements = 0

    def spectrum(self, t: float) -> linalg.Spectrum:
        m = self.spec.matrix(t)
        if m.shape[0] > MAX_TRACK_DIM:
            raise InvalidInput(f"tracking is limited to n <= {MAX_TRACK_DIM}")
        spec = linalg.eig(m)
        phi = 2 * np.pi * t / self.spec.steps_per_cycle
        if spec.defective or spec.min_gap() < GAP_TOL * (1.0 + spec.norm):
            raise EPOnPath(f"loop passes through a degeneracy at phi = {phi % (2 * np.pi):.6g}", phi=phi)
        return spec

    @staticmethod
    def _vectors(spec: linalg.Spectrum) -> list:
        out = []
        for i in range(spec.n):
            u = spec.vectors[i]
            out.append(None if u is None or spec.self_orthogonal[i] else u)
        return out

    def initial(self) -> _State:
        spec = self.spectrum(0.0)
        vecs = self._vectors(spec)
        if any(v is None for v in vecs):
            raise MatchingAmbiguous("an eigenvector at the loop start is self-orthogonal; shift the loop")
        n = spec.n
        return _State(0.0, spec.values.copy(), vecs, list(vecs), [0] * n, np.zeros(n),
                      spec.errors.copy())

    def advance(self, state: _State, t1: float, depth: int = 0) -> _State:
        spec = self.spectrum(t1)
        assign, ambiguous = match_branches(state.values, spec.values)
        if ambiguous:
            if depth >= MAX_DEPTH:
                raise MatchingAmbiguous(
                    f"branch assignment still ambiguous after {MAX_DEPTH} bisections near t = {t1}"
                )
            self.refinements += 1
            mid = 0.5 * (state.t + t1)
            return self.advance(self.advance(state, mid, depth + 1), t1, depth + 1)
        raw = self._vectors(spec)
        n = spec.n
        vectors, last, absent = [], [], []
        transport = state.transport.copy()
        for i in range(n):
            u = raw[assign[i]]
            if u is None:
                if state.absent[i] + 1 > MAX_ABSENT:
                    raise MatchingAmbiguous(
                        f"branch {i} eigenvector self-orthogonal for more than {MAX_ABSENT} samples"
                    )
                vectors.append(None)
                last.append(state.last_vectors[i])
                absent.append(state.absent[i] + 1)
                continue
            ov = linalg.c_dot(state.last_vectors[i], u)
            if ov.real < 0:
                u = -u
                ov = -ov
            transport[i] += math.atan2(ov.imag, ov.real)
            vectors.append(u)
            last.append(u)
            absent.append(0)
        return _State(t1, spec.values[assign], vectors, last, absent, transport,
                      spec.errors[assign])


@dataclass
class LoopReport:
    """Samples and monodromy data of a tracked loop.

    ``permutation[i]`` is the starting label reached by branch ``i`` after one
    cycle; ``permutations`` and ``signs`` hold the per-cycle maps and raw sign
    factors for every tracked cycle. ``phases[i]`` is the phase picked up by
    branch ``i`` after a full orbit (``orbit length`` cycles), in (-pi, pi].
    ``absorbed_signs`` shows the per-cycle signs after choosing initial vector
    signs so that only the last step of each orbit carries a sign.
    """

    spec: LoopSpec = field(repr=False)
    samples: list = field(repr=False)
    permutation: tuple
    permutations: tuple
    total_permutation: tuple
    signs: tuple
    factors: tuple
    cycles_to_return: int
    phases: tuple
    absorbed_signs: tuple
    transport_phase: tuple
    refinements: int

    @property
    def n(self) -> int:
        return len(self.permutation)

    def orbits(self) -> list[list[int]]:
        return _orbits(self.permutation)

    def trajectory(self, branch: int, cycle: Optional[int] = None) -> np.ndarray:
        """Eigenvalues of one tracked branch (all cycles, or a single cycle incl. its endpoint)."""
        if cycle is None:
            return np.array([s.values[branch] for s in self.samples])
        n = self.spec.steps_per_cycle
        return np.array([s.values[branch] for s in self.samples[cycle * n:(cycle + 1) * n + 1]])

    def orbit_polyline(self, rep: int) -> tuple[np.ndarray, np.ndarray]:
        """Closed eigenvalue curve traced by the orbit of ``rep`` and its loop angle.

        Built from first-cycle arcs joined through the permutation, so it is
        available even when fewer cycles than the orbit length were tracked.
        """
        n = self.spec.steps_per_cycle
        pts, phis = [], []
        b, k = rep, 0
        while True:
            arc = self.trajectory(b, 0)
            pts.append(arc[:-1])
            phis.append(2 * np.pi * (k + np.arange(n) / n))
            b = self.permutation[b]
            k += 1
            if b == rep:
                break
        pts.append(self.trajectory(rep, 0)[:1])
        phis.append(np.array([2 * np.pi * k]))
        return np.concatenate(pts), np.concatenate(phis)

    @cached_property
    def crossings(self) -> list:
        return detect_self_crossings(self)

    def summary(self) -> dict:
        mono = monodromy_summary(self)
        return {
            "path": self.spec.path.describe(),
            "family": getattr(self.spec.family, "name", None),
            "steps_per_cycle": self.spec.steps_per_cycle,
            "cycles": self.spec.cycles,
            "permutation": list(self.permutation),
            "total_permutation": list(self.total_permutation),
            "signs": [list(s) for s in self.signs],
            "absorbed_signs": list(self.absorbed_signs),
            "cycles_to_return": self.cycles_to_return,
            "phases": [_clean(p) for p in self.phases],
            "cycle_structure": mono["cycle_structure"],
            "phase_per_orbit": [_clean(p) for p in mono["phase_per_orbit"]],
            "crossings": [
                {"branch": c["branch"], "phi1": c["phi1"], "phi2": c["phi2"],
                 "point": [c["point"].real, c["point"].imag]}
                for c in self.crossings
            ],
            "refinements": self.refinements,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cycle", "step", "phi", "branch", "re_lambda", "im_lambda"])
        for s in self.samples:
            for b, lam in enumerate(s.values):
                w.writerow([s.cycle, s.step, repr(float(s.phi)), b,
                            repr(float(lam.real)), repr(float(lam.imag))])
        return buf.getvalue()


def _clean(phase: float) -> float:
    """Map -pi (from rounding) to +pi so values lie in (-pi, pi]."""
    p = float(phase)
    return math.pi if p <= -math.pi + 1e-12 else p


def _orbits(perm) -> list[list[int]]:
    seen = set()
    out = []
    for i in range(len(perm)):
        if i in seen:
            continue
        orbit = [i]
        seen.add(i)
        j = perm[i]
        while j != i:
            orbit.append(j)
            seen.add(j)
            j = perm[j]
        out.append(orbit)
    return out


def track_loop(spec: LoopSpec) -> LoopReport:
    """Track all branches of ``spec.family`` around ``spec.path``.

    Raises
    ------
    EPOnPath
        A sample is defective or has a pairwise eigenvalue gap below
        ``1e-9 * (1 + ||H||)``.
    MatchingAmbiguous
        Branch assignment stays ambiguous after 12 bisections, or an
        eigenvector is self-orthogonal on more than two consecutive samples.
    """
    tracker = _Tracker(spec)
    state = tracker.initial()
    n_steps = spec.steps_per_cycle
    start_vectors = list(state.vectors)
    start_values = state.values.copy()

    def sample(j, st):
        cycle = min(j // n_steps, spec.cycles - 1)
        step = j - cycle * n_steps
        vals = st.values.copy()
        vals.setflags(write=False)
        errs = st.errors.copy()
        errs.setflags(write=False)
        return Sample(cycle, step, 2 * np.pi * step / n_steps, vals, tuple(st.vectors), errs)

    samples = [sample(0, state)]
    cumulative = []
    factors_cum = []
    transport_first = None
    for j in range(1, n_steps * spec.cycles + 1):
        state = tracker.advance(state, float(j))
        samples.append(sample(j, state))
        if j % n_steps == 0:
            perm, _ = match_branches(state.values, start_values)
            cumulative.append(tuple(int(p) for p in perm))
            f = []
            for i in range(len(perm)):
                u = state.vectors[i]
                if u is None:
                    raise MatchingAmbiguous("eigenvector self-orthogonal at the end of a cycle")
                f.append(linalg.c_dot(start_vectors[perm[i]], u))
            factors_cum.append(np.array(f))
            if transport_first is None:
                transport_first = state.transport.copy()

    n = start_values.size
    perm1 = cumulative[0]
    f1 = factors_cum[0]
    per_cycle_perms = [perm1]
    per_cycle_signs = [tuple(int(np.sign(x.real)) or 1 for x in f1)]
    for c in range(1, len(cumulative)):
        prev, cur = cumulative[c - 1], cumulative[c]
        q = [0] * n
        s = [1] * n
        for i in range(n):
            q[prev[i]] = cur[i]
            ratio = factors_cum[c][i] / factors_cum[c - 1][i]
            s[prev[i]] = int(np.sign(ratio.real)) or 1
        per_cycle_perms.append(tuple(q))
        per_cycle_signs.append(tuple(s))

    phases = [0.0] * n
    absorbed = [1] * n
    ctr = 1
    for orbit in _orbits(perm1):
        prod = complex(np.prod(f1[orbit]))
        ph = math.atan2(prod.imag, prod.real)
        for i in orbit:
            phases[i] = ph
        sgn = 1 if prod.real >= 0 else -1
        absorbed[orbit[-1]] = sgn
        period = len(orbit) * (2 if sgn < 0 else 1)
        ctr = ctr * period // math.gcd(ctr, period)

    # the arg sums measure departure from parallel transport; the sign flips
    # are the discrete part of the phase and are carried by the factors
    transport = tuple(float(x) for x in transport_first)
    return LoopReport(
        spec=spec,
        samples=samples,
        permutation=perm1,
        permutations=tuple(per_cycle_perms),
        total_permutation=cumulative[-1],
        signs=tuple(per_cycle_signs),
        factors=tuple(complex(x) for x in f1),
        cycles_to_return=ctr,
        phases=tuple(_clean(p) for p in phases),
        absorbed_signs=tuple(absorbed),
        transport_phase=transport,
        refinements=tracker.refinements,
    )


def monodromy_summary(report: LoopReport) -> dict:
    """Cycle structure of the permutation and the phase accumulated per orbit.

    Orbits are listed longest first, ties by smallest branch label.
    """
    orbits = sorted(report.orbits(), key=lambda o: (-len(o), min(o)))
    return {
        "cycle_structure": [len(o) for o in orbits],
        "orbits": [sorted(o) for o in orbits],
        "phase_per_orbit": [report.phases[o[0]] for o in orbits],
    }


def polyline_self_crossings(points, params=None, closed: bool = False, tol: float = 1e-12) -> list[dict]:
    """Transversal self-intersections of a polyline in the complex plane.

    Each segment is treated as half-open ``[p_k, p_{k+1})`` so a crossing on
    a shared vertex is counted once; adjacent segments are never compared.
    ``params`` (same length as ``points``) is interpolated to give the
    parameter values of both passes through each crossing.
    """
    p = np.asarray(points, dtype=np.complex128)
    if params is None:
        params = np.arange(p.size, dtype=float)
    params = np.asarray(params, dtype=float)
    if closed and p[0] != p[-1]:
        p = np.append(p, p[0])
        params = np.append(params, params[-1] + (params[-1] - params[-2]))
    closed = bool(p[0] == p[-1])
    a = p[:-1]
    d = p[1:] - p[:-1]
    m = a.size
    if m < 3:
        return []
    scale = max(float(np.abs(d).max()), 1e-300)
    out = []
    for k in range(m - 2):
        ls = np.arange(k + 2, m)
        if closed and k == 0:
            ls = ls[ls != m - 1]
        if ls.size == 0:
            continue
        dk = d[k]
        dl = d[ls]
        w = a[ls] - a[k]
        denom = (dk.conjugate() * dl).imag  # cross(dk, dl)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (w.conjugate() * dl).imag / denom
            u = (w.conjugate() * dk).imag / denom
        ok = (np.abs(denom) > tol * scale * scale) & (t >= 0) & (t < 1) & (u >= 0) & (u < 1)
        for idx in np.nonzero(ok)[0]:
            l = int(ls[idx])
            tt, uu = float(t[idx]), float(u[idx])
            out.append({
                "phi1": float(params[k] + tt * (params[k + 1] - params[k])),
                "phi2": float(params[l] + uu * (params[l + 1] - params[l])),
                "point": complex(a[k] + tt * dk),
            })
    return out


def detect_self_crossings(report: LoopReport) -> list[dict]:
    """Self-crossings of each orbit's eigenvalue curve.

    Branches that exchange under the monodromy trace one closed curve
    together, so the curve of each orbit is examined once and reported under
    its smallest branch label. ``phi1``/``phi2`` are loop angles measured
    continuously along the orbit (in ``[0, 2 pi * orbit length)``).
    """
    found = []
    for orbit in report.orbits():
        rep = min(orbit)
        pts, phis = report.orbit_polyline(rep)
        for c in polyline_self_crossings(pts, phis, closed=False):
            if any(abs(c["point"] - f["point"]) < 1e-9 and f["branch"] == rep for f in found):
                continue
            found.append({"branch": rep, **c})
    return found
