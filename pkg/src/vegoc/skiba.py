"""Indifference (Skiba) points between two saddle targets.

Along the segment of initial states

    (v, w)(0; alpha) = (1 - alpha) * states(A) + alpha * states(B)

we compare the values of the canonical paths to target A and to target B.
A Skiba point is a sign change of g(alpha) = J_to_A - J_to_B: starting
there, both policies are equally good although they steer the system to
different steady states.  g is sampled by bisection; each path family is
advanced by warm-started initial-state continuation from the nearest
already-solved alpha.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cpath import CanonicalPath, connect, continue_initial_state
from .errors import PathNonexistenceError, VegocError
from .newton import CSSPoint


class SkibaNotFoundError(VegocError):
    """No sign change of the value gap in the search range."""


@dataclass
class SkibaResult:
    alpha: float
    J_A: float
    J_B: float
    gap: float
    path_A: CanonicalPath
    path_B: CanonicalPath
    samples: list = field(default_factory=list)  # (alpha, J_A, J_B)
    notes: list = field(default_factory=list)


class _PathFamily:
    """Paths to one fixed target, indexed by the blend coordinate."""

    def __init__(self, system, target: CSSPoint, states_of, T, m, tol):
        self.system = system
        self.target = target
        self.states_of = states_of
        self.T, self.m, self.tol = T, m, tol
        self.cache: dict[float, CanonicalPath] = {}

    def path_at(self, alpha: float) -> CanonicalPath:
        key = round(alpha, 12)
        if key in self.cache:
            return self.cache[key]
        v0w0 = self.states_of(alpha)
        if self.cache:
            nearest = min(self.cache, key=lambda a: abs(a - alpha))
            base = self.cache[nearest]
            path = continue_initial_state(base, v0w0, tol=self.tol)
        else:
            path = connect(self.system, v0w0, self.target, T=self.T,
                           m=self.m, tol=self.tol)
        self.cache[key] = path
        return path


def find_skiba(system, css_A: CSSPoint, css_B: CSSPoint,
               alpha_range=(0.0, 1.0), tol: float = 0.1,
               alpha_tol: float = 1e-3, T: float | None = None, m: int = 80,
               path_tol: float = 1e-8, max_bisect: int = 60) -> SkibaResult:
    """Bisection for the Skiba point between the targets A and B.

    Both targets must have the saddle-point property.  ``tol`` bounds the
    accepted value gap |J_to_A - J_to_B| at the returned alpha.  Path
    nonexistence inside the range shrinks the range (recorded in notes).
    """
    n = system.n
    sA = css_A.u[:2 * n]
    sB = css_B.u[:2 * n]

    def states_of(alpha):
        return (1.0 - alpha) * sA + alpha * sB

    famA = _PathFamily(system, css_A, states_of, T, m, path_tol)
    famB = _PathFamily(system, css_B, states_of, T, m, path_tol)
    samples = []
    notes = []

    def gap(alpha):
        pa = famA.path_at(alpha)
        pb = famB.path_at(alpha)
        samples.append((alpha, pa.J, pb.J))
        return pa.J - pb.J, pa, pb

    lo, hi = float(alpha_range[0]), float(alpha_range[1])
    try:
        g_lo, pa_lo, pb_lo = gap(lo)
    except PathNonexistenceError as exc:
        notes.append(f"path missing at alpha={lo:g} ({exc}); range shrunk")
        lo = lo + 0.1 * (hi - lo)
        g_lo, pa_lo, pb_lo = gap(lo)
    try:
        g_hi, pa_hi, pb_hi = gap(hi)
    except PathNonexistenceError as exc:
        notes.append(f"path missing at alpha={hi:g} ({exc}); range shrunk")
        hi = hi - 0.1 * (hi - lo)
        g_hi, pa_hi, pb_hi = gap(hi)
    if np.sign(g_lo) == np.sign(g_hi):
        raise SkibaNotFoundError(
            f"no sign change of J_to_A - J_to_B on [{lo:g}, {hi:g}] "
            f"(g = {g_lo:.4g} .. {g_hi:.4g})")

    best = None
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        try:
            g_mid, pa, pb = gap(mid)
        except PathNonexistenceError as exc:
            notes.append(f"path missing at alpha={mid:g} ({exc})")
            # shrink toward the endpoint whose path exists
            hi = mid if abs(mid - lo) > abs(hi - mid) else hi
            lo = lo if hi == mid else mid
            continue
        best = (mid, pa, pb, g_mid)
        if abs(g_mid) <= tol and (hi - lo) <= max(alpha_tol, 1e-12):
            break
        if np.sign(g_mid) == np.sign(g_lo):
            lo, g_lo = mid, g_mid
        else:
            hi, g_hi = mid, g_mid
        if (hi - lo) <= alpha_tol and abs(g_mid) <= tol:
            break
    if best is None:
        raise SkibaNotFoundError("bisection produced no evaluable point")
    alpha, pa, pb, g = best
    return SkibaResult(alpha=alpha, J_A=pa.J, J_B=pb.J, gap=abs(g),
                       path_A=pa, path_B=pb,
                       samples=sorted(samples), notes=notes)
