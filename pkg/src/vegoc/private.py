"""Forward dynamics and steady branches of the private-optimization model.

Time stepping is semi-implicit (IMEX) Euler: diffusion implicit, reaction
explicit, which tolerates the stiff water diffusion without tiny steps.
Steady-state continuation reuses the generic arclength engine with
private-model diagnostics (average profit instead of the social one, and a
linear stability flag instead of a defect).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from . import spectral
from .continuation import Branch, ContinuationOptions, continue_branch
from .errors import InvalidArgumentError
from .fem import average
from .model import PrivateSystem
from .objective import profit_density


@dataclass
class Trajectory:
    t: np.ndarray
    vw: np.ndarray      # (k, 2n) recorded states
    pi_avg: np.ndarray  # (k,) average private profit


def average_profit(system: PrivateSystem, vw) -> float:
    n = system.n
    v = np.maximum(vw[:n], 0.0)
    gamma = (system.params.p * (1 - system.params.alpha)
             / system.params.c) ** (1 / system.params.alpha)
    return average(profit_density(v, gamma * v, system.params), system.ops)


class PrivateStepper:
    """One IMEX Euler step: (M - dt*Diff) vw' = M vw + dt * reaction load."""

    def __init__(self, system: PrivateSystem, dt: float, blowup: float = 1e8):
        if dt <= 0:
            raise InvalidArgumentError(f"dt must be positive, got {dt}")
        self.system = system
        self.dt = dt
        self.blowup = blowup
        self.M = system.mass.tocsr()
        self._lu = splu((self.M - dt * system._diff).tocsc())

    def step(self, vw: np.ndarray) -> np.ndarray:
        sys_ = self.system
        comps = sys_.split(vw)
        Uq = [sys_.ops.at_quad(c) for c in comps]
        f = sys_._coeffs(Uq)
        load = np.concatenate([sys_.ops.load_vector(fi) for fi in f])
        out = self._lu.solve(self.M @ vw + self.dt * load)
        # positivity clip; anything below the tolerance signals a too-large dt
        out[(out > -1e-12) & (out < 0.0)] = 0.0
        if not np.all(np.isfinite(out)) or np.max(np.abs(out)) > self.blowup:
            raise FloatingPointError(
                f"private time step blew up (|vw| > {self.blowup:g})")
        return out


def step_private(system: PrivateSystem, vw, dt: float) -> np.ndarray:
    return PrivateStepper(system, dt).step(np.asarray(vw, dtype=float))


def simulate(system: PrivateSystem, vw0, dt: float, nsteps: int,
             record_every: int = 1, blowup: float = 1e8) -> Trajectory:
    stepper = PrivateStepper(system, dt, blowup=blowup)
    vw = np.asarray(vw0, dtype=float).copy()
    ts, states, pis = [0.0], [vw.copy()], [average_profit(system, vw)]
    for k in range(1, nsteps + 1):
        vw = stepper.step(vw)
        if k % record_every == 0 or k == nsteps:
            ts.append(k * dt)
            states.append(vw.copy())
            pis.append(average_profit(system, vw))
    return Trajectory(t=np.array(ts), vw=np.array(states), pi_avg=np.array(pis))


def private_diagnostics(system: PrivateSystem, U, with_stability=True) -> dict:
    n = system.n
    d = {
        "v": average(U[:n], system.ops),
        "w": average(U[n:], system.ops),
        "lam": np.nan,
        "mu": np.nan,
        "jca": average_profit(system, U),
        "defect": None,
    }
    if with_stability:
        spec = spectral.spectrum(system, U, k="all")
        d["stable"] = int(spec.n_unstable == 0 and not spec.marginal)
    return d


def continue_private_branch(system: PrivateSystem, pname: str, u0,
                            p0: float | None = None, direction: int = -1,
                            opts: ContinuationOptions | None = None,
                            with_stability: bool = True,
                            provenance: str = "") -> Branch:
    """Arclength continuation of private steady states (thin wrapper)."""

    def diag(sys_, U):
        return private_diagnostics(sys_, U, with_stability=with_stability)

    return continue_branch(system, pname, u0, p0=p0, direction=direction,
                           opts=opts, diag=diag, provenance=provenance)
