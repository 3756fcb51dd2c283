"""Damped Newton solves for steady states, flat and patterned.

Flat steady states are solved first as small algebraic systems in the
component values (the diffusion terms vanish) and then embedded on the
mesh, where they satisfy the weak residual to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import objective, spectral
from .errors import NewtonError
from .fem import average
from .model import CanonicalSystem, PrivateSystem
from .params import ParameterSet

STEADY_TOL = 1e-8  # inf-norm of the weak residual


@dataclass
class NewtonResult:
    u: np.ndarray
    iterations: int
    residual_norm: float
    residual_history: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)


def _linsolve(J, rhs):
    if sp.issparse(J):
        try:
            return spla.splu(J.tocsc()).solve(rhs)
        except RuntimeError as exc:  # SuperLU reports exact singularity
            raise np.linalg.LinAlgError(str(exc)) from exc
    return np.linalg.solve(J, rhs)


def newton(residual, jacobian, u0, tol=STEADY_TOL, max_iter=30,
           guard=None, clip=None, damping=True):
    """Damped Newton iteration for residual(u) = 0.

    guard(u) -> bool rejects inadmissible trial points during backtracking;
    clip(u) -> u sanitizes accepted iterates (e.g. zeroes tiny negatives).
    Backtracking is on the squared residual norm (Armijo).  Raises
    NewtonError with kind "singular", "stalled", or "maxiter".
    """
    u = np.array(u0, dtype=float)
    if clip is not None:
        u = clip(u)
    r = residual(u)
    rnorm = float(np.max(np.abs(r)))
    history = [rnorm]
    steps = []
    for it in range(max_iter):
        if rnorm <= tol:
            return NewtonResult(u, it, rnorm, history, steps)
        try:
            du = _linsolve(jacobian(u), -r)
        except np.linalg.LinAlgError as exc:
            raise NewtonError("singular", it, rnorm, f"singular Jacobian: {exc}")
        merit0 = float(np.dot(r, r))
        t = 1.0
        accepted = False
        while t >= (2.0 ** -24 if damping else 1.0):
            u_try = u + t * du
            if clip is not None:
                u_try = clip(u_try)
            if guard is None or guard(u_try):
                try:
                    r_try = residual(u_try)
                except Exception:
                    r_try = None
                if r_try is not None and np.all(np.isfinite(r_try)):
                    merit = float(np.dot(r_try, r_try))
                    if merit <= (1.0 - 1e-4 * t) * merit0 or merit <= tol * tol:
                        u, r = u_try, r_try
                        accepted = True
                        break
            if not damping:
                break
            t *= 0.5
        if not accepted:
            raise NewtonError("stalled", it, rnorm,
                              "no admissible decrease along the Newton direction")
        rnorm = float(np.max(np.abs(r)))
        history.append(rnorm)
        steps.append(float(np.max(np.abs(t * du))))
    if rnorm <= tol:
        return NewtonResult(u, max_iter, rnorm, history, steps)
    raise NewtonError("maxiter", max_iter, rnorm)


@dataclass
class CSSPoint:
    """A canonical steady state with diagnostics."""

    u: np.ndarray
    params: ParameterSet
    averages: dict
    jca: float
    defect: int | None
    residual_norm: float
    label: str = ""

    @property
    def value(self) -> float:
        """Objective of the constant path sitting at this state."""
        return self.jca / self.params.rho

    def states(self, n: int) -> np.ndarray:
        """Initial-state block (v, w) of length 2n."""
        return self.u[:2 * n].copy()

    def as_record(self) -> dict:
        rec = {"label": self.label, **self.averages, "jca": self.jca,
               "defect": self.defect, "residual_norm": self.residual_norm}
        return rec


def css_diagnostics(system: CanonicalSystem, U, with_defect=True,
                    spectrum_k="all"):
    v, w, lam, mu = system.split(U)
    ops = system.ops
    d = None
    if with_defect:
        d = spectral.defect(system, U, k=spectrum_k)
    return {
        "v": average(v, ops), "w": average(w, ops),
        "lam": average(lam, ops), "mu": average(mu, ops),
        "jca": objective.jca_of_state(U, system.params, ops),
        "defect": d,
    }


def make_css(system: CanonicalSystem, U, label="", with_defect=True,
             spectrum_k="all") -> CSSPoint:
    diags = css_diagnostics(system, U, with_defect=with_defect,
                            spectrum_k=spectrum_k)
    res = float(np.max(np.abs(system.residual(U))))
    return CSSPoint(u=np.asarray(U, dtype=float), params=system.params,
                    averages={k: diags[k] for k in ("v", "w", "lam", "mu")},
                    jca=diags["jca"], defect=diags["defect"],
                    residual_norm=res, label=label)


def solve_steady(system, U0, tol=STEADY_TOL, max_iter=40) -> NewtonResult:
    """Newton on the weak residual with the system's admissibility guard."""
    return newton(system.residual, system.jacobian, U0, tol=tol,
                  max_iter=max_iter, guard=system.admissible,
                  clip=system.clip)


def solve_flat_css(params: ParameterSet, ops, guess=(400.0, 10.0, 0.5, 1.0),
                   tol=1e-12, label="", with_defect=True,
                   spectrum_k="all") -> CSSPoint:
    """Flat canonical steady state: 4-component algebraic solve + embedding."""
    system = CanonicalSystem(params, ops)

    def guard(u4):
        return u4[0] > -1e-8 and u4[2] < params.p - 1e-9

    def clip(u4):
        out = np.array(u4, dtype=float)
        if -1e-8 < out[0] < 0.0:
            out[0] = 0.0
        return out

    res = newton(system.flat_reaction, system.flat_jacobian,
                 np.asarray(guess, dtype=float), tol=tol, max_iter=60,
                 guard=guard, clip=clip)
    U = np.repeat(res.u, ops.n)
    return make_css(system, U, label=label, with_defect=with_defect,
                    spectrum_k=spectrum_k)


@dataclass
class PrivateSteadyState:
    """Flat steady state of the private model with a linear stability flag."""

    vw: np.ndarray
    params: ParameterSet
    averages: dict
    pi: float
    stable: bool
    residual_norm: float
    label: str = ""


def solve_flat_private(params: ParameterSet, ops, guess=(80.0, 60.0),
                       tol=1e-12, label="") -> PrivateSteadyState:
    """Flat steady state of the private model, stability from the mesh
    linearization (diffusion included)."""
    system = PrivateSystem(params, ops)

    def guard(u2):
        return u2[0] > -1e-8

    def clip(u2):
        out = np.array(u2, dtype=float)
        if -1e-8 < out[0] < 0.0:
            out[0] = 0.0
        return out

    res = newton(system.flat_reaction, system.flat_jacobian,
                 np.asarray(guess, dtype=float), tol=tol, max_iter=60,
                 guard=guard, clip=clip)
    res.u[0] = max(res.u[0], 0.0)
    vw = np.concatenate([np.full(ops.n, res.u[0]), np.full(ops.n, res.u[1])])
    spec = spectral.spectrum(system, vw, k="all")
    stable = spec.n_unstable == 0 and not spec.marginal
    gamma = (params.p * (1 - params.alpha) / params.c) ** (1 / params.alpha)
    E = gamma * res.u[0]
    pi = objective.profit_density(res.u[0], E, params)
    rnorm = float(np.max(np.abs(system.residual(vw))))
    return PrivateSteadyState(vw=vw, params=params,
                              averages={"v": res.u[0], "w": res.u[1]},
                              pi=float(pi), stable=stable,
                              residual_norm=rnorm, label=label)
