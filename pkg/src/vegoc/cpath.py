"""Connecting orbits of the canonical system (canonical paths).

The two-point boundary value problem in time is

    M u' = -G(u),   (v, w)(0) = (v0, w0),   Psi (u(T) - u_hat) = 0,

with u_hat a steady state with the saddle-point property and Psi the
projector of spectral.stable_projector.  Because the co-states diffuse
backward, shooting is hopeless; instead the implicit-midpoint collocation
equations on the whole time mesh are solved by one damped space-time
Newton iteration with a sparse direct factorization.

Since a good first iterate is essential, ``connect`` falls back to a
homotopy in the initial states: it starts from the constant-in-time path
sitting at the target (an exact solution) and walks the initial states
toward the requested ones with adaptive steps.  Irrecoverable folds in
that homotopy are reported as evidence that no path exists.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import objective, spectral
from .errors import (DefectiveTargetError, InvalidArgumentError, NewtonError,
                     PathNonexistenceError)
from .newton import CSSPoint

DELTA_T_DEFAULT = 1e-3  # relative terminal-mismatch acceptance threshold


@dataclass(frozen=True)
class TimeMesh:
    t: np.ndarray
    descriptor: str

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def m(self) -> int:
        return len(self.t) - 1


def make_time_mesh(T: float, m: int, grading: str = "geometric",
                   strength: float = 3.0) -> TimeMesh:
    """Time mesh on [0, T]; geometric grading concentrates nodes near t=0
    where the transients live."""
    if T <= 0 or m < 1:
        raise InvalidArgumentError(f"need T > 0 and m >= 1, got T={T}, m={m}")
    u = np.linspace(0.0, 1.0, m + 1)
    if grading == "uniform":
        t = T * u
        desc = f"uniform(m={m})"
    elif grading == "geometric":
        t = T * np.expm1(strength * u) / np.expm1(strength)
        desc = f"geometric(m={m},strength={strength:g})"
    else:
        raise InvalidArgumentError(f"unknown grading {grading!r}")
    t[0], t[-1] = 0.0, T
    return TimeMesh(t=t, descriptor=desc)


@dataclass
class CanonicalPath:
    tmesh: TimeMesh
    U: np.ndarray                    # (m+1, 4n) state per time node
    E_t: np.ndarray                  # (m+1, n) closed-loop effort
    target: CSSPoint
    params: object
    value: objective.ValueReport
    mismatch: float                  # inf-norm of u(T) - u_hat
    mismatch_rel: float
    residual_inf: float
    sigma_history: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    _problem: object = None          # kept for warm restarts, not serialized

    @property
    def J(self) -> float:
        return self.value.J

    @property
    def n(self) -> int:
        return self.E_t.shape[1]

    def component(self, name: str) -> np.ndarray:
        i = {"v": 0, "w": 1, "lam": 2, "mu": 3}[name]
        n = self.n
        return self.U[:, i * n:(i + 1) * n]

    @property
    def v_t(self):
        return self.component("v")

    @property
    def w_t(self):
        return self.component("w")

    @property
    def lam_t(self):
        return self.component("lam")

    @property
    def mu_t(self):
        return self.component("mu")

    def initial_states(self) -> np.ndarray:
        return self.U[0, :2 * self.n].copy()


class PathProblem:
    """Discretized connecting-orbit problem for one target steady state."""

    def __init__(self, system, target: CSSPoint, tmesh: TimeMesh,
                 psi: np.ndarray | None = None):
        # paths honor the effort constraint E >= 0 (transients may graze
        # lam = p even when the target is strictly interior)
        self.system = system.clamped() if hasattr(system, "clamped") else system
        self.target = target
        self.tmesh = tmesh
        self.n = system.n
        self.N = system.dim
        if target.defect is None:
            d = spectral.defect(system, target.u)
        else:
            d = target.defect
        if d != 0:
            raise DefectiveTargetError(d)
        self.psi = spectral.stable_projector(system, target.u) if psi is None else psi
        self.psi_sp = sp.csr_matrix(self.psi)
        self.M = system.mass.tocsr()
        self.ht = np.diff(tmesh.t)
        self.m = tmesh.m

    def initial_guess(self, v0w0: np.ndarray, rate: float | None = None) -> np.ndarray:
        """Exponential blend of the states toward the target; co-states at
        their target values."""
        uhat = self.target.u
        t = self.tmesh.t
        rate = rate if rate is not None else 10.0 / max(t[-1], 1.0) * 3.0
        wgt = np.exp(-rate * t)
        U = np.tile(uhat, (self.m + 1, 1))
        for k in range(self.m + 1):
            U[k, :2 * self.n] = wgt[k] * v0w0 + (1 - wgt[k]) * uhat[:2 * self.n]
        return U

    def residual(self, U: np.ndarray, v0w0: np.ndarray) -> np.ndarray:
        parts = [U[0, :2 * self.n] - v0w0]
        for k in range(self.m):
            mid = 0.5 * (U[k] + U[k + 1])
            parts.append(self.M @ (U[k + 1] - U[k]) / self.ht[k]
                         + self.system.residual(mid))
        parts.append(self.psi @ (U[self.m] - self.target.u))
        return np.concatenate(parts)

    def jacobian(self, U: np.ndarray):
        n2 = 2 * self.n
        grid = [[None] * (self.m + 1) for _ in range(self.m + 2)]
        grid[0][0] = sp.hstack([sp.eye(n2), sp.csr_matrix((n2, self.N - n2))],
                               format="csr")
        for k in range(self.m):
            mid = 0.5 * (U[k] + U[k + 1])
            Jm = self.system.jacobian(mid)
            grid[k + 1][k] = -self.M / self.ht[k] + 0.5 * Jm
            grid[k + 1][k + 1] = self.M / self.ht[k] + 0.5 * Jm
        grid[self.m + 1][self.m] = self.psi_sp
        return sp.bmat(grid, format="csc")

    def admissible(self, U: np.ndarray) -> bool:
        v = U[:, :self.n]
        vscale = max(1.0, float(np.max(np.abs(v))))
        return v.min() > -1e-6 * vscale

    def sanitize(self, U: np.ndarray) -> np.ndarray:
        """Project a first iterate into the admissible set (extrapolated
        guesses may overshoot v >= 0)."""
        U = np.array(U, dtype=float, copy=True)
        v = U[:, :self.n]
        v[v < 0.0] = 0.0
        return U

    def solve(self, v0w0: np.ndarray, guess: np.ndarray, tol=1e-8,
              max_iter=20):
        """Damped space-time Newton; returns (U, residual_inf, iterations)."""
        U = self.sanitize(guess)
        F = self.residual(U, v0w0)
        rnorm = float(np.max(np.abs(F)))
        for it in range(max_iter):
            if rnorm <= tol:
                return U, rnorm, it
            try:
                dU = splu(self.jacobian(U)).solve(-F)
            except RuntimeError as exc:
                raise NewtonError("singular", it, rnorm,
                                  f"singular space-time Jacobian: {exc}")
            dU = dU.reshape(self.m + 1, self.N)
            merit0 = float(np.dot(F, F))
            t, moved = 1.0, False
            while t > 2.0 ** -16:
                Ut = U + t * dU
                if self.admissible(Ut):
                    Ft = self.residual(Ut, v0w0)
                    merit = float(np.dot(Ft, Ft))
                    if np.isfinite(merit) and \
                            (merit <= (1 - 1e-4 * t) * merit0 or merit <= tol * tol):
                        U, F, moved = Ut, Ft, True
                        break
                t *= 0.5
            if not moved:
                raise NewtonError("stalled", it, rnorm,
                                  "space-time Newton stalled")
            rnorm = float(np.max(np.abs(F)))
        if rnorm <= tol:
            return U, rnorm, max_iter
        raise NewtonError("maxiter", max_iter, rnorm)

    def build_path(self, U: np.ndarray, rnorm: float,
                   sigma_history=None, delta_T=DELTA_T_DEFAULT,
                   strict=False) -> CanonicalPath:
        from .model import control_law
        n = self.n
        sys_p = self.system.params
        v = np.maximum(U[:, :n], 0.0)
        lam = U[:, 2 * n:3 * n]
        E = np.array([control_law(v[k], lam[k], sys_p, clamp=True)
                      for k in range(U.shape[0])])
        jca_t = np.array([objective.jca(v[k], E[k], sys_p, self.system.ops)
                          for k in range(U.shape[0])])
        report = objective.path_value(self.tmesh.t, jca_t, self.target.jca,
                                      sys_p.rho)
        mis = float(np.max(np.abs(U[-1] - self.target.u)))
        scale = max(1.0, float(np.max(np.abs(self.target.u))))
        mis_rel = mis / scale
        warns = []
        if mis_rel > delta_T:
            msg = (f"terminal mismatch {mis_rel:.2e} exceeds {delta_T:.1e}; "
                   "increase T")
            if strict:
                raise NewtonError("maxiter", 0, mis_rel, msg)
            warns.append(msg)
            warnings.warn(msg)
        return CanonicalPath(tmesh=self.tmesh, U=U, E_t=E, target=self.target,
                             params=sys_p, value=report, mismatch=mis,
                             mismatch_rel=mis_rel, residual_inf=rnorm,
                             sigma_history=list(sigma_history or []),
                             warnings=warns, _problem=self)


def connect(system, v0w0, target: CSSPoint, T: float | None = None,
            m: int = 80, grading: str = "geometric", strength: float = 3.0,
            tol: float = 1e-8, delta_T: float = DELTA_T_DEFAULT,
            strict: bool = False, homotopy: bool = True,
            sigma_ds: float = 0.25, problem: PathProblem | None = None
            ) -> CanonicalPath:
    """Canonical path from the initial states ``v0w0`` to ``target``.

    T defaults to 3/rho.  A direct solve from a blended first iterate is
    tried first; if Newton fails and ``homotopy`` is set, the initial states
    are continued from the target's own states (where the constant path is
    exact) toward ``v0w0``.
    """
    v0w0 = np.asarray(v0w0, dtype=float)
    if T is None:
        T = 3.0 / system.params.rho
    if problem is None:
        tmesh = make_time_mesh(T, m, grading=grading, strength=strength)
        problem = PathProblem(system, target, tmesh)
    try:
        U, rnorm, _ = problem.solve(v0w0, problem.initial_guess(v0w0), tol=tol)
        return problem.build_path(U, rnorm, delta_T=delta_T, strict=strict)
    except NewtonError:
        if not homotopy:
            raise
    const = np.tile(target.u, (problem.m + 1, 1))
    start = problem.build_path(const, 0.0, delta_T=delta_T)
    return continue_initial_state(start, v0w0, ds0=sigma_ds, tol=tol,
                                  delta_T=delta_T, strict=strict)


def continue_initial_state(path: CanonicalPath, target_init, ds0=0.25,
                           ds_min=1e-4, max_steps=400, tol=1e-8,
                           delta_T=DELTA_T_DEFAULT, strict=False
                           ) -> CanonicalPath:
    """Homotopy of the initial states from the path's own toward target_init.

    sigma = 0 is the given path, sigma = 1 the requested one.  Steps adapt;
    three consecutive halvings below ``ds_min`` without progress declare a
    fold and raise PathNonexistenceError with the reached sigma.
    """
    problem: PathProblem = path._problem
    if problem is None:
        raise InvalidArgumentError("path lacks its discretized problem; "
                                   "recompute it with connect()")
    target_init = np.asarray(target_init, dtype=float)
    start_init = path.initial_states()
    if np.array_equal(start_init, target_init):
        return path
    sigma = 0.0
    ds = ds0
    U = path.U.copy()
    Uprev, sigma_prev = None, None
    history = list(path.sigma_history)
    stall = 0
    for _ in range(max_steps):
        sig_try = min(1.0, sigma + ds)
        v0w0 = (1 - sig_try) * start_init + sig_try * target_init
        if Uprev is not None and sigma_prev is not None and sig_try > sigma:
            # secant predictor in sigma, capped against wild extrapolation
            fac = min((sig_try - sigma) / (sigma - sigma_prev), 1.5)
            guess = U + fac * (U - Uprev)
        else:
            guess = U
        try:
            Unew, rnorm, _ = problem.solve(v0w0, guess, tol=tol)
            Uprev, sigma_prev = U, sigma
            U, sigma = Unew, sig_try
            history.append(sigma)
            stall = 0
            if sigma >= 1.0:
                return problem.build_path(U, rnorm, sigma_history=history,
                                          delta_T=delta_T, strict=strict)
            ds = min(ds * 1.5, 0.25)
        except NewtonError:
            ds *= 0.5
            if ds < ds_min:
                stall += 1
                if stall >= 3:
                    raise PathNonexistenceError(sigma)
    raise PathNonexistenceError(sigma, f"sigma stalled at {sigma:.4g} after "
                                       f"{max_steps} homotopy steps")


def truncation_check(path: CanonicalPath, resolve: bool = False,
                     factor: float = 2.0, tol: float = 1e-8) -> dict:
    """Truncation diagnostics: terminal mismatch, discounted boundary terms,
    and (optionally) the sensitivity of J to a horizon of factor*T."""
    prob: PathProblem = path._problem
    sys_ = prob.system
    n = path.n
    rho = path.params.rho
    T = path.tmesh.T
    M = sys_.ops.M
    vT, wT = path.v_t[-1], path.w_t[-1]
    lamT, muT = path.lam_t[-1], path.mu_t[-1]
    disc = float(np.exp(-rho * T))
    report = {
        "T": T,
        "mismatch_inf": path.mismatch,
        "mismatch_rel": path.mismatch_rel,
        "boundary_v_lam": disc * float(vT @ (M @ lamT)),
        "boundary_w_mu": disc * float(wT @ (M @ muT)),
        "J": path.J,
    }
    if resolve:
        m2 = int(round(path.tmesh.m * 1.25))
        tm2 = make_time_mesh(T * factor, m2, grading="geometric",
                             strength=3.0 + np.log(factor))
        prob2 = PathProblem(sys_, path.target, tm2, psi=prob.psi)
        path2 = connect(sys_, path.initial_states(), path.target,
                        problem=prob2, tol=tol)
        report["J_longer"] = path2.J
        report["J_rel_change"] = abs(path2.J - path.J) / max(1.0, abs(path.J))
        report["mismatch_rel_longer"] = path2.mismatch_rel
    return report
