"""Canonical system of the harvesting problem and the private-optimization model.

States are the vegetation density v and soil water w; co-states (shadow
prices) are lam and mu.  The stacked unknown is U = (v, w, lam, mu), one
nodal block per component, total length 4n.  Forward diffusion acts on the
states and backward diffusion on the co-states, so the system is only
well-posed as a steady/boundary-value problem, never as an initial value
problem.

The closed-loop harvesting effort maximizing the local Hamiltonian is

    E = kappa(lam) * v,   kappa = ((p - lam) (1 - alpha) / c) ** (1/alpha),

defined for lam < p.  With E substituted, the harvest term v**alpha *
E**(1-alpha) simplifies to kappa**(1-alpha) * v, which removes the 0/0 of
the marginal-harvest terms at v = 0; we use the simplified form throughout
and set the degenerate-control contributions to zero where v = 0.

Reaction terms are assembled in Galerkin form (coefficients evaluated at
element quadrature points).  The lam-lam reaction coefficient equals
rho minus the v-v coefficient, and the remaining co-state coefficients
mirror state coefficients the same way; the code reuses the shared arrays
so these identities hold to roundoff, which keeps the discrete spectrum of
the linearization exactly symmetric about rho/2.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ControlUndefinedError, InvalidArgumentError
from .fem import Operators
from .params import ParameterSet

_V_FLOOR = 1e-300  # below this, v**(eta-1) terms are treated as gone


def kappa(lam, params: ParameterSet, clamp: bool = False):
    """Closed-loop effort coefficient.

    Requires lam < p elementwise; with ``clamp`` the effort constraint
    E >= 0 is honored instead, so kappa = 0 wherever lam >= p (the
    Hamiltonian maximizer over nonnegative effort).  The clamped extension
    joins C^2-smoothly since 1/alpha > 2.
    """
    lam = np.asarray(lam, dtype=float)
    base = (params.p - lam) * (1.0 - params.alpha) / params.c
    if clamp:
        return np.maximum(base, 0.0) ** (1.0 / params.alpha)
    if np.any(base <= 0.0):
        idx = int(np.argmax(base <= 0.0))
        raise ControlUndefinedError(idx, float(np.ravel(lam)[idx]), params.p)
    return base ** (1.0 / params.alpha)


def control_law(v, lam, params: ParameterSet, clamp: bool = False):
    """Harvesting effort E = kappa(lam) * v, zero where v = 0."""
    v = np.asarray(v, dtype=float)
    E = kappa(lam, params, clamp=clamp) * np.maximum(v, 0.0)
    return E


def tax_field(obj):
    """Shadow price of vegetation read as a harvest tax.

    Accepts anything with a ``lam`` attribute (steady states) or ``lam_t``
    (paths); plain arrays pass through.
    """
    for name in ("lam_t", "lam"):
        if hasattr(obj, name):
            return np.asarray(getattr(obj, name), dtype=float)
    return np.asarray(obj, dtype=float)


def effort_from_tax(v, tau, params: ParameterSet, clamp: bool = False):
    """Private effort under a harvest tax tau: identical formula to the
    closed-loop law with tau in place of the shadow price (with ``clamp``,
    a prohibitive tax tau >= p shuts harvesting off)."""
    return control_law(v, tau, params, clamp=clamp)


def _harvest_coefficient(lam, params: ParameterSet, clamp: bool,
                         with_derivative: bool):
    """ke = kappa**(1-alpha) and (optionally) its lam-derivative, honoring
    the effort constraint when ``clamp``."""
    P = params
    if clamp:
        lam = np.asarray(lam, dtype=float)
        base = (P.p - lam) * (1.0 - P.alpha) / P.c
        ke = np.maximum(base, 0.0) ** ((1.0 - P.alpha) / P.alpha)
    else:
        ke = kappa(lam, P) ** (1.0 - P.alpha)
    if not with_derivative:
        return ke, None
    with np.errstate(divide="ignore", invalid="ignore"):
        dke = np.where(ke > 0.0,
                       -(1.0 - P.alpha) * ke
                       / (P.alpha * np.where(ke > 0.0, P.p - lam, 1.0)),
                       0.0)
    return ke, dke


def reaction(v, w, lam, mu, params: ParameterSet, clamp: bool = False):
    """Pointwise reaction terms (f_v, f_w, f_lam, f_mu) of the canonical system."""
    P = params
    ke, _ = _harvest_coefficient(lam, P, clamp, False)
    vp = np.maximum(v, 0.0)
    veta = vp ** P.eta
    gv1 = P.g * veta * vp
    f_v = (P.g * w * veta - P.d * (1.0 + P.delta * v)) * v - ke * v
    f_w = P.R * (P.beta + P.xi * v) - (P.r_u * v + P.r_w) * w
    f_l = (P.rho * lam - P.p * P.alpha * ke
           - lam * (P.g * (P.eta + 1.0) * w * veta - 2.0 * P.d * P.delta * v
                    - P.d - P.alpha * ke)
           - mu * (P.R * P.xi - P.r_u * w))
    f_m = P.rho * mu - lam * gv1 + mu * (P.r_u * v + P.r_w)
    return f_v, f_w, f_l, f_m


def reaction_jacobian(v, w, lam, mu, params: ParameterSet, clamp: bool = False):
    """Pointwise derivatives of :func:`reaction` as a dict keyed 'vl' etc.

    Co-state coefficients are built from the state coefficients (see module
    docstring); keep it that way.
    """
    P = params
    ke, dke = _harvest_coefficient(lam, P, clamp, True)
    vp = np.maximum(v, 0.0)
    veta = vp ** P.eta
    with np.errstate(divide="ignore", over="ignore"):
        vem1 = np.where(vp > _V_FLOOR, vp ** (P.eta - 1.0), 0.0)
    gv1 = P.g * veta * vp
    J = {}
    J["vv"] = P.g * w * (P.eta + 1.0) * veta - P.d - 2.0 * P.d * P.delta * v - ke
    J["vw"] = gv1
    J["vl"] = -v * dke
    J["wv"] = P.R * P.xi - P.r_u * w
    J["ww"] = -(P.r_u * v + P.r_w)
    J["lv"] = -lam * (P.g * (P.eta + 1.0) * P.eta * w * vem1 - 2.0 * P.d * P.delta)
    J["lw"] = -lam * P.g * (P.eta + 1.0) * veta + mu * P.r_u
    J["ll"] = P.rho - J["vv"]
    J["lm"] = -J["wv"]
    J["mv"] = J["lw"]
    J["ml"] = -J["vw"]
    J["mm"] = P.rho - J["ww"]
    return J


def private_coefficient(params: ParameterSet) -> float:
    """Effective extra death rate A = gamma**(1-alpha) of private harvesting,
    with E = gamma*v and gamma = (p(1-alpha)/c)**(1/alpha)."""
    gamma = (params.p * (1.0 - params.alpha) / params.c) ** (1.0 / params.alpha)
    return gamma ** (1.0 - params.alpha)


def private_reaction(v, w, params: ParameterSet, A: float | None = None):
    P = params
    if A is None:
        A = private_coefficient(P)
    vp = np.maximum(v, 0.0)
    veta = vp ** P.eta
    f_v = (P.g * w * veta - P.d * (1.0 + P.delta * v) - A) * v
    f_w = P.R * (P.beta + P.xi * v) - (P.r_u * v + P.r_w) * w
    return f_v, f_w


def private_reaction_jacobian(v, w, params: ParameterSet, A: float | None = None):
    P = params
    if A is None:
        A = private_coefficient(P)
    vp = np.maximum(v, 0.0)
    veta = vp ** P.eta
    J = {}
    J["vv"] = P.g * w * (P.eta + 1.0) * veta - P.d - 2.0 * P.d * P.delta * v - A
    J["vw"] = P.g * veta * vp
    J["wv"] = P.R * P.xi - P.r_u * w
    J["ww"] = -(P.r_u * v + P.r_w)
    return J


class BaseSystem:
    """Shared machinery: weak residual G(U) = -(D_blk K U + reaction load)
    and its exact Jacobian, for a stack of ``ncomp`` nodal components."""

    ncomp = 0
    comp_names: tuple = ()
    # (block row, block col) -> coefficient key, in assembly order
    jac_blocks: tuple = ()

    def __init__(self, params: ParameterSet, ops: Operators):
        self.params = params
        self.ops = ops
        self.n = ops.n
        self.dim = self.ncomp * self.n
        self._diff = sp.block_diag(
            [c * ops.K for c in self.diffusion()], format="csr")
        self.mass = sp.block_diag([ops.M] * self.ncomp, format="csr")

    def diffusion(self):
        raise NotImplementedError

    def with_params(self, params: ParameterSet):
        return type(self)(params, self.ops)

    def split(self, U):
        U = np.asarray(U)
        if U.shape[-1] != self.dim:
            raise InvalidArgumentError(
                f"state vector has length {U.shape[-1]}, expected {self.dim}")
        return tuple(U[..., i * self.n:(i + 1) * self.n]
                     for i in range(self.ncomp))

    def join(self, *comps):
        return np.concatenate(comps, axis=-1)

    def _coeffs(self, Uq):
        raise NotImplementedError

    def _jac_coeffs(self, Uq):
        raise NotImplementedError

    def residual(self, U):
        ops = self.ops
        comps = self.split(U)
        Uq = [ops.at_quad(c) for c in comps]
        f = self._coeffs(Uq)
        load = np.concatenate([ops.load_vector(fi) for fi in f])
        return -(self._diff @ np.asarray(U, dtype=float) + load)

    def jacobian(self, U):
        ops = self.ops
        comps = self.split(U)
        Uq = [ops.at_quad(c) for c in comps]
        J = self._jac_coeffs(Uq)
        blocks = [[None] * self.ncomp for _ in range(self.ncomp)]
        for (bi, bj, key) in self.jac_blocks:
            blocks[bi][bj] = ops.coeff_mass(J[key])
        R = sp.bmat(blocks, format="csr")
        return (-(self._diff + R)).tocsr()

    def admissible(self, U) -> bool:
        """True if U is in the domain of the model equations."""
        v = self.split(U)[0]
        scale = max(1.0, float(np.max(np.abs(v))) if v.size else 1.0)
        if np.min(v) < -1e-8 * scale:
            return False
        return True

    def clip(self, U):
        """Zero out tiny negative vegetation values (roundoff guard)."""
        U = np.array(U, dtype=float, copy=True)
        v = U[..., :self.n]
        v[(v < 0.0)] = 0.0
        return U


class CanonicalSystem(BaseSystem):
    """Weak form of the four-component canonical system on a mesh.

    With ``clamp_effort`` the effort constraint E >= 0 is active: the
    closed loop becomes E = max(0, kappa * v) and states with lam >= p are
    admissible (harvesting simply stops there).  Steady-state work uses the
    strict law; the path solver uses the clamped variant, whose residual
    and Jacobian agree with the strict ones wherever lam < p.
    """

    ncomp = 4
    comp_names = ("v", "w", "lam", "mu")
    jac_blocks = (
        (0, 0, "vv"), (0, 1, "vw"), (0, 2, "vl"),
        (1, 0, "wv"), (1, 1, "ww"),
        (2, 0, "lv"), (2, 1, "lw"), (2, 2, "ll"), (2, 3, "lm"),
        (3, 0, "mv"), (3, 2, "ml"), (3, 3, "mm"),
    )

    def __init__(self, params: ParameterSet, ops: Operators,
                 clamp_effort: bool = False):
        self.clamp_effort = bool(clamp_effort)
        super().__init__(params, ops)

    def with_params(self, params: ParameterSet):
        return CanonicalSystem(params, self.ops, clamp_effort=self.clamp_effort)

    def clamped(self) -> "CanonicalSystem":
        if self.clamp_effort:
            return self
        return CanonicalSystem(self.params, self.ops, clamp_effort=True)

    def diffusion(self):
        P = self.params
        return (P.d1, P.d2, -P.d1, -P.d2)

    def _coeffs(self, Uq):
        return reaction(*Uq, self.params, clamp=self.clamp_effort)

    def _jac_coeffs(self, Uq):
        return reaction_jacobian(*Uq, self.params, clamp=self.clamp_effort)

    def effort(self, U):
        v, _, lam, _ = self.split(U)
        return control_law(v, lam, self.params, clamp=self.clamp_effort)

    def admissible(self, U) -> bool:
        if not super().admissible(U):
            return False
        if self.clamp_effort:
            return True
        lam = self.split(U)[2]
        return float(np.max(lam)) < self.params.p - 1e-9

    def flat_reaction(self, u4):
        """Reaction of a spatially constant state, as a length-4 vector."""
        return np.array(reaction(*u4, self.params, clamp=self.clamp_effort))

    def flat_jacobian(self, u4):
        J = reaction_jacobian(*np.asarray(u4, dtype=float), self.params,
                              clamp=self.clamp_effort)
        out = np.zeros((4, 4))
        for (bi, bj, key) in self.jac_blocks:
            out[bi, bj] = J[key]
        return out


class PrivateSystem(BaseSystem):
    """Vegetation/water dynamics under decentralized harvesting E = gamma*v."""

    ncomp = 2
    comp_names = ("v", "w")
    jac_blocks = ((0, 0, "vv"), (0, 1, "vw"), (1, 0, "wv"), (1, 1, "ww"))

    def __init__(self, params: ParameterSet, ops: Operators,
                 A: float | None = None):
        self.A = private_coefficient(params) if A is None else float(A)
        super().__init__(params, ops)

    def with_params(self, params: ParameterSet):
        keep_A = None if self.A == private_coefficient(self.params) else self.A
        return PrivateSystem(params, self.ops, A=keep_A)

    def diffusion(self):
        P = self.params
        return (P.d1, P.d2)

    def _coeffs(self, Uq):
        return private_reaction(*Uq, self.params, A=self.A)

    def _jac_coeffs(self, Uq):
        return private_reaction_jacobian(*Uq, self.params, A=self.A)

    def flat_reaction(self, u2):
        return np.array(private_reaction(*u2, self.params, A=self.A))

    def flat_jacobian(self, u2):
        J = private_reaction_jacobian(*np.asarray(u2, dtype=float),
                                      self.params, A=self.A)
        return np.array([[J["vv"], J["vw"]], [J["wv"], J["ww"]]])
