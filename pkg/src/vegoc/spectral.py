"""Spectrum of the linearized path dynamics, defect, and terminal projector.

The path dynamics linearized at a steady state U is M u' = -G_u(U) u, so
we study the generalized eigenvalue problem -G_u x = Lambda M x.  For the
canonical system the spectrum is symmetric about Re = rho/2 (the discrete
reaction blocks inherit the Hamiltonian pairing; see model.py), hence at
most half of the 4n eigenvalues are stable.  The defect

    d(U) = 2n - #{Re(Lambda) < 0}

counts the missing stable directions; d = 0 is the saddle-point property,
required of any target of a connecting orbit.  Equivalently (via the
pairing), d equals half the number of eigenvalues in the strip
0 < Re < rho, which is what the sparse estimator counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import DefectiveTargetError, InvalidArgumentError

DENSE_LIMIT = 1600  # largest matrix order eig-solved densely without protest


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalue census of -G_u against M at one steady state."""

    eigenvalues: np.ndarray
    n_stable: int
    n_unstable: int
    n_marginal: int
    defect: int | None
    marginal: bool
    complete: bool  # full spectrum (dense solve) vs a sparse window near rho/2

    def strip_count(self, rho: float, eps: float = 1e-8) -> int:
        re = self.eigenvalues.real
        return int(np.sum((re > eps) & (re < rho - eps)))


def pairing_residual(eigenvalues: np.ndarray, rho: float) -> float:
    """Max distance of rho - conj(Lambda) from the spectrum; ~0 for an
    exactly rho/2-symmetric set."""
    ev = np.asarray(eigenvalues)
    mirrored = rho - np.conj(ev)
    return float(max(np.min(np.abs(ev - m)) for m in mirrored))


def spectrum(system, U, k: int | str = "all", eps_spec: float = 1e-8):
    """Eigenvalue census at a steady state.

    ``k="all"`` computes the full dense generalized spectrum (intended for
    moderate sizes; see DENSE_LIMIT).  An integer ``k`` computes the k
    eigenvalues nearest rho/2 by shift-invert; the defect then follows from
    the strip count and the rho/2 pairing, assuming the strip fits in the
    window.
    """
    A = -system.jacobian(U)
    B = system.mass
    dim = system.dim
    half = dim // 2
    canonical = system.ncomp == 4
    if k == "all":
        ev = sla.eig(A.toarray(), B.toarray(), right=False)
        n_st = int(np.sum(ev.real < -eps_spec))
        n_un = int(np.sum(ev.real > eps_spec))
        n_mar = dim - n_st - n_un
        return SpectralData(eigenvalues=ev, n_stable=n_st, n_unstable=n_un,
                            n_marginal=n_mar,
                            defect=(half - n_st) if canonical else None,
                            marginal=n_mar > 0, complete=True)
    if not isinstance(k, int) or k < 2:
        raise InvalidArgumentError(
            f"eigenvalue count must be 'all' or an int >= 2, got {k!r}")
    rho = system.params.rho
    v0 = np.ones(dim) / np.sqrt(dim)
    ev = spla.eigs(A.tocsc(), k=min(k, dim - 2), M=B.tocsc(), sigma=rho / 2.0,
                   v0=v0, return_eigenvectors=False)
    strip = int(np.sum((ev.real > eps_spec) & (ev.real < rho - eps_spec)))
    n_mar = int(np.sum((np.abs(ev.real) <= eps_spec)
                       | (np.abs(ev.real - rho) <= eps_spec)))
    if canonical:
        d = (strip + 1) // 2
        n_st, n_un = half - d, half + d
    else:
        d, n_st, n_un = None, -1, -1  # not determined by a window
    return SpectralData(eigenvalues=ev, n_stable=n_st, n_unstable=n_un,
                        n_marginal=n_mar, defect=d,
                        marginal=n_mar > 0, complete=False)


def defect(system, U, k: int | str = "all", eps_spec: float = 1e-8) -> int:
    return spectrum(system, U, k=k, eps_spec=eps_spec).defect


def stable_projector(system, U, eps_spec: float = 1e-8):
    """Rows spanning the unstable left eigenspace, scaled by M.

    For a state with the saddle-point property the returned Psi has 2n
    orthonormal rows, annihilates the stable right eigenspace, and
    Psi (u - U) = 0 characterizes u - U lying in the stable subspace.  A
    defective state raises DefectiveTargetError.

    Left eigenvectors are obtained as the right deflating subspace of the
    transposed pencil, so no pairing structure is assumed.
    """
    A = (-system.jacobian(U)).toarray()
    B = system.mass.toarray()
    half = system.dim // 2

    def select(alpha, beta):
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = alpha / beta
        return lam.real > eps_spec

    _, _, alpha, beta, _, Z = sla.ordqz(A.T, B.T, sort=select)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = alpha / beta
    n_unstable = int(np.sum(lam.real > eps_spec))
    n_stable = int(np.sum(lam.real < -eps_spec))
    if n_unstable != half:
        raise DefectiveTargetError(half - n_stable)
    Psi = Z[:, :half].T @ B
    # orthonormal rows for a well-conditioned boundary block
    Psi = sla.qr(Psi.T, mode="economic")[0].T
    return np.ascontiguousarray(Psi)
