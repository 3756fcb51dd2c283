"""Pseudo-arclength continuation with fold and branch-point handling.

A continuation point is z = (U, p) with p the active scalar parameter.
Steps use a secant predictor and a bordered Newton corrector normal to the
previous tangent, with adaptive step length.  Along the branch we monitor

  * the parameter component of the tangent (sign change = fold), and
  * the sign of det of the bordered extended Jacobian (change = branch
    point; folds leave it unchanged).

Detected branch points are localized by bisection in arclength and can be
used to switch onto the bifurcating branch by perturbing along a kernel
vector of the Jacobian.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigs, splu

from .errors import BranchSwitchError, NewtonError, StepUnderflowError
from .newton import css_diagnostics, make_css, solve_steady


@dataclass
class ContinuationOptions:
    ds: float = 0.5
    ds_min: float = 1e-6
    ds_max: float = 2.0
    max_steps: int = 400
    pmin: float = -np.inf
    pmax: float = np.inf
    tol: float = 1e-8
    max_corrector: int = 12
    xi: float = 0.5            # weight of the state block in the arclength metric
    grow_after: int = 3        # easy steps before the step length grows
    grow_factor: float = 1.5
    detect_branch_points: bool = True
    bp_param_tol: float = 1e-3
    with_defect: bool = True   # per-point defect in the diagnostics
    spectrum_k: int | str = "all"


@dataclass
class SpecialPoint:
    kind: str                  # "fold" | "bp"
    index: int                 # nearest accepted point
    param: float
    z: np.ndarray | None = None      # localized point (branch points)
    tangent: np.ndarray | None = None


@dataclass
class Branch:
    pname: str
    system: object
    xi: float
    zs: list = field(default_factory=list)
    tangents_p: list = field(default_factory=list)  # parameter component of tangents
    diags: list = field(default_factory=list)
    arclength: list = field(default_factory=list)
    folds: list = field(default_factory=list)
    branch_points: list = field(default_factory=list)
    provenance: str = ""
    termination: str = ""

    @property
    def params_values(self):
        return np.array([z[-1] for z in self.zs])

    def __len__(self):
        return len(self.zs)

    def system_at(self, p: float):
        return self.system.with_params(self.system.params.with_(**{self.pname: p}))

    def css_at(self, i: int, label="", with_defect=True):
        z = self.zs[i]
        return make_css(self.system_at(z[-1]), z[:-1], label=label,
                        with_defect=with_defect)


def _perm_parity(perm) -> int:
    perm = np.asarray(perm)
    seen = np.zeros(len(perm), dtype=bool)
    parity = 0
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, clen = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            clen += 1
        parity ^= (clen - 1) & 1
    return parity


def det_sign(A) -> int:
    """Sign of det of a sparse matrix via LU (0 for exact singularity)."""
    lu = splu(A.tocsc())
    diag = lu.U.diagonal()
    s = np.prod(np.sign(diag))
    if s == 0:
        return 0
    parity = _perm_parity(lu.perm_r) ^ _perm_parity(lu.perm_c)
    return int(s) * (-1 if parity else 1)


class _Stepper:
    """Internal state of one continuation run."""

    def __init__(self, system, pname, opts: ContinuationOptions):
        self.base = system
        self.pname = pname
        self.opts = opts
        self.dim = system.dim
        self._sys_cache = {}

    def system_at(self, p: float):
        key = float(p)
        if key not in self._sys_cache:
            if len(self._sys_cache) > 8:
                self._sys_cache.clear()
            self._sys_cache[key] = self.base.with_params(
                self.base.params.with_(**{self.pname: key}))
        return self._sys_cache[key]

    def dot(self, z1, z2):
        xi = self.opts.xi
        return (xi * np.dot(z1[:-1], z2[:-1]) / self.dim
                + (1.0 - xi) * z1[-1] * z2[-1])

    def norm(self, z):
        return np.sqrt(self.dot(z, z))

    def residual(self, z):
        return self.system_at(z[-1]).residual(z[:-1])

    def jacobian(self, z):
        return self.system_at(z[-1]).jacobian(z[:-1])

    def dparam(self, z, rel=1e-6):
        p = z[-1]
        h = rel * max(1.0, abs(p))
        rp = self.system_at(p + h).residual(z[:-1])
        rm = self.system_at(p - h).residual(z[:-1])
        return (rp - rm) / (2.0 * h)

    def bordered(self, Ju, gp, tang):
        xi = self.opts.xi
        row_u = sp.csr_matrix((xi * tang[:-1] / self.dim)[None, :])
        row_p = sp.csr_matrix(np.array([[(1.0 - xi) * tang[-1]]]))
        return sp.bmat([[Ju, sp.csr_matrix(gp[:, None])],
                        [row_u, row_p]], format="csc")

    def admissible(self, z):
        return self.system_at(z[-1]).admissible(z[:-1])

    def clipz(self, z):
        out = z.copy()
        out[:-1] = self.system_at(z[-1]).clip(z[:-1])
        return out

    def corrector(self, zpred, tang):
        """Damped Newton normal to ``tang`` through ``zpred``.

        Returns (z, iterations, converged).
        """
        opts = self.opts
        z = self.clipz(zpred.copy())
        if not self.admissible(z):
            return z, 0, False
        G = self.residual(z)
        for it in range(opts.max_corrector):
            r2 = self.dot(tang, z - zpred)
            res = max(float(np.max(np.abs(G))), abs(r2))
            if not np.isfinite(res):
                return z, it, False
            if res < opts.tol:
                return z, it, True
            Ju = self.jacobian(z)
            gp = self.dparam(z)
            try:
                dz = splu(self.bordered(Ju, gp, tang)).solve(
                    -np.concatenate([G, [r2]]))
            except RuntimeError:
                return z, it, False
            merit0 = float(np.dot(G, G)) + r2 * r2
            t, moved = 1.0, False
            while t > 2.0 ** -16:
                zt = self.clipz(z + t * dz)
                if self.admissible(zt):
                    Gt = self.residual(zt)
                    rt = self.dot(tang, zt - zpred)
                    merit = float(np.dot(Gt, Gt)) + rt * rt
                    if np.isfinite(merit) and \
                            (merit <= (1.0 - 1e-4 * t) * merit0 or merit <= opts.tol ** 2):
                        z, G, moved = zt, Gt, True
                        break
                t *= 0.5
            if not moved:
                return z, it, False
        return z, opts.max_corrector, False

    def tangent(self, z, normal=None, orient=None):
        """Tangent from the bordered system; ``normal`` is the previous
        tangent (or None for the parameter direction)."""
        Ju = self.jacobian(z)
        gp = self.dparam(z)
        if normal is None:
            normal = np.zeros(self.dim + 1)
            normal[-1] = 1.0
        rhs = np.zeros(self.dim + 1)
        rhs[-1] = 1.0
        t = splu(self.bordered(Ju, gp, normal)).solve(rhs)
        t /= self.norm(t)
        if orient is not None and self.dot(t, orient) < 0:
            t = -t
        return t

    def det_sign_at(self, z, tang):
        Ju = self.jacobian(z)
        gp = self.dparam(z)
        return det_sign(self.bordered(Ju, gp, tang))


def continue_branch(system, pname, u0, p0=None, direction=-1,
                    opts: ContinuationOptions | None = None, t0=None,
                    diag=None, provenance="") -> Branch:
    """Continue a steady branch in the parameter ``pname`` from (u0, p0).

    ``direction`` orients the initial tangent's parameter component.  An
    explicit starting tangent ``t0`` (e.g. from branch switching) overrides
    that.  ``diag(system, U)`` supplies per-point diagnostics; the default
    is the canonical-state table when the system has four components.
    """
    opts = opts or ContinuationOptions()
    if p0 is None:
        p0 = getattr(system.params, pname)
    st = _Stepper(system, pname, opts)
    if diag is None:
        if system.ncomp == 4:
            def diag(sys_, U):
                return css_diagnostics(sys_, U, with_defect=opts.with_defect,
                                       spectrum_k=opts.spectrum_k)
        else:
            def diag(sys_, U):
                return {}

    branch = Branch(pname=pname, system=system, xi=opts.xi,
                    provenance=provenance)
    try:
        res = solve_steady(st.system_at(p0), u0, tol=opts.tol)
    except NewtonError as exc:
        branch.termination = f"start_failed: {exc}"
        raise
    z = np.concatenate([res.u, [p0]])
    if t0 is None:
        t = st.tangent(z)
        if np.sign(t[-1]) != np.sign(direction) and t[-1] != 0.0:
            t = -t
        synthetic_t = False
    else:
        t = np.asarray(t0, dtype=float)
        t = t / st.norm(t)
        synthetic_t = True

    def record(z, t):
        branch.zs.append(z)
        branch.tangents_p.append(float(t[-1]))
        branch.diags.append(diag(st.system_at(z[-1]), z[:-1]))
        s_prev = branch.arclength[-1] if branch.arclength else 0.0
        ds_inc = st.norm(z - branch.zs[-2]) if len(branch.zs) > 1 else 0.0
        branch.arclength.append(s_prev + ds_inc)

    record(z, t)
    det_prev = st.det_sign_at(z, t) if opts.detect_branch_points else 0
    last_fold_sign = np.sign(t[-1]) if t[-1] != 0 else 0.0

    ds = opts.ds
    easy = 0
    step = 0
    while step < opts.max_steps:
        step += 1
        znew, its, ok = None, 0, False
        while True:
            zpred = z + ds * t
            znew, its, ok = st.corrector(zpred, t)
            if ok:
                break
            ds *= 0.5
            easy = 0
            if ds < opts.ds_min:
                branch.termination = "step_underflow"
                return branch
        tnew = znew - z
        tnew /= st.norm(tnew)
        record(znew, tnew)

        # fold: parameter component of the (secant) tangent flips
        sign_new = np.sign(tnew[-1]) if tnew[-1] != 0 else last_fold_sign
        if (not synthetic_t and last_fold_sign != 0
                and sign_new != 0 and sign_new != last_fold_sign):
            branch.folds.append(SpecialPoint(kind="fold",
                                             index=len(branch.zs) - 2,
                                             param=float(z[-1])))
        if sign_new != 0:
            last_fold_sign = sign_new
        synthetic_t = False

        # branch point: det of the bordered extended Jacobian flips
        if opts.detect_branch_points:
            det_new = st.det_sign_at(znew, tnew)
            if det_prev != 0 and det_new != 0 and det_new != det_prev:
                bp = localize_branch_point(st, z, znew, tnew,
                                           ptol=opts.bp_param_tol)
                if bp is not None:
                    bp.index = len(branch.zs) - 1
                    branch.branch_points.append(bp)
            det_prev = det_new

        z, t = znew, tnew
        easy = easy + 1 if its <= 3 else 0
        if easy >= opts.grow_after and ds < opts.ds_max:
            ds = min(ds * opts.grow_factor, opts.ds_max)
            easy = 0
        if not (opts.pmin <= z[-1] <= opts.pmax):
            branch.termination = ("param_min" if z[-1] < opts.pmin
                                  else "param_max")
            return branch
    branch.termination = "steps"
    return branch


def localize_branch_point(st: _Stepper, za, zb, tang, ptol=1e-3,
                          max_bisect=40) -> SpecialPoint | None:
    """Bisect the arclength segment [za, zb] for the det sign change."""
    sa = st.det_sign_at(za, tang)
    lo, hi = 0.0, 1.0
    zlo, zhi = za, zb
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        zm, _, ok = st.corrector(za + mid * (zb - za), tang)
        if not ok:
            hi = mid  # shrink toward the known-good low end
            continue
        sm = st.det_sign_at(zm, tang)
        if sm == 0 or sm != sa:
            hi, zhi = mid, zm
        else:
            lo, zlo = mid, zm
        if abs(zhi[-1] - zlo[-1]) < ptol and hi - lo < 0.25:
            break
    zbp, _, ok = st.corrector(0.5 * (zlo + zhi), tang)
    if not ok:
        zbp = zhi
    return SpecialPoint(kind="bp", index=-1, param=float(zbp[-1]), z=zbp,
                        tangent=tang.copy())


def kernel_vectors(system, U, k=1, dense_limit=1600):
    """Approximate null vectors of the Jacobian at a (near) branch point."""
    Ju = system.jacobian(U)
    if system.dim <= dense_limit:
        _, svals, Vt = np.linalg.svd(Ju.toarray())
        vecs = [Vt[-(i + 1)] for i in range(k)]
    else:
        # smallest-magnitude eigenvectors via shift-invert near zero
        shift = 1e-8
        v0 = np.ones(system.dim) / np.sqrt(system.dim)
        vals, V = eigs(Ju.tocsc(), k=max(k, 2), sigma=shift, v0=v0)
        order = np.argsort(np.abs(vals))
        vecs = [np.real(V[:, order[i]]) for i in range(k)]
    out = []
    for v in vecs:
        v = np.real(v)
        out.append(v / np.max(np.abs(v)))
    return out


def branch_switch(system, pname, bp: SpecialPoint, amplitude=0.02,
                  direction=+1, kernel=None, opts=None):
    """Seed the bifurcating branch at a localized branch point.

    Two seeds at half and full amplitude along a kernel vector are
    Newton-corrected normal to the kernel; their secant orients the first
    continuation step along the new branch (which may curve in the
    parameter, e.g. at a shallow pitchfork).  ``amplitude`` is relative to
    the state magnitude.  If a corrector falls back onto the trunk (no
    kernel content), raises BranchSwitchError.  Returns (z_half, z_full,
    tangent).
    """
    opts = opts or ContinuationOptions()
    st = _Stepper(system, pname, opts)
    z_bp = bp.z
    sys_bp = st.system_at(z_bp[-1])
    if kernel is None:
        kernel = kernel_vectors(sys_bp, z_bp[:-1], k=1)[0]
    scale = max(1.0, float(np.max(np.abs(z_bp[:-1]))))
    tini = np.concatenate([direction * kernel, [0.0]])
    tini /= st.norm(tini)
    seeds = []
    for frac in (0.5, 1.0):
        eps = direction * frac * amplitude * scale
        zseed = z_bp.copy()
        zseed[:-1] = zseed[:-1] + eps * kernel
        znew, _, ok = st.corrector(zseed, tini)
        if not ok:
            raise BranchSwitchError("corrector failed at the branch-switch seed")
        comp = float(np.dot(znew[:-1] - z_bp[:-1], kernel)
                     / np.dot(kernel, kernel))
        if abs(comp) < 0.25 * abs(eps):
            raise BranchSwitchError("seed fell back onto the trunk branch")
        seeds.append(znew)
    z_half, z_full = seeds
    t0 = z_full - z_half
    nrm = st.norm(t0)
    if nrm == 0.0:
        raise BranchSwitchError("degenerate branch-switch seeds")
    return z_half, z_full, t0 / nrm


def switch_and_continue(system, pname, bp: SpecialPoint, amplitude=0.02,
                        direction=+1, kernel=None, opts=None, diag=None,
                        provenance="") -> Branch:
    """Switch at a branch point and continue; the first steps stay at the
    scale of the seed separation so shallow branches are not overshot."""
    opts = opts or ContinuationOptions()
    z_half, z_full, t0 = branch_switch(system, pname, bp, amplitude=amplitude,
                                       direction=direction, kernel=kernel,
                                       opts=opts)
    st = _Stepper(system, pname, opts)
    ds0 = min(opts.ds, max(2.0 * st.norm(z_full - z_half), 4.0 * opts.ds_min))
    run_opts = dataclasses.replace(opts, ds=ds0)
    return continue_branch(system, pname, z_full[:-1], p0=float(z_full[-1]),
                           opts=run_opts, t0=t0, diag=diag,
                           provenance=provenance or f"switch@{bp.param:.6g}")


def crossings(branch: Branch, value: float, polish=True, tol=1e-8):
    """All points where the branch crosses ``pname = value``.

    Returns a list of (segment index, state) with the state Newton-polished
    at the exact parameter value when ``polish``.
    """
    out = []
    zs = branch.zs
    for i in range(len(zs) - 1):
        pa, pb = zs[i][-1], zs[i + 1][-1]
        if (pa - value) * (pb - value) > 0 or pa == pb:
            continue
        lam = 0.0 if pb == pa else (value - pa) / (pb - pa)
        U = (1 - lam) * zs[i][:-1] + lam * zs[i + 1][:-1]
        if polish:
            sys_v = branch.system_at(value)
            try:
                U = solve_steady(sys_v, U, tol=tol).u
            except NewtonError:
                continue
        out.append((i, U))
    return out


def branch_table(branch: Branch):
    """Per-point rows: parameter, arclength, diagnostics, special flags."""
    fold_idx = {f.index for f in branch.folds}
    bp_idx = {b.index for b in branch.branch_points}
    rows = []
    for i, z in enumerate(branch.zs):
        row = {"param": float(z[-1]), "arclength": float(branch.arclength[i])}
        row.update(branch.diags[i])
        row["fold"] = int(i in fold_idx)
        row["bp"] = int(i in bp_idx)
        rows.append(row)
    return rows


def jca_maximizer(branches, values, key="jca"):
    """For each parameter value, which branch maximizes the averaged profit.

    Returns a list of (value, branch index or None, jca).  Branches that do
    not cross a value are skipped there.
    """
    out = []
    for val in values:
        best = (None, -np.inf)
        for bi, br in enumerate(branches):
            for i, _ in crossings(br, val, polish=False):
                lam_p = br.zs[i][-1]
                j1 = br.diags[i].get(key)
                j2 = br.diags[i + 1].get(key)
                if j1 is None or j2 is None:
                    continue
                pa, pb = br.zs[i][-1], br.zs[i + 1][-1]
                w = 0.0 if pb == pa else (val - pa) / (pb - pa)
                j = (1 - w) * j1 + w * j2
                if j > best[1]:
                    best = (bi, j)
        out.append((val, best[0], best[1] if best[0] is not None else None))
    return out
