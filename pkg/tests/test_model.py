import mpmath
import numpy as np
import pytest

from vegoc import (CanonicalSystem, ParameterSet, PrivateSystem, control_law,
                   effort_from_tax, private_coefficient, tax_field)
from vegoc.errors import ControlUndefinedError
from vegoc.model import private_reaction, reaction
from vegoc.objective import profit_density

from conftest import random_admissible_state


def high_precision_kappa(lam=0.0, c=1.0, p=1.1, alpha=0.3):
    mpmath.mp.dps = 40
    base = (mpmath.mpf(p) - lam) * (1 - mpmath.mpf(alpha)) / c
    return base ** (1 / mpmath.mpf(alpha))


KAPPA_AT_ZERO = float(high_precision_kappa())  # 0.41842554...


def test_control_law_oracle(params):
    E = control_law(np.array([1.0]), np.array([0.0]), params)
    assert E[0] == pytest.approx(KAPPA_AT_ZERO, rel=1e-12)
    assert E[0] == pytest.approx(0.418442, abs=1e-6)


def test_control_law_vanishing_price(params):
    for eps in (1e-3, 1e-6, 1e-9):
        E = control_law(np.array([1.0]), np.array([params.p - eps]), params)
        assert 0 <= E[0] < eps ** (1 / params.alpha) * 2
    assert control_law(np.array([0.0]), np.array([0.3]), params)[0] == 0.0


def test_control_law_undefined(params):
    lam = np.array([0.2, 1.2, 0.1])
    with pytest.raises(ControlUndefinedError) as err:
        control_law(np.ones(3), lam, params)
    assert err.value.node == 1


def test_private_coefficient_oracle(params):
    mpmath.mp.dps = 40
    gamma = (mpmath.mpf("1.1") * mpmath.mpf("0.7")) ** (mpmath.mpf(10) / 3)
    A = float(gamma ** mpmath.mpf("0.7"))
    assert private_coefficient(params) == pytest.approx(A, rel=1e-13)
    assert private_coefficient(params) == pytest.approx(0.5434, abs=1e-3)


def test_profit_closed_loop_identity(params, rng):
    # J_c(v, E(v, lam)) = v * (p*kappa^(1-alpha) - c*kappa), sampled
    for _ in range(100):
        v = rng.uniform(0.0, 400.0)
        lam = rng.uniform(-0.5, params.p - 1e-3)
        kap = float(high_precision_kappa(lam=lam))
        E = control_law(np.array([v]), np.array([lam]), params)
        direct = profit_density(np.array([v]), E, params)[0]
        closed = v * (params.p * kap ** (1 - params.alpha) - params.c * kap)
        assert direct == pytest.approx(closed, rel=1e-10, abs=1e-12)


def test_trivial_flat_state_equation_rows(params, canonical64):
    n = canonical64.n
    w0 = params.R * params.beta / params.r_w
    U = np.concatenate([np.zeros(n), np.full(n, w0), np.zeros(n), np.zeros(n)])
    G = canonical64.residual(U)
    assert np.max(np.abs(G[:2 * n])) < 1e-12


def test_flat_residual_translation_invariance(params, canonical64, rng):
    n = canonical64.n
    U = random_admissible_state(canonical64, rng, flat=True)
    G = canonical64.residual(U) / np.tile(canonical64.ops.lumped, 4)
    for b in range(4):
        rows = G[b * n:(b + 1) * n]
        assert np.max(np.abs(rows - rows[0])) < 1e-12


@pytest.mark.parametrize("flat", [True, False])
def test_directional_derivative_matches_fd(params, canonical64, rng, flat):
    U = random_admissible_state(canonical64, rng, flat=flat)
    J = canonical64.jacobian(U)
    for _ in range(3):
        delta = rng.standard_normal(U.size)
        delta /= np.max(np.abs(delta))
        h = 1e-5
        fd = (canonical64.residual(U + h * delta)
              - canonical64.residual(U - h * delta)) / (2 * h)
        an = J @ delta
        scale = np.max(np.abs(an)) + 1e-12
        assert np.max(np.abs(fd - an)) / scale < 1e-6


def test_jacobian_fd_columnwise_flat(params, canonical64, rng):
    U = random_admissible_state(canonical64, rng, flat=True)
    J = canonical64.jacobian(U).toarray()
    cols = rng.choice(U.size, size=12, replace=False)
    h = 1e-6
    for j in cols:
        e = np.zeros(U.size)
        e[j] = 1.0
        fd = (canonical64.residual(U + h * e)
              - canonical64.residual(U - h * e)) / (2 * h)
        scale = np.max(np.abs(J[:, j])) + 1e-10
        assert np.max(np.abs(fd - J[:, j])) / scale < 1e-6


def test_jacobian_sparsity_structure(params, canonical64, rng):
    n = canonical64.n
    U = random_admissible_state(canonical64, rng)
    J = canonical64.jacobian(U).tocsr()
    # decoupled blocks must be empty: (v,mu), (w,lam), (w,mu), (mu,w)
    for bi, bj in ((0, 3), (1, 2), (1, 3), (3, 1)):
        block = J[bi * n:(bi + 1) * n, bj * n:(bj + 1) * n]
        assert block.nnz == 0
    # spatial coupling is nearest-neighbor only (interval elements)
    coo = J.tocoo()
    assert np.max(np.abs(coo.row % n - coo.col % n)) <= 1


def test_jacobian_translation_symmetry(params, canonical64, rng):
    # at a flat state on a uniform mesh the stencil is shift invariant
    n = canonical64.n
    U = random_admissible_state(canonical64, rng, flat=True)
    J = canonical64.jacobian(U).toarray()
    shift = np.roll(np.arange(n), 1)
    perm = np.concatenate([shift + b * n for b in range(4)])
    Jp = J[np.ix_(perm, perm)]
    interior = np.concatenate([np.arange(2, n - 2) + b * n for b in range(4)])
    assert np.max(np.abs((Jp - J)[np.ix_(interior, interior)])) < 1e-11


def test_private_trivial_branch(params, private64):
    n = private64.n
    w0 = params.R * params.beta / params.r_w
    vw = np.concatenate([np.zeros(n), np.full(n, w0)])
    assert np.max(np.abs(private64.residual(vw))) < 1e-12


def test_private_reaction_harvest_free_limit(params, rng):
    v, w = rng.uniform(1, 200, 7), rng.uniform(1, 60, 7)
    fv, fw = private_reaction(v, w, params, A=0.0)
    growth = (params.g * w * v ** params.eta
              - params.d * (1 + params.delta * v)) * v
    assert np.allclose(fv, growth, rtol=1e-14)
    fv_c, fw_c, _, _ = reaction(v, w, np.zeros(7), np.zeros(7),
                                params.with_(p=1e-9, c=1e9))
    assert np.allclose(fw, fw_c, rtol=1e-14)


def test_private_jacobian_fd(params, private64, rng):
    U = random_admissible_state(private64, rng)
    J = private64.jacobian(U)
    delta = rng.standard_normal(U.size)
    delta /= np.max(np.abs(delta))
    h = 1e-5
    fd = (private64.residual(U + h * delta)
          - private64.residual(U - h * delta)) / (2 * h)
    an = J @ delta
    assert np.max(np.abs(fd - an)) / (np.max(np.abs(an)) + 1e-12) < 1e-6


def test_tax_identity(params, rng):
    v = rng.uniform(0, 300, 50)
    lam = rng.uniform(-0.2, 0.9, 50)
    assert np.array_equal(effort_from_tax(v, lam, params),
                          control_law(v, lam, params))
    # zero tax reproduces the lam = 0 control
    assert np.array_equal(effort_from_tax(v, np.zeros(50), params),
                          control_law(v, np.zeros(50), params))


def test_tax_field_accessors(params):
    class Obj:
        lam = np.array([1.0, 2.0])
    assert np.array_equal(tax_field(Obj()), [1.0, 2.0])
    assert np.array_equal(tax_field(np.array([0.5])), [0.5])
