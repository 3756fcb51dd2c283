"""Profit evaluation: local profit density, spatial averages, discounted values.

The discounted value of a path over [0, T] is closed with a steady tail:

    J = int_0^T exp(-rho t) Jca(t) dt + exp(-rho T)/rho * Jca(target),

where Jca is the spatially averaged profit.  The transient integral uses a
product-trapezoid rule: Jca(t) is taken piecewise linear on the time mesh
and the discount factor is integrated in closed form, so a constant path
evaluates to Jca/rho exactly, independent of the mesh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .fem import Operators, average
from .model import control_law
from .params import ParameterSet


def profit_density(v, E, params: ParameterSet):
    """Local profit p*H(v,E) - c*E with H = v**alpha * E**(1-alpha).

    Zero where v = E = 0; negative v or E is a domain error.
    """
    v = np.asarray(v, dtype=float)
    E = np.asarray(E, dtype=float)
    if np.any(v < 0.0) or np.any(E < 0.0):
        raise InvalidArgumentError("profit density needs v >= 0 and E >= 0")
    H = np.where((v > 0.0) & (E > 0.0),
                 np.maximum(v, 1e-300) ** params.alpha
                 * np.maximum(E, 1e-300) ** (1.0 - params.alpha),
                 0.0)
    return params.p * H - params.c * E


def jca(v, E, params: ParameterSet, ops: Operators) -> float:
    """Spatially averaged profit of nodal fields."""
    return average(profit_density(v, E, params), ops)


def jca_of_state(U, params: ParameterSet, ops: Operators) -> float:
    """Averaged profit of a stacked canonical state, E from the closed loop."""
    n = ops.n
    v, lam = U[:n], U[2 * n:3 * n]
    E = control_law(v, lam, params)
    return jca(np.maximum(v, 0.0), E, params, ops)


def discounted_integral(t: np.ndarray, values: np.ndarray, rho: float) -> float:
    """int exp(-rho t) f(t) dt with f piecewise linear on the nodes ``t``.

    Per-interval weights are exact for the exponential, so constants
    integrate to (1 - exp(-rho T))/rho exactly.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(values, dtype=float)
    if t.shape != f.shape:
        raise InvalidArgumentError("time and value arrays must match")
    h = np.diff(t)
    x = rho * h
    I0 = -np.expm1(-x) / rho
    small = x < 1e-5
    with np.errstate(invalid="ignore", divide="ignore"):
        I1 = np.where(small,
                      h * (0.5 - x / 3.0 + x * x / 8.0),
                      (1.0 - np.exp(-x) * (1.0 + x)) / (rho * rho * h))
    fa, fb = f[:-1], f[1:]
    return float(np.sum(np.exp(-rho * t[:-1]) * (fa * I0 + (fb - fa) * I1)))


@dataclass(frozen=True)
class ValueReport:
    """Discounted objective of a path: J = transient + tail."""

    J: float
    transient: float
    tail: float
    jca_t: np.ndarray  # averaged profit per time node

    def as_dict(self) -> dict:
        return {"J": self.J, "transient": self.transient, "tail": self.tail}


def path_value(t: np.ndarray, jca_t: np.ndarray, jca_target: float,
               rho: float) -> ValueReport:
    """Value of a path given its per-node averaged profits and target profit."""
    transient = discounted_integral(t, jca_t, rho)
    tail = float(np.exp(-rho * t[-1]) / rho * jca_target)
    return ValueReport(J=transient + tail, transient=transient, tail=tail,
                       jca_t=np.asarray(jca_t, dtype=float))


def css_value(jca_hat: float, rho: float) -> float:
    """Value of the constant path sitting at a steady state."""
    return jca_hat / rho
