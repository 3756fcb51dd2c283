"""Model parameters: ecological and economic scalars plus serialization.

All quantities are dimensionless.  Defaults follow the standard calibration
of the vegetation/soil-water harvesting model; the rainfall ``R`` defaults
to 34, a convenient starting point on the high-vegetation flat branch.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import InvalidArgumentError, ScenarioError


@dataclass(frozen=True)
class ParameterSet:
    """Scalar parameters of the harvesting model.

    g, eta      coefficient and exponent of the plant growth rate g*w*v**eta
    d, delta    plant death rate d*(1 + delta*v)
    beta, xi    infiltration function beta + xi*v (scaled by rainfall R)
    R           rainfall, the main bifurcation parameter
    r_u, r_w    water uptake / evaporation in the loss rate r_u*v + r_w
    d1, d2      diffusion constants of vegetation and water
    rho         discount rate
    c, p, alpha harvest cost, price, and Cobb-Douglas elasticity of
                H(v, E) = v**alpha * E**(1-alpha)
    """

    g: float = 0.001
    eta: float = 0.5
    d: float = 0.03
    delta: float = 0.005
    beta: float = 0.9
    xi: float = 0.001
    R: float = 34.0
    r_u: float = 0.01
    r_w: float = 0.1
    d1: float = 0.05
    d2: float = 10.0
    rho: float = 0.03
    c: float = 1.0
    p: float = 1.1
    alpha: float = 0.3

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidArgumentError(f"alpha must lie in (0,1), got {self.alpha}")
        if self.rho <= 0.0:
            raise InvalidArgumentError(f"rho must be positive, got {self.rho}")
        if self.d1 <= 0.0 or self.d2 <= 0.0:
            raise InvalidArgumentError("diffusion constants d1, d2 must be positive")
        if self.c <= 0.0 or self.p <= 0.0:
            raise InvalidArgumentError("economic parameters c, p must be positive")
        for name in ("g", "eta", "d", "delta", "beta", "xi", "R", "r_u", "r_w"):
            if getattr(self, name) < 0.0:
                raise InvalidArgumentError(f"ecological rate {name} must be >= 0")

    def with_(self, **overrides) -> "ParameterSet":
        """Return a copy with the given fields replaced."""
        unknown = set(overrides) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise InvalidArgumentError(f"unknown parameter(s): {sorted(unknown)}")
        return dataclasses.replace(self, **overrides)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_text(self) -> str:
        """Serialize as one ``key = value`` line per field."""
        lines = [f"{f.name} = {getattr(self, f.name):.17g}"
                 for f in dataclasses.fields(self)]
        return "\n".join(lines) + "\n"


def params_from_text(text: str, base: ParameterSet | None = None) -> ParameterSet:
    """Parse ``key = value`` lines into a ParameterSet.

    Missing keys keep their value from ``base`` (or the defaults).  Unknown
    keys are rejected with the offending line number.
    """
    known = {f.name for f in dataclasses.fields(ParameterSet)}
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"expected 'key = value', got {raw!r}", line=lineno)
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in known:
            raise ScenarioError(f"unknown parameter {key!r}", line=lineno)
        try:
            overrides[key] = float(val.strip())
        except ValueError:
            raise ScenarioError(f"cannot parse value for {key!r}: {val.strip()!r}",
                                line=lineno) from None
    return (base or ParameterSet()).with_(**overrides)
