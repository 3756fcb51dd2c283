"""vegoc: optimal harvesting in a vegetation/soil-water reaction-diffusion
system via its Pontryagin canonical system.

Two-step workflow: continuation/bifurcation analysis of canonical steady
states (flat and patterned), then canonical paths (connecting orbits) to
saddle targets, with discounted objective values, Skiba points, and a
private-optimization baseline.
"""

__version__ = "0.1.0"

from .continuation import (Branch, ContinuationOptions, branch_switch,
                           continue_branch, crossings, jca_maximizer,
                           switch_and_continue)
from .cpath import (CanonicalPath, connect, continue_initial_state,
                    make_time_mesh, truncation_check)
from .fem import (Mesh, Operators, assemble_operators, average,
                  build_interval_mesh, build_rect_mesh)
from .model import (CanonicalSystem, PrivateSystem, control_law,
                    effort_from_tax, kappa, private_coefficient, tax_field)
from .newton import (CSSPoint, make_css, newton, solve_flat_css,
                     solve_flat_private, solve_steady)
from .objective import (ValueReport, css_value, discounted_integral, jca,
                        path_value, profit_density)
from .params import ParameterSet, params_from_text
from .private import (PrivateStepper, Trajectory, continue_private_branch,
                      simulate, step_private)
from .skiba import SkibaResult, find_skiba
from .spectral import SpectralData, defect, pairing_residual, spectrum, \
    stable_projector

__all__ = [name for name in dir() if not name.startswith("_")]
