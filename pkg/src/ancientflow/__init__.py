"""Numerical laboratory for convex noncollapsed ancient solutions of mean curvature flow in R^3.

Submodules
----------
geometry_core
    Grids, surface representations, curvature, Gaussian area and
    noncollapsing.
soliton_solvers
    Bowl soliton and compact shrinker leaves.
mcf_solver
    Mean curvature flow in graph, radius and rescaled cylinder-graph form.
spectral
    The operator ``L`` on the cylinder, its Hermite-Fourier eigenmodes and
    the split into unstable, neutral and stable parts.
dynamics_checks
    The mode-system dichotomy, the heat-equation barrier ``psi`` and
    Harnack-type checks.
neck_analysis
    Neck fitting, rotation fields and the neck-improvement experiment.
acceptance, cli, io
    Acceptance suite, command-line front end and serialization.

Submodules load on first attribute access, so ``import ancientflow`` stays
cheap and the command line can cap thread pools before numpy loads.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "acceptance",
    "cli",
    "dynamics_checks",
    "errors",
    "geometry_core",
    "io",
    "mcf_solver",
    "neck_analysis",
    "soliton_solvers",
    "spectral",
)

__all__ = list(_SUBMODULES) + ["__version__"]


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f"{__name__}.{name}")
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(__all__)
