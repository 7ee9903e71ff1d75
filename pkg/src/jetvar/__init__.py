"""Higher-order variational calculus on jets of curves.

Jet arithmetic lives in :mod:`jetvar.weil_algebra`, bundle coordinates in
:mod:`jetvar.bundles`, the integration-by-parts maps in
:mod:`jetvar.canonical_maps`, forces and momenta in :mod:`jetvar.variational`,
Riemannian cubics in :mod:`jetvar.geometry` and ODE/BVP solvers in
:mod:`jetvar.solver`.
"""

from .bundles import (
    HigherVelocity,
    LiftedVectorElement,
    SemiHolonomicElement,
    alpha_lift_eval,
    curve_jet,
    holonomic_include,
    is_holonomic,
    project,
)
from .canonical_maps import (
    CotangentLift,
    CovectorVelocity,
    dual_eps,
    dual_eps_inverse,
    flip_kappa,
    flip_kappa_inverse,
    momenta,
    pairing_cotangent,
    pairing_higher,
    pairing_iterated,
    project_pk,
    upsilon,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateLagrangianError,
    DomainError,
    HolonomyError,
    JetvarError,
    PairingDomainError,
    ParseError,
    SingularityError,
    UsageError,
)
from .geometry import (
    MetricField,
    christoffel,
    cubic_el_residual,
    cubic_lagrangian,
    curvature,
    euclidean,
    hyperbolic2,
    sphere2,
)
from .solver import SolverConfig, Trajectory, cubic_spline_oracle, integrate_el, shoot_bvp
from .variational import (
    Lagrangian,
    action_variation,
    differential_dL,
    force_along,
    momentum_along,
    transversality_check,
)
from .weil_algebra import JetScalar, JetShape, seed_variable

__version__ = "0.1.0"

__all__ = [
    "HigherVelocity",
    "LiftedVectorElement",
    "SemiHolonomicElement",
    "alpha_lift_eval",
    "curve_jet",
    "holonomic_include",
    "is_holonomic",
    "project",
    "CotangentLift",
    "CovectorVelocity",
    "dual_eps",
    "dual_eps_inverse",
    "flip_kappa",
    "flip_kappa_inverse",
    "momenta",
    "pairing_cotangent",
    "pairing_higher",
    "pairing_iterated",
    "project_pk",
    "upsilon",
    "ConfigError",
    "ConvergenceError",
    "DegenerateLagrangianError",
    "DomainError",
    "HolonomyError",
    "JetvarError",
    "PairingDomainError",
    "ParseError",
    "SingularityError",
    "UsageError",
    "MetricField",
    "christoffel",
    "cubic_el_residual",
    "cubic_lagrangian",
    "curvature",
    "euclidean",
    "hyperbolic2",
    "sphere2",
    "SolverConfig",
    "Trajectory",
    "cubic_spline_oracle",
    "integrate_el",
    "shoot_bvp",
    "Lagrangian",
    "action_variation",
    "differential_dL",
    "force_along",
    "momentum_along",
    "transversality_check",
    "JetScalar",
    "JetShape",
    "seed_variable",
    "__version__",
]
