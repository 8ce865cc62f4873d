"""Second-order variational objects of constraint systems {x: f(x) in Theta}.

Tangent/normal/critical cones, second-order tangent sets, second
subderivatives of set indicators with primal/dual certificates, no-gap
second-order optimality conditions, augmented-Lagrangian growth analysis,
and graphical derivatives of normal-cone maps, all cross-checked against
brute-force definition-level oracles.
"""

from .numeric_core import (
    BilinearMap,
    DEFAULT_TOLS,
    ExtReal,
    NEG_INF,
    POS_INF,
    TolerancePolicy,
    apply_bilinear,
    extreal_add,
)
from .set_catalog import (
    ConeRep,
    ConvexSetSpec,
    Empty,
    FullSpace,
    Polyhedron,
    Product,
    SecondOrderCone,
    SecondTangentRep,
    ReductionData,
    critical_cone,
    d2_indicator,
    normal_cone,
    reduction_second_subderivative,
    second_tangent,
    tangent_cone,
)
from .convex_subproblems import (
    LinearProgram,
    LpResult,
    member,
    project,
    solve_lp,
    support_function,
)
from .constraint_system import (
    BasePoint,
    ConstraintSystem,
    MultiplierSet,
    SmoothMap,
    cq_diagnostics,
    multiplier_set,
    s_w_map,
    second_tangent_omega,
    tangent_cone_omega,
)
from .second_subderivative import (
    D2Value,
    PerturbationValue,
    d2_delta_omega,
    d2_intersection,
    dual_value,
    primal_value,
)
from .oracles import (
    OracleEstimate,
    QuotientGrid,
    d2_quotient_estimate,
    epi_differentiability_check,
    gph_normal_tangent_sample,
    parabolic_regularity_check,
    t2_membership,
)
from .optimality import (
    GrowthReport,
    OptProblem,
    OptimalityCertificate,
    growth_sample,
    kkt_check,
    second_order_conditions,
    strong_subregularity_check,
    sufficient_without_cq,
)
from .auglag import (
    AugGrowthReport,
    AugLagEval,
    d2_auglag,
    eval_auglag,
    growth_threshold,
    moreau_envelope_of_d2,
)
from .graphical_derivative import (
    GderAnswer,
    dn_omega_membership,
    dn_theta,
    projection_derivative,
)
from .fixtures import Fixture, list_fixtures, make_fixture, random_polyhedral_fixture

__version__ = "0.1.0"
