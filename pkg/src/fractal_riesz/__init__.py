"""Riesz energies of occupation measures of fractal fields.

Kernels and potentials, fractional Brownian fields and bridges, Holder
constrained energy minimization, explicit probabilistic constants,
dimension and regularity diagnostics, and composition of BV functions with
rough fields.
"""

from .analysis import (
    AllPairs,
    BoxDimensionResult,
    Sampled,
    bdpot_diagnostic,
    box_dimension,
    holder_seminorm,
    oscillation_moduli,
)
from .composition import (
    BVGridFunction,
    CompositionError,
    CompositionParams,
    ParameterGateError,
    compose,
    gagliardo_seminorm,
    gradient_measure,
    pointwise_bv_check,
    v_functional,
    verify_main_estimate,
)
from .constants import (
    ConstantReport,
    berman_C,
    bridge_C_prime,
    epsilon_range,
    gaussian_moment,
    grid_integral,
    m0_bound,
    m1_bound,
    pitt_condition,
    rho1_bound,
)
from .estimators import BoxCountingDimension, HolderEnergyMinimizer, RieszPotentialTransformer
from .fields import (
    CovKind,
    CovModel,
    FieldSpec,
    bridge_increment_variance,
    lnd_form_variance,
    make_bridge,
    sample_fbf,
    sample_fbm_1d,
)
from .kernels import KernelSpec, bessel_kernel, riesz_kernel
from .measures import (
    Diagonal,
    DiscreteMeasure,
    SampledField,
    fourier_transform,
    maximal_function,
    mutual_energy,
    occupation_measure,
    riesz_potential,
    self_energy,
    sup_potential,
)
from .minimize import (
    InfeasibleProblemError,
    MinimizeOptions,
    MinimizerResult,
    Objective,
    PotentialCap,
    ProblemSpec,
    check_constraints,
    minimize,
    objective_and_gradient,
    project_holder,
)
from .witness import KochSpec, assouad_condition, biholder_constants, feasible_init, koch_curve

__version__ = "0.1.0"
