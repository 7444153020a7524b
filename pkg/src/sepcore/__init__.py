"""Kronecker-core covariance decomposition and invariant separability tests.

The package splits a covariance matrix into a separable (Kronecker) factor
and a core; separability of the covariance is equivalent to the core being
the identity, so sphericity-type statistics of the sample core give
separability tests whose null distributions are free of the unknown
separable factor and can be calibrated exactly by simulation.
"""

from .errors import (
    ConfigMismatch,
    IncompatibleParameters,
    InsufficientSamples,
    NegativeEigenvalue,
    NotPositiveDefinite,
    SepcoreError,
    SingularIterate,
    SingularSample,
)
from .kcd import FlipFlopConfig, KcdResult, RootKind, SeparableFactor, core, kcd, kronecker_mle
from .matcore import (
    Shape,
    cholesky,
    eig_sym,
    kron,
    partial_trace_1,
    partial_trace_2,
    rearrange,
    rearrange_inverse,
    singular_values,
    sym_sqrt,
)
from .stats import (
    EdgeQuantities,
    StatKind,
    TestReport,
    bbp_limit,
    edge_quantities,
    ks_distance,
    lrt,
    mp_cdf,
    mp_density,
    t1,
    t1_transforms,
    t2,
    t2_transform,
    t3,
    t3_singular_sum,
    t3_transform,
    tw1_cdf,
    tw1_quantile,
    xi_plus,
)
from .generators import (
    Construction,
    CoreModel,
    GammaStd,
    Gaussian,
    SamplerSpec,
    StudentT,
    haar_orthogonal,
    make_rank_r_core,
    predicted_spikes,
    random_core,
    rank_feasible,
    sample_covariance,
    shrink_core,
)
from .montecarlo import (
    McConfig,
    McResult,
    NormalReference,
    PowerResult,
    QuantileReference,
    Tw1Reference,
    bbp_study,
    empirical_power,
    empirical_size,
    esd_diagnostic,
    simulate_null,
    t3_limit_check,
)

__version__ = "0.1.0"
