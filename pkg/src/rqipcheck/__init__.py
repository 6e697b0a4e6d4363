"""Verification toolkit for the restricted quasiconvexity isometry property of SaS matrices."""

__version__ = "0.1.0"

from .concentration import (
    ConcentrationParams,
    DeviationSeries,
    combined_bound,
    estimate_deviation_probability,
    fit_decay_exponent,
    hoeffding_term,
    tail_term,
    truncation_threshold,
)
from .errors import CapacityError, DomainError
from .geometry import (
    EpsilonNet,
    SparseVector,
    alpha_quasinorm,
    binomial_and_bound,
    build_net,
    covering_bound,
    enumerate_supports,
    quasi_triangle_constant,
    verify_net,
)
from .rqip import (
    ComplexityInputs,
    MeasurementMatrix,
    RqipConfig,
    RqipReport,
    generate_matrix,
    moment_stat,
    net_epsilon_for_delta,
    rqip_check,
    rqip_deviation,
    sample_complexity,
)
from .stable import (
    SampleBatch,
    StableLaw,
    draw_stable,
    empirical_abs_moment,
    gamma_fn,
    stable_abs_moment_constant,
    stable_tail_constant,
)
from .streams import Stream
