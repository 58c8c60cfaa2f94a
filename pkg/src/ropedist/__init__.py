"""Rotary-angle distribution analysis for RoPE context-window extension.

>>> from ropedist import LLAMA2, plan_dprope, disturbance_of_thetas
>>> plan = plan_dprope(LLAMA2, 8192, n_hat=80)
>>> plan.n_interpolated
40
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    DimensionError,
    DomainError,
    PlanFormatError,
    RopeDistError,
)
from .rope import (  # noqa: E402
    LLAMA2,
    RopeConfig,
    ThetaVector,
    apply_rotation,
    base_theta,
    rotary_angle,
    verify_relative_property,
    wavelength,
    wavelength_ratio,
)
from .distribution import (  # noqa: E402
    DEFAULT_BINS,
    AngleHistogram,
    DistributionSet,
    bucket_index,
    estimate_histogram,
    estimate_set,
)
from .disturbance import (  # noqa: E402
    DEFAULT_EPSILON,
    DisturbanceReport,
    ThetaDisturbance,
    disturbance_of_thetas,
    extension_margins,
    kl_disturbance,
)
from .strategies import (  # noqa: E402
    ScalingPlan,
    plan_dprope,
    plan_extrapolate,
    plan_pi,
    plan_yarn,
    score_plan,
    sweep,
)

__all__ = [
    "__version__",
    "ConfigurationError",
    "DimensionError",
    "DomainError",
    "PlanFormatError",
    "RopeDistError",
    "LLAMA2",
    "RopeConfig",
    "ThetaVector",
    "apply_rotation",
    "base_theta",
    "rotary_angle",
    "verify_relative_property",
    "wavelength",
    "wavelength_ratio",
    "DEFAULT_BINS",
    "AngleHistogram",
    "DistributionSet",
    "bucket_index",
    "estimate_histogram",
    "estimate_set",
    "DEFAULT_EPSILON",
    "DisturbanceReport",
    "ThetaDisturbance",
    "disturbance_of_thetas",
    "extension_margins",
    "kl_disturbance",
    "ScalingPlan",
    "plan_dprope",
    "plan_extrapolate",
    "plan_pi",
    "plan_yarn",
    "score_plan",
    "sweep",
]
