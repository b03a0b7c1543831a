"""Random walks driven by atomic measures on the isometry group of R^d.

The compiled walk kernel is used when available; set
``ISOMWALK_PURE_PYTHON=1`` to force the numpy fallback.
"""

from isomwalk.errors import (
    AtomExplosion,
    CapExceeded,
    ConfigError,
    DegenerateForm,
    DimensionMismatch,
    GroupNotFinite,
    InterpolationOverflow,
    InvariantSplitError,
    IsomwalkError,
    NonUniqueFixedPoint,
    ProjectorRankError,
)
from isomwalk.isomcore import (
    Isometry,
    RotationGroupModel,
    close_finite_group,
    compose,
    ergodic_haar,
    group_model_for,
    invariant_decomposition,
    invert,
)
from isomwalk.kernels import BACKEND
from isomwalk.limits import (
    BumpSpec,
    VerificationReport,
    clt_check,
    compare_error_exponents,
    compute_delta,
    drift,
    fourier_range_check,
    limit_parameters,
    llt_check,
    multiscale_check,
    symmetrize_delta,
)
from isomwalk.measure import AtomicIsometryMeasure, convolve, reverse, symmetrize
from isomwalk.walker import WalkConfig, exact_distribution, simulate

__version__ = "0.1.0"
