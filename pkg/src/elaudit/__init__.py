"""Distribution-free auditing of group-wise performance disparities.

The package certifies whether every group's disparity equals a stated value,
flags groups whose disparity violates a tolerance while controlling the false
discovery rate, and inverts the tests into confidence intervals.  Statistics
are likelihood log-ratios calibrated by chi-square and mixture chi-square
references, with a resampling baseline for comparison.
"""

from .audit import (
    CertificationReport,
    ConfidenceInterval,
    FlagReport,
    HypothesisSpec,
    TestResult,
    certify,
    confidence_interval,
    elbh_flag,
    flag_groups,
    test_at_least,
    test_at_most,
    test_interval,
    test_point,
)
from .bootstrap import BootstrapConfig, BootstrapReport, bootstrap_region
from .disparity import (
    AuditDataset,
    Clause,
    EstimatingSystem,
    GroupSpec,
    MetricSpec,
    TargetSpec,
    build_system,
)
from .exceptions import (
    AuditError,
    BracketFailureError,
    ConfigError,
    DatasetError,
    DegenerateVarianceError,
    EmptyGroupError,
    InvalidIntervalError,
    NoConvergenceError,
    ResampleCapError,
    SingularCovarianceError,
)
from .likelihood import (
    ElEvaluation,
    eel_log_ratio,
    el_log_ratio,
    plugin_el_log_ratio,
    profile_el2,
)

__version__ = "0.1.0"

__all__ = [
    "AuditDataset",
    "AuditError",
    "BootstrapConfig",
    "BootstrapReport",
    "BracketFailureError",
    "CertificationReport",
    "Clause",
    "ConfidenceInterval",
    "ConfigError",
    "DatasetError",
    "DegenerateVarianceError",
    "ElEvaluation",
    "EmptyGroupError",
    "EstimatingSystem",
    "FlagReport",
    "GroupSpec",
    "HypothesisSpec",
    "InvalidIntervalError",
    "MetricSpec",
    "NoConvergenceError",
    "ResampleCapError",
    "SingularCovarianceError",
    "TargetSpec",
    "TestResult",
    "bootstrap_region",
    "build_system",
    "certify",
    "confidence_interval",
    "eel_log_ratio",
    "el_log_ratio",
    "elbh_flag",
    "flag_groups",
    "plugin_el_log_ratio",
    "profile_el2",
    "test_at_least",
    "test_at_most",
    "test_interval",
    "test_point",
    "__version__",
]
