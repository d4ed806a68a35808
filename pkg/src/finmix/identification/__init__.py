"""Population-level identification: limit probes, condition checks and recovery."""

from .conditions import ConditionVerdict, check_all, check_condition1, check_condition2, check_condition3
from .fixed_effects import FERecovery, KFunctions, check_condition4, fe_K_functions, fe_recover_lambda
from .general_j import (
    JIdentificationResult,
    QRecursion,
    SaturationWarning,
    detect_J,
    q_recursion,
    recover_J_parameters,
    slope_recovery_J,
)
from .limits import LimitProbe, slope_limit_cf, slope_limits_mgf, weight_limit
from .two_component import TwoComponentRecovery, recover_two_component

__all__ = [
    "ConditionVerdict",
    "FERecovery",
    "JIdentificationResult",
    "KFunctions",
    "LimitProbe",
    "QRecursion",
    "SaturationWarning",
    "TwoComponentRecovery",
    "check_all",
    "check_condition1",
    "check_condition2",
    "check_condition3",
    "check_condition4",
    "detect_J",
    "fe_K_functions",
    "fe_recover_lambda",
    "q_recursion",
    "recover_J_parameters",
    "recover_two_component",
    "slope_limit_cf",
    "slope_limits_mgf",
    "slope_recovery_J",
    "weight_limit",
]
