"""Exception hierarchy shared by every module.

Each class carries a short ``category`` string; the command line front end
prints it on failure so callers can branch on it without parsing messages.
"""

import numpy as np


class VlmimoError(Exception):
    category = "error"


class RankDeficient(VlmimoError, np.linalg.LinAlgError):
    category = "rank_deficient"


class NotHermitian(VlmimoError, ValueError):
    category = "not_hermitian"


class NonFinite(VlmimoError, ValueError):
    category = "non_finite"


class AlphaTooSmall(VlmimoError, ValueError):
    category = "alpha_too_small"


class DivergenceDetected(VlmimoError, ArithmeticError):
    category = "divergence"


class DimensionMismatch(VlmimoError, ValueError):
    category = "dimension_mismatch"


class UserTooClose(VlmimoError, ValueError):
    category = "user_too_close"


class NotPSD(VlmimoError, ValueError):
    category = "not_psd"


class SingularImpedanceSum(VlmimoError, np.linalg.LinAlgError):
    category = "singular_impedance_sum"


class DegenerateGeometry(VlmimoError, ValueError):
    category = "degenerate_geometry"


class UnknownRegime(VlmimoError, ValueError):
    category = "unknown_regime"


class OptimizerStall(VlmimoError, RuntimeError):
    category = "optimizer_stall"


class VPRangeExceeded(VlmimoError, ValueError):
    category = "vp_range_exceeded"


class SingularGram(VlmimoError, np.linalg.LinAlgError):
    category = "singular_gram"


class SingularRegularizedGram(SingularGram):
    category = "singular_regularized_gram"


class OddBitCount(VlmimoError, ValueError):
    category = "odd_bit_count"


class TooLarge(VlmimoError, ValueError):
    category = "too_large"


class BudgetExceeded(VlmimoError, ValueError):
    category = "budget_exceeded"


class UnknownTechnique(VlmimoError, ValueError):
    category = "unknown_technique"


class ConfigError(VlmimoError, ValueError):
    category = "config"

    def __init__(self, name, message=None):
        self.name = name
        super().__init__(message or name)


class MissingKey(ConfigError):
    category = "missing_key"


class TypeMismatch(ConfigError):
    category = "type_mismatch"


class RangeViolation(ConfigError):
    category = "range_violation"


class UnknownKey(ConfigError):
    category = "unknown_key"
