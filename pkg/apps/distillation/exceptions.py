from core.exceptions import ContractError


class DistillationException(ContractError):
    """Base distillation exception"""
    pass


class UntrainedPriorException(DistillationException):
    default_detail = 'The denoiser is untrained; pass allow_untrained to distil against it anyway'
    default_code = 'untrained_prior'


class OracleDimensionException(DistillationException):
    default_detail = 'Quadrature oracle supports at most two integration dimensions'
    default_code = 'oracle_dimension'


class NoDistillationWeightException(DistillationException):
    default_detail = 'At least one of the baseline weights must be positive'
    default_code = 'no_distillation_weight'
