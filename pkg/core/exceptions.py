class LabException(Exception):
    """Base exception for the distillation lab"""
    default_detail = 'An error occurred'
    default_code = 'error'

    def __init__(self, detail=None, code=None):
        self.detail = detail or self.default_detail
        self.code = code or self.default_code
        super().__init__(self.detail)


class ContractError(LabException):
    """A precondition, shape or arity contract was violated"""
    default_detail = 'Contract violated'
    default_code = 'contract_error'


class DomainError(LabException):
    """An argument lies outside its mathematical domain"""
    default_detail = 'Argument outside its domain'
    default_code = 'domain_error'


class ConfigError(LabException):
    default_detail = 'Invalid configuration'
    default_code = 'config_error'


class CheckpointError(LabException):
    default_detail = 'Checkpoint could not be loaded'
    default_code = 'checkpoint_error'


class NonFiniteGradientError(LabException):
    default_detail = 'Non-finite gradient'
    default_code = 'non_finite_gradient'

    def __init__(self, step, detail=None, code=None):
        self.step = step
        super().__init__(detail or f'Non-finite gradient at step {step}', code)
