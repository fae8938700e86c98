from core.exceptions import ContractError


class HarnessException(ContractError):
    """Base harness exception"""
    pass


class MissingRunArtifactException(HarnessException):
    default_detail = 'Run artifact not found'
    default_code = 'missing_artifact'


class ShortSeriesException(HarnessException):
    default_detail = 'Loss series is shorter than the smoothing window'
    default_code = 'short_series'


class UnknownMethodException(HarnessException):
    default_detail = 'Unknown distillation method'
    default_code = 'unknown_method'


class NoHeldOutViewsException(HarnessException):
    default_detail = 'No held-out views for the label'
    default_code = 'no_held_out_views'
