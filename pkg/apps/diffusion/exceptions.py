from core.exceptions import ContractError


class DiffusionException(ContractError):
    """Base diffusion exception"""
    pass


class UnknownLabelException(DiffusionException):
    default_detail = 'Unknown class label'
    default_code = 'unknown_label'


class ResolutionMismatchException(DiffusionException):
    default_detail = 'Input does not match the model resolution'
    default_code = 'resolution_mismatch'


class EmptyDatasetException(DiffusionException):
    default_detail = 'Training dataset is empty'
    default_code = 'empty_dataset'
