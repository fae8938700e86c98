from core.exceptions import ContractError


class EnergyException(ContractError):
    """Base energy exception"""
    pass


class EnergyArityException(EnergyException):
    default_detail = 'Energy received the wrong number of views'
    default_code = 'energy_arity'


class UnknownEnergyException(EnergyException):
    default_detail = 'Unknown energy'
    default_code = 'unknown_energy'


class SingleObjectDatasetException(EnergyException):
    default_detail = 'Pair training needs at least two objects'
    default_code = 'single_object_dataset'


class GroupSizeException(EnergyException):
    default_detail = 'More views requested than the model was trained on'
    default_code = 'group_size'
