from core.exceptions import ContractError


class SceneException(ContractError):
    """Base scene exception"""
    pass


class InvalidCameraException(SceneException):
    default_detail = 'Invalid camera'
    default_code = 'invalid_camera'


class EyeInsideGridException(SceneException):
    default_detail = 'Camera eye lies inside the scene grid'
    default_code = 'eye_inside_grid'


class InvalidRenderOptionsException(SceneException):
    default_detail = 'Invalid render options'
    default_code = 'invalid_render_options'


class EmptyCameraRangeException(SceneException):
    default_detail = 'Camera range is empty'
    default_code = 'empty_camera_range'


class InvalidAssetSpecException(SceneException):
    default_detail = 'Invalid asset specification'
    default_code = 'invalid_asset_spec'
