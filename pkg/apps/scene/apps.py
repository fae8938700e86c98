from django.apps import AppConfig


class SceneConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.scene'
    verbose_name = 'Scene and renderer'
