from django.apps import AppConfig


class DistillationConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.distillation'
    verbose_name = 'Score distillation'
