from django.apps import AppConfig


class NudgingConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'nudging'
    verbose_name = 'Data assimilation'
