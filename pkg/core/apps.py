from django.apps import AppConfig


class CoreConfig(AppConfig):
    """Holds the exception hierarchy shared by the simulator apps; no models"""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'core'
    verbose_name = 'Simulator core'
