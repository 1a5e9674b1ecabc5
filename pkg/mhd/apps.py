from django.apps import AppConfig


class MhdConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'mhd'
    verbose_name = 'MHD dynamics'
