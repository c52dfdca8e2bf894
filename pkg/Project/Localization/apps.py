from django.apps import AppConfig


class LocalizationConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'Localization'
    verbose_name = 'Localisation de fautes'
