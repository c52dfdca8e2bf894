from django.apps import AppConfig


class PolicyConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'Policy'
    verbose_name = 'Politique réseau (intention)'
