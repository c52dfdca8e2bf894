from django.apps import AppConfig


class RiskConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'Risk'
    verbose_name = 'Modèles de risques partagés'
