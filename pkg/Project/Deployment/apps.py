from django.apps import AppConfig


class DeploymentConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'Deployment'
    verbose_name = 'Déploiement des règles (TCAM)'
