from django.apps import AppConfig


class SimulationConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'Simulation'
    verbose_name = 'Simulation et expériences'
