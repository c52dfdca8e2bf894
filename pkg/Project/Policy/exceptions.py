"""
Erreurs communes à toutes les étapes du pipeline.

Chaque erreur porte un code machine et l'étape qui l'a levée,
utilisée par la CLI pour préfixer le message.
"""


class LocalizerError(Exception):
    """Erreur de base du localisateur."""

    default_code = 'localizer_error'
    default_stage = 'pipeline'

    def __init__(self, message, code=None, stage=None):
        super().__init__(message)
        self.message = message
        self.code = code or self.default_code
        self.stage = stage or self.default_stage

    def __str__(self):
        return self.message


class PolicyParseError(LocalizerError):
    """Fichier JSON / JSON lines illisible ou non conforme au schéma."""

    default_code = 'parse_error'
    default_stage = 'policy'


class InputError(LocalizerError):
    """Entrée invalide fournie par l'utilisateur (switch inconnu, schéma, argument)."""

    default_code = 'invalid_input'


class ConsistencyError(LocalizerError):
    """Invariant interne violé (modèle périmé, provenance manquante)."""

    default_code = 'consistency_error'


class GeneratorConfigError(LocalizerError):
    """Configuration de génération infaisable."""

    default_code = 'infeasible_config'
    default_stage = 'simulation'


class FaultPlanError(LocalizerError):
    """Plan de fautes invalide."""

    default_code = 'invalid_fault_plan'
    default_stage = 'simulation'
