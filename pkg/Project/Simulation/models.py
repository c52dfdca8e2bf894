"""
Types de la simulation : plans de fautes, profils de génération,
paramètres et résultats d'essais.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class FaultKind(str, Enum):
    FULL = 'Full'
    PARTIAL = 'Partial'

    @classmethod
    def parse(cls, value):
        lowered = str(value).strip().lower()
        for kind in cls:
            if kind.value.lower() == lowered:
                return kind
        raise ValueError(f"Type de faute inconnu: {value}")


@dataclass(frozen=True)
class Fault:
    """
    Faute sur un objet. FULL retire toutes les règles dérivées dans le
    périmètre ; PARTIAL en retire une fraction strictement entre 0 et 1.
    """
    object: object
    kind: FaultKind
    fraction: Optional[float] = None
    scope: Optional[object] = None


@dataclass(frozen=True)
class FaultPlan:
    faults: tuple = ()
    seed: int = 0

    def objects(self):
        return tuple(sorted({fault.object for fault in self.faults}))

    def __len__(self):
        return len(self.faults)


@dataclass(frozen=True)
class GeneratorConfig:
    """
    Paramètres du générateur de politiques.

    sharing 'zipf' : zipf_exponent règle le partage, plus il est grand,
    plus quelques EPG, contrats et filtres concentrent les dépendances.
    sharing 'balanced' : partage faible et régulier. Chaque EPG a au moins
    deux partenaires répartis sur deux contrats, aucun contrat n'est centré
    sur un seul EPG, chaque filtre sert au moins deux contrats et les
    endpoints d'un EPG occupent des switches distincts.
    """
    vrfs: int
    epgs: int
    contracts: int
    filters: int
    switches: int
    pairs: int
    endpoints_per_epg: int = 1
    zipf_exponent: float = 1.0
    max_filters_per_contract: int = 3
    sharing: str = 'zipf'
    seed: int = 0


PROFILES = {
    'testbed': GeneratorConfig(
        vrfs=1, epgs=36, contracts=24, filters=9, switches=4, pairs=100,
        endpoints_per_epg=4, sharing='balanced',
    ),
    'production': GeneratorConfig(
        vrfs=6, epgs=615, contracts=386, filters=160, switches=30, pairs=1200,
        endpoints_per_epg=2, zipf_exponent=1.1,
    ),
}


@dataclass(frozen=True)
class TrialParams:
    """
    Paramètres d'un essai de bout en bout.

    model 'controller' : fautes sans périmètre, modèle contrôleur.
    model 'switch' : fautes limitées au switch cible, modèle de ce switch.
    """
    algo: str = 'scout'
    faults: int = 1
    mix: float = 0.5
    seed: int = 0
    model: str = 'controller'
    switch: Optional[object] = None
    threshold: float = 1.0
    window: int = 10
    selection: str = 'all'
    stale_changelog: bool = False
    kinds: tuple = ('EPG', 'Contract', 'Filter')
    fraction_range: tuple = (0.01, 0.95)


@dataclass(frozen=True)
class TrialResult:
    run: int
    algo: str
    faults: int
    ground_truth: frozenset
    hypothesis: tuple
    precision: float
    recall: float
    gamma: float
    runtime_ms: float
    suspects: frozenset = field(default_factory=frozenset)

    def as_row(self):
        return {
            'run': self.run,
            'algo': self.algo,
            'faults': self.faults,
            'precision': self.precision,
            'recall': self.recall,
            'gamma': self.gamma,
            'runtime_ms': self.runtime_ms,
        }


@dataclass(frozen=True)
class Scenario:
    """
    Cas d'usage scripté : politique, déploiement observé, journaux,
    et modèle de risques à utiliser pour la localisation.
    """
    name: str
    policy: object
    compiled: tuple
    deployment: object
    report: object
    change_log: tuple = ()
    fault_log: tuple = ()
    model: str = 'controller'
    switch: Optional[object] = None
    plan: Optional[FaultPlan] = None
