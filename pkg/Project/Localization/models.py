"""
Types de la localisation : statistiques par risque, état de la boucle
gloutonne, hypothèse.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional


class Stage(str, Enum):
    HIT_COVERAGE = 'HitCoverage'
    CHANGE_LOG = 'ChangeLog'


class Algorithm(str, Enum):
    SCOUT = 'scout'
    SCORE = 'score'


@dataclass(frozen=True)
class RiskStats:
    """
    Statistiques d'un risque.
    G : éléments vivants qui dépendent du risque.
    O : éléments non expliqués de G reliés au risque par une arête en échec.
    """
    risk: object
    g: frozenset
    o: frozenset
    observations: int

    @property
    def hit_ratio(self):
        return len(self.o) / len(self.g) if self.g else 0.0

    @property
    def coverage_ratio(self):
        return len(self.o) / self.observations if self.observations else 0.0

    @property
    def full_hit(self):
        """Ratio de hit égal à 1, comparé en entiers."""
        return bool(self.o) and len(self.o) == len(self.g)


@dataclass
class LocalizationState:
    """
    État mutable de la boucle : P non expliqués, Q expliqués, H hypothèse,
    K risques candidats, graph copie de travail du modèle.
    """
    unexplained: set
    explained: set
    hypothesis: list
    candidates: set
    graph: object


@dataclass(frozen=True)
class HypothesisEntry:
    object: object
    stage: Stage
    covered: tuple = ()


@dataclass(frozen=True)
class Hypothesis:
    entries: tuple = ()
    residual: tuple = ()
    algo: str = Algorithm.SCOUT.value
    iterations: int = 0
    model_switch: Optional[object] = None

    def objects(self):
        return tuple(entry.object for entry in self.entries)

    def stage_of(self, object_id):
        for entry in self.entries:
            if entry.object == object_id:
                return entry.stage
        return None

    def covered(self):
        result = set()
        for entry in self.entries:
            result.update(entry.covered)
        return result

    def __len__(self):
        return len(self.entries)
