"""
Modèle de risques partagés : graphe biparti entre éléments affectés
(paires d'EPG, éventuellement rattachées à un switch) et objets de politique.

Le graphe est un networkx.Graph :
- éléments : AffectedElement, attribut bipartite=0 et status
- risques : ObjectId, attribut bipartite=1
- arêtes : attribut status
"""
from dataclasses import dataclass
from enum import Enum
from functools import total_ordering
from typing import Optional

import networkx as nx


class Status(str, Enum):
    SUCCESS = 'Success'
    FAIL = 'Fail'


class ModelKind(str, Enum):
    SWITCH = 'switch'
    CONTROLLER = 'controller'


ELEMENT = 0
RISK = 1


@total_ordering
@dataclass(frozen=True)
class AffectedElement:
    """
    Élément affecté : paire d'EPG (modèle switch) ou triplet
    (switch, paire) pour le modèle contrôleur.
    """
    scope: Optional[object]
    pair: object

    @property
    def sort_key(self):
        scope_key = self.scope.sort_key if self.scope is not None else (-1, '')
        return (scope_key, self.pair.a.sort_key, self.pair.b.sort_key)

    def __lt__(self, other):
        if not isinstance(other, AffectedElement):
            return NotImplemented
        return self.sort_key < other.sort_key

    def __str__(self):
        if self.scope is None:
            return str(self.pair)
        return f"{self.scope.name}/{self.pair}"


@dataclass(frozen=True)
class FailureSignature:
    """Ensemble des observations (éléments en échec)."""
    observations: frozenset = frozenset()

    def __len__(self):
        return len(self.observations)

    def __iter__(self):
        return iter(sorted(self.observations))

    def __contains__(self, element):
        return element in self.observations


class RiskModel:
    """
    Modèle de risques (switch ou contrôleur).

    Traité comme une valeur : les opérations qui le modifient travaillent
    sur une copie (copy()).
    """

    def __init__(self, kind, switch=None, graph=None, provenance=None):
        self.kind = ModelKind(kind)
        self.switch = switch
        self.graph = graph if graph is not None else nx.Graph()
        # règle → objets de provenance, pour les règles couvertes par le modèle
        self.provenance = dict(provenance or {})

    @classmethod
    def from_edges(cls, kind, edges, switch=None, provenance=None):
        """
        Construit un modèle depuis des triplets (élément, risque, statut).
        Le statut d'un élément est Fail ssi une de ses arêtes est Fail.
        """
        model = cls(kind, switch=switch, provenance=provenance)
        for element, risk, status in edges:
            model.add_edge(element, risk, Status(status))
        return model

    def add_element(self, element):
        if element not in self.graph:
            self.graph.add_node(element, bipartite=ELEMENT, status=Status.SUCCESS)

    def add_risk(self, risk):
        if risk not in self.graph:
            self.graph.add_node(risk, bipartite=RISK)

    def add_edge(self, element, risk, status=Status.SUCCESS):
        self.add_element(element)
        self.add_risk(risk)
        self.graph.add_edge(element, risk, status=status)
        if status == Status.FAIL:
            self.graph.nodes[element]['status'] = Status.FAIL

    def mark_fail(self, element, risk):
        self.graph.edges[element, risk]['status'] = Status.FAIL
        self.graph.nodes[element]['status'] = Status.FAIL

    def copy(self):
        return RiskModel(self.kind, switch=self.switch, graph=self.graph.copy(), provenance=self.provenance)

    def elements(self):
        return sorted(node for node, side in self.graph.nodes(data='bipartite') if side == ELEMENT)

    def risks(self):
        return sorted(node for node, side in self.graph.nodes(data='bipartite') if side == RISK)

    def edges(self):
        """Arêtes (élément, risque, statut) triées."""
        result = []
        for u, v, status in self.graph.edges(data='status'):
            element, risk = (u, v) if self.graph.nodes[u]['bipartite'] == ELEMENT else (v, u)
            result.append((element, risk, status))
        result.sort(key=lambda edge: (edge[0].sort_key, edge[1].sort_key))
        return result

    def status(self, element):
        return self.graph.nodes[element]['status']

    def edge_status(self, element, risk):
        return self.graph.edges[element, risk]['status']

    def risks_of(self, element, status=None):
        return sorted(
            risk for risk in self.graph.neighbors(element)
            if status is None or self.graph.edges[element, risk]['status'] == status
        )

    def elements_of(self, risk):
        return sorted(self.graph.neighbors(risk))

    def fail_elements(self):
        return sorted(
            node for node, data in self.graph.nodes(data=True)
            if data['bipartite'] == ELEMENT and data['status'] == Status.FAIL
        )

    def element_for(self, rule):
        """Élément du modèle correspondant à une règle."""
        scope = rule.switch if self.kind == ModelKind.CONTROLLER else None
        return AffectedElement(scope=scope, pair=rule.pair)

    def fail_edge_count(self):
        return sum(1 for _, _, status in self.graph.edges(data='status') if status == Status.FAIL)

    def __eq__(self, other):
        if not isinstance(other, RiskModel):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.switch == other.switch
            and self.edges() == other.edges()
            and self.elements() == other.elements()
        )

    def __repr__(self):
        return (f"RiskModel(kind={self.kind.value}, switch={self.switch}, "
                f"elements={len(self.elements())}, risks={len(self.risks())})")
