"""
Types du modèle d'intention : VRF, EPG, contrats, filtres, placement des endpoints.

Ce ne sont pas des modèles ORM : la politique est une valeur immuable chargée
depuis un fichier JSON, partagée en lecture seule entre les étapes.
Toutes les collections sont triées par ObjectId pour garantir un ordre
d'itération déterministe.
"""
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property, total_ordering
from typing import Optional


class ObjectKind(str, Enum):
    VRF = 'VRF'
    EPG = 'EPG'
    CONTRACT = 'Contract'
    FILTER = 'Filter'
    SWITCH = 'Switch'

    @classmethod
    def parse(cls, value):
        """Accepte 'EPG', 'epg', 'Epg'..."""
        if isinstance(value, cls):
            return value
        lowered = str(value).strip().lower()
        for kind in cls:
            if kind.value.lower() == lowered:
                return kind
        raise ValueError(f"Type d'objet inconnu: {value}")


KIND_RANK = {
    ObjectKind.VRF: 0,
    ObjectKind.EPG: 1,
    ObjectKind.CONTRACT: 2,
    ObjectKind.FILTER: 3,
    ObjectKind.SWITCH: 4,
}


@total_ordering
@dataclass(frozen=True)
class ObjectId:
    """
    Identifiant d'objet de politique. Ordre total : type puis nom.
    Représentation textuelle 'EPG:Web', 'Contract:Web-App', 'VRF:101'.
    """
    kind: ObjectKind
    name: str

    def __lt__(self, other):
        if not isinstance(other, ObjectId):
            return NotImplemented
        return self.sort_key < other.sort_key

    @property
    def sort_key(self):
        return (KIND_RANK[self.kind], self.name)

    def __str__(self):
        return f"{self.kind.value}:{self.name}"

    @classmethod
    def parse(cls, text):
        kind, sep, name = str(text).partition(':')
        if not sep or not name:
            raise ValueError(f"Identifiant d'objet invalide (attendu 'Type:nom'): {text}")
        return cls(ObjectKind.parse(kind), name)

    @classmethod
    def vrf(cls, name):
        return cls(ObjectKind.VRF, str(name))

    @classmethod
    def epg(cls, name):
        return cls(ObjectKind.EPG, str(name))

    @classmethod
    def contract(cls, name):
        return cls(ObjectKind.CONTRACT, str(name))

    @classmethod
    def filter(cls, name):
        return cls(ObjectKind.FILTER, str(name))

    @classmethod
    def switch(cls, name):
        return cls(ObjectKind.SWITCH, str(name))


@total_ordering
@dataclass(frozen=True)
class EpgPair:
    """Paire non orientée d'EPG, stockée dans l'ordre canonique (a < b)."""
    a: ObjectId
    b: ObjectId

    @classmethod
    def of(cls, first, second):
        if second < first:
            first, second = second, first
        return cls(first, second)

    def __lt__(self, other):
        if not isinstance(other, EpgPair):
            return NotImplemented
        return (self.a, self.b) < (other.a, other.b)

    def __iter__(self):
        yield self.a
        yield self.b

    def __str__(self):
        return f"{self.a.name}-{self.b.name}"


class ChangeAction(str, Enum):
    ADD = 'Add'
    DELETE = 'Delete'
    MODIFY = 'Modify'

    @classmethod
    def parse(cls, value):
        lowered = str(value).strip().lower()
        for action in cls:
            if action.value.lower() == lowered:
                return action
        raise ValueError(f"Action inconnue: {value}")


PROTOCOLS = ('tcp', 'udp')
DEFAULT_PROTOCOL = 'tcp'
ALLOW = 'allow'


@dataclass(frozen=True)
class Vrf:
    id: ObjectId

    @property
    def name(self):
        return self.id.name


@dataclass(frozen=True)
class Filter:
    """Filtre en liste blanche : seul 'allow' existe, le refus est implicite."""
    id: ObjectId
    port: int
    protocol: str = DEFAULT_PROTOCOL
    action: str = ALLOW

    @property
    def name(self):
        return self.id.name


@dataclass(frozen=True)
class Endpoint:
    id: str
    switch: ObjectId


@dataclass(frozen=True)
class Epg:
    id: ObjectId
    vrf: ObjectId
    endpoints: tuple = ()

    @property
    def name(self):
        return self.id.name

    @property
    def switches(self):
        return tuple(sorted({endpoint.switch for endpoint in self.endpoints}))


@dataclass(frozen=True)
class Contract:
    """
    Contrat : lie une ou plusieurs paires d'EPG à une liste de filtres.
    Les filtres s'appliquent dans les deux sens de chaque paire.
    """
    id: ObjectId
    pairs: tuple
    filters: tuple

    @property
    def name(self):
        return self.id.name

    @property
    def epg_a(self):
        return self.pairs[0].a if self.pairs else None

    @property
    def epg_b(self):
        return self.pairs[0].b if self.pairs else None


@dataclass(frozen=True)
class ChangeLogEntry:
    timestamp: int
    object: ObjectId
    action: ChangeAction


@dataclass(frozen=True)
class PolicyViolation:
    """Violation d'invariant : l'objet fautif, la règle enfreinte, un message."""
    object: Optional[ObjectId]
    rule: str
    message: str

    def __str__(self):
        subject = str(self.object) if self.object else 'policy'
        return f"{subject} [{self.rule}] {self.message}"


@dataclass(frozen=True)
class NetworkPolicy:
    """
    Graphe d'intention d'un tenant.

    Les collections sont des tuples triés par ObjectId (les doublons restent
    représentables pour que validate_policy puisse les signaler).
    """
    vrfs: tuple = ()
    epgs: tuple = ()
    contracts: tuple = ()
    filters: tuple = ()
    switches: tuple = ()

    @classmethod
    def build(cls, vrfs=(), epgs=(), contracts=(), filters=(), switches=()):
        """Construit une politique sous forme canonique (tout est trié)."""
        by_id = lambda item: item.id
        epgs = [
            replace(epg, endpoints=tuple(sorted(epg.endpoints, key=lambda ep: (ep.id, ep.switch))))
            for epg in epgs
        ]
        contracts = [
            replace(contract, pairs=tuple(sorted(contract.pairs)), filters=tuple(sorted(contract.filters)))
            for contract in contracts
        ]
        return cls(
            vrfs=tuple(sorted(vrfs, key=by_id)),
            epgs=tuple(sorted(epgs, key=by_id)),
            contracts=tuple(sorted(contracts, key=by_id)),
            filters=tuple(sorted(filters, key=by_id)),
            switches=tuple(sorted(switches)),
        )

    @cached_property
    def vrf_index(self):
        return {vrf.id: vrf for vrf in self.vrfs}

    @cached_property
    def epg_index(self):
        return {epg.id: epg for epg in self.epgs}

    @cached_property
    def contract_index(self):
        return {contract.id: contract for contract in self.contracts}

    @cached_property
    def filter_index(self):
        return {item.id: item for item in self.filters}

    @cached_property
    def contract_by_pair(self):
        index = {}
        for contract in self.contracts:
            for pair in contract.pairs:
                index.setdefault(pair, contract)
        return index

    def all_ids(self):
        ids = [item.id for item in (*self.vrfs, *self.epgs, *self.contracts, *self.filters)]
        ids.extend(self.switches)
        return sorted(ids)

    def pairs(self):
        return sorted(self.contract_by_pair)

    def is_empty(self):
        return not (self.vrfs or self.epgs or self.contracts or self.filters or self.switches)
