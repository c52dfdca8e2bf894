"""
Règles logiques (L-type) et déployées (T-type), provenance, magasins TCAM.
"""
from dataclasses import dataclass, field
from functools import total_ordering
from typing import Optional

from Policy.models import ALLOW, DEFAULT_PROTOCOL, EpgPair, ObjectKind


@total_ordering
@dataclass(frozen=True)
class Rule:
    """
    Tuple d'autorisation exact (liste blanche). Le refus final implicite
    n'est jamais matérialisé.
    """
    switch: object
    vrf: object
    src: object
    dst: object
    port: int
    protocol: str = DEFAULT_PROTOCOL
    action: str = ALLOW

    @property
    def key(self):
        return (self.switch, self.vrf, self.src, self.dst, self.port, self.protocol, self.action)

    @property
    def pair(self):
        return EpgPair.of(self.src, self.dst)

    def __lt__(self, other):
        if not isinstance(other, Rule):
            return NotImplemented
        return self.key < other.key

    def __str__(self):
        return (f"{self.switch.name} {self.vrf.name} {self.src.name}->{self.dst.name} "
                f"{self.protocol}/{self.port} {self.action}")


@dataclass(frozen=True)
class RuleProvenance:
    """
    Règle et ensemble exact des objets dont la défaillance l'invalide :
    VRF, EPG source et destination, contrat, filtre, switch.
    """
    rule: Rule
    objects: frozenset

    def of_kind(self, kind):
        return sorted(object_id for object_id in self.objects if object_id.kind == kind)

    @property
    def contract(self):
        return self.of_kind(ObjectKind.CONTRACT)[0]

    @property
    def filter(self):
        return self.of_kind(ObjectKind.FILTER)[0]


@dataclass(frozen=True)
class TcamStore:
    """Magasin TCAM d'un switch ; capacity None = non borné."""
    switch: object
    capacity: Optional[int]
    rules: tuple = ()

    def __len__(self):
        return len(self.rules)

    def __contains__(self, rule):
        return rule in set(self.rules)


@dataclass(frozen=True)
class SwitchDiff:
    missing: tuple = ()
    extra: tuple = ()


@dataclass(frozen=True)
class MissingRuleReport:
    """
    Écart entre état désiré (L) et état réel (T).
    missing = L \\ T, extra = T \\ L, triés ; per_switch partitionne les deux.
    """
    missing: tuple = ()
    extra: tuple = ()
    per_switch: dict = field(default_factory=dict)

    def is_empty(self):
        return not self.missing and not self.extra

    @classmethod
    def build(cls, missing, extra):
        """Trie les règles et les partitionne par switch."""
        missing = tuple(sorted(missing))
        extra = tuple(sorted(extra))
        grouped = {}
        for rule in missing:
            grouped.setdefault(rule.switch, ([], []))[0].append(rule)
        for rule in extra:
            grouped.setdefault(rule.switch, ([], []))[1].append(rule)
        per_switch = {
            switch: SwitchDiff(missing=tuple(grouped[switch][0]), extra=tuple(grouped[switch][1]))
            for switch in sorted(grouped)
        }
        return cls(missing=missing, extra=extra, per_switch=per_switch)


@dataclass(frozen=True)
class DeploymentResult:
    stores: dict
    fault_log: tuple = ()

    def deployed_rules(self):
        """Toutes les règles T-type, switch par switch."""
        rules = []
        for switch in sorted(self.stores):
            rules.extend(self.stores[switch].rules)
        return tuple(rules)
