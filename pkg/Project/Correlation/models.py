"""
Journaux de fautes des équipements, signatures de fautes connues
et rapport de causes racines.
"""
from dataclasses import dataclass
from typing import Optional

UNKNOWN = 'Unknown'

TCAM_OVERFLOW_CODE = 'TCAM_OVERFLOW'
SWITCH_UNRESPONSIVE_CODE = 'SWITCH_UNRESPONSIVE'


@dataclass(frozen=True)
class FaultLogEntry:
    """Entrée de journal d'un switch ; end None = faute toujours active."""
    start: int
    end: Optional[int]
    switch: object
    code: str
    message: str = ''

    def active_at(self, timestamp, slack=0):
        """Active à l'instant donné : start - slack <= ts <= end + slack."""
        if self.start - slack > timestamp:
            return False
        return self.end is None or self.end + slack >= timestamp

    @property
    def sort_key(self):
        end = self.end if self.end is not None else float('inf')
        return (self.start, end, self.switch, self.code, self.message)


@dataclass(frozen=True)
class FaultSignature:
    """
    Signature de faute connue : égalité sur le code ou sous-chaîne du message.
    """
    name: str
    code_equals: Optional[str] = None
    message_contains: Optional[str] = None

    def matches(self, entry):
        if self.code_equals is not None and entry.code != self.code_equals:
            return False
        if self.message_contains is not None and self.message_contains.lower() not in entry.message.lower():
            return False
        return self.code_equals is not None or self.message_contains is not None


BUILTIN_SIGNATURES = (
    FaultSignature(name='TcamOverflow', code_equals=TCAM_OVERFLOW_CODE),
    FaultSignature(name='UnresponsiveSwitch', code_equals=SWITCH_UNRESPONSIVE_CODE),
)


@dataclass(frozen=True)
class Attribution:
    object: object
    label: str
    fault_entries: tuple = ()
    change_entries: tuple = ()


@dataclass(frozen=True)
class RootCauseReport:
    attributions: tuple = ()

    def label_of(self, object_id):
        for attribution in self.attributions:
            if attribution.object == object_id:
                return attribution.label
        return None

    def labels(self):
        return {attribution.object: attribution.label for attribution in self.attributions}
