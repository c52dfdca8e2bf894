import structlog
from django.conf import settings

from Policy.exceptions import InputError
from Policy.models import ObjectKind
from Policy.utils import io_utils

from ..models import BUILTIN_SIGNATURES, UNKNOWN, Attribution, RootCauseReport
from ..Serializers.log_serializers import (
    FaultLogEntrySerializer,
    FaultSignatureSerializer,
    RootCauseReportSerializer,
)

logger = structlog.get_logger(__name__)


class CorrelationService:
    """
    Moteur de corrélation : relie les objets de l'hypothèse aux journaux
    de changements et de fautes pour nommer la cause physique.
    """

    def __init__(self):
        self.slack = getattr(settings, 'LOCALIZER_CORRELATION_SLACK', 0)
        self.signatures_path = getattr(settings, 'LOCALIZER_SIGNATURES_PATH', '')

    def correlate(self, hypothesis, change_log, fault_log, signatures=None, slack=None):
        """
        Attribue une étiquette à chaque objet de l'hypothèse.

        Pour chaque objet : ses entrées de changement, puis les entrées de
        faute actives à l'un de ces instants sur les switches concernés,
        puis la première signature qui reconnaît une de ces entrées.

        Args:
            hypothesis: Hypothesis
            change_log: ChangeLogEntry
            fault_log: FaultLogEntry
            signatures: FaultSignature ordonnées (défaut : intégrées + fichier configuré)
            slack: tolérance temporelle

        Returns:
            RootCauseReport
        """
        slack = self.slack if slack is None else slack
        if slack < 0:
            raise InputError(f"Tolérance négative: {slack}", stage='correlate')
        if signatures is None:
            signatures = self.default_signatures()

        changes_by_object = {}
        for entry in change_log:
            changes_by_object.setdefault(entry.object, []).append(entry)
        ordered_faults = sorted(fault_log, key=lambda entry: entry.sort_key)

        attributions = []
        for hypothesis_entry in hypothesis.entries:
            object_id = hypothesis_entry.object
            changes = changes_by_object.get(object_id, [])
            if not changes:
                attributions.append(Attribution(object=object_id, label=UNKNOWN))
                continue

            switches = self._switches_in_scope(hypothesis, hypothesis_entry)
            faults = [
                fault for fault in ordered_faults
                if (switches is None or fault.switch in switches)
                and any(fault.active_at(change.timestamp, slack) for change in changes)
            ]
            label = UNKNOWN
            for signature in signatures:
                if any(signature.matches(fault) for fault in faults):
                    label = signature.name
                    break
            if faults:
                evidence_changes = [
                    change for change in changes
                    if any(fault.active_at(change.timestamp, slack) for fault in faults)
                ]
            else:
                evidence_changes = changes
            attributions.append(Attribution(
                object=object_id,
                label=label,
                fault_entries=tuple(faults),
                change_entries=tuple(evidence_changes),
            ))
            logger.debug("object_correlated", object=str(object_id), label=label, faults=len(faults))

        report = RootCauseReport(attributions=tuple(attributions))
        logger.info(
            "correlation_finished",
            objects=len(attributions),
            labels={str(item.object): item.label for item in attributions},
        )
        return report

    def default_signatures(self):
        """Signatures intégrées, suivies de celles du fichier configuré."""
        signatures = list(BUILTIN_SIGNATURES)
        if self.signatures_path:
            signatures.extend(self.load_signatures(self.signatures_path))
        self._check_unique(signatures)
        return tuple(signatures)

    @staticmethod
    def with_builtins(extra):
        signatures = list(BUILTIN_SIGNATURES) + list(extra)
        CorrelationService._check_unique(signatures)
        return tuple(signatures)

    @staticmethod
    def load_signatures(path):
        """
        Charge un fichier de signatures (liste JSON).

        Raises:
            InputError: schéma invalide ou noms en double
        """
        data = io_utils.read_json(path, stage='correlate')
        if not isinstance(data, list):
            raise InputError(f"{path}: une liste de signatures est attendue", stage='correlate')
        serializer = FaultSignatureSerializer(data=data, many=True)
        if not serializer.is_valid():
            messages = io_utils.flatten_errors(serializer.errors)
            raise InputError(f"{path}: " + '; '.join(messages), stage='correlate')
        signatures = [FaultSignatureSerializer.to_signature(item) for item in serializer.validated_data]
        CorrelationService._check_unique(signatures)
        return tuple(signatures)

    @staticmethod
    def load_fault_log(path):
        entries = []
        for line_number, record in io_utils.read_json_lines(path, stage='correlate'):
            serializer = FaultLogEntrySerializer(data=record)
            if not serializer.is_valid():
                messages = io_utils.flatten_errors(serializer.errors)
                raise InputError(f"{path}: ligne {line_number}: " + '; '.join(messages), stage='correlate')
            entries.append(FaultLogEntrySerializer.to_entry(serializer.validated_data))
        logger.info("fault_log_loaded", path=str(path), entries=len(entries))
        return tuple(entries)

    @staticmethod
    def save_fault_log(entries, path):
        io_utils.write_json_lines((FaultLogEntrySerializer.from_entry(entry) for entry in entries), path)

    @staticmethod
    def save_report(report, path):
        io_utils.write_json(RootCauseReportSerializer.from_report(report), path)

    @staticmethod
    def _switches_in_scope(hypothesis, entry):
        """
        Switches concernés par un objet : lui-même s'il s'agit d'un switch,
        sinon ceux des observations couvertes, sinon le switch du modèle.
        None signifie tous les switches.
        """
        if entry.object.kind == ObjectKind.SWITCH:
            return {entry.object}
        scopes = {element.scope for element in entry.covered if element.scope is not None}
        if scopes:
            return scopes
        if hypothesis.model_switch is not None:
            return {hypothesis.model_switch}
        return None

    @staticmethod
    def _check_unique(signatures):
        names = [signature.name for signature in signatures]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise InputError(f"Signatures en double: {', '.join(duplicates)}", stage='correlate')


# Instance globale du service
correlation_service = CorrelationService()
