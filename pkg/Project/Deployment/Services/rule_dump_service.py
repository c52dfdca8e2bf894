import structlog

from Policy.exceptions import InputError
from Policy.utils import io_utils

from ..Serializers.rule_serializers import MissingRuleReportSerializer, RuleSerializer

logger = structlog.get_logger(__name__)


class RuleDumpService:
    """
    Lecture / écriture des dumps de règles et des rapports d'équivalence.
    """

    @staticmethod
    def load_rules(path):
        """
        Charge un dump de règles (JSON lines).

        Raises:
            InputError: ligne non conforme au schéma (le champ fautif est nommé)
        """
        rules = []
        for line_number, record in io_utils.read_json_lines(path, stage='check'):
            serializer = RuleSerializer(data=record)
            if not serializer.is_valid():
                messages = io_utils.flatten_errors(serializer.errors)
                raise InputError(f"{path}: ligne {line_number}: " + '; '.join(messages), stage='check')
            rules.append(RuleSerializer.to_rule(serializer.validated_data))
        logger.info("rules_loaded", path=str(path), rules=len(rules))
        return tuple(rules)

    @staticmethod
    def save_rules(rules, path):
        io_utils.write_json_lines((RuleSerializer.from_rule(rule) for rule in rules), path)
        logger.info("rules_saved", path=str(path))

    @staticmethod
    def load_report(path):
        data = io_utils.read_json(path, stage='check')
        serializer = MissingRuleReportSerializer(data=data)
        if not serializer.is_valid():
            messages = io_utils.flatten_errors(serializer.errors)
            raise InputError(f"{path}: " + '; '.join(messages), stage='check')
        return MissingRuleReportSerializer.to_report(serializer.validated_data)

    @staticmethod
    def save_report(report, path):
        io_utils.write_json(MissingRuleReportSerializer.from_report(report), path)


# Instance globale du service
rule_dump_service = RuleDumpService()
