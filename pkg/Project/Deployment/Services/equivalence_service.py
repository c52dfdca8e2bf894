import structlog

from Policy.exceptions import InputError

from ..models import MissingRuleReport, Rule

logger = structlog.get_logger(__name__)


class EquivalenceService:
    """
    Comparaison état désiré (L-type) / état réel (T-type).

    Les règles sont des tuples exacts en liste blanche : la différence
    ensembliste donne exactement les paquets dont le verdict diffère.
    """

    @staticmethod
    def check_equivalence(l_rules, t_rules):
        """
        Calcule les règles manquantes et en trop.

        Args:
            l_rules: règles logiques (Rule)
            t_rules: règles déployées (Rule)

        Returns:
            MissingRuleReport

        Raises:
            InputError: élément qui n'est pas une règle
        """
        desired = EquivalenceService._as_rule_set(l_rules, 'desired')
        actual = EquivalenceService._as_rule_set(t_rules, 'actual')

        report = MissingRuleReport.build(missing=desired - actual, extra=actual - desired)

        logger.info(
            "equivalence_checked",
            desired=len(desired),
            actual=len(actual),
            missing=len(report.missing),
            extra=len(report.extra),
        )
        return report

    @staticmethod
    def allows(rules, switch, vrf, src, dst, port, protocol):
        """Verdict liste blanche d'un paquet : autorisé ssi une règle le couvre exactement."""
        return any(
            rule.switch == switch and rule.vrf == vrf and rule.src == src
            and rule.dst == dst and rule.port == port and rule.protocol == protocol
            for rule in rules
        )

    @staticmethod
    def _as_rule_set(rules, field_name):
        rule_set = set()
        for index, rule in enumerate(rules):
            if not isinstance(rule, Rule):
                raise InputError(
                    f"{field_name}[{index}]: règle attendue, reçu {type(rule).__name__}",
                    stage='check',
                )
            rule_set.add(rule)
        return rule_set


# Instance globale du service
equivalence_service = EquivalenceService()
