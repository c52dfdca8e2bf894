import structlog

from ..models import Rule, RuleProvenance

logger = structlog.get_logger(__name__)


class CompilerService:
    """
    Compilation de la politique d'intention en règles logiques par switch,
    comme le ferait une chaîne contrôleur + agent correcte.
    """

    @staticmethod
    def compile(policy):
        """
        Compile la politique en règles avec leur provenance.

        Ordre d'émission (aussi priorité d'installation en TCAM) :
        contrats, paires, filtres, sens (a→b puis b→a), switches hôtes.
        Une règle de la paire (A, B) est installée sur chaque switch
        hébergeant un endpoint de A ou de B.

        Args:
            policy: NetworkPolicy valide (validate_policy vide)

        Returns:
            tuple: RuleProvenance, sans doublon
        """
        hosting = {epg.id: set(epg.switches) for epg in policy.epgs}
        compiled = []
        for contract in policy.contracts:
            for pair in contract.pairs:
                vrf = policy.epg_index[pair.a].vrf
                switches = sorted(hosting[pair.a] | hosting[pair.b])
                for filter_id in contract.filters:
                    item = policy.filter_index[filter_id]
                    for src, dst in ((pair.a, pair.b), (pair.b, pair.a)):
                        for switch in switches:
                            rule = Rule(
                                switch=switch,
                                vrf=vrf,
                                src=src,
                                dst=dst,
                                port=item.port,
                                protocol=item.protocol,
                                action=item.action,
                            )
                            objects = frozenset((vrf, src, dst, contract.id, filter_id, switch))
                            compiled.append(RuleProvenance(rule=rule, objects=objects))

        logger.info(
            "rules_compiled",
            contracts=len(policy.contracts),
            rules=len(compiled),
            switches=len({entry.rule.switch for entry in compiled}),
        )
        return tuple(compiled)

    @staticmethod
    def rules_of(compiled, switch=None):
        """Règles seules, éventuellement restreintes à un switch, dans l'ordre de compilation."""
        return tuple(
            entry.rule for entry in compiled
            if switch is None or entry.rule.switch == switch
        )

    @staticmethod
    def provenance_index(compiled):
        return {entry.rule: entry.objects for entry in compiled}


# Instance globale du service
compiler_service = CompilerService()
