import structlog
from collections import Counter
from dataclasses import replace

from ..exceptions import PolicyParseError
from ..models import (
    ALLOW,
    PROTOCOLS,
    ChangeAction,
    ChangeLogEntry,
    NetworkPolicy,
    ObjectKind,
    PolicyViolation,
)
from ..Serializers.policy_serializers import ChangeLogEntrySerializer, PolicyDocumentSerializer
from ..utils import io_utils

logger = structlog.get_logger(__name__)

PORT_MIN = 0
PORT_MAX = 65535


class PolicyService:
    """
    Service de gestion des politiques : validation, chargement, sauvegarde,
    journal des changements.
    """

    @staticmethod
    def validate_policy(policy):
        """
        Vérifie tous les invariants de la politique.

        Args:
            policy: NetworkPolicy

        Returns:
            list: PolicyViolation, vide si la politique est valide
        """
        violations = []

        def report(object_id, rule, message):
            violations.append(PolicyViolation(object_id, rule, message))

        # Identifiants uniques et types cohérents
        collections = (
            (policy.vrfs, ObjectKind.VRF),
            (policy.epgs, ObjectKind.EPG),
            (policy.contracts, ObjectKind.CONTRACT),
            (policy.filters, ObjectKind.FILTER),
        )
        for items, kind in collections:
            for item in items:
                if item.id.kind != kind:
                    report(item.id, 'kind', f"attendu un objet de type {kind.value}")
            for object_id, count in sorted(Counter(item.id for item in items).items()):
                if count > 1:
                    report(object_id, 'unique_id', f"identifiant défini {count} fois")
        for switch in policy.switches:
            if switch.kind != ObjectKind.SWITCH:
                report(switch, 'kind', "attendu un objet de type Switch")
        for switch, count in sorted(Counter(policy.switches).items()):
            if count > 1:
                report(switch, 'unique_id', f"switch déclaré {count} fois")

        switches = set(policy.switches)

        for item in policy.filters:
            if not PORT_MIN <= item.port <= PORT_MAX:
                report(item.id, 'port_range', f"port {item.port} hors de {PORT_MIN}-{PORT_MAX}")
            if item.protocol not in PROTOCOLS:
                report(item.id, 'protocol', f"protocole inconnu: {item.protocol}")
            if item.action != ALLOW:
                report(item.id, 'action_allow', f"seule l'action '{ALLOW}' est autorisée, reçu '{item.action}'")

        placed = {}
        for epg in policy.epgs:
            if epg.vrf not in policy.vrf_index:
                report(epg.id, 'referential_integrity', f"VRF inexistante: {epg.vrf}")
            for endpoint in epg.endpoints:
                if endpoint.switch not in switches:
                    report(epg.id, 'endpoint_placement',
                           f"endpoint {endpoint.id} placé sur un switch inexistant: {endpoint.switch}")
                if endpoint.id in placed:
                    report(epg.id, 'endpoint_unique',
                           f"endpoint {endpoint.id} déjà placé (sur {placed[endpoint.id]})")
                else:
                    placed[endpoint.id] = endpoint.switch

        pair_owner = {}
        for contract in policy.contracts:
            if not contract.pairs:
                report(contract.id, 'contract_pairs', "aucune paire d'EPG")
            for pair in contract.pairs:
                if pair.a == pair.b:
                    report(contract.id, 'pair_distinct', f"paire réflexive sur {pair.a}")
                    continue
                if not pair.a < pair.b:
                    report(contract.id, 'pair_order', f"paire non canonique {pair.a}/{pair.b}")
                missing = [epg for epg in pair if epg not in policy.epg_index]
                for epg in missing:
                    report(contract.id, 'referential_integrity', f"EPG inexistant: {epg}")
                if not missing:
                    vrf_a = policy.epg_index[pair.a].vrf
                    vrf_b = policy.epg_index[pair.b].vrf
                    if vrf_a != vrf_b:
                        report(contract.id, 'same_vrf',
                               f"{pair.a} ({vrf_a}) et {pair.b} ({vrf_b}) sont dans des VRF différentes")
                owner = pair_owner.setdefault(pair, contract.id)
                if owner != contract.id:
                    report(contract.id, 'one_contract_per_pair', f"paire {pair} déjà couverte par {owner}")

            if not contract.filters:
                report(contract.id, 'contract_filters', "aucun filtre")
            matches = Counter()
            for filter_id in contract.filters:
                item = policy.filter_index.get(filter_id)
                if item is None:
                    report(contract.id, 'referential_integrity', f"filtre inexistant: {filter_id}")
                    continue
                matches[(item.port, item.protocol)] += 1
            for (port, protocol), count in sorted(matches.items()):
                if count > 1:
                    report(contract.id, 'filter_match_unique',
                           f"{count} filtres pour {protocol}/{port}")

        if violations:
            logger.debug("policy_violations_found", count=len(violations))
        return violations

    @staticmethod
    def load_policy(path):
        """
        Charge une politique depuis un fichier JSON.

        Raises:
            PolicyParseError: JSON invalide ou schéma non respecté
        """
        data = io_utils.read_json(path)
        serializer = PolicyDocumentSerializer(data=data)
        if not serializer.is_valid():
            messages = io_utils.flatten_errors(serializer.errors)
            raise PolicyParseError(f"{path}: " + '; '.join(messages))
        policy = PolicyDocumentSerializer.to_policy(serializer.validated_data)
        logger.info(
            "policy_loaded",
            path=str(path),
            epgs=len(policy.epgs),
            contracts=len(policy.contracts),
            filters=len(policy.filters),
            switches=len(policy.switches),
        )
        return policy

    @staticmethod
    def save_policy(policy, path):
        io_utils.write_json(PolicyDocumentSerializer.from_policy(policy), path)
        logger.info("policy_saved", path=str(path))

    @staticmethod
    def load_change_log(path):
        """
        Charge un journal des changements (JSON lines).

        Returns:
            tuple: ChangeLogEntry dans l'ordre du fichier

        Raises:
            PolicyParseError: ligne invalide ou timestamps décroissants
        """
        entries = []
        for line_number, record in io_utils.read_json_lines(path):
            serializer = ChangeLogEntrySerializer(data=record)
            if not serializer.is_valid():
                messages = io_utils.flatten_errors(serializer.errors)
                raise PolicyParseError(f"{path}: ligne {line_number}: " + '; '.join(messages))
            entry = ChangeLogEntrySerializer.to_entry(serializer.validated_data)
            if entries and entry.timestamp < entries[-1].timestamp:
                raise PolicyParseError(
                    f"{path}: ligne {line_number}: timestamp {entry.timestamp} "
                    f"antérieur au précédent ({entries[-1].timestamp})"
                )
            entries.append(entry)
        logger.info("change_log_loaded", path=str(path), entries=len(entries))
        return tuple(entries)

    @staticmethod
    def save_change_log(entries, path):
        io_utils.write_json_lines(
            (ChangeLogEntrySerializer.from_entry(entry) for entry in entries), path
        )

    @staticmethod
    def policy_change_log(policy, start=1):
        """
        Journal de provisionnement : une entrée Add par objet,
        timestamps start, start+1, ... dans l'ordre des ObjectId.
        """
        return tuple(
            ChangeLogEntry(timestamp=start + index, object=object_id, action=ChangeAction.ADD)
            for index, object_id in enumerate(policy.all_ids())
        )

    @staticmethod
    def remove_object(policy, object_id):
        """
        Retourne une nouvelle politique sans l'objet ni ce qui en dépend
        (paires, filtres référencés, contrats vides, EPG d'une VRF supprimée,
        endpoints d'un switch supprimé).
        """
        kind = object_id.kind
        vrfs = [vrf for vrf in policy.vrfs if vrf.id != object_id]
        filters = [item for item in policy.filters if item.id != object_id]
        switches = [switch for switch in policy.switches if switch != object_id]

        removed_epgs = set()
        epgs = []
        for epg in policy.epgs:
            if epg.id == object_id or (kind == ObjectKind.VRF and epg.vrf == object_id):
                removed_epgs.add(epg.id)
                continue
            if kind == ObjectKind.SWITCH:
                epg = replace(epg, endpoints=tuple(
                    endpoint for endpoint in epg.endpoints if endpoint.switch != object_id
                ))
            epgs.append(epg)

        contracts = []
        for contract in policy.contracts:
            if contract.id == object_id:
                continue
            pairs = tuple(
                pair for pair in contract.pairs
                if pair.a not in removed_epgs and pair.b not in removed_epgs
            )
            contract_filters = tuple(f for f in contract.filters if f != object_id)
            if not pairs or not contract_filters:
                continue
            contracts.append(replace(contract, pairs=pairs, filters=contract_filters))

        logger.debug("policy_object_removed", object=str(object_id))
        return NetworkPolicy.build(
            vrfs=vrfs, epgs=epgs, contracts=contracts, filters=filters, switches=switches,
        )


# Instance globale du service
policy_service = PolicyService()
