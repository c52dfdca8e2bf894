import random
from decimal import Decimal, ROUND_HALF_UP

import structlog

from Correlation.models import FaultLogEntry, TCAM_OVERFLOW_CODE
from Policy.exceptions import FaultPlanError
from Simulation.models import FaultKind

from ..models import DeploymentResult, TcamStore

logger = structlog.get_logger(__name__)


class TcamService:
    """
    TCAM simulée : installe les règles compilées, applique le plan de fautes
    puis la capacité de chaque switch.
    """

    @staticmethod
    def partial_count(fraction, total):
        """
        Nombre de règles retirées par une faute partielle :
        arrondi au demi supérieur, au moins 1, au plus total - 1 si total >= 2.
        """
        if total <= 0:
            return 0
        count = int((Decimal(str(fraction)) * total).quantize(Decimal('1'), rounding=ROUND_HALF_UP))
        count = max(1, count)
        if total >= 2:
            count = min(count, total - 1)
        return min(count, total)

    @staticmethod
    def removed_rules(compiled, plan):
        """
        Règles retirées par le plan de fautes.

        Returns:
            set: Rule retirées

        Raises:
            FaultPlanError: objet ou switch absent de la compilation, fraction invalide
        """
        if plan is None or not plan.faults:
            return set()
        known_objects = set()
        for entry in compiled:
            known_objects |= entry.objects
        known_switches = {entry.rule.switch for entry in compiled}

        removed = set()
        for fault in plan.faults:
            if fault.object not in known_objects:
                raise FaultPlanError(f"Objet absent de la compilation: {fault.object}")
            if fault.scope is not None and fault.scope not in known_switches:
                raise FaultPlanError(f"Switch absent de la compilation: {fault.scope}")
            derived = sorted(
                entry.rule for entry in compiled
                if fault.object in entry.objects
                and (fault.scope is None or entry.rule.switch == fault.scope)
            )
            if not derived:
                raise FaultPlanError(
                    f"Aucune règle dérivée de {fault.object} sur {fault.scope}"
                )
            if fault.kind == FaultKind.FULL:
                removed.update(derived)
                continue
            if fault.fraction is None or not 0 < fault.fraction < 1:
                raise FaultPlanError(
                    f"Fraction de faute partielle invalide pour {fault.object}: {fault.fraction}"
                )
            count = TcamService.partial_count(fault.fraction, len(derived))
            rng = random.Random(f"{plan.seed}:{fault.object}:{fault.scope}")
            removed.update(rng.sample(derived, count))
        return removed

    @staticmethod
    def deploy(compiled, plan=None, capacities=None, timestamp=0):
        """
        Déploie les règles compilées dans les TCAM des switches.

        Args:
            compiled: RuleProvenance dans l'ordre de compilation
            plan: FaultPlan (optionnel)
            capacities: dict switch → capacité (absent = non borné)
            timestamp: horodatage des entrées de débordement

        Returns:
            DeploymentResult: magasins par switch et journal de fautes
        """
        capacities = capacities or {}
        removed = TcamService.removed_rules(compiled, plan)

        per_switch = {}
        for entry in compiled:
            per_switch.setdefault(entry.rule.switch, [])
            if entry.rule not in removed:
                per_switch[entry.rule.switch].append(entry.rule)
        for switch in capacities:
            per_switch.setdefault(switch, [])

        stores = {}
        fault_log = []
        for switch in sorted(per_switch):
            rules = per_switch[switch]
            capacity = capacities.get(switch)
            if capacity is not None and len(rules) > capacity:
                dropped = len(rules) - capacity
                rules = rules[:capacity]
                fault_log.append(FaultLogEntry(
                    start=timestamp,
                    end=None,
                    switch=switch,
                    code=TCAM_OVERFLOW_CODE,
                    message=f"TCAM pleine : {dropped} règle(s) non installée(s)",
                ))
                logger.warning("tcam_overflow", switch=str(switch), capacity=capacity, dropped=dropped)
            stores[switch] = TcamStore(switch=switch, capacity=capacity, rules=tuple(rules))

        logger.info(
            "rules_deployed",
            switches=len(stores),
            removed_by_faults=len(removed),
            overflows=len(fault_log),
        )
        return DeploymentResult(stores=stores, fault_log=tuple(fault_log))


# Instance globale du service
tcam_service = TcamService()
