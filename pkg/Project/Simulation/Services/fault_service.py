import random

import structlog
from django.conf import settings

from Policy.exceptions import FaultPlanError, InputError
from Policy.models import ChangeAction, ChangeLogEntry, ObjectKind
from Policy.utils import io_utils

from ..models import Fault, FaultKind, FaultPlan
from ..Serializers.simulation_serializers import FaultPlanSerializer

logger = structlog.get_logger(__name__)

# Écart entre le provisionnement et les modifications fautives,
# supérieur à toute fenêtre de récence raisonnable
CHANGE_GAP = 10000


class FaultService:
    """
    Injection de fautes (complètes ou partielles) sur les objets de politique.
    """

    def __init__(self):
        self.mix = getattr(settings, 'LOCALIZER_FULL_FAULT_MIX', 0.5)
        self.kinds = tuple(getattr(settings, 'LOCALIZER_FAULTABLE_KINDS', ['EPG', 'Contract', 'Filter']))
        self.fraction_range = (
            getattr(settings, 'LOCALIZER_PARTIAL_FRACTION_MIN', 0.01),
            getattr(settings, 'LOCALIZER_PARTIAL_FRACTION_MAX', 0.95),
        )

    def faultable_objects(self, compiled, kinds=None, scope=None):
        """Objets candidats : présents dans la provenance (sur le switch ciblé s'il y en a un)."""
        kinds = {ObjectKind.parse(kind) for kind in (kinds or self.kinds)}
        objects = set()
        for entry in compiled:
            if scope is not None and entry.rule.switch != scope:
                continue
            objects.update(object_id for object_id in entry.objects if object_id.kind in kinds)
        return sorted(objects)

    def inject_faults(self, compiled, n, mix=None, seed=0, kinds=None, scope=None, fraction_range=None):
        """
        Tire n objets distincts et leur type de faute.

        Args:
            compiled: RuleProvenance
            n: nombre de fautes
            mix: probabilité d'une faute complète
            seed: graine (le plan est reproductible)
            kinds: types d'objets éligibles
            scope: switch auquel limiter les fautes (optionnel)
            fraction_range: bornes de la fraction des fautes partielles

        Returns:
            FaultPlan

        Raises:
            FaultPlanError: n négatif ou supérieur au nombre d'objets éligibles
        """
        mix = self.mix if mix is None else mix
        low, high = fraction_range or self.fraction_range
        if not 0 <= mix <= 1:
            raise FaultPlanError(f"mix hors de [0, 1]: {mix}")
        if not 0 < low <= high < 1:
            raise FaultPlanError(f"Bornes de fraction invalides: {low}, {high}")
        if n < 0:
            raise FaultPlanError(f"Nombre de fautes négatif: {n}")

        candidates = self.faultable_objects(compiled, kinds=kinds, scope=scope)
        if n > len(candidates):
            raise FaultPlanError(
                f"{n} fautes demandées pour {len(candidates)} objets éligibles"
            )

        rng = random.Random(seed)
        chosen = sorted(rng.sample(candidates, n))
        faults = []
        for object_id in chosen:
            if rng.random() < mix:
                faults.append(Fault(object=object_id, kind=FaultKind.FULL, scope=scope))
            else:
                fraction = round(rng.uniform(low, high), 4)
                faults.append(Fault(object=object_id, kind=FaultKind.PARTIAL, fraction=fraction, scope=scope))

        plan = FaultPlan(faults=tuple(faults), seed=seed)
        logger.info(
            "faults_injected",
            seed=seed,
            faults=len(faults),
            full=sum(1 for fault in faults if fault.kind == FaultKind.FULL),
            scope=str(scope) if scope is not None else None,
        )
        return plan

    @staticmethod
    def fault_change_log(change_log, plan, gap=CHANGE_GAP):
        """
        Ajoute une entrée Modify par objet fautif, toutes au même instant de
        déploiement, après un écart qui laisse les entrées de provisionnement
        hors de la fenêtre de récence.
        """
        deployed_at = max((entry.timestamp for entry in change_log), default=0) + gap
        entries = list(change_log)
        for object_id in plan.objects():
            entries.append(ChangeLogEntry(timestamp=deployed_at, object=object_id, action=ChangeAction.MODIFY))
        return tuple(entries)

    @staticmethod
    def load_plan(path):
        data = io_utils.read_json(path, stage='simulation')
        serializer = FaultPlanSerializer(data=data)
        if not serializer.is_valid():
            messages = io_utils.flatten_errors(serializer.errors)
            raise InputError(f"{path}: " + '; '.join(messages), stage='simulation')
        return FaultPlanSerializer.to_plan(serializer.validated_data)

    @staticmethod
    def save_plan(plan, path):
        io_utils.write_json(FaultPlanSerializer.from_plan(plan), path)


# Instance globale du service
fault_service = FaultService()
