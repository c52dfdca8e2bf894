import structlog

from Policy.exceptions import ConsistencyError, InputError
from Policy.models import ObjectKind
from Policy.utils import io_utils

from ..models import AffectedElement, FailureSignature, ModelKind, RiskModel
from ..Serializers.risk_serializers import RiskModelSerializer

logger = structlog.get_logger(__name__)


class RiskModelService:
    """
    Construction des modèles de risques (switch et contrôleur)
    et augmentation par les règles manquantes.
    """

    @staticmethod
    def build_switch_model(policy, compiled, switch):
        """
        Modèle de risques d'un switch : un élément par paire d'EPG ayant des
        règles sur ce switch, relié à tous les objets de provenance de ces
        règles sauf le switch lui-même.

        Raises:
            InputError: switch inconnu ou sans règle
        """
        if switch not in set(policy.switches):
            raise InputError(f"Switch inconnu: {switch}", stage='risk-model')
        model = RiskModel(ModelKind.SWITCH, switch=switch)
        for entry in compiled:
            if entry.rule.switch != switch:
                continue
            element = AffectedElement(scope=None, pair=entry.rule.pair)
            for risk in entry.objects:
                if risk != switch:
                    model.add_edge(element, risk)
            model.provenance[entry.rule] = entry.objects
        if not model.provenance:
            raise InputError(f"Aucune règle sur le switch {switch}", stage='risk-model')

        logger.info(
            "risk_model_built",
            kind=model.kind.value,
            switch=str(switch),
            elements=model.graph.number_of_nodes() - len(model.risks()),
            edges=model.graph.number_of_edges(),
        )
        return model

    @staticmethod
    def build_controller_model(policy, compiled):
        """
        Modèle de risques du contrôleur : un triplet (switch, paire) par
        combinaison présente dans la compilation ; le switch est un risque.

        Raises:
            InputError: compilation vide
        """
        if not compiled:
            raise InputError("Compilation vide : aucun modèle à construire", stage='risk-model')
        model = RiskModel(ModelKind.CONTROLLER)
        for entry in compiled:
            element = AffectedElement(scope=entry.rule.switch, pair=entry.rule.pair)
            for risk in entry.objects:
                model.add_edge(element, risk)
            model.provenance[entry.rule] = entry.objects

        logger.info(
            "risk_model_built",
            kind=model.kind.value,
            switches=len(policy.switches),
            elements=len(model.elements()),
            edges=model.graph.number_of_edges(),
        )
        return model

    @staticmethod
    def augment(model, report):
        """
        Marque en échec les éléments et arêtes concernés par les règles manquantes.

        Seule la provenance de la règle manquante est marquée (un filtre
        voisin du même contrat reste en succès). Les règles en trop ne
        créent pas d'observation.

        Args:
            model: RiskModel
            report: MissingRuleReport

        Returns:
            tuple: (RiskModel augmenté, FailureSignature)

        Raises:
            ConsistencyError: règle manquante inconnue du modèle (modèle périmé)
        """
        augmented = model.copy()
        if augmented.kind == ModelKind.SWITCH:
            diff = report.per_switch.get(augmented.switch)
            missing = diff.missing if diff else ()
        else:
            missing = report.missing

        for rule in missing:
            objects = augmented.provenance.get(rule)
            element = augmented.element_for(rule)
            if objects is None or element not in augmented.graph:
                logger.error("risk_model_stale", rule=str(rule), element=str(element))
                raise ConsistencyError(
                    f"Règle manquante sans élément dans le modèle: {rule}", stage='augment'
                )
            for risk in objects:
                if augmented.kind == ModelKind.SWITCH and risk == augmented.switch:
                    continue
                if not augmented.graph.has_edge(element, risk):
                    raise ConsistencyError(
                        f"Arête absente {element} - {risk} pour la règle {rule}", stage='augment'
                    )
                augmented.mark_fail(element, risk)

        signature = FailureSignature(observations=frozenset(augmented.fail_elements()))
        logger.info(
            "risk_model_augmented",
            kind=augmented.kind.value,
            missing=len(missing),
            observations=len(signature),
            fail_edges=augmented.fail_edge_count(),
        )
        return augmented, signature

    @staticmethod
    def restrict_to_switch(model, switch):
        """
        Restreint un modèle contrôleur à un switch : triplets de ce switch,
        sans le risque Switch. Le résultat est un modèle de switch.
        """
        if model.kind != ModelKind.CONTROLLER:
            raise InputError("Seul un modèle contrôleur peut être restreint", stage='risk-model')
        restricted = RiskModel(ModelKind.SWITCH, switch=switch)
        for element, risk, status in model.edges():
            if element.scope != switch or risk.kind == ObjectKind.SWITCH:
                continue
            restricted.add_edge(AffectedElement(scope=None, pair=element.pair), risk, status)
        restricted.provenance = {
            rule: objects for rule, objects in model.provenance.items() if rule.switch == switch
        }
        return restricted

    @staticmethod
    def load_model(path):
        """
        Charge un dump de modèle de risques.

        Raises:
            InputError: schéma non respecté
        """
        data = io_utils.read_json(path, stage='risk-model')
        serializer = RiskModelSerializer(data=data)
        if not serializer.is_valid():
            messages = io_utils.flatten_errors(serializer.errors)
            raise InputError(f"{path}: " + '; '.join(messages), stage='risk-model')
        model = RiskModelSerializer.to_model(serializer.validated_data)
        logger.info("risk_model_loaded", path=str(path), kind=model.kind.value)
        return model

    @staticmethod
    def save_model(model, path):
        io_utils.write_json(RiskModelSerializer.from_model(model), path)

    @staticmethod
    def signature_of(model):
        """Signature d'un modèle déjà augmenté (dump rechargé)."""
        return FailureSignature(observations=frozenset(model.fail_elements()))


# Instance globale du service
risk_model_service = RiskModelService()
