import structlog
from django.conf import settings

from Policy.exceptions import InputError
from Policy.utils import io_utils
from Risk.models import ModelKind, Status

from ..models import (
    Algorithm,
    Hypothesis,
    HypothesisEntry,
    LocalizationState,
    RiskStats,
    Stage,
)
from ..Serializers.hypothesis_serializers import HypothesisSerializer

logger = structlog.get_logger(__name__)

SELECTIONS = ('all', 'latest')
THRESHOLD_EPSILON = 1e-9


class LocalizationService:
    """
    Localisation de fautes par couverture gloutonne du modèle de risques :
    SCOUT (ratio de hit = 1 puis journal des changements) et SCORE (seuil).
    """

    def __init__(self):
        self.window = getattr(settings, 'LOCALIZER_CHANGE_WINDOW', 10)
        self.selection = getattr(settings, 'LOCALIZER_CHANGE_SELECTION', 'all')
        self.threshold = getattr(settings, 'LOCALIZER_SCORE_THRESHOLD', 1.0)

    def compute_stats(self, model, signature):
        """
        Statistiques de chaque risque du modèle pour une signature.

        Args:
            model: RiskModel augmenté
            signature: FailureSignature

        Returns:
            dict: ObjectId → RiskStats

        Raises:
            InputError: signature vide ou étrangère au modèle
        """
        self._check_signature(model, signature)
        unexplained = set(signature.observations)
        return self._stats(model.graph, unexplained, model.risks())

    @staticmethod
    def pick_candidates(stats):
        """
        Risques de ratio de hit 1 qui couvrent le plus d'observations
        non expliquées ; toutes les égalités, triées par ObjectId.
        """
        full_hits = [item for item in stats.values() if item.full_hit]
        if not full_hits:
            return []
        best = max(len(item.o) for item in full_hits)
        return sorted(item.risk for item in full_hits if len(item.o) == best)

    def scout(self, signature, model, change_log=(), window=None, selection=None):
        """
        Algorithme SCOUT.

        Étape 1 : tant que des observations restent non expliquées, choisir
        les risques de ratio de hit 1 de couverture maximale, élaguer leurs
        voisins et les ajouter à l'hypothèse.
        Étape 2 : pour chaque observation restante, ajouter ses risques en
        échec modifiés récemment d'après le journal des changements.

        Args:
            signature: FailureSignature non vide
            model: RiskModel augmenté
            change_log: ChangeLogEntry
            window: largeur de la fenêtre de récence
            selection: 'all' ou 'latest'

        Returns:
            Hypothesis
        """
        window = self.window if window is None else window
        selection = self.selection if selection is None else selection
        if selection not in SELECTIONS:
            raise InputError(f"Sélection inconnue: {selection}", stage='localize')
        if window < 0:
            raise InputError(f"Fenêtre négative: {window}", stage='localize')
        self._check_signature(model, signature)

        state = self._initial_state(model, signature)
        iterations = 0
        while state.unexplained:
            stats = self._stats(state.graph, state.unexplained, self._adjacent_risks(state))
            faulty = self.pick_candidates(stats)
            if not faulty:
                break
            iterations += 1
            for risk in faulty:
                covered = sorted(stats[risk].o)
                state.hypothesis.append(HypothesisEntry(risk, Stage.HIT_COVERAGE, tuple(covered)))
            self._prune(state, faulty)
            logger.debug(
                "scout_iteration",
                iteration=iterations,
                chosen=[str(risk) for risk in faulty],
                unexplained=len(state.unexplained),
            )

        if state.unexplained and change_log:
            self._change_log_stage(state, change_log, window, selection)

        hypothesis = self._finish(state, model, Algorithm.SCOUT, iterations)
        logger.info(
            "localization_finished",
            algo=hypothesis.algo,
            observations=len(signature),
            hypothesis=[str(item) for item in hypothesis.objects()],
            residual=len(hypothesis.residual),
            iterations=iterations,
        )
        return hypothesis

    def score(self, signature, model, threshold=None):
        """
        Algorithme SCORE : à chaque itération, parmi les risques dont le
        ratio de hit atteint le seuil, choisir celui de plus grande
        couverture (égalité : ObjectId), élaguer ses voisins, recommencer
        tant qu'une observation peut encore être couverte.
        """
        threshold = self.threshold if threshold is None else threshold
        if not 0 < threshold <= 1:
            raise InputError(f"Seuil hors de ]0, 1]: {threshold}", stage='localize')
        self._check_signature(model, signature)

        state = self._initial_state(model, signature)
        iterations = 0
        while state.unexplained:
            stats = self._stats(state.graph, state.unexplained, self._adjacent_risks(state))
            eligible = [
                item for item in stats.values()
                if item.o and len(item.o) >= threshold * len(item.g) - THRESHOLD_EPSILON
            ]
            if not eligible:
                break
            chosen = min(eligible, key=lambda item: (-len(item.o), item.risk.sort_key))
            iterations += 1
            state.hypothesis.append(
                HypothesisEntry(chosen.risk, Stage.HIT_COVERAGE, tuple(sorted(chosen.o)))
            )
            self._prune(state, [chosen.risk])

        hypothesis = self._finish(state, model, Algorithm.SCORE, iterations)
        logger.info(
            "localization_finished",
            algo=hypothesis.algo,
            threshold=threshold,
            observations=len(signature),
            hypothesis=[str(item) for item in hypothesis.objects()],
            residual=len(hypothesis.residual),
            iterations=iterations,
        )
        return hypothesis

    def localize(self, signature, model, algo='scout', change_log=(), window=None,
                 selection=None, threshold=None):
        """Point d'entrée commun aux deux algorithmes."""
        if algo == Algorithm.SCOUT.value:
            return self.scout(signature, model, change_log, window=window, selection=selection)
        if algo == Algorithm.SCORE.value:
            return self.score(signature, model, threshold=threshold)
        raise InputError(f"Algorithme inconnu: {algo}", stage='localize')

    @staticmethod
    def load_hypothesis(path):
        data = io_utils.read_json(path, stage='correlate')
        serializer = HypothesisSerializer(data=data)
        if not serializer.is_valid():
            messages = io_utils.flatten_errors(serializer.errors)
            raise InputError(f"{path}: " + '; '.join(messages), stage='correlate')
        return HypothesisSerializer.to_hypothesis(serializer.validated_data)

    @staticmethod
    def save_hypothesis(hypothesis, path):
        io_utils.write_json(HypothesisSerializer.from_hypothesis(hypothesis), path)

    @staticmethod
    def _check_signature(model, signature):
        if not signature.observations:
            logger.warning("empty_signature")
            raise InputError("Signature de faute vide : rien à localiser", stage='localize')
        unknown = [element for element in signature.observations if element not in model.graph]
        if unknown:
            raise InputError(
                f"Observation absente du modèle: {sorted(unknown)[0]}", stage='localize'
            )

    @staticmethod
    def _initial_state(model, signature):
        return LocalizationState(
            unexplained=set(signature.observations),
            explained=set(),
            hypothesis=[],
            candidates=set(),
            graph=model.graph.copy(),
        )

    @staticmethod
    def _adjacent_risks(state):
        """K : risques reliés par une arête en échec à une observation non expliquée."""
        risks = set()
        for element in state.unexplained:
            for risk, attrs in state.graph.adj[element].items():
                if attrs['status'] == Status.FAIL:
                    risks.add(risk)
        state.candidates = risks
        return sorted(risks)

    @staticmethod
    def _stats(graph, unexplained, risks):
        stats = {}
        observations = len(unexplained)
        for risk in risks:
            neighbours = graph.adj[risk]
            failed = frozenset(
                element for element, attrs in neighbours.items()
                if element in unexplained and attrs['status'] == Status.FAIL
            )
            stats[risk] = RiskStats(
                risk=risk, g=frozenset(neighbours), o=failed, observations=observations,
            )
        return stats

    @staticmethod
    def _prune(state, risks):
        """Retire du graphe de travail tous les éléments voisins des risques choisis."""
        pruned = set()
        for risk in risks:
            pruned.update(state.graph.adj[risk])
        for element in pruned:
            if element in state.unexplained:
                state.unexplained.discard(element)
                state.explained.add(element)
        state.graph.remove_nodes_from(pruned)

    @staticmethod
    def _change_log_stage(state, change_log, window, selection):
        latest = max(entry.timestamp for entry in change_log)
        recent = {}
        for entry in change_log:
            if entry.timestamp >= latest - window:
                recent[entry.object] = max(recent.get(entry.object, entry.timestamp), entry.timestamp)

        positions = {entry.object: index for index, entry in enumerate(state.hypothesis)}
        covered = {}
        for element in sorted(state.unexplained):
            matches = sorted(
                (risk for risk, attrs in state.graph.adj[element].items()
                 if attrs['status'] == Status.FAIL and risk in recent),
                key=lambda risk: (-recent[risk], risk.sort_key),
            )
            if selection == 'latest':
                matches = matches[:1]
            for risk in matches:
                covered.setdefault(risk, []).append(element)
                if risk not in positions:
                    positions[risk] = len(state.hypothesis)
                    state.hypothesis.append(HypothesisEntry(risk, Stage.CHANGE_LOG, ()))
            if matches:
                state.unexplained.discard(element)
                state.explained.add(element)

        for risk, elements in covered.items():
            index = positions[risk]
            entry = state.hypothesis[index]
            merged = tuple(sorted(set(entry.covered) | set(elements)))
            state.hypothesis[index] = HypothesisEntry(entry.object, entry.stage, merged)
        logger.debug(
            "change_log_stage",
            matched=len(covered),
            residual=len(state.unexplained),
        )

    @staticmethod
    def _finish(state, model, algo, iterations):
        return Hypothesis(
            entries=tuple(state.hypothesis),
            residual=tuple(sorted(state.unexplained)),
            algo=algo.value,
            iterations=iterations,
            model_switch=model.switch if model.kind == ModelKind.SWITCH else None,
        )


# Instance globale du service
localization_service = LocalizationService()
