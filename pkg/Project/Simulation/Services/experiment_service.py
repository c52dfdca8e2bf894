import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import django
import numpy as np
import pandas as pd
import structlog
from django.conf import settings

from Deployment.Services.compiler_service import compiler_service
from Deployment.Services.equivalence_service import equivalence_service
from Deployment.Services.tcam_service import tcam_service
from Localization.models import Hypothesis
from Localization.Services.localization_service import localization_service
from Policy.exceptions import InputError
from Policy.Services.policy_service import policy_service
from Risk.models import ModelKind
from Risk.Services.risk_model_service import risk_model_service

from ..models import TrialParams, TrialResult
from .fault_service import fault_service
from .generator_service import generator_service

logger = structlog.get_logger(__name__)

CSV_COLUMNS = ['run', 'algo', 'faults', 'precision', 'recall', 'gamma', 'runtime_ms']
METRIC_COLUMNS = ['precision', 'recall', 'gamma', 'runtime_ms']


def _init_worker():
    """Initialisation d'un processus de calcul : Django doit être configuré."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'Project.settings')
    django.setup()


def _run_task(task):
    """Un tirage de fautes évalué par chaque algorithme (exécuté dans un worker)."""
    policy, compiled, faults, run, algos, params = task
    return experiment_service.evaluate_run(policy, compiled, faults, run, algos, params)


class ExperimentService:
    """
    Orchestration des expériences : essai de bout en bout, balayage
    (nombre de fautes × algorithmes × essais), passage à l'échelle.
    """

    def __init__(self):
        self.workers = getattr(settings, 'LOCALIZER_WORKERS', 1)

    @staticmethod
    def metrics(ground_truth, hypothesis_objects, suspects):
        """
        Précision, rappel et gamma.

        H vide : précision 1 si G est vide, 0 sinon. G vide : rappel 1.
        Ensemble suspect vide : gamma 0.

        Returns:
            tuple: (precision, recall, gamma)
        """
        hypothesis_set = set(hypothesis_objects)
        ground_truth = set(ground_truth)
        hits = len(hypothesis_set & ground_truth)
        if hypothesis_set:
            precision = hits / len(hypothesis_set)
        else:
            precision = 1.0 if not ground_truth else 0.0
        recall = hits / len(ground_truth) if ground_truth else 1.0
        gamma = len(hypothesis_set) / len(suspects) if suspects else 0.0
        return precision, recall, gamma

    @staticmethod
    def target_switch(compiled):
        """Switch portant le plus de règles (égalité : ObjectId)."""
        counts = {}
        for entry in compiled:
            counts[entry.rule.switch] = counts.get(entry.rule.switch, 0) + 1
        if not counts:
            raise InputError("Compilation vide : aucun switch cible", stage='simulation')
        return min(counts, key=lambda switch: (-counts[switch], switch.sort_key))

    def run_trial(self, policy, plan, params, compiled=None, change_log=None, run=0):
        """
        Essai complet : compilation, déploiement, vérification, modèle,
        augmentation, localisation, métriques.

        Args:
            policy: NetworkPolicy
            plan: FaultPlan
            params: TrialParams
            compiled: compilation déjà calculée (optionnel)
            change_log: journal ; par défaut provisionnement + modifications fautives
            run: numéro d'essai

        Returns:
            TrialResult
        """
        return self.run_trials(policy, plan, params, (params.algo,), compiled, change_log, run)[0]

    def run_trials(self, policy, plan, params, algos, compiled=None, change_log=None, run=0):
        """
        Un seul déploiement et un seul modèle augmenté, localisés par chaque
        algorithme. runtime_ms d'un résultat : préparation commune plus sa
        propre localisation.

        Returns:
            list: TrialResult, dans l'ordre de algos
        """
        started = time.perf_counter()
        if compiled is None:
            compiled = compiler_service.compile(policy)
        if change_log is None:
            change_log = policy_service.policy_change_log(policy)
            if not params.stale_changelog:
                change_log = fault_service.fault_change_log(change_log, plan)

        deployment = tcam_service.deploy(compiled, plan)
        report = equivalence_service.check_equivalence(
            compiler_service.rules_of(compiled), deployment.deployed_rules()
        )
        if params.model == ModelKind.SWITCH.value:
            switch = params.switch or self.target_switch(compiled)
            model = risk_model_service.build_switch_model(policy, compiled, switch)
        else:
            model = risk_model_service.build_controller_model(policy, compiled)
        augmented, signature = risk_model_service.augment(model, report)

        suspects = set()
        for element in signature.observations:
            suspects.update(augmented.graph.adj[element])
        if not signature.observations:
            logger.warning("empty_signature", run=run, faults=len(plan))
        prepared_ms = (time.perf_counter() - started) * 1000

        ground_truth = frozenset(plan.objects())
        results = []
        for algo in algos:
            localized = time.perf_counter()
            if signature.observations:
                hypothesis = localization_service.localize(
                    signature, augmented, algo=algo, change_log=change_log,
                    window=params.window, selection=params.selection, threshold=params.threshold,
                )
            else:
                hypothesis = Hypothesis(algo=algo)
            runtime_ms = prepared_ms + (time.perf_counter() - localized) * 1000

            precision, recall, gamma = self.metrics(ground_truth, hypothesis.objects(), suspects)
            results.append(TrialResult(
                run=run,
                algo=algo,
                faults=len(plan),
                ground_truth=ground_truth,
                hypothesis=hypothesis.objects(),
                precision=precision,
                recall=recall,
                gamma=gamma,
                runtime_ms=runtime_ms,
                suspects=frozenset(suspects),
            ))
            logger.debug(
                "trial_finished",
                run=run,
                algo=algo,
                faults=len(plan),
                precision=precision,
                recall=recall,
                gamma=gamma,
            )
        return results

    def evaluate_run(self, policy, compiled, faults, run, algos, params):
        """
        Tire un plan de fautes pour (faults, run) et l'évalue avec chaque
        algorithme sur le même modèle augmenté.

        Returns:
            list: lignes du tableau de résultats
        """
        scope = None
        if params.model == ModelKind.SWITCH.value:
            scope = params.switch or self.target_switch(compiled)
        plan_seed = params.seed * 1000003 + faults * 1009 + run
        plan = fault_service.inject_faults(
            compiled, faults, mix=params.mix, seed=plan_seed, kinds=params.kinds,
            scope=scope, fraction_range=params.fraction_range,
        )
        trial_params = replace(params, faults=faults, switch=scope)
        results = self.run_trials(policy, plan, trial_params, tuple(algos), compiled=compiled, run=run)
        return [result.as_row() for result in results]

    def run_sweep(self, policy, fault_counts, algos=('scout', 'score'), runs=10, params=None, workers=None):
        """
        Balayage : pour chaque nombre de fautes et chaque essai, un plan
        commun évalué par tous les algorithmes.

        Args:
            policy: NetworkPolicy
            fault_counts: nombres de fautes simultanées
            algos: algorithmes comparés
            runs: essais par nombre de fautes
            params: TrialParams de base (graine, mix, modèle...)
            workers: processus parallèles (1 = séquentiel)

        Returns:
            pandas.DataFrame: colonnes run, algo, faults, precision, recall, gamma, runtime_ms
        """
        params = params or TrialParams()
        workers = self.workers if workers is None else workers
        compiled = compiler_service.compile(policy)
        tasks = [
            (policy, compiled, faults, run, tuple(algos), params)
            for faults in fault_counts
            for run in range(runs)
        ]
        logger.info("sweep_started", tasks=len(tasks), algos=list(algos), workers=workers)

        rows = []
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker) as executor:
                for task_rows in executor.map(_run_task, tasks):
                    rows.extend(task_rows)
        else:
            for task in tasks:
                rows.extend(_run_task(task))

        frame = pd.DataFrame(rows, columns=CSV_COLUMNS)
        frame = frame.sort_values(['faults', 'run', 'algo'], kind='stable').reset_index(drop=True)
        logger.info("sweep_finished", rows=len(frame))
        return frame

    @staticmethod
    def summarize(frame):
        """Moyennes par (algorithme, nombre de fautes)."""
        return frame.groupby(['algo', 'faults'], as_index=False)[METRIC_COLUMNS].mean()

    @staticmethod
    def save_csv(frame, path):
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        frame.to_csv(path, index=False, columns=list(frame.columns))

    @staticmethod
    def bench_sizes(max_switches=500, step=50):
        if max_switches < 1 or step < 1:
            raise InputError("max_switches et step doivent être strictement positifs", stage='bench')
        return sorted({1, *range(step, max_switches + 1, step)})

    def bench_scalability(self, sizes, faults=10, seed=0, algo='scout'):
        """
        Temps de construction du modèle contrôleur et de localisation
        en fonction du nombre de switches.

        Returns:
            pandas.DataFrame: switches, rules, observations, build_ms, localize_ms, runtime_ms
        """
        rows = []
        for switches in sizes:
            policy = generator_service.generate_policy(generator_service.scaled_config(switches, seed=seed))
            compiled = compiler_service.compile(policy)
            candidates = fault_service.faultable_objects(compiled)
            plan = fault_service.inject_faults(compiled, min(faults, len(candidates)), seed=seed + switches)
            change_log = fault_service.fault_change_log(policy_service.policy_change_log(policy), plan)
            deployment = tcam_service.deploy(compiled, plan)
            report = equivalence_service.check_equivalence(
                compiler_service.rules_of(compiled), deployment.deployed_rules()
            )

            started = time.perf_counter()
            model = risk_model_service.build_controller_model(policy, compiled)
            augmented, signature = risk_model_service.augment(model, report)
            built = time.perf_counter()
            if signature.observations:
                localization_service.localize(signature, augmented, algo=algo, change_log=change_log)
            finished = time.perf_counter()

            rows.append({
                'switches': switches,
                'rules': len(compiled),
                'observations': len(signature),
                'build_ms': (built - started) * 1000,
                'localize_ms': (finished - built) * 1000,
                'runtime_ms': (finished - started) * 1000,
            })
            logger.info("bench_point", switches=switches, runtime_ms=round(rows[-1]['runtime_ms'], 2))
        return pd.DataFrame(rows)

    @staticmethod
    def growth_exponent(frame, column='runtime_ms'):
        """
        Exposant de croissance du temps en fonction du nombre de switches
        (pente de la régression en échelle log-log).
        """
        usable = frame[(frame['switches'] > 0) & (frame[column] > 0)]
        if len(usable) < 2:
            raise InputError("Au moins deux mesures sont nécessaires", stage='bench')
        slope, _ = np.polyfit(np.log(usable['switches'].to_numpy(dtype=float)),
                              np.log(usable[column].to_numpy(dtype=float)), 1)
        return float(slope)


# Instance globale du service
experiment_service = ExperimentService()
