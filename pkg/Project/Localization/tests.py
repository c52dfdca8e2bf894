import math
import os
import random
import tempfile
import time
from dataclasses import replace
from itertools import combinations

from django.test import SimpleTestCase

from Deployment.Services.compiler_service import compiler_service
from Deployment.Services.equivalence_service import equivalence_service
from Deployment.Services.tcam_service import tcam_service
from Localization.models import Stage
from Localization.Services.localization_service import localization_service
from Policy.exceptions import InputError
from Policy.models import ChangeAction, ChangeLogEntry, EpgPair, ObjectId
from Policy.Services.policy_service import policy_service
from Risk.models import AffectedElement, FailureSignature, ModelKind, RiskModel, Status
from Risk.Services.risk_model_service import risk_model_service
from Simulation.models import FaultKind
from Simulation.Services.fault_service import fault_service
from Simulation.Services.generator_service import generator_service
from Simulation.Services.scenario_service import scenario_service

S1 = ObjectId.switch('S1')


def element(index):
    return AffectedElement(None, EpgPair.of(ObjectId.epg(f"e{index:02d}a"), ObjectId.epg(f"e{index:02d}b")))


def risk(name):
    return ObjectId.filter(name)


def build_model(edges):
    return RiskModel.from_edges(ModelKind.SWITCH, edges, switch=S1)


def signature_of(model):
    return FailureSignature(frozenset(model.fail_elements()))


class StatsTests(SimpleTestCase):
    def test_hit_and_coverage_ratios(self):
        edges = [(element(i), risk('shared'), Status.FAIL if i == 0 else Status.SUCCESS) for i in range(100)]
        edges.append((element(100), risk('other'), Status.FAIL))
        model = build_model(edges)
        stats = localization_service.compute_stats(model, signature_of(model))
        self.assertAlmostEqual(stats[risk('shared')].hit_ratio, 0.01)
        self.assertAlmostEqual(stats[risk('shared')].coverage_ratio, 0.5)
        self.assertTrue(stats[risk('other')].full_hit)
        self.assertEqual(stats[risk('other')].coverage_ratio, 0.5)

    def test_ninety_five_percent(self):
        edges = [(element(i), risk('f'), Status.FAIL if i < 95 else Status.SUCCESS) for i in range(100)]
        model = build_model(edges)
        stats = localization_service.compute_stats(model, signature_of(model))
        self.assertAlmostEqual(stats[risk('f')].hit_ratio, 0.95)
        self.assertFalse(stats[risk('f')].full_hit)

    def test_symmetric_tie_returns_both(self):
        edges = [
            (element(0), risk('b'), Status.FAIL), (element(0), risk('a'), Status.FAIL),
            (element(1), risk('b'), Status.FAIL), (element(1), risk('a'), Status.FAIL),
        ]
        model = build_model(edges)
        stats = localization_service.compute_stats(model, signature_of(model))
        self.assertEqual(localization_service.pick_candidates(stats), [risk('a'), risk('b')])

    def test_no_full_hit_gives_nothing(self):
        model = build_model([(element(0), risk('a'), Status.FAIL), (element(1), risk('a'), Status.SUCCESS)])
        stats = localization_service.compute_stats(model, signature_of(model))
        self.assertEqual(localization_service.pick_candidates(stats), [])


class WorkedExampleTests(SimpleTestCase):
    def test_missing_rule_one(self):
        started = time.perf_counter()
        result = scenario_service.run(scenario_service.missing_rule_one())
        self.assertLess(time.perf_counter() - started, 1.0)
        hypothesis = result['hypothesis']
        self.assertEqual(hypothesis.objects(), (ObjectId.epg('Web'), ObjectId.contract('Web-App')))
        self.assertTrue(all(entry.stage == Stage.HIT_COVERAGE for entry in hypothesis.entries))
        self.assertEqual(hypothesis.residual, ())
        self.assertEqual(hypothesis.model_switch, ObjectId.switch('S2'))

    def test_scout_on_greedy_instance(self):
        hypothesis = scenario_service.run(scenario_service.greedy_instance(), algo='scout')['hypothesis']
        self.assertEqual(
            [(entry.object, entry.stage) for entry in hypothesis.entries],
            [(ObjectId.filter('F2'), Stage.HIT_COVERAGE), (ObjectId.filter('F3'), Stage.CHANGE_LOG)],
        )
        self.assertEqual(hypothesis.residual, ())

    def test_score_on_greedy_instance(self):
        hypothesis = scenario_service.run(scenario_service.greedy_instance(), algo='score', threshold=1.0)['hypothesis']
        self.assertEqual(hypothesis.objects(), (ObjectId.filter('F2'),))
        c_d = EpgPair.of(ObjectId.epg('C'), ObjectId.epg('D'))
        self.assertEqual([item.pair for item in hypothesis.residual], [c_d])

    def test_stale_change_log_leaves_residual(self):
        scenario = scenario_service.greedy_instance()
        provisioning_only = tuple(entry for entry in scenario.change_log if entry.action == ChangeAction.ADD)
        result = scenario_service.run(replace(scenario, change_log=provisioning_only), window=0)
        self.assertEqual(result['hypothesis'].objects(), (ObjectId.filter('F2'),))
        self.assertEqual(len(result['hypothesis'].residual), 1)

    def test_single_risk_instance(self):
        model = build_model([(element(i), risk('only'), Status.FAIL) for i in range(4)])
        hypothesis = localization_service.scout(signature_of(model), model)
        self.assertEqual(hypothesis.objects(), (risk('only'),))
        self.assertEqual(hypothesis.iterations, 1)


class ScoreTests(SimpleTestCase):
    def setUp(self):
        # R relie 5 éléments, 3 en échec ; chaque élément en échec a aussi un risque privé sain
        edges = []
        for i in range(5):
            edges.append((element(i), risk('R'), Status.FAIL if i < 3 else Status.SUCCESS))
        for i in range(3):
            edges.append((element(i), risk(f"private{i}"), Status.SUCCESS))
        self.model = build_model(edges)
        self.signature = signature_of(self.model)

    def test_threshold_half_selects_partial_risk(self):
        hypothesis = localization_service.score(self.signature, self.model, threshold=0.5)
        self.assertEqual(hypothesis.objects(), (risk('R'),))
        self.assertEqual(hypothesis.residual, ())

    def test_threshold_one_excludes_it(self):
        hypothesis = localization_service.score(self.signature, self.model, threshold=1.0)
        self.assertEqual(hypothesis.objects(), ())
        self.assertEqual(len(hypothesis.residual), 3)

    def test_score_keeps_one_of_tied_risks(self):
        scenario = scenario_service.missing_rule_one()
        scout = scenario_service.run(scenario, algo='scout')['hypothesis']
        score = scenario_service.run(scenario, algo='score', threshold=1.0)['hypothesis']
        self.assertEqual(score.objects(), (ObjectId.epg('Web'),))
        self.assertTrue(set(score.objects()) < set(scout.objects()))

    def test_threshold_out_of_range(self):
        with self.assertRaises(InputError):
            localization_service.score(self.signature, self.model, threshold=0)

    def test_greedy_cover_bound(self):
        rng = random.Random(99)
        for _ in range(200):
            count = rng.randint(2, 8)
            risks = [risk(f"r{j}") for j in range(rng.randint(2, 7))]
            edges = []
            for i in range(count):
                for item in rng.sample(risks, rng.randint(1, len(risks))):
                    edges.append((element(i), item, Status.FAIL))
            model = build_model(edges)
            hypothesis = localization_service.score(signature_of(model), model, threshold=1.0)
            self.assertEqual(hypothesis.residual, ())

            universe = set(model.elements())
            optimum = next(
                size for size in range(1, len(risks) + 1)
                if any(
                    set().union(*(model.elements_of(item) for item in chosen)) == universe
                    for chosen in combinations(model.risks(), size)
                )
            )
            self.assertLessEqual(len(hypothesis), optimum * (math.log(len(universe)) + 1))


class RandomModelTests(SimpleTestCase):
    """Modèles aléatoires : justification, déterminisme, terminaison."""

    def random_case(self, rng):
        elements = [element(i) for i in range(rng.randint(1, 12))]
        risks = [risk(f"r{j:02d}") for j in range(rng.randint(1, 10))]
        edges = []
        failed = False
        for item in elements:
            linked = rng.sample(risks, rng.randint(1, min(4, len(risks))))
            fails = rng.random() < 0.4
            fail_links = set(rng.sample(linked, rng.randint(1, len(linked)))) if fails else set()
            failed = failed or fails
            for target in linked:
                edges.append((item, target, Status.FAIL if target in fail_links else Status.SUCCESS))
        if not failed:
            edges.append((elements[0], risks[0], Status.FAIL))
        change_log = tuple(
            ChangeLogEntry(timestamp, rng.choice(risks), ChangeAction.MODIFY)
            for timestamp in sorted(rng.sample(range(100), rng.randint(0, 5)))
        )
        return build_model(edges), change_log

    def test_soundness_determinism_termination(self):
        rng = random.Random(1234)
        for _ in range(1000):
            model, change_log = self.random_case(rng)
            signature = signature_of(model)
            window = rng.randint(0, 30)
            threshold = rng.choice([0.3, 0.5, 1.0])
            for algo in ('scout', 'score'):
                hypothesis = localization_service.localize(
                    signature, model, algo=algo, change_log=change_log, window=window, threshold=threshold,
                )
                again = localization_service.localize(
                    signature, model, algo=algo, change_log=change_log, window=window, threshold=threshold,
                )
                self.assertEqual(hypothesis, again)

                self.assertLessEqual(hypothesis.iterations, len(signature))
                chosen = set(hypothesis.objects())
                self.assertEqual(len(chosen), len(hypothesis))
                residual = set(hypothesis.residual)
                self.assertTrue(residual <= signature.observations)
                for observation in signature.observations - residual:
                    self.assertTrue(
                        chosen & set(model.risks_of(observation)),
                        f"{observation} expliqué sans risque adjacent",
                    )
                self.assertEqual(model.fail_elements(), sorted(signature.observations))


class FaultedPolicyTests(SimpleTestCase):
    """Politique générée, fautes injectées, modèle contrôleur augmenté."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.policy = generator_service.generate_policy(generator_service.profile('testbed', seed=5))
        cls.compiled = compiler_service.compile(cls.policy)
        cls.provisioning = policy_service.policy_change_log(cls.policy)

    def faulted(self, plan):
        deployment = tcam_service.deploy(self.compiled, plan)
        report = equivalence_service.check_equivalence(
            compiler_service.rules_of(self.compiled), deployment.deployed_rules()
        )
        model = risk_model_service.build_controller_model(self.policy, self.compiled)
        augmented, signature = risk_model_service.augment(model, report)
        return augmented, signature, fault_service.fault_change_log(self.provisioning, plan)

    def test_scout_recall_dominates_on_full_faults(self):
        for seed in range(30):
            plan = fault_service.inject_faults(self.compiled, 1 + seed % 4, mix=1.0, seed=seed)
            model, signature, change_log = self.faulted(plan)
            scout = localization_service.scout(signature, model, change_log)
            score = localization_service.score(signature, model, threshold=1.0)
            self.assertEqual(scout.residual, ())
            self.assertEqual(score.residual, ())
            truth = set(plan.objects())
            self.assertGreaterEqual(
                len(truth & set(scout.objects())), len(truth & set(score.objects())), plan,
            )

    def test_change_log_explains_partial_faults(self):
        left_by_score = 0
        for seed in range(30):
            plan = fault_service.inject_faults(self.compiled, 1 + seed % 3, mix=0.0, seed=seed)
            self.assertTrue(all(fault.kind == FaultKind.PARTIAL for fault in plan.faults))
            model, signature, change_log = self.faulted(plan)
            score = localization_service.score(signature, model, threshold=1.0)
            scout = localization_service.scout(signature, model, change_log)
            self.assertEqual(scout.residual, (), plan)
            if score.residual:
                left_by_score += 1
        self.assertGreater(left_by_score, 0)


class InputTests(SimpleTestCase):
    def setUp(self):
        self.model = build_model([(element(0), risk('a'), Status.FAIL)])

    def test_empty_signature(self):
        with self.assertRaises(InputError):
            localization_service.scout(FailureSignature(), self.model)

    def test_foreign_observation(self):
        with self.assertRaises(InputError):
            localization_service.scout(FailureSignature(frozenset({element(5)})), self.model)

    def test_unknown_algorithm(self):
        with self.assertRaises(InputError):
            localization_service.localize(signature_of(self.model), self.model, algo='magic')

    def test_latest_selection_keeps_most_recent(self):
        model = build_model([
            (element(0), risk('old'), Status.FAIL), (element(0), risk('new'), Status.FAIL),
            (element(1), risk('old'), Status.SUCCESS), (element(1), risk('new'), Status.SUCCESS),
        ])
        log = (
            ChangeLogEntry(95, risk('old'), ChangeAction.MODIFY),
            ChangeLogEntry(100, risk('new'), ChangeAction.MODIFY),
        )
        both = localization_service.scout(signature_of(model), model, log, window=10, selection='all')
        latest = localization_service.scout(signature_of(model), model, log, window=10, selection='latest')
        self.assertEqual(both.objects(), (risk('new'), risk('old')))
        self.assertEqual(latest.objects(), (risk('new'),))

    def test_hypothesis_file(self):
        hypothesis = scenario_service.run(scenario_service.greedy_instance())['hypothesis']
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'hypothesis.json')
            localization_service.save_hypothesis(hypothesis, path)
            self.assertEqual(localization_service.load_hypothesis(path), hypothesis)
