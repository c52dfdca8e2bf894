import os
import tempfile
import time
from dataclasses import replace
from unittest.mock import patch

import pandas as pd
from django.test import SimpleTestCase, tag

from Deployment.Services.compiler_service import compiler_service
from Deployment.Services.equivalence_service import equivalence_service
from Deployment.Services.tcam_service import tcam_service
from Policy.exceptions import FaultPlanError, GeneratorConfigError
from Policy.models import (
    ChangeAction,
    Contract,
    Endpoint,
    Epg,
    EpgPair,
    Filter,
    NetworkPolicy,
    ObjectId,
    ObjectKind,
    Vrf,
)
from Policy.Services.policy_service import policy_service
from Risk.Services.risk_model_service import risk_model_service
from Simulation.models import Fault, FaultKind, FaultPlan, GeneratorConfig, TrialParams
from Simulation.Services.experiment_service import CSV_COLUMNS, experiment_service
from Simulation.Services.fault_service import CHANGE_GAP, fault_service
from Simulation.Services.generator_service import generator_service


def small_config(seed):
    return GeneratorConfig(vrfs=2, epgs=8, contracts=3, filters=4, switches=3, pairs=6, seed=seed)


class GeneratorTests(SimpleTestCase):
    def test_testbed_profile_counts(self):
        policy = generator_service.generate_policy(generator_service.profile('testbed'))
        self.assertEqual(len(policy.vrfs), 1)
        self.assertEqual(len(policy.epgs), 36)
        self.assertEqual(len(policy.contracts), 24)
        self.assertEqual(len(policy.filters), 9)
        self.assertEqual(len(policy.switches), 4)
        self.assertEqual(len(policy.pairs()), 100)
        self.assertEqual(policy_service.validate_policy(policy), [])

    @tag('slow')
    def test_production_profile_counts(self):
        policy = generator_service.generate_policy(generator_service.profile('production', seed=3))
        self.assertEqual(
            (len(policy.vrfs), len(policy.epgs), len(policy.contracts), len(policy.filters), len(policy.switches)),
            (6, 615, 386, 160, 30),
        )
        self.assertEqual(len(policy.pairs()), 1200)

    def test_same_seed_same_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            contents = []
            for name in ('first.json', 'second.json'):
                path = os.path.join(tmp, name)
                policy_service.save_policy(generator_service.generate_policy(generator_service.profile('testbed', seed=9)), path)
                with open(path, 'rb') as handle:
                    contents.append(handle.read())
        self.assertEqual(contents[0], contents[1])

    def test_different_seeds_differ(self):
        first = generator_service.generate_policy(small_config(1))
        second = generator_service.generate_policy(small_config(2))
        self.assertNotEqual(first, second)

    def test_generated_policies_survive_a_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'policy.json')
            for seed in range(100):
                policy = generator_service.generate_policy(small_config(seed))
                policy_service.save_policy(policy, path)
                self.assertEqual(policy_service.load_policy(path), policy)

    def test_rule_count_recount(self):
        policy = generator_service.generate_policy(generator_service.profile('testbed', seed=4))
        hosting = {epg.id: set(epg.switches) for epg in policy.epgs}
        expected = 0
        for contract in policy.contracts:
            for pair in contract.pairs:
                expected += 2 * len(contract.filters) * len(hosting[pair.a] | hosting[pair.b])
        self.assertEqual(len(compiler_service.compile(policy)), expected)

    def test_infeasible_configs(self):
        infeasible = [
            replace(small_config(0), contracts=7),
            replace(small_config(0), pairs=13),
            replace(small_config(0), filters=10),
            replace(small_config(0), epgs=3),
            replace(small_config(0), switches=0),
        ]
        for config in infeasible:
            with self.assertRaises(GeneratorConfigError, msg=str(config)):
                generator_service.generate_policy(config)

    def test_unknown_profile(self):
        with self.assertRaises(GeneratorConfigError):
            generator_service.profile('lab')

    def test_testbed_sharing_is_balanced(self):
        for seed in range(10):
            policy = generator_service.generate_policy(generator_service.profile('testbed', seed=seed))
            contracts_of, partners = {}, {}
            for contract in policy.contracts:
                self.assertGreaterEqual(len(contract.pairs), 4)
                common = set(contract.pairs[0]).intersection(*contract.pairs[1:])
                self.assertEqual(common, set(), f"{contract.id} centré sur {common}")
                for pair in contract.pairs:
                    for epg_id, partner in ((pair.a, pair.b), (pair.b, pair.a)):
                        contracts_of.setdefault(epg_id, set()).add(contract.id)
                        partners.setdefault(epg_id, set()).add(partner)
            for epg in policy.epgs:
                self.assertGreaterEqual(len(partners[epg.id]), 2)
                self.assertGreaterEqual(len(contracts_of[epg.id]), 2)
                self.assertEqual(set(epg.switches), set(policy.switches))

            users = {}
            for contract in policy.contracts:
                for filter_id in contract.filters:
                    users.setdefault(filter_id, set()).add(contract.id)
            self.assertEqual(set(users), {item.id for item in policy.filters})
            self.assertTrue(all(len(item) >= 2 for item in users.values()))
            self.assertEqual(len({frozenset(item) for item in users.values()}), len(users))

    def test_balanced_sharing_limits(self):
        balanced = replace(small_config(0), vrfs=1, epgs=12, contracts=4, filters=3, pairs=16, sharing='balanced')
        self.assertEqual(len(generator_service.generate_policy(balanced).contracts), 4)
        infeasible = [
            replace(balanced, vrfs=6),
            replace(balanced, pairs=10),
            replace(balanced, contracts=1),
            replace(balanced, contracts=9),
            replace(balanced, sharing='clustered'),
        ]
        for config in infeasible:
            with self.assertRaises(GeneratorConfigError, msg=str(config)):
                generator_service.generate_policy(config)


class FaultInjectionTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.policy = generator_service.generate_policy(generator_service.profile('testbed', seed=1))
        cls.compiled = compiler_service.compile(cls.policy)

    def test_plan_is_reproducible(self):
        first = fault_service.inject_faults(self.compiled, 5, seed=42)
        self.assertEqual(fault_service.inject_faults(self.compiled, 5, seed=42), first)
        self.assertEqual(len(set(first.objects())), 5)

    def test_default_kinds(self):
        plan = fault_service.inject_faults(self.compiled, 10, seed=3)
        for item in plan.objects():
            self.assertIn(item.kind, (ObjectKind.EPG, ObjectKind.CONTRACT, ObjectKind.FILTER))

    def test_full_partial_ratio(self):
        full = total = 0
        for seed in range(100):
            plan = fault_service.inject_faults(self.compiled, 10, mix=0.5, seed=seed)
            full += sum(1 for fault in plan.faults if fault.kind == FaultKind.FULL)
            total += len(plan)
        self.assertGreater(full / total, 0.4)
        self.assertLess(full / total, 0.6)

    def test_partial_fractions_within_bounds(self):
        plan = fault_service.inject_faults(self.compiled, 20, mix=0.0, seed=8, fraction_range=(0.1, 0.2))
        for fault in plan.faults:
            self.assertEqual(fault.kind, FaultKind.PARTIAL)
            self.assertTrue(0.1 <= fault.fraction <= 0.2)

    def test_zero_faults(self):
        plan = fault_service.inject_faults(self.compiled, 0, seed=1)
        self.assertEqual(len(plan), 0)
        deployment = tcam_service.deploy(self.compiled, plan)
        report = equivalence_service.check_equivalence(
            compiler_service.rules_of(self.compiled), deployment.deployed_rules()
        )
        self.assertTrue(report.is_empty())

    def test_too_many_faults(self):
        count = len(fault_service.faultable_objects(self.compiled))
        with self.assertRaises(FaultPlanError):
            fault_service.inject_faults(self.compiled, count + 1)

    def test_every_fault_removes_rules(self):
        plan = fault_service.inject_faults(self.compiled, 10, seed=5)
        removed = tcam_service.removed_rules(self.compiled, plan)
        provenance = compiler_service.provenance_index(self.compiled)
        for fault in plan.faults:
            self.assertTrue(any(fault.object in provenance[rule] for rule in removed), fault)

    def test_scoped_faults_stay_on_the_switch(self):
        switch = experiment_service.target_switch(self.compiled)
        plan = fault_service.inject_faults(self.compiled, 5, seed=2, scope=switch)
        removed = tcam_service.removed_rules(self.compiled, plan)
        self.assertTrue(removed)
        self.assertEqual({rule.switch for rule in removed}, {switch})

    def test_fault_change_log(self):
        plan = fault_service.inject_faults(self.compiled, 3, seed=6)
        base = policy_service.policy_change_log(self.policy)
        log = fault_service.fault_change_log(base, plan)
        added = log[len(base):]
        self.assertEqual([entry.object for entry in added], list(plan.objects()))
        self.assertTrue(all(entry.action == ChangeAction.MODIFY for entry in added))
        self.assertEqual({entry.timestamp for entry in added}, {base[-1].timestamp + CHANGE_GAP})

    def test_every_faulted_object_stays_recent(self):
        # plus de fautes que la fenêtre de récence n'a de largeur
        plan = fault_service.inject_faults(self.compiled, 15, seed=8)
        log = fault_service.fault_change_log(policy_service.policy_change_log(self.policy), plan)
        latest = max(entry.timestamp for entry in log)
        recent = {entry.object for entry in log if entry.timestamp >= latest - 10}
        self.assertEqual(recent, set(plan.objects()))

    def test_plan_file(self):
        plan = fault_service.inject_faults(self.compiled, 4, seed=12, scope=experiment_service.target_switch(self.compiled))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'plan.json')
            fault_service.save_plan(plan, path)
            self.assertEqual(fault_service.load_plan(path), plan)


class PartialFaultTests(SimpleTestCase):
    def test_five_percent_of_one_hundred_rules(self):
        vrf, s1 = ObjectId.vrf('1'), ObjectId.switch('S1')
        hub = ObjectId.epg('hub')
        spokes = [ObjectId.epg(f"spoke{index:02d}") for index in range(50)]
        http = ObjectId.filter('http')
        policy = NetworkPolicy.build(
            vrfs=[Vrf(vrf)],
            epgs=[Epg(epg, vrf, (Endpoint(f"{epg.name}-ep", s1),)) for epg in [hub, *spokes]],
            contracts=[Contract(ObjectId.contract('star'), tuple(EpgPair.of(hub, s) for s in spokes), (http,))],
            filters=[Filter(http, 80)],
            switches=[s1],
        )
        compiled = compiler_service.compile(policy)
        self.assertEqual(len(compiled), 100)
        plan = FaultPlan(faults=(Fault(http, FaultKind.PARTIAL, fraction=0.05),), seed=0)
        deployment = tcam_service.deploy(compiled, plan)
        report = equivalence_service.check_equivalence(
            compiler_service.rules_of(compiled), deployment.deployed_rules()
        )
        self.assertEqual(len(report.missing), 5)


class TrialTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.policy = generator_service.generate_policy(generator_service.profile('testbed', seed=2))
        cls.compiled = compiler_service.compile(cls.policy)

    def test_metrics(self):
        a, b, c = ObjectId.filter('a'), ObjectId.filter('b'), ObjectId.filter('c')
        self.assertEqual(experiment_service.metrics({a, b}, [a, b], {a, b, c, c}), (1.0, 1.0, 2 / 3))
        self.assertEqual(experiment_service.metrics({a}, [a, b], {a, b}), (0.5, 1.0, 1.0))
        self.assertEqual(experiment_service.metrics({a}, [], set()), (0.0, 0.0, 0.0))
        self.assertEqual(experiment_service.metrics(set(), [], set()), (1.0, 1.0, 0.0))

    def test_single_full_fault_is_found(self):
        for seed in range(5):
            plan = fault_service.inject_faults(self.compiled, 1, mix=1.0, seed=seed)
            result = experiment_service.run_trial(
                self.policy, plan, TrialParams(algo='scout'), compiled=self.compiled, run=seed,
            )
            self.assertEqual(result.recall, 1.0, plan)

    def test_switch_model_trial(self):
        switch = experiment_service.target_switch(self.compiled)
        plan = fault_service.inject_faults(self.compiled, 1, mix=1.0, seed=4, scope=switch)
        result = experiment_service.run_trial(
            self.policy, plan, TrialParams(model='switch', switch=switch), compiled=self.compiled,
        )
        self.assertEqual(result.recall, 1.0)

    def test_empty_plan(self):
        result = experiment_service.run_trial(self.policy, FaultPlan(), TrialParams(), compiled=self.compiled)
        self.assertEqual((result.precision, result.recall, result.gamma), (1.0, 1.0, 0.0))
        self.assertEqual(result.hypothesis, ())

    def test_trials_are_reproducible(self):
        plan = fault_service.inject_faults(self.compiled, 4, seed=10)
        params = TrialParams(algo='scout', faults=4)
        first = experiment_service.run_trial(self.policy, plan, params, compiled=self.compiled)
        second = experiment_service.run_trial(self.policy, plan, params, compiled=self.compiled)
        self.assertEqual(replace(first, runtime_ms=0), replace(second, runtime_ms=0))

    def test_metric_identities(self):
        for seed in range(5):
            plan = fault_service.inject_faults(self.compiled, 3, seed=seed)
            for algo in ('scout', 'score'):
                result = experiment_service.run_trial(
                    self.policy, plan, TrialParams(algo=algo), compiled=self.compiled,
                )
                self.assertAlmostEqual(result.gamma * len(result.suspects), len(result.hypothesis))
                if set(result.hypothesis) <= result.ground_truth:
                    self.assertEqual(result.precision, 1.0)
                self.assertTrue(set(result.hypothesis) <= result.suspects)

    def test_algorithms_share_one_model(self):
        plan = fault_service.inject_faults(self.compiled, 3, seed=21)
        with patch.object(risk_model_service, 'augment', wraps=risk_model_service.augment) as augment:
            shared = experiment_service.run_trials(
                self.policy, plan, TrialParams(), ('scout', 'score'), compiled=self.compiled,
            )
        self.assertEqual(augment.call_count, 1)
        self.assertEqual([result.algo for result in shared], ['scout', 'score'])
        for result in shared:
            alone = experiment_service.run_trial(
                self.policy, plan, TrialParams(algo=result.algo), compiled=self.compiled,
            )
            self.assertEqual(replace(alone, runtime_ms=0), replace(result, runtime_ms=0))


class SweepTests(SimpleTestCase):
    @tag('slow')
    def test_sweep_table(self):
        policy = generator_service.generate_policy(generator_service.profile('testbed', seed=0))
        frame = experiment_service.run_sweep(policy, [1, 3], runs=3, params=TrialParams(seed=0), workers=1)
        self.assertEqual(list(frame.columns), CSV_COLUMNS)
        self.assertEqual(len(frame), 12)
        self.assertEqual(list(frame['faults'].unique()), [1, 3])
        summary = experiment_service.summarize(frame)
        self.assertEqual(len(summary), 4)
        self.assertTrue(((frame['precision'] >= 0) & (frame['precision'] <= 1)).all())

        again = experiment_service.run_sweep(policy, [1, 3], runs=3, params=TrialParams(seed=0), workers=1)
        stable = [column for column in CSV_COLUMNS if column != 'runtime_ms']
        self.assertTrue(frame[stable].equals(again[stable]))

    def test_bench(self):
        sizes = experiment_service.bench_sizes(10, 5)
        self.assertEqual(sizes, [1, 5, 10])
        frame = experiment_service.bench_scalability(sizes, faults=2, seed=0)
        self.assertEqual(list(frame['switches']), [1, 5, 10])
        self.assertTrue((frame['rules'] > 0).all())
        self.assertTrue((frame['observations'] > 0).all())
        self.assertIsInstance(experiment_service.growth_exponent(frame), float)


@tag('slow')
class AcceptanceTests(SimpleTestCase):
    """Objectifs de précision, de rappel et de temps des expériences."""

    @staticmethod
    def summary(frame):
        return experiment_service.summarize(frame).set_index(['algo', 'faults'])

    def _testbed_summary(self, model):
        frames = []
        for seed in range(3):
            policy = generator_service.generate_policy(generator_service.profile('testbed', seed=seed))
            started = time.perf_counter()
            frames.append(experiment_service.run_sweep(
                policy, [1, 2, 3, 10], runs=10, params=TrialParams(seed=seed, model=model), workers=1,
            ))
            self.assertLess(time.perf_counter() - started, 120)
        return self.summary(pd.concat(frames, ignore_index=True))

    def test_testbed_accuracy(self):
        for model in ('switch', 'controller'):
            summary = self._testbed_summary(model)
            for faults in (1, 2, 3):
                scout = summary.loc[('scout', faults)]
                self.assertGreaterEqual(scout['recall'], 0.95, f"{model}, {faults} fautes")
                self.assertGreaterEqual(scout['precision'], 0.90, f"{model}, {faults} fautes")
            if model == 'controller':
                gap = summary.loc[('scout', 10), 'recall'] - summary.loc[('score', 10), 'recall']
                self.assertGreaterEqual(gap, 0.15)

    def test_production_sweep(self):
        policy = generator_service.generate_policy(generator_service.profile('production'))
        frame = experiment_service.run_sweep(
            policy, range(1, 11), runs=30, workers=min(4, os.cpu_count() or 1),
        )
        scout_rows = frame[frame['algo'] == 'scout']
        self.assertGreaterEqual((scout_rows['gamma'] <= 0.15).mean(), 0.90)

        summary = self.summary(frame)
        for faults in range(1, 11):
            scout, score = summary.loc[('scout', faults)], summary.loc[('score', faults)]
            self.assertGreaterEqual(scout['recall'], score['recall'], f"{faults} fautes")
            self.assertGreaterEqual(scout['precision'], score['precision'] - 0.05, f"{faults} fautes")

    def test_five_hundred_switches(self):
        frame = experiment_service.bench_scalability(experiment_service.bench_sizes(500, 100), faults=10)
        largest = frame[frame['switches'] == 500].iloc[0]
        self.assertLess(largest['runtime_ms'], 300_000)
        self.assertLessEqual(experiment_service.growth_exponent(frame), 2.0)
