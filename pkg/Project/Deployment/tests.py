import os
import random
import tempfile
from itertools import product

from django.test import SimpleTestCase

from Correlation.models import TCAM_OVERFLOW_CODE
from Deployment.models import Rule
from Deployment.Services.compiler_service import compiler_service
from Deployment.Services.equivalence_service import equivalence_service
from Deployment.Services.rule_dump_service import rule_dump_service
from Deployment.Services.tcam_service import tcam_service
from Policy.exceptions import FaultPlanError, InputError
from Policy.models import NetworkPolicy, ObjectId
from Policy.Services.policy_service import policy_service
from Simulation.models import Fault, FaultKind, FaultPlan
from Simulation.Services.generator_service import generator_service
from Simulation.Services.scenario_service import scenario_service

S1, S2, S3 = ObjectId.switch('S1'), ObjectId.switch('S2'), ObjectId.switch('S3')
VRF = ObjectId.vrf('101')
WEB, APP, DB = ObjectId.epg('Web'), ObjectId.epg('App'), ObjectId.epg('DB')


class CompilerTests(SimpleTestCase):
    def setUp(self):
        self.policy = scenario_service.three_tier_policy()
        self.compiled = compiler_service.compile(self.policy)

    def test_rule_counts_per_switch(self):
        self.assertEqual(len(self.compiled), 12)
        self.assertEqual(len(compiler_service.rules_of(self.compiled, S1)), 2)
        self.assertEqual(len(compiler_service.rules_of(self.compiled, S2)), 6)
        self.assertEqual(len(compiler_service.rules_of(self.compiled, S3)), 4)

    def test_s2_rules(self):
        expected = {
            Rule(S2, VRF, WEB, APP, 80), Rule(S2, VRF, APP, WEB, 80),
            Rule(S2, VRF, APP, DB, 80), Rule(S2, VRF, DB, APP, 80),
            Rule(S2, VRF, APP, DB, 700), Rule(S2, VRF, DB, APP, 700),
        }
        self.assertEqual(set(compiler_service.rules_of(self.compiled, S2)), expected)

    def test_provenance_of_rule_one(self):
        entry = next(item for item in self.compiled if item.rule == Rule(S2, VRF, WEB, APP, 80))
        self.assertEqual(entry.objects, frozenset({
            VRF, WEB, APP, ObjectId.contract('Web-App'), ObjectId.filter('port80'), S2,
        }))
        self.assertEqual(entry.contract, ObjectId.contract('Web-App'))
        self.assertEqual(entry.filter, ObjectId.filter('port80'))

    def test_no_duplicates(self):
        rules = compiler_service.rules_of(self.compiled)
        self.assertEqual(len(rules), len(set(rules)))

    def test_deterministic(self):
        self.assertEqual(compiler_service.compile(self.policy), self.compiled)

    def test_empty_policy(self):
        self.assertEqual(compiler_service.compile(NetworkPolicy.build()), ())

    def test_removing_a_provenance_object_removes_the_rule(self):
        policies = [
            scenario_service.three_tier_policy(),
            scenario_service.greedy_instance().policy,
            generator_service.generate_policy(generator_service.scaled_config(3, seed=7)),
        ]
        for policy in policies:
            compiled = compiler_service.compile(policy)
            rules = set(compiler_service.rules_of(compiled))
            for object_id in sorted({item for entry in compiled for item in entry.objects}):
                mutated = policy_service.remove_object(policy, object_id)
                remaining = set(compiler_service.rules_of(compiler_service.compile(mutated)))
                self.assertTrue(remaining <= rules, object_id)
                for entry in compiled:
                    if object_id in entry.objects:
                        self.assertNotIn(entry.rule, remaining, (object_id, str(entry.rule)))


class TcamTests(SimpleTestCase):
    def setUp(self):
        self.compiled = compiler_service.compile(scenario_service.three_tier_policy())

    def test_fault_free_deployment_matches_compilation(self):
        result = tcam_service.deploy(self.compiled)
        self.assertEqual(set(result.deployed_rules()), set(compiler_service.rules_of(self.compiled)))
        self.assertEqual(result.fault_log, ())

    def test_full_fault_removes_every_derived_rule(self):
        plan = FaultPlan(faults=(Fault(ObjectId.filter('port700'), FaultKind.FULL),))
        result = tcam_service.deploy(self.compiled, plan)
        deployed = result.deployed_rules()
        self.assertEqual(len(deployed), 8)
        self.assertFalse(any(rule.port == 700 for rule in deployed))

    def test_scoped_fault_touches_one_switch(self):
        plan = FaultPlan(faults=(Fault(ObjectId.filter('port700'), FaultKind.FULL, scope=S3),))
        result = tcam_service.deploy(self.compiled, plan)
        self.assertEqual(len(result.stores[S2]), 6)
        self.assertEqual(len(result.stores[S3]), 2)

    def test_partial_fault_is_reproducible(self):
        plan = FaultPlan(faults=(Fault(ObjectId.vrf('101'), FaultKind.PARTIAL, fraction=0.5),), seed=3)
        first = tcam_service.deploy(self.compiled, plan).deployed_rules()
        second = tcam_service.deploy(self.compiled, plan).deployed_rules()
        self.assertEqual(first, second)
        self.assertEqual(len(first), 6)

    def test_partial_count_rounding(self):
        self.assertEqual(tcam_service.partial_count(0.05, 100), 5)
        self.assertEqual(tcam_service.partial_count(0.5, 3), 2)
        self.assertEqual(tcam_service.partial_count(0.001, 10), 1)
        self.assertEqual(tcam_service.partial_count(0.99, 10), 9)
        self.assertEqual(tcam_service.partial_count(0.5, 1), 1)

    def test_overflow_keeps_first_rules(self):
        result = tcam_service.deploy(self.compiled, capacities={S2: 5}, timestamp=42)
        store = result.stores[S2]
        self.assertEqual(len(store), 5)
        self.assertNotIn(Rule(S2, VRF, WEB, APP, 80), store)
        self.assertEqual(len(result.fault_log), 1)
        entry = result.fault_log[0]
        self.assertEqual((entry.switch, entry.code, entry.start), (S2, TCAM_OVERFLOW_CODE, 42))

    def test_capacity_zero_installs_nothing(self):
        result = tcam_service.deploy(self.compiled, capacities={S1: 0})
        self.assertEqual(result.stores[S1].rules, ())

    def test_unknown_fault_object(self):
        plan = FaultPlan(faults=(Fault(ObjectId.filter('ssh'), FaultKind.FULL),))
        with self.assertRaises(FaultPlanError):
            tcam_service.deploy(self.compiled, plan)

    def test_invalid_fraction(self):
        plan = FaultPlan(faults=(Fault(ObjectId.filter('port80'), FaultKind.PARTIAL, fraction=1.0),))
        with self.assertRaises(FaultPlanError):
            tcam_service.deploy(self.compiled, plan)

    def test_fault_without_rules_in_scope(self):
        plan = FaultPlan(faults=(Fault(ObjectId.filter('port700'), FaultKind.FULL, scope=S1),))
        with self.assertRaises(FaultPlanError):
            tcam_service.deploy(self.compiled, plan)


class EquivalenceTests(SimpleTestCase):
    def setUp(self):
        self.compiled = compiler_service.compile(scenario_service.three_tier_policy())
        self.desired = compiler_service.rules_of(self.compiled)

    def test_identical_sets_give_empty_report(self):
        self.assertTrue(equivalence_service.check_equivalence(self.desired, self.desired).is_empty())

    def test_rule_one_missing(self):
        actual = [rule for rule in self.desired if rule != Rule(S2, VRF, WEB, APP, 80)]
        report = equivalence_service.check_equivalence(self.desired, actual)
        self.assertEqual(report.missing, (Rule(S2, VRF, WEB, APP, 80),))
        self.assertEqual(report.extra, ())
        self.assertEqual(list(report.per_switch), [S2])

    def test_swapping_arguments_swaps_the_report(self):
        actual = [rule for rule in self.desired if rule.switch != S3] + [Rule(S1, VRF, WEB, DB, 22)]
        report = equivalence_service.check_equivalence(self.desired, actual)
        swapped = equivalence_service.check_equivalence(actual, self.desired)
        self.assertEqual(report.missing, swapped.extra)
        self.assertEqual(report.extra, swapped.missing)

    def test_rejects_non_rules(self):
        with self.assertRaises(InputError):
            equivalence_service.check_equivalence(self.desired, [('S1', 'Web', 'App', 80)])

    def test_report_matches_packet_verdicts(self):
        rng = random.Random(2024)
        epgs = [WEB, APP, DB]
        universe = [
            Rule(switch, VRF, src, dst, port, protocol)
            for switch, src, dst, port, protocol in product((S1, S2), epgs, epgs, (80, 443), ('tcp', 'udp'))
            if src != dst
        ]
        for _ in range(1000):
            desired = rng.sample(universe, rng.randint(0, len(universe)))
            actual = rng.sample(universe, rng.randint(0, len(universe)))
            report = equivalence_service.check_equivalence(desired, actual)
            differing = set(report.missing) | set(report.extra)
            for packet in universe:
                verdict_l = equivalence_service.allows(
                    desired, packet.switch, packet.vrf, packet.src, packet.dst, packet.port, packet.protocol)
                verdict_t = equivalence_service.allows(
                    actual, packet.switch, packet.vrf, packet.src, packet.dst, packet.port, packet.protocol)
                self.assertEqual(verdict_l != verdict_t, packet in differing)


class RuleDumpTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_rules_and_report_files(self):
        desired = compiler_service.rules_of(compiler_service.compile(scenario_service.three_tier_policy()))
        path = os.path.join(self.tmp.name, 'l.jsonl')
        rule_dump_service.save_rules(desired, path)
        self.assertEqual(rule_dump_service.load_rules(path), desired)

        report = equivalence_service.check_equivalence(desired, desired[1:])
        report_path = os.path.join(self.tmp.name, 'report.json')
        rule_dump_service.save_report(report, report_path)
        self.assertEqual(rule_dump_service.load_report(report_path), report)

    def test_invalid_line_names_the_field(self):
        path = os.path.join(self.tmp.name, 't.jsonl')
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write('{"switch":"S1","vrf":"101","src":"Web","dst":"App","port":80}\n')
            handle.write('{"switch":"S1","vrf":"101","src":"Web","dst":"App","port":99999}\n')
        with self.assertRaises(InputError) as ctx:
            rule_dump_service.load_rules(path)
        self.assertIn('ligne 2', ctx.exception.message)
        self.assertIn('port', ctx.exception.message)
