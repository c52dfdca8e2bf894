import os
import random
import tempfile

from django.test import SimpleTestCase

from Deployment.models import Rule
from Deployment.Services.compiler_service import compiler_service
from Deployment.Services.equivalence_service import equivalence_service
from Policy.exceptions import ConsistencyError, InputError
from Policy.models import EpgPair, ObjectId
from Risk.models import AffectedElement, ModelKind, Status
from Risk.Services.risk_model_service import risk_model_service
from Simulation.Services.generator_service import generator_service
from Simulation.Services.scenario_service import scenario_service

S1, S2, S3 = ObjectId.switch('S1'), ObjectId.switch('S2'), ObjectId.switch('S3')
VRF = ObjectId.vrf('101')
WEB, APP, DB = ObjectId.epg('Web'), ObjectId.epg('App'), ObjectId.epg('DB')
WEB_APP = EpgPair.of(WEB, APP)
APP_DB = EpgPair.of(APP, DB)
RULE_ONE = Rule(S2, VRF, WEB, APP, 80)


class ThreeTierMixin:
    def setUp(self):
        self.policy = scenario_service.three_tier_policy()
        self.compiled = compiler_service.compile(self.policy)
        self.desired = compiler_service.rules_of(self.compiled)

    def report_without(self, *rules):
        return equivalence_service.check_equivalence(
            self.desired, [rule for rule in self.desired if rule not in rules]
        )


class SwitchModelTests(ThreeTierMixin, SimpleTestCase):
    def test_s2_model_shape(self):
        model = risk_model_service.build_switch_model(self.policy, self.compiled, S2)
        self.assertEqual(model.kind, ModelKind.SWITCH)
        self.assertEqual(model.elements(), sorted([AffectedElement(None, WEB_APP), AffectedElement(None, APP_DB)]))
        self.assertEqual(
            model.risks_of(AffectedElement(None, WEB_APP)),
            sorted([VRF, WEB, APP, ObjectId.contract('Web-App'), ObjectId.filter('port80')]),
        )
        self.assertNotIn(S2, model.graph)

    def test_missing_rule_one_marks_web_app(self):
        model = risk_model_service.build_switch_model(self.policy, self.compiled, S2)
        augmented, signature = risk_model_service.augment(model, self.report_without(RULE_ONE))
        element = AffectedElement(None, WEB_APP)
        self.assertEqual(signature.observations, frozenset({element}))
        self.assertEqual(augmented.status(element), Status.FAIL)
        self.assertEqual(augmented.risks_of(element, Status.FAIL), augmented.risks_of(element))
        self.assertEqual(augmented.status(AffectedElement(None, APP_DB)), Status.SUCCESS)
        self.assertEqual(model.fail_edge_count(), 0)

    def test_other_switch_rules_are_ignored(self):
        model = risk_model_service.build_switch_model(self.policy, self.compiled, S2)
        _, signature = risk_model_service.augment(model, self.report_without(Rule(S3, VRF, APP, DB, 700)))
        self.assertEqual(len(signature), 0)

    def test_unknown_switch(self):
        with self.assertRaises(InputError):
            risk_model_service.build_switch_model(self.policy, self.compiled, ObjectId.switch('S9'))


class ControllerModelTests(ThreeTierMixin, SimpleTestCase):
    def test_triplets(self):
        model = risk_model_service.build_controller_model(self.policy, self.compiled)
        self.assertEqual(model.elements(), sorted([
            AffectedElement(S1, WEB_APP), AffectedElement(S2, WEB_APP),
            AffectedElement(S2, APP_DB), AffectedElement(S3, APP_DB),
        ]))
        self.assertIn(S2, model.risks_of(AffectedElement(S2, WEB_APP)))

    def test_only_s2_web_app_fails(self):
        model = risk_model_service.build_controller_model(self.policy, self.compiled)
        augmented, signature = risk_model_service.augment(model, self.report_without(RULE_ONE))
        self.assertEqual(augmented.fail_elements(), [AffectedElement(S2, WEB_APP)])
        self.assertEqual(signature.observations, frozenset({AffectedElement(S2, WEB_APP)}))

    def test_missing_filter_keeps_sibling_edges(self):
        model = risk_model_service.build_controller_model(self.policy, self.compiled)
        report = self.report_without(Rule(S3, VRF, APP, DB, 700), Rule(S3, VRF, DB, APP, 700))
        augmented, _ = risk_model_service.augment(model, report)
        element = AffectedElement(S3, APP_DB)
        self.assertEqual(augmented.edge_status(element, ObjectId.filter('port700')), Status.FAIL)
        self.assertEqual(augmented.edge_status(element, ObjectId.filter('port80')), Status.SUCCESS)

    def test_stale_model_raises(self):
        model = risk_model_service.build_controller_model(self.policy, self.compiled)
        stranger = Rule(S1, VRF, WEB, DB, 22)
        report = equivalence_service.check_equivalence([*self.desired, stranger], self.desired)
        with self.assertRaises(ConsistencyError) as ctx:
            risk_model_service.augment(model, report)
        self.assertEqual(ctx.exception.stage, 'augment')

    def test_extra_rules_add_no_observation(self):
        model = risk_model_service.build_controller_model(self.policy, self.compiled)
        report = equivalence_service.check_equivalence(self.desired, [*self.desired, Rule(S1, VRF, WEB, DB, 22)])
        _, signature = risk_model_service.augment(model, report)
        self.assertEqual(len(signature), 0)

    def test_empty_compilation(self):
        with self.assertRaises(InputError):
            risk_model_service.build_controller_model(self.policy, ())


class AugmentPropertyTests(SimpleTestCase):
    def setUp(self):
        self.policy = generator_service.generate_policy(generator_service.scaled_config(4, seed=11))
        self.compiled = compiler_service.compile(self.policy)
        self.desired = compiler_service.rules_of(self.compiled)
        self.rng = random.Random(5)

    def random_report(self):
        missing = set(self.rng.sample(self.desired, self.rng.randint(1, len(self.desired) // 3)))
        report = equivalence_service.check_equivalence(
            self.desired, [rule for rule in self.desired if rule not in missing]
        )
        return missing, report

    def test_idempotent_and_local(self):
        model = risk_model_service.build_controller_model(self.policy, self.compiled)
        provenance = compiler_service.provenance_index(self.compiled)
        for _ in range(50):
            missing, report = self.random_report()
            once, signature = risk_model_service.augment(model, report)
            twice, _ = risk_model_service.augment(once, report)
            self.assertEqual(once, twice)

            expected = {once.element_for(rule) for rule in missing}
            self.assertEqual(signature.observations, frozenset(expected))
            allowed = {(once.element_for(rule), risk) for rule in missing for risk in provenance[rule]}
            for element, risk, status in once.edges():
                if status == Status.FAIL:
                    self.assertIn((element, risk), allowed)

    def test_restriction_matches_switch_model(self):
        controller = risk_model_service.build_controller_model(self.policy, self.compiled)
        for switch in sorted({rule.switch for rule in self.desired}):
            switch_model = risk_model_service.build_switch_model(self.policy, self.compiled, switch)
            self.assertEqual(risk_model_service.restrict_to_switch(controller, switch), switch_model)
            _, report = self.random_report()
            augmented_controller, _ = risk_model_service.augment(controller, report)
            augmented_switch, _ = risk_model_service.augment(switch_model, report)
            self.assertEqual(risk_model_service.restrict_to_switch(augmented_controller, switch), augmented_switch)

    def test_restricting_a_switch_model_is_refused(self):
        switch = self.desired[0].switch
        model = risk_model_service.build_switch_model(self.policy, self.compiled, switch)
        with self.assertRaises(InputError):
            risk_model_service.restrict_to_switch(model, switch)


class ModelDumpTests(ThreeTierMixin, SimpleTestCase):
    def test_augmented_model_survives_a_dump(self):
        model = risk_model_service.build_switch_model(self.policy, self.compiled, S2)
        augmented, signature = risk_model_service.augment(model, self.report_without(RULE_ONE))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'model.json')
            risk_model_service.save_model(augmented, path)
            loaded = risk_model_service.load_model(path)
        self.assertEqual(loaded, augmented)
        self.assertEqual(loaded.switch, S2)
        self.assertEqual(risk_model_service.signature_of(loaded), signature)
        self.assertEqual(loaded.provenance, augmented.provenance)
