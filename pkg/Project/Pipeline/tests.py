import io
import json
import logging
import os
import tempfile
from contextlib import redirect_stderr, redirect_stdout
from dataclasses import replace

from django.test import SimpleTestCase

from Deployment.models import Rule
from Deployment.Services.compiler_service import compiler_service
from Deployment.Services.equivalence_service import equivalence_service
from Deployment.Services.rule_dump_service import rule_dump_service
from Localization.Services.localization_service import localization_service
from Policy.models import ObjectId
from Policy.Services.policy_service import policy_service
from Policy.utils import io_utils
from Simulation.Services.fault_service import fault_service
from Simulation.Services.scenario_service import scenario_service

from .cli import main
from .Services.manifest_service import manifest_service

S2 = ObjectId.switch('S2')


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.policy_path = self.path('three_tier.json')
        policy_service.save_policy(scenario_service.three_tier_policy(), self.policy_path)

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def run_cli(self, *argv):
        self.stdout, self.stderr = io.StringIO(), io.StringIO()
        with redirect_stdout(self.stdout), redirect_stderr(self.stderr):
            return main(list(argv))


class CompileCommandTests(CommandTestCase):
    def test_compile_writes_rules_and_manifest(self):
        out = self.path('rules.jsonl')
        self.assertEqual(self.run_cli('compile', '--policy', self.policy_path, '--out', out), 0)
        rules = rule_dump_service.load_rules(out)
        self.assertEqual(len(rules), 12)
        self.assertEqual(sum(1 for rule in rules if rule.switch == S2), 6)

        manifest = manifest_service.load(manifest_service.manifest_path(out))
        self.assertEqual(manifest['subcommand'], 'compile')
        self.assertEqual(manifest['seeds'], {'seed': 0})
        self.assertIn(out, manifest['outputs'])
        self.assertIn(self.policy_path, manifest['inputs'])

    def test_global_options_after_the_subcommand(self):
        out = self.path('s2.jsonl')
        code = self.run_cli('compile', '--policy', self.policy_path, '--switch', 'S2', '--out', out, '--seed', '4')
        self.assertEqual(code, 0)
        self.assertEqual({rule.switch for rule in rule_dump_service.load_rules(out)}, {S2})
        self.assertEqual(manifest_service.load(manifest_service.manifest_path(out))['seeds'], {'seed': 4})

    def test_invalid_policy(self):
        policy = scenario_service.three_tier_policy()
        broken = self.path('broken.json')
        policy_service.save_policy(replace(policy, vrfs=()), broken)
        self.assertEqual(self.run_cli('compile', '--policy', broken, '--out', self.path('rules.jsonl')), 1)
        self.assertFalse(os.path.exists(self.path('rules.jsonl')))

    def test_missing_policy_file(self):
        self.assertEqual(self.run_cli('compile', '--policy', self.path('absent.json')), 1)

    def test_usage_errors(self):
        self.assertEqual(self.run_cli('teleport'), 1)
        self.assertEqual(self.run_cli('compile'), 1)
        self.assertEqual(self.run_cli(), 1)

    def test_quiet(self):
        root = logging.getLogger()
        self.addCleanup(root.setLevel, root.level)
        out = self.path('rules.jsonl')
        self.assertEqual(self.run_cli('--quiet', 'compile', '--policy', self.policy_path, '--out', out), 0)
        self.assertEqual(root.level, logging.WARNING)


class PipelineCommandTests(CommandTestCase):
    def test_stale_report_is_a_consistency_error(self):
        desired = compiler_service.rules_of(compiler_service.compile(scenario_service.three_tier_policy()))
        stranger = Rule(ObjectId.switch('S1'), ObjectId.vrf('101'), ObjectId.epg('Web'), ObjectId.epg('DB'), 22)
        report_path = self.path('report.json')
        rule_dump_service.save_report(equivalence_service.check_equivalence([*desired, stranger], desired), report_path)
        code = self.run_cli('build-model', '--policy', self.policy_path, '--report', report_path,
                            '--out', self.path('model.json'))
        self.assertEqual(code, 2)
        self.assertIn('[augment]', self.stderr.getvalue())

    def test_inject_then_localize_through_files(self):
        injected = self.path('injected')
        code = self.run_cli('inject', '--policy', self.policy_path, '--faults', '1', '--mix', '1.0',
                            '--seed', '3', '--out', injected)
        self.assertEqual(code, 0)
        self.assertTrue(os.path.isfile(os.path.join(injected, 'manifest.json')))
        plan = fault_service.load_plan(os.path.join(injected, 'plan.json'))
        self.assertEqual(len(plan), 1)

        steps = [
            ('check', '--desired', os.path.join(injected, 'desired.jsonl'),
             '--actual', os.path.join(injected, 'actual.jsonl'), '--out', self.path('report.json')),
            ('build-model', '--policy', self.policy_path, '--out', self.path('model.json')),
            ('localize', '--model', self.path('model.json'), '--report', self.path('report.json'),
             '--changelog', os.path.join(injected, 'changelog.jsonl'), '--out', self.path('hypothesis.json')),
            ('correlate', '--hypothesis', self.path('hypothesis.json'),
             '--changelog', os.path.join(injected, 'changelog.jsonl'),
             '--faultlog', os.path.join(injected, 'faultlog.jsonl'), '--out', self.path('rootcause.json')),
        ]
        for argv in steps:
            self.assertEqual(self.run_cli(*argv), 0, (argv[0], self.stderr.getvalue()))

        hypothesis = localization_service.load_hypothesis(self.path('hypothesis.json'))
        self.assertIn(plan.objects()[0], hypothesis.objects())
        with open(self.path('rootcause.json'), encoding='utf-8') as handle:
            self.assertEqual(len(json.load(handle)['attributions']), len(hypothesis))

    def test_capacity_overflow_is_logged(self):
        injected = self.path('overflow')
        code = self.run_cli('inject', '--policy', self.policy_path, '--faults', '0',
                            '--capacity', 'S2=5', '--timestamp', '42', '--out', injected)
        self.assertEqual(code, 0)
        with open(os.path.join(injected, 'faultlog.jsonl'), encoding='utf-8') as handle:
            entries = [json.loads(line) for line in handle if line.strip()]
        self.assertEqual([(entry['switch'], entry['start']) for entry in entries], [('S2', 42)])

    def test_unknown_capacity_switch(self):
        code = self.run_cli('inject', '--policy', self.policy_path, '--faults', '0',
                            '--capacity', 'S9=5', '--out', self.path('injected'))
        self.assertEqual(code, 1)

    def test_demo(self):
        out = self.path('demo')
        self.assertEqual(self.run_cli('demo', '--out', out), 0)
        with open(os.path.join(out, 'rootcause.json'), encoding='utf-8') as handle:
            data = json.load(handle)
        labels = {item['label'] for item in data['attributions']}
        self.assertEqual(labels, {'UnresponsiveSwitch'})
        self.assertIn('S2', self.stdout.getvalue())
        self.assertIn('UnresponsiveSwitch', self.stdout.getvalue())

    def test_generate(self):
        out = self.path('generated.json')
        self.assertEqual(self.run_cli('generate', '--profile', 'testbed', '--seed', '2', '--out', out), 0)
        policy = policy_service.load_policy(out)
        self.assertEqual((len(policy.epgs), len(policy.contracts), len(policy.filters)), (36, 24, 9))
        self.assertEqual(policy_service.validate_policy(policy), [])

    def test_generate_from_config(self):
        config = self.path('config.json')
        io_utils.write_json({'vrfs': 1, 'epgs': 1, 'contracts': 1, 'filters': 1, 'switches': 1, 'pairs': 1}, config)
        self.assertEqual(self.run_cli('generate', '--config', config, '--out', self.path('out.json')), 1)


class ReplayCommandTests(CommandTestCase):
    def test_replay_reproduces_outputs(self):
        out = self.path('rules.jsonl')
        self.assertEqual(self.run_cli('compile', '--policy', self.policy_path, '--out', out), 0)
        manifest_path = manifest_service.manifest_path(out)
        self.assertEqual(self.run_cli('replay', '--manifest', manifest_path), 0)

    def test_replay_detects_a_different_output(self):
        out = self.path('rules.jsonl')
        self.assertEqual(self.run_cli('compile', '--policy', self.policy_path, '--out', out), 0)
        manifest_path = manifest_service.manifest_path(out)
        manifest = manifest_service.load(manifest_path)
        manifest['outputs'][out] = '0' * 64
        tampered = self.path('tampered.json')
        io_utils.write_json(manifest, tampered)
        self.assertEqual(self.run_cli('replay', '--manifest', tampered), 2)
        self.assertIn('[replay]', self.stderr.getvalue())

    def test_replay_of_a_simulation(self):
        out = self.path('results.csv')
        code = self.run_cli('simulate', '--profile', 'testbed', '--faults', '1,2', '--runs', '2',
                            '--workers', '1', '--out', out)
        self.assertEqual(code, 0)
        self.assertEqual(self.run_cli('replay', '--manifest', manifest_service.manifest_path(out)), 0)

    def test_manifest_without_argv(self):
        broken = self.path('broken.json')
        io_utils.write_json({'subcommand': 'compile', 'outputs': {}}, broken)
        self.assertEqual(self.run_cli('replay', '--manifest', broken), 1)
