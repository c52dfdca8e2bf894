import json
import os
import tempfile
import time

from django.apps import apps
from django.test import SimpleTestCase, tag

from Correlation.models import UNKNOWN, FaultLogEntry, FaultSignature
from Correlation.Services.correlation_service import correlation_service
from Localization.models import Hypothesis, HypothesisEntry, Stage
from Localization.Services.localization_service import localization_service
from Policy.exceptions import InputError
from Policy.models import ChangeAction, ChangeLogEntry, EpgPair, ObjectId
from Risk.models import AffectedElement
from Simulation.Services.scenario_service import scenario_service

S1, S2 = ObjectId.switch('S1'), ObjectId.switch('S2')
PORT8080, PORT8443 = ObjectId.filter('port8080'), ObjectId.filter('port8443')
WEB_APP = EpgPair.of(ObjectId.epg('Web'), ObjectId.epg('App'))


class UseCaseTests(SimpleTestCase):
    def test_tcam_overflow(self):
        result = scenario_service.run(scenario_service.tcam_overflow())
        hypothesis = result['hypothesis']
        self.assertEqual(hypothesis.objects(), (PORT8080, PORT8443))
        self.assertTrue(all(entry.stage == Stage.CHANGE_LOG for entry in hypothesis.entries))
        self.assertEqual(result['root_causes'].labels(), {PORT8080: 'TcamOverflow', PORT8443: 'TcamOverflow'})

    def test_unresponsive_switch(self):
        result = scenario_service.run(scenario_service.unresponsive_switch())
        self.assertEqual(result['hypothesis'].objects(), (PORT8080, PORT8443))
        report = result['root_causes']
        self.assertEqual(report.label_of(PORT8080), 'UnresponsiveSwitch')
        for attribution in report.attributions:
            self.assertEqual({entry.switch for entry in attribution.fault_entries}, {S2})

    @tag('slow')
    def test_too_many_missing_rules(self):
        scenario = scenario_service.too_many_missing_rules()
        self.assertGreater(len(scenario.report.missing), 10000)
        result = scenario_service.run(scenario)
        hot = ObjectId.switch('hot')
        self.assertEqual(result['hypothesis'].objects(), (hot,))

        started = time.perf_counter()
        again = localization_service.scout(result['signature'], result['model'], scenario.change_log)
        self.assertLess(time.perf_counter() - started, 10)
        self.assertEqual(again, result['hypothesis'])
        self.assertEqual(result['root_causes'].label_of(hot), 'UnresponsiveSwitch')


class CorrelateTests(SimpleTestCase):
    def setUp(self):
        self.hypothesis = Hypothesis(entries=(
            HypothesisEntry(PORT8080, Stage.CHANGE_LOG, (AffectedElement(S2, WEB_APP),)),
        ))
        self.change_log = (ChangeLogEntry(100, PORT8080, ChangeAction.ADD),)
        self.outage = FaultLogEntry(90, 130, S2, 'SWITCH_UNRESPONSIVE', 'S2 injoignable')

    def test_no_overlap_is_unknown(self):
        late = FaultLogEntry(200, 210, S2, 'SWITCH_UNRESPONSIVE')
        report = correlation_service.correlate(self.hypothesis, self.change_log, (late,))
        self.assertEqual(report.label_of(PORT8080), UNKNOWN)
        self.assertEqual(report.attributions[0].fault_entries, ())

    def test_object_without_changes_is_unknown(self):
        report = correlation_service.correlate(self.hypothesis, (), (self.outage,))
        self.assertEqual(report.label_of(PORT8080), UNKNOWN)

    def test_slack_widens_the_window(self):
        early = FaultLogEntry(40, 95, S2, 'SWITCH_UNRESPONSIVE')
        self.assertEqual(correlation_service.correlate(self.hypothesis, self.change_log, (early,), slack=0)
                         .label_of(PORT8080), UNKNOWN)
        self.assertEqual(correlation_service.correlate(self.hypothesis, self.change_log, (early,), slack=5)
                         .label_of(PORT8080), 'UnresponsiveSwitch')

    def test_unrelated_entries_do_not_change_labels(self):
        base = correlation_service.correlate(self.hypothesis, self.change_log, (self.outage,))
        noise = (
            FaultLogEntry(95, 105, S1, 'TCAM_OVERFLOW'),
            FaultLogEntry(0, 50, S2, 'TCAM_OVERFLOW'),
            FaultLogEntry(300, None, S2, 'TCAM_OVERFLOW'),
        )
        noisy = correlation_service.correlate(self.hypothesis, self.change_log, (*noise, self.outage))
        self.assertEqual(noisy.labels(), base.labels())
        self.assertEqual(noisy.attributions[0].fault_entries, (self.outage,))

    def test_evidence_overlaps_a_change(self):
        report = correlation_service.correlate(self.hypothesis, self.change_log, (self.outage,))
        for attribution in report.attributions:
            for fault in attribution.fault_entries:
                self.assertTrue(any(fault.active_at(change.timestamp) for change in attribution.change_entries))

    def test_first_matching_signature_wins(self):
        entry = FaultLogEntry(95, 105, S2, 'SWITCH_UNRESPONSIVE', 'link flap detected')
        signatures = correlation_service.with_builtins((FaultSignature('LinkFlap', message_contains='FLAP'),))
        report = correlation_service.correlate(self.hypothesis, self.change_log, (entry,), signatures=signatures)
        self.assertEqual(report.label_of(PORT8080), 'UnresponsiveSwitch')
        custom_first = (FaultSignature('LinkFlap', message_contains='FLAP'),)
        report = correlation_service.correlate(self.hypothesis, self.change_log, (entry,), signatures=custom_first)
        self.assertEqual(report.label_of(PORT8080), 'LinkFlap')

    def test_model_switch_scopes_faults(self):
        hypothesis = Hypothesis(entries=(HypothesisEntry(PORT8080, Stage.CHANGE_LOG, ()),), model_switch=S1)
        report = correlation_service.correlate(hypothesis, self.change_log, (self.outage,))
        self.assertEqual(report.label_of(PORT8080), UNKNOWN)

    def test_negative_slack(self):
        with self.assertRaises(InputError):
            correlation_service.correlate(self.hypothesis, self.change_log, (), slack=-1)

    def test_duplicate_signature_names(self):
        with self.assertRaises(InputError):
            correlation_service.with_builtins((FaultSignature('TcamOverflow', code_equals='X'),))


class LogFileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_fault_log_file(self):
        entries = (
            FaultLogEntry(90, 130, S2, 'SWITCH_UNRESPONSIVE', 'S2 injoignable'),
            FaultLogEntry(100, None, S1, 'TCAM_OVERFLOW', ''),
        )
        correlation_service.save_fault_log(entries, self.path('faults.jsonl'))
        self.assertEqual(correlation_service.load_fault_log(self.path('faults.jsonl')), entries)

    def test_end_before_start_rejected(self):
        with open(self.path('faults.jsonl'), 'w', encoding='utf-8') as handle:
            handle.write(json.dumps({'start': 10, 'end': 5, 'switch': 'S1', 'code': 'X'}) + '\n')
        with self.assertRaises(InputError):
            correlation_service.load_fault_log(self.path('faults.jsonl'))

    def test_signature_file(self):
        with open(self.path('signatures.json'), 'w', encoding='utf-8') as handle:
            json.dump([{'name': 'LinkFlap', 'messageContains': 'flap'}], handle)
        signatures = correlation_service.load_signatures(self.path('signatures.json'))
        self.assertEqual(signatures, (FaultSignature('LinkFlap', message_contains='flap'),))

    def test_signature_needs_a_matcher(self):
        with open(self.path('signatures.json'), 'w', encoding='utf-8') as handle:
            json.dump([{'name': 'Empty'}], handle)
        with self.assertRaises(InputError):
            correlation_service.load_signatures(self.path('signatures.json'))

    def test_report_file(self):
        result = scenario_service.run(scenario_service.unresponsive_switch())
        correlation_service.save_report(result['root_causes'], self.path('rootcause.json'))
        with open(self.path('rootcause.json'), encoding='utf-8') as handle:
            data = json.load(handle)
        first = data['attributions'][0]
        self.assertEqual((first['object'], first['label']), ('Filter:port8080', 'UnresponsiveSwitch'))
        self.assertEqual(first['evidence']['faults'][0]['switch'], 'S2')


class AppConfigTests(SimpleTestCase):
    def test_app_is_registered(self):
        self.assertEqual(apps.get_app_config('Correlation').verbose_name, "Corrélation d'événements")
