import json
import os
import tempfile
from dataclasses import replace

from django.test import SimpleTestCase

from Policy.exceptions import PolicyParseError
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
from Policy.Serializers.policy_serializers import PolicyDocumentSerializer
from Policy.Services.policy_service import policy_service
from Policy.utils import io_utils
from Simulation.Services.scenario_service import scenario_service


def three_tier_document():
    return {
        'vrfs': [{'name': '101'}],
        'epgs': [
            {'name': 'Web', 'vrf': '101', 'endpoints': [{'id': 'EP1', 'switch': 'S1'}]},
            {'name': 'App', 'vrf': '101', 'endpoints': [{'id': 'EP2', 'switch': 'S2'}]},
            {'name': 'DB', 'vrf': '101', 'endpoints': [{'id': 'EP3', 'switch': 'S3'}]},
        ],
        'contracts': [
            {'name': 'Web-App', 'epgA': 'Web', 'epgB': 'App', 'filters': ['port80']},
            {'name': 'App-DB', 'epgA': 'App', 'epgB': 'DB', 'filters': ['port80', 'port700']},
        ],
        'filters': [{'name': 'port80', 'port': 80}, {'name': 'port700', 'port': 700}],
        'switches': ['S1', 'S2', 'S3'],
    }


class ObjectIdTests(SimpleTestCase):
    def test_parse_and_format(self):
        object_id = ObjectId.parse('EPG:Web')
        self.assertEqual(object_id, ObjectId.epg('Web'))
        self.assertEqual(str(object_id), 'EPG:Web')

    def test_order_is_kind_then_name(self):
        ids = [ObjectId.switch('S1'), ObjectId.filter('a'), ObjectId.epg('Web'), ObjectId.vrf('z'), ObjectId.contract('c')]
        self.assertEqual(
            [item.kind for item in sorted(ids)],
            [ObjectKind.VRF, ObjectKind.EPG, ObjectKind.CONTRACT, ObjectKind.FILTER, ObjectKind.SWITCH],
        )

    def test_pair_is_canonical(self):
        web, app = ObjectId.epg('Web'), ObjectId.epg('App')
        self.assertEqual(EpgPair.of(web, app), EpgPair.of(app, web))
        self.assertEqual(EpgPair.of(web, app).a, app)


class PolicyValidationTests(SimpleTestCase):
    def setUp(self):
        self.policy = scenario_service.three_tier_policy()

    def rules_of(self, policy):
        return {violation.rule for violation in policy_service.validate_policy(policy)}

    def test_three_tier_policy_is_valid(self):
        self.assertEqual(policy_service.validate_policy(self.policy), [])

    def test_empty_policy_is_valid(self):
        self.assertEqual(policy_service.validate_policy(NetworkPolicy.build()), [])

    def test_unknown_vrf_reported(self):
        epgs = [replace(epg, vrf=ObjectId.vrf('999')) if epg.name == 'Web' else epg for epg in self.policy.epgs]
        policy = replace(self.policy, epgs=tuple(epgs))
        self.assertIn('referential_integrity', self.rules_of(policy))

    def test_deleted_filter_reported_on_its_contract(self):
        filters = [item for item in self.policy.filters if item.name != 'port700']
        policy = replace(self.policy, filters=tuple(filters))
        violations = policy_service.validate_policy(policy)
        self.assertEqual(
            [(violation.object, violation.rule) for violation in violations],
            [(ObjectId.contract('App-DB'), 'referential_integrity')],
        )

    def test_cross_vrf_contract_reported(self):
        other = ObjectId.vrf('202')
        epgs = [replace(epg, vrf=other) if epg.name == 'DB' else epg for epg in self.policy.epgs]
        policy = NetworkPolicy.build(
            vrfs=[*self.policy.vrfs, Vrf(other)], epgs=epgs, contracts=self.policy.contracts,
            filters=self.policy.filters, switches=self.policy.switches,
        )
        violations = policy_service.validate_policy(policy)
        self.assertEqual([violation.rule for violation in violations], ['same_vrf'])
        self.assertEqual(violations[0].object, ObjectId.contract('App-DB'))

    def test_port_out_of_range(self):
        filters = [replace(item, port=70000) if item.name == 'port700' else item for item in self.policy.filters]
        policy = replace(self.policy, filters=tuple(filters))
        self.assertEqual(self.rules_of(policy), {'port_range'})

    def test_deny_action_rejected(self):
        filters = [replace(item, action='deny') if item.name == 'port80' else item for item in self.policy.filters]
        policy = replace(self.policy, filters=tuple(filters))
        self.assertEqual(self.rules_of(policy), {'action_allow'})

    def test_contract_without_filter(self):
        contracts = [replace(item, filters=()) if item.name == 'Web-App' else item for item in self.policy.contracts]
        policy = replace(self.policy, contracts=tuple(contracts))
        self.assertEqual(self.rules_of(policy), {'contract_filters'})

    def test_pair_in_two_contracts(self):
        web, app = ObjectId.epg('Web'), ObjectId.epg('App')
        extra = Contract(ObjectId.contract('Dup'), (EpgPair.of(web, app),), (ObjectId.filter('port700'),))
        policy = NetworkPolicy.build(
            vrfs=self.policy.vrfs, epgs=self.policy.epgs, contracts=[*self.policy.contracts, extra],
            filters=self.policy.filters, switches=self.policy.switches,
        )
        self.assertEqual(self.rules_of(policy), {'one_contract_per_pair'})

    def test_endpoint_on_unknown_switch(self):
        epgs = [
            replace(epg, endpoints=(Endpoint('EP1', ObjectId.switch('S9')),)) if epg.name == 'Web' else epg
            for epg in self.policy.epgs
        ]
        policy = replace(self.policy, epgs=tuple(epgs))
        self.assertEqual(self.rules_of(policy), {'endpoint_placement'})

    def test_duplicate_filter_match(self):
        filters = [*self.policy.filters, Filter(ObjectId.filter('http'), 80)]
        contracts = [
            replace(item, filters=(*item.filters, ObjectId.filter('http'))) if item.name == 'Web-App' else item
            for item in self.policy.contracts
        ]
        policy = NetworkPolicy.build(
            vrfs=self.policy.vrfs, epgs=self.policy.epgs, contracts=contracts,
            filters=filters, switches=self.policy.switches,
        )
        self.assertEqual(self.rules_of(policy), {'filter_match_unique'})


class PolicyMutationTests(SimpleTestCase):
    def setUp(self):
        self.policy = scenario_service.three_tier_policy()

    def test_remove_epg_drops_its_contract(self):
        policy = policy_service.remove_object(self.policy, ObjectId.epg('Web'))
        self.assertNotIn(ObjectId.epg('Web'), policy.epg_index)
        self.assertEqual([contract.name for contract in policy.contracts], ['App-DB'])
        self.assertEqual(policy_service.validate_policy(policy), [])

    def test_remove_filter_keeps_contract_with_other_filters(self):
        policy = policy_service.remove_object(self.policy, ObjectId.filter('port80'))
        self.assertEqual([contract.name for contract in policy.contracts], ['App-DB'])
        self.assertEqual(policy.contract_index[ObjectId.contract('App-DB')].filters, (ObjectId.filter('port700'),))

    def test_remove_vrf_drops_everything_below(self):
        policy = policy_service.remove_object(self.policy, ObjectId.vrf('101'))
        self.assertEqual(policy.epgs, ())
        self.assertEqual(policy.contracts, ())

    def test_remove_switch_drops_endpoints(self):
        policy = policy_service.remove_object(self.policy, ObjectId.switch('S2'))
        self.assertEqual(policy.epg_index[ObjectId.epg('App')].endpoints, ())
        self.assertEqual(policy_service.validate_policy(policy), [])


class PolicyFileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def write(self, name, data):
        with open(self.path(name), 'w', encoding='utf-8') as handle:
            handle.write(data if isinstance(data, str) else json.dumps(data))
        return self.path(name)

    def test_load_document(self):
        policy = policy_service.load_policy(self.write('policy.json', three_tier_document()))
        self.assertEqual(policy, scenario_service.three_tier_policy())

    def test_save_then_load_preserves_policy(self):
        policy = scenario_service.greedy_instance().policy
        policy_service.save_policy(policy, self.path('greedy.json'))
        self.assertEqual(policy_service.load_policy(self.path('greedy.json')), policy)

    def test_multi_pair_contract_written_as_pairs(self):
        policy = scenario_service.greedy_instance().policy
        document = PolicyDocumentSerializer.from_policy(policy)
        c3 = next(item for item in document['contracts'] if item['name'] == 'c3')
        self.assertEqual(c3['pairs'], [['A', 'E'], ['C', 'D']])

    def test_missing_key_names_field(self):
        document = three_tier_document()
        del document['vrfs']
        with self.assertRaises(PolicyParseError) as ctx:
            policy_service.load_policy(self.write('policy.json', document))
        self.assertIn('vrfs', ctx.exception.message)
        self.assertEqual(ctx.exception.stage, 'policy')

    def test_nested_error_path(self):
        document = three_tier_document()
        del document['epgs'][1]['vrf']
        with self.assertRaises(PolicyParseError) as ctx:
            policy_service.load_policy(self.write('policy.json', document))
        self.assertIn('epgs[1].vrf', ctx.exception.message)

    def test_invalid_json_reports_line(self):
        with self.assertRaises(PolicyParseError) as ctx:
            policy_service.load_policy(self.write('policy.json', '{\n"vrfs": [,\n}'))
        self.assertIn('ligne 2', ctx.exception.message)

    def test_missing_file(self):
        with self.assertRaises(PolicyParseError) as ctx:
            policy_service.load_policy(self.path('absent.json'))
        self.assertEqual(ctx.exception.code, 'file_not_found')

    def test_loaded_policy_with_violations_is_still_returned(self):
        document = three_tier_document()
        document['filters'][0]['port'] = -1
        policy = policy_service.load_policy(self.write('policy.json', document))
        self.assertEqual({v.rule for v in policy_service.validate_policy(policy)}, {'port_range'})


class ChangeLogTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = os.path.join(self.tmp.name, 'changes.jsonl')

    def test_provisioning_log_follows_object_order(self):
        policy = scenario_service.three_tier_policy()
        log = policy_service.policy_change_log(policy)
        self.assertEqual([entry.object for entry in log], policy.all_ids())
        self.assertEqual([entry.timestamp for entry in log], list(range(1, len(log) + 1)))
        self.assertTrue(all(entry.action == ChangeAction.ADD for entry in log))

    def test_save_then_load(self):
        log = policy_service.policy_change_log(scenario_service.three_tier_policy())
        policy_service.save_change_log(log, self.path)
        self.assertEqual(policy_service.load_change_log(self.path), log)

    def test_decreasing_timestamp_rejected(self):
        lines = [
            {'ts': 5, 'object': {'kind': 'Filter', 'name': 'port80'}, 'action': 'Add'},
            {'ts': 3, 'object': {'kind': 'Filter', 'name': 'port700'}, 'action': 'Modify'},
        ]
        with open(self.path, 'w', encoding='utf-8') as handle:
            handle.write('\n'.join(json.dumps(line) for line in lines))
        with self.assertRaises(PolicyParseError) as ctx:
            policy_service.load_change_log(self.path)
        self.assertIn('ligne 2', ctx.exception.message)

    def test_unknown_kind_rejected(self):
        with open(self.path, 'w', encoding='utf-8') as handle:
            handle.write(json.dumps({'ts': 1, 'object': {'kind': 'Tenant', 'name': 't'}, 'action': 'Add'}))
        with self.assertRaises(PolicyParseError):
            policy_service.load_change_log(self.path)


class FlattenErrorsTests(SimpleTestCase):
    def test_nested_paths(self):
        detail = {'epgs': [{}, {'vrf': ['obligatoire']}], 'non_field_errors': ['global']}
        self.assertEqual(io_utils.flatten_errors(detail), ['epgs[1].vrf: obligatoire', 'global'])
