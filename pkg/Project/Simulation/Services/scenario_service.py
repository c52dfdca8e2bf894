"""
Bibliothèque de scénarios : politique trois tiers, instance gloutonne de
référence et cas d'usage de corrélation (débordement TCAM, switch
injoignable, trop de règles manquantes).
"""
import structlog

from Correlation.models import FaultLogEntry, SWITCH_UNRESPONSIVE_CODE
from Correlation.Services.correlation_service import correlation_service
from Deployment.models import DeploymentResult, TcamStore
from Deployment.Services.compiler_service import compiler_service
from Deployment.Services.equivalence_service import equivalence_service
from Deployment.Services.tcam_service import tcam_service
from Localization.Services.localization_service import localization_service
from Policy.exceptions import InputError
from Policy.models import (
    ChangeAction,
    ChangeLogEntry,
    Contract,
    Endpoint,
    Epg,
    EpgPair,
    Filter,
    NetworkPolicy,
    ObjectId,
    Vrf,
)
from Policy.Services.policy_service import policy_service
from Risk.Services.risk_model_service import risk_model_service

from ..models import Fault, FaultKind, FaultPlan, Scenario

logger = structlog.get_logger(__name__)

# Horodatage des changements dans les cas d'usage de corrélation
USE_CASE_CHANGE_TS = 100


class ScenarioService:
    """
    Constructeurs de scénarios partagés par les tests et la commande demo.
    """

    @staticmethod
    def three_tier_policy(extra_web_app_filters=()):
        """
        Politique trois tiers : VRF 101, EPG Web/App/DB (EP1@S1, EP2@S2, EP3@S3),
        contrat Web-App (port80) et App-DB (port80, port700).

        Args:
            extra_web_app_filters: couples (nom, port) ajoutés au contrat Web-App
        """
        vrf = ObjectId.vrf('101')
        web, app, db = ObjectId.epg('Web'), ObjectId.epg('App'), ObjectId.epg('DB')
        s1, s2, s3 = ObjectId.switch('S1'), ObjectId.switch('S2'), ObjectId.switch('S3')
        port80, port700 = ObjectId.filter('port80'), ObjectId.filter('port700')

        filters = [Filter(port80, 80), Filter(port700, 700)]
        web_app_filters = [port80]
        for name, port in extra_web_app_filters:
            filters.append(Filter(ObjectId.filter(name), port))
            web_app_filters.append(ObjectId.filter(name))

        return NetworkPolicy.build(
            vrfs=[Vrf(vrf)],
            epgs=[
                Epg(web, vrf, (Endpoint('EP1', s1),)),
                Epg(app, vrf, (Endpoint('EP2', s2),)),
                Epg(db, vrf, (Endpoint('EP3', s3),)),
            ],
            contracts=[
                Contract(ObjectId.contract('Web-App'), (EpgPair.of(web, app),), tuple(web_app_filters)),
                Contract(ObjectId.contract('App-DB'), (EpgPair.of(app, db),), (port80, port700)),
            ],
            filters=filters,
            switches=[s1, s2, s3],
        )

    @staticmethod
    def rule_one(compiled):
        """Première règle du TCAM de S2 dans la vue d'intention : Web → App, port 80."""
        for entry in compiled:
            rule = entry.rule
            if (rule.switch.name, rule.src.name, rule.dst.name, rule.port) == ('S2', 'Web', 'App', 80):
                return rule
        raise InputError("Règle Web → App port 80 absente de S2", stage='demo')

    @staticmethod
    def missing_rule_one():
        """Politique trois tiers, règle Web → App port 80 absente de S2 ; modèle du switch S2."""
        policy = ScenarioService.three_tier_policy()
        compiled = compiler_service.compile(policy)
        missing = ScenarioService.rule_one(compiled)
        deployment = ScenarioService._deployment_without(compiled, {missing})
        report = equivalence_service.check_equivalence(
            compiler_service.rules_of(compiled), deployment.deployed_rules()
        )
        return Scenario(
            name='missing-rule',
            policy=policy,
            compiled=compiled,
            deployment=deployment,
            report=report,
            change_log=policy_service.policy_change_log(policy),
            model='switch',
            switch=ObjectId.switch('S2'),
        )

    @staticmethod
    def greedy_instance():
        """
        Instance de référence de l'algorithme glouton, sur un seul switch S1.

        Contrats : c1 {A-B} {F1, F2} ; c2 {B-C} {F2} ; c3 {C-D, A-E} {F3} ;
        c4 {D-E} {F1, F3} ; c6 {B-D} {F1} ; c7 {C-E} {F1}.
        Toutes les règles de F2 manquent (ratio de hit 1), ainsi que la règle
        C → D de F3 (faute partielle), F3 ayant été modifié récemment.
        """
        vrf = ObjectId.vrf('101')
        s1 = ObjectId.switch('S1')
        epg = {name: ObjectId.epg(name) for name in 'ABCDE'}
        f1, f2, f3 = ObjectId.filter('F1'), ObjectId.filter('F2'), ObjectId.filter('F3')

        def contract(name, pairs, filters):
            return Contract(
                ObjectId.contract(name),
                tuple(EpgPair.of(epg[a], epg[b]) for a, b in pairs),
                tuple(filters),
            )

        policy = NetworkPolicy.build(
            vrfs=[Vrf(vrf)],
            epgs=[Epg(epg[name], vrf, (Endpoint(f"EP{name}", s1),)) for name in 'ABCDE'],
            contracts=[
                contract('c1', [('A', 'B')], [f1, f2]),
                contract('c2', [('B', 'C')], [f2]),
                contract('c3', [('C', 'D'), ('A', 'E')], [f3]),
                contract('c4', [('D', 'E')], [f1, f3]),
                contract('c6', [('B', 'D')], [f1]),
                contract('c7', [('C', 'E')], [f1]),
            ],
            filters=[Filter(f1, 80), Filter(f2, 443), Filter(f3, 8080)],
            switches=[s1],
        )
        compiled = compiler_service.compile(policy)
        removed = {
            entry.rule for entry in compiled
            if f2 in entry.objects
            or (f3 in entry.objects and entry.rule.src == epg['C'] and entry.rule.dst == epg['D'])
        }
        deployment = ScenarioService._deployment_without(compiled, removed)
        report = equivalence_service.check_equivalence(
            compiler_service.rules_of(compiled), deployment.deployed_rules()
        )
        change_log = policy_service.policy_change_log(policy)
        change_log += (ChangeLogEntry(change_log[-1].timestamp + USE_CASE_CHANGE_TS, f3, ChangeAction.MODIFY),)
        return Scenario(
            name='greedy',
            policy=policy,
            compiled=compiled,
            deployment=deployment,
            report=report,
            change_log=change_log,
            model='switch',
            switch=s1,
        )

    @staticmethod
    def tcam_overflow():
        """
        Deux filtres ajoutés au contrat Web-App alors que la TCAM de S2 ne
        peut contenir que 6 règles : les nouvelles règles ne sont pas installées.
        """
        new_filters = (('port8080', 8080), ('port8443', 8443))
        policy = ScenarioService.three_tier_policy(extra_web_app_filters=new_filters)
        compiled = compiler_service.compile(policy)
        deployment = tcam_service.deploy(
            compiled, capacities={ObjectId.switch('S2'): 6}, timestamp=USE_CASE_CHANGE_TS,
        )
        return ScenarioService._use_case('tcam-overflow', policy, compiled, deployment, new_filters)

    @staticmethod
    def unresponsive_switch():
        """
        Deux filtres créés pendant que S2 ne répondait pas : leurs règles
        n'ont jamais atteint la TCAM de S2.
        """
        new_filters = (('port8080', 8080), ('port8443', 8443))
        policy = ScenarioService.three_tier_policy(extra_web_app_filters=new_filters)
        compiled = compiler_service.compile(policy)
        s2 = ObjectId.switch('S2')
        plan = FaultPlan(
            faults=tuple(
                Fault(object=ObjectId.filter(name), kind=FaultKind.FULL, scope=s2)
                for name, _ in new_filters
            ),
            seed=0,
        )
        deployment = tcam_service.deploy(compiled, plan)
        outage = FaultLogEntry(
            start=USE_CASE_CHANGE_TS - 10,
            end=USE_CASE_CHANGE_TS + 30,
            switch=s2,
            code=SWITCH_UNRESPONSIVE_CODE,
            message="S2 ne répond plus au contrôleur",
        )
        return ScenarioService._use_case(
            'unresponsive-switch', policy, compiled, deployment, new_filters,
            fault_log=(outage,), plan=plan,
        )

    @staticmethod
    def too_many_missing_rules(epg_count=120, degree=9, pairs_per_contract=5,
                               filter_count=30, filters_per_contract=6, leaves=4):
        """
        Un switch 'hot' héberge un endpoint de chaque EPG et ne répond plus :
        toutes ses règles manquent (plus de 10 000 avec les valeurs par défaut).
        """
        vrf = ObjectId.vrf('101')
        hot = ObjectId.switch('hot')
        leaf_ids = [ObjectId.switch(f"leaf{index}") for index in range(leaves)]
        width = len(str(epg_count))
        epg_ids = [ObjectId.epg(f"epg{index:0{width}d}") for index in range(epg_count)]
        epgs = [
            Epg(epg_id, vrf, (
                Endpoint(f"{epg_id.name}-hot", hot),
                Endpoint(f"{epg_id.name}-leaf", leaf_ids[index % leaves]),
            ))
            for index, epg_id in enumerate(epg_ids)
        ]
        pairs = sorted({
            EpgPair.of(epg_ids[index], epg_ids[(index + step) % epg_count])
            for index in range(epg_count)
            for step in range(1, degree + 1)
        })
        filter_ids = [ObjectId.filter(f"filter{index:02d}") for index in range(filter_count)]
        filters = [Filter(filter_id, 10000 + index) for index, filter_id in enumerate(filter_ids)]
        contracts = []
        for number, start in enumerate(range(0, len(pairs), pairs_per_contract)):
            contracts.append(Contract(
                ObjectId.contract(f"contract{number:03d}"),
                tuple(pairs[start:start + pairs_per_contract]),
                tuple(filter_ids[(number * filters_per_contract + k) % filter_count]
                      for k in range(filters_per_contract)),
            ))
        policy = NetworkPolicy.build(
            vrfs=[Vrf(vrf)], epgs=epgs, contracts=contracts, filters=filters,
            switches=[hot, *leaf_ids],
        )
        compiled = compiler_service.compile(policy)
        plan = FaultPlan(faults=(Fault(object=hot, kind=FaultKind.FULL),), seed=0)
        deployment = tcam_service.deploy(compiled, plan)
        report = equivalence_service.check_equivalence(
            compiler_service.rules_of(compiled), deployment.deployed_rules()
        )
        outage = FaultLogEntry(
            start=0, end=None, switch=hot, code=SWITCH_UNRESPONSIVE_CODE,
            message="hot ne répond plus au contrôleur",
        )
        return Scenario(
            name='too-many-missing-rules',
            policy=policy,
            compiled=compiled,
            deployment=deployment,
            report=report,
            change_log=policy_service.policy_change_log(policy),
            fault_log=(outage,),
            plan=plan,
        )

    @staticmethod
    def by_name(name):
        builders = {
            'missing-rule': ScenarioService.missing_rule_one,
            'greedy': ScenarioService.greedy_instance,
            'tcam-overflow': ScenarioService.tcam_overflow,
            'unresponsive-switch': ScenarioService.unresponsive_switch,
            'too-many-missing-rules': ScenarioService.too_many_missing_rules,
        }
        if name not in builders:
            raise InputError(
                f"Scénario inconnu: {name} (disponibles: {', '.join(sorted(builders))})",
                stage='demo',
            )
        return builders[name]()

    @staticmethod
    def run(scenario, algo='scout', threshold=None, window=None):
        """
        Chaîne complète sur un scénario : modèle, augmentation,
        localisation puis corrélation.

        Returns:
            dict: model, signature, hypothesis, root_causes
        """
        if scenario.model == 'switch':
            model = risk_model_service.build_switch_model(scenario.policy, scenario.compiled, scenario.switch)
        else:
            model = risk_model_service.build_controller_model(scenario.policy, scenario.compiled)
        augmented, signature = risk_model_service.augment(model, scenario.report)
        hypothesis = localization_service.localize(
            signature, augmented, algo=algo, change_log=scenario.change_log,
            window=window, threshold=threshold,
        )
        fault_log = scenario.fault_log + scenario.deployment.fault_log
        root_causes = correlation_service.correlate(hypothesis, scenario.change_log, fault_log)
        logger.info(
            "scenario_finished",
            scenario=scenario.name,
            hypothesis=[str(item) for item in hypothesis.objects()],
            labels=[attribution.label for attribution in root_causes.attributions],
        )
        return {
            'model': augmented,
            'signature': signature,
            'hypothesis': hypothesis,
            'root_causes': root_causes,
        }

    @staticmethod
    def _use_case(name, policy, compiled, deployment, new_filters, fault_log=(), plan=None):
        """Journal : provisionnement de la politique d'origine puis ajout des filtres."""
        base = ScenarioService.three_tier_policy()
        change_log = policy_service.policy_change_log(base) + tuple(
            ChangeLogEntry(USE_CASE_CHANGE_TS, ObjectId.filter(filter_name), ChangeAction.ADD)
            for filter_name, _ in new_filters
        )
        report = equivalence_service.check_equivalence(
            compiler_service.rules_of(compiled), deployment.deployed_rules()
        )
        return Scenario(
            name=name,
            policy=policy,
            compiled=compiled,
            deployment=deployment,
            report=report,
            change_log=change_log,
            fault_log=tuple(fault_log),
            plan=plan,
        )

    @staticmethod
    def _deployment_without(compiled, removed):
        stores = {}
        for entry in compiled:
            stores.setdefault(entry.rule.switch, [])
            if entry.rule not in removed:
                stores[entry.rule.switch].append(entry.rule)
        return DeploymentResult(stores={
            switch: TcamStore(switch=switch, capacity=None, rules=tuple(rules))
            for switch, rules in sorted(stores.items())
        })


# Instance globale du service
scenario_service = ScenarioService()
