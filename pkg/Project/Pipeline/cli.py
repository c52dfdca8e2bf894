"""
Ligne de commande du localisateur.

Chaque sous-commande lit des fichiers, écrit de nouveaux artefacts et un
manifeste d'exécution à côté de sa sortie. Le résumé lisible part sur la
sortie standard, les journaux structlog sur la sortie d'erreur.

    python manage.py localizer compile --policy three_tier.json --out l.jsonl
"""
import argparse
import logging
import os
import sys

import structlog
from django.conf import settings

from Correlation.Services.correlation_service import correlation_service
from Deployment.Services.compiler_service import compiler_service
from Deployment.Services.equivalence_service import equivalence_service
from Deployment.Services.rule_dump_service import rule_dump_service
from Deployment.Services.tcam_service import tcam_service
from Localization.Services.localization_service import localization_service
from Policy.exceptions import ConsistencyError, InputError, LocalizerError
from Policy.models import ObjectId
from Policy.Services.policy_service import policy_service
from Policy.utils import io_utils
from Risk.Services.risk_model_service import risk_model_service
from Simulation.models import PROFILES, TrialParams
from Simulation.Serializers.simulation_serializers import GeneratorConfigSerializer
from Simulation.Services.experiment_service import experiment_service
from Simulation.Services.fault_service import fault_service
from Simulation.Services.generator_service import generator_service
from Simulation.Services.scenario_service import scenario_service

from .Services.manifest_service import manifest_service

logger = structlog.get_logger(__name__)

SCENARIOS = ('missing-rule', 'greedy', 'tcam-overflow', 'unresponsive-switch', 'too-many-missing-rules')
DEFAULT_OUTPUTS = {
    'compile': 'rules.jsonl',
    'check': 'report.json',
    'build-model': 'model.json',
    'localize': 'hypothesis.json',
    'correlate': 'rootcause.json',
    'simulate': 'results.csv',
    'bench': 'bench.csv',
    'generate': 'policy.json',
    'inject': 'injected',
    'demo': 'demo',
}
# Nombre de violations reprises dans le message d'erreur de compile
MAX_REPORTED_VIOLATIONS = 5


class LocalizerArgumentParser(argparse.ArgumentParser):
    """Les erreurs d'arguments sortent avec le code 1 et l'usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: erreur: {message}\n")


def _global_options(parser, suppress):
    """--seed, --out et --quiet, acceptés avant ou après la sous-commande."""
    parser.add_argument('--seed', type=int, default=argparse.SUPPRESS if suppress else 0,
                        help="graine globale (défaut 0)")
    parser.add_argument('--out', default=argparse.SUPPRESS if suppress else None,
                        help="fichier (ou répertoire) de sortie")
    parser.add_argument('--quiet', action='store_true', default=argparse.SUPPRESS if suppress else False,
                        help="n'affiche que les avertissements et erreurs")


def _switch(value):
    return ObjectId.switch(value)


def _fault_counts(value):
    try:
        counts = [int(item) for item in value.split(',') if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"liste d'entiers attendue: {value}")
    if not counts or any(count < 0 for count in counts):
        raise argparse.ArgumentTypeError(f"nombres de fautes invalides: {value}")
    return counts


def _capacity(value):
    name, separator, capacity = value.partition('=')
    if not separator or not name:
        raise argparse.ArgumentTypeError(f"format SWITCH=N attendu: {value}")
    try:
        capacity = int(capacity)
    except ValueError:
        raise argparse.ArgumentTypeError(f"capacité entière attendue: {value}")
    if capacity < 0:
        raise argparse.ArgumentTypeError(f"capacité négative: {value}")
    return ObjectId.switch(name), capacity


def build_parser():
    parser = LocalizerArgumentParser(
        prog='localizer',
        description="Localisation de fautes de politique réseau (SDN)",
    )
    _global_options(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)

    subparsers = parser.add_subparsers(dest='command', metavar='<sous-commande>', parser_class=LocalizerArgumentParser)
    subparsers.required = True

    def add(name, handler, help_text):
        sub = subparsers.add_parser(name, parents=[common], help=help_text)
        sub.set_defaults(handler=handler)
        return sub

    sub = add('compile', handle_compile, "compile la politique en règles (type L)")
    sub.add_argument('--policy', required=True)
    sub.add_argument('--switch', type=_switch, help="ne garder que les règles de ce switch")

    sub = add('check', handle_check, "compare règles attendues et déployées")
    sub.add_argument('--desired', required=True)
    sub.add_argument('--actual', required=True)

    sub = add('build-model', handle_build_model, "construit un modèle de risques")
    sub.add_argument('--policy', required=True)
    sub.add_argument('--switch', type=_switch, help="modèle du switch (sinon modèle contrôleur)")
    sub.add_argument('--report', help="rapport de règles manquantes à appliquer")

    sub = add('localize', handle_localize, "localise les objets fautifs")
    sub.add_argument('--model', required=True)
    sub.add_argument('--report')
    sub.add_argument('--changelog')
    sub.add_argument('--algo', choices=('scout', 'score'), default='scout')
    sub.add_argument('--threshold', type=float)
    sub.add_argument('--window', type=int)
    sub.add_argument('--selection', choices=('all', 'latest'))

    sub = add('correlate', handle_correlate, "attribue une cause racine")
    sub.add_argument('--hypothesis', required=True)
    sub.add_argument('--changelog', required=True)
    sub.add_argument('--faultlog', required=True)
    sub.add_argument('--signatures')
    sub.add_argument('--slack', type=int)

    sub = add('simulate', handle_simulate, "balayage précision / rappel / gamma")
    source = sub.add_mutually_exclusive_group()
    source.add_argument('--profile', choices=sorted(PROFILES), default='testbed')
    source.add_argument('--policy')
    sub.add_argument('--faults', type=_fault_counts, default=[1], help="ex. 1,3,5,10")
    sub.add_argument('--algo', choices=('scout', 'score', 'both'), default='both')
    sub.add_argument('--runs', type=int, default=10)
    sub.add_argument('--model', choices=('controller', 'switch'), default='controller')
    sub.add_argument('--switch', type=_switch)
    sub.add_argument('--mix', type=float)
    sub.add_argument('--threshold', type=float)
    sub.add_argument('--window', type=int)
    sub.add_argument('--stale-changelog', action='store_true')
    sub.add_argument('--workers', type=int)

    sub = add('bench', handle_bench, "temps d'exécution selon le nombre de switches")
    sub.add_argument('--max-switches', type=int, default=500)
    sub.add_argument('--step', type=int, default=50)
    sub.add_argument('--faults', type=int, default=10)
    sub.add_argument('--algo', choices=('scout', 'score'), default='scout')

    sub = add('generate', handle_generate, "génère une politique synthétique")
    source = sub.add_mutually_exclusive_group()
    source.add_argument('--profile', choices=sorted(PROFILES), default='testbed')
    source.add_argument('--config', help="configuration JSON du générateur")

    sub = add('inject', handle_inject, "injecte des fautes et produit les dumps observés")
    sub.add_argument('--policy', required=True)
    plan_source = sub.add_mutually_exclusive_group()
    plan_source.add_argument('--faults', type=int, default=1)
    plan_source.add_argument('--plan', help="plan de fautes JSON existant")
    sub.add_argument('--mix', type=float)
    sub.add_argument('--switch', type=_switch, help="limiter les fautes à ce switch")
    sub.add_argument('--capacity', type=_capacity, action='append', default=[], help="SWITCH=N")
    sub.add_argument('--timestamp', type=int, help="horodatage du déploiement")
    sub.add_argument('--stale-changelog', action='store_true')

    sub = add('demo', handle_demo, "scénario de bout en bout")
    sub.add_argument('--scenario', choices=SCENARIOS, default='unresponsive-switch')
    sub.add_argument('--algo', choices=('scout', 'score'), default='scout')

    sub = add('replay', handle_replay, "rejoue une exécution depuis son manifeste")
    sub.add_argument('--manifest', required=True)

    return parser


# --- étapes réutilisées par les sous-commandes et par demo ---

def load_valid_policy(path, stage):
    """Charge une politique et refuse toute violation d'invariant."""
    policy = policy_service.load_policy(path)
    violations = policy_service.validate_policy(policy)
    if violations:
        shown = '; '.join(str(violation) for violation in violations[:MAX_REPORTED_VIOLATIONS])
        more = len(violations) - MAX_REPORTED_VIOLATIONS
        suffix = f" (+{more} autres)" if more > 0 else ''
        raise InputError(f"{path}: politique invalide: {shown}{suffix}", stage=stage)
    return policy


def run_check(desired, actual, out):
    report = equivalence_service.check_equivalence(
        rule_dump_service.load_rules(desired), rule_dump_service.load_rules(actual)
    )
    rule_dump_service.save_report(report, out)
    return report


def run_build_model(policy_path, switch, report_path, out):
    policy = load_valid_policy(policy_path, stage='risk-model')
    compiled = compiler_service.compile(policy)
    if switch is not None:
        model = risk_model_service.build_switch_model(policy, compiled, switch)
    else:
        model = risk_model_service.build_controller_model(policy, compiled)
    if report_path:
        model, _ = risk_model_service.augment(model, rule_dump_service.load_report(report_path))
    risk_model_service.save_model(model, out)
    return model


def run_localize(model_path, report_path, changelog_path, out, algo='scout',
                 threshold=None, window=None, selection=None):
    model = risk_model_service.load_model(model_path)
    if report_path:
        model, signature = risk_model_service.augment(model, rule_dump_service.load_report(report_path))
    else:
        signature = risk_model_service.signature_of(model)
    change_log = policy_service.load_change_log(changelog_path) if changelog_path else ()
    hypothesis = localization_service.localize(
        signature, model, algo=algo, change_log=change_log,
        window=window, selection=selection, threshold=threshold,
    )
    localization_service.save_hypothesis(hypothesis, out)
    return hypothesis


def run_correlate(hypothesis_path, changelog_path, faultlog_path, out, signatures_path=None, slack=None):
    hypothesis = localization_service.load_hypothesis(hypothesis_path)
    change_log = policy_service.load_change_log(changelog_path)
    fault_log = correlation_service.load_fault_log(faultlog_path)
    if signatures_path:
        signatures = correlation_service.with_builtins(correlation_service.load_signatures(signatures_path))
    else:
        signatures = None
    report = correlation_service.correlate(hypothesis, change_log, fault_log, signatures=signatures, slack=slack)
    correlation_service.save_report(report, out)
    return report


def _describe_attribution(attribution):
    switches = sorted({str(entry.switch) for entry in attribution.fault_entries})
    where = f" ({', '.join(switches)})" if switches else ''
    return f"{attribution.object}: {attribution.label}{where}"


# --- sous-commandes ---
# Chaque handler renvoie (entrées, sorties) pour le manifeste.

def handle_compile(args):
    policy = load_valid_policy(args.policy, stage='compile')
    compiled = compiler_service.compile(policy)
    rules = compiler_service.rules_of(compiled, switch=args.switch)
    rule_dump_service.save_rules(rules, args.out)
    switches = len({rule.switch for rule in rules})
    print(f"{len(rules)} règle(s) compilée(s) sur {switches} switch(es) -> {args.out}")
    return [args.policy], [args.out]


def handle_check(args):
    report = run_check(args.desired, args.actual, args.out)
    if report.is_empty():
        print(f"Déploiement conforme -> {args.out}")
    else:
        print(
            f"{len(report.missing)} règle(s) manquante(s), {len(report.extra)} en trop, "
            f"sur {len(report.per_switch)} switch(es) -> {args.out}"
        )
    return [args.desired, args.actual], [args.out]


def handle_build_model(args):
    model = run_build_model(args.policy, args.switch, args.report, args.out)
    scope = f"switch {args.switch}" if args.switch else 'contrôleur'
    print(
        f"Modèle {scope}: {len(model.elements())} élément(s), {len(model.risks())} risque(s), "
        f"{len(model.fail_elements())} en échec -> {args.out}"
    )
    return [path for path in (args.policy, args.report) if path], [args.out]


def handle_localize(args):
    hypothesis = run_localize(
        args.model, args.report, args.changelog, args.out, algo=args.algo,
        threshold=args.threshold, window=args.window, selection=args.selection,
    )
    for entry in hypothesis.entries:
        print(f"{entry.object} [{entry.stage.value}]")
    print(f"{len(hypothesis)} objet(s) suspect(s), {len(hypothesis.residual)} observation(s) inexpliquée(s) -> {args.out}")
    return [path for path in (args.model, args.report, args.changelog) if path], [args.out]


def handle_correlate(args):
    report = run_correlate(
        args.hypothesis, args.changelog, args.faultlog, args.out,
        signatures_path=args.signatures, slack=args.slack,
    )
    for attribution in report.attributions:
        print(_describe_attribution(attribution))
    inputs = [path for path in (args.hypothesis, args.changelog, args.faultlog, args.signatures) if path]
    return inputs, [args.out]


def handle_simulate(args):
    if args.policy:
        policy = load_valid_policy(args.policy, stage='simulation')
    else:
        policy = generator_service.generate_policy(generator_service.profile(args.profile, seed=args.seed))
    params = TrialParams(
        seed=args.seed,
        model=args.model,
        switch=args.switch,
        mix=fault_service.mix if args.mix is None else args.mix,
        threshold=localization_service.threshold if args.threshold is None else args.threshold,
        window=localization_service.window if args.window is None else args.window,
        selection=localization_service.selection,
        stale_changelog=args.stale_changelog,
        kinds=fault_service.kinds,
        fraction_range=fault_service.fraction_range,
    )
    if args.runs < 1:
        raise InputError("--runs doit être strictement positif", stage='simulation')
    algos = ('scout', 'score') if args.algo == 'both' else (args.algo,)
    frame = experiment_service.run_sweep(
        policy, args.faults, algos=algos, runs=args.runs, params=params, workers=args.workers,
    )
    experiment_service.save_csv(frame, args.out)
    print(experiment_service.summarize(frame).to_string(index=False))
    return [args.policy] if args.policy else [], [args.out]


def handle_bench(args):
    sizes = experiment_service.bench_sizes(args.max_switches, args.step)
    frame = experiment_service.bench_scalability(sizes, faults=args.faults, seed=args.seed, algo=args.algo)
    experiment_service.save_csv(frame, args.out)
    print(frame.to_string(index=False))
    if len(frame) >= 2:
        print(f"Exposant de croissance: {experiment_service.growth_exponent(frame):.2f}")
    return [], [args.out]


def handle_generate(args):
    if args.config:
        data = io_utils.read_json(args.config, stage='simulation')
        serializer = GeneratorConfigSerializer(data=data)
        if not serializer.is_valid():
            messages = io_utils.flatten_errors(serializer.errors)
            raise InputError(f"{args.config}: " + '; '.join(messages), stage='simulation')
        config = GeneratorConfigSerializer.to_config(serializer.validated_data)
        inputs = [args.config]
    else:
        config = generator_service.profile(args.profile, seed=args.seed)
        inputs = []
    policy = generator_service.generate_policy(config)
    policy_service.save_policy(policy, args.out)
    print(
        f"Politique générée: {len(policy.epgs)} EPG, {len(policy.contracts)} contrats, "
        f"{len(policy.filters)} filtres, {len(policy.pairs())} paires -> {args.out}"
    )
    return inputs, [args.out]


def handle_inject(args):
    policy = load_valid_policy(args.policy, stage='simulation')
    compiled = compiler_service.compile(policy)
    if args.plan:
        plan = fault_service.load_plan(args.plan)
    else:
        plan = fault_service.inject_faults(compiled, args.faults, mix=args.mix, seed=args.seed, scope=args.switch)

    capacities = dict(args.capacity)
    unknown = sorted(switch for switch in capacities if switch not in policy.switches)
    if unknown:
        raise InputError(f"Switch inconnu: {unknown[0]}", stage='simulation')

    change_log = policy_service.policy_change_log(policy)
    if not args.stale_changelog:
        change_log = fault_service.fault_change_log(change_log, plan)
    timestamp = args.timestamp
    if timestamp is None:
        timestamp = max((entry.timestamp for entry in change_log), default=0)
    deployment = tcam_service.deploy(compiled, plan, capacities=capacities, timestamp=timestamp)

    os.makedirs(args.out, exist_ok=True)
    outputs = {
        'plan': os.path.join(args.out, 'plan.json'),
        'desired': os.path.join(args.out, 'desired.jsonl'),
        'actual': os.path.join(args.out, 'actual.jsonl'),
        'changelog': os.path.join(args.out, 'changelog.jsonl'),
        'faultlog': os.path.join(args.out, 'faultlog.jsonl'),
    }
    fault_service.save_plan(plan, outputs['plan'])
    rule_dump_service.save_rules(compiler_service.rules_of(compiled), outputs['desired'])
    rule_dump_service.save_rules(deployment.deployed_rules(), outputs['actual'])
    policy_service.save_change_log(change_log, outputs['changelog'])
    correlation_service.save_fault_log(deployment.fault_log, outputs['faultlog'])

    print(
        f"{len(plan)} faute(s) injectée(s) ({', '.join(str(item) for item in plan.objects()) or 'aucune'}), "
        f"{len(deployment.deployed_rules())}/{len(compiled)} règle(s) déployée(s) -> {args.out}"
    )
    return [path for path in (args.policy, args.plan) if path], list(outputs.values())


def handle_demo(args):
    """
    Chaîne complète sur un scénario, en passant par les fichiers :
    compile, déploiement observé, check, build-model, localize, correlate.
    """
    scenario = scenario_service.by_name(args.scenario)
    os.makedirs(args.out, exist_ok=True)
    paths = {
        name: os.path.join(args.out, filename)
        for name, filename in (
            ('policy', 'policy.json'),
            ('desired', 'desired.jsonl'),
            ('actual', 'actual.jsonl'),
            ('changelog', 'changelog.jsonl'),
            ('faultlog', 'faultlog.jsonl'),
            ('report', 'report.json'),
            ('model', 'model.json'),
            ('hypothesis', 'hypothesis.json'),
            ('rootcause', 'rootcause.json'),
        )
    }
    policy_service.save_policy(scenario.policy, paths['policy'])
    rule_dump_service.save_rules(compiler_service.rules_of(scenario.compiled), paths['desired'])
    rule_dump_service.save_rules(scenario.deployment.deployed_rules(), paths['actual'])
    policy_service.save_change_log(scenario.change_log, paths['changelog'])
    correlation_service.save_fault_log(scenario.fault_log + scenario.deployment.fault_log, paths['faultlog'])

    report = run_check(paths['desired'], paths['actual'], paths['report'])
    switch = scenario.switch if scenario.model == 'switch' else None
    run_build_model(paths['policy'], switch, None, paths['model'])
    hypothesis = run_localize(
        paths['model'], paths['report'], paths['changelog'], paths['hypothesis'], algo=args.algo,
    )
    root_causes = run_correlate(paths['hypothesis'], paths['changelog'], paths['faultlog'], paths['rootcause'])

    print(f"Scénario {scenario.name}: {len(report.missing)} règle(s) manquante(s)")
    print(f"Hypothèse: {', '.join(str(item) for item in hypothesis.objects()) or 'vide'}")
    for attribution in root_causes.attributions:
        print(f"Cause racine - {_describe_attribution(attribution)}")
    return [], list(paths.values())


def handle_replay(args):
    manifest = manifest_service.load(args.manifest)
    if manifest['subcommand'] == 'replay':
        raise InputError("Un manifeste de replay ne peut pas être rejoué", stage='replay')
    code = main(list(manifest['argv']))
    if code != 0:
        raise InputError(f"La ré-exécution a échoué (code {code})", stage='replay')
    mismatches = manifest_service.compare(manifest)
    if mismatches:
        raise ConsistencyError(f"Empreintes différentes: {', '.join(mismatches)}", stage='replay')
    print(f"Ré-exécution identique: {len(manifest['outputs'])} sortie(s) vérifiée(s)")
    return [args.manifest], []


def _parameters(args):
    parameters = {}
    for key, value in sorted(vars(args).items()):
        if key in ('handler', 'command', 'quiet'):
            continue
        if isinstance(value, (list, tuple)):
            value = [str(item) if not isinstance(item, (int, float)) else item for item in value]
        elif value is not None and not isinstance(value, (bool, int, float, str)):
            value = str(value)
        parameters[key] = value
    return parameters


def main(argv=None):
    """
    Point d'entrée.

    Returns:
        int: 0 succès, 1 entrée invalide ou erreur d'étape, 2 invariant interne violé
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1

    if args.quiet:
        logging.getLogger().setLevel(logging.WARNING)
    if args.out is None:
        args.out = DEFAULT_OUTPUTS.get(args.command)

    logger.info("command_started", command=args.command, version=settings.LOCALIZER_VERSION)
    try:
        inputs, outputs = args.handler(args)
        if args.command != 'replay':
            manifest = manifest_service.build(
                args.command, argv, inputs, outputs, args.seed, _parameters(args),
            )
            manifest_service.write(args.out, manifest)
    except ConsistencyError as exc:
        logger.error("command_failed", command=args.command, stage=exc.stage, code=exc.code)
        print(f"[{exc.stage}] {exc.message}", file=sys.stderr)
        return 2
    except LocalizerError as exc:
        logger.error("command_failed", command=args.command, stage=exc.stage, code=exc.code)
        print(f"[{exc.stage}] {exc.message}", file=sys.stderr)
        return 1
    logger.info("command_finished", command=args.command)
    return 0
