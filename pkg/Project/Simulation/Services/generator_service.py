import random
from dataclasses import replace
from itertools import combinations

import structlog

from Policy.exceptions import GeneratorConfigError
from Policy.models import (
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

from ..models import PROFILES, GeneratorConfig

logger = structlog.get_logger(__name__)

PORT_RANGE = (1024, 49152)
SHARING_MODES = ('zipf', 'balanced')
REPAIR_ATTEMPTS = 2000


class GeneratorService:
    """
    Générateur de politiques synthétiques.

    Les dépendances suivent une loi de Zipf : quelques EPG, contrats et
    filtres concentrent l'essentiel des paires, comme dans les déploiements
    réels où des objets sont partagés par des centaines de paires.
    """

    @staticmethod
    def profile(name, seed=0):
        """Configuration d'un profil nommé ('testbed', 'production')."""
        if name not in PROFILES:
            raise GeneratorConfigError(
                f"Profil inconnu: {name} (disponibles: {', '.join(sorted(PROFILES))})"
            )
        return replace(PROFILES[name], seed=seed)

    @staticmethod
    def scaled_config(switches, seed=0):
        """
        Charge de travail proportionnelle au nombre de switches,
        pour les mesures de passage à l'échelle.
        """
        return GeneratorConfig(
            vrfs=1,
            epgs=4 * switches,
            contracts=2 * switches,
            filters=max(4, switches // 5),
            switches=switches,
            pairs=3 * switches,
            endpoints_per_epg=1,
            seed=seed,
        )

    @staticmethod
    def check_config(config):
        """
        Vérifie la faisabilité d'une configuration.

        Raises:
            GeneratorConfigError: configuration infaisable
        """
        counts = {
            'vrfs': config.vrfs, 'epgs': config.epgs, 'contracts': config.contracts,
            'filters': config.filters, 'switches': config.switches, 'pairs': config.pairs,
            'endpoints_per_epg': config.endpoints_per_epg,
            'max_filters_per_contract': config.max_filters_per_contract,
        }
        for name, value in counts.items():
            if value <= 0:
                raise GeneratorConfigError(f"{name} doit être strictement positif (reçu {value})")
        if config.sharing not in SHARING_MODES:
            raise GeneratorConfigError(
                f"Mode de partage inconnu: {config.sharing} (disponibles: {', '.join(SHARING_MODES)})"
            )
        if config.zipf_exponent < 0:
            raise GeneratorConfigError("zipf_exponent doit être positif ou nul")
        if config.contracts > config.pairs:
            raise GeneratorConfigError(
                f"Plus de contrats ({config.contracts}) que de paires d'EPG ({config.pairs})"
            )
        sizes = GeneratorService._vrf_sizes(config)
        if min(sizes) < 2:
            raise GeneratorConfigError(
                f"Chaque VRF doit contenir au moins 2 EPG ({config.epgs} EPG pour {config.vrfs} VRF)"
            )
        capacity = sum(size * (size - 1) // 2 for size in sizes)
        if config.pairs > capacity:
            raise GeneratorConfigError(
                f"{config.pairs} paires demandées, au plus {capacity} possibles dans les VRF"
            )
        covering = sum((size + 1) // 2 for size in sizes)
        if config.pairs < covering:
            raise GeneratorConfigError(
                f"{config.pairs} paires ne suffisent pas à couvrir les {config.epgs} EPG "
                f"(minimum {covering})"
            )
        if config.filters > config.contracts * config.max_filters_per_contract:
            raise GeneratorConfigError(
                f"{config.filters} filtres ne peuvent pas tous être utilisés par "
                f"{config.contracts} contrats de {config.max_filters_per_contract} filtres au plus"
            )
        if config.filters > PORT_RANGE[1] - PORT_RANGE[0]:
            raise GeneratorConfigError(f"Trop de filtres: {config.filters}")
        if config.sharing == 'balanced':
            GeneratorService._check_balanced(config, sizes)

    @staticmethod
    def generate_policy(config):
        """
        Génère une politique valide, déterministe pour une graine donnée.

        Args:
            config: GeneratorConfig

        Returns:
            NetworkPolicy avec exactement les nombres d'objets demandés

        Raises:
            GeneratorConfigError: configuration infaisable
        """
        GeneratorService.check_config(config)
        rng = random.Random(config.seed)

        vrfs = [ObjectId.vrf(GeneratorService._name('vrf', index, config.vrfs)) for index in range(config.vrfs)]
        switches = [
            ObjectId.switch(GeneratorService._name('leaf', index, config.switches))
            for index in range(config.switches)
        ]
        epg_ids = [ObjectId.epg(GeneratorService._name('epg', index, config.epgs)) for index in range(config.epgs)]
        epg_vrf = {epg_id: vrfs[index % config.vrfs] for index, epg_id in enumerate(epg_ids)}

        balanced = config.sharing == 'balanced'
        epgs = []
        for epg_id in epg_ids:
            if balanced:
                offset = rng.randrange(len(switches))
                hosts = [switches[(offset + k) % len(switches)] for k in range(config.endpoints_per_epg)]
            else:
                hosts = [rng.choice(switches) for _ in range(config.endpoints_per_epg)]
            endpoints = tuple(
                Endpoint(id=f"{epg_id.name}-ep{k}", switch=host) for k, host in enumerate(hosts)
            )
            epgs.append(Epg(id=epg_id, vrf=epg_vrf[epg_id], endpoints=endpoints))

        if balanced:
            pairs = GeneratorService._generate_cycle_pairs(config, rng, epg_ids, epg_vrf)
            contracts_pairs = GeneratorService._partition_pairs_evenly(config, rng, pairs)
        else:
            pairs = GeneratorService._generate_pairs(config, rng, epg_ids, epg_vrf)
            contracts_pairs = GeneratorService._partition_pairs(config, rng, pairs)

        ports = sorted(rng.sample(range(*PORT_RANGE), config.filters))
        filters = [
            Filter(id=ObjectId.filter(GeneratorService._name('filter', index, config.filters)), port=port)
            for index, port in enumerate(ports)
        ]
        if balanced:
            contracts_filters = GeneratorService._share_filters(config, rng, [item.id for item in filters])
        else:
            contracts_filters = GeneratorService._assign_filters(config, rng, [item.id for item in filters])

        contracts = [
            Contract(
                id=ObjectId.contract(GeneratorService._name('contract', index, config.contracts)),
                pairs=tuple(contracts_pairs[index]),
                filters=tuple(contracts_filters[index]),
            )
            for index in range(config.contracts)
        ]

        policy = NetworkPolicy.build(
            vrfs=[Vrf(vrf) for vrf in vrfs],
            epgs=epgs,
            contracts=contracts,
            filters=filters,
            switches=switches,
        )
        violations = policy_service.validate_policy(policy)
        if violations:
            raise GeneratorConfigError(f"Politique générée invalide: {violations[0]}")

        logger.info(
            "policy_generated",
            seed=config.seed,
            epgs=len(policy.epgs),
            pairs=len(pairs),
            contracts=len(policy.contracts),
            filters=len(policy.filters),
            switches=len(policy.switches),
        )
        return policy

    @staticmethod
    def _vrf_sizes(config):
        return [
            config.epgs // config.vrfs + (1 if index < config.epgs % config.vrfs else 0)
            for index in range(config.vrfs)
        ]

    @staticmethod
    def _name(prefix, index, count):
        return f"{prefix}{index + 1:0{len(str(count))}d}"

    @staticmethod
    def _zipf_weights(rng, count, exponent):
        ranks = list(range(1, count + 1))
        rng.shuffle(ranks)
        return [1.0 / rank ** exponent for rank in ranks]

    @staticmethod
    def _generate_pairs(config, rng, epg_ids, epg_vrf):
        """Paires distinctes intra-VRF, chaque EPG dans au moins une paire."""
        members = {}
        for epg_id in epg_ids:
            members.setdefault(epg_vrf[epg_id], []).append(epg_id)

        pairs = set()
        # Couverture : chaque EPG apparaît dans au moins une paire
        for vrf in sorted(members):
            group = list(members[vrf])
            rng.shuffle(group)
            for index in range(0, len(group) - 1, 2):
                pairs.add(EpgPair.of(group[index], group[index + 1]))
            if len(group) % 2:
                partner = rng.choice(group[:-1])
                pairs.add(EpgPair.of(group[-1], partner))

        weights = dict(zip(epg_ids, GeneratorService._zipf_weights(rng, len(epg_ids), config.zipf_exponent)))
        attempts = 20 * config.pairs + 1000
        while len(pairs) < config.pairs and attempts > 0:
            attempts -= 1
            first = rng.choices(epg_ids, weights=[weights[epg] for epg in epg_ids])[0]
            peers = [epg for epg in members[epg_vrf[first]] if epg != first]
            second = rng.choices(peers, weights=[weights[epg] for epg in peers])[0]
            pairs.add(EpgPair.of(first, second))

        if len(pairs) < config.pairs:
            remaining = [
                EpgPair.of(a, b)
                for vrf in sorted(members)
                for a, b in combinations(sorted(members[vrf]), 2)
                if EpgPair.of(a, b) not in pairs
            ]
            rng.shuffle(remaining)
            pairs.update(remaining[:config.pairs - len(pairs)])
        return sorted(pairs)

    @staticmethod
    def _partition_pairs(config, rng, pairs):
        """Répartit les paires entre contrats : au moins une chacun, le reste selon Zipf."""
        shuffled = list(pairs)
        rng.shuffle(shuffled)
        groups = [[pair] for pair in shuffled[:config.contracts]]
        weights = GeneratorService._zipf_weights(rng, config.contracts, config.zipf_exponent)
        indexes = list(range(config.contracts))
        for pair in shuffled[config.contracts:]:
            groups[rng.choices(indexes, weights=weights)[0]].append(pair)
        return groups

    @staticmethod
    def _assign_filters(config, rng, filter_ids):
        """1 à max_filters_per_contract filtres par contrat, chaque filtre utilisé."""
        order = list(range(config.contracts))
        rng.shuffle(order)
        groups = [[] for _ in range(config.contracts)]
        for index, filter_id in enumerate(filter_ids):
            groups[order[index % config.contracts]].append(filter_id)

        weights = GeneratorService._zipf_weights(rng, len(filter_ids), config.zipf_exponent)
        for group in groups:
            target = rng.randint(1, config.max_filters_per_contract)
            target = min(target, len(filter_ids))
            while len(group) < target:
                candidate = rng.choices(filter_ids, weights=weights)[0]
                if candidate not in group:
                    group.append(candidate)
        return groups

    @staticmethod
    def _check_balanced(config, sizes):
        if min(sizes) < 3:
            raise GeneratorConfigError("Partage équilibré : chaque VRF doit contenir au moins 3 EPG")
        if config.pairs < config.epgs:
            raise GeneratorConfigError(
                f"Partage équilibré : au moins {config.epgs} paires (une par EPG), reçu {config.pairs}"
            )
        if config.contracts < 2 or config.pairs < 2 * config.contracts:
            raise GeneratorConfigError(
                f"Partage équilibré : au moins 2 contrats de 2 paires ({config.contracts} contrats, "
                f"{config.pairs} paires)"
            )
        if config.filters > config.contracts * (config.contracts - 1) // 2:
            raise GeneratorConfigError(
                f"Partage équilibré : {config.filters} filtres ne peuvent pas avoir des contrats distincts"
            )
        if 2 * config.filters > config.contracts * config.max_filters_per_contract:
            raise GeneratorConfigError(
                f"Partage équilibré : {config.filters} filtres partagés par 2 contrats dépassent "
                f"{config.max_filters_per_contract} filtres par contrat"
            )

    @staticmethod
    def _generate_cycle_pairs(config, rng, epg_ids, epg_vrf):
        """Un cycle par VRF (deux partenaires par EPG), puis des paires uniformes."""
        members = {}
        for epg_id in epg_ids:
            members.setdefault(epg_vrf[epg_id], []).append(epg_id)

        pairs = set()
        for vrf in sorted(members):
            cycle = list(members[vrf])
            rng.shuffle(cycle)
            for index, epg_id in enumerate(cycle):
                pairs.add(EpgPair.of(epg_id, cycle[(index + 1) % len(cycle)]))

        remaining = [
            EpgPair.of(a, b)
            for vrf in sorted(members)
            for a, b in combinations(sorted(members[vrf]), 2)
            if EpgPair.of(a, b) not in pairs
        ]
        rng.shuffle(remaining)
        pairs.update(remaining[:config.pairs - len(pairs)])
        return sorted(pairs)

    @staticmethod
    def _partition_pairs_evenly(config, rng, pairs):
        """
        Contrats de tailles égales (à une paire près), réparés par échanges
        jusqu'à ce qu'aucun contrat ne soit centré sur un EPG et que chaque
        EPG dépende d'au moins deux contrats.

        Raises:
            GeneratorConfigError: aucune répartition trouvée
        """
        shuffled = list(pairs)
        rng.shuffle(shuffled)
        groups = [shuffled[index::config.contracts] for index in range(config.contracts)]
        for _ in range(REPAIR_ATTEMPTS):
            defect = GeneratorService._sharing_defect(groups)
            if defect is None:
                return groups
            index, position, epg_id = defect
            swaps = [
                (other, slot)
                for other, group in enumerate(groups) if other != index
                for slot, pair in enumerate(group) if epg_id not in pair
            ]
            if not swaps:
                break
            other, slot = rng.choice(swaps)
            groups[index][position], groups[other][slot] = groups[other][slot], groups[index][position]
        raise GeneratorConfigError(
            f"Aucune répartition équilibrée de {len(pairs)} paires en {config.contracts} contrats"
        )

    @staticmethod
    def _sharing_defect(groups):
        """(contrat, position, EPG) du premier défaut de partage, None sinon."""
        for index, group in enumerate(groups):
            common = set(group[0]).intersection(*group[1:])
            if common:
                return index, 0, min(common)

        slots = {}
        for index, group in enumerate(groups):
            for position, pair in enumerate(group):
                for epg_id in pair:
                    slots.setdefault(epg_id, []).append((index, position))
        for epg_id in sorted(slots):
            if len({index for index, _ in slots[epg_id]}) < 2:
                index, position = slots[epg_id][0]
                return index, position, epg_id
        return None

    @staticmethod
    def _share_filters(config, rng, filter_ids):
        """
        Chaque filtre sert deux contrats distincts (paires de contrats toutes
        différentes, charge minimale d'abord) ; les contrats restants
        reçoivent le filtre le moins utilisé.
        """
        order = list(range(config.contracts))
        rng.shuffle(order)
        rank = {contract: position for position, contract in enumerate(order)}
        groups = [[] for _ in range(config.contracts)]
        used = set()
        for filter_id in filter_ids:
            candidates = sorted(order, key=lambda contract: (len(groups[contract]), rank[contract]))
            chosen = next(
                couple for couple in combinations(candidates, 2) if frozenset(couple) not in used
            )
            used.add(frozenset(chosen))
            for contract in chosen:
                groups[contract].append(filter_id)

        usage = {filter_id: 2 for filter_id in filter_ids}
        for contract in order:
            if not groups[contract]:
                filter_id = min(filter_ids, key=lambda item: (usage[item], item.sort_key))
                groups[contract].append(filter_id)
                usage[filter_id] += 1
        return groups


# Instance globale du service
generator_service = GeneratorService()
