"""
Sérialiseurs du fichier de politique JSON et du journal des changements.

Les sérialiseurs ne vérifient que le schéma (clés, types). Les invariants
sémantiques (références, unicité, plages) sont rapportés par validate_policy,
pour qu'une politique incohérente reste chargeable et diagnosticable.
"""
from rest_framework import serializers

from ..models import (
    ChangeAction,
    ChangeLogEntry,
    Contract,
    Endpoint,
    Epg,
    EpgPair,
    Filter,
    NetworkPolicy,
    ObjectId,
    ObjectKind,
    Vrf,
    DEFAULT_PROTOCOL,
    ALLOW,
)


class VrfSerializer(serializers.Serializer):
    name = serializers.CharField()


class FilterSerializer(serializers.Serializer):
    """
    Filtre : le port n'est pas borné ici, validate_policy signale
    les ports hors de 0-65535.
    """
    name = serializers.CharField()
    port = serializers.IntegerField()
    protocol = serializers.CharField(required=False, default=DEFAULT_PROTOCOL)
    action = serializers.CharField(required=False, default=ALLOW)


class EndpointSerializer(serializers.Serializer):
    id = serializers.CharField()
    switch = serializers.CharField()


class EpgSerializer(serializers.Serializer):
    name = serializers.CharField()
    vrf = serializers.CharField()
    endpoints = EndpointSerializer(many=True, required=False)


class ContractSerializer(serializers.Serializer):
    """
    Contrat : forme courte epgA/epgB pour une paire unique,
    ou liste 'pairs' de couples [epgA, epgB].
    """
    name = serializers.CharField()
    epgA = serializers.CharField(required=False)
    epgB = serializers.CharField(required=False)
    pairs = serializers.ListField(
        child=serializers.ListField(child=serializers.CharField(), min_length=2, max_length=2),
        required=False,
    )
    filters = serializers.ListField(child=serializers.CharField(), allow_empty=True)

    def validate(self, attrs):
        has_short = 'epgA' in attrs or 'epgB' in attrs
        if has_short and not ('epgA' in attrs and 'epgB' in attrs):
            raise serializers.ValidationError("epgA et epgB doivent être fournis ensemble.")
        if has_short and 'pairs' in attrs:
            raise serializers.ValidationError("Utiliser soit epgA/epgB, soit pairs, pas les deux.")
        if not has_short and 'pairs' not in attrs:
            raise serializers.ValidationError("Une paire d'EPG (epgA/epgB ou pairs) est requise.")
        return attrs


class PolicyDocumentSerializer(serializers.Serializer):
    """
    Document de politique complet.
    Les cinq clés de premier niveau sont obligatoires.
    """
    vrfs = VrfSerializer(many=True, allow_empty=True)
    epgs = EpgSerializer(many=True, allow_empty=True)
    contracts = ContractSerializer(many=True, allow_empty=True)
    filters = FilterSerializer(many=True, allow_empty=True)
    switches = serializers.ListField(child=serializers.CharField(), allow_empty=True)

    @staticmethod
    def to_policy(data):
        """
        Convertit les données validées en NetworkPolicy canonique.

        Args:
            data: validated_data du sérialiseur

        Returns:
            NetworkPolicy
        """
        vrfs = [Vrf(ObjectId.vrf(item['name'])) for item in data['vrfs']]
        filters = [
            Filter(
                id=ObjectId.filter(item['name']),
                port=item['port'],
                protocol=str(item.get('protocol', DEFAULT_PROTOCOL)).lower(),
                action=str(item.get('action', ALLOW)).lower(),
            )
            for item in data['filters']
        ]
        epgs = [
            Epg(
                id=ObjectId.epg(item['name']),
                vrf=ObjectId.vrf(item['vrf']),
                endpoints=tuple(
                    Endpoint(id=endpoint['id'], switch=ObjectId.switch(endpoint['switch']))
                    for endpoint in item.get('endpoints', [])
                ),
            )
            for item in data['epgs']
        ]
        contracts = []
        for item in data['contracts']:
            if 'pairs' in item:
                raw_pairs = item['pairs']
            else:
                raw_pairs = [[item['epgA'], item['epgB']]]
            contracts.append(Contract(
                id=ObjectId.contract(item['name']),
                pairs=tuple(EpgPair.of(ObjectId.epg(a), ObjectId.epg(b)) for a, b in raw_pairs),
                filters=tuple(ObjectId.filter(name) for name in item['filters']),
            ))
        switches = [ObjectId.switch(name) for name in data['switches']]
        return NetworkPolicy.build(
            vrfs=vrfs, epgs=epgs, contracts=contracts, filters=filters, switches=switches,
        )

    @staticmethod
    def from_policy(policy):
        """Représentation JSON déterministe d'une politique."""
        contracts = []
        for contract in policy.contracts:
            entry = {'name': contract.name}
            if len(contract.pairs) == 1:
                entry['epgA'] = contract.epg_a.name
                entry['epgB'] = contract.epg_b.name
            else:
                entry['pairs'] = [[pair.a.name, pair.b.name] for pair in contract.pairs]
            entry['filters'] = [filter_id.name for filter_id in contract.filters]
            contracts.append(entry)
        return {
            'vrfs': [{'name': vrf.name} for vrf in policy.vrfs],
            'epgs': [
                {
                    'name': epg.name,
                    'vrf': epg.vrf.name,
                    'endpoints': [
                        {'id': endpoint.id, 'switch': endpoint.switch.name}
                        for endpoint in epg.endpoints
                    ],
                }
                for epg in policy.epgs
            ],
            'contracts': contracts,
            'filters': [
                {'name': item.name, 'port': item.port, 'protocol': item.protocol, 'action': item.action}
                for item in policy.filters
            ],
            'switches': [switch.name for switch in policy.switches],
        }


class ObjectRefSerializer(serializers.Serializer):
    kind = serializers.CharField()
    name = serializers.CharField()

    def validate_kind(self, value):
        try:
            return ObjectKind.parse(value)
        except ValueError as exc:
            raise serializers.ValidationError(str(exc))

    @staticmethod
    def to_object_id(data):
        return ObjectId(data['kind'], data['name'])

    @staticmethod
    def from_object_id(object_id):
        return {'kind': object_id.kind.value, 'name': object_id.name}


class ChangeLogEntrySerializer(serializers.Serializer):
    """Ligne du journal des changements : {ts, object:{kind,name}, action}."""
    ts = serializers.IntegerField()
    object = ObjectRefSerializer()
    action = serializers.CharField()

    def validate_action(self, value):
        try:
            return ChangeAction.parse(value)
        except ValueError as exc:
            raise serializers.ValidationError(str(exc))

    @staticmethod
    def to_entry(data):
        return ChangeLogEntry(
            timestamp=data['ts'],
            object=ObjectRefSerializer.to_object_id(data['object']),
            action=data['action'],
        )

    @staticmethod
    def from_entry(entry):
        return {
            'ts': entry.timestamp,
            'object': ObjectRefSerializer.from_object_id(entry.object),
            'action': entry.action.value,
        }
