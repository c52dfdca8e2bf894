"""
Sérialiseurs du plan de fautes et de la configuration du générateur.
"""
from rest_framework import serializers

from Policy.models import ObjectId

from ..models import Fault, FaultKind, FaultPlan, GeneratorConfig


class FaultSerializer(serializers.Serializer):
    object = serializers.CharField()
    kind = serializers.CharField()
    fraction = serializers.FloatField(required=False, allow_null=True, default=None)
    scope = serializers.CharField(required=False, allow_null=True, default=None)

    def validate_object(self, value):
        try:
            return ObjectId.parse(value)
        except ValueError as exc:
            raise serializers.ValidationError(str(exc))

    def validate_kind(self, value):
        try:
            return FaultKind.parse(value)
        except ValueError as exc:
            raise serializers.ValidationError(str(exc))

    def validate(self, attrs):
        if attrs['kind'] == FaultKind.PARTIAL:
            fraction = attrs.get('fraction')
            if fraction is None or not 0 < fraction < 1:
                raise serializers.ValidationError(
                    {'fraction': "Une faute partielle exige 0 < fraction < 1."}
                )
        return attrs


class FaultPlanSerializer(serializers.Serializer):
    """Plan de fautes : {seed, faults: [{object, kind, fraction?, scope?}]}."""
    seed = serializers.IntegerField(required=False, default=0)
    faults = FaultSerializer(many=True, allow_empty=True)

    @staticmethod
    def to_plan(data):
        return FaultPlan(
            faults=tuple(
                Fault(
                    object=item['object'],
                    kind=item['kind'],
                    fraction=item.get('fraction'),
                    scope=ObjectId.switch(item['scope']) if item.get('scope') else None,
                )
                for item in data['faults']
            ),
            seed=data.get('seed', 0),
        )

    @staticmethod
    def from_plan(plan):
        faults = []
        for fault in plan.faults:
            record = {'object': str(fault.object), 'kind': fault.kind.value}
            if fault.fraction is not None:
                record['fraction'] = fault.fraction
            if fault.scope is not None:
                record['scope'] = fault.scope.name
            faults.append(record)
        return {'seed': plan.seed, 'faults': faults}


class GeneratorConfigSerializer(serializers.Serializer):
    """Configuration de génération (fichier JSON optionnel de la commande generate)."""
    vrfs = serializers.IntegerField()
    epgs = serializers.IntegerField()
    contracts = serializers.IntegerField()
    filters = serializers.IntegerField()
    switches = serializers.IntegerField()
    pairs = serializers.IntegerField()
    endpoints_per_epg = serializers.IntegerField(required=False, default=1)
    zipf_exponent = serializers.FloatField(required=False, default=1.0)
    max_filters_per_contract = serializers.IntegerField(required=False, default=3)
    sharing = serializers.ChoiceField(choices=['zipf', 'balanced'], required=False, default='zipf')
    seed = serializers.IntegerField(required=False, default=0)

    @staticmethod
    def to_config(data):
        return GeneratorConfig(**data)
