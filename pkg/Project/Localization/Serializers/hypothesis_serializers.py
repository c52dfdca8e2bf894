"""
Sérialiseur de l'hypothèse :
{entries: [{object, stage, covered}], residual, algo, iterations, modelSwitch}.
"""
from rest_framework import serializers

from Policy.models import ObjectId
from Risk.Serializers.risk_serializers import ElementSerializer

from ..models import Algorithm, Hypothesis, HypothesisEntry, Stage


class HypothesisEntrySerializer(serializers.Serializer):
    object = serializers.CharField()
    stage = serializers.ChoiceField(choices=[stage.value for stage in Stage])
    covered = ElementSerializer(many=True, allow_empty=True)

    def validate_object(self, value):
        try:
            return ObjectId.parse(value)
        except ValueError as exc:
            raise serializers.ValidationError(str(exc))


class HypothesisSerializer(serializers.Serializer):
    entries = HypothesisEntrySerializer(many=True, allow_empty=True)
    residual = ElementSerializer(many=True, allow_empty=True)
    algo = serializers.ChoiceField(
        choices=[algo.value for algo in Algorithm], required=False, default=Algorithm.SCOUT.value,
    )
    iterations = serializers.IntegerField(min_value=0, required=False, default=0)
    modelSwitch = serializers.CharField(allow_null=True, required=False, default=None)

    def validate_entries(self, value):
        seen = set()
        for entry in value:
            if entry['object'] in seen:
                raise serializers.ValidationError(f"Objet en double: {entry['object']}")
            seen.add(entry['object'])
        return value

    @staticmethod
    def to_hypothesis(data):
        return Hypothesis(
            entries=tuple(
                HypothesisEntry(
                    object=entry['object'],
                    stage=Stage(entry['stage']),
                    covered=tuple(sorted(ElementSerializer.to_element(item) for item in entry['covered'])),
                )
                for entry in data['entries']
            ),
            residual=tuple(sorted(ElementSerializer.to_element(item) for item in data['residual'])),
            algo=data.get('algo', Algorithm.SCOUT.value),
            iterations=data.get('iterations', 0),
            model_switch=ObjectId.switch(data['modelSwitch']) if data.get('modelSwitch') else None,
        )

    @staticmethod
    def from_hypothesis(hypothesis):
        return {
            'entries': [
                {
                    'object': str(entry.object),
                    'stage': entry.stage.value,
                    'covered': [ElementSerializer.from_element(item) for item in entry.covered],
                }
                for entry in hypothesis.entries
            ],
            'residual': [ElementSerializer.from_element(item) for item in hypothesis.residual],
            'algo': hypothesis.algo,
            'iterations': hypothesis.iterations,
            'modelSwitch': hypothesis.model_switch.name if hypothesis.model_switch is not None else None,
        }
