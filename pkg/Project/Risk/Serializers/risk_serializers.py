"""
Sérialiseurs du dump de modèle de risques :
{kind, switch, nodes, risks, edges[{node, risk, status}], provenance}.
"""
from rest_framework import serializers

from Deployment.Serializers.rule_serializers import RuleSerializer
from Policy.models import EpgPair, ObjectId

from ..models import AffectedElement, ModelKind, RiskModel, Status


def _parse_object_id(value):
    try:
        return ObjectId.parse(value)
    except ValueError as exc:
        raise serializers.ValidationError(str(exc))


class ElementSerializer(serializers.Serializer):
    """Élément affecté : {scope, pair: [epgA, epgB]}."""
    scope = serializers.CharField(allow_null=True, required=False, default=None)
    pair = serializers.ListField(child=serializers.CharField(), min_length=2, max_length=2)

    def validate_pair(self, value):
        if value[0] == value[1]:
            raise serializers.ValidationError("Les deux EPG de la paire doivent différer.")
        return value

    @staticmethod
    def to_element(data):
        scope = ObjectId.switch(data['scope']) if data.get('scope') is not None else None
        first, second = data['pair']
        return AffectedElement(scope=scope, pair=EpgPair.of(ObjectId.epg(first), ObjectId.epg(second)))

    @staticmethod
    def from_element(element):
        return {
            'scope': element.scope.name if element.scope is not None else None,
            'pair': [element.pair.a.name, element.pair.b.name],
        }


class NodeSerializer(ElementSerializer):
    status = serializers.ChoiceField(choices=[status.value for status in Status])


class EdgeSerializer(serializers.Serializer):
    node = ElementSerializer()
    risk = serializers.CharField()
    status = serializers.ChoiceField(choices=[status.value for status in Status])

    def validate_risk(self, value):
        return _parse_object_id(value)


class ProvenanceSerializer(serializers.Serializer):
    rule = RuleSerializer()
    objects = serializers.ListField(child=serializers.CharField(), min_length=1)

    def validate_objects(self, value):
        return [_parse_object_id(item) for item in value]


class RiskModelSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=[kind.value for kind in ModelKind])
    switch = serializers.CharField(allow_null=True, required=False, default=None)
    nodes = NodeSerializer(many=True, allow_empty=True)
    risks = serializers.ListField(child=serializers.CharField(), allow_empty=True)
    edges = EdgeSerializer(many=True, allow_empty=True)
    provenance = ProvenanceSerializer(many=True, allow_empty=True, required=False)

    def validate_risks(self, value):
        return [_parse_object_id(item) for item in value]

    def validate(self, attrs):
        if attrs['kind'] == ModelKind.SWITCH.value and not attrs.get('switch'):
            raise serializers.ValidationError("Un modèle switch doit nommer son switch.")
        return attrs

    @staticmethod
    def to_model(data):
        switch = ObjectId.switch(data['switch']) if data.get('switch') else None
        model = RiskModel(data['kind'], switch=switch)
        for node in data['nodes']:
            model.add_element(ElementSerializer.to_element(node))
        for risk in data['risks']:
            model.add_risk(risk)
        for edge in data['edges']:
            model.add_edge(ElementSerializer.to_element(edge['node']), edge['risk'], Status(edge['status']))
        for node in data['nodes']:
            if Status(node['status']) == Status.FAIL:
                model.graph.nodes[ElementSerializer.to_element(node)]['status'] = Status.FAIL
        for item in data.get('provenance', []):
            model.provenance[RuleSerializer.to_rule(item['rule'])] = frozenset(item['objects'])
        return model

    @staticmethod
    def from_model(model):
        return {
            'kind': model.kind.value,
            'switch': model.switch.name if model.switch is not None else None,
            'nodes': [
                {**ElementSerializer.from_element(element), 'status': model.status(element).value}
                for element in model.elements()
            ],
            'risks': [str(risk) for risk in model.risks()],
            'edges': [
                {'node': ElementSerializer.from_element(element), 'risk': str(risk), 'status': status.value}
                for element, risk, status in model.edges()
            ],
            'provenance': [
                {'rule': RuleSerializer.from_rule(rule), 'objects': [str(o) for o in sorted(objects)]}
                for rule, objects in sorted(model.provenance.items())
            ],
        }
