"""
Sérialiseurs des dumps de règles (JSON lines) et du rapport d'équivalence.
Même schéma pour les règles L-type et T-type.
"""
from rest_framework import serializers

from Policy.models import ALLOW, DEFAULT_PROTOCOL, ObjectId

from ..models import MissingRuleReport, Rule


class RuleSerializer(serializers.Serializer):
    switch = serializers.CharField()
    vrf = serializers.CharField()
    src = serializers.CharField()
    dst = serializers.CharField()
    port = serializers.IntegerField(min_value=0, max_value=65535)
    protocol = serializers.CharField(required=False, default=DEFAULT_PROTOCOL)
    action = serializers.CharField(required=False, default=ALLOW)

    def validate(self, attrs):
        if attrs['src'] == attrs['dst']:
            raise serializers.ValidationError("src et dst doivent être différents.")
        return attrs

    @staticmethod
    def to_rule(data):
        return Rule(
            switch=ObjectId.switch(data['switch']),
            vrf=ObjectId.vrf(data['vrf']),
            src=ObjectId.epg(data['src']),
            dst=ObjectId.epg(data['dst']),
            port=data['port'],
            protocol=str(data.get('protocol', DEFAULT_PROTOCOL)).lower(),
            action=str(data.get('action', ALLOW)).lower(),
        )

    @staticmethod
    def from_rule(rule):
        return {
            'switch': rule.switch.name,
            'vrf': rule.vrf.name,
            'src': rule.src.name,
            'dst': rule.dst.name,
            'port': rule.port,
            'protocol': rule.protocol,
            'action': rule.action,
        }


class MissingRuleReportSerializer(serializers.Serializer):
    """Rapport {missing, extra, perSwitch}."""
    missing = RuleSerializer(many=True, allow_empty=True)
    extra = RuleSerializer(many=True, allow_empty=True)

    @staticmethod
    def to_report(data):
        return MissingRuleReport.build(
            missing=[RuleSerializer.to_rule(item) for item in data['missing']],
            extra=[RuleSerializer.to_rule(item) for item in data['extra']],
        )

    @staticmethod
    def from_report(report):
        return {
            'missing': [RuleSerializer.from_rule(rule) for rule in report.missing],
            'extra': [RuleSerializer.from_rule(rule) for rule in report.extra],
            'perSwitch': {
                switch.name: {
                    'missing': [RuleSerializer.from_rule(rule) for rule in diff.missing],
                    'extra': [RuleSerializer.from_rule(rule) for rule in diff.extra],
                }
                for switch, diff in report.per_switch.items()
            },
        }
