"""
Sérialiseurs du journal de fautes, des signatures et du rapport de causes racines.
"""
from rest_framework import serializers

from Policy.models import ObjectId
from Policy.Serializers.policy_serializers import ChangeLogEntrySerializer

from ..models import FaultLogEntry, FaultSignature


class FaultLogEntrySerializer(serializers.Serializer):
    """Ligne du journal de fautes : {start, end?, switch, code, message}."""
    start = serializers.IntegerField()
    end = serializers.IntegerField(required=False, allow_null=True, default=None)
    switch = serializers.CharField()
    code = serializers.CharField()
    message = serializers.CharField(required=False, allow_blank=True, default='')

    def validate(self, attrs):
        if attrs.get('end') is not None and attrs['end'] < attrs['start']:
            raise serializers.ValidationError("end doit être postérieur ou égal à start.")
        return attrs

    @staticmethod
    def to_entry(data):
        return FaultLogEntry(
            start=data['start'],
            end=data.get('end'),
            switch=ObjectId.switch(data['switch']),
            code=data['code'],
            message=data.get('message', ''),
        )

    @staticmethod
    def from_entry(entry):
        record = {'start': entry.start}
        if entry.end is not None:
            record['end'] = entry.end
        record.update({'switch': entry.switch.name, 'code': entry.code, 'message': entry.message})
        return record


class FaultSignatureSerializer(serializers.Serializer):
    """Signature : {name, codeEquals | messageContains}."""
    name = serializers.CharField()
    codeEquals = serializers.CharField(required=False)
    messageContains = serializers.CharField(required=False)

    def validate(self, attrs):
        if 'codeEquals' not in attrs and 'messageContains' not in attrs:
            raise serializers.ValidationError("codeEquals ou messageContains est requis.")
        return attrs

    @staticmethod
    def to_signature(data):
        return FaultSignature(
            name=data['name'],
            code_equals=data.get('codeEquals'),
            message_contains=data.get('messageContains'),
        )


class RootCauseReportSerializer:
    """Représentation JSON du rapport (écriture seule)."""

    @staticmethod
    def from_report(report):
        return {
            'attributions': [
                {
                    'object': str(attribution.object),
                    'label': attribution.label,
                    'evidence': {
                        'faults': [FaultLogEntrySerializer.from_entry(entry) for entry in attribution.fault_entries],
                        'changes': [ChangeLogEntrySerializer.from_entry(entry) for entry in attribution.change_entries],
                    },
                }
                for attribution in report.attributions
            ],
        }
