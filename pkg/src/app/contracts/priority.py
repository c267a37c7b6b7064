"""
Priority classification of contract calls.

Emergencies, congestion and road or weather conditions are high-level
knowledge and jump the peer's work queue; position and vehicle information
updates and queries are low-level.
"""

from pydantic import ValidationError

from src.app.models.pydantic.contracts import (
    ContractCall,
    IncidentKind,
    IncidentReport,
    Priority,
)

HIGH_PRIORITY_KINDS = frozenset(
    {
        IncidentKind.ACCIDENT,
        IncidentKind.CONGESTION,
        IncidentKind.ROAD_CONDITION,
        IncidentKind.WEATHER,
    }
)


def classify_priority(call: ContractCall) -> Priority:
    if call.contract == "situation" and call.operation == "report" and call.args:
        try:
            report = IncidentReport.model_validate_json(call.args[0])
        except ValidationError:
            return Priority.LOW
        if report.kind in HIGH_PRIORITY_KINDS:
            return Priority.HIGH
    return Priority.LOW
