"""State key layout shared by contracts and queries."""

VEHICLE_PREFIX = "vehicle/"
INCIDENT_PREFIX = "incident/"
ZONE_HEAD_PREFIX = "zone-head/"


def vehicle_key(pseudonym: bytes) -> str:
    return f"{VEHICLE_PREFIX}{pseudonym.hex()}"


def incident_prefix(zone: str) -> str:
    return f"{INCIDENT_PREFIX}{zone}/"


def incident_key(zone: str, proposal_id: bytes) -> str:
    return f"{incident_prefix(zone)}{proposal_id.hex()}"


def zone_head_key(zone: str) -> str:
    return f"{ZONE_HEAD_PREFIX}{zone}"


def valid_zone(zone: str) -> bool:
    return bool(zone) and "/" not in zone
