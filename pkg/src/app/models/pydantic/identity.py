"""
Pydantic models for identities and certificates.

Vehicles are known only by pseudonyms derived from their public keys; no other
identity attribute is modeled anywhere.
"""

from enum import Enum
from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field

from .common import Hash, HexBytes, Pseudonym


class Role(str, Enum):
    """Participant role bound into a certificate."""

    VEHICLE = "vehicle"
    PEER = "peer"
    ORDERER = "orderer"


class KeyPair(BaseModel):
    """Ed25519 key pair as raw bytes."""

    model_config = ConfigDict(frozen=True)

    public_key: HexBytes = Field(..., description="Raw 32-byte public key")
    secret_key: HexBytes = Field(..., description="Raw 32-byte private seed", repr=False)


class Certificate(BaseModel):
    """Certificate issued by the system CA."""

    model_config = ConfigDict(frozen=True)

    subject: Pseudonym = Field(..., description="Pseudonym of the subject key")
    subject_public_key: HexBytes = Field(..., description="Raw subject public key")
    role: Role = Field(..., description="Role granted by this certificate")
    issuer: Pseudonym = Field(..., description="Pseudonym of the CA key")
    issuer_signature: HexBytes = Field(
        ..., description="CA signature over the canonical encoding of all other fields"
    )
    valid_from: int = Field(..., ge=0, description="Start of validity window (ms)")
    valid_to: int = Field(..., ge=0, description="End of validity window (ms)")


class IdentityRecord(BaseModel):
    """One participant's keys and certificate."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., description="Node label, e.g. peer-0 or vehicle-2")
    key_pair: KeyPair
    certificate: Certificate

    @property
    def pseudonym(self) -> Hash:
        return self.certificate.subject


class IdentityBundle(BaseModel):
    """Pre-generated identities for a whole deployment."""

    model_config = ConfigDict(frozen=True)

    seed: int = Field(..., description="Seed the keys were derived from")
    ca: KeyPair
    peers: Tuple[IdentityRecord, ...] = ()
    orderers: Tuple[IdentityRecord, ...] = ()
    vehicles: Tuple[IdentityRecord, ...] = ()
