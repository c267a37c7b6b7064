"""
Certificate authority, Ed25519 signatures and pseudonymous identities.

Keys are derived from a seeded RNG so identity bundles, and every hash that
depends on them, are reproducible for a given seed.
"""

import logging
import random
from typing import Dict, Iterable, List, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from src.app.core.config.settings import settings
from src.app.core.errors import EdgeChainError
from src.app.ledger.encoding import encode_certificate_body
from src.app.ledger.hashing import endorsement_message, proposal_hash, sha256
from src.app.models.pydantic.identity import (
    Certificate,
    IdentityBundle,
    IdentityRecord,
    KeyPair,
    Role,
)
from src.app.models.pydantic.ledger import Endorsement, SignedProposal

logger = logging.getLogger(__name__)

SUPPORTED_SCHEMES = ("ed25519",)


class InvalidWindow(EdgeChainError):
    """Certificate validity window ends before it starts."""

    pass


class AuthFailure(EdgeChainError):
    """Certificate or signature does not verify."""

    pass


def _check_scheme() -> None:
    if settings.SIGNATURE_SCHEME.lower() not in SUPPORTED_SCHEMES:
        raise EdgeChainError(f"Unsupported signature scheme: {settings.SIGNATURE_SCHEME}")


def generate_key_pair(rng: random.Random) -> KeyPair:
    _check_scheme()
    private = Ed25519PrivateKey.from_private_bytes(rng.randbytes(32))
    public = private.public_key().public_bytes(
        encoding=serialization.Encoding.Raw, format=serialization.PublicFormat.Raw
    )
    return KeyPair(public_key=public, secret_key=_raw_private_bytes(private))


def _raw_private_bytes(private: Ed25519PrivateKey) -> bytes:
    return private.private_bytes(
        encoding=serialization.Encoding.Raw,
        format=serialization.PrivateFormat.Raw,
        encryption_algorithm=serialization.NoEncryption(),
    )


def pseudonym(public_key: bytes) -> bytes:
    return sha256(public_key)


def sign(secret_key: bytes, message: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(secret_key).sign(message)


def verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    """Total: malformed keys or signatures verify as False."""
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except (InvalidSignature, ValueError, TypeError):
        return False


def ca_issue(
    ca: KeyPair,
    subject_public_key: bytes,
    role: Role,
    valid_from: int,
    valid_to: int,
) -> Certificate:
    if valid_to < valid_from:
        raise InvalidWindow(f"valid_to {valid_to} precedes valid_from {valid_from}")
    unsigned = Certificate(
        subject=pseudonym(subject_public_key),
        subject_public_key=subject_public_key,
        role=role,
        issuer=pseudonym(ca.public_key),
        issuer_signature=b"",
        valid_from=valid_from,
        valid_to=valid_to,
    )
    signature = sign(ca.secret_key, encode_certificate_body(unsigned))
    return unsigned.model_copy(update={"issuer_signature": signature})


def verify_certificate(cert: Certificate, ca_public_key: bytes, now: int) -> bool:
    if not cert.valid_from <= now <= cert.valid_to:
        return False
    return verify(ca_public_key, encode_certificate_body(cert), cert.issuer_signature)


def sign_proposal(identity: IdentityRecord, proposal: SignedProposal) -> SignedProposal:
    """Attach the client signature over the proposal id."""
    signature = sign(identity.key_pair.secret_key, proposal_hash(proposal))
    return proposal.model_copy(update={"client_signature": signature})


def verify_proposal_signature(proposal: SignedProposal, ca_public_key: bytes) -> bool:
    """Client authentication as committers check it: role, binding, window and signature."""
    cert = proposal.creator_certificate
    if cert.role != Role.VEHICLE or cert.subject != proposal.creator:
        return False
    if pseudonym(cert.subject_public_key) != cert.subject:
        return False
    if not verify_certificate(cert, ca_public_key, proposal.created_at):
        return False
    return verify(cert.subject_public_key, proposal_hash(proposal), proposal.client_signature)


def _issue_records(
    rng: random.Random,
    ca: KeyPair,
    role: Role,
    count: int,
    valid_from: int,
    valid_to: int,
) -> List[IdentityRecord]:
    records = []
    for index in range(count):
        key_pair = generate_key_pair(rng)
        records.append(
            IdentityRecord(
                name=f"{role.value}-{index}",
                key_pair=key_pair,
                certificate=ca_issue(ca, key_pair.public_key, role, valid_from, valid_to),
            )
        )
    return records


def build_identity_bundle(
    seed: int,
    peers: int = 3,
    orderers: int = 3,
    vehicles: int = 3,
    valid_from: int = 0,
    valid_to: Optional[int] = None,
) -> IdentityBundle:
    """Deterministically generate the CA and every participant's keys and certificate."""
    rng = random.Random(f"edgechain-identities-{seed}")
    ca = generate_key_pair(rng)
    until = settings.CERT_VALIDITY_MS if valid_to is None else valid_to
    bundle = IdentityBundle(
        seed=seed,
        ca=ca,
        peers=tuple(_issue_records(rng, ca, Role.PEER, peers, valid_from, until)),
        orderers=tuple(_issue_records(rng, ca, Role.ORDERER, orderers, valid_from, until)),
        vehicles=tuple(_issue_records(rng, ca, Role.VEHICLE, vehicles, valid_from, until)),
    )
    logger.info(
        "Built identity bundle seed=%s peers=%d orderers=%d vehicles=%d",
        seed,
        peers,
        orderers,
        vehicles,
    )
    return bundle


class MembershipDirectory:
    """Certificates of the endorsing peers, keyed by pseudonym."""

    def __init__(self, ca_public_key: bytes, certificates: Iterable[Certificate] = ()) -> None:
        self.ca_public_key = ca_public_key
        self._peers: Dict[bytes, Certificate] = {}
        for cert in certificates:
            self.add(cert)

    def add(self, cert: Certificate) -> None:
        if cert.role != Role.PEER:
            raise AuthFailure(f"certificate role {cert.role.value} cannot endorse")
        if not verify(self.ca_public_key, encode_certificate_body(cert), cert.issuer_signature):
            raise AuthFailure("peer certificate signature does not verify")
        self._peers[cert.subject] = cert

    def get(self, peer_pseudonym: bytes) -> Optional[Certificate]:
        return self._peers.get(peer_pseudonym)

    def __len__(self) -> int:
        return len(self._peers)

    def verify_endorsement(
        self, endorsement: Endorsement, proposal_id: bytes, rw_hash: bytes, now: int
    ) -> bool:
        cert = self._peers.get(endorsement.peer)
        if cert is None or not verify_certificate(cert, self.ca_public_key, now):
            return False
        if endorsement.proposal_hash != proposal_id or endorsement.rw_set_hash != rw_hash:
            return False
        return verify(
            cert.subject_public_key,
            endorsement_message(proposal_id, rw_hash),
            endorsement.signature,
        )

    def count_valid(
        self, endorsements: Iterable[Endorsement], proposal_id: bytes, rw_hash: bytes, now: int
    ) -> int:
        """Distinct peers whose endorsement verifies against this proposal and rw-set."""
        return len(
            {
                e.peer
                for e in endorsements
                if self.verify_endorsement(e, proposal_id, rw_hash, now)
            }
        )


def sign_endorsement(identity: IdentityRecord, proposal_id: bytes, rw_hash: bytes) -> Endorsement:
    return Endorsement(
        peer=identity.pseudonym,
        proposal_hash=proposal_id,
        rw_set_hash=rw_hash,
        signature=sign(identity.key_pair.secret_key, endorsement_message(proposal_id, rw_hash)),
    )
