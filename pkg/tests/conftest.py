"""
Shared fixtures: a deterministic identity bundle, the peer membership
directory and a batch builder for small transactions.
"""

from typing import List

import pytest

from src.app.core.auth.identity import MembershipDirectory, build_identity_bundle
from src.app.models.pydantic.identity import IdentityBundle, IdentityRecord
from src.app.models.pydantic.ledger import Transaction

from tests.factories import raw_transaction


@pytest.fixture(scope="session")
def bundle() -> IdentityBundle:
    return build_identity_bundle(seed=0, peers=3, orderers=3, vehicles=4)


@pytest.fixture(scope="session")
def membership(bundle) -> MembershipDirectory:
    return MembershipDirectory(bundle.ca.public_key, [r.certificate for r in bundle.peers])


@pytest.fixture
def vehicle_identity(bundle) -> IdentityRecord:
    return bundle.vehicles[0]


@pytest.fixture
def make_transactions(bundle):
    def make(count: int, payload_size: int = 64) -> List[Transaction]:
        vehicle = bundle.vehicles[0]
        return [
            raw_transaction(vehicle, bundle.peers[:1], payload=bytes([i % 251 + 1]) * payload_size, nonce=i + 1)
            for i in range(count)
        ]

    return make
