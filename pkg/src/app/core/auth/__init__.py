from .identity import (
    AuthFailure,
    InvalidWindow,
    MembershipDirectory,
    build_identity_bundle,
    ca_issue,
    pseudonym,
    sign,
    verify,
    verify_certificate,
)

__all__ = [
    "AuthFailure",
    "InvalidWindow",
    "MembershipDirectory",
    "build_identity_bundle",
    "ca_issue",
    "pseudonym",
    "sign",
    "verify",
    "verify_certificate",
]
