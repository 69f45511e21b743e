"""Schnorr signatures over the protocol curve and minimal signed identity
credentials.

A credential binds a subject name, a role, and a static public key inside
a validity window, signed by an issuer. Chains are exactly two levels:
a self-signed issuer (the trust root, distributed out-of-band as a file)
and the leaves it issues. Private keys are stored as raw scalars on disk;
there is deliberately no at-rest encryption, so key files must be kept
out of untrusted locations.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from enum import IntEnum

from . import curves
from .curves import CurveSuite, Point, RandomSource
from .errors import (
    InvalidCredentialFields,
    MalformedCredential,
    MalformedPoint,
    MalformedSignature,
)
from .kdf import hash_

SUBJECT_LEN = 16
CLOCK_SKEW_S = 300


class Role(IntEnum):
    DEVICE = 0
    SERVER = 1
    ISSUER = 2


@dataclass(frozen=True)
class SchnorrSig:
    R: Point
    s: int

    def encode(self, suite: CurveSuite) -> bytes:
        return curves.point_encode(self.R, suite) + self.s.to_bytes(suite.scalar_len, "big")


def sig_decode(data: bytes, suite: CurveSuite) -> SchnorrSig:
    plen = 1 + 2 * suite.field_len
    if len(data) != plen + suite.scalar_len:
        raise MalformedSignature("bad signature length")
    try:
        R = curves.point_decode(data[:plen], suite)
    except MalformedPoint as exc:
        raise MalformedSignature(str(exc)) from exc
    s = int.from_bytes(data[plen:], "big")
    if s >= suite.n:
        raise MalformedSignature("s out of range")
    return SchnorrSig(R, s)


def _challenge(R: Point, Q: Point, msg: bytes, suite: CurveSuite) -> int:
    e = hash_(curves.point_encode(R, suite) + curves.point_encode(Q, suite) + msg)
    return int.from_bytes(e, "big") % suite.n


def schnorr_sign(
    d: int, msg: bytes, suite: CurveSuite, rng: RandomSource = os.urandom
) -> SchnorrSig:
    """s = k + e*d with e bound to the commitment, the public key, and msg."""
    Q = curves.scalar_mul(d, suite.G, suite)
    k, R = curves.keypair_gen(suite, rng)
    e = _challenge(R, Q, msg, suite)
    s = (k + e * d) % suite.n
    return SchnorrSig(R, s)


def schnorr_verify(Q: Point, msg: bytes, sig: SchnorrSig, suite: CurveSuite) -> bool:
    if sig.R is None or Q is None or not suite.is_on_curve(Q) or not suite.is_on_curve(sig.R):
        return False
    if not 0 <= sig.s < suite.n:
        return False
    e = _challenge(sig.R, Q, msg, suite)
    lhs = curves.scalar_mul(sig.s, suite.G, suite)
    rhs = curves.point_add(sig.R, curves.scalar_mul(e, Q, suite), suite)
    return lhs == rhs


def encode_subject(name: str) -> bytes:
    raw = name.encode("utf-8")
    if not raw or len(raw) > SUBJECT_LEN:
        raise InvalidCredentialFields(f"subject must be 1..{SUBJECT_LEN} UTF-8 bytes")
    return raw.ljust(SUBJECT_LEN, b"\x00")


def decode_subject(raw: bytes) -> str:
    return raw.rstrip(b"\x00").decode("utf-8")


@dataclass(frozen=True)
class Credential:
    version: int
    subject_id: bytes
    role: Role
    static_pub: Point
    valid_from: int
    valid_to: int
    issuer_id: bytes
    signature: SchnorrSig

    def tbs(self, suite: CurveSuite) -> bytes:
        """To-be-signed bytes: every field except the signature, wire order."""
        return (
            bytes([self.version])
            + self.subject_id
            + bytes([self.role])
            + curves.point_encode(self.static_pub, suite)
            + self.valid_from.to_bytes(8, "big")
            + self.valid_to.to_bytes(8, "big")
            + self.issuer_id
        )

    def encode(self, suite: CurveSuite) -> bytes:
        return self.tbs(suite) + self.signature.encode(suite)


def credential_decode(data: bytes, suite: CurveSuite) -> Credential:
    plen = 1 + 2 * suite.field_len
    want = 1 + SUBJECT_LEN + 1 + plen + 8 + 8 + SUBJECT_LEN + plen + suite.scalar_len
    if len(data) != want:
        raise MalformedCredential(f"credential length {len(data)}, expected {want}")
    off = 0
    version = data[off]; off += 1
    subject = data[off : off + SUBJECT_LEN]; off += SUBJECT_LEN
    try:
        role = Role(data[off])
    except ValueError as exc:
        raise MalformedCredential("unknown role") from exc
    off += 1
    try:
        pub = curves.point_decode(data[off : off + plen], suite)
    except MalformedPoint as exc:
        raise MalformedCredential(str(exc)) from exc
    off += plen
    valid_from = int.from_bytes(data[off : off + 8], "big"); off += 8
    valid_to = int.from_bytes(data[off : off + 8], "big"); off += 8
    issuer = data[off : off + SUBJECT_LEN]; off += SUBJECT_LEN
    try:
        sig = sig_decode(data[off:], suite)
    except MalformedSignature as exc:
        raise MalformedCredential(str(exc)) from exc
    return Credential(version, subject, role, pub, valid_from, valid_to, issuer, sig)


def credential_issue(
    issuer_priv: int,
    subject_id: bytes,
    role: Role,
    static_pub: Point,
    valid_from: int,
    valid_to: int,
    issuer_id: bytes,
    suite: CurveSuite,
    rng: RandomSource = os.urandom,
) -> Credential:
    if valid_from >= valid_to:
        raise InvalidCredentialFields("valid_from must precede valid_to")
    if len(subject_id) != SUBJECT_LEN or len(issuer_id) != SUBJECT_LEN:
        raise InvalidCredentialFields("identifier fields must be 16 bytes")
    if static_pub is None or not suite.is_on_curve(static_pub):
        raise InvalidCredentialFields("static public key not on curve")
    unsigned = Credential(
        1, subject_id, role, static_pub, valid_from, valid_to, issuer_id,
        SchnorrSig(suite.G, 0),
    )
    sig = schnorr_sign(issuer_priv, unsigned.tbs(suite), suite, rng)
    return replace(unsigned, signature=sig)


# verification outcomes; OK is None, everything else names the rejection cause
BAD_SIGNATURE = "BadSignature"
EXPIRED = "Expired"
NOT_YET_VALID = "NotYetValid"
UNKNOWN_ISSUER = "UnknownIssuer"
ROLE_MISMATCH = "RoleMismatch"


def credential_verify(
    cred: Credential,
    trust_root: Credential,
    now: int,
    suite: CurveSuite,
    expected_role: Role | None = None,
):
    """Checks a leaf (or the root itself) against the trust root.

    Returns None when the credential is acceptable, otherwise a string
    naming the rejection cause for audit logs.
    """
    if cred.issuer_id != trust_root.subject_id:
        return UNKNOWN_ISSUER
    if not schnorr_verify(
        trust_root.static_pub, cred.tbs(suite), cred.signature, suite
    ):
        return BAD_SIGNATURE
    if now < cred.valid_from - CLOCK_SKEW_S:
        return NOT_YET_VALID
    if now > cred.valid_to + CLOCK_SKEW_S:
        return EXPIRED
    if expected_role is not None and cred.role != expected_role:
        return ROLE_MISMATCH
    return None


def verify_trust_root(root: Credential, now: int, suite: CurveSuite):
    """A root must be a self-signed issuer credential."""
    if root.role != Role.ISSUER:
        return ROLE_MISMATCH
    if root.subject_id != root.issuer_id:
        return UNKNOWN_ISSUER
    return credential_verify(root, root, now, suite)
