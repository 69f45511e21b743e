"""On-disk formats for keys and credentials, plus a seedable byte source.

.vlk  raw private scalar, fixed-width big-endian (UNENCRYPTED — keep out
      of untrusted locations)
.vlp  uncompressed public point encoding
.vlc  credential in its exact wire encoding
"""

from __future__ import annotations

import hashlib
from pathlib import Path

from . import curves
from .credentials import Credential, credential_decode
from .curves import CurveSuite, Point


def drbg(seed: int):
    """Deterministic byte source for --seed runs: SHA-256 counter stream."""
    state = {"counter": 0, "seed": seed.to_bytes(16, "big", signed=False)}

    def generate(n: int) -> bytes:
        out = b""
        while len(out) < n:
            out += hashlib.sha256(
                state["seed"] + state["counter"].to_bytes(8, "big")
            ).digest()
            state["counter"] += 1
        return out[:n]

    return generate


def write_private_key(path: str | Path, d: int, suite: CurveSuite) -> None:
    Path(path).write_bytes(d.to_bytes(suite.scalar_len, "big"))


def read_private_key(path: str | Path, suite: CurveSuite) -> int:
    data = Path(path).read_bytes()
    if len(data) != suite.scalar_len:
        raise ValueError(f"private key file {path}: wrong length for suite")
    d = int.from_bytes(data, "big")
    if not 1 <= d <= suite.n - 1:
        raise ValueError(f"private key file {path}: scalar out of range")
    return d


def write_public_point(path: str | Path, Q: Point, suite: CurveSuite) -> None:
    Path(path).write_bytes(curves.point_encode(Q, suite))


def read_public_point(path: str | Path, suite: CurveSuite) -> Point:
    return curves.point_decode(Path(path).read_bytes(), suite)


def write_credential(path: str | Path, cred: Credential, suite: CurveSuite) -> None:
    Path(path).write_bytes(cred.encode(suite))


def read_credential(path: str | Path, suite: CurveSuite) -> Credential:
    return credential_decode(Path(path).read_bytes(), suite)


def fingerprint(Q: Point, suite: CurveSuite) -> str:
    return hashlib.sha256(curves.point_encode(Q, suite)).hexdigest()[:16]
