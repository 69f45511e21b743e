"""Short-Weierstrass elliptic curve arithmetic over prime fields.

Two parameter suites are provided: a tiny curve over F_17 that is small
enough to enumerate exhaustively in tests, and NIST P-256 for real use.
Scalar multiplication is plain double-and-add (Jacobian internally for
speed); constant-time behavior is explicitly out of scope.

All points are affine (x, y) tuples; the group identity is None.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

from .errors import InvalidPeerKey, MalformedPoint

Point = Optional[Tuple[int, int]]
IDENTITY: Point = None

RandomSource = Callable[[int], bytes]


@dataclass(frozen=True)
class CurveSuite:
    suite_id: int
    p: int
    a: int
    b: int
    gx: int
    gy: int
    n: int

    @property
    def G(self) -> Point:
        return (self.gx, self.gy)

    @property
    def field_len(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @property
    def scalar_len(self) -> int:
        return (self.n.bit_length() + 7) // 8

    def is_on_curve(self, P: Point) -> bool:
        if P is None:
            return True
        x, y = P
        if not (0 <= x < self.p and 0 <= y < self.p):
            return False
        return (y * y - (x * x * x + self.a * x + self.b)) % self.p == 0


def point_add(P: Point, Q: Point, suite: CurveSuite) -> Point:
    """Group law: chord-and-tangent addition, including doubling and inverses."""
    p = suite.p
    if P is None:
        return Q
    if Q is None:
        return P
    x1, y1 = P
    x2, y2 = Q
    if x1 == x2:
        if (y1 + y2) % p == 0:
            return None
        lam = (3 * x1 * x1 + suite.a) * pow(2 * y1, p - 2, p) % p
    else:
        lam = (y2 - y1) * pow(x2 - x1, p - 2, p) % p
    x3 = (lam * lam - x1 - x2) % p
    y3 = (lam * (x1 - x3) - y1) % p
    return (x3, y3)


def negate(P: Point, suite: CurveSuite) -> Point:
    if P is None:
        return None
    x, y = P
    return (x, (-y) % suite.p)


def _jacobian_double(X, Y, Z, a, p):
    if Y == 0:
        return (0, 1, 0)
    S = 4 * X * Y * Y % p
    Z2 = Z * Z
    M = (3 * X * X + a * Z2 * Z2) % p
    nx = (M * M - 2 * S) % p
    ny = (M * (S - nx) - 8 * Y * Y * Y * Y) % p
    nz = 2 * Y * Z % p
    return (nx, ny, nz)


def _jacobian_add(P, Q, a, p):
    X1, Y1, Z1 = P
    X2, Y2, Z2 = Q
    if Z1 == 0:
        return Q
    if Z2 == 0:
        return P
    Z1Z1 = Z1 * Z1 % p
    Z2Z2 = Z2 * Z2 % p
    U1 = X1 * Z2Z2 % p
    U2 = X2 * Z1Z1 % p
    S1 = Y1 * Z2 * Z2Z2 % p
    S2 = Y2 * Z1 * Z1Z1 % p
    if U1 == U2:
        if S1 != S2:
            return (0, 1, 0)
        return _jacobian_double(X1, Y1, Z1, a, p)
    H = (U2 - U1) % p
    R = (S2 - S1) % p
    HH = H * H % p
    HHH = H * HH % p
    V = U1 * HH % p
    X3 = (R * R - HHH - 2 * V) % p
    Y3 = (R * (V - X3) - S1 * HHH) % p
    Z3 = H * Z1 * Z2 % p
    return (X3, Y3, Z3)


def scalar_mul(k: int, P: Point, suite: CurveSuite) -> Point:
    """k*P by double-and-add. Matches k-fold repeated point_add."""
    if P is None or k == 0:
        return None
    p, a = suite.p, suite.a
    acc = (0, 1, 0)
    base = (P[0], P[1], 1)
    kk = k
    while kk > 0:
        if kk & 1:
            acc = _jacobian_add(acc, base, a, p)
        base = _jacobian_double(*base, a, p)
        kk >>= 1
    X, Y, Z = acc
    if Z == 0:
        return None
    zinv = pow(Z, p - 2, p)
    z2 = zinv * zinv % p
    return (X * z2 % p, Y * z2 * zinv % p)


def keypair_gen(suite: CurveSuite, rng: RandomSource = os.urandom) -> Tuple[int, Point]:
    """Uniform private scalar in [1, n-1] via rejection sampling, plus its public point."""
    nbytes = suite.scalar_len
    for _ in range(1000):
        d = int.from_bytes(rng(nbytes), "big")
        if 1 <= d <= suite.n - 1:
            return d, scalar_mul(d, suite.G, suite)
    raise RuntimeError("entropy source failed to yield a valid scalar")


def shared_secret(d_local: int, Q_remote: Point, suite: CurveSuite) -> bytes:
    """x-coordinate of d*Q, big-endian, fixed field length.

    Rejects off-curve or identity peer points before any use: an invalid
    point here signals an active attack or corruption.
    """
    if Q_remote is None or not suite.is_on_curve(Q_remote):
        raise InvalidPeerKey("peer public key not a valid curve point")
    S = scalar_mul(d_local, Q_remote, suite)
    if S is None:
        raise InvalidPeerKey("shared point is the identity")
    return S[0].to_bytes(suite.field_len, "big")


def point_encode(P: Point, suite: CurveSuite) -> bytes:
    """Uncompressed encoding: 0x04 || x || y, fixed-width big-endian."""
    if P is None:
        raise ValueError("cannot encode the identity point")
    fl = suite.field_len
    return b"\x04" + P[0].to_bytes(fl, "big") + P[1].to_bytes(fl, "big")


def point_decode(data: bytes, suite: CurveSuite) -> Point:
    fl = suite.field_len
    if len(data) != 1 + 2 * fl:
        raise MalformedPoint("bad encoding length")
    if data[0] != 0x04:
        raise MalformedPoint("bad encoding prefix")
    x = int.from_bytes(data[1 : 1 + fl], "big")
    y = int.from_bytes(data[1 + fl :], "big")
    P = (x, y)
    if not suite.is_on_curve(P):
        raise MalformedPoint("coordinates not on curve")
    return P


def _subgroup_order(p: int, a: int, b: int, g: Tuple[int, int]) -> int:
    """Order of g by repeated addition; only sane for tiny curves."""
    tmp = CurveSuite(0, p, a, b, g[0], g[1], 0)
    k, P = 1, g
    while P is not None:
        P = point_add(P, g, tmp)
        k += 1
    return k


def _make_toy_suite() -> CurveSuite:
    p, a, b = 17, 2, 2
    g = (5, 1)
    return CurveSuite(0x0001, p, a, b, g[0], g[1], _subgroup_order(p, a, b, g))


TOY = _make_toy_suite()

P256 = CurveSuite(
    suite_id=0x0002,
    p=0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFF,
    a=0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFC,
    b=0x5AC635D8AA3A93E7B3EBBD55769886BC651D06B0CC53B0F63BCE3C3E27D2604B,
    gx=0x6B17D1F2E12C4247F8BCE6E563A440F277037D812DEB33A0F4A13945D898C296,
    gy=0x4FE342E2FE1A7F9B8EE7EB4A7C0F9E162BCE33576B315ECECBB6406837BF51F5,
    n=0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551,
)

SUITES = {TOY.suite_id: TOY, P256.suite_id: P256}
SUITE_NAMES = {"toy": TOY, "p256": P256}
