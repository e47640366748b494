"""Pairing-based one-time identity signatures with t-of-n threshold checking.

A permission issuer hands every consensus node a key pair ``(a, g^a)``.
A node signs the hash of its identity (e.g. a MAC address string) as
``h^a`` in G1 and the upper layer verifies each signature with the
pairing identity ``e(sig, g) == e(h, v)``, counting how many verify.

The only concrete suite is BLS12-381: hash-to-G1 follows RFC 9380
(``BLS12381G1_XMD:SHA-256_SSWU_RO_``), group arithmetic and pairings
come from ``py_arkworks_bls12381``.
"""

from __future__ import annotations

import hashlib
import random
import statistics
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from py_arkworks_bls12381 import GT, G1Point, G2Point, Scalar
from py_ecc.bls.hash import expand_message_xmd
from py_ecc.optimized_bls12_381 import constants as _iso

from .errors import EmptyIdentity, PolicyInvalid, PolicyMismatch, SuiteMismatch

Seed = Union[int, str, bytes]

BLS12_381_ORDER = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001
# effective cofactor for G1 (RFC 9380, section 8.8.1)
_G1_H_EFF = 0xD201000000010001
DEFAULT_DST = b"HIRAFT-V01-CS01-with-BLS12381G1_XMD:SHA-256_SSWU_RO_"


_P = 0x1A0111EA397FE69A4B1BA7B6434BACD764774B84F38512BF6730D2A0F6B0F6241EABFFFEB153FFFFB9FEFFFFFFFFAAAB
_P_MINUS_3_DIV_4 = (_P - 3) // 4
_SSWU_A = _iso.ISO_11_A.n
_SSWU_B = _iso.ISO_11_B.n
_SSWU_Z = _iso.ISO_11_Z.n
_SQRT_MINUS_11_CUBED = _iso.SQRT_MINUS_11_CUBED.n
_ISO_MAP = [[c.n for c in coeffs] for coeffs in _iso.ISO_11_MAP_COEFFICIENTS]


def _hash_to_field(message: bytes, dst: bytes):
    data = expand_message_xmd(message, dst, 128, hashlib.sha256)
    return int.from_bytes(data[:64], "big") % _P, int.from_bytes(data[64:], "big") % _P


def _sgn0(x: int) -> int:
    return x & 1


def _map_to_curve_g1(t: int):
    """Simplified SWU onto the 11-isogenous curve, then the isogeny to E.

    Plain-integer port of the RFC 9380 straight-line procedure; returns
    affine ``(x, y)`` on E(Fp), not yet in the prime-order subgroup.
    """
    p = _P
    t2 = t * t % p
    zt2 = _SSWU_Z * t2 % p
    temp = (zt2 + zt2 * zt2) % p
    den = -_SSWU_A * temp % p
    num = _SSWU_B * (temp + 1) % p
    if den == 0:
        den = _SSWU_Z * _SSWU_A % p
    v = pow(den, 3, p)
    u = (pow(num, 3, p) + _SSWU_A * num * den * den + _SSWU_B * v) % p
    uv = u * v % p
    y = uv * pow(uv * v * v % p, _P_MINUS_3_DIV_4, p) % p
    if (y * y * v - u) % p:
        y = y * pow(t, 3, p) * _SQRT_MINUS_11_CUBED % p
        num = num * zt2 % p
    if _sgn0(t) != _sgn0(y):
        y = -y % p
    # affine point on the isogenous curve
    z_inv = pow(den, -1, p)
    x_iso = num * z_inv % p
    y_iso = y  # (y * den) / den
    vals = []
    for coeffs in _ISO_MAP:
        acc = 0
        for c in reversed(coeffs):
            acc = (acc * x_iso + c) % p
        vals.append(acc)
    x_num, x_den, y_num, y_den = vals
    x = x_num * pow(x_den, -1, p) % p
    y = y_iso * y_num * pow(y_den, -1, p) % p
    return x, y


def _compress_affine(x: int, y: int) -> list:
    """ZCash-style 48-byte compressed encoding of an affine G1 point."""
    flags = 0x80 | (0x20 if y > (_P - 1) // 2 else 0)
    out = bytearray(x.to_bytes(48, "big"))
    out[0] |= flags
    return list(out)


class PairingSuite(ABC):
    """Abstract bilinear group ``e: G1 x G2 -> GT`` with a hash into G1."""

    suite_id: str
    order: int

    @abstractmethod
    def generator(self): ...

    @abstractmethod
    def hash_to_g1(self, data: bytes): ...

    @abstractmethod
    def g1_mul(self, point, k: int): ...

    @abstractmethod
    def g2_mul(self, point, k: int): ...

    @abstractmethod
    def g1_add(self, a, b): ...

    @abstractmethod
    def pair(self, p, q): ...

    @abstractmethod
    def gt_mul(self, x, y): ...

    @abstractmethod
    def gt_one(self): ...

    @abstractmethod
    def encode_g1(self, point) -> bytes: ...

    @abstractmethod
    def decode_g1(self, data: bytes): ...

    @abstractmethod
    def encode_g2(self, point) -> bytes: ...

    @abstractmethod
    def decode_g2(self, data: bytes): ...

    @abstractmethod
    def is_g2_identity(self, point) -> bool: ...

    def gt_pow(self, x, k: int):
        """Square-and-multiply exponentiation in GT."""
        result = self.gt_one()
        base = x
        k %= self.order
        while k:
            if k & 1:
                result = self.gt_mul(result, base)
            base = self.gt_mul(base, base)
            k >>= 1
        return result

    def random_scalar(self, rng: random.Random) -> int:
        while True:
            k = rng.randrange(self.order)
            if k:
                return k

    def random_g1(self, rng: random.Random):
        """A uniformly random G1 element (generator to a random power)."""
        return self.g1_mul(self.g1_generator(), self.random_scalar(rng))

    @abstractmethod
    def g1_generator(self): ...


class Bls12381Suite(PairingSuite):
    """BLS12-381, signatures in G1 (48-byte compressed), keys in G2."""

    order = BLS12_381_ORDER

    def __init__(self, dst: bytes = DEFAULT_DST):
        self.dst = dst
        self.suite_id = "bls12-381:" + hashlib.sha256(dst).hexdigest()[:16]
        self._g2 = G2Point()
        self._g1 = G1Point()

    def __repr__(self):
        return f"Bls12381Suite(dst={self.dst!r})"

    def generator(self):
        return self._g2

    def g1_generator(self):
        return self._g1

    def hash_to_g1(self, data: bytes):
        u0, u1 = _hash_to_field(data, self.dst)
        # map_to_curve lands on E(Fp); the sum is moved into G1 by h_eff below
        q0 = G1Point.from_compressed_bytes_unchecked(_compress_affine(*_map_to_curve_g1(u0)))
        q1 = G1Point.from_compressed_bytes_unchecked(_compress_affine(*_map_to_curve_g1(u1)))
        return (q0 + q1) * Scalar(_G1_H_EFF)

    def g1_mul(self, point, k: int):
        return point * Scalar(k % self.order)

    def g2_mul(self, point, k: int):
        return point * Scalar(k % self.order)

    def g1_add(self, a, b):
        return a + b

    def pair(self, p, q):
        return GT.pairing(p, q)

    def gt_mul(self, x, y):
        return x * y

    def gt_one(self):
        return GT.one()

    def encode_g1(self, point) -> bytes:
        return bytes(point.to_compressed_bytes())

    def decode_g1(self, data: bytes):
        return G1Point.from_compressed_bytes(list(data))

    def encode_g2(self, point) -> bytes:
        return bytes(point.to_compressed_bytes())

    def decode_g2(self, data: bytes):
        return G2Point.from_compressed_bytes(list(data))

    def is_g2_identity(self, point) -> bool:
        return point == G2Point.identity()


_default_suite: Optional[Bls12381Suite] = None


def default_suite() -> Bls12381Suite:
    global _default_suite
    if _default_suite is None:
        _default_suite = Bls12381Suite()
    return _default_suite


@dataclass(frozen=True)
class SigningKey:
    scalar: int
    suite: PairingSuite = field(repr=False, compare=False)

    def hex(self) -> str:
        return self.scalar.to_bytes(32, "big").hex()


@dataclass(frozen=True)
class VerifierKey:
    point: object = field(repr=False)
    suite: PairingSuite = field(repr=False, compare=False)

    def to_bytes(self) -> bytes:
        return self.suite.encode_g2(self.point)

    def hex(self) -> str:
        return self.to_bytes().hex()

    @classmethod
    def from_hex(cls, data: str, suite: PairingSuite) -> "VerifierKey":
        return cls(suite.decode_g2(bytes.fromhex(data)), suite)


@dataclass(frozen=True)
class IdentityDigest:
    point: object = field(repr=False)
    source: bytes
    suite: PairingSuite = field(repr=False, compare=False)

    def to_bytes(self) -> bytes:
        return self.suite.encode_g1(self.point)

    def hex(self) -> str:
        return self.to_bytes().hex()


@dataclass(frozen=True)
class OneTimeSignature:
    """Compressed G1 encoding of ``h^a``.

    Kept as raw bytes: a damaged signature may not decode to a group
    element at all, which verification reports as a failure.
    """

    data: bytes
    signer: str
    suite: PairingSuite = field(repr=False, compare=False)

    def hex(self) -> str:
        return self.data.hex()

    @classmethod
    def from_hex(cls, data: str, signer: str, suite: PairingSuite) -> "OneTimeSignature":
        return cls(bytes.fromhex(data), signer, suite)


@dataclass(frozen=True)
class ThresholdPolicy:
    t: int
    n: int

    def __post_init__(self):
        if self.n < 1 or self.t < 1 or self.t > self.n:
            raise PolicyInvalid(f"need 1 <= t <= n, got t={self.t}, n={self.n}")

    @classmethod
    def two_thirds(cls, n: int) -> "ThresholdPolicy":
        return cls(min(n, 2 * n // 3 + 1), n)


@dataclass(frozen=True)
class VerificationReport:
    results: tuple
    valid: int
    accepted: bool
    policy: ThresholdPolicy


def _seed_bytes(seed: Seed) -> bytes:
    if isinstance(seed, bytes):
        return seed
    if isinstance(seed, int):
        return b"i" + str(seed).encode()
    return b"s" + str(seed).encode()


def generate_keypair(suite: PairingSuite, rng_seed: Seed):
    """Deterministic key generation: the same seed gives the same pair."""
    material = _seed_bytes(rng_seed)
    counter = 0
    while True:
        digest = hashlib.sha512(
            b"hiraft-keygen|" + suite.suite_id.encode() + b"|" + material + counter.to_bytes(4, "big")
        ).digest()
        a = int.from_bytes(digest, "big") % suite.order
        if a:
            break
        counter += 1
    return SigningKey(a, suite), VerifierKey(suite.g2_mul(suite.generator(), a), suite)


def hash_identity(suite: PairingSuite, identity_bytes, block_digest: Optional[bytes] = None) -> IdentityDigest:
    """``H(m)``: SHA-256 of the identity, then hash-to-curve into G1.

    With ``block_digest`` the signed message becomes ``identity || digest``,
    binding the signature to one block.
    """
    if isinstance(identity_bytes, str):
        identity_bytes = identity_bytes.encode()
    if not identity_bytes:
        raise EmptyIdentity("identity must be non-empty")
    message = identity_bytes if block_digest is None else identity_bytes + b"|" + block_digest
    pre = hashlib.sha256(message).digest()
    return IdentityDigest(suite.hash_to_g1(pre), bytes(identity_bytes), suite)


def sign(sk: SigningKey, digest: IdentityDigest, signer: str = "") -> OneTimeSignature:
    _same_suite(sk, digest)
    point = sk.suite.g1_mul(digest.point, sk.scalar)
    return OneTimeSignature(sk.suite.encode_g1(point), signer, sk.suite)


def _same_suite(*items):
    ids = {item.suite.suite_id for item in items}
    if len(ids) > 1:
        raise SuiteMismatch(f"elements from different suites: {sorted(ids)}")


def verify_single(sig: OneTimeSignature, digest: IdentityDigest, vk: VerifierKey) -> bool:
    """Check ``e(sig, g) == e(h, v)``."""
    _same_suite(sig, digest, vk)
    suite = vk.suite
    try:
        point = suite.decode_g1(sig.data)
    except Exception:
        return False
    if suite.is_g2_identity(vk.point):
        return False
    return suite.pair(point, suite.generator()) == suite.pair(digest.point, vk.point)


def verify_threshold(sigs: Sequence, policy: ThresholdPolicy) -> VerificationReport:
    """Verify every ``(sig, digest, vk)`` slot and accept iff at least t pass.

    A slot whose signature is ``None`` (node absent) counts as invalid.
    Invalid slots never abort the loop.
    """
    if policy.t < 1 or policy.t > policy.n:
        raise PolicyInvalid(f"need 1 <= t <= n, got t={policy.t}, n={policy.n}")
    if len(sigs) != policy.n:
        raise PolicyMismatch(f"expected {policy.n} signature slots, got {len(sigs)}")
    results = []
    for sig, digest, vk in sigs:
        results.append(sig is not None and verify_single(sig, digest, vk))
    k = sum(results)
    return VerificationReport(tuple(results), k, k >= policy.t, policy)


def flip_bit(sig: OneTimeSignature, bit: int) -> OneTimeSignature:
    """Return a copy of ``sig`` with one bit of its encoding flipped."""
    data = bytearray(sig.data)
    data[(bit // 8) % len(data)] ^= 1 << (bit % 8)
    return OneTimeSignature(bytes(data), sig.signer, sig.suite)


def corrupt(sig: OneTimeSignature, rng: random.Random) -> OneTimeSignature:
    """Damage a signature by flipping one random bit past the flag bits."""
    # the top three bits of byte 0 are encoding flags; avoid them so the
    # damage is in the coordinate itself
    bit = rng.randrange(8, len(sig.data) * 8)
    return flip_bit(sig, bit)


@dataclass
class PhaseTiming:
    phase: str
    mean_ms: float
    total_ms: float


@dataclass
class BenchResult:
    n: int
    rows: list  # per node: {"node", "keygen_ms", "sign_ms", "verify_ms"}
    phases: dict  # phase -> PhaseTiming

    def mean(self, phase: str) -> float:
        return self.phases[phase].mean_ms

    def total(self, phase: str) -> float:
        return self.phases[phase].total_ms


PHASES = ("keygen", "sign", "verify")


def bench_phases(
    n: int,
    suite: Optional[PairingSuite] = None,
    identity_length: int = 17,
    repeats: int = 3,
    seed: int = 0,
) -> BenchResult:
    """Time key generation, signing and verification for ``n`` nodes.

    Each phase is timed per node; the per-node figure is the median over
    ``repeats`` runs. Signing includes hashing the identity.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    suite = suite or default_suite()
    samples = {phase: [[] for _ in range(n)] for phase in PHASES}
    for rep in range(repeats):
        for i in range(n):
            identity = (f"{seed:04x}:{rep:02x}:{i:04x}:".encode() * identity_length)[:identity_length]
            identity = identity.ljust(identity_length, b"#")
            t0 = time.perf_counter()
            sk, vk = generate_keypair(suite, f"bench/{seed}/{rep}/{i}")
            t1 = time.perf_counter()
            digest = hash_identity(suite, identity)
            sig = sign(sk, digest, signer=str(i))
            t2 = time.perf_counter()
            ok = verify_single(sig, digest, vk)
            t3 = time.perf_counter()
            if not ok:
                raise AssertionError("benchmark signature failed to verify")
            samples["keygen"][i].append((t1 - t0) * 1e3)
            samples["sign"][i].append((t2 - t1) * 1e3)
            samples["verify"][i].append((t3 - t2) * 1e3)
    rows = []
    for i in range(n):
        rows.append({"node": i, **{f"{p}_ms": statistics.median(samples[p][i]) for p in PHASES}})
    phases = {}
    for p in PHASES:
        total = sum(row[f"{p}_ms"] for row in rows)
        phases[p] = PhaseTiming(p, total / n, total)
    return BenchResult(n, rows, phases)
