import hashlib
import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from py_ecc.bls.hash_to_curve import hash_to_G1
from py_ecc.bls.point_compression import compress_G1

from hiraft.crypto import (
    DEFAULT_DST,
    OneTimeSignature,
    ThresholdPolicy,
    VerifierKey,
    bench_phases,
    corrupt,
    flip_bit,
    generate_keypair,
    hash_identity,
    sign,
    verify_single,
    verify_threshold,
    Bls12381Suite,
)
from hiraft.errors import EmptyIdentity, PolicyInvalid, PolicyMismatch, SuiteMismatch

MAC = b"00:1A:2B:3C:4D:5E"
# compressed H(MAC), computed with py_ecc's RFC 9380 hash_to_G1 over sha256(MAC)
MAC_DIGEST_HEX = (
    "a42bd93f39311b2180a874c362774a20c0f24c433cfd1acdd2e69b82a9f124d94c942dbdaa1d7d2a8af0a043ccd16bd6"
)


def _slot(suite, i, valid=True, tag="n"):
    sk, vk = generate_keypair(suite, f"{tag}{i}")
    d = hash_identity(suite, f"{tag}-node-{i}")
    sig = sign(sk, d, signer=str(i))
    return (sig if valid else flip_bit(sig, 8 + i * 7), d, vk)


class TestKeys:
    def test_same_seed_same_keys(self, suite):
        a = generate_keypair(suite, "s1")
        b = generate_keypair(suite, "s1")
        assert a[0].hex() == b[0].hex()
        assert a[1].hex() == b[1].hex()

    def test_verifier_is_generator_power(self, suite):
        sk, vk = generate_keypair(suite, 7)
        assert vk.to_bytes() == suite.encode_g2(suite.g2_mul(suite.generator(), sk.scalar))
        assert 1 <= sk.scalar < suite.order

    def test_hundred_seeds_distinct(self, suite):
        keys = {generate_keypair(suite, f"seed-{i}")[1].hex() for i in range(100)}
        assert len(keys) == 100

    def test_verifier_hex_round_trip(self, suite):
        _, vk = generate_keypair(suite, "rt")
        assert VerifierKey.from_hex(vk.hex(), suite).to_bytes() == vk.to_bytes()


class TestHash:
    def test_matches_independent_hash_to_curve(self, suite):
        assert suite.encode_g1(hash_identity(suite, MAC).point).hex() == MAC_DIGEST_HEX

    @settings(max_examples=10, deadline=None)
    @given(st.binary(min_size=1, max_size=64))
    def test_agrees_with_py_ecc(self, suite, ident):
        pre = hashlib.sha256(ident).digest()
        oracle = compress_G1(hash_to_G1(pre, DEFAULT_DST, hashlib.sha256)).to_bytes(48, "big")
        assert suite.encode_g1(hash_identity(suite, ident).point) == oracle

    def test_deterministic(self, suite):
        a = hash_identity(suite, "aa:bb:cc:dd:ee:01")
        b = hash_identity(suite, "aa:bb:cc:dd:ee:01")
        assert a.to_bytes() == b.to_bytes()

    def test_distinct_identities(self, suite):
        a = hash_identity(suite, "aa:bb:cc:dd:ee:01")
        b = hash_identity(suite, "aa:bb:cc:dd:ee:02")
        assert a.to_bytes() != b.to_bytes()

    def test_empty_rejected(self, suite):
        with pytest.raises(EmptyIdentity):
            hash_identity(suite, b"")

    def test_block_binding_changes_digest(self, suite):
        plain = hash_identity(suite, MAC)
        bound = hash_identity(suite, MAC, b"block-7")
        assert plain.to_bytes() != bound.to_bytes()


class TestSignVerify:
    def test_round_trip(self, suite):
        sig, d, vk = _slot(suite, 0)
        assert verify_single(sig, d, vk)

    def test_wrong_key(self, suite):
        sig, d, _ = _slot(suite, 0)
        _, other = generate_keypair(suite, "someone-else")
        assert not verify_single(sig, d, other)

    def test_deterministic_signature(self, suite):
        sk, _ = generate_keypair(suite, "det")
        d = hash_identity(suite, MAC)
        assert sign(sk, d).data == sign(sk, d).data

    def test_random_factor_breaks_signature(self, suite):
        rng = random.Random(3)
        sk, vk = generate_keypair(suite, "q")
        d = hash_identity(suite, MAC)
        sig = sign(sk, d)
        q = suite.random_g1(rng)
        tampered = suite.g1_add(suite.decode_g1(sig.data), q)
        assert not verify_single(OneTimeSignature(suite.encode_g1(tampered), "x", suite), d, vk)

    def test_other_identity_fails(self, suite):
        sk, vk = generate_keypair(suite, "q")
        sig = sign(sk, hash_identity(suite, MAC))
        assert not verify_single(sig, hash_identity(suite, b"00:1A:2B:3C:4D:5F"), vk)

    def test_bit_flip_fails(self, suite):
        sig, d, vk = _slot(suite, 1)
        assert not verify_single(flip_bit(sig, 100), d, vk)
        assert not verify_single(corrupt(sig, random.Random(0)), d, vk)

    def test_suite_mismatch(self, suite):
        other = Bls12381Suite(dst=b"OTHER-DST_")
        sk, _ = generate_keypair(other, 1)
        with pytest.raises(SuiteMismatch):
            sign(sk, hash_identity(suite, MAC))

    def test_bilinearity(self, suite):
        rng = random.Random(11)
        for _ in range(3):
            a = suite.random_scalar(rng)
            h = suite.hash_to_g1(rng.randbytes(16))
            g = suite.generator()
            assert suite.pair(suite.g1_mul(h, a), g) == suite.pair(h, suite.g2_mul(g, a))


class TestThreshold:
    def test_two_of_three_all_valid(self, suite):
        slots = [_slot(suite, i) for i in range(3)]
        rep = verify_threshold(slots, ThresholdPolicy(2, 3))
        assert rep.accepted and rep.valid == 3

    def test_one_of_three_rule(self, suite):
        slots = [_slot(suite, 0), _slot(suite, 1, False), _slot(suite, 2, False)]
        rep = verify_threshold(slots, ThresholdPolicy(1, 3))
        assert rep.accepted and rep.valid == 1

    def test_two_of_three_with_two_flipped(self, suite):
        slots = [_slot(suite, 0), _slot(suite, 1, False), _slot(suite, 2, False)]
        rep = verify_threshold(slots, ThresholdPolicy(2, 3))
        assert not rep.accepted and rep.valid == 1
        assert rep.results == (True, False, False)

    def test_degenerate(self, suite):
        assert verify_threshold([_slot(suite, 0)], ThresholdPolicy(1, 1)).accepted

    def test_absent_signature_counts_invalid(self, suite):
        sig, d, vk = _slot(suite, 0)
        rep = verify_threshold([(None, d, vk)], ThresholdPolicy(1, 1))
        assert rep.results == (False,) and not rep.accepted

    def test_length_mismatch(self, suite):
        with pytest.raises(PolicyMismatch):
            verify_threshold([_slot(suite, 0)], ThresholdPolicy(1, 2))

    @pytest.mark.parametrize("t,n", [(0, 3), (4, 3)])
    def test_invalid_policy(self, suite, t, n):
        with pytest.raises(PolicyInvalid):
            ThresholdPolicy(t, n)
        with pytest.raises(PolicyInvalid):
            verify_threshold([_slot(suite, i) for i in range(n)], _raw_policy(t, n))

    def test_two_thirds_default(self):
        assert [ThresholdPolicy.two_thirds(n).t for n in (1, 2, 3, 4, 6, 20)] == [1, 2, 3, 3, 5, 14]

    def test_exhaustive_small(self, suite):
        # brute-force counting oracle over every valid/corrupt subset, n <= 4
        for n in range(1, 5):
            good = [_slot(suite, i, True, "x") for i in range(n)]
            bad = [_slot(suite, i, False, "x") for i in range(n)]
            for mask in itertools.product([True, False], repeat=n):
                slots = [good[i] if mask[i] else bad[i] for i in range(n)]
                for t in range(1, n + 1):
                    rep = verify_threshold(slots, ThresholdPolicy(t, n))
                    assert rep.results == mask
                    assert rep.accepted == (sum(mask) >= t)


def _raw_policy(t, n):
    # bypass the constructor check to reach verify_threshold's own guard
    p = object.__new__(ThresholdPolicy)
    object.__setattr__(p, "t", t)
    object.__setattr__(p, "n", n)
    return p


class TestBench:
    def test_three_rows(self, suite):
        res = bench_phases(3, suite, repeats=1)
        assert len(res.rows) == 3
        assert set(res.phases) == {"keygen", "sign", "verify"}
        assert all(res.total(p) > 0 for p in res.phases)

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            bench_phases(0)

    def test_doubling(self, suite):
        # keygen is the least noisy phase; medians over a few repeats
        small = bench_phases(4, suite, repeats=3)
        large = bench_phases(8, suite, repeats=3)
        ratio = sum(large.total(p) for p in large.phases) / sum(small.total(p) for p in small.phases)
        assert 1.5 <= ratio <= 2.5
