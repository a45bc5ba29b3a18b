import os
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anctsim import crypto
from anctsim.crypto import (
    AesBlockCipher,
    BlockCipher,
    KeyStore,
    TestBlockCipher,
    XorBlockCipher,
    ctr_apply_keystream,
    ctr_decrypt,
    ctr_decrypt_block,
    ctr_encrypt,
    ctr_encrypt_blocks_at,
    ctr_keystream,
    mac_compute,
    mac_verify,
    sign,
    verify_sig,
)

MASK = (1 << 128) - 1
VECTORS = Path(__file__).parent / "data" / "ctr_test_cipher_vectors.txt"


def as_ints(blocks):
    return [int.from_bytes(b, "big") for b in blocks]


def test_keystream_xor_cipher_zero_key():
    assert as_ints(ctr_keystream(XorBlockCipher(0), 0, 3)) == [0, 1, 2]


def test_keystream_empty():
    assert ctr_keystream(TestBlockCipher(7), 123, 0) == []


def test_keystream_counter_wraps():
    assert as_ints(ctr_keystream(XorBlockCipher(0), MASK, 2)) == [MASK, 0]


def test_keystream_rejects_negative_length():
    with pytest.raises(ValueError):
        ctr_keystream(XorBlockCipher(0), 0, -1)


def test_encrypt_empty():
    assert ctr_encrypt(TestBlockCipher(5), 9, b"") == b""
    assert ctr_decrypt(TestBlockCipher(5), 9, b"") == b""


def test_encrypt_zero_block_xor_cipher():
    assert ctr_encrypt(XorBlockCipher(0), 0, bytes(16)) == bytes(16)


def test_test_cipher_hand_vector():
    # K = 0: E(B) = rotl(B, 13); B = 1 -> 2**13.
    assert TestBlockCipher(0).encrypt_block((1).to_bytes(16, "big")) == (1 << 13).to_bytes(16, "big")
    # Top bit wraps around to bit 12.
    assert TestBlockCipher(0).encrypt_block((1 << 127).to_bytes(16, "big")) == (1 << 12).to_bytes(16, "big")


def test_test_cipher_is_injective_on_sample():
    cipher = TestBlockCipher(0x0123456789ABCDEF0123456789ABCDEF)
    rng = random.Random(3)
    blocks = {rng.getrandbits(128).to_bytes(16, "big") for _ in range(2000)}
    assert len({cipher.encrypt_block(b) for b in blocks}) == len(blocks)


def test_aes_known_answer():
    # FIPS-197 appendix C.1
    key = bytes.fromhex("000102030405060708090a0b0c0d0e0f")
    pt = bytes.fromhex("00112233445566778899aabbccddeeff")
    assert AesBlockCipher(key).encrypt_block(pt).hex() == "69c4e0d86a7b0430d8cdb78070b4c55a"


def test_aes_ctr_matches_reference_library():
    from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

    key, c = os.urandom(16), random.Random(1).getrandbits(128)
    pt = os.urandom(100)
    ref = Cipher(algorithms.AES(key), modes.CTR(c.to_bytes(16, "big"))).encryptor().update(pt)
    assert ctr_encrypt(AesBlockCipher(key), c, pt) == ref


def test_frozen_vectors_for_test_cipher():
    vectors = crypto.load_test_vectors(VECTORS)
    assert len(vectors) >= 10
    for key, counter, pt, ct in vectors:
        cipher = TestBlockCipher(key)
        assert ctr_encrypt(cipher, counter, pt) == ct
        assert ctr_decrypt(cipher, counter, ct) == pt


def ciphers():
    return st.one_of(
        st.binary(min_size=16, max_size=16).map(AesBlockCipher),
        st.integers(0, MASK).map(TestBlockCipher),
    )


@settings(max_examples=150)
@given(ciphers(), st.integers(0, MASK), st.binary(max_size=64 * 16))
def test_decrypt_inverts_encrypt(cipher, c, pt):
    ct = ctr_encrypt(cipher, c, pt)
    assert len(ct) == len(pt)
    assert ctr_decrypt(cipher, c, ct) == pt


@given(ciphers(), st.integers(0, MASK), st.binary(min_size=40, max_size=40))
def test_encrypt_is_an_involution(cipher, c, pt):
    assert ctr_encrypt(cipher, c, ctr_encrypt(cipher, c, pt)) == pt


@settings(max_examples=100)
@given(ciphers(), st.integers(0, MASK), st.binary(min_size=1, max_size=256), st.data())
def test_tampered_byte_flips_only_that_byte(cipher, c, pt, data):
    ct = bytearray(ctr_encrypt(cipher, c, pt))
    j = data.draw(st.integers(0, len(pt) - 1))
    mask = data.draw(st.integers(1, 255))
    ct[j] ^= mask
    out = ctr_decrypt(cipher, c, bytes(ct))
    expected = bytearray(pt)
    expected[j] ^= mask
    assert out == bytes(expected)


@settings(max_examples=60)
@given(ciphers(), st.integers(0, MASK), st.integers(1, 64), st.data())
def test_random_access_matches_full_decrypt(cipher, c, n_blocks, data):
    pt = data.draw(st.binary(min_size=16 * n_blocks, max_size=16 * n_blocks))
    ct = ctr_encrypt(cipher, c, pt)
    full = ctr_decrypt(cipher, c, ct)
    for i in range(1, n_blocks + 1):
        block = ct[16 * (i - 1):16 * i]
        assert ctr_decrypt_block(cipher, c, i, block) == full[16 * (i - 1):16 * i]


def test_random_access_first_block_and_determinism():
    cipher = TestBlockCipher(0xABC)
    ct = os.urandom(16)
    assert ctr_decrypt_block(cipher, 0, 1, ct) == ctr_decrypt(cipher, 0, ct)
    assert ctr_decrypt_block(cipher, 0, 1, ct) == ctr_decrypt_block(cipher, 0, 1, ct)
    with pytest.raises(ValueError):
        ctr_decrypt_block(cipher, 0, 0, ct)


class CountingCipher(BlockCipher):
    def __init__(self, inner):
        self.inner = inner
        self.calls = []

    def encrypt_block(self, block):
        self.calls.append(int.from_bytes(block, "big"))
        return self.inner.encrypt_block(block)


def test_random_access_touches_only_its_counter():
    cipher = CountingCipher(TestBlockCipher(99))
    ctr_decrypt_block(cipher, 1000, 6, bytes(16))
    assert cipher.calls == [1005]


def test_keystream_precomputed_before_plaintext():
    cipher = AesBlockCipher(bytes(range(16)))
    c = 42
    stream = ctr_keystream(cipher, c, 4)  # no plaintext exists yet
    pt = os.urandom(60)
    assert ctr_apply_keystream(stream, pt) == ctr_encrypt(cipher, c, pt)
    assert ctr_keystream(cipher, c, 4) == stream


@settings(max_examples=50)
@given(ciphers(), st.integers(0, MASK), st.integers(1, 32), st.randoms(use_true_random=False))
def test_any_partition_matches_sequential(cipher, c, n_blocks, rnd):
    pt = bytes(rnd.getrandbits(8) for _ in range(16 * n_blocks))
    seq = ctr_encrypt(cipher, c, pt)
    blocks = {i: pt[16 * (i - 1):16 * i] for i in range(1, n_blocks + 1)}
    order = list(blocks)
    rnd.shuffle(order)
    cut = rnd.randint(0, n_blocks)
    parts = [ctr_encrypt_blocks_at(cipher, c, {i: blocks[i] for i in order[:cut]}),
             ctr_encrypt_blocks_at(cipher, c, {i: blocks[i] for i in order[cut:]})]
    merged = {**parts[0], **parts[1]}
    assert b"".join(merged[i] for i in range(1, n_blocks + 1)) == seq


def test_block_cipher_exposes_no_inverse():
    for cipher in (XorBlockCipher(1), TestBlockCipher(1), AesBlockCipher(bytes(16))):
        assert not any(hasattr(cipher, name) for name in ("decrypt_block", "decrypt", "inverse"))


def test_frame_counter_layout():
    assert crypto.frame_counter(2, 7) == (2 << 32) | 7
    assert crypto.frame_counter(1, 1) >> 64 == 0


# -- MAC and signatures ---------------------------------------------------

def test_mac_round_trip():
    rng = random.Random(11)
    for _ in range(200):
        k, m = rng.randbytes(16), rng.randbytes(rng.randint(0, 100))
        tag = mac_compute(k, m)
        assert len(tag) == 16
        assert mac_verify(k, m, tag)
        assert mac_compute(k, m) == tag


def test_mac_rejects_flipped_bit_and_wrong_key():
    rng = random.Random(12)
    bad_msg = bad_key = 0
    for _ in range(1000):
        k, m = rng.randbytes(16), rng.randbytes(rng.randint(1, 64))
        tag = mac_compute(k, m)
        bit = rng.randrange(len(m) * 8)
        flipped = bytearray(m)
        flipped[bit // 8] ^= 1 << (bit % 8)
        bad_msg += mac_verify(k, bytes(flipped), tag)
        other = rng.randbytes(16)
        bad_key += other != k and mac_verify(other, m, tag)
    assert bad_msg == 0 and bad_key == 0


def test_mac_rejects_malformed_tags():
    assert not mac_verify(b"k" * 16, b"m", None)
    assert not mac_verify(b"k" * 16, b"m", b"short")


def test_signatures():
    keys = KeyStore(5)
    rng = random.Random(13)
    failures = 0
    for trial in range(1000):
        a, b = rng.sample(range(50), 2)
        msg = rng.randbytes(rng.randint(1, 64))
        sig = sign(keys.signing_key(a), msg)
        assert verify_sig(keys.verification_key(a), msg, sig)
        failures += verify_sig(keys.verification_key(b), msg, sig)
        # Claiming to be b with a's key does not help either.
        failures += verify_sig(keys.verification_key(b), msg, sign(keys.signing_key(a), msg, claimed_signer=b))
        tampered = bytearray(msg)
        tampered[rng.randrange(len(msg))] ^= 0x01
        failures += verify_sig(keys.verification_key(a), bytes(tampered), sig)
    assert failures == 0


def test_keystore_is_total_symmetric_and_reproducible():
    a, b = KeyStore(77), KeyStore(77)
    for x in range(10):
        for y in range(10):
            if x != y:
                assert a.link_cipher_key(x, y) == a.link_cipher_key(y, x) == b.link_cipher_key(x, y)
                assert a.link_mac_key(x, y) == b.link_mac_key(y, x)
    assert a.shared_key(1, 2) == b.shared_key(1, 2)
    assert KeyStore(78).shared_key(1, 2) != a.shared_key(1, 2)
    assert a.link_cipher_key(1, 2) != a.link_cipher_key(1, 3)
