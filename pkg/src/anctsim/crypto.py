"""Counter-mode encryption over a pluggable block cipher, a keyed MAC and a
simulation-grade signature scheme backed by a deterministic key store.

Block ciphers expose only the forward direction (``encrypt_block``); CTR
decryption reuses the encryption path, so no cipher inverse exists anywhere.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from functools import lru_cache

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

BLOCK_BYTES = 16
BLOCK_BITS = 128
_MASK = (1 << BLOCK_BITS) - 1


def _as_int(block) -> int:
    if isinstance(block, int):
        return block & _MASK
    if len(block) != BLOCK_BYTES:
        raise ValueError("a block is exactly 16 bytes")
    return int.from_bytes(block, "big")


def _as_bytes(value: int) -> bytes:
    return value.to_bytes(BLOCK_BYTES, "big")


class BlockCipher:
    """Keyed permutation on 128-bit blocks (forward direction only)."""

    def encrypt_block(self, block: bytes) -> bytes:
        raise NotImplementedError

    def encrypt_blocks(self, blocks: list) -> list:
        return [self.encrypt_block(b) for b in blocks]


class XorBlockCipher(BlockCipher):
    """Toy cipher E(B) = B xor K, for hand-checkable keystreams."""

    def __init__(self, key):
        self.key = _as_int(key)

    def encrypt_block(self, block):
        return _as_bytes(_as_int(block) ^ self.key)


class TestBlockCipher(BlockCipher):
    """Fully specified test cipher: E(B) = rotl(B xor K, 13) xor K."""

    __test__ = False  # not a pytest class
    ROTATION = 13

    def __init__(self, key):
        self.key = _as_int(key)

    def encrypt_block(self, block):
        v = _as_int(block) ^ self.key
        v = ((v << self.ROTATION) | (v >> (BLOCK_BITS - self.ROTATION))) & _MASK
        return _as_bytes(v ^ self.key)


class AesBlockCipher(BlockCipher):
    """AES-128 single-block encryption (ECB on one block at a time)."""

    def __init__(self, key: bytes):
        if len(key) != 16:
            raise ValueError("AES-128 key must be 16 bytes")
        self.key = bytes(key)
        self._enc = Cipher(algorithms.AES(self.key), modes.ECB()).encryptor()

    def encrypt_block(self, block):
        return self._enc.update(bytes(block))

    def encrypt_blocks(self, blocks):
        # ECB is stateless per block, so one call over the concatenation is
        # the same as encrypting each block in turn.
        out = self._enc.update(b"".join(blocks))
        return [out[i:i + BLOCK_BYTES] for i in range(0, len(out), BLOCK_BYTES)]


def counter_block(c: int, i: int) -> bytes:
    """Counter block for 1-based block index ``i``: C + i - 1 mod 2**128."""
    return _as_bytes((c + i - 1) & _MASK)


def ctr_keystream(cipher: BlockCipher, c: int, n_blocks: int) -> list:
    """Blocks E(C), E(C+1), ..., E(C+n-1); independent of any plaintext."""
    if n_blocks < 0:
        raise ValueError("n_blocks must be >= 0")
    return cipher.encrypt_blocks([counter_block(c, i) for i in range(1, n_blocks + 1)])


def xor_bytes(a: bytes, b: bytes) -> bytes:
    n = len(a)
    return (int.from_bytes(a, "big") ^ int.from_bytes(b[:n], "big")).to_bytes(n, "big")


def ctr_apply_keystream(keystream: list, data: bytes) -> bytes:
    """XOR ``data`` with a precomputed keystream (final block truncated)."""
    if not data:
        return b""
    stream = b"".join(keystream)
    if len(stream) < len(data):
        raise ValueError("keystream shorter than data")
    return xor_bytes(data, stream)


def ctr_encrypt(cipher: BlockCipher, c: int, plaintext: bytes) -> bytes:
    n_blocks = -(-len(plaintext) // BLOCK_BYTES)
    return ctr_apply_keystream(ctr_keystream(cipher, c, n_blocks), plaintext)


def ctr_decrypt(cipher: BlockCipher, c: int, ciphertext: bytes) -> bytes:
    return ctr_encrypt(cipher, c, ciphertext)


def ctr_decrypt_block(cipher: BlockCipher, c: int, block_index: int, ct_block: bytes) -> bytes:
    """Decrypt block ``block_index`` (1-based) on its own."""
    if block_index < 1:
        raise ValueError("block_index is 1-based")
    pad = cipher.encrypt_block(counter_block(c, block_index))
    return xor_bytes(bytes(ct_block), pad)


def ctr_encrypt_blocks_at(cipher: BlockCipher, c: int, indexed_blocks) -> dict:
    """Encrypt an arbitrary subset ``{index: pt_block}`` of a message.

    Each block only needs its own counter, so any partition of a message can
    be processed independently and reassembled.
    """
    return {i: xor_bytes(bytes(b), cipher.encrypt_block(counter_block(c, i)))
            for i, b in indexed_blocks.items()}


def frame_counter(route_id: int, seq: int) -> int:
    """Per-frame counter: route_id (high 32) and seq (low 32) in the low 64 bits."""
    return ((route_id & 0xFFFFFFFF) << 32) | (seq & 0xFFFFFFFF)


# ---------------------------------------------------------------------------
# MAC and signatures

MAC_BYTES = 16


def mac_compute(key: bytes, message: bytes) -> bytes:
    return hashlib.sha256(key + message).digest()[:MAC_BYTES]


def mac_verify(key: bytes, message: bytes, tag) -> bool:
    if tag is None or len(tag) != MAC_BYTES:
        return False
    return hmac.compare_digest(mac_compute(key, message), tag)


@dataclass(frozen=True)
class Signature:
    signer: int
    tag: bytes


@dataclass(frozen=True)
class SigningKey:
    node: int
    secret: bytes


@dataclass(frozen=True)
class VerificationKey:
    # Symmetric emulation: the key store hands out the verifying secret.
    node: int
    secret: bytes


def sign(signing_key: SigningKey, message: bytes, claimed_signer=None) -> Signature:
    """Sign ``message``. ``claimed_signer`` lets an adversary put another
    node's id on a tag it computed with its own key."""
    signer = signing_key.node if claimed_signer is None else claimed_signer
    return Signature(signer, mac_compute(signing_key.secret, b"sig" + message))


def verify_sig(verification_key: VerificationKey, message: bytes, sig) -> bool:
    if not isinstance(sig, Signature) or sig.signer != verification_key.node:
        return False
    return mac_verify(verification_key.secret, b"sig" + message, sig.tag)


class KeyStore:
    """Deterministic keys for every node and node pair, derived from a seed."""

    def __init__(self, seed: int, cipher: str = "aes"):
        self.seed = seed
        self.cipher = cipher
        self._seed_bytes = seed.to_bytes(8, "big")
        self._ciphers = {}

    @lru_cache(maxsize=None)
    def _derive(self, label: str, a: int, b: int = -1) -> bytes:
        material = b"|".join([label.encode(), self._seed_bytes, str(a).encode(), str(b).encode()])
        return hashlib.sha256(material).digest()[:16]

    def link_cipher_key(self, a: int, b: int) -> bytes:
        return self._derive("link-enc", min(a, b), max(a, b))

    def link_mac_key(self, a: int, b: int) -> bytes:
        return self._derive("link-mac", min(a, b), max(a, b))

    def link_cipher(self, a: int, b: int) -> BlockCipher:
        pair = (min(a, b), max(a, b))
        cipher = self._ciphers.get(pair)
        if cipher is None:
            key = self.link_cipher_key(*pair)
            cipher = AesBlockCipher(key) if self.cipher == "aes" else TestBlockCipher(key)
            self._ciphers[pair] = cipher
        return cipher

    def shared_key(self, source: int, destination: int) -> bytes:
        """End-to-end MAC key shared by a flow's source and destination."""
        return self._derive("e2e-mac", source, destination)

    def signing_key(self, node: int) -> SigningKey:
        return SigningKey(node, self._derive("sign", node))

    def verification_key(self, node: int) -> VerificationKey:
        return VerificationKey(node, self._derive("sign", node))


def load_test_vectors(path) -> list:
    """Parse ``key_hex counter_hex pt_hex ct_hex`` lines (``#`` comments)."""
    vectors = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, counter, pt, ct = line.split()
            vectors.append((bytes.fromhex(key), int(counter, 16), bytes.fromhex(pt), bytes.fromhex(ct)))
    return vectors
