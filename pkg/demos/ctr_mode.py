"""
Counter-mode encryption over a pluggable block cipher
=====================================================

Encrypt a message, decrypt one block on its own, and precompute a
keystream before the plaintext exists.
"""

import os

from anctsim.crypto import (AesBlockCipher, TestBlockCipher, ctr_apply_keystream, ctr_decrypt_block, ctr_encrypt,
                            ctr_keystream)

cipher = AesBlockCipher(os.urandom(16))
counter = 0x1234
message = b"route R1 confirmed by D; forwarding begins at t=3.2s" * 2

# Encryption and decryption are the same operation: XOR with E_K(C + i - 1).
ct = ctr_encrypt(cipher, counter, message)
assert ctr_encrypt(cipher, counter, ct) == message

# Random access: block 3 decrypts without touching blocks 1, 2 or 4.
block3 = ctr_decrypt_block(cipher, counter, 3, ct[32:48])
print("block 3:", block3)

# The keystream depends only on key and counter, so it can be prepared early.
stream = ctr_keystream(cipher, counter, -(-len(message) // 16))
assert ctr_apply_keystream(stream, message) == ct

# The hand-checkable test cipher: rotl(B ^ K, 13) ^ K.
toy = TestBlockCipher(0)
print("toy keystream block for counter 1:", toy.encrypt_block((1).to_bytes(16, "big")).hex())
