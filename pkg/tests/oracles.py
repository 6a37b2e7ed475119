"""Independent reference implementations used only by the tests.

None of these share code with the package: X25519 is the RFC 7748 ladder in
plain integers, CBOR comes from cbor2, AEAD and HKDF come straight from the
``cryptography`` primitives rather than through a CipherSuite.
"""

from __future__ import annotations

import cbor2
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESCCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDFExpand

P25519 = 2**255 - 19
A24 = 121665


def _decode_scalar(k: bytes) -> int:
    b = bytearray(k)
    b[0] &= 248
    b[31] &= 127
    b[31] |= 64
    return int.from_bytes(b, "little")


def x25519(k: bytes, u: bytes) -> bytes:
    """Montgomery ladder from RFC 7748, section 5."""
    scalar = _decode_scalar(k)
    x1 = int.from_bytes(u, "little") & ((1 << 255) - 1)
    x2, z2, x3, z3 = 1, 0, x1, 1
    swap = 0
    for t in reversed(range(255)):
        bit = (scalar >> t) & 1
        swap ^= bit
        if swap:
            x2, x3, z2, z3 = x3, x2, z3, z2
        swap = bit
        a, b = (x2 + z2) % P25519, (x2 - z2) % P25519
        aa, bb = a * a % P25519, b * b % P25519
        e = (aa - bb) % P25519
        c, d = (x3 + z3) % P25519, (x3 - z3) % P25519
        da, cb = d * a % P25519, c * b % P25519
        x3 = (da + cb) ** 2 % P25519
        z3 = x1 * (da - cb) ** 2 % P25519
        x2 = aa * bb % P25519
        z2 = e * (aa + A24 * e) % P25519
    if swap:
        x2, z2 = x3, z3
    return (x2 * pow(z2, P25519 - 2, P25519) % P25519).to_bytes(32, "little")


def cbor_sequence(*items) -> bytes:
    return b"".join(cbor2.dumps(item, canonical=True) for item in items)


def cbor_load_sequence(data: bytes) -> list:
    import io

    stream = io.BytesIO(data)
    out = []
    while stream.tell() < len(data):
        out.append(cbor2.CBORDecoder(stream).decode())
    return out


def aes_ccm_open(key: bytes, nonce: bytes, aad: bytes, ciphertext: bytes) -> bytes:
    return AESCCM(key, tag_length=8).decrypt(nonce, ciphertext, aad)


def hkdf_expand_sha256(prk: bytes, info: bytes, length: int) -> bytes:
    return HKDFExpand(hashes.SHA256(), length, info).derive(prk)


def edhoc_kdf(prk: bytes, label: int, context: bytes, length: int) -> bytes:
    return hkdf_expand_sha256(prk, cbor_sequence(label, context, length), length)


def record_open(prk_exporter: bytes, direction: str, record: bytes) -> bytes:
    """Open an application record of suite 0 from the exporter secret alone."""
    seq, ct = cbor_load_sequence(record)
    label = direction.encode()
    key = edhoc_kdf(prk_exporter, 12, label + b" key", 16)
    iv = edhoc_kdf(prk_exporter, 12, label + b" iv", 13)
    nonce = (int.from_bytes(iv, "big") ^ seq).to_bytes(13, "big")
    return aes_ccm_open(key, nonce, cbor_sequence(label, seq), ct)
