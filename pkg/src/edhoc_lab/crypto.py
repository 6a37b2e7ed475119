"""Cipher suites: key agreement, signatures, AEAD, hash and KDF.

Suite 0 is X25519 / Ed25519 / AES-CCM-16-64-128 / SHA-256 with an HKDF
style extract-and-expand KDF.  Suite 255 is a toy suite over a 16-bit
prime-order group; it exists so tests can brute-force keys, and offers no
security at all.

All randomness is injected through explicit seeds.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives.asymmetric import ed25519, x25519
from cryptography.hazmat.primitives.ciphers.aead import AESCCM

from .errors import CryptoError, ErrorCode


class KeyKind(str, enum.Enum):
    EPHEMERAL_DH = "ephemeral-dh"
    STATIC_DH = "static-dh"
    SIGNATURE = "signature"


@dataclass(frozen=True)
class KeyPair:
    private: bytes = field(repr=False)
    public: bytes
    kind: KeyKind


def hkdf_extract(hash_name: str, salt: bytes, ikm: bytes) -> bytes:
    if not salt:
        salt = bytes(hashlib.new(hash_name).digest_size)
    return hmac.new(salt, ikm, hash_name).digest()


def hkdf_expand(hash_name: str, prk: bytes, info: bytes, length: int) -> bytes:
    out, block, counter = b"", b"", 1
    while len(out) < length:
        block = hmac.new(prk, block + info + bytes([counter]), hash_name).digest()
        out += block
        counter += 1
    return out[:length]


@dataclass(frozen=True)
class CipherSuite:
    """Parameters plus primitive implementations of one suite."""

    id: int
    ecdh_key_length: int
    signature_length: int
    aead_key_length: int
    aead_nonce_length: int
    aead_tag_length: int
    hash_length: int

    # -- keys -------------------------------------------------------------

    def generate_keypair(self, kind: KeyKind, seed: bytes) -> KeyPair:
        if len(seed) < 16:
            raise ValueError("seed must be at least 16 bytes")
        kind = KeyKind(kind)
        prk = self.kdf_extract(b"edhoc-lab keygen", seed)
        raw = self.kdf_expand(prk, kind.value.encode(), self._private_length(kind))
        return self._keypair_from_private(self._reduce_private(raw), kind)

    def keypair_from_private(self, private: bytes, kind: KeyKind) -> KeyPair:
        return self._keypair_from_private(private, KeyKind(kind))

    def _private_length(self, kind: KeyKind) -> int:
        raise NotImplementedError

    def _reduce_private(self, raw: bytes) -> bytes:
        return raw

    def _keypair_from_private(self, private: bytes, kind: KeyKind) -> KeyPair:
        raise NotImplementedError

    def ecdh(self, private: bytes, peer_public: bytes) -> bytes:
        raise NotImplementedError

    def sign(self, key: KeyPair, data: bytes) -> bytes:
        if key.kind != KeyKind.SIGNATURE:
            raise CryptoError(ErrorCode.WRONG_KEY_KIND, f"cannot sign with a {key.kind.value} key")
        return self._sign(key.private, data)

    def _sign(self, private: bytes, data: bytes) -> bytes:
        raise NotImplementedError

    def verify(self, public: bytes, data: bytes, signature: bytes) -> bool:
        raise NotImplementedError

    # -- symmetric ----------------------------------------------------------

    def aead_seal(self, key: bytes, nonce: bytes, aad: bytes, plaintext: bytes) -> bytes:
        raise NotImplementedError

    def aead_open(self, key: bytes, nonce: bytes, aad: bytes, ciphertext: bytes) -> bytes:
        raise NotImplementedError

    def _check_aead_lengths(self, key: bytes, nonce: bytes) -> None:
        if len(key) != self.aead_key_length or len(nonce) != self.aead_nonce_length:
            raise ValueError("AEAD key or nonce length does not match suite")

    def hash(self, data: bytes) -> bytes:
        raise NotImplementedError

    def kdf_extract(self, salt: bytes, ikm: bytes) -> bytes:
        raise NotImplementedError

    def kdf_expand(self, prk: bytes, info: bytes, length: int) -> bytes:
        if length > 255 * self.hash_length:
            raise CryptoError(ErrorCode.LENGTH_TOO_LARGE, f"{length} > 255 * {self.hash_length}")
        if length < 0:
            raise ValueError("negative length")
        return self._expand(prk, info, length)

    def _expand(self, prk: bytes, info: bytes, length: int) -> bytes:
        raise NotImplementedError


class Suite0(CipherSuite):
    def __init__(self):
        super().__init__(
            id=0,
            ecdh_key_length=32,
            signature_length=64,
            aead_key_length=16,
            aead_nonce_length=13,
            aead_tag_length=8,
            hash_length=32,
        )

    def _private_length(self, kind):
        return 32

    def _keypair_from_private(self, private, kind):
        if len(private) != 32:
            raise ValueError("suite 0 private keys are 32 bytes")
        if kind == KeyKind.SIGNATURE:
            pub = ed25519.Ed25519PrivateKey.from_private_bytes(private).public_key()
        else:
            pub = x25519.X25519PrivateKey.from_private_bytes(private).public_key()
        return KeyPair(bytes(private), pub.public_bytes_raw(), kind)

    def ecdh(self, private, peer_public):
        if len(private) != 32 or len(peer_public) != 32:
            raise CryptoError(ErrorCode.INVALID_POINT, "X25519 inputs are 32 bytes")
        sk = x25519.X25519PrivateKey.from_private_bytes(bytes(private))
        try:
            return sk.exchange(x25519.X25519PublicKey.from_public_bytes(peer_public))
        except ValueError as exc:
            # raised for low-order points (all-zero shared secret)
            raise CryptoError(ErrorCode.INVALID_POINT, str(exc)) from None

    def _sign(self, private, data):
        return ed25519.Ed25519PrivateKey.from_private_bytes(private).sign(data)

    def verify(self, public, data, signature):
        if len(public) != 32 or len(signature) != 64:
            return False
        try:
            ed25519.Ed25519PublicKey.from_public_bytes(public).verify(signature, data)
        except (InvalidSignature, ValueError):
            return False
        return True

    def aead_seal(self, key, nonce, aad, plaintext):
        self._check_aead_lengths(key, nonce)
        return AESCCM(key, tag_length=8).encrypt(nonce, plaintext, aad)

    def aead_open(self, key, nonce, aad, ciphertext):
        self._check_aead_lengths(key, nonce)
        if len(ciphertext) < self.aead_tag_length:
            raise CryptoError(ErrorCode.AEAD_AUTH_FAILURE, "ciphertext shorter than tag")
        try:
            return AESCCM(key, tag_length=8).decrypt(nonce, ciphertext, aad)
        except InvalidTag:
            raise CryptoError(ErrorCode.AEAD_AUTH_FAILURE, "tag mismatch") from None

    def hash(self, data):
        return hashlib.sha256(data).digest()

    def kdf_extract(self, salt, ikm):
        return hkdf_extract("sha256", salt, ikm)

    def _expand(self, prk, info, length):
        return hkdf_expand("sha256", prk, info, length)


# Toy group: safe prime p = 2q + 1, generator 4 spans the order-q subgroup.
TOY_P = 65267
TOY_Q = 32633
TOY_G = 4


class ToySuite(CipherSuite):
    """INSECURE 16-bit suite for exhaustive tests. Never use for anything real."""

    def __init__(self):
        super().__init__(
            id=255,
            ecdh_key_length=2,
            signature_length=4,
            aead_key_length=8,
            aead_nonce_length=4,
            aead_tag_length=4,
            hash_length=8,
        )

    def _private_length(self, kind):
        return 2

    def _reduce_private(self, raw):
        return (int.from_bytes(raw, "big") % (TOY_Q - 1) + 1).to_bytes(2, "big")

    def _keypair_from_private(self, private, kind):
        x = int.from_bytes(private, "big")
        if len(private) != 2 or not 0 < x < TOY_Q:
            raise CryptoError(ErrorCode.INVALID_POINT, "toy private key out of range")
        return KeyPair(private, pow(TOY_G, x, TOY_P).to_bytes(2, "big"), kind)

    @staticmethod
    def _element(public: bytes) -> int:
        y = int.from_bytes(public, "big")
        if len(public) != 2 or not 1 < y < TOY_P - 1 or pow(y, TOY_Q, TOY_P) != 1:
            raise CryptoError(ErrorCode.INVALID_POINT, "not in the prime-order subgroup")
        return y

    def ecdh(self, private, peer_public):
        y = self._element(peer_public)
        return pow(y, int.from_bytes(private, "big"), TOY_P).to_bytes(2, "big")

    def _challenge(self, r: int, data: bytes) -> int:
        return int.from_bytes(hashlib.sha256(r.to_bytes(2, "big") + data).digest()[:4], "big") % TOY_Q

    def _sign(self, private, data):
        x = int.from_bytes(private, "big")
        k = int.from_bytes(hashlib.sha256(b"toy-nonce" + private + data).digest()[:4], "big") % (TOY_Q - 1) + 1
        e = self._challenge(pow(TOY_G, k, TOY_P), data)
        s = (k - x * e) % TOY_Q
        return e.to_bytes(2, "big") + s.to_bytes(2, "big")

    def verify(self, public, data, signature):
        if len(signature) != 4:
            return False
        try:
            y = self._element(public)
        except CryptoError:
            return False
        e, s = int.from_bytes(signature[:2], "big"), int.from_bytes(signature[2:], "big")
        if e >= TOY_Q or s >= TOY_Q:
            return False
        r = pow(TOY_G, s, TOY_P) * pow(y, e, TOY_P) % TOY_P
        return self._challenge(r, data) == e

    def _keystream(self, key, nonce, n):
        return hkdf_expand("sha256", key + nonce, b"toy-stream", n) if n else b""

    def _tag(self, key, nonce, aad, ct):
        mac = hmac.new(key, nonce + len(aad).to_bytes(4, "big") + aad + ct, "sha256")
        return mac.digest()[:4]

    def aead_seal(self, key, nonce, aad, plaintext):
        self._check_aead_lengths(key, nonce)
        ct = bytes(a ^ b for a, b in zip(plaintext, self._keystream(key, nonce, len(plaintext))))
        return ct + self._tag(key, nonce, aad, ct)

    def aead_open(self, key, nonce, aad, ciphertext):
        self._check_aead_lengths(key, nonce)
        if len(ciphertext) < 4:
            raise CryptoError(ErrorCode.AEAD_AUTH_FAILURE, "ciphertext shorter than tag")
        ct, tag = ciphertext[:-4], ciphertext[-4:]
        if not hmac.compare_digest(tag, self._tag(key, nonce, aad, ct)):
            raise CryptoError(ErrorCode.AEAD_AUTH_FAILURE, "tag mismatch")
        return bytes(a ^ b for a, b in zip(ct, self._keystream(key, nonce, len(ct))))

    def hash(self, data):
        return hashlib.sha256(data).digest()[:8]

    def kdf_extract(self, salt, ikm):
        return hkdf_extract("sha256", salt, ikm)[:8]

    def _expand(self, prk, info, length):
        return hkdf_expand("sha256", prk, info, length)


SUITE_0 = Suite0()
TOY_SUITE = ToySuite()
SUITES: dict[int, CipherSuite] = {s.id: s for s in (SUITE_0, TOY_SUITE)}


def generate_psk(seed: bytes, length: int = 32) -> bytes:
    if len(seed) < 16:
        raise ValueError("seed must be at least 16 bytes")
    return hkdf_expand("sha256", hkdf_extract("sha256", b"edhoc-lab psk", seed), b"psk", length)


def derive_seed(root: bytes | int | str, *labels: str) -> bytes:
    """Split one scenario seed into independent 32-byte sub-seeds."""
    if isinstance(root, int):
        root = root.to_bytes(8, "big", signed=False)
    elif isinstance(root, str):
        root = root.encode()
    return hashlib.sha256(root + b"/" + "/".join(labels).encode()).digest()


class RecordingSuite:
    """Transparent wrapper that logs every primitive a party asks for.

    Used to check which operation (signature vs. MAC) each method and role
    actually triggers.  ``calls`` holds ``(operation, detail)`` tuples.
    """

    def __init__(self, inner: CipherSuite):
        self._inner = inner
        self.calls: list[tuple[str, object]] = []

    def __getattr__(self, name):
        return getattr(self._inner, name)

    def ops(self, name: str) -> list:
        return [d for op, d in self.calls if op == name]

    def sign(self, key, data):
        self.calls.append(("sign", key.public))
        return self._inner.sign(key, data)

    def verify(self, public, data, signature):
        self.calls.append(("verify", public))
        return self._inner.verify(public, data, signature)

    def ecdh(self, private, peer_public):
        self.calls.append(("ecdh", peer_public))
        return self._inner.ecdh(private, peer_public)

    def kdf_expand(self, prk, info, length):
        self.calls.append(("kdf_expand", info))
        return self._inner.kdf_expand(prk, info, length)

    def aead_seal(self, key, nonce, aad, plaintext):
        self.calls.append(("aead_seal", len(plaintext)))
        return self._inner.aead_seal(key, nonce, aad, plaintext)

    def aead_open(self, key, nonce, aad, ciphertext):
        self.calls.append(("aead_open", len(ciphertext)))
        return self._inner.aead_open(key, nonce, aad, ciphertext)
