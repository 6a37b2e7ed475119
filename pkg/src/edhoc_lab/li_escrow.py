"""Three-party escrow of a session secret for lawful interception.

The endpoint that finishes a handshake wraps the session secret under a
key derived from ECDH between a fresh package key and each of three
recipients (Initiator, Responder, Authority).  Recovery needs all three
recipients to hand in their ECDH share; any subset leaves the wrapping key
unknown.  There are no proofs of knowledge and no t-of-n generalisation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .codec import Reader, encode_sequence
from .crypto import SUITE_0, CipherSuite, KeyKind, KeyPair
from .errors import DecodeError, EdhocError, ErrorCode, EscrowError
from .netsim import Delivery

RECIPIENT_IDS = ("I", "R", "A")
_WRAP_SALT = b"edhoc-lab escrow v1"


@dataclass(frozen=True)
class EscrowPackage:
    session_id: bytes
    wrapped_secret: bytes
    eph_public: bytes
    recipients: tuple[tuple[str, bytes], ...]  # (id, public key), fixed I, R, A order
    suite_id: int = 0

    @property
    def recipient_ids(self) -> tuple[str, ...]:
        return tuple(r for r, _ in self.recipients)

    def to_bytes(self) -> bytes:
        flat = []
        for rid, pk in self.recipients:
            flat += [rid.encode(), pk]
        return encode_sequence(self.suite_id, self.session_id, self.eph_public, self.wrapped_secret, flat)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EscrowPackage":
        reader = Reader(data)
        suite_id = reader.read_uint()
        session_id, eph, wrapped = reader.read_bstr(), reader.read_bstr(), reader.read_bstr()
        flat = reader.read()
        if not reader.at_end():
            raise DecodeError(ErrorCode.TRAILING_BYTES, "bytes after escrow package")
        if not isinstance(flat, list) or len(flat) != 6 or not all(isinstance(x, bytes) for x in flat):
            raise DecodeError(ErrorCode.MALFORMED, "recipient list must hold three (id, key) pairs")
        recipients = tuple((flat[i].decode(), flat[i + 1]) for i in range(0, 6, 2))
        return cls(session_id, wrapped, eph, recipients, suite_id)

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id.hex(),
            "suite": self.suite_id,
            "eph_public": self.eph_public.hex(),
            "wrapped_secret": self.wrapped_secret.hex(),
            "recipients": [{"id": rid, "public": pk.hex()} for rid, pk in self.recipients],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EscrowPackage":
        return cls(
            bytes.fromhex(obj["session_id"]),
            bytes.fromhex(obj["wrapped_secret"]),
            bytes.fromhex(obj["eph_public"]),
            tuple((r["id"], bytes.fromhex(r["public"])) for r in obj["recipients"]),
            obj.get("suite", 0),
        )


@dataclass(frozen=True)
class EscrowShare:
    contributor_id: str
    share: bytes = field(repr=False)

    def to_json(self) -> dict:
        return {"contributor_id": self.contributor_id, "share": self.share.hex()}

    @classmethod
    def from_json(cls, obj: dict) -> "EscrowShare":
        return cls(obj["contributor_id"], bytes.fromhex(obj["share"]))


def _wrap_key(suite: CipherSuite, shares: list[bytes]) -> bytes:
    prk = suite.kdf_extract(_WRAP_SALT, b"".join(shares))
    return suite.kdf_expand(prk, b"wrap key", suite.aead_key_length)


def escrow_wrap(
    session_secret: bytes,
    pk_i: bytes,
    pk_r: bytes,
    pk_a: bytes,
    seed: bytes,
    session_id: bytes,
    suite: CipherSuite = SUITE_0,
) -> EscrowPackage:
    if len({pk_i, pk_r, pk_a}) != 3:
        raise EscrowError(ErrorCode.DUPLICATE_RECIPIENT, "recipient public keys must be distinct")
    eph = suite.generate_keypair(KeyKind.EPHEMERAL_DH, seed)
    shares = [suite.ecdh(eph.private, pk) for pk in (pk_i, pk_r, pk_a)]
    nonce = bytes(suite.aead_nonce_length)  # one fresh key per package, sealed once
    wrapped = suite.aead_seal(_wrap_key(suite, shares), nonce, session_id, session_secret)
    recipients = tuple(zip(RECIPIENT_IDS, (pk_i, pk_r, pk_a)))
    return EscrowPackage(session_id, wrapped, eph.public, recipients, suite.id)


def contribute(key: KeyPair, package: EscrowPackage, suite: CipherSuite = SUITE_0) -> EscrowShare:
    for rid, pk in package.recipients:
        if pk == key.public:
            return EscrowShare(rid, suite.ecdh(key.private, package.eph_public))
    raise EscrowError(ErrorCode.NOT_A_RECIPIENT, "key is not one of the package recipients")


def recover(package: EscrowPackage, shares: list[EscrowShare], suite: CipherSuite = SUITE_0) -> bytes:
    by_id = {s.contributor_id: s.share for s in shares}
    missing = [rid for rid in package.recipient_ids if rid not in by_id]
    if missing:
        raise EscrowError(ErrorCode.INSUFFICIENT_SHARES, f"missing shares from {', '.join(missing)}")
    key = _wrap_key(suite, [by_id[rid] for rid in package.recipient_ids])
    nonce = bytes(suite.aead_nonce_length)
    try:
        return suite.aead_open(key, nonce, package.session_id, package.wrapped_secret)
    except EdhocError as exc:
        raise EscrowError(ErrorCode.AEAD_AUTH_FAILURE, "wrapped secret does not open") from exc


@dataclass
class InterceptionRecord:
    session_id: bytes
    mirrored_frames: list[tuple[int, bytes]] = field(default_factory=list)
    recovered_secret: bytes | None = None
    package: EscrowPackage | None = None

    @property
    def payloads(self) -> list[bytes]:
        return [p for _, p in self.mirrored_frames]

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id.hex(),
            "mirrored_frames": [{"seq": s, "payload": p.hex()} for s, p in self.mirrored_frames],
            "recovered_secret": self.recovered_secret.hex() if self.recovered_secret else None,
            "package": self.package.to_json() if self.package else None,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def proxy_ingest(record: InterceptionRecord, delivery: Delivery) -> InterceptionRecord:
    """Append a mirrored frame in arrival order; a repeated seq is ignored."""
    seq = delivery.frame.seq
    if any(s == seq for s, _ in record.mirrored_frames):
        return record
    record.mirrored_frames.append((seq, delivery.frame.payload))
    return record
