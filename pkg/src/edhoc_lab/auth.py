"""Credentials, trust policy and the five authentication methods.

The method table maps each method to the key kind the Initiator and the
Responder authenticate with.  A party whose cell is a signature key signs
over the MAC; a static-DH or PSK party sends the MAC alone, with the MAC
key derived from a schedule that mixed in its long-term secret.
"""

from __future__ import annotations

import enum
import hmac
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from .codec import IdCred, encode_sequence
from .crypto import CipherSuite, KeyKind, KeyPair, derive_seed, generate_psk
from .errors import AuthError, ErrorCode


class CredKind(str, enum.Enum):
    SIGNATURE = "signature"
    STATIC_DH = "static-dh"
    PSK = "psk"


_WIRE_KIND = {CredKind.SIGNATURE: 0, CredKind.STATIC_DH: 1, CredKind.PSK: 2}
_FROM_WIRE = {v: k for k, v in _WIRE_KIND.items()}


class Role(str, enum.Enum):
    INITIATOR = "Initiator"
    RESPONDER = "Responder"

    @property
    def peer(self) -> "Role":
        return Role.RESPONDER if self is Role.INITIATOR else Role.INITIATOR


class TrustPolicy(str, enum.Enum):
    STRICT = "Strict"
    WEAK_ACCEPT = "WeakAccept"


# method -> (Initiator key kind, Responder key kind)
METHOD_TABLE: dict[int, tuple[CredKind, CredKind]] = {
    0: (CredKind.SIGNATURE, CredKind.SIGNATURE),
    1: (CredKind.SIGNATURE, CredKind.STATIC_DH),
    2: (CredKind.STATIC_DH, CredKind.SIGNATURE),
    3: (CredKind.STATIC_DH, CredKind.STATIC_DH),
    4: (CredKind.PSK, CredKind.PSK),
}


def required_kind(method: int, role: Role) -> CredKind:
    initiator, responder = METHOD_TABLE[method]
    return initiator if Role(role) is Role.INITIATOR else responder


def credential_blob(kid: bytes, kind: CredKind, public: bytes | None) -> bytes:
    """Canonical CRED bytes: what signatures and MACs cover."""
    items = [b"edhoc-lab-cred", kid, _WIRE_KIND[kind]]
    if public is not None:
        items.append(public)
    return encode_sequence(*items)


@dataclass(frozen=True)
class Credential:
    id_cred: bytes
    kind: CredKind
    cred: bytes
    public: bytes | None = None
    secret: bytes | None = field(default=None, repr=False)

    @classmethod
    def create(cls, id_cred: bytes, kind, public: bytes | None = None, secret: bytes | None = None):
        kind = CredKind(kind)
        if kind is CredKind.PSK:
            if public is not None:
                raise ValueError("a PSK credential has no public key")
            if not secret:
                raise ValueError("a PSK credential needs its key")
        elif public is None:
            raise ValueError(f"a {kind.value} credential needs a public key")
        return cls(bytes(id_cred), kind, credential_blob(id_cred, kind, public), public, secret)

    @classmethod
    def generate(cls, suite: CipherSuite, kind, id_cred: bytes, seed: bytes) -> "Credential":
        kind = CredKind(kind)
        if kind is CredKind.PSK:
            return cls.create(id_cred, kind, secret=generate_psk(seed))
        key_kind = KeyKind.SIGNATURE if kind is CredKind.SIGNATURE else KeyKind.STATIC_DH
        kp = suite.generate_keypair(key_kind, seed)
        return cls.create(id_cred, kind, kp.public, kp.private)

    @property
    def has_secret(self) -> bool:
        return self.secret is not None

    def public_only(self) -> "Credential":
        return self if self.kind is CredKind.PSK else replace(self, secret=None)

    def keypair(self) -> KeyPair:
        if self.kind is CredKind.PSK or self.secret is None:
            raise AuthError(ErrorCode.KIND_MISMATCH, f"{self.id_cred.hex()} has no private key")
        kind = KeyKind.SIGNATURE if self.kind is CredKind.SIGNATURE else KeyKind.STATIC_DH
        return KeyPair(self.secret, self.public, kind)

    def to_id_cred(self, by_value: bool = False) -> IdCred:
        if not by_value:
            return IdCred(self.id_cred)
        key = self.secret if self.kind is CredKind.PSK else self.public
        return IdCred(self.id_cred, _WIRE_KIND[self.kind], self.cred, key)

    def to_json(self) -> dict:
        out = {"id_cred": self.id_cred.hex(), "kind": self.kind.value}
        if self.kind is CredKind.PSK:
            out["psk"] = self.secret.hex()
        else:
            out["public"] = self.public.hex()
            if self.secret is not None:
                out["secret"] = self.secret.hex()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Credential":
        kind = CredKind(obj["kind"])
        kid = bytes.fromhex(obj["id_cred"])
        if kind is CredKind.PSK:
            return cls.create(kid, kind, secret=bytes.fromhex(obj["psk"]))
        secret = bytes.fromhex(obj["secret"]) if obj.get("secret") else None
        return cls.create(kid, kind, bytes.fromhex(obj["public"]), secret)


class CredentialStore:
    """Immutable id_cred -> Credential map."""

    def __init__(self, credentials: Iterable[Credential] = ()):
        entries: dict[bytes, Credential] = {}
        for cred in credentials:
            if cred.id_cred in entries:
                raise ValueError(f"duplicate id_cred {cred.id_cred.hex()}")
            entries[cred.id_cred] = cred
        self._entries = entries

    def get(self, id_cred: bytes) -> Credential | None:
        return self._entries.get(bytes(id_cred))

    def __contains__(self, id_cred) -> bool:
        return bytes(id_cred) in self._entries

    def __iter__(self):
        return iter(self._entries.values())

    def __len__(self):
        return len(self._entries)

    def plus(self, *credentials: Credential) -> "CredentialStore":
        return CredentialStore([*self, *credentials])

    @classmethod
    def load(cls, path) -> "CredentialStore":
        return cls(Credential.from_json(o) for o in json.loads(Path(path).read_text()))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps([c.to_json() for c in self], indent=2) + "\n")


@dataclass(frozen=True)
class Resolved:
    """A peer credential plus whether it came from the local store."""

    credential: Credential
    verified: bool


def _from_wire(id_cred: IdCred, suite: CipherSuite) -> Credential | None:
    if not id_cred.by_value:
        return None
    kind = _FROM_WIRE[id_cred.kind]
    if kind is CredKind.PSK:
        if not id_cred.key:
            return None
        cred = Credential.create(id_cred.kid, kind, secret=id_cred.key)
    else:
        if len(id_cred.key) != suite.ecdh_key_length:
            return None
        cred = Credential.create(id_cred.kid, kind, id_cred.key)
    # the by-value blob must be the one the key is bound to
    return cred if cred.cred == id_cred.cred else None


def resolve(
    store: CredentialStore,
    id_cred: IdCred,
    policy: TrustPolicy,
    expected: CredKind,
    suite: CipherSuite,
) -> Resolved:
    """Look up the peer credential named on the wire.

    Strict only trusts the store.  WeakAccept falls back to a by-value
    credential and flags it unverified; for PSK peers it also tolerates an
    unknown by-reference identifier, since the MAC key then comes from the
    local PSK alone.
    """
    stored = store.get(id_cred.kid)
    if stored is not None:
        if stored.kind is not expected:
            raise AuthError(ErrorCode.AUTH_FAILURE, f"credential {id_cred.kid.hex()} is {stored.kind.value}, need {expected.value}")
        return Resolved(stored.public_only() if stored.kind is not CredKind.PSK else stored, True)
    if TrustPolicy(policy) is TrustPolicy.STRICT:
        raise AuthError(ErrorCode.UNKNOWN_CREDENTIAL, f"id_cred {id_cred.kid.hex()} not in store")
    wire = _from_wire(id_cred, suite)
    if wire is not None:
        if wire.kind is not expected:
            raise AuthError(ErrorCode.AUTH_FAILURE, "by-value credential of the wrong kind")
        return Resolved(wire, False)
    if expected is CredKind.PSK and not id_cred.by_value:
        return Resolved(Credential(id_cred.kid, CredKind.PSK, credential_blob(id_cred.kid, CredKind.PSK, None)), False)
    raise AuthError(ErrorCode.UNKNOWN_CREDENTIAL, f"id_cred {id_cred.kid.hex()} unusable under WeakAccept")


# -- Signature_or_MAC ------------------------------------------------------

MAC_LABEL = {Role.RESPONDER: 2, Role.INITIATOR: 6}


def edhoc_kdf(suite: CipherSuite, prk: bytes, label: int, context: bytes, length: int) -> bytes:
    return suite.kdf_expand(prk, encode_sequence(label, context, length), length)


def compute_mac(suite: CipherSuite, role: Role, mac_key: bytes, context: bytes) -> bytes:
    return edhoc_kdf(suite, mac_key, MAC_LABEL[Role(role)], context, suite.hash_length)


def _signature_input(context: bytes, mac: bytes) -> bytes:
    return encode_sequence(b"Signature1", context, mac)


def build_sig_or_mac(
    suite: CipherSuite, method: int, role: Role, own: Credential, mac_key: bytes, context: bytes
) -> bytes:
    """Signature_or_MAC for ``role`` under ``method``.

    ``context`` already binds ID_CRED, the transcript hash, CRED and EAD.
    """
    kind = required_kind(method, role)
    if own.kind is not kind:
        raise AuthError(ErrorCode.KIND_MISMATCH, f"method {method} {Role(role).value} needs {kind.value}")
    mac = compute_mac(suite, role, mac_key, context)
    if kind is CredKind.SIGNATURE:
        return suite.sign(own.keypair(), _signature_input(context, mac))
    return mac


def verify_sig_or_mac(
    suite: CipherSuite,
    method: int,
    peer_role: Role,
    peer: Resolved,
    payload: bytes,
    mac_key: bytes,
    context: bytes,
) -> Resolved:
    kind = required_kind(method, peer_role)
    if peer.credential.kind is not kind:
        raise AuthError(ErrorCode.AUTH_FAILURE, "peer credential kind does not match method")
    mac = compute_mac(suite, peer_role, mac_key, context)
    if kind is CredKind.SIGNATURE:
        ok = suite.verify(peer.credential.public, _signature_input(context, mac), payload)
    else:
        ok = hmac.compare_digest(mac, payload)
    if not ok:
        raise AuthError(ErrorCode.AUTH_FAILURE, f"Signature_or_MAC from {Role(peer_role).value} invalid")
    return peer


def make_party_credential(suite: CipherSuite, kind, name: str, seed) -> Credential:
    """Deterministic credential for a named party; kid is the name's bytes."""
    return Credential.generate(suite, kind, name.encode(), derive_seed(seed, "cred", name, CredKind(kind).value))
