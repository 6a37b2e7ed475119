"""Initiator and Responder handshake state machines.

Each public step takes the current :class:`SessionState`, advances it in
place and returns it together with the next outgoing message.  Any failure
moves the session to ``FAILED`` and raises :class:`ProtocolError` carrying
the typed code, the round being processed and the failed state.

Key schedule (labels are the integers passed to the KDF; every context is
a CBOR sequence):

=====  ============  ===========  =========================================
label  output        PRK          context
=====  ============  ===========  =========================================
0      KEYSTREAM_2   PRK_2e       TH_2
1      SALT_3e2m     PRK_2e       TH_2
2      MAC_2         PRK_3e2m     C_R, ID_CRED_R, TH_2, CRED_R, EAD_2
3      K_3           PRK_3e2m     TH_3
4      IV_3          PRK_3e2m     TH_3
5      SALT_4e3m     PRK_3e2m     TH_3
6      MAC_3         PRK_4e3m     ID_CRED_I, TH_3, CRED_I, EAD_3
7      PRK_out       PRK_4e3m     TH_4
8      K_4           PRK_4e3m     TH_4
9      IV_4          PRK_4e3m     TH_4
10     PRK_exporter  PRK_out      (empty)
11     MAC_4         PRK_4e3m     TH_4
12     exported key  PRK_exporter application label
=====  ============  ===========  =========================================

PRK_2e = extract(TH_2, G_XY).  PRK_3e2m = extract(SALT_3e2m, G_RX) when the
Responder authenticates with a static DH key, else PRK_2e.  PRK_4e3m =
extract(SALT_4e3m, G_IY) for a static-DH Initiator, extract(SALT_4e3m ||
PSK, PRK_3e2m) for method 4, else PRK_3e2m.
"""

from __future__ import annotations

import enum
import hmac
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterable

from . import codec
from .auth import (
    Credential,
    CredentialStore,
    CredKind,
    Resolved,
    Role,
    TrustPolicy,
    build_sig_or_mac,
    edhoc_kdf,
    required_kind,
    resolve,
    verify_sig_or_mac,
)
from .codec import EadItem, Message1, Message2, Message3, Message4, Plaintext, Plaintext4
from .crypto import CipherSuite, KeyKind, KeyPair, derive_seed
from .errors import EdhocError, ErrorCode, ProtocolError

log = logging.getLogger(__name__)


class Phase(enum.IntEnum):
    START = 0
    WAIT_MSG2 = 1
    WAIT_MSG3 = 2
    WAIT_MSG4 = 3
    COMPLETED = 4
    FAILED = 5

    @property
    def label(self) -> str:
        return _PHASE_LABELS[self]


_PHASE_LABELS = {
    Phase.START: "Start",
    Phase.WAIT_MSG2: "WaitMsg2",
    Phase.WAIT_MSG3: "WaitMsg3",
    Phase.WAIT_MSG4: "WaitMsg4",
    Phase.COMPLETED: "Completed",
    Phase.FAILED: "Failed",
}


@dataclass
class SessionConfig:
    role: Role
    method: int
    suite: CipherSuite
    credential: Credential
    store: CredentialStore
    policy: TrustPolicy = TrustPolicy.STRICT
    connection_id: bytes = b"\x01"
    ead_to_send: dict[int, tuple[EadItem, ...]] = field(default_factory=dict)
    rng_seed: bytes = b"\x00" * 16
    supported_suites: tuple = ()
    enabled_methods: tuple[int, ...] = ()
    message_4: bool | None = None
    cred_by_value: bool = False
    ead_understood: frozenset[int] = frozenset()
    session_id: str | None = None
    escrow: bool = False  # hand PRK_out to the escrow hook on completion

    def __post_init__(self):
        self.role = Role(self.role)
        self.policy = TrustPolicy(self.policy)
        if not self.supported_suites:
            self.supported_suites = (self.suite,)
        if not self.enabled_methods:
            self.enabled_methods = (self.method,)
        if self.session_id is None:
            self.session_id = f"{self.role.value}:{self.connection_id.hex()}"

    def wants_message_4(self, method: int) -> bool:
        return method == 4 if self.message_4 is None else self.message_4

    def ead_for(self, round: int) -> tuple[EadItem, ...]:
        return tuple(self.ead_to_send.get(round, ()))


@dataclass
class SessionKeys:
    handshake_complete: bool
    exporter_secret: bytes


@dataclass
class SessionState:
    config: SessionConfig
    method: int
    suite: CipherSuite
    phase: Phase = Phase.START
    c_i: bytes = b""
    c_r: bytes = b""
    peer_ephemeral_public: bytes = b""
    transcript: dict[str, bytes] = field(default_factory=dict)
    prk: dict[str, bytes] = field(default_factory=dict, repr=False)
    shared_secret: bytes | None = field(default=None, repr=False)
    peer: Resolved | None = None
    failure: ErrorCode | None = None
    failure_round: int | None = None
    received_ead: dict[int, tuple[EadItem, ...]] = field(default_factory=dict)
    log: list[dict] = field(default_factory=list)
    _ephemeral: KeyPair | None = field(default=None, repr=False)

    @property
    def role(self) -> Role:
        return self.config.role

    @property
    def ephemeral_public(self) -> bytes | None:
        return self._ephemeral.public if self._ephemeral else None

    @property
    def ephemeral_private(self) -> bytes:
        if self._ephemeral is None:
            raise AttributeError("ephemeral private key has been erased")
        return self._ephemeral.private

    @property
    def prk_out(self) -> bytes | None:
        return self.prk.get("out")

    @property
    def peer_verified(self) -> bool:
        return self.peer is not None and self.peer.verified

    @property
    def peer_authenticated(self) -> bool:
        return self.phase is Phase.COMPLETED and self.peer_verified

    def debug_dict(self) -> dict:
        """Loggable snapshot; secrets appear only while they still exist."""
        out = {
            "session_id": self.config.session_id,
            "role": self.role.value,
            "method": self.method,
            "suite": self.suite.id,
            "phase": self.phase.label,
            "c_i": self.c_i.hex(),
            "c_r": self.c_r.hex(),
            "transcript": {k: v.hex() for k, v in self.transcript.items()},
            "peer": self.peer.credential.id_cred.hex() if self.peer else None,
            "peer_verified": self.peer_verified,
            "failure": self.failure.value if self.failure else None,
        }
        if self._ephemeral is not None:
            out["ephemeral_private"] = self._ephemeral.private.hex()
        return out

    def erase_ephemeral(self) -> None:
        self._ephemeral = None

    def _transition(self, to: Phase, round: int, error: ErrorCode | None = None) -> None:
        if self.phase in (Phase.COMPLETED, Phase.FAILED):
            raise ProtocolError(ErrorCode.WRONG_PHASE, f"session already {self.phase.label}", self, round)
        if to < self.phase:
            raise ProtocolError(ErrorCode.WRONG_PHASE, f"{self.phase.label} -> {to.label}", self, round)
        record = {
            "session_id": self.config.session_id,
            "role": self.role.value,
            "phase_from": self.phase.label,
            "phase_to": to.label,
            "message_round": round,
        }
        if error is not None:
            record["error"] = error.value
        self.log.append(record)
        log.debug("transition %s", record)
        self.phase = to


# -- helpers ---------------------------------------------------------------


def transcript_step(suite: CipherSuite, previous: bytes, material: bytes) -> bytes:
    """Next transcript hash: H(bstr(previous) || material)."""
    return suite.hash(codec.encode_item(previous) + material)


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def _aad(th: bytes) -> bytes:
    return codec.encode_sequence(b"Encrypt0", b"", th)


def _check_ead(state: SessionState, round: int, items: Iterable[EadItem]) -> None:
    items = tuple(items)
    state.received_ead[round] = items
    for item in items:
        if item.critical and item.label not in state.config.ead_understood:
            raise ProtocolError(ErrorCode.MALFORMED_EAD, f"critical EAD label {item.label} not understood")


@contextmanager
def _guard(state: SessionState, round: int):
    if state.phase in (Phase.COMPLETED, Phase.FAILED):
        raise ProtocolError(ErrorCode.WRONG_PHASE, f"session already {state.phase.label}", state, round)
    try:
        yield
    except EdhocError as exc:
        state.failure = exc.code
        state.failure_round = round
        state.erase_ephemeral()
        state._transition(Phase.FAILED, round, exc.code)
        raise ProtocolError(exc.code, exc.detail, state, round) from exc


def _require_phase(state: SessionState, phase: Phase, round: int) -> None:
    if state.phase is not phase:
        raise ProtocolError(
            ErrorCode.WRONG_PHASE, f"expected {phase.label}, session is {state.phase.label}", state, round
        )


def _validate_own(config: SessionConfig, method: int, code: ErrorCode) -> None:
    need = required_kind(method, config.role)
    cred = config.credential
    if cred.kind is not need or not cred.has_secret:
        raise ProtocolError(code, f"method {method} {config.role.value} needs a {need.value} credential with secret")


def _static_dh(state: SessionState, private: bytes, public: bytes) -> bytes:
    return state.suite.ecdh(private, public)


def _psk_for(state: SessionState) -> bytes:
    peer = state.peer.credential
    if not state.peer.verified and peer.secret is not None:
        return peer.secret
    return state.config.credential.secret


def _derive_prk_4e3m(state: SessionState, g_iy: bytes | None) -> None:
    suite = state.suite
    prk_3e2m = state.prk["3e2m"]
    th_3 = state.transcript["TH_3"]
    initiator_kind = required_kind(state.method, Role.INITIATOR)
    if initiator_kind is CredKind.SIGNATURE:
        state.prk["4e3m"] = prk_3e2m
        return
    salt = edhoc_kdf(suite, prk_3e2m, 5, th_3, suite.hash_length)
    if initiator_kind is CredKind.STATIC_DH:
        state.prk["4e3m"] = suite.kdf_extract(salt, g_iy)
    else:
        state.prk["4e3m"] = suite.kdf_extract(salt + _psk_for(state), prk_3e2m)


def _derive_prk_3e2m(state: SessionState, g_rx: bytes | None) -> None:
    suite = state.suite
    if required_kind(state.method, Role.RESPONDER) is CredKind.STATIC_DH:
        salt = edhoc_kdf(suite, state.prk["2e"], 1, state.transcript["TH_2"], suite.hash_length)
        state.prk["3e2m"] = suite.kdf_extract(salt, g_rx)
    else:
        state.prk["3e2m"] = state.prk["2e"]


def _context_2(c_r: bytes, id_cred: codec.IdCred, th_2: bytes, cred: bytes, ead: Iterable[EadItem]) -> bytes:
    return codec.encode_sequence(c_r, id_cred.to_item(), th_2, cred) + codec.encode_ead(ead)


def _context_3(id_cred: codec.IdCred, th_3: bytes, cred: bytes, ead: Iterable[EadItem]) -> bytes:
    return codec.encode_sequence(id_cred.to_item(), th_3, cred) + codec.encode_ead(ead)


def _keys_3(state: SessionState) -> tuple[bytes, bytes]:
    suite, th_3 = state.suite, state.transcript["TH_3"]
    return (
        edhoc_kdf(suite, state.prk["3e2m"], 3, th_3, suite.aead_key_length),
        edhoc_kdf(suite, state.prk["3e2m"], 4, th_3, suite.aead_nonce_length),
    )


def _keys_4(state: SessionState) -> tuple[bytes, bytes, bytes]:
    suite, th_4 = state.suite, state.transcript["TH_4"]
    prk = state.prk["4e3m"]
    return (
        edhoc_kdf(suite, prk, 8, th_4, suite.aead_key_length),
        edhoc_kdf(suite, prk, 9, th_4, suite.aead_nonce_length),
        edhoc_kdf(suite, prk, 11, th_4, suite.hash_length),
    )


def _finish_schedule(state: SessionState, plaintext_3: bytes, cred_i: bytes) -> None:
    suite = state.suite
    th_4 = transcript_step(suite, state.transcript["TH_3"], plaintext_3 + codec.encode_item(cred_i))
    state.transcript["TH_4"] = th_4
    state.prk["out"] = edhoc_kdf(suite, state.prk["4e3m"], 7, th_4, suite.hash_length)
    state.prk["exporter"] = edhoc_kdf(suite, state.prk["out"], 10, b"", suite.hash_length)


# -- Initiator -------------------------------------------------------------


def initiator_start(config: SessionConfig) -> tuple[SessionState, Message1]:
    if config.role is not Role.INITIATOR:
        raise ProtocolError(ErrorCode.CONFIG_INCONSISTENT, "initiator_start needs an Initiator config")
    _validate_own(config, config.method, ErrorCode.CONFIG_INCONSISTENT)
    suite = config.suite
    state = SessionState(config, config.method, suite, c_i=config.connection_id)
    state._ephemeral = suite.generate_keypair(KeyKind.EPHEMERAL_DH, derive_seed(config.rng_seed, "ephemeral"))
    m1 = Message1(config.method, suite.id, state._ephemeral.public, config.connection_id, config.ead_for(1))
    state.transcript["TH_1"] = suite.hash(codec.encode(m1))
    state._transition(Phase.WAIT_MSG2, 1)
    return state, m1


def initiator_on_message2(state: SessionState, m2: Message2) -> tuple[SessionState, Message3]:
    _require_phase(state, Phase.WAIT_MSG2, 2)
    config, suite = state.config, state.suite
    with _guard(state, 2):
        if len(m2.g_y) != suite.ecdh_key_length:
            raise ProtocolError(ErrorCode.INVALID_POINT, "G_Y has the wrong length")
        x = state._ephemeral.private
        state.c_r = m2.c_r
        state.peer_ephemeral_public = m2.g_y
        state.shared_secret = suite.ecdh(x, m2.g_y)
        th_2 = transcript_step(suite, state.transcript["TH_1"], codec.encode_sequence(m2.g_y, m2.c_r))
        state.transcript["TH_2"] = th_2
        state.prk["2e"] = suite.kdf_extract(th_2, state.shared_secret)
        keystream = edhoc_kdf(suite, state.prk["2e"], 0, th_2, len(m2.ciphertext_2))
        plaintext_2 = _xor(m2.ciphertext_2, keystream)
        try:
            pt2 = codec.decode_plaintext(plaintext_2)
        except EdhocError as exc:
            raise ProtocolError(ErrorCode.DECRYPT_FAILURE, f"ciphertext_2 does not decrypt: {exc}") from None
        _check_ead(state, 2, pt2.ead)

        state.peer = resolve(
            config.store, pt2.id_cred, config.policy, required_kind(state.method, Role.RESPONDER), suite
        )
        peer_cred = state.peer.credential
        g_rx = None
        if peer_cred.kind is CredKind.STATIC_DH:
            g_rx = _static_dh(state, x, peer_cred.public)
        _derive_prk_3e2m(state, g_rx)
        context_2 = _context_2(m2.c_r, pt2.id_cred, th_2, peer_cred.cred, pt2.ead)
        verify_sig_or_mac(
            suite, state.method, Role.RESPONDER, state.peer, pt2.sig_or_mac, state.prk["3e2m"], context_2
        )

        th_3 = transcript_step(suite, th_2, plaintext_2 + codec.encode_item(peer_cred.cred))
        state.transcript["TH_3"] = th_3
        own = config.credential
        g_iy = None
        if own.kind is CredKind.STATIC_DH:
            g_iy = _static_dh(state, own.secret, m2.g_y)
        _derive_prk_4e3m(state, g_iy)

        id_cred_i = own.to_id_cred(config.cred_by_value)
        ead_3 = config.ead_for(3)
        context_3 = _context_3(id_cred_i, th_3, own.cred, ead_3)
        sig_or_mac_3 = build_sig_or_mac(suite, state.method, Role.INITIATOR, own, state.prk["4e3m"], context_3)
        plaintext_3 = codec.encode_plaintext(Plaintext(id_cred_i, sig_or_mac_3, ead_3))
        k_3, iv_3 = _keys_3(state)
        m3 = Message3(suite.aead_seal(k_3, iv_3, _aad(th_3), plaintext_3))
        _finish_schedule(state, plaintext_3, own.cred)
        state.erase_ephemeral()
    state._transition(Phase.WAIT_MSG4 if config.wants_message_4(state.method) else Phase.COMPLETED, 2)
    return state, m3


def initiator_on_message4(state: SessionState, m4: Message4) -> SessionState:
    _require_phase(state, Phase.WAIT_MSG4, 4)
    suite = state.suite
    with _guard(state, 4):
        k_4, iv_4, mac_4 = _keys_4(state)
        plaintext_4 = suite.aead_open(k_4, iv_4, _aad(state.transcript["TH_4"]), m4.ciphertext_4)
        try:
            pt4 = codec.decode_plaintext4(plaintext_4)
        except EdhocError:
            raise ProtocolError(ErrorCode.AEAD_AUTH_FAILURE, "message_4 plaintext malformed") from None
        if not hmac.compare_digest(pt4.mac_4, mac_4):
            raise ProtocolError(ErrorCode.AEAD_AUTH_FAILURE, "MAC_4 mismatch")
        _check_ead(state, 4, pt4.ead)
    state._transition(Phase.COMPLETED, 4)
    return state


# -- Responder -------------------------------------------------------------


def responder_on_message1(config: SessionConfig, m1: Message1) -> tuple[SessionState, Message2]:
    if config.role is not Role.RESPONDER:
        raise ProtocolError(ErrorCode.CONFIG_INCONSISTENT, "responder_on_message1 needs a Responder config")
    suite = next((s for s in config.supported_suites if s.id == m1.suite), None)
    state = SessionState(config, m1.method, suite or config.suite, c_i=m1.c_i, c_r=config.connection_id)
    with _guard(state, 1):
        if suite is None:
            raise ProtocolError(ErrorCode.SUITE_REJECTED, f"suite {m1.suite} not supported")
        if m1.method not in config.enabled_methods:
            raise ProtocolError(ErrorCode.METHOD_REJECTED, f"method {m1.method} not enabled")
        _validate_own(config, m1.method, ErrorCode.METHOD_REJECTED)
        if len(m1.g_x) != suite.ecdh_key_length:
            raise ProtocolError(ErrorCode.INVALID_POINT, "G_X has the wrong length")
        _check_ead(state, 1, m1.ead_1)

        state.transcript["TH_1"] = suite.hash(codec.encode(m1))
        state._ephemeral = suite.generate_keypair(KeyKind.EPHEMERAL_DH, derive_seed(config.rng_seed, "ephemeral"))
        g_y = state._ephemeral.public
        state.peer_ephemeral_public = m1.g_x
        state.shared_secret = suite.ecdh(state._ephemeral.private, m1.g_x)
        th_2 = transcript_step(suite, state.transcript["TH_1"], codec.encode_sequence(g_y, config.connection_id))
        state.transcript["TH_2"] = th_2
        state.prk["2e"] = suite.kdf_extract(th_2, state.shared_secret)

        own = config.credential
        g_rx = _static_dh(state, own.secret, m1.g_x) if own.kind is CredKind.STATIC_DH else None
        _derive_prk_3e2m(state, g_rx)
        id_cred_r = own.to_id_cred(config.cred_by_value)
        ead_2 = config.ead_for(2)
        context_2 = _context_2(config.connection_id, id_cred_r, th_2, own.cred, ead_2)
        sig_or_mac_2 = build_sig_or_mac(suite, m1.method, Role.RESPONDER, own, state.prk["3e2m"], context_2)
        plaintext_2 = codec.encode_plaintext(Plaintext(id_cred_r, sig_or_mac_2, ead_2))
        keystream = edhoc_kdf(suite, state.prk["2e"], 0, th_2, len(plaintext_2))
        m2 = Message2(g_y, config.connection_id, _xor(plaintext_2, keystream))
        state.transcript["TH_3"] = transcript_step(suite, th_2, plaintext_2 + codec.encode_item(own.cred))
    state._transition(Phase.WAIT_MSG3, 1)
    return state, m2


def responder_on_message3(state: SessionState, m3: Message3) -> tuple[SessionState, Message4 | None]:
    _require_phase(state, Phase.WAIT_MSG3, 3)
    config, suite = state.config, state.suite
    m4 = None
    with _guard(state, 3):
        th_3 = state.transcript["TH_3"]
        k_3, iv_3 = _keys_3(state)
        plaintext_3 = suite.aead_open(k_3, iv_3, _aad(th_3), m3.ciphertext_3)
        try:
            pt3 = codec.decode_plaintext(plaintext_3)
        except EdhocError as exc:
            raise ProtocolError(ErrorCode.MALFORMED, f"message_3 plaintext: {exc}") from None
        _check_ead(state, 3, pt3.ead)

        state.peer = resolve(
            config.store, pt3.id_cred, config.policy, required_kind(state.method, Role.INITIATOR), suite
        )
        peer_cred = state.peer.credential
        g_iy = None
        if peer_cred.kind is CredKind.STATIC_DH:
            g_iy = _static_dh(state, state._ephemeral.private, peer_cred.public)
        _derive_prk_4e3m(state, g_iy)
        context_3 = _context_3(pt3.id_cred, th_3, peer_cred.cred, pt3.ead)
        verify_sig_or_mac(
            suite, state.method, Role.INITIATOR, state.peer, pt3.sig_or_mac, state.prk["4e3m"], context_3
        )
        _finish_schedule(state, plaintext_3, peer_cred.cred)
        state.erase_ephemeral()
        if config.wants_message_4(state.method):
            k_4, iv_4, mac_4 = _keys_4(state)
            plaintext_4 = codec.encode_plaintext4(Plaintext4(mac_4, config.ead_for(4)))
            m4 = Message4(suite.aead_seal(k_4, iv_4, _aad(state.transcript["TH_4"]), plaintext_4))
    state._transition(Phase.COMPLETED, 3)
    return state, m4


# -- results ---------------------------------------------------------------


def session_keys(state: SessionState) -> SessionKeys:
    if state.phase is not Phase.COMPLETED:
        raise ProtocolError(ErrorCode.NOT_COMPLETED, f"session is {state.phase.label}", state)
    return SessionKeys(True, state.prk["exporter"])


def export_key(state: SessionState, label: bytes, length: int) -> bytes:
    if state.phase is not Phase.COMPLETED:
        raise ProtocolError(ErrorCode.NOT_COMPLETED, f"session is {state.phase.label}", state)
    return export_from_secret(state.suite, state.prk["exporter"], label, length)


def exporter_from_prk_out(suite: CipherSuite, prk_out: bytes) -> bytes:
    """PRK_exporter as derived from PRK_out; lets an escrow holder rebuild keys."""
    return edhoc_kdf(suite, prk_out, 10, b"", suite.hash_length)


def export_from_secret(suite: CipherSuite, prk_exporter: bytes, label: bytes, length: int) -> bytes:
    return edhoc_kdf(suite, prk_exporter, 12, bytes(label), length)


def abort(state: SessionState, code: ErrorCode, round: int) -> None:
    """Fail a session from outside the state machine (e.g. the frame did not decode)."""
    if state.phase in (Phase.COMPLETED, Phase.FAILED):
        return
    state.failure = ErrorCode(code)
    state.failure_round = round
    state.erase_ephemeral()
    state._transition(Phase.FAILED, round, state.failure)
