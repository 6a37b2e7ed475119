"""Man-in-the-middle harness: one adversary, two spliced handshakes.

The adversary ``M`` sits on a path where every frame between the Initiator
``I`` and the Responder ``R`` is redirected to it.  It answers ``I`` as a
Responder and talks to ``R`` as an Initiator, in lockstep, then relays (and
optionally rewrites) application records between the two sessions.

Whether the splice succeeds depends only on the credentials the adversary
holds and the victims' trust policy: genuine compromised credentials pass a
Strict peer, the adversary's own keys pass only a WeakAccept peer.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import asdict, dataclass, field

from . import codec
from .actors import HandshakeEndpoint
from .auth import Credential, CredentialStore, CredKind, METHOD_TABLE, Role, TrustPolicy, make_party_credential
from .crypto import SUITE_0, CipherSuite, derive_seed
from .errors import DECODE_ERRORS, EdhocError, ErrorCode, ProtocolError
from .netsim import Delivery, Network, PathRule, RuleKind
from .protocol import (
    Phase,
    SessionConfig,
    SessionKeys,
    SessionState,
    initiator_on_message2,
    initiator_on_message4,
    initiator_start,
    responder_on_message1,
    responder_on_message3,
    session_keys,
)
from .records import I_TO_R, R_TO_I, open_record, seal_record

MAX_STEPS = 64
INITIATOR, RESPONDER, ADVERSARY = "I", "R", "M"
DEFAULT_RECORDS = {
    I_TO_R: b"PAY 0100 EUR TO ACCT 0042",
    R_TO_I: b"ACK 0100 EUR",
}


class Impersonation(str, enum.Enum):
    USE_COMPROMISED_KEYS = "UseCompromisedKeys"
    USE_OWN_KEYS = "UseOwnKeys"


class Outcome(str, enum.Enum):
    SUCCESS = "Success"
    FAILED_AUTH_AT_MSG2 = "FailedAuthAtMsg2"
    FAILED_AUTH_AT_MSG3 = "FailedAuthAtMsg3"
    FAILED_DECODE = "FailedDecode"
    TIMEOUT = "Timeout"


_DECODE_LIKE = DECODE_ERRORS | {ErrorCode.DECRYPT_FAILURE, ErrorCode.INVALID_POINT}


@dataclass(frozen=True)
class Substitution:
    """Overwrite plaintext bytes ``[start, end)`` with ``replacement``."""

    start: int
    end: int
    replacement: bytes
    direction: str | None = I_TO_R

    def apply(self, plaintext: bytes) -> bytes:
        return plaintext[: self.start] + self.replacement + plaintext[self.end :]


@dataclass
class Party:
    name: str
    credential: Credential
    store: CredentialStore
    policy: TrustPolicy


@dataclass
class AttackConfig:
    method: int
    adversary_store: CredentialStore
    victim_policies: dict[str, TrustPolicy]
    impersonation: Impersonation
    modify_records: tuple[Substitution, ...] = ()
    adversary_credentials: dict[Role, Credential] = field(default_factory=dict)
    suite: CipherSuite = SUITE_0
    message_4: bool | None = None

    def __post_init__(self):
        self.impersonation = Impersonation(self.impersonation)
        self.victim_policies = {k: TrustPolicy(v) for k, v in self.victim_policies.items()}
        if self.impersonation is Impersonation.USE_COMPROMISED_KEYS:
            for cred in self.adversary_credentials.values():
                if not cred.has_secret or cred.id_cred not in self.adversary_store:
                    raise ValueError("UseCompromisedKeys needs the victims' secrets in the adversary store")


@dataclass
class RelayState:
    session_i_side: SessionState
    session_r_side: SessionState
    keys_i_side: SessionKeys
    keys_r_side: SessionKeys
    seq: dict[str, int] = field(default_factory=lambda: {I_TO_R: 0, R_TO_I: 0})

    @classmethod
    def establish(cls, i_side: SessionState, r_side: SessionState) -> "RelayState":
        keys_i, keys_r = session_keys(i_side), session_keys(r_side)
        if keys_i.exporter_secret == keys_r.exporter_secret:
            raise ValueError("spliced sessions share an exporter secret")
        return cls(i_side, r_side, keys_i, keys_r)


@dataclass
class RelayedRecord:
    direction: str
    plaintext_in: str
    plaintext_out: str
    modified: bool


@dataclass
class AttackReport:
    method: int
    impersonation: str
    policies: dict[str, str]
    outcome: Outcome
    failing_party: str | None
    failure_code: str | None
    endpoints_believe_authenticated: dict[str, bool]
    peer_unverified: dict[str, bool]
    victim_error_records: dict[str, int]
    adversary_keys_match_victims: bool
    adversary_keys_distinct: bool
    relayed_records: list[RelayedRecord]
    received_records: dict[str, list[str]]
    steps: int
    seed: int | str = 0
    wire_digest: str = ""  # SHA-256 of the network delivery log

    def to_json(self) -> dict:
        out = asdict(self)
        out["outcome"] = self.outcome.value
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


# -- setup -----------------------------------------------------------------


def make_victims(method: int, policy: TrustPolicy, seed, suite: CipherSuite = SUITE_0) -> dict[str, Party]:
    """Legitimate Initiator and Responder that trust each other's credentials."""
    kind_i, kind_r = METHOD_TABLE[method]
    cred_i = make_party_credential(suite, kind_i, INITIATOR, seed)
    if kind_i is CredKind.PSK:
        cred_r = cred_i  # one shared key
        trusted = [cred_i]
    else:
        cred_r = make_party_credential(suite, kind_r, RESPONDER, seed)
        trusted = [cred_i.public_only(), cred_r.public_only()]
    store = CredentialStore(trusted)
    return {
        INITIATOR: Party(INITIATOR, cred_i, store, TrustPolicy(policy)),
        RESPONDER: Party(RESPONDER, cred_r, store, TrustPolicy(policy)),
    }


def standard_attack(
    method: int,
    impersonation: Impersonation,
    policy: TrustPolicy,
    seed,
    suite: CipherSuite = SUITE_0,
    modify_records: tuple[Substitution, ...] | None = None,
) -> tuple[AttackConfig, dict[str, Party]]:
    """One cell of the attack matrix: victims, plus what the adversary holds."""
    impersonation = Impersonation(impersonation)
    victims = make_victims(method, policy, seed, suite)
    kind_i, kind_r = METHOD_TABLE[method]
    if impersonation is Impersonation.USE_COMPROMISED_KEYS:
        creds = {Role.RESPONDER: victims[RESPONDER].credential, Role.INITIATOR: victims[INITIATOR].credential}
        store = CredentialStore({c.id_cred: c for c in creds.values()}.values())
    else:
        creds = {
            Role.RESPONDER: make_party_credential(suite, kind_r, "M-as-R", seed),
            Role.INITIATOR: make_party_credential(suite, kind_i, "M-as-I", seed),
        }
        if kind_i is CredKind.PSK:
            creds[Role.INITIATOR] = creds[Role.RESPONDER]
        # public halves of the victims are public knowledge
        store = CredentialStore(
            c.public_only() for c in {p.credential.id_cred: p.credential for p in victims.values()}.values()
            if c.kind is not CredKind.PSK
        )
    if modify_records is None:
        modify_records = (Substitution(4, 8, b"9999"),)
    config = AttackConfig(
        method=method,
        adversary_store=store,
        victim_policies={INITIATOR: policy, RESPONDER: policy},
        impersonation=impersonation,
        modify_records=tuple(modify_records),
        adversary_credentials=creds,
        suite=suite,
    )
    return config, victims


def attack_network() -> Network:
    """Three endpoints; both victim directions are redirected to the adversary."""
    net = Network()
    for name in (INITIATOR, RESPONDER, ADVERSARY):
        net.attach(name)
    net.add_rule(PathRule(RuleKind.REDIRECT, INITIATOR, RESPONDER, ADVERSARY))
    net.add_rule(PathRule(RuleKind.REDIRECT, RESPONDER, INITIATOR, ADVERSARY))
    return net


def victim_config(party: Party, role: Role, method: int, seed, suite: CipherSuite, message_4=None) -> SessionConfig:
    return SessionConfig(
        role=role,
        method=method,
        suite=suite,
        credential=party.credential,
        store=party.store,
        policy=party.policy,
        connection_id=b"\x0e" if role is Role.INITIATOR else b"\x18",
        rng_seed=derive_seed(seed, "session", party.name),
        message_4=message_4,
        session_id=party.name,
    )


# -- relay -----------------------------------------------------------------


def relay_record(
    relay: RelayState,
    direction: str,
    sealed: bytes,
    modify: tuple[Substitution, ...] = (),
) -> tuple[bytes, RelayedRecord]:
    """Open a record from one victim, rewrite it, reseal it for the other."""
    if direction == I_TO_R:
        src, dst = relay.session_i_side, relay.session_r_side
    elif direction == R_TO_I:
        src, dst = relay.session_r_side, relay.session_i_side
    else:
        raise ValueError(f"unknown direction {direction!r}")
    _, plaintext = open_record(src, direction, sealed)
    out = plaintext
    for sub in modify:
        if sub.direction in (None, direction):
            out = sub.apply(out)
    seq = relay.seq[direction]
    relay.seq[direction] += 1
    resealed = seal_record(dst, direction, seq, out)
    return resealed, RelayedRecord(direction, plaintext.hex(), out.hex(), out != plaintext)


class Adversary:
    """Dual-role endpoint splicing an I-side and an R-side session."""

    def __init__(self, net: Network, config: AttackConfig, seed):
        self.net = net
        self.config = config
        self.seed = seed
        self.i_side: SessionState | None = None
        self.r_side: SessionState | None = None
        self.relay: RelayState | None = None
        self.relayed: list[RelayedRecord] = []
        self.held: dict[str, bytes] = {}
        self.errors: list[str] = []

    def _session_config(self, role: Role, method: int) -> SessionConfig:
        cfg = self.config
        return SessionConfig(
            role=role,
            method=method,
            suite=cfg.suite,
            credential=cfg.adversary_credentials[role],
            store=cfg.adversary_store,
            policy=TrustPolicy.WEAK_ACCEPT,
            connection_id=b"\x2a" if role is Role.RESPONDER else b"\x2b",
            rng_seed=derive_seed(self.seed, "adversary", role.value),
            message_4=cfg.message_4,
            cred_by_value=cfg.impersonation is Impersonation.USE_OWN_KEYS,
            session_id=f"M-{role.value}",
        )

    def _send(self, to: str, payload: bytes) -> None:
        self.net.send(ADVERSARY, to, payload)

    def handle(self, delivery: Delivery) -> None:
        try:
            if delivery.frame.src == INITIATOR:
                self._from_initiator(delivery.frame.payload)
            elif delivery.frame.src == RESPONDER:
                self._from_responder(delivery.frame.payload)
        except (ProtocolError, EdhocError) as exc:
            self.errors.append(exc.code.value)

    def _from_initiator(self, payload: bytes) -> None:
        if self.relay is not None:
            return self._relay(I_TO_R, payload, RESPONDER)
        if self.i_side is None:
            m1 = codec.decode(1, payload)
            self.i_side, m2 = responder_on_message1(self._session_config(Role.RESPONDER, m1.method), m1)
            self.held["m2"] = codec.encode(m2)
            cfg = self._session_config(Role.INITIATOR, m1.method)
            cfg.suite = self.i_side.suite
            self.r_side, m1_out = initiator_start(cfg)
            self._send(RESPONDER, codec.encode(m1_out))
        elif self.i_side.phase is Phase.WAIT_MSG3:
            _, m4 = responder_on_message3(self.i_side, codec.decode(3, payload))
            if m4 is not None:
                self.held["m4"] = codec.encode(m4)
            self._send(RESPONDER, self.held.pop("m3"))
            self._maybe_establish()

    def _from_responder(self, payload: bytes) -> None:
        if self.relay is not None:
            return self._relay(R_TO_I, payload, INITIATOR)
        if self.r_side is None:
            return
        if self.r_side.phase is Phase.WAIT_MSG2:
            _, m3 = initiator_on_message2(self.r_side, codec.decode(2, payload))
            self.held["m3"] = codec.encode(m3)
            self._send(INITIATOR, self.held.pop("m2"))
        elif self.r_side.phase is Phase.WAIT_MSG4:
            initiator_on_message4(self.r_side, codec.decode(4, payload))
            self._send(INITIATOR, self.held.pop("m4"))
            self._maybe_establish()

    def _maybe_establish(self) -> None:
        done = Phase.COMPLETED
        if self.i_side.phase is done and self.r_side.phase is done:
            self.relay = RelayState.establish(self.i_side, self.r_side)

    def _relay(self, direction: str, payload: bytes, to: str) -> None:
        out, record = relay_record(self.relay, direction, payload, self.config.modify_records)
        self.relayed.append(record)
        self._send(to, out)


# -- classification --------------------------------------------------------


def classify(i_state: SessionState | None, r_state: SessionState | None) -> Outcome:
    """Outcome of a run from the two victims' sessions."""
    i_phase = i_state.phase if i_state else Phase.START
    r_phase = r_state.phase if r_state else Phase.START
    if i_phase is Phase.COMPLETED and r_phase is Phase.COMPLETED:
        return Outcome.SUCCESS
    if i_phase is Phase.FAILED:
        if i_state.failure in _DECODE_LIKE:
            return Outcome.FAILED_DECODE
        # a bad message 4 means the peer never proved the message-3 keys
        return Outcome.FAILED_AUTH_AT_MSG2 if i_state.failure_round == 2 else Outcome.FAILED_AUTH_AT_MSG3
    if r_phase is Phase.FAILED:
        if r_state.failure in _DECODE_LIKE:
            return Outcome.FAILED_DECODE
        return Outcome.FAILED_AUTH_AT_MSG3 if r_state.failure_round == 3 else Outcome.FAILED_AUTH_AT_MSG2
    return Outcome.TIMEOUT


def _failing_party(i_state, r_state) -> tuple[str | None, str | None]:
    for name, st in ((INITIATOR, i_state), (RESPONDER, r_state)):
        if st is not None and st.phase is Phase.FAILED:
            return name, st.failure.value
    return None, None


@dataclass
class AttackRun:
    """A finished run with its live participants, for inspection by tests."""

    report: AttackReport
    initiator: HandshakeEndpoint
    responder: HandshakeEndpoint
    adversary: Adversary
    net: Network


def run_attack(
    net: Network,
    config: AttackConfig,
    victims: dict[str, Party],
    seed,
    records: dict[str, bytes] | None = None,
    max_steps: int = MAX_STEPS,
) -> AttackReport:
    """Drive both victims and the adversary until quiet or ``max_steps``."""
    return run_attack_detailed(net, config, victims, seed, records, max_steps).report


def run_attack_detailed(
    net: Network,
    config: AttackConfig,
    victims: dict[str, Party],
    seed,
    records: dict[str, bytes] | None = None,
    max_steps: int = MAX_STEPS,
) -> AttackRun:
    records = DEFAULT_RECORDS if records is None else records
    suite = config.suite
    ep_i = HandshakeEndpoint(
        INITIATOR, net, victim_config(victims[INITIATOR], Role.INITIATOR, config.method, seed, suite, config.message_4), RESPONDER
    )
    ep_r = HandshakeEndpoint(
        RESPONDER, net, victim_config(victims[RESPONDER], Role.RESPONDER, config.method, seed, suite, config.message_4), INITIATOR
    )
    adversary = Adversary(net, config, seed)
    handlers = {INITIATOR: ep_i.handle, RESPONDER: ep_r.handle, ADVERSARY: adversary.handle}

    ep_i.start()
    steps = net.run(handlers, max_steps)
    if ep_i.completed and ep_r.completed:
        if records.get(I_TO_R):
            ep_i.send_record(records[I_TO_R])
            steps += net.run(handlers, max_steps - steps)
        if records.get(R_TO_I):
            ep_r.send_record(records[R_TO_I])
            steps += net.run(handlers, max_steps - steps)

    i_state, r_state = ep_i.state, ep_r.state
    outcome = classify(i_state, r_state)
    failing, code = _failing_party(i_state, r_state)

    match = distinct = False
    if adversary.relay is not None and outcome is Outcome.SUCCESS:
        a_i = adversary.relay.keys_i_side.exporter_secret
        a_r = adversary.relay.keys_r_side.exporter_secret
        match = a_i == session_keys(i_state).exporter_secret and a_r == session_keys(r_state).exporter_secret
        distinct = a_i != a_r

    def believes(ep: HandshakeEndpoint) -> bool:
        return ep.completed and not ep.error_records

    report = AttackReport(
        method=config.method,
        impersonation=config.impersonation.value,
        policies={k: v.value for k, v in sorted(config.victim_policies.items())},
        outcome=outcome,
        failing_party=failing,
        failure_code=code,
        endpoints_believe_authenticated={INITIATOR: believes(ep_i), RESPONDER: believes(ep_r)},
        peer_unverified={
            name: bool(ep.state and ep.state.peer is not None and not ep.state.peer.verified)
            for name, ep in ((INITIATOR, ep_i), (RESPONDER, ep_r))
        },
        victim_error_records={INITIATOR: len(ep_i.error_records), RESPONDER: len(ep_r.error_records)},
        adversary_keys_match_victims=match,
        adversary_keys_distinct=distinct,
        relayed_records=list(adversary.relayed),
        received_records={
            INITIATOR: [p.hex() for _, p in ep_i.records_in],
            RESPONDER: [p.hex() for _, p in ep_r.records_in],
        },
        steps=steps,
        seed=seed if isinstance(seed, int) else bytes(seed if isinstance(seed, bytes) else seed.encode()).hex(),
        wire_digest=hashlib.sha256(net.log_lines().encode()).hexdigest(),
    )
    return AttackRun(report, ep_i, ep_r, adversary, net)


def expected_outcome_is_success(impersonation: Impersonation, policy: TrustPolicy) -> bool:
    return Impersonation(impersonation) is Impersonation.USE_COMPROMISED_KEYS or TrustPolicy(policy) is TrustPolicy.WEAK_ACCEPT


def run_cell(method: int, impersonation, policy, seed, suite: CipherSuite = SUITE_0) -> AttackReport:
    config, victims = standard_attack(method, impersonation, policy, seed, suite)
    return run_attack(attack_network(), config, victims, seed)


def run_matrix(seed, suite: CipherSuite = SUITE_0) -> list[AttackReport]:
    return [
        run_cell(method, imp, pol, seed, suite)
        for method in range(5)
        for imp in Impersonation
        for pol in TrustPolicy
    ]
