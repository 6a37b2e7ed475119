"""End-to-end scenario runners shared by the CLI and the acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .actors import HandshakeEndpoint
from .auth import METHOD_TABLE, Credential, CredentialStore, CredKind, Role, TrustPolicy
from .crypto import SUITE_0, CipherSuite, KeyKind, derive_seed, generate_psk
from .errors import EdhocError, EscrowError
from .li_escrow import EscrowPackage, InterceptionRecord, contribute, escrow_wrap, proxy_ingest, recover
from .mitm import DEFAULT_RECORDS, INITIATOR, RESPONDER, Party, make_victims, victim_config
from .netsim import Delivery, Network, PathRule, RuleKind
from .protocol import exporter_from_prk_out, session_keys
from .records import DIRECTIONS, I_TO_R, R_TO_I, open_with

PROXY, AUTHORITY = "P", "A"
MAX_STEPS = 64


@dataclass
class HandshakeResult:
    method: int
    completed: bool
    exporters_match: bool
    failure: dict | None
    transcript: list[dict]
    net: Network = field(repr=False)
    endpoints: dict[str, HandshakeEndpoint] = field(repr=False)

    def to_json(self) -> dict:
        return {
            "type": "handshake_result",
            "method": self.method,
            "completed": self.completed,
            "exporters_match": self.exporters_match,
            "failure": self.failure,
        }


def victims_from_store(method: int, store: CredentialStore, policy) -> dict[str, Party]:
    """Victims from a credential fixture: own entries have kid "I" and "R"."""
    kind_i, kind_r = METHOD_TABLE[method]
    own_i = store.get(INITIATOR.encode())
    own_r = own_i if kind_i is CredKind.PSK else store.get(RESPONDER.encode())
    for name, cred, kind in ((INITIATOR, own_i, kind_i), (RESPONDER, own_r, kind_r)):
        if cred is None or cred.kind is not kind or not cred.has_secret:
            raise ValueError(f"fixture needs a {kind.value} credential with secret for {name}")
    trusted = CredentialStore(c if c.kind is CredKind.PSK else c.public_only() for c in store)
    return {
        INITIATOR: Party(INITIATOR, own_i, trusted, TrustPolicy(policy)),
        RESPONDER: Party(RESPONDER, own_r, trusted, TrustPolicy(policy)),
    }


def _pair(net: Network, method: int, seed, policy, suite, message_4=None, psk_mismatch=False, credentials=None):
    if credentials is not None:
        victims = victims_from_store(method, credentials, policy)
    else:
        victims = make_victims(method, policy, seed, suite)
    if psk_mismatch:
        if method != 4:
            raise ValueError("--psk-mismatch only applies to method 4")
        cred_i = victims[INITIATOR].credential
        other = Credential.create(cred_i.id_cred, "psk", secret=generate_psk(derive_seed(seed, "mismatch")))
        victims[RESPONDER].credential = other
        victims[RESPONDER].store = CredentialStore([other])
    ep_i = HandshakeEndpoint(
        INITIATOR, net, victim_config(victims[INITIATOR], Role.INITIATOR, method, seed, suite, message_4), RESPONDER
    )
    ep_r = HandshakeEndpoint(
        RESPONDER, net, victim_config(victims[RESPONDER], Role.RESPONDER, method, seed, suite, message_4), INITIATOR
    )
    return ep_i, ep_r


def run_handshake(
    method: int,
    seed,
    policy: TrustPolicy = TrustPolicy.STRICT,
    psk_mismatch: bool = False,
    message_4: bool | None = None,
    suite: CipherSuite = SUITE_0,
    credentials: CredentialStore | None = None,
) -> HandshakeResult:
    net = Network()
    net.attach(INITIATOR)
    net.attach(RESPONDER)
    ep_i, ep_r = _pair(net, method, seed, policy, suite, message_4, psk_mismatch, credentials)
    ep_i.start()
    net.run({INITIATOR: ep_i.handle, RESPONDER: ep_r.handle}, MAX_STEPS)
    completed = ep_i.completed and ep_r.completed
    match = completed and session_keys(ep_i.state).exporter_secret == session_keys(ep_r.state).exporter_secret
    failure = None
    for ep in (ep_i, ep_r):
        errs = ep.error_records
        if errs:
            failure = {"party": ep.name, "error": errs[0]["error"], "message_round": errs[0]["message_round"]}
            break
    if failure is None and not completed:
        failure = {"party": None, "error": "TIMEOUT", "message_round": None}
    return HandshakeResult(method, completed, match, failure, ep_i.log + ep_r.log, net, {INITIATOR: ep_i, RESPONDER: ep_r})


# -- lawful interception ---------------------------------------------------

COOPERATION = {
    "all": ("I", "R", "A"),
    "none": (),
    "authority-only": ("A",),
}


def parse_cooperation(text: str) -> tuple[str, ...]:
    if text in COOPERATION:
        return COOPERATION[text]
    parts = tuple(p.strip() for p in text.split(",") if p.strip())
    if not parts or any(p not in ("I", "R", "A") for p in parts):
        raise ValueError(f"cooperation must be all, none, authority-only or a subset like I,A; got {text!r}")
    return parts


@dataclass
class LIResult:
    method: int
    cooperating: tuple[str, ...]
    record: InterceptionRecord
    recovery_error: str | None
    recovered_matches: bool
    subset_outcomes: dict[str, str]
    decrypted_records: list[dict]
    receiver_frames: dict[str, list[tuple]]
    handshake_frames: list[bytes]
    completed: bool
    net: Network = field(repr=False)

    def to_json(self) -> dict:
        out = self.record.to_json()
        out.update(
            {
                "type": "interception_record",
                "method": self.method,
                "cooperating": list(self.cooperating),
                "recovery_error": self.recovery_error,
                "recovered_matches_session": self.recovered_matches,
                "subset_outcomes": self.subset_outcomes,
                "decrypted_records": self.decrypted_records,
            }
        )
        return out


def li_keys(seed, suite: CipherSuite = SUITE_0):
    return {rid: suite.generate_keypair(KeyKind.STATIC_DH, derive_seed(seed, "li", rid)) for rid in ("I", "R", "A")}


def run_li(
    method: int,
    seed,
    cooperate: tuple[str, ...] = ("I", "R", "A"),
    mirror: bool = True,
    suite: CipherSuite = SUITE_0,
    records: dict[str, bytes] | None = None,
) -> LIResult:
    """Honest handshake with the proxy on two mirror paths, then escrow recovery."""
    records = DEFAULT_RECORDS if records is None else records
    net = Network()
    for name in (INITIATOR, RESPONDER, PROXY):
        net.attach(name)
    if mirror:
        net.add_rule(PathRule(RuleKind.MIRROR, INITIATOR, RESPONDER, PROXY))
        net.add_rule(PathRule(RuleKind.MIRROR, RESPONDER, INITIATOR, PROXY))
    keys = li_keys(seed, suite)
    ep_i, ep_r = _pair(net, method, seed, TrustPolicy.STRICT, suite)
    ep_r.config.escrow = True
    interception = InterceptionRecord(b"")

    def escrow(ep: HandshakeEndpoint) -> None:
        if not ep.config.escrow:
            return
        state = ep.state
        sid = state.c_i + state.c_r
        package = escrow_wrap(
            state.prk_out,
            keys["I"].public,
            keys["R"].public,
            keys["A"].public,
            derive_seed(seed, "escrow-package"),
            sid,
            suite,
        )
        net.send(RESPONDER, PROXY, package.to_bytes())

    ep_r.on_complete = escrow

    def proxy(delivery: Delivery) -> None:
        if delivery.rule.startswith("mirror"):
            proxy_ingest(interception, delivery)
        elif delivery.frame.src == RESPONDER:
            interception.package = EscrowPackage.from_bytes(delivery.frame.payload)
            interception.session_id = interception.package.session_id

    handlers = {INITIATOR: ep_i.handle, RESPONDER: ep_r.handle, PROXY: proxy}
    ep_i.start()
    steps = net.run(handlers, MAX_STEPS)
    completed = ep_i.completed and ep_r.completed
    handshake_seqs = {r["seq"] for r in net.log if r["from"] != PROXY and r["to"] != PROXY}
    handshake_frames = [bytes.fromhex(r["payload"]) for r in net.log if r["rule"] == "none" and r["seq"] in handshake_seqs]
    if completed:
        if records.get(I_TO_R):
            ep_i.send_record(records[I_TO_R])
            steps += net.run(handlers, MAX_STEPS - steps)
        if records.get(R_TO_I):
            ep_r.send_record(records[R_TO_I])
            steps += net.run(handlers, MAX_STEPS - steps)

    package = interception.package
    subset_outcomes: dict[str, str] = {}
    recovery_error = None
    decrypted: list[dict] = []
    matches = False
    if package is not None:
        # only cooperating recipients hand in shares
        shares = {rid: contribute(keys[rid], package, suite) for rid in cooperate}
        for size in range(1, len(cooperate) + 1):
            for subset in combinations(cooperate, size):
                try:
                    recover(package, [shares[r] for r in subset], suite)
                    subset_outcomes[",".join(subset)] = "recovered"
                except EscrowError as exc:
                    subset_outcomes[",".join(subset)] = exc.code.value
        if cooperate:
            try:
                interception.recovered_secret = recover(package, list(shares.values()), suite)
            except EscrowError as exc:
                recovery_error = exc.code.value
        else:
            recovery_error = "NO_COOPERATION"
        if interception.recovered_secret is not None:
            matches = interception.recovered_secret == ep_r.state.prk_out == ep_i.state.prk_out
            exporter = exporter_from_prk_out(suite, interception.recovered_secret)
            for seq, payload in interception.mirrored_frames:
                for direction in DIRECTIONS:
                    try:
                        rec_seq, pt = open_with(suite, exporter, direction, payload)
                    except EdhocError:
                        continue
                    decrypted.append({"seq": seq, "direction": direction, "plaintext": pt.hex()})
    else:
        recovery_error = "NO_PACKAGE"

    receivers = {
        name: [(d.frame.seq, d.frame.src, d.frame.dst, d.frame.payload) for d in net.inboxes[name]]
        for name in (INITIATOR, RESPONDER)
    }
    return LIResult(
        method,
        tuple(cooperate),
        interception,
        recovery_error,
        matches,
        subset_outcomes,
        decrypted,
        receivers,
        handshake_frames,
        completed,
        net,
    )
