"""Shared drivers for tests: build honest configs and run a handshake in memory."""

from __future__ import annotations

import dataclasses

from dataclasses import dataclass, field

from edhoc_lab import codec
from edhoc_lab.auth import Role, TrustPolicy
from edhoc_lab.crypto import SUITE_0, RecordingSuite
from edhoc_lab.mitm import INITIATOR, RESPONDER, make_victims, victim_config
from edhoc_lab.protocol import (
    initiator_on_message2,
    initiator_on_message4,
    initiator_start,
    responder_on_message1,
    responder_on_message3,
)


def pair(method, seed=b"test-seed", suite=SUITE_0, policy=TrustPolicy.STRICT, message_4=None):
    victims = make_victims(method, policy, seed, suite)
    cfg_i = victim_config(victims[INITIATOR], Role.INITIATOR, method, seed, suite, message_4)
    cfg_r = victim_config(victims[RESPONDER], Role.RESPONDER, method, seed, suite, message_4)
    return cfg_i, cfg_r


@dataclass
class Run:
    i: object = None
    r: object = None
    wire: dict = field(default_factory=dict)


def handshake(cfg_i, cfg_r) -> Run:
    """Honest run through encode/decode; raises on the first failure."""
    run = Run()
    run.i, m1 = initiator_start(cfg_i)
    run.wire[1] = codec.encode(m1)
    run.r, m2 = responder_on_message1(cfg_r, codec.decode(1, run.wire[1]))
    run.wire[2] = codec.encode(m2)
    _, m3 = initiator_on_message2(run.i, codec.decode(2, run.wire[2]))
    run.wire[3] = codec.encode(m3)
    _, m4 = responder_on_message3(run.r, codec.decode(3, run.wire[3]))
    if m4 is not None:
        run.wire[4] = codec.encode(m4)
        initiator_on_message4(run.i, codec.decode(4, run.wire[4]))
    return run


def flip(data: bytes, bit: int) -> bytes:
    out = bytearray(data)
    out[bit // 8] ^= 1 << (bit % 8)
    return bytes(out)


# Expected authentication kind per method, Initiator then Responder.
EXPECTED_KINDS = {
    0: ("signature", "signature"),
    1: ("signature", "static-dh"),
    2: ("static-dh", "signature"),
    3: ("static-dh", "static-dh"),
    4: ("psk", "psk"),
}


def instrumented_run(method):
    cfg_i, cfg_r = pair(method)
    rec_i, rec_r = RecordingSuite(SUITE_0), RecordingSuite(SUITE_0)
    cfg_i = dataclasses.replace(cfg_i, suite=rec_i, supported_suites=(rec_i,))
    cfg_r = dataclasses.replace(cfg_r, suite=rec_r, supported_suites=(rec_r,))
    handshake(cfg_i, cfg_r)
    return {Role.INITIATOR: rec_i, Role.RESPONDER: rec_r}


def auth_kind_cells():
    """(method, role, expected, observed) for all 10 cells."""
    cells = []
    for method in range(5):
        recs = instrumented_run(method)
        for idx, role in enumerate((Role.INITIATOR, Role.RESPONDER)):
            signs = len(recs[role].ops("sign"))
            verifies = len(recs[role.peer].ops("verify"))
            observed = "sign" if signs == 1 and verifies == 1 else "mac" if signs == 0 and verifies == 0 else "?"
            expected = "sign" if EXPECTED_KINDS[method][idx] == "signature" else "mac"
            cells.append((method, role, expected, observed))
    return cells
