"""Network-attached endpoints that drive one handshake session each."""

from __future__ import annotations

import logging
from typing import Callable

from . import codec
from .auth import Role
from .errors import EdhocError, ProtocolError
from .netsim import Delivery, Network
from .protocol import (
    Phase,
    SessionConfig,
    SessionState,
    abort,
    initiator_on_message2,
    initiator_on_message4,
    initiator_start,
    responder_on_message1,
    responder_on_message3,
)
from .records import I_TO_R, R_TO_I, open_record, seal_record

log = logging.getLogger(__name__)

_EXPECTED_ROUND = {
    (Role.INITIATOR, Phase.WAIT_MSG2): 2,
    (Role.INITIATOR, Phase.WAIT_MSG4): 4,
    (Role.RESPONDER, Phase.WAIT_MSG3): 3,
}


class HandshakeEndpoint:
    """A legitimate node: runs its role of the handshake, then exchanges records."""

    def __init__(self, name: str, net: Network, config: SessionConfig, peer: str):
        self.name = name
        self.net = net
        self.config = config
        self.peer = peer
        self.state: SessionState | None = None
        self.early_failure: dict | None = None
        self.records_in: list[tuple[int, bytes]] = []
        self.record_errors: list[str] = []
        self._next_seq = 0
        self.on_complete: Callable[["HandshakeEndpoint"], None] | None = None

    @property
    def role(self) -> Role:
        return self.config.role

    @property
    def send_direction(self) -> str:
        return I_TO_R if self.role is Role.INITIATOR else R_TO_I

    @property
    def recv_direction(self) -> str:
        return R_TO_I if self.role is Role.INITIATOR else I_TO_R

    @property
    def completed(self) -> bool:
        return self.state is not None and self.state.phase is Phase.COMPLETED

    @property
    def log(self) -> list[dict]:
        records = list(self.state.log) if self.state else []
        if self.early_failure:
            records.append(self.early_failure)
        return records

    @property
    def error_records(self) -> list[dict]:
        return [r for r in self.log if "error" in r]

    def start(self) -> None:
        if self.role is not Role.INITIATOR:
            raise ValueError("only the Initiator starts")
        self.state, m1 = initiator_start(self.config)
        self._send(codec.encode(m1))

    def _send(self, payload: bytes) -> None:
        self.net.send(self.name, self.peer, payload)

    def send_record(self, plaintext: bytes) -> bytes:
        record = seal_record(self.state, self.send_direction, self._next_seq, plaintext)
        self._next_seq += 1
        self._send(record)
        return record

    def handle(self, delivery: Delivery) -> None:
        payload = delivery.frame.payload
        if self.state is not None and self.state.phase is Phase.FAILED:
            return
        if self.completed:
            try:
                self.records_in.append(open_record(self.state, self.recv_direction, payload))
            except EdhocError as exc:
                self.record_errors.append(exc.code.value)
            return
        try:
            self._handshake(payload)
        except ProtocolError as exc:
            log.info("%s: handshake failed: %s", self.name, exc)

    def _handshake(self, payload: bytes) -> None:
        if self.state is None:
            if self.role is not Role.RESPONDER:
                return
            round = 1
        else:
            round = _EXPECTED_ROUND.get((self.role, self.state.phase))
            if round is None:
                return
        try:
            message = codec.decode(round, payload)
        except EdhocError as exc:
            if self.state is not None:
                abort(self.state, exc.code, round)
            else:
                self.early_failure = {
                    "session_id": self.config.session_id,
                    "role": self.role.value,
                    "phase_from": "Start",
                    "phase_to": "Failed",
                    "message_round": 1,
                    "error": exc.code.value,
                }
            return

        if round == 1:
            try:
                self.state, reply = responder_on_message1(self.config, message)
            except ProtocolError as exc:
                self.state = exc.state
                raise
        elif round == 2:
            _, reply = initiator_on_message2(self.state, message)
        elif round == 3:
            _, reply = responder_on_message3(self.state, message)
        else:
            initiator_on_message4(self.state, message)
            reply = None
        if reply is not None:
            self._send(codec.encode(reply))
        if self.completed and self.on_complete is not None:
            self.on_complete(self)
