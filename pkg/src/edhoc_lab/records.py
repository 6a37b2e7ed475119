"""Application records protected with keys exported from a finished handshake."""

from __future__ import annotations

from .codec import Reader, encode_sequence
from .crypto import CipherSuite
from .errors import DecodeError, ErrorCode
from .protocol import SessionState, export_from_secret, session_keys

I_TO_R = "I-to-R"
R_TO_I = "R-to-I"
DIRECTIONS = (I_TO_R, R_TO_I)


def traffic_keys(suite: CipherSuite, prk_exporter: bytes, direction: str) -> tuple[bytes, bytes]:
    if direction not in DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    label = direction.encode()
    return (
        export_from_secret(suite, prk_exporter, label + b" key", suite.aead_key_length),
        export_from_secret(suite, prk_exporter, label + b" iv", suite.aead_nonce_length),
    )


def _nonce(iv: bytes, seq: int) -> bytes:
    return (int.from_bytes(iv, "big") ^ seq).to_bytes(len(iv), "big")


def seal_with(suite: CipherSuite, prk_exporter: bytes, direction: str, seq: int, plaintext: bytes) -> bytes:
    key, iv = traffic_keys(suite, prk_exporter, direction)
    aad = encode_sequence(direction.encode(), seq)
    return encode_sequence(seq, suite.aead_seal(key, _nonce(iv, seq), aad, plaintext))


def open_with(suite: CipherSuite, prk_exporter: bytes, direction: str, record: bytes) -> tuple[int, bytes]:
    reader = Reader(record)
    seq = reader.read_uint()
    ciphertext = reader.read_bstr()
    if not reader.at_end():
        raise DecodeError(ErrorCode.TRAILING_BYTES, "bytes after record")
    key, iv = traffic_keys(suite, prk_exporter, direction)
    aad = encode_sequence(direction.encode(), seq)
    return seq, suite.aead_open(key, _nonce(iv, seq), aad, ciphertext)


def seal_record(state: SessionState, direction: str, seq: int, plaintext: bytes) -> bytes:
    return seal_with(state.suite, _exporter(state), direction, seq, plaintext)


def open_record(state: SessionState, direction: str, record: bytes) -> tuple[int, bytes]:
    return open_with(state.suite, _exporter(state), direction, record)


def _exporter(state: SessionState) -> bytes:
    return session_keys(state).exporter_secret
