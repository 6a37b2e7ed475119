"""Typed error codes shared by every layer of the lab."""

from __future__ import annotations

import enum


class ErrorCode(str, enum.Enum):
    # codec
    FIELD_TOO_LONG = "FIELD_TOO_LONG"
    TRUNCATED = "TRUNCATED"
    MALFORMED = "MALFORMED"
    TRAILING_BYTES = "TRAILING_BYTES"
    # crypto
    INVALID_POINT = "INVALID_POINT"
    WRONG_KEY_KIND = "WRONG_KEY_KIND"
    AEAD_AUTH_FAILURE = "AEAD_AUTH_FAILURE"
    LENGTH_TOO_LARGE = "LENGTH_TOO_LARGE"
    # auth / protocol
    UNKNOWN_CREDENTIAL = "UNKNOWN_CREDENTIAL"
    KIND_MISMATCH = "KIND_MISMATCH"
    AUTH_FAILURE = "AUTH_FAILURE"
    CONFIG_INCONSISTENT = "CONFIG_INCONSISTENT"
    SUITE_REJECTED = "SUITE_REJECTED"
    METHOD_REJECTED = "METHOD_REJECTED"
    MALFORMED_EAD = "MALFORMED_EAD"
    DECRYPT_FAILURE = "DECRYPT_FAILURE"
    NOT_COMPLETED = "NOT_COMPLETED"
    WRONG_PHASE = "WRONG_PHASE"
    # netsim
    UNKNOWN_ENDPOINT = "UNKNOWN_ENDPOINT"
    PAYLOAD_TOO_LARGE = "PAYLOAD_TOO_LARGE"
    RULE_CONFLICT = "RULE_CONFLICT"
    # escrow
    DUPLICATE_RECIPIENT = "DUPLICATE_RECIPIENT"
    NOT_A_RECIPIENT = "NOT_A_RECIPIENT"
    INSUFFICIENT_SHARES = "INSUFFICIENT_SHARES"


DECODE_ERRORS = frozenset(
    {ErrorCode.TRUNCATED, ErrorCode.MALFORMED, ErrorCode.TRAILING_BYTES, ErrorCode.FIELD_TOO_LONG}
)


class EdhocError(Exception):
    """Base error carrying a machine-readable :class:`ErrorCode`."""

    def __init__(self, code: ErrorCode, detail: str = ""):
        self.code = ErrorCode(code)
        self.detail = detail
        super().__init__(f"{self.code.value}: {detail}" if detail else self.code.value)


class DecodeError(EdhocError):
    pass


class CryptoError(EdhocError):
    pass


class AuthError(EdhocError):
    pass


class ProtocolError(EdhocError):
    """Handshake failure. ``state`` is the (now Failed) session, when one exists."""

    def __init__(self, code: ErrorCode, detail: str = "", state=None, round: int | None = None):
        super().__init__(code, detail)
        self.state = state
        self.round = round


class NetError(EdhocError):
    pass


class EscrowError(EdhocError):
    pass
