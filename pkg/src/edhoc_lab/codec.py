"""Deterministic wire codec for the four handshake messages.

Every message is a flat sequence of canonical CBOR data items: definite
lengths, shortest-form heads, byte strings for all key material.  Only the
major types the handshake needs are accepted (unsigned/negative integers,
byte strings, arrays); anything else is ``MALFORMED``.  Non-shortest heads
are rejected on decode so that each message has exactly one encoding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

from .errors import DecodeError, ErrorCode

MAX_MESSAGE_SIZE = 4096
MAX_CONNECTION_ID = 8
METHODS = (0, 1, 2, 3, 4)

_UINT, _NINT, _BSTR, _ARRAY = 0, 1, 2, 4

Item = Union[int, bytes, list]


# -- items -----------------------------------------------------------------


def _head(major: int, arg: int) -> bytes:
    if arg < 24:
        return bytes([(major << 5) | arg])
    for ai, width in ((24, 1), (25, 2), (26, 4), (27, 8)):
        if arg < 1 << (8 * width):
            return bytes([(major << 5) | ai]) + arg.to_bytes(width, "big")
    raise DecodeError(ErrorCode.FIELD_TOO_LONG, f"argument {arg} exceeds 64 bits")


def encode_item(item: Item) -> bytes:
    if isinstance(item, bool):
        raise TypeError("booleans are not part of the wire subset")
    if isinstance(item, int):
        return _head(_UINT, item) if item >= 0 else _head(_NINT, -1 - item)
    if isinstance(item, (bytes, bytearray, memoryview)):
        item = bytes(item)
        return _head(_BSTR, len(item)) + item
    if isinstance(item, (list, tuple)):
        return _head(_ARRAY, len(item)) + b"".join(encode_item(x) for x in item)
    raise TypeError(f"cannot encode {type(item).__name__}")


def encode_sequence(*items: Item) -> bytes:
    return b"".join(encode_item(x) for x in items)


class Reader:
    """Strict cursor over a CBOR sequence."""

    def __init__(self, data: bytes):
        self.data = bytes(data)
        self.pos = 0

    def at_end(self) -> bool:
        return self.pos >= len(self.data)

    def _take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError(ErrorCode.TRUNCATED, f"need {n} bytes at offset {self.pos}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def _head(self) -> tuple[int, int]:
        initial = self._take(1)[0]
        major, ai = initial >> 5, initial & 0x1F
        if ai < 24:
            return major, ai
        if ai > 27:
            # 28-30 reserved, 31 indefinite length: both outside the subset
            raise DecodeError(ErrorCode.MALFORMED, f"additional info {ai} not allowed")
        width = 1 << (ai - 24)
        arg = int.from_bytes(self._take(width), "big")
        if arg < (24 if width == 1 else 1 << (4 * width)):
            raise DecodeError(ErrorCode.MALFORMED, "non-shortest integer head")
        return major, arg

    def read(self, depth: int = 0) -> Item:
        major, arg = self._head()
        if major == _UINT:
            return arg
        if major == _NINT:
            return -1 - arg
        if major == _BSTR:
            if arg > MAX_MESSAGE_SIZE:
                raise DecodeError(ErrorCode.MALFORMED, "byte string longer than message cap")
            return self._take(arg)
        if major == _ARRAY:
            if depth >= 2 or arg > 16:
                raise DecodeError(ErrorCode.MALFORMED, "array nesting or size out of bounds")
            return [self.read(depth + 1) for _ in range(arg)]
        raise DecodeError(ErrorCode.MALFORMED, f"major type {major} not allowed")

    def read_int(self) -> int:
        value = self.read()
        if not isinstance(value, int):
            raise DecodeError(ErrorCode.MALFORMED, "expected integer")
        return value

    def read_uint(self) -> int:
        value = self.read_int()
        if value < 0:
            raise DecodeError(ErrorCode.MALFORMED, "expected unsigned integer")
        return value

    def read_bstr(self) -> bytes:
        value = self.read()
        if not isinstance(value, bytes):
            raise DecodeError(ErrorCode.MALFORMED, "expected byte string")
        return value


def decode_sequence(data: bytes) -> list[Item]:
    reader = Reader(data)
    out = []
    while not reader.at_end():
        out.append(reader.read())
    return out


# -- field types -----------------------------------------------------------


@dataclass(frozen=True)
class EadItem:
    """External authorization data item; ``critical`` rides on the label sign."""

    label: int
    value: bytes = b""
    critical: bool = False

    def __post_init__(self):
        if self.label < 1:
            raise ValueError("EAD label must be a positive integer")

    @property
    def wire_label(self) -> int:
        return -self.label if self.critical else self.label


@dataclass(frozen=True)
class IdCred:
    """Credential reference as carried on the wire.

    ``kid`` alone is a by-reference identifier.  When ``kind`` is set the
    credential travels by value: ``cred`` is the blob covered by the
    signature/MAC and ``key`` the public key (or PSK) it binds.
    """

    kid: bytes
    kind: int | None = None
    cred: bytes = b""
    key: bytes = b""

    @property
    def by_value(self) -> bool:
        return self.kind is not None

    def to_item(self) -> Item:
        if self.kind is None:
            return self.kid
        return [self.kid, self.kind, self.cred, self.key]

    @classmethod
    def from_item(cls, item: Item) -> "IdCred":
        if isinstance(item, bytes):
            if not item:
                raise DecodeError(ErrorCode.MALFORMED, "empty ID_CRED")
            return cls(item)
        if (
            isinstance(item, list)
            and len(item) == 4
            and isinstance(item[0], bytes)
            and item[0]
            and isinstance(item[1], int)
            and 0 <= item[1] <= 2
            and isinstance(item[2], bytes)
            and isinstance(item[3], bytes)
        ):
            return cls(item[0], item[1], item[2], item[3])
        raise DecodeError(ErrorCode.MALFORMED, "ID_CRED must be a kid or [kid, kind, cred, key]")


def _tuple(items: Iterable[EadItem]) -> tuple[EadItem, ...]:
    return tuple(items)


@dataclass(frozen=True)
class Message1:
    method: int
    suite: int
    g_x: bytes
    c_i: bytes
    ead_1: tuple[EadItem, ...] = field(default=())

    round = 1

    def __post_init__(self):
        object.__setattr__(self, "ead_1", _tuple(self.ead_1))


@dataclass(frozen=True)
class Message2:
    g_y: bytes
    c_r: bytes
    ciphertext_2: bytes

    round = 2


@dataclass(frozen=True)
class Message3:
    ciphertext_3: bytes

    round = 3


@dataclass(frozen=True)
class Message4:
    ciphertext_4: bytes

    round = 4


EdhocMessage = Union[Message1, Message2, Message3, Message4]


@dataclass(frozen=True)
class Plaintext:
    """Inner content of ciphertext_2 / ciphertext_3."""

    id_cred: IdCred
    sig_or_mac: bytes
    ead: tuple[EadItem, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ead", _tuple(self.ead))


@dataclass(frozen=True)
class Plaintext4:
    mac_4: bytes
    ead: tuple[EadItem, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ead", _tuple(self.ead))


# -- encode / decode -------------------------------------------------------


def _check_cid(cid: bytes, name: str) -> None:
    if len(cid) > MAX_CONNECTION_ID:
        raise DecodeError(ErrorCode.FIELD_TOO_LONG, f"{name} is {len(cid)} bytes (max {MAX_CONNECTION_ID})")
    if not cid:
        raise DecodeError(ErrorCode.MALFORMED, f"{name} must not be empty")


def _public_key_length(suite_id: int) -> int | None:
    from .crypto import SUITES  # deferred: crypto depends on this module

    suite = SUITES.get(suite_id)
    return suite.ecdh_key_length if suite else None


def encode_ead(items: Iterable[EadItem]) -> bytes:
    return b"".join(encode_item(e.wire_label) + encode_item(e.value) for e in items)


def _read_ead(reader: Reader) -> tuple[EadItem, ...]:
    items = []
    while not reader.at_end():
        wire_label = reader.read_int()
        if wire_label == 0:
            raise DecodeError(ErrorCode.MALFORMED, "EAD label 0 is not supported")
        value = reader.read_bstr()
        items.append(EadItem(abs(wire_label), value, wire_label < 0))
    return tuple(items)


def encode(message: EdhocMessage) -> bytes:
    if isinstance(message, Message1):
        if message.method not in METHODS:
            raise DecodeError(ErrorCode.MALFORMED, f"method {message.method} not in 0..4")
        if message.suite < 0:
            raise DecodeError(ErrorCode.MALFORMED, "negative suite id")
        _check_cid(message.c_i, "C_I")
        want = _public_key_length(message.suite)
        if want is not None and len(message.g_x) != want:
            raise DecodeError(ErrorCode.MALFORMED, "G_X length does not match suite")
        out = encode_sequence(message.method, message.suite, message.g_x, message.c_i)
        out += encode_ead(message.ead_1)
    elif isinstance(message, Message2):
        _check_cid(message.c_r, "C_R")
        out = encode_sequence(message.g_y, message.c_r, message.ciphertext_2)
    elif isinstance(message, Message3):
        if not message.ciphertext_3:
            raise DecodeError(ErrorCode.MALFORMED, "empty ciphertext_3")
        out = encode_item(message.ciphertext_3)
    elif isinstance(message, Message4):
        if not message.ciphertext_4:
            raise DecodeError(ErrorCode.MALFORMED, "empty ciphertext_4")
        out = encode_item(message.ciphertext_4)
    else:
        raise TypeError(f"not a handshake message: {type(message).__name__}")
    if len(out) > MAX_MESSAGE_SIZE:
        raise DecodeError(ErrorCode.FIELD_TOO_LONG, f"message is {len(out)} bytes")
    return out


def decode(round: int, wire: bytes) -> EdhocMessage:
    if round not in (1, 2, 3, 4):
        raise ValueError(f"round must be 1..4, got {round}")
    if len(wire) > MAX_MESSAGE_SIZE:
        raise DecodeError(ErrorCode.FIELD_TOO_LONG, f"message is {len(wire)} bytes")
    reader = Reader(wire)
    if round == 1:
        method = reader.read_uint()
        if method not in METHODS:
            raise DecodeError(ErrorCode.MALFORMED, f"method {method} not in 0..4")
        suite = reader.read_uint()
        g_x = reader.read_bstr()
        c_i = reader.read_bstr()
        _check_cid(c_i, "C_I")
        want = _public_key_length(suite)
        if want is not None and len(g_x) != want:
            raise DecodeError(ErrorCode.MALFORMED, "G_X length does not match suite")
        return Message1(method, suite, g_x, c_i, _read_ead(reader))
    if round == 2:
        g_y = reader.read_bstr()
        c_r = reader.read_bstr()
        _check_cid(c_r, "C_R")
        msg: EdhocMessage = Message2(g_y, c_r, reader.read_bstr())
    elif round == 3:
        ct = reader.read_bstr()
        if not ct:
            raise DecodeError(ErrorCode.MALFORMED, "empty ciphertext_3")
        msg = Message3(ct)
    else:
        ct = reader.read_bstr()
        if not ct:
            raise DecodeError(ErrorCode.MALFORMED, "empty ciphertext_4")
        msg = Message4(ct)
    if not reader.at_end():
        raise DecodeError(ErrorCode.TRAILING_BYTES, f"{len(wire) - reader.pos} bytes after message")
    return msg


def encode_plaintext(pt: Plaintext) -> bytes:
    return encode_item(pt.id_cred.to_item()) + encode_item(pt.sig_or_mac) + encode_ead(pt.ead)


def decode_plaintext(data: bytes) -> Plaintext:
    reader = Reader(data)
    id_cred = IdCred.from_item(reader.read())
    sig_or_mac = reader.read_bstr()
    return Plaintext(id_cred, sig_or_mac, _read_ead(reader))


def encode_plaintext4(pt: Plaintext4) -> bytes:
    return encode_item(pt.mac_4) + encode_ead(pt.ead)


def decode_plaintext4(data: bytes) -> Plaintext4:
    reader = Reader(data)
    mac = reader.read_bstr()
    return Plaintext4(mac, _read_ead(reader))
