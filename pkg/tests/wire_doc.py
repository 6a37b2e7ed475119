"""Generate docs/wire-format.md from a fixed handshake.

``python tests/wire_doc.py > docs/wire-format.md`` rewrites the document;
test_docs checks that the committed copy is current.
"""

import dataclasses
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from edhoc_lab import codec  # noqa: E402
from edhoc_lab.codec import EadItem, IdCred, Plaintext, Plaintext4, Reader  # noqa: E402
from helpers import handshake, pair  # noqa: E402

SEED = b"wire-doc"

MESSAGE_FIELDS = {
    "message_1": ["METHOD", "SUITES_I", "G_X", "C_I"],
    "message_2": ["G_Y", "C_R", "CIPHERTEXT_2"],
    "message_3": ["CIPHERTEXT_3"],
    "message_4": ["CIPHERTEXT_4"],
}


def _hexdump(data: bytes) -> str:
    return "\n".join(f"{i:04x}  {data[i:i + 16].hex(' ')}" for i in range(0, len(data), 16))


def _describe(value) -> str:
    if isinstance(value, bytes):
        return f"bstr, {len(value)} bytes"
    if isinstance(value, int):
        return f"int {value}"
    if isinstance(value, list):
        return f"array of {len(value)}"
    return type(value).__name__


def annotate(data: bytes, names: list[str]) -> str:
    """One line per top-level CBOR item: offset, head bytes, field name, type."""
    reader = Reader(data)
    lines = []
    index = 0
    while not reader.at_end():
        start = reader.pos
        value = reader.read()
        if index < len(names):
            name = names[index]
        else:
            # trailing items are EAD (label, value) pairs
            pair_idx = (index - len(names)) // 2
            name = f"EAD[{pair_idx}].{'label' if (index - len(names)) % 2 == 0 else 'value'}"
        head = data[start : min(reader.pos, start + 3)].hex(" ")
        lines.append(f"{start:04x}  {head:<9} {name:<22} {_describe(value)}")
        index += 1
    return "\n".join(lines)


def _section(title: str, data: bytes, names: list[str], note: str = "") -> str:
    body = f"### {title} ({len(data)} bytes)\n\n"
    if note:
        body += note + "\n\n"
    body += "```\n" + _hexdump(data) + "\n```\n\n"
    body += "```\noffs  leading   field                  item\n" + annotate(data, names) + "\n```\n"
    return body


def generate() -> str:
    cfg_i, cfg_r = pair(0, seed=SEED, message_4=True)
    run = handshake(cfg_i, cfg_r)
    ead_cfg = dataclasses.replace(cfg_i, ead_to_send={1: (EadItem(5, b"\x01\x02", critical=True), EadItem(7, b""))})
    with_ead = handshake(ead_cfg, dataclasses.replace(cfg_r, ead_understood=frozenset({5})))

    sig = bytes(range(64))
    mac = bytes(range(8))
    pt_ref = Plaintext(IdCred(b"I"), sig)
    pt_val = Plaintext(IdCred(b"I", 0, b"cred-blob", bytes(32)), mac, (EadItem(9, b"\xaa"),))
    pt_4 = Plaintext4(mac)

    parts = [
        "# Wire format\n",
        "Every message is a CBOR sequence: concatenated items with no outer array.",
        "Only the canonical subset is accepted: shortest-form heads, definite lengths,",
        "unsigned and negative integers, byte strings and arrays.  Text strings, maps,",
        "tags, floats and indefinite lengths are rejected as `MALFORMED`.",
        "",
        "EAD items follow the fixed fields as (label, value) pairs.  A negative",
        "label marks a critical item; `-5` is critical label 5.",
        "",
        "The dumps below come from a method 0 handshake on suite 0 with seed",
        f"`{SEED.decode()}` and message 4 enabled.  Regenerate with",
        "`python tests/wire_doc.py > docs/wire-format.md`.",
        "",
        "## Handshake messages\n",
        _section("Message 1", run.wire[1], MESSAGE_FIELDS["message_1"]),
        _section(
            "Message 1 with EAD",
            with_ead.wire[1],
            MESSAGE_FIELDS["message_1"],
            "One critical item (label 5) and one non-critical item (label 7, empty value).",
        ),
        _section(
            "Message 2",
            run.wire[2],
            MESSAGE_FIELDS["message_2"],
            "CIPHERTEXT_2 is PLAINTEXT_2 XORed with KEYSTREAM_2; it carries no tag.",
        ),
        _section("Message 3", run.wire[3], MESSAGE_FIELDS["message_3"], "AES-CCM-16-64-128 output: plaintext plus an 8-byte tag."),
        _section("Message 4", run.wire[4], MESSAGE_FIELDS["message_4"]),
        "## Inner plaintexts\n",
        "PLAINTEXT_2 and PLAINTEXT_3 share one layout: ID_CRED, Signature_or_MAC, then EAD.",
        "ID_CRED is a kid byte string (by reference) or the array",
        "`[kid, kind, cred, key]` (by value; kind 0 signature, 1 static DH, 2 PSK).",
        "The values below are illustrative.\n",
        _section("Plaintext by reference, 64-byte signature", codec.encode_plaintext(pt_ref), ["ID_CRED", "Signature_or_MAC"]),
        _section("Plaintext by value, 8-byte MAC, one EAD item", codec.encode_plaintext(pt_val), ["ID_CRED", "Signature_or_MAC"]),
        _section("PLAINTEXT_4", codec.encode_plaintext4(pt_4), ["MAC_4"]),
    ]
    return "\n".join(parts)


if __name__ == "__main__":
    sys.stdout.write(generate())
