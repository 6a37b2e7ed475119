"""Seeded corpus generation and mutation fuzzing for the codec."""

import random

from edhoc_lab import codec
from edhoc_lab.codec import EadItem, Message1, Message2, Message3, Message4
from edhoc_lab.errors import DECODE_ERRORS, DecodeError


def valid_corpus(n, rng):
    seen = set()
    out = []
    while len(out) < n:
        kind = rng.randrange(4)
        if kind == 0:
            ead = tuple(EadItem(rng.randrange(1, 100), rng.randbytes(rng.randrange(4)), rng.random() < 0.5) for _ in range(rng.randrange(2)))
            m = Message1(rng.randrange(5), 0, rng.randbytes(32), rng.randbytes(rng.randrange(1, 9)), ead)
        elif kind == 1:
            m = Message2(rng.randbytes(32), rng.randbytes(rng.randrange(1, 9)), rng.randbytes(rng.randrange(60)))
        elif kind == 2:
            m = Message3(rng.randbytes(rng.randrange(1, 80)))
        else:
            m = Message4(rng.randbytes(rng.randrange(1, 80)))
        if m not in seen:
            seen.add(m)
            out.append(m)
    return out


def mutate(wire: bytes, rng: random.Random) -> bytes:
    data = bytearray(wire)
    op = rng.randrange(5)
    if op == 0 and data:
        return bytes(data[: rng.randrange(len(data))])
    if op == 1 and data:
        data[rng.randrange(len(data))] = rng.randrange(256)
    elif op == 2 and data:
        i = rng.randrange(len(data) * 8)
        data[i // 8] ^= 1 << (i % 8)
    elif op == 3:
        data.insert(rng.randrange(len(data) + 1), rng.randrange(256))
    else:
        data += rng.randbytes(rng.randrange(1, 4))
    return bytes(data)


def fuzz_decode(n: int, seed: int) -> dict:
    """Decode mutated encodings; return counts of outcomes."""
    rng = random.Random(seed)
    base = [(m.round, codec.encode(m)) for m in valid_corpus(200, rng)]
    counts = {"ok": 0, "typed": 0, "uncontrolled": 0}
    for _ in range(n):
        rnd, wire = rng.choice(base)
        data = mutate(wire, rng)
        for _ in range(rng.randrange(3)):
            data = mutate(data, rng)
        try:
            codec.decode(rng.choice((rnd, rnd, rng.randrange(1, 5))), data)
            counts["ok"] += 1
        except DecodeError as exc:
            assert exc.code in DECODE_ERRORS
            counts["typed"] += 1
        except Exception:
            counts["uncontrolled"] += 1
    return counts
