import pytest

from edhoc_lab.errors import CryptoError, DecodeError, ErrorCode
from edhoc_lab.records import I_TO_R, R_TO_I, open_record, seal_record, traffic_keys
from edhoc_lab.crypto import SUITE_0
from helpers import handshake, pair
from oracles import record_open
from edhoc_lab.protocol import session_keys


@pytest.fixture(scope="module")
def run():
    return handshake(*pair(3))


def test_round_trip_and_oracle(run):
    rec = seal_record(run.i, I_TO_R, 3, b"data")
    assert open_record(run.r, I_TO_R, rec) == (3, b"data")
    assert record_open(session_keys(run.r).exporter_secret, I_TO_R, rec) == b"data"


def test_direction_and_sequence_bound(run):
    rec = seal_record(run.i, I_TO_R, 0, b"data")
    with pytest.raises(CryptoError) as exc:
        open_record(run.r, R_TO_I, rec)
    assert exc.value.code is ErrorCode.AEAD_AUTH_FAILURE
    assert seal_record(run.i, I_TO_R, 0, b"data") != seal_record(run.i, I_TO_R, 1, b"data")


def test_directions_use_distinct_keys(run):
    exporter = session_keys(run.i).exporter_secret
    assert traffic_keys(SUITE_0, exporter, I_TO_R) != traffic_keys(SUITE_0, exporter, R_TO_I)
    with pytest.raises(ValueError):
        traffic_keys(SUITE_0, exporter, "sideways")


def test_trailing_bytes(run):
    with pytest.raises(DecodeError):
        open_record(run.r, I_TO_R, seal_record(run.i, I_TO_R, 0, b"x") + b"\x00")
