import pytest

from edhoc_lab.auth import Role, TrustPolicy
from edhoc_lab.errors import EdhocError, ErrorCode
from edhoc_lab.mitm import (
    Impersonation,
    Outcome,
    RelayState,
    Substitution,
    attack_network,
    classify,
    expected_outcome_is_success,
    run_attack_detailed,
    run_cell,
    run_matrix,
    relay_record,
    standard_attack,
)
from edhoc_lab.protocol import Phase, SessionState, initiator_start, session_keys
from edhoc_lab.records import I_TO_R, R_TO_I, seal_record
from helpers import handshake, pair
from oracles import record_open

COMPROMISED, OWN = Impersonation.USE_COMPROMISED_KEYS, Impersonation.USE_OWN_KEYS
STRICT, WEAK = TrustPolicy.STRICT, TrustPolicy.WEAK_ACCEPT


def detailed(method, imp, pol, seed=42):
    config, victims = standard_attack(method, imp, pol, seed)
    return run_attack_detailed(attack_network(), config, victims, seed)


def test_compromised_strict_method0():
    run = detailed(0, COMPROMISED, STRICT)
    rep = run.report
    assert rep.outcome is Outcome.SUCCESS
    assert rep.endpoints_believe_authenticated == {"I": True, "R": True}
    assert rep.adversary_keys_distinct and rep.adversary_keys_match_victims
    assert rep.peer_unverified == {"I": False, "R": False}


def test_own_keys_strict_fails_at_msg2():
    rep = run_cell(0, OWN, STRICT, 42)
    assert rep.outcome is Outcome.FAILED_AUTH_AT_MSG2
    assert rep.failing_party == "I" and rep.failure_code == ErrorCode.UNKNOWN_CREDENTIAL.value


def test_own_keys_weak_accept_succeeds_unverified():
    rep = run_cell(0, OWN, WEAK, 42)
    assert rep.outcome is Outcome.SUCCESS
    assert rep.peer_unverified == {"I": True, "R": True}


def test_escrowed_psk_succeeds():
    assert run_cell(4, COMPROMISED, STRICT, 42).outcome is Outcome.SUCCESS


def test_modified_record_accepted_by_receiver_oracle():
    run = detailed(2, COMPROMISED, STRICT)
    r_exporter = session_keys(run.responder.state).exporter_secret
    to_r = [d for d in run.net.inboxes["R"] if d.frame.src == "M"]
    record_frame = to_r[-1].payload  # the relayed application record
    assert record_open(r_exporter, I_TO_R, record_frame) == b"PAY 9999 EUR TO ACCT 0042"
    assert run.responder.records_in[-1][1] == b"PAY 9999 EUR TO ACCT 0042"
    relayed = run.report.relayed_records
    assert relayed[0].modified and not relayed[1].modified


def test_relay_without_modification_and_foreign_record():
    run = detailed(0, COMPROMISED, STRICT)
    relay = RelayState.establish(run.adversary.i_side, run.adversary.r_side)
    sealed = seal_record(run.initiator.state, I_TO_R, 7, b"hello")
    out, rec = relay_record(relay, I_TO_R, sealed)
    assert not rec.modified
    assert record_open(session_keys(run.responder.state).exporter_secret, I_TO_R, out) == b"hello"
    third = handshake(*pair(0, seed=b"third-session-seed"))
    with pytest.raises(EdhocError) as exc:
        relay_record(relay, I_TO_R, seal_record(third.i, I_TO_R, 0, b"x"))
    assert exc.value.code is ErrorCode.AEAD_AUTH_FAILURE


def test_substitution_direction_filter():
    sub = Substitution(0, 1, b"Z", direction=R_TO_I)
    run = detailed(0, COMPROMISED, STRICT)
    relay = RelayState.establish(run.adversary.i_side, run.adversary.r_side)
    sealed = seal_record(run.initiator.state, I_TO_R, 9, b"abc")
    _, rec = relay_record(relay, I_TO_R, sealed, (sub,))
    assert not rec.modified


def _state(phase, failure=None, round=None) -> SessionState:
    cfg_i, _ = pair(0)
    st, _ = initiator_start(cfg_i)
    st.phase, st.failure, st.failure_round = phase, failure, round
    return st


def test_classify_cases():
    done = _state(Phase.COMPLETED)
    assert classify(done, done) is Outcome.SUCCESS
    assert classify(_state(Phase.FAILED, ErrorCode.AUTH_FAILURE, 2), None) is Outcome.FAILED_AUTH_AT_MSG2
    assert classify(_state(Phase.WAIT_MSG3), _state(Phase.WAIT_MSG2)) is Outcome.TIMEOUT
    assert classify(done, _state(Phase.FAILED, ErrorCode.AUTH_FAILURE, 3)) is Outcome.FAILED_AUTH_AT_MSG3
    assert classify(_state(Phase.FAILED, ErrorCode.TRUNCATED, 2), None) is Outcome.FAILED_DECODE


def test_compromised_needs_secrets():
    config, _ = standard_attack(0, OWN, STRICT, 42)
    with pytest.raises(ValueError):
        type(config)(
            method=0,
            adversary_store=config.adversary_store,
            victim_policies=config.victim_policies,
            impersonation=COMPROMISED,
            adversary_credentials=config.adversary_credentials,
        )


def test_full_matrix_matches_expectation():
    reports = run_matrix(42)
    assert len(reports) == 20
    for rep in reports:
        expected = expected_outcome_is_success(rep.impersonation, rep.policies["I"])
        assert (rep.outcome is Outcome.SUCCESS) == expected, (rep.method, rep.impersonation, rep.policies)
        if rep.outcome is Outcome.SUCCESS:
            assert rep.adversary_keys_match_victims and rep.adversary_keys_distinct
            assert rep.victim_error_records == {"I": 0, "R": 0}
            assert rep.received_records["R"] == [b"PAY 9999 EUR TO ACCT 0042".hex()]
        else:
            assert rep.outcome in (Outcome.FAILED_AUTH_AT_MSG2, Outcome.FAILED_AUTH_AT_MSG3)


def test_matrix_deterministic():
    dumps = [[r.dumps() for r in run_matrix(42)] for _ in range(3)]
    assert dumps[0] == dumps[1] == dumps[2]
    assert dumps[0] != [r.dumps() for r in run_matrix(43)]


def test_roles_of_adversary_sessions():
    run = detailed(0, COMPROMISED, STRICT)
    assert run.adversary.i_side.role is Role.RESPONDER
    assert run.adversary.r_side.role is Role.INITIATOR
