import numpy as np
import pytest

import oracle
from qkd_mitm.adversary import EprMitm, Passive
from qkd_mitm.channels import (
    ChannelConfig,
    ChannelError,
    Channels,
    ClassicalMessage,
    Event,
    QuantumMessage,
    SendStatus,
    Transcript,
)
from qkd_mitm.config import ExperimentConfig
from qkd_mitm.experiment import session_rng
from qkd_mitm.parties import PartyId
from qkd_mitm.protocols import ProtocolKind, _play_round, run_session
from qkd_mitm.quantum import BellKind, Register

A, B, E = PartyId.ALICE, PartyId.BOB, PartyId.EVE


def test_passive_lossless_delivery():
    reg = Register()
    h, t = reg.prepare_bell(BellKind.PSI_PLUS, A, A)
    ch = Channels(ChannelConfig(), Passive(), np.random.default_rng())
    res = ch.send_quantum(QuantumMessage(t, A, B, 0), reg)
    assert res.status is SendStatus.DELIVERED and res.qubit == t
    assert reg.owner[t] is B
    assert [e.action for e in ch.transcript] == ["send", "tap", "deliver"]


def test_mitm_forward_capture_and_inject():
    reg = Register()
    h, t = reg.prepare_bell(BellKind.PSI_PLUS, A, A)
    adv = EprMitm(ProtocolKind.PING_PONG)
    ch = Channels(ChannelConfig(loss_prob=1.0), adv, np.random.default_rng())
    res = ch.send_quantum(QuantumMessage(t, A, B, 0), reg)
    # the captured qubit cannot be lost even on a dead channel
    assert res.status is SendStatus.CAPTURED
    assert res.qubit != t and reg.owner[res.qubit] is B and reg.owner[t] is E
    kept = adv.state.retained[0]
    assert reg.bell_probabilities(kept, res.qubit)[BellKind.PHI_PLUS] == pytest.approx(1.0)
    assert [e.action for e in ch.transcript] == ["send", "capture", "inject"]


def test_loss_frequency():
    n = 10_000
    g = np.random.default_rng(12)
    ch = Channels(ChannelConfig(loss_prob=0.05), Passive(), g)
    lost = 0
    for i in range(n):
        reg = Register(1)
        q = reg.alloc_qubit(0, A)
        res = ch.send_quantum(QuantumMessage(q, A, B, i), reg)
        if res.lost:
            lost += 1
            assert q in reg.consumed
    assert abs(lost / n - 0.05) < 0.007
    assert ch.lost + ch.delivered + ch.captured == ch.sent == n


def test_combined_loss_is_independent_union():
    cfg = ChannelConfig(loss_prob=0.1, eve_removal_rate=0.2)
    assert cfg.effective_loss == pytest.approx(0.28)
    n = 10_000
    g = np.random.default_rng(13)
    ch = Channels(cfg, None, g)
    for i in range(n):
        reg = Register(1)
        ch.send_quantum(QuantumMessage(reg.alloc_qubit(0, A), A, B, i), reg)
    assert abs(ch.lost / n - 0.28) < oracle.binomial_3sigma(0.28, n)
    by_eve = sum(1 for e in ch.transcript if e.action == "lost" and e.detail.endswith("by=eve"))
    # Eve's share is P(not channel-lost and removed) = 0.9 * 0.2
    assert abs(by_eve / n - 0.18) < oracle.binomial_3sigma(0.18, n)


@pytest.mark.parametrize("field", ["loss_prob", "eve_removal_rate"])
@pytest.mark.parametrize("value", [-0.01, 1.01])
def test_channel_config_bounds(field, value):
    with pytest.raises(ValueError):
        ChannelConfig(**{field: value})


def test_sender_must_hold_qubit():
    reg = Register()
    q = reg.alloc_qubit(0, A)
    ch = Channels(ChannelConfig(), None, np.random.default_rng())
    with pytest.raises(ChannelError):
        ch.send_quantum(QuantumMessage(q, B, A, 0), reg)


def test_classical_passive_forwards_and_logs_tap():
    ch = Channels(ChannelConfig(), Passive(), np.random.default_rng())
    got = ch.send_classical(ClassicalMessage(1, B, A, 3), Register())
    assert got.payload == 1
    assert [e.action for e in ch.transcript] == ["send", "tap", "deliver"]


def test_classical_without_adversary_unchanged():
    ch = Channels(ChannelConfig(), None, np.random.default_rng())
    assert ch.send_classical(ClassicalMessage(0, B, A, 0), Register()).payload == 0


def test_classical_payload_must_be_bit():
    ch = Channels(ChannelConfig(), None, np.random.default_rng())
    with pytest.raises(ChannelError):
        ch.send_classical(ClassicalMessage(2, B, A, 0), Register())


def test_transcript_is_ordered_append_only():
    t = Transcript()
    t.append(Event(0, "alice", "quantum", "send"))
    t.log(0, PartyId.EVE, "quantum", "capture")
    t.log(0, PartyId.EVE, "quantum", "inject")
    assert [e.action for e in t] == ["send", "capture", "inject"]
    assert t.to_list()[1] == {"round": 0, "party": "eve", "channel": "quantum", "action": "capture", "detail": ""}


@pytest.mark.parametrize("protocol", list(ProtocolKind))
def test_passive_matches_no_adversary(protocol):
    cfg = ExperimentConfig(protocol=protocol, bits=12, control_prob=0.4, loss_prob=0.1)
    for i in range(20):
        t_none, s_none = run_session(cfg, None, session_rng(5, i))
        t_pass, s_pass = run_session(cfg, Passive(), session_rng(5, i))
        stripped = [e for e in t_pass if e.action != "tap"]
        assert stripped == list(t_none)
        assert s_pass.alice_key == s_none.alice_key


def test_pingpong_control_round_events():
    g = np.random.default_rng(0)
    reg = Register()
    ch = Channels(ChannelConfig(), None, g)
    mode, outcome, ex = _play_round(ProtocolKind.PING_PONG, reg, ch, 0, 1.0, g, 0)
    assert ch.transcript.count("quantum", "send") == 1
    assert ch.transcript.count("classical", "send") == 1
