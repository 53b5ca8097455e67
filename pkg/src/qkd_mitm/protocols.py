"""Round-level state machines for the Li GHZ, ping-pong and Cai protocols.

Each round runs in its own :class:`~qkd_mitm.quantum.Register`; Eve's ancillas
are allocated in that same register. Party steps and decode tables are plain
functions so they can be exercised one at a time.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from .channels import ChannelConfig, Channels, ClassicalMessage, QuantumMessage, Transcript
from .parties import PartyId
from .quantum import BellKind, PauliOp, Register

if TYPE_CHECKING:
    from .adversary import Adversary
    from .config import ExperimentConfig

ALICE, BOB = PartyId.ALICE, PartyId.BOB


class ProtocolKind(str, Enum):
    LI_GHZ = "li"
    PING_PONG = "pingpong"
    CAI = "cai"


# Bob's encoding operator per protocol
ENCODING = {
    ProtocolKind.LI_GHZ: PauliOp.X,
    ProtocolKind.PING_PONG: PauliOp.Z,
    ProtocolKind.CAI: PauliOp.Z,
}


class OutcomeKind(str, Enum):
    MESSAGE_BIT = "message_bit"
    EVE_DETECTED = "eve_detected"
    CONTROL_PASSED = "control_passed"
    CONTROL_DETECTED = "control_detected"
    QUBIT_LOST = "qubit_lost"


@dataclass(frozen=True)
class RoundOutcome:
    kind: OutcomeKind
    bit: Optional[int] = None

    @classmethod
    def message(cls, bit: int) -> "RoundOutcome":
        return cls(OutcomeKind.MESSAGE_BIT, bit)

    @property
    def detected(self) -> bool:
        return self.kind in (OutcomeKind.EVE_DETECTED, OutcomeKind.CONTROL_DETECTED)

    def __str__(self) -> str:
        if self.kind is OutcomeKind.MESSAGE_BIT:
            return f"message_bit({self.bit})"
        return self.kind.value


EVE_DETECTED = RoundOutcome(OutcomeKind.EVE_DETECTED)
CONTROL_PASSED = RoundOutcome(OutcomeKind.CONTROL_PASSED)
CONTROL_DETECTED = RoundOutcome(OutcomeKind.CONTROL_DETECTED)
QUBIT_LOST = RoundOutcome(OutcomeKind.QUBIT_LOST)


class Mode(str, Enum):
    CONTROL = "control"
    MESSAGE = "message"


class AbortPolicy(str, Enum):
    ABORT_ON_FIRST = "first"
    RUN_TO_END = "end"


@dataclass(frozen=True)
class ControlExchange:
    i: int  # Bob's result as Alice received it
    j: int  # Alice's home measurement


@dataclass
class RoundRecord:
    index: int
    mode: Mode
    bob_bit: Optional[int]
    outcome: RoundOutcome
    eve_bit: Optional[int] = None
    control: Optional[ControlExchange] = None


@dataclass
class SessionState:
    protocol: ProtocolKind
    message_bits: list[int]
    control_prob: float = 0.0
    n: int = 0
    rounds: list[RoundRecord] = field(default_factory=list)
    aborted: bool = False
    abort_reason: str = ""
    lost_qubits: int = 0

    @property
    def N(self) -> int:
        return len(self.message_bits)

    @property
    def alice_key(self) -> list[int]:
        return [r.outcome.bit for r in self.rounds if r.outcome.kind is OutcomeKind.MESSAGE_BIT]

    @property
    def bob_key(self) -> list[int]:
        """Bits Bob encoded in rounds that reached a decode."""
        return [r.bob_bit for r in self.rounds if r.mode is Mode.MESSAGE and r.outcome.kind is not OutcomeKind.QUBIT_LOST]

    @property
    def eve_key(self) -> list[int]:
        return [r.eve_bit for r in self.rounds if r.eve_bit is not None]

    @property
    def detected(self) -> bool:
        return any(r.outcome.detected for r in self.rounds)

    @property
    def control_rounds(self) -> int:
        return sum(1 for r in self.rounds if r.mode is Mode.CONTROL and r.outcome.kind is not OutcomeKind.QUBIT_LOST)

    @property
    def message_rounds(self) -> int:
        return sum(1 for r in self.rounds if r.mode is Mode.MESSAGE and r.outcome.kind is not OutcomeKind.QUBIT_LOST)


# -- party steps -------------------------------------------------------------


def li_alice_prepare(register: Register) -> tuple[int, int, int]:
    """GHZ triple; Alice keeps the first two and will send the third."""
    return register.prepare_ghz(ALICE, ALICE, ALICE)


def bob_encode(register: Register, travel: int, bit: int, protocol: ProtocolKind) -> None:
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    if bit:
        register.apply_pauli(ENCODING[ProtocolKind(protocol)], travel)


_LI_TABLE = {BellKind.PHI_PLUS: 0, BellKind.PSI_PLUS: 1}
_PSI_TABLE = {BellKind.PSI_PLUS: 0, BellKind.PSI_MINUS: 1}
_PHI_TABLE = {BellKind.PHI_PLUS: 0, BellKind.PHI_MINUS: 1}


def _decode(kind: BellKind, table: dict) -> RoundOutcome:
    bit = table.get(kind)
    return EVE_DETECTED if bit is None else RoundOutcome.message(bit)


def li_alice_decode(register: Register, home1: int, home2: int, returned: int, rng: np.random.Generator) -> RoundOutcome:
    register.apply_cnot(home2, home1)
    return _decode(register.measure_bell(home2, returned, rng), _LI_TABLE)


def pingpong_bob_mode(rng: np.random.Generator, c: float) -> Mode:
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"control probability must lie in [0, 1], got {c}")
    return Mode.CONTROL if rng.random() < c else Mode.MESSAGE


def pingpong_control_round(
    register: Register, home: int, travel: int, channels: Channels, rng: np.random.Generator, round: int = 0
) -> tuple[RoundOutcome, ControlExchange]:
    i = register.measure_computational(travel, rng)
    received = channels.send_classical(ClassicalMessage(i, BOB, ALICE, round), register)
    j = register.measure_computational(home, rng)
    exchange = ControlExchange(received.payload, j)
    return (CONTROL_DETECTED if exchange.i == exchange.j else CONTROL_PASSED), exchange


def pingpong_alice_decode(register: Register, home: int, returned: int, rng: np.random.Generator) -> RoundOutcome:
    # Phi outcomes never occur honestly; they count as detection
    return _decode(register.measure_bell(home, returned, rng), _PSI_TABLE)


def cai_alice_prepare(register: Register, rng: np.random.Generator) -> tuple[int, int, BellKind]:
    chosen = BellKind.PSI_PLUS if rng.random() < 0.5 else BellKind.PHI_PLUS
    home, travel = register.prepare_bell(chosen, ALICE, ALICE)
    return home, travel, chosen


def cai_alice_decode(
    register: Register, home: int, returned: int, chosen: BellKind, rng: np.random.Generator
) -> RoundOutcome:
    table = _PSI_TABLE if chosen is BellKind.PSI_PLUS else _PHI_TABLE
    return _decode(register.measure_bell(home, returned, rng), table)


# -- rounds and sessions -----------------------------------------------------


def _play_round(
    protocol: ProtocolKind,
    register: Register,
    channels: Channels,
    bit: int,
    control_prob: float,
    rng: np.random.Generator,
    round: int,
) -> tuple[Mode, RoundOutcome, Optional[ControlExchange]]:
    chosen = None
    if protocol is ProtocolKind.LI_GHZ:
        home1, home2, travel = li_alice_prepare(register)
    elif protocol is ProtocolKind.PING_PONG:
        home2, travel = register.prepare_bell(BellKind.PSI_PLUS, ALICE, ALICE)
    else:
        home2, travel, chosen = cai_alice_prepare(register, rng)

    sent = channels.send_quantum(QuantumMessage(travel, ALICE, BOB, round), register)
    if sent.lost:
        return Mode.MESSAGE, QUBIT_LOST, None
    at_bob = sent.qubit

    if protocol is ProtocolKind.PING_PONG and pingpong_bob_mode(rng, control_prob) is Mode.CONTROL:
        outcome, exchange = pingpong_control_round(register, home2, at_bob, channels, rng, round)
        return Mode.CONTROL, outcome, exchange

    bob_encode(register, at_bob, bit, protocol)
    back = channels.send_quantum(QuantumMessage(at_bob, BOB, ALICE, round), register)
    if back.lost:
        return Mode.MESSAGE, QUBIT_LOST, None

    if protocol is ProtocolKind.LI_GHZ:
        outcome = li_alice_decode(register, home1, home2, back.qubit, rng)
    elif protocol is ProtocolKind.PING_PONG:
        outcome = pingpong_alice_decode(register, home2, back.qubit, rng)
    else:
        outcome = cai_alice_decode(register, home2, back.qubit, chosen, rng)
    return Mode.MESSAGE, outcome, None


def run_session(
    config: "ExperimentConfig",
    adversary: Optional["Adversary"],
    rng: np.random.Generator,
    message_bits: Optional[Sequence[int]] = None,
) -> tuple[Transcript, SessionState]:
    """Play rounds until every message bit is through or the session aborts.

    Message bits are drawn from ``rng`` unless given. With ``RUN_TO_END`` a
    detected message round still consumes its bit, so exactly N message rounds
    are decoded and per-round detection statistics stay unbiased.
    """
    protocol = ProtocolKind(config.protocol)
    if message_bits is None:
        message_bits = [int(b) for b in rng.integers(0, 2, size=config.bits)]
    state = SessionState(protocol, list(message_bits), config.control_prob)
    transcript = Transcript()
    channels = Channels(
        ChannelConfig(config.loss_prob, config.eve_removal_rate), adversary, rng, transcript
    )
    stop_on_detect = AbortPolicy(config.abort_policy) is AbortPolicy.ABORT_ON_FIRST

    retries = 0
    index = 0
    while state.n < state.N:
        bit = state.message_bits[state.n]
        register = Register()
        mode, outcome, exchange = _play_round(
            protocol, register, channels, bit, config.control_prob, rng, index
        )
        eve_bit = None
        if adversary is not None:
            adversary.end_round(index, register, rng)
            eve_bit = adversary.state.guesses.get(index)
        state.rounds.append(
            RoundRecord(index, mode, bit if mode is Mode.MESSAGE else None, outcome, eve_bit, exchange)
        )
        transcript.log(index, ALICE, "-", "outcome", str(outcome))
        index += 1

        if outcome.kind is OutcomeKind.QUBIT_LOST:
            state.lost_qubits += 1
            retries += 1
            if retries > config.retry_cap:
                state.aborted = True
                state.abort_reason = "retry cap exceeded"
                break
            continue
        retries = 0
        if mode is Mode.MESSAGE:
            state.n += 1
        if outcome.detected and stop_on_detect:
            state.aborted = True
            state.abort_reason = outcome.kind.value
            break
    return transcript, state
