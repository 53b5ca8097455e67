"""Quantum and classical links between Alice and Bob, with an adversary tap on each.

The tap runs before loss is sampled: whatever Eve captures is hers and cannot be
lost afterwards. Forwarded qubits are lost with the combined probability of
ordinary channel loss and Eve's deliberate removals. The classical channel is
lossless and unauthenticated.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterator, Optional

import numpy as np

from .parties import PartyId
from .quantum import Register

if TYPE_CHECKING:
    from .adversary import Adversary


class ChannelError(Exception):
    pass


class SendStatus(str, Enum):
    DELIVERED = "delivered"
    CAPTURED = "captured"
    LOST = "lost"


@dataclass(frozen=True)
class QuantumMessage:
    qubit: int
    sender: PartyId
    receiver: PartyId
    round: int


@dataclass(frozen=True)
class ClassicalMessage:
    payload: int
    sender: PartyId
    receiver: PartyId
    round: int


@dataclass(frozen=True)
class SendResult:
    status: SendStatus
    # qubit now held by the receiver; None when lost
    qubit: Optional[int]

    @property
    def lost(self) -> bool:
        return self.status is SendStatus.LOST


@dataclass(frozen=True)
class ChannelConfig:
    loss_prob: float = 0.0
    eve_removal_rate: float = 0.0

    def __post_init__(self):
        for name in ("loss_prob", "eve_removal_rate"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")

    @property
    def effective_loss(self) -> float:
        return self.loss_prob + self.eve_removal_rate - self.loss_prob * self.eve_removal_rate


@dataclass(frozen=True)
class Event:
    round: int
    party: str
    channel: str
    action: str
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


class Transcript:
    """Append-only, ordered event log for one session."""

    def __init__(self):
        self._events: list[Event] = []

    def append(self, event: Event) -> None:
        self._events.append(event)

    def log(self, round: int, party, channel: str, action: str, detail: str = "") -> None:
        party = party.value if isinstance(party, PartyId) else str(party)
        self.append(Event(round, party, channel, action, detail))

    def __iter__(self) -> Iterator[Event]:
        return iter(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def __getitem__(self, i):
        return self._events[i]

    def count(self, channel: str, action: str) -> int:
        return sum(1 for e in self._events if e.channel == channel and e.action == action)

    def to_list(self) -> list[dict]:
        return [e.to_dict() for e in self._events]


class Channels:
    """The pair of links a single session runs over."""

    def __init__(
        self,
        config: ChannelConfig,
        adversary: Optional["Adversary"],
        rng: np.random.Generator,
        transcript: Optional[Transcript] = None,
    ):
        self.config = config
        self.adversary = adversary
        self.rng = rng
        self.transcript = transcript if transcript is not None else Transcript()
        self.sent = 0
        self.captured = 0
        self.delivered = 0
        self.lost = 0

    def send_quantum(self, msg: QuantumMessage, register: Register) -> SendResult:
        if register.owner.get(msg.qubit) is not msg.sender:
            raise ChannelError(f"qubit {msg.qubit} is not held by {msg.sender.value}")
        if msg.qubit in register.consumed:
            raise ChannelError(f"qubit {msg.qubit} is no longer live")
        log = self.transcript.log
        self.sent += 1
        log(msg.round, msg.sender, "quantum", "send", f"qubit={msg.qubit}")

        substitute = None
        if self.adversary is not None:
            substitute = self.adversary.tap_quantum(msg, register, self.rng, self.transcript)
        if substitute is not None:
            self.captured += 1
            log(msg.round, PartyId.EVE, "quantum", "capture", f"qubit={msg.qubit}")
            log(msg.round, PartyId.EVE, "quantum", "inject", f"qubit={substitute}")
            register.transfer(substitute, msg.receiver)
            return SendResult(SendStatus.CAPTURED, substitute)

        p_loss = self.config.effective_loss
        if p_loss > 0.0:
            u = self.rng.random()
            if u < p_loss:
                register.discard(msg.qubit)
                self.lost += 1
                # attribute the loss: ordinary channel first, then Eve's removal
                who = "channel" if u < self.config.loss_prob else "eve"
                log(msg.round, msg.sender, "quantum", "lost", f"qubit={msg.qubit} by={who}")
                return SendResult(SendStatus.LOST, None)

        register.transfer(msg.qubit, msg.receiver)
        self.delivered += 1
        log(msg.round, msg.receiver, "quantum", "deliver", f"qubit={msg.qubit}")
        return SendResult(SendStatus.DELIVERED, msg.qubit)

    def send_classical(self, msg: ClassicalMessage, register: Register) -> ClassicalMessage:
        if msg.payload not in (0, 1):
            raise ChannelError(f"classical payload must be a bit, got {msg.payload!r}")
        log = self.transcript.log
        log(msg.round, msg.sender, "classical", "send", f"payload={msg.payload}")
        payload = msg.payload
        if self.adversary is not None:
            payload = self.adversary.tap_classical(msg, register, self.rng, self.transcript)
        if payload != msg.payload:
            log(msg.round, PartyId.EVE, "classical", "replace", f"payload={payload}")
        log(msg.round, msg.receiver, "classical", "deliver", f"payload={payload}")
        return ClassicalMessage(payload, msg.sender, msg.receiver, msg.round)
