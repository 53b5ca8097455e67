"""Eve's strategies, each bound to one session's channel taps.

The forward leg is any crossing that leaves Alice, the return leg any crossing
that leaves Bob. All strategies keep their per-round quantum storage only until
:meth:`Adversary.end_round`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from math import acos, cos, pi, sqrt
from typing import Optional, Sequence

import numpy as np

from .channels import ClassicalMessage, QuantumMessage, Transcript
from .parties import PartyId
from .protocols import ENCODING, ProtocolKind
from .quantum import BellKind, PauliOp, Register


class AdversaryKind(str, Enum):
    PASSIVE = "passive"
    INTERCEPT = "intercept"
    CNOT = "cnot"
    MITM = "mitm"


class InterceptLeg(str, Enum):
    FORWARD = "forward"
    RETURN = "return"
    BOTH = "both"


class AttackInvariantError(RuntimeError):
    """Eve's own bookkeeping or physics went wrong; a simulator bug, never a detection."""


@dataclass
class EveState:
    # round -> Eve's half of her EPR pair (or probe ancilla)
    retained: dict[int, int] = field(default_factory=dict)
    # round -> qubit captured from Alice
    captured: dict[int, int] = field(default_factory=dict)
    # round -> Eve's guess of Bob's bit
    guesses: dict[int, int] = field(default_factory=dict)
    basis_samples: list[int] = field(default_factory=lambda: [0, 0])

    @property
    def eve_key(self) -> list[int]:
        return [self.guesses[r] for r in sorted(self.guesses)]


def _is_forward(msg: QuantumMessage) -> bool:
    return msg.sender is PartyId.ALICE


class Adversary:
    kind: AdversaryKind = AdversaryKind.PASSIVE
    records_key = False

    def __init__(self):
        self.state = EveState()

    def tap_quantum(
        self, msg: QuantumMessage, register: Register, rng: np.random.Generator, transcript: Transcript
    ) -> Optional[int]:
        """Return a substitute qubit to capture ``msg.qubit``, or None to let it through."""
        return None

    def tap_classical(
        self, msg: ClassicalMessage, register: Register, rng: np.random.Generator, transcript: Transcript
    ) -> int:
        return msg.payload

    def end_round(self, round: int, register: Register, rng: np.random.Generator) -> None:
        self.state.retained.pop(round, None)
        self.state.captured.pop(round, None)


class Passive(Adversary):
    """Watches every crossing and changes nothing."""

    def tap_quantum(self, msg, register, rng, transcript):
        transcript.log(msg.round, PartyId.EVE, "quantum", "tap", f"qubit={msg.qubit}")
        return None

    def tap_classical(self, msg, register, rng, transcript):
        transcript.log(msg.round, PartyId.EVE, "classical", "tap", f"payload={msg.payload}")
        return msg.payload


class InterceptResend(Adversary):
    """Measure in transit and forward the collapsed qubit.

    ``basis_theta`` is Eve's measurement angle in her own frame and
    ``basis_offset`` the parties' basis in that same frame, so the qubit is
    measured at ``basis_theta - basis_offset`` relative to the parties.
    """

    kind = AdversaryKind.INTERCEPT

    def __init__(self, basis_theta: float = 0.0, leg: InterceptLeg = InterceptLeg.RETURN, basis_offset: float = 0.0):
        super().__init__()
        self.basis_theta = basis_theta
        self.basis_offset = basis_offset
        self.leg = InterceptLeg(leg)

    def _wants(self, msg: QuantumMessage) -> bool:
        if self.leg is InterceptLeg.BOTH:
            return True
        return _is_forward(msg) == (self.leg is InterceptLeg.FORWARD)

    def tap_quantum(self, msg, register, rng, transcript):
        if self._wants(msg):
            intercept_resend_tap(msg.qubit, register, self.basis_theta - self.basis_offset, rng, self.state)
            transcript.log(msg.round, PartyId.EVE, "quantum", "measure", f"qubit={msg.qubit}")
        return None


def intercept_resend_tap(
    qubit: int, register: Register, theta: float, rng: np.random.Generator, state: Optional[EveState] = None
) -> int:
    outcome = register.measure_rotated(qubit, theta, rng)
    if state is not None:
        state.basis_samples[outcome] += 1
    return qubit


class CnotProbe(Adversary):
    """Entangle an ancilla with each returning qubit; read it after Alice decodes."""

    kind = AdversaryKind.CNOT
    records_key = True

    def tap_quantum(self, msg, register, rng, transcript):
        if not _is_forward(msg):
            self.state.retained[msg.round] = cnot_probe_tap(msg.qubit, register)
            transcript.log(msg.round, PartyId.EVE, "quantum", "probe", f"qubit={msg.qubit}")
        return None

    def end_round(self, round, register, rng):
        ancilla = self.state.retained.get(round)
        if ancilla is not None:
            self.state.guesses[round] = register.measure_computational(ancilla, rng)
        super().end_round(round, register, rng)


def cnot_probe_tap(returned: int, register: Register) -> int:
    """Attach a |0> ancilla as CNOT target of ``returned``; gives back the ancilla id."""
    ancilla = register.alloc_qubit(0, PartyId.EVE)
    register.apply_cnot(returned, ancilla)
    return ancilla


# Bell outcome -> bit for Eve's own Phi+ pair after Bob's encoding
_MITM_TABLES = {
    PauliOp.X: {BellKind.PHI_PLUS: 0, BellKind.PSI_PLUS: 1},
    PauliOp.Z: {BellKind.PHI_PLUS: 0, BellKind.PHI_MINUS: 1},
}


class EprMitm(Adversary):
    """Swap Alice's travel qubit for half of Eve's own Phi+ pair and replay Bob's operation."""

    kind = AdversaryKind.MITM
    records_key = True

    def __init__(self, protocol: ProtocolKind):
        super().__init__()
        self.protocol = ProtocolKind(protocol)

    def tap_quantum(self, msg, register, rng, transcript):
        if _is_forward(msg):
            return epr_mitm_forward_tap(msg.round, msg.qubit, register, self.state)
        return epr_mitm_return_tap(msg.round, msg.qubit, register, self.protocol, rng, self.state)

    def tap_classical(self, msg, register, rng, transcript):
        return epr_mitm_classical_tap(msg.round, msg.payload, register, rng, self.state)


def epr_mitm_forward_tap(round: int, captured: int, register: Register, state: EveState) -> int:
    register.transfer(captured, PartyId.EVE)
    state.captured[round] = captured
    kept, sent = register.prepare_bell(BellKind.PHI_PLUS, PartyId.EVE, PartyId.EVE)
    state.retained[round] = kept
    return sent


def epr_mitm_return_tap(
    round: int,
    returned: int,
    register: Register,
    protocol: ProtocolKind,
    rng: np.random.Generator,
    state: EveState,
) -> int:
    try:
        kept = state.retained[round]
        captured = state.captured[round]
    except KeyError:
        raise AttackInvariantError(f"no EPR half or captured qubit held for round {round}") from None
    register.transfer(returned, PartyId.EVE)
    op = ENCODING[ProtocolKind(protocol)]
    outcome = register.measure_bell(kept, returned, rng)
    table = _MITM_TABLES[op]
    if outcome not in table:
        raise AttackInvariantError(f"Bell outcome {outcome.value} impossible under {op.value} encoding")
    bit = table[outcome]
    state.guesses[round] = bit
    if bit:
        register.apply_pauli(op, captured)
    return captured


def epr_mitm_classical_tap(
    round: int, i_from_bob: int, register: Register, rng: np.random.Generator, state: EveState
) -> int:
    """Replace Bob's control result with a measurement of the qubit taken from Alice."""
    captured = state.captured.get(round)
    if captured is None:
        raise AttackInvariantError(f"no captured qubit for round {round}")
    return register.measure_computational(captured, rng)


def make_adversary(
    kind: AdversaryKind,
    protocol: ProtocolKind,
    basis_theta: float = 0.0,
    basis_offset: float = 0.0,
    intercept_leg: InterceptLeg = InterceptLeg.RETURN,
) -> Adversary:
    kind = AdversaryKind(kind)
    if kind is AdversaryKind.PASSIVE:
        return Passive()
    if kind is AdversaryKind.INTERCEPT:
        return InterceptResend(basis_theta, intercept_leg, basis_offset)
    if kind is AdversaryKind.CNOT:
        return CnotProbe()
    return EprMitm(protocol)


# -- basis estimation --------------------------------------------------------


@dataclass(frozen=True)
class BasisEstimate:
    p0: float
    theta: float


def estimate_basis_offset(samples: Sequence[int]) -> BasisEstimate:
    """Angle to rotate by so that the observed 0/1 split becomes even.

    ``samples`` is ``(count0, count1)``. The result lies in [-pi/4, pi/4].
    """
    count0, count1 = samples
    total = count0 + count1
    if total <= 0:
        raise ValueError("need at least one sample")
    p0 = count0 / total
    return BasisEstimate(p0, acos(sqrt(p0)) - pi / 4)


def zero_probability(offset: float, eve_angle: float = 0.0) -> float:
    """P(0) for a probe qubit measured at ``eve_angle`` when the parties' basis sits at ``offset``."""
    return cos(offset + pi / 4 - eve_angle) ** 2


def probe_samples(offset: float, eve_angle: float, count: int, rng: np.random.Generator) -> list[int]:
    """Measure ``count`` probe qubits at ``eve_angle``; returns ``[count0, count1]``.

    Each probe is an even superposition in the parties' basis, which sits at
    ``offset`` in Eve's frame.
    """
    counts = [0, 0]
    for _ in range(count):
        reg = Register(1)
        q = reg.alloc_qubit(0, PartyId.BOB)
        reg.apply_rotation(q, offset + pi / 4)
        counts[reg.measure_rotated(q, eve_angle, rng)] += 1
    return counts


@dataclass(frozen=True)
class BasisDetermination:
    estimate: BasisEstimate
    # signed offset Eve settles on
    theta: float
    check_p0: float
    tolerance: float
    flipped: bool


def resolve_sign(estimate: BasisEstimate, check: Sequence[int]) -> BasisDetermination:
    """Keep ``estimate.theta`` if probes measured at that angle split evenly, else negate it.

    ``check`` holds ``(count0, count1)`` from probes measured at ``estimate.theta``.
    """
    n = check[0] + check[1]
    if n <= 0:
        raise ValueError("need at least one check sample")
    check_p0 = check[0] / n
    # sampling noise of the check batch plus propagated error of the estimate, both at 3 sigma
    sigma_p = 0.5 / sqrt(n)
    slope = max(abs(cos(2 * estimate.theta)), 1e-3)
    sigma_theta = sqrt(max(estimate.p0 * (1 - estimate.p0), 1 / n) / n) / slope
    tolerance = 3 * sigma_p + 3 * sigma_theta
    flipped = abs(check_p0 - 0.5) > tolerance
    theta = -estimate.theta if flipped else estimate.theta
    return BasisDetermination(estimate, theta, check_p0, tolerance, flipped)


def determine_basis(offset: float, samples: int, rng: np.random.Generator) -> BasisDetermination:
    """Estimate the parties' basis from probes, then resolve the sign with a second batch."""
    if samples < 1:
        raise ValueError("need at least one probe sample")
    est = estimate_basis_offset(probe_samples(offset, 0.0, samples, rng))
    return resolve_sign(est, probe_samples(offset, est.theta, samples, rng))
