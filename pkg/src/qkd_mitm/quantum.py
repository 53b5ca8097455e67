"""Exact statevector simulation for the handful of qubits a protocol round needs.

Basis-index convention is little-endian: qubit ``q`` contributes ``2**q`` to the
amplitude index. Kets written left-to-right in the protocol descriptions map onto
this by listing the qubit ids in ket order, e.g. for a GHZ triple ``(a, b, c)``
the ket ``|001>`` (third qubit set) is index ``1 << c``. :func:`ket_index` does
this mapping so decode tables never depend on allocation order.

Only the gates the protocols use are provided: X, Z, CNOT and a real rotation.
Measurements are projective (computational, real-rotated, Bell) and collapse the
joint state.
"""
from __future__ import annotations

from enum import Enum
from functools import lru_cache
from math import cos, sin, sqrt
from typing import Iterable, Sequence

import numpy as np

from .parties import PartyId

MAX_QUBITS = 8
NORM_ATOL = 1e-9
# outcomes below this probability are treated as unreachable
UNREACHABLE = 1e-12

_SQRT1_2 = 1 / sqrt(2)


class QuantumError(Exception):
    pass


class CapacityError(QuantumError):
    pass


class ConsumedQubitError(QuantumError):
    pass


class OperandError(QuantumError):
    pass


class BellKind(str, Enum):
    PHI_PLUS = "PhiPlus"  # (|00> + |11>)/sqrt2
    PHI_MINUS = "PhiMinus"  # (|00> - |11>)/sqrt2
    PSI_PLUS = "PsiPlus"  # (|01> + |10>)/sqrt2
    PSI_MINUS = "PsiMinus"  # (|01> - |10>)/sqrt2


# sampling order for Bell outcomes
BELL_ORDER = (BellKind.PHI_PLUS, BellKind.PHI_MINUS, BellKind.PSI_PLUS, BellKind.PSI_MINUS)


class PauliOp(str, Enum):
    I = "I"  # noqa: E741
    X = "X"
    Z = "Z"


def bell_vector(kind: BellKind) -> np.ndarray:
    """Two-qubit Bell state, first ket character on qubit 0 (index bit 0)."""
    v = np.zeros(4, dtype=complex)
    # index = first + 2*second
    if kind is BellKind.PHI_PLUS:
        v[0], v[3] = _SQRT1_2, _SQRT1_2
    elif kind is BellKind.PHI_MINUS:
        v[0], v[3] = _SQRT1_2, -_SQRT1_2
    elif kind is BellKind.PSI_PLUS:
        v[2], v[1] = _SQRT1_2, _SQRT1_2
    else:
        v[2], v[1] = _SQRT1_2, -_SQRT1_2
    return v


def ket_index(bits: str, qubits: Sequence[int]) -> int:
    """Amplitude index of the basis ket ``bits`` written over ``qubits`` in order."""
    if len(bits) != len(qubits):
        raise ValueError("need one bit per qubit")
    return sum(int(b) << q for b, q in zip(bits, qubits))


@lru_cache(maxsize=None)
def _zero_indices(k: int, qubits: tuple[int, ...]) -> np.ndarray:
    """Indices of a 2**k vector where every listed qubit reads 0."""
    idx = np.arange(1 << k)
    mask = 0
    for q in qubits:
        mask |= 1 << q
    out = idx[(idx & mask) == 0]
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _pair_indices(k: int, q1: int, q2: int) -> np.ndarray:
    """Rows index the (q1, q2) sub-blocks 00, 10, 01, 11 (q1 value first)."""
    base = _zero_indices(k, (q1, q2))
    b1, b2 = 1 << q1, 1 << q2
    out = np.stack([base, base | b1, base | b2, base | b1 | b2])
    out.setflags(write=False)
    return out


# rows: Phi+, Phi-, Psi+, Psi- over sub-blocks ordered as in _pair_indices
_BELL_ROWS = np.stack([bell_vector(k) for k in BELL_ORDER])

_GHZ = np.zeros(8, dtype=complex)
_GHZ[0] = _GHZ[7] = _SQRT1_2


def _sample(probs: Sequence[float], rng: np.random.Generator) -> int:
    """Inverse-CDF draw over a fixed outcome order; skips unreachable outcomes."""
    u = rng.random()
    total = 0.0
    last = -1
    for i, p in enumerate(probs):
        if p < UNREACHABLE:
            continue
        last = i
        total += p
        if u < total:
            return i
    if last < 0:
        raise QuantumError("no reachable measurement outcome")
    # rounding left the cumulative sum just below u
    return last


class Register:
    """Joint pure state of every qubit alive in one protocol round."""

    def __init__(self, max_qubits: int = MAX_QUBITS):
        if not 0 < max_qubits <= MAX_QUBITS:
            raise ValueError(f"max_qubits must be in 1..{MAX_QUBITS}")
        self.max_qubits = max_qubits
        self.amplitudes = np.ones(1, dtype=complex)
        self.owner: dict[int, PartyId] = {}
        self.consumed: set[int] = set()

    @property
    def num_qubits(self) -> int:
        return len(self.owner)

    def live_qubits(self) -> list[int]:
        return [q for q in self.owner if q not in self.consumed]

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def copy(self) -> "Register":
        other = Register(self.max_qubits)
        other.amplitudes = self.amplitudes.copy()
        other.owner = dict(self.owner)
        other.consumed = set(self.consumed)
        return other

    def _check_live(self, *qubits: int) -> None:
        for q in qubits:
            if q not in self.owner:
                raise OperandError(f"qubit {q} is not allocated")
            if q in self.consumed:
                raise ConsumedQubitError(f"qubit {q} was already consumed")
        if len(set(qubits)) != len(qubits):
            raise OperandError("operands must be distinct qubits")

    # -- allocation and bookkeeping -------------------------------------

    def alloc_qubit(self, initial_bit: int = 0, owner: PartyId = PartyId.ALICE) -> int:
        if initial_bit not in (0, 1):
            raise ValueError("initial_bit must be 0 or 1")
        k = self.num_qubits
        if k >= self.max_qubits:
            raise CapacityError(f"register holds at most {self.max_qubits} qubits")
        old = self.amplitudes
        self.amplitudes = np.zeros(old.size * 2, dtype=complex)
        if initial_bit:
            self.amplitudes[old.size:] = old
        else:
            self.amplitudes[: old.size] = old
        self.owner[k] = owner if isinstance(owner, PartyId) else PartyId(owner)
        return k

    def _alloc_block(self, block: np.ndarray, owners: Sequence[PartyId]) -> list[int]:
        """Append len(owners) qubits jointly in ``block`` (little-endian over the new qubits)."""
        m = len(owners)
        k = self.num_qubits
        if k + m > self.max_qubits:
            raise CapacityError(f"no room for {m} more qubits")
        self.amplitudes = np.outer(block, self.amplitudes).ravel()
        ids = list(range(k, k + m))
        for q, who in zip(ids, owners):
            self.owner[q] = who if isinstance(who, PartyId) else PartyId(who)
        return ids

    def transfer(self, q: int, party: PartyId) -> None:
        self._check_live(q)
        self.owner[q] = PartyId(party)

    def discard(self, q: int) -> None:
        """Drop a qubit from play without measuring it (lost to the environment)."""
        self._check_live(q)
        self.consumed.add(q)

    def prepare_bell(self, kind: BellKind, owner_a: PartyId, owner_b: PartyId) -> tuple[int, int]:
        a, b = self._alloc_block(bell_vector(BellKind(kind)), (owner_a, owner_b))
        return a, b

    def prepare_ghz(self, owner_a: PartyId, owner_b: PartyId, owner_c: PartyId) -> tuple[int, int, int]:
        a, b, c = self._alloc_block(_GHZ, (owner_a, owner_b, owner_c))
        return a, b, c

    # -- unitaries -------------------------------------------------------

    def apply_pauli(self, op: PauliOp, q: int) -> None:
        self._check_live(q)
        op = PauliOp(op)
        if op is PauliOp.I:
            return
        i0 = _zero_indices(self.num_qubits, (q,))
        i1 = i0 | (1 << q)
        psi = self.amplitudes
        if op is PauliOp.X:
            psi[i0], psi[i1] = psi[i1], psi[i0].copy()
        else:
            psi[i1] = -psi[i1]

    def apply_rotation(self, q: int, theta: float) -> None:
        """Real rotation taking |0> to cos(theta)|0> + sin(theta)|1>."""
        self._check_live(q)
        i0 = _zero_indices(self.num_qubits, (q,))
        i1 = i0 | (1 << q)
        a0, a1 = self.amplitudes[i0], self.amplitudes[i1]
        c, s = cos(theta), sin(theta)
        self.amplitudes[i0], self.amplitudes[i1] = c * a0 - s * a1, s * a0 + c * a1

    def apply_cnot(self, control: int, target: int) -> None:
        self._check_live(control, target)
        i = _zero_indices(self.num_qubits, (control, target)) | (1 << control)
        j = i | (1 << target)
        psi = self.amplitudes
        psi[i], psi[j] = psi[j], psi[i].copy()

    # -- measurements ----------------------------------------------------

    def measure_computational(self, q: int, rng: np.random.Generator) -> int:
        self._check_live(q)
        i0 = _zero_indices(self.num_qubits, (q,))
        i1 = i0 | (1 << q)
        psi = self.amplitudes
        p0 = float(np.vdot(psi[i0], psi[i0]).real)
        p1 = float(np.vdot(psi[i1], psi[i1]).real)
        outcome = _sample((p0, p1), rng)
        keep, drop, p = (i0, i1, p0) if outcome == 0 else (i1, i0, p1)
        psi[drop] = 0
        psi[keep] /= sqrt(p)
        return outcome

    def measure_rotated(self, q: int, theta: float, rng: np.random.Generator) -> int:
        """Measure in {cos t|0> + sin t|1>, -sin t|0> + cos t|1>}; outcome 0 is the first."""
        self._check_live(q)
        i0 = _zero_indices(self.num_qubits, (q,))
        i1 = i0 | (1 << q)
        psi = self.amplitudes
        c, s = cos(theta), sin(theta)
        a0, a1 = psi[i0], psi[i1]
        comp0 = c * a0 + s * a1
        comp1 = -s * a0 + c * a1
        p0 = float(np.vdot(comp0, comp0).real)
        p1 = float(np.vdot(comp1, comp1).real)
        outcome = _sample((p0, p1), rng)
        if outcome == 0:
            comp = comp0 / sqrt(p0)
            psi[i0], psi[i1] = c * comp, s * comp
        else:
            comp = comp1 / sqrt(p1)
            psi[i0], psi[i1] = -s * comp, c * comp
        return outcome

    def bell_probabilities(self, q1: int, q2: int) -> dict[BellKind, float]:
        self._check_live(q1, q2)
        comps = _BELL_ROWS.conj() @ self.amplitudes[_pair_indices(self.num_qubits, q1, q2)]
        probs = (comps.real**2 + comps.imag**2).sum(axis=1)
        return {k: float(p) for k, p in zip(BELL_ORDER, probs)}

    def measure_bell(self, q1: int, q2: int, rng: np.random.Generator) -> BellKind:
        """Project (q1, q2) onto the Bell basis; both qubits are consumed."""
        self._check_live(q1, q2)
        idx = _pair_indices(self.num_qubits, q1, q2)
        # Bell projections of the pair, each a vector over the other qubits
        comps = _BELL_ROWS.conj() @ self.amplitudes[idx]
        probs = (comps.real**2 + comps.imag**2).sum(axis=1)
        i = _sample(probs.tolist(), rng)
        rest = comps[i] / sqrt(probs[i])
        self.amplitudes[idx] = np.outer(_BELL_ROWS[i], rest)
        self.consumed.update((q1, q2))
        return BELL_ORDER[i]

    # -- inspection ------------------------------------------------------

    def amplitude(self, bits: str, qubits: Iterable[int]) -> complex:
        """Amplitude of a basis ket over all allocated qubits listed in ket order."""
        qubits = tuple(qubits)
        if sorted(qubits) != list(range(self.num_qubits)):
            raise ValueError("list every allocated qubit exactly once")
        return complex(self.amplitudes[ket_index(bits, qubits)])
