from enum import Enum


class PartyId(str, Enum):
    """Participants. Eve only ever owns qubits through a channel tap."""

    ALICE = "alice"
    BOB = "bob"
    EVE = "eve"
