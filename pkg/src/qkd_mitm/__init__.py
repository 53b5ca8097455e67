"""Simulator and attack harness for entanglement-based QKD / secure direct communication."""
from .adversary import (
    AdversaryKind,
    BasisEstimate,
    CnotProbe,
    EprMitm,
    InterceptResend,
    Passive,
    estimate_basis_offset,
    make_adversary,
)
from .channels import ChannelConfig, Channels, ClassicalMessage, QuantumMessage, Transcript
from .config import ConfigError, ExperimentConfig
from .experiment import RunReport, run_experiment, run_sweep, serialize_report
from .parties import PartyId
from .protocols import AbortPolicy, OutcomeKind, ProtocolKind, RoundOutcome, run_session
from .quantum import BellKind, PauliOp, Register

__version__ = "0.1.0"
