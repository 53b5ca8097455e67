"""Seeded Monte Carlo runs over many sessions, sweeps, and report serialization."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, fields
from math import pi
from typing import Any, Optional, Sequence, Union

import numpy as np

from .adversary import AdversaryKind, determine_basis, make_adversary
from .config import ALIASES, ConfigError, ExperimentConfig, coerce_field
from .protocols import OutcomeKind, run_session

CSV_HEADER = (
    "protocol",
    "adversary",
    "N",
    "sessions",
    "seed",
    "detection_rate",
    "escape_rate",
    "eve_accuracy",
    "key_agreement",
    "control_round_fraction",
)


def session_rng(seed: int, session: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, session), independent of scheduling."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(session,))))


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


@dataclass
class RunReport:
    config: ExperimentConfig
    sessions_detected: int
    detection_rate: float
    escape_rate: float
    # None when the adversary keeps no key or recorded no bits
    eve_accuracy: Optional[float]
    # Eve's accuracy restricted to rounds Alice decoded without noticing anything
    eve_accuracy_undetected: Optional[float]
    # None when Alice decoded nothing
    key_agreement: Optional[float]
    control_round_fraction: float
    message_rounds: int
    control_rounds: int
    detected_rounds: int
    round_detection_rate: float
    lost_qubit_count: int
    sessions_aborted: int
    transcripts: Optional[list[dict]] = None

    def to_dict(self) -> dict[str, Any]:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["config"] = self.config.to_dict()
        if self.transcripts is None:
            del out["transcripts"]
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunReport":
        data = dict(data)
        data["config"] = ExperimentConfig.from_dict(data["config"])
        return cls(**data)


def run_experiment(config: ExperimentConfig, transcripts: bool = False) -> RunReport:
    config.validate()
    detected_sessions = aborted = lost = 0
    message_rounds = control_rounds = detected_rounds = 0
    alice_bits = alice_match = 0
    eve_bits = eve_match = eve_quiet_bits = eve_quiet_match = 0
    records_key = False
    logs = [] if transcripts else None

    for index in range(config.sessions):
        rng = session_rng(config.seed, index)
        adversary = None
        if config.adversary is not AdversaryKind.PASSIVE or transcripts:
            adversary = make_adversary(
                config.adversary,
                config.protocol,
                config.basis_theta,
                config.basis_offset,
                config.intercept_leg,
            )
            records_key = adversary.records_key
        transcript, state = run_session(config, adversary, rng)

        detected_sessions += state.detected
        aborted += state.aborted
        lost += state.lost_qubits
        message_rounds += state.message_rounds
        control_rounds += state.control_rounds
        for r in state.rounds:
            kind = r.outcome.kind
            if kind is OutcomeKind.QUBIT_LOST:
                continue
            detected_rounds += r.outcome.detected
            decoded = kind is OutcomeKind.MESSAGE_BIT
            if decoded:
                alice_bits += 1
                alice_match += r.outcome.bit == r.bob_bit
            if r.eve_bit is not None and r.bob_bit is not None:
                eve_bits += 1
                eve_match += r.eve_bit == r.bob_bit
                if decoded:
                    eve_quiet_bits += 1
                    eve_quiet_match += r.eve_bit == r.bob_bit
        if logs is not None:
            logs.append(
                {
                    "session": index,
                    "message_bits": state.message_bits,
                    "alice_key": state.alice_key,
                    "eve_key": state.eve_key,
                    "aborted": state.aborted,
                    "events": transcript.to_list(),
                }
            )

    detection_rate = detected_sessions / config.sessions
    rounds = message_rounds + control_rounds
    return RunReport(
        config=config,
        sessions_detected=detected_sessions,
        detection_rate=detection_rate,
        escape_rate=(config.sessions - detected_sessions) / config.sessions,
        eve_accuracy=_ratio(eve_match, eve_bits) if records_key else None,
        eve_accuracy_undetected=_ratio(eve_quiet_match, eve_quiet_bits) if records_key else None,
        key_agreement=_ratio(alice_match, alice_bits),
        control_round_fraction=control_rounds / rounds if rounds else 0.0,
        message_rounds=message_rounds,
        control_rounds=control_rounds,
        detected_rounds=detected_rounds,
        round_detection_rate=detected_rounds / rounds if rounds else 0.0,
        lost_qubit_count=lost,
        sessions_aborted=aborted,
        transcripts=logs,
    )


def run_sweep(
    base: ExperimentConfig, parameter: str, values: Sequence[Any], transcripts: bool = False
) -> list[RunReport]:
    """One report per value; every point reuses the base seed (common random numbers)."""
    name = ALIASES.get(parameter, parameter).replace("-", "_")
    name = ALIASES.get(name, name)
    if name not in {f.name for f in fields(ExperimentConfig)}:
        raise ConfigError(f"unknown sweep parameter {parameter!r}")
    configs = [base.replace(**{name: coerce_field(name, v)}) for v in values]
    return [run_experiment(c, transcripts) for c in configs]


# -- basis estimation ----------------------------------------------------------


@dataclass
class BasisReport:
    basis_offset: float
    samples: int
    seed: int
    p0: float
    theta_magnitude: float
    check_p0: float
    tolerance: float
    flipped: bool
    theta: float
    error: float

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def run_basis_estimation(basis_offset: float, samples: int, seed: int) -> BasisReport:
    if samples < 1:
        raise ConfigError("samples must be at least 1")
    if not -pi / 4 <= basis_offset <= pi / 4:
        raise ConfigError("basis offset must lie in [-pi/4, pi/4]")
    if not 0 <= seed < 1 << 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    found = determine_basis(basis_offset, samples, session_rng(seed, 0))
    return BasisReport(
        basis_offset=basis_offset,
        samples=samples,
        seed=seed,
        p0=found.estimate.p0,
        theta_magnitude=abs(found.estimate.theta),
        check_p0=found.check_p0,
        tolerance=found.tolerance,
        flipped=found.flipped,
        theta=found.theta,
        error=abs(found.theta - basis_offset),
    )


# -- serialization -------------------------------------------------------------


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _csv_row(report: RunReport) -> list[str]:
    c = report.config
    return [
        c.protocol.value,
        c.adversary.value,
        _fmt(c.bits),
        _fmt(c.sessions),
        _fmt(c.seed),
        _fmt(report.detection_rate),
        _fmt(report.escape_rate),
        _fmt(report.eve_accuracy),
        _fmt(report.key_agreement),
        _fmt(report.control_round_fraction),
    ]


Reportish = Union[RunReport, BasisReport]


def serialize_report(report: Union[Reportish, Sequence[Reportish]], fmt: str = "json") -> str:
    """Render one report or a list of them.

    JSON floats use Python's shortest round-trip repr, so parsing gives back
    the same numbers. CSV floats use 12 significant digits.
    """
    many = isinstance(report, (list, tuple))
    reports = list(report) if many else [report]
    if fmt == "json":
        docs = [r.to_dict() for r in reports]
        return json.dumps(docs if many else docs[0], indent=2) + "\n"
    if fmt != "csv":
        raise ConfigError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if reports and isinstance(reports[0], BasisReport):
        names = [f.name for f in fields(BasisReport)]
        writer.writerow(names)
        for r in reports:
            writer.writerow([_fmt(getattr(r, n)) for n in names])
    else:
        writer.writerow(CSV_HEADER)
        for r in reports:
            writer.writerow(_csv_row(r))
    return buf.getvalue()


def parse_report(text: str) -> Union[RunReport, list[RunReport]]:
    data = json.loads(text)
    if isinstance(data, list):
        return [RunReport.from_dict(d) for d in data]
    return RunReport.from_dict(data)
