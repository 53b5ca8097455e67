import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from qkd_mitm.config import ConfigError, ExperimentConfig, load_config_file
from qkd_mitm.experiment import (
    CSV_HEADER,
    RunReport,
    parse_report,
    run_basis_estimation,
    run_experiment,
    run_sweep,
    serialize_report,
    session_rng,
)


def cfg(**kw):
    return ExperimentConfig(**kw)


def test_honest_li_report():
    r = run_experiment(cfg(protocol="li", bits=16, sessions=200))
    assert r.key_agreement == 1.0
    assert r.detection_rate == 0.0 and r.escape_rate == 1.0
    assert r.eve_accuracy is None


def test_pingpong_mitm_report():
    r = run_experiment(cfg(protocol="pingpong", adversary="mitm", bits=16, control_prob=0.3, sessions=100))
    assert r.eve_accuracy == 1.0 and r.detection_rate == 0.0 and r.key_agreement == 1.0
    assert r.control_rounds > 0


def test_session_streams_are_independent_of_order():
    a = session_rng(5, 3).random(4)
    session_rng(5, 0).random(100)
    b = session_rng(5, 3).random(4)
    assert (a == b).all()
    assert not (session_rng(5, 4).random(4) == a).any()


def test_same_seed_same_bytes():
    c = cfg(protocol="cai", adversary="intercept", bits=8, sessions=200, abort_policy="end", loss_prob=0.05)
    one = serialize_report(run_experiment(c, transcripts=True))
    two = serialize_report(run_experiment(c, transcripts=True))
    assert one == two
    other = serialize_report(run_experiment(c.replace(seed=1), transcripts=True))
    assert other != one


@pytest.mark.parametrize(
    "bad",
    [
        {"bits": 0},
        {"sessions": 0},
        {"seed": -1},
        {"seed": 1 << 64},
        {"control_prob": 1.2},
        {"loss_prob": -0.1},
        {"eve_removal_rate": 2.0},
        {"protocol": "bb84"},
        {"adversary": "clone"},
        {"abort_policy": "never"},
        {"bits": 2.5},
        {"basis_offset": float("nan")},
        {"protocol": "pingpong", "control_prob": 1.0},
    ],
)
def test_invalid_config_rejected(bad):
    with pytest.raises(ConfigError):
        cfg(**bad)


def test_from_dict_aliases_and_unknown_keys():
    c = ExperimentConfig.from_dict({"N": 4, "c": 0.2, "protocol": "pingpong"})
    assert c.bits == 4 and c.control_prob == 0.2
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"colour": "blue"})


def test_config_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"protocol": "cai", "eve-removal": 0.1, "N": 3}))
    values = load_config_file(path)
    assert values == {"protocol": "cai", "eve_removal_rate": 0.1, "bits": 3}
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config_file(path)
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "missing.json")


# -- sweeps --------------------------------------------------------------------------------


def test_sweep_bits_halves_escape():
    sessions = 4000
    reports = run_sweep(
        cfg(protocol="li", adversary="intercept", abort_policy="end", sessions=sessions), "bits", range(1, 9)
    )
    for n, r in zip(range(1, 9), reports):
        p = 2.0**-n
        # floor keeps the bound meaningful when the expected count is tiny
        assert abs(r.escape_rate - p) <= max(oracle.binomial_3sigma(p, sessions), 3 / sessions)


def test_sweep_control_prob():
    reports = run_sweep(cfg(protocol="pingpong", bits=16, sessions=300), "c", [0, 0.25, 0.5])
    for c, r in zip([0, 0.25, 0.5], reports):
        rounds = r.message_rounds + r.control_rounds
        assert abs(r.control_round_fraction - c) <= oracle.binomial_3sigma(c, rounds) + 1e-12
        assert r.detection_rate == 0.0


def test_sweep_loss():
    reports = run_sweep(cfg(protocol="li", bits=16, sessions=300), "loss_prob", [0, 0.05])
    assert reports[0].lost_qubit_count == 0
    # a round survives both crossings with prob s; failed rounds per bit are geometric
    bits, s = 300 * 16, 0.95**2
    mean = bits * (1 / s - 1)
    sd = math.sqrt(bits * (1 - s)) / s
    assert abs(reports[1].lost_qubit_count - mean) < 3 * sd
    assert reports[1].key_agreement == 1.0


def test_sweep_unknown_parameter():
    with pytest.raises(ConfigError):
        run_sweep(cfg(), "temperature", [1])


def test_sweep_permutation_invariance():
    base = cfg(protocol="cai", adversary="cnot", sessions=150, abort_policy="end")
    fwd = run_sweep(base, "bits", [1, 3, 5])
    rev = run_sweep(base, "bits", [5, 3, 1])
    assert [serialize_report(r) for r in fwd] == [serialize_report(r) for r in reversed(rev)]


# -- serialization ---------------------------------------------------------------------------


def test_json_round_trip():
    r = run_experiment(cfg(protocol="pingpong", adversary="cnot", sessions=50, control_prob=0.3), transcripts=True)
    back = parse_report(serialize_report(r, "json"))
    assert isinstance(back, RunReport)
    assert back == r


def test_json_round_trip_list():
    reports = run_sweep(cfg(sessions=20), "bits", [1, 2])
    assert parse_report(serialize_report(reports)) == reports


def test_csv_header_is_fixed():
    text = serialize_report(run_experiment(cfg(sessions=10)), "csv")
    lines = text.splitlines()
    assert lines[0] == "protocol,adversary,N,sessions,seed,detection_rate,escape_rate,eve_accuracy,key_agreement,control_round_fraction"
    assert tuple(lines[0].split(",")) == CSV_HEADER
    assert lines[1].split(",")[:5] == ["li", "passive", "16", "10", "0"]


def test_csv_twelve_significant_digits():
    r = run_experiment(cfg(protocol="pingpong", sessions=7, bits=3))
    row = serialize_report(r, "csv").splitlines()[1].split(",")
    assert row[-1] == format(r.control_round_fraction, ".12g")


def test_transcripts_only_on_request():
    c = cfg(sessions=3, bits=2)
    assert "transcripts" not in json.loads(serialize_report(run_experiment(c)))
    doc = json.loads(serialize_report(run_experiment(c, transcripts=True)))
    assert len(doc["transcripts"]) == 3
    assert doc["transcripts"][0]["events"][0]["action"] == "send"


def test_unknown_format():
    with pytest.raises(ConfigError):
        serialize_report(run_experiment(cfg(sessions=1)), "xml")


# -- metric invariants -------------------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(
    st.sampled_from(["li", "pingpong", "cai"]),
    st.sampled_from(["passive", "intercept", "cnot", "mitm"]),
    st.integers(1, 6),
    st.integers(1, 30),
    st.integers(0, 2**64 - 1),
    st.floats(0, 0.9),
    st.floats(0, 0.3),
    st.sampled_from(["first", "end"]),
)
def test_metric_consistency(protocol, adversary, bits, sessions, seed, c, loss, policy):
    r = run_experiment(
        cfg(protocol=protocol, adversary=adversary, bits=bits, sessions=sessions, seed=seed,
            control_prob=c, loss_prob=loss, abort_policy=policy)
    )
    assert r.detection_rate + r.escape_rate == pytest.approx(1.0, abs=1e-15)
    for v in (r.detection_rate, r.escape_rate, r.eve_accuracy, r.key_agreement, r.control_round_fraction):
        assert v is None or 0.0 <= v <= 1.0
    if r.detection_rate == 0.0 and adversary in ("passive", "mitm") and r.key_agreement is not None:
        assert r.key_agreement == 1.0
    if adversary in ("passive", "intercept"):
        assert r.eve_accuracy is None


# -- basis ------------------------------------------------------------------------------------


def test_basis_report():
    rep = run_basis_estimation(math.pi / 12, 10_000, 3)
    assert rep.error < 0.02 and not rep.flipped
    assert serialize_report(rep, "csv").splitlines()[0].startswith("basis_offset,samples,seed,p0")
    assert json.loads(serialize_report(rep))["theta"] == rep.theta


@pytest.mark.parametrize("args", [(1.0, 10, 0), (0.1, 0, 0), (0.1, 10, -1)])
def test_basis_report_rejects_bad_input(args):
    with pytest.raises(ConfigError):
        run_basis_estimation(*args)
