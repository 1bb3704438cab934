import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qheat import circuits, qsim
from qheat.circuits import CircuitDocument, CircuitFormatError, ReconstructionError
from qheat.heatflow import ExperimentParams

from oracles import givens, rho_closed

DEFAULT = ExperimentParams()
angle = st.floats(min_value=-math.pi, max_value=math.pi, allow_nan=False)


@pytest.mark.parametrize("protocol", circuits.PROTOCOLS)
@pytest.mark.parametrize("theta", (0.0, 0.1, math.pi / 2, 2.7))
def test_protocol_exports_reconstruct(protocol, theta):
    res = circuits.export_protocol(DEFAULT, protocol, theta)
    assert res.max_error < 1e-9
    assert "OPENQASM 3.0;" in res.qasm
    for name in ("u_xy", "u_theta"):
        assert name not in res.qasm


def test_tpm_has_two_measurement_rounds():
    res = circuits.export_protocol(DEFAULT, "tpm", 0.3)
    rounds = res.document.measurement_rounds()
    assert rounds == [("m0", (0, 1)), ("m1", (0, 1))]
    assert res.qasm.count("= measure") == 4
    # gates continue after the first round
    text = res.qasm
    assert text.index("m0[1] = measure") < text.index("m1[0] = measure")
    between = text[text.index("m0[1] = measure"):text.index("m1[0] = measure")]
    assert "cx" in between


def test_single_round_protocols():
    for p in ("qq_initial", "qq_final"):
        assert len(circuits.build_protocol(DEFAULT, p, 0.4).measurement_rounds()) == 1
    with pytest.raises(ValueError):
        circuits.build_protocol(DEFAULT, "bell")


@settings(max_examples=40)
@given(angle)
def test_u_theta_decomposition(theta):
    _, u = circuits.export_gate(qsim.u_theta(theta))
    assert np.max(np.abs(u - givens(theta))) < 1e-9


@settings(max_examples=40)
@given(angle)
def test_u_xy_decomposition(t):
    _, u = circuits.export_gate(qsim.u_xy(t, (1, 0)))
    assert np.max(np.abs(u - qsim.embed(qsim.u_xy(t, (1, 0)), 2))) < 1e-9


def test_zero_angle_gates_reconstruct_identity():
    for op in (qsim.u_theta(0.0), qsim.u_xy(0.0)):
        _, u = circuits.export_gate(op)
        assert np.max(np.abs(u - np.eye(4))) < 1e-12


def test_line_format_round_trip():
    doc = circuits.build_protocol(DEFAULT, "tpm", 0.77)
    back = CircuitDocument.from_lines(doc.to_lines())
    assert back.instructions == doc.instructions
    assert back.qubit_labels == ("c", "h", "a1", "a2")
    assert back.name == "tpm"


def test_qasm_round_trip_preserves_instructions():
    dec = circuits.decompose(circuits.build_protocol(DEFAULT, "tpm", 1.1))
    back = circuits.parse_qasm(dec.to_qasm())
    assert back.instructions == dec.instructions


def test_undecomposed_qasm_rejected():
    with pytest.raises(CircuitFormatError):
        circuits.build_protocol(DEFAULT, "qq_final", 0.1).to_qasm()


def test_bad_inputs():
    with pytest.raises(CircuitFormatError):
        circuits.parse_qasm("OPENQASM 3.0;\nqubit[2] q;\nccx q[0], q[1];\n")
    with pytest.raises(CircuitFormatError):
        circuits.parse_qasm("OPENQASM 3.0;\nh q[0];\n")
    with pytest.raises(CircuitFormatError):
        CircuitDocument.from_lines("gate x 0\n")
    with pytest.raises(CircuitFormatError):
        CircuitDocument.from_lines("qubits 1\ngate frob 0\n").instructions[0].gate()


def test_reconstruction_mismatch_detected():
    doc = circuits.build_protocol(DEFAULT, "qq_final", 0.5)
    wrong = circuits.build_protocol(DEFAULT, "qq_final", 0.6)
    with pytest.raises(ReconstructionError, match="segment"):
        circuits.check_reconstruction(doc, circuits.decompose(wrong))
    with pytest.raises(ReconstructionError, match="rounds"):
        circuits.check_reconstruction(doc, circuits.build_protocol(DEFAULT, "tpm", 0.5))


def test_prepared_state_from_exported_circuit():
    # run the exported preparation segment on |0000> and trace out the ancillas
    res = circuits.export_protocol(DEFAULT, "qq_initial")
    u = circuits.parse_qasm(res.qasm).segment_unitaries()[0]
    psi = u[:, 0]
    rho = qsim.partial_trace(qsim.QuantumState(4, psi), [0, 1]).data
    assert np.allclose(rho, rho_closed(DEFAULT.t_c, DEFAULT.t_h), atol=1e-12)
