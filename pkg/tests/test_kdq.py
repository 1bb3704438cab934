import math

import numpy as np
import pytest

from qheat import heatflow, kdq, qsim
from qheat.heatflow import ExperimentParams, prepare_initial_state
from qheat.qsim import QuantumState

from oracles import kdq_brute, rho_closed

DEFAULT = ExperimentParams()
RHO = prepare_initial_state(DEFAULT)


def test_sums_to_one_and_marginals():
    rng = np.random.default_rng(0)
    for theta in rng.uniform(0, math.pi, 40):
        d = kdq.kdq_distribution(RHO, theta)
        assert abs(d.entries.sum() - 1) < 1e-12
        assert np.allclose(d.initial_marginals(), np.diag(RHO.data).real, atol=1e-12)


def test_final_marginals_match_evolved_populations():
    theta = 0.9
    d = kdq.kdq_distribution(RHO, theta)
    evolved = qsim.apply_gate(RHO, qsim.u_theta(theta)).probabilities()
    assert np.allclose(d.entries.sum(axis=0), evolved, atol=1e-12)


def test_matches_brute_force():
    for theta in (0.0, 0.1, 1.0, math.pi / 2, 3.0):
        d = kdq.kdq_distribution(RHO, theta)
        assert np.allclose(d.entries, kdq_brute(RHO.data.real, theta), atol=1e-13)


def test_heat_equals_quantum_heat():
    for theta in np.linspace(0, math.pi, 33):
        d = kdq.kdq_distribution(RHO, theta)
        assert np.allclose(kdq.kdq_heat(d), heatflow.q_quantum(RHO, theta), atol=1e-12)
    d = kdq.kdq_distribution(RHO, 0.4)
    assert np.allclose(kdq.kdq_heat(d, 2.0), heatflow.q_quantum(RHO, 0.4, 2.0), atol=1e-12)


def test_negativity_at_small_angle():
    d = kdq.kdq_distribution(RHO, 0.1)
    assert kdq.negativity(d) > 0
    assert d.entries.min() == pytest.approx(-0.0369, abs=1e-3)


def test_identity_evolution_is_classical():
    d = kdq.kdq_distribution(RHO, 0.0)
    assert kdq.negativity(d) == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(d.entries, np.diag(np.diag(RHO.data).real), atol=1e-15)


def test_dephased_state_has_no_negativity():
    rng = np.random.default_rng(1)
    for _ in range(50):
        tc, th, theta = rng.uniform(0, math.pi, 3)
        r = rho_closed(tc, th)
        r[1, 2] = r[2, 1] = 0.0
        d = kdq.kdq_distribution(QuantumState(2, r), theta)
        assert d.entries.min() >= -1e-12


def test_violation_implies_negativity():
    for r in heatflow.sweep(DEFAULT):
        if r.violation_i > 0:
            d = kdq.kdq_distribution(RHO, r.theta)
            assert kdq.negativity(d) > 0, r.theta


def test_rows_layout():
    d = kdq.kdq_distribution(RHO, 0.3)
    rows = d.rows()
    assert len(rows) == 16
    assert rows[0][:4] == (0, 0, 0, 0)
    assert rows[6][:4] == (0, 1, 1, 0)
    assert rows[6][4] == d.p(0, 1, 1, 0) == d.entries[1, 2]


def test_rejections():
    with pytest.raises(ValueError):
        kdq.KdqDistribution(np.eye(4), 0.0)
    with pytest.raises(ValueError):
        kdq.KdqDistribution(np.ones((3, 3)) / 9, 0.0)
    with pytest.raises(ValueError):
        kdq.kdq_distribution(qsim.ket("0"), 0.1)
