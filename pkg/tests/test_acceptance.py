"""Acceptance criteria, one test each; the terminal summary prints PASS/FAIL lines."""

import math
import time

import numpy as np

from qheat import analysis, circuits, heatflow, kdq, qsim, sampler
from qheat.analysis import ConfusionMatrix, ExperimentRecord, model_qq, model_qsc
from qheat.heatflow import ExperimentParams, effective_beta, prepare_initial_state
from qheat.qsim import QuantumState
from qheat.sampler import NoiseModel

import oracles

DEFAULT = ExperimentParams()
ZETA, DC, DH = 0.06, 0.0125, 0.023


def test_01_effective_temperatures(criterion):
    bc = effective_beta(math.pi / 3) * DEFAULT.delta
    bh = effective_beta(math.pi / 6) * DEFAULT.delta
    ok = (abs(bc - oracles.BETA_C) < 1e-9 and abs(bh - oracles.BETA_H) < 1e-9
          and round(bc, 2) == 0.51 and round(bh, 2) == 0.13)
    criterion(1, "effective temperatures", ok, f"beta_c={bc:.9f} beta_h={bh:.9f}")


def test_02_initial_state(criterion):
    start = time.perf_counter()
    grid = np.linspace(0, math.pi, 20)
    worst, corner = 0.0, 0.0
    for tc in grid:
        for th in grid:
            p = ExperimentParams(tc, th)
            a = prepare_initial_state(p, "circuit").data
            b = oracles.rho_closed(tc, th)
            worst = max(worst, float(np.max(np.abs(a - b))))
            corner = max(corner, abs(a[3, 3]), abs(prepare_initial_state(p).data[3, 3]))
    eta = heatflow.coherence(prepare_initial_state(DEFAULT, "circuit"))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-12 and abs(eta - oracles.ETA) < 1e-6 and corner < 1e-15 and elapsed < 1.0
    criterion(2, "initial-state closed form", ok,
              f"max dev={worst:.2e} eta={eta:.6f} p11={corner:.1e} t={elapsed:.2f}s")


def test_03_analytic_numeric(criterion):
    start = time.perf_counter()
    rho = prepare_initial_state(DEFAULT, "circuit")
    worst = 0.0
    for theta in np.linspace(0, math.pi, 200):
        qq, qsc = heatflow.q_analytic(DEFAULT, theta)
        worst = max(worst, abs(qq - heatflow.q_quantum(rho, theta)[0]),
                    abs(qsc - heatflow.q_semiclassical(rho, theta)[0]))
    elapsed = time.perf_counter() - start
    criterion(3, "analytic/numeric equivalence", worst < 1e-12 and elapsed < 1.0,
              f"max dev={worst:.2e} t={elapsed:.2f}s")


def test_04_energy_conservation(criterion):
    dq = max(max(abs(r.dq_q), abs(r.dq_sc)) for r in heatflow.sweep(DEFAULT, "exact_sim"))
    h = qsim.DiagonalHamiltonian(0).matrix(2) + qsim.DiagonalHamiltonian(1).matrix(2)
    rng = np.random.default_rng(2024)
    comm = max(float(np.linalg.norm(u @ h - h @ u))
               for u in (qsim.u_theta(t).matrix for t in rng.uniform(-math.pi, math.pi, 50)))
    criterion(4, "energy conservation", dq < 1e-12 and comm < 1e-12,
              f"max |dq|={dq:.1e} max ||[U,H]||={comm:.1e}")


def test_05_violation_structure(criterion):
    bc, bh = DEFAULT.beta_c, DEFAULT.beta_h

    def witness(theta):
        return heatflow.violation(*heatflow.q_analytic(DEFAULT, theta), bc, bh)

    kappa = heatflow.kappa(bc, bh)
    i_lo, i_hi, i_mid = witness(0.1), witness(math.pi - 0.1), witness(math.pi / 2)
    grid = {r.theta: r.violation_i for r in heatflow.sweep(DEFAULT)}
    ok = (abs(i_lo - 0.0738) <= 1e-4 and i_hi > 0 and i_mid < 0 and grid[math.pi / 2] < 0
          and abs(kappa - 9.19615) <= 1e-4)
    criterion(5, "violation structure", ok,
              f"I(0.1)={i_lo:.5f} I(pi-0.1)={i_hi:.5f} I(pi/2)={i_mid:.3f} kappa={kappa:.5f}")


def test_06_kdq_consistency(criterion):
    rho = prepare_initial_state(DEFAULT)
    sums = margs = heat = 0.0
    missing_negativity = []
    for r in heatflow.sweep(DEFAULT):
        d = kdq.kdq_distribution(rho, r.theta)
        sums = max(sums, abs(d.entries.sum() - 1))
        margs = max(margs, float(np.max(np.abs(d.initial_marginals() - np.diag(rho.data).real))))
        heat = max(heat, float(np.max(np.abs(np.subtract(kdq.kdq_heat(d), heatflow.q_quantum(rho, r.theta))))))
        if r.violation_i > 0 and kdq.negativity(d) <= 0:
            missing_negativity.append(r.theta)
    deph = QuantumState(2, qsim.dephase(rho, [0, 1]).data)
    min_entry = min(kdq.kdq_distribution(deph, t).entries.min() for t in DEFAULT.theta_grid)
    max_i = max(heatflow.violation(heatflow.q_quantum(deph, t)[0], heatflow.q_semiclassical(deph, t)[0],
                                   DEFAULT.beta_c, DEFAULT.beta_h) for t in DEFAULT.theta_grid)
    ok = (sums < 1e-12 and margs < 1e-12 and heat < 1e-12 and not missing_negativity
          and min_entry >= -1e-12 and max_i <= 0)
    criterion(6, "KDQ consistency", ok,
              f"sum dev={sums:.1e} marg dev={margs:.1e} heat dev={heat:.1e} "
              f"dephased min={min_entry:.1e} dephased max I={max_i:.2e}")


def test_07_sampler_convergence(criterion):
    start = time.perf_counter()
    rho = prepare_initial_state(DEFAULT)
    worst = 0.0
    for k, theta in enumerate((0.1, math.pi / 4, math.pi / 2, 3 * math.pi / 4, math.pi - 0.1)):
        qq = sampler.run_qq_protocol(DEFAULT, theta, 100_000, seed=100 + k)
        sc = sampler.run_tpm_protocol(DEFAULT, theta, 100_000, seed=100 + k)
        exact_qq, exact_sc = heatflow.q_quantum(rho, theta), heatflow.q_semiclassical(rho, theta)
        for est, se, ex in ((qq.q_c, qq.se_c, exact_qq[0]), (qq.q_h, qq.se_h, exact_qq[1]),
                            (sc.q_c, sc.se_c, exact_sc[0]), (sc.q_h, sc.se_h, exact_sc[1])):
            worst = max(worst, abs(est - ex) / se)
    again = (sampler.sample_tpm_circuit(DEFAULT, 0.1, 100_000, seed=100)
             == sampler.sample_tpm_circuit(DEFAULT, 0.1, 100_000, seed=100))
    elapsed = time.perf_counter() - start
    criterion(7, "sampler convergence", worst <= 3 and again and elapsed < 30,
              f"worst deviation={worst:.2f} sigma identical reruns={again} t={elapsed:.1f}s")


def test_08_noise_models(criterion):
    zdev = ddev = 0.0
    for theta in np.linspace(0, math.pi, 200):
        r = oracles.rho_closed(DEFAULT.t_c, DEFAULT.t_h, eta_shift=ZETA)
        ref = oracles.heats(r, r, theta)
        got = model_qq(DEFAULT, theta, ZETA)
        zdev = max(zdev, abs(0.5 * (got[0] - got[1]) - 0.5 * (ref[0] - ref[1])))
        ddev = max(ddev, abs(sum(model_qsc(DEFAULT, theta, DC, DH)) / DEFAULT.delta - 0.0355))
    criterion(8, "noise-model reproduction", zdev < 1e-12 and ddev < 1e-12,
              f"zeta dev={zdev:.1e} dq_sc dev from 0.0355={ddev:.1e}")


def test_09_fit_recovery(criterion):
    start = time.perf_counter()
    exact = []
    for t in DEFAULT.theta_grid:
        qq, qsc = model_qq(DEFAULT, t, ZETA), model_qsc(DEFAULT, t, DC, DH)
        exact.append(ExperimentRecord(t, qq[0], qq[1], qsc[0], qsc[1]))
    z, d = analysis.fit_zeta(exact, DEFAULT), analysis.fit_deltas(exact, DEFAULT)
    exact_err = max(abs(z.zeta - ZETA), abs(d.delta_c - DC), abs(d.delta_h - DH))
    recs = sampler.simulate_records(DEFAULT, 10_000, 15, NoiseModel(zeta=ZETA, delta_c=DC, delta_h=DH), seed=0)
    zs, ds = analysis.fit_zeta(recs, DEFAULT), analysis.fit_deltas(recs, DEFAULT)
    pulls = (abs(zs.zeta - ZETA) / zs.stderr, abs(ds.delta_c - DC) / ds.stderr_c,
             abs(ds.delta_h - DH) / ds.stderr_h)
    elapsed = time.perf_counter() - start
    ok = exact_err < 1e-6 and max(pulls) <= 3 and elapsed < 60
    criterion(9, "fit recovery", ok,
              f"exact err={exact_err:.1e} sampled zeta={zs.zeta:.5f}+-{zs.stderr:.5f} "
              f"delta_c={ds.delta_c:.5f}+-{ds.stderr_c:.5f} delta_h={ds.delta_h:.5f}+-{ds.stderr_h:.5f} "
              f"max pull={max(pulls):.2f} t={elapsed:.1f}s")


def test_10_qasm_round_trip(criterion):
    worst, rounds = 0.0, None
    for protocol in circuits.PROTOCOLS:
        for theta in (0.0, 0.1, math.pi / 2, math.pi - 0.1):
            res = circuits.export_protocol(DEFAULT, protocol, theta)
            parsed = circuits.parse_qasm(res.qasm)
            for u, v in zip(res.document.segment_unitaries(), parsed.segment_unitaries()):
                worst = max(worst, float(np.max(np.abs(u - v))))
            if protocol == "tpm":
                rounds = len(parsed.measurement_rounds())
    criterion(10, "QASM round-trip", worst < 1e-9 and rounds == 2,
              f"max reconstruction error={worst:.1e} tpm rounds={rounds}")


def test_11_mitigation(criterion):
    rng = np.random.default_rng(11)
    inv = 0.0
    for _ in range(200):
        p = rng.dirichlet(np.ones(4))
        mats = [ConfusionMatrix.from_error_rates(*rng.uniform(0, 0.15, 2)) for _ in range(2)]
        back = analysis.mitigate_readout(analysis.apply_confusion(p, mats), mats).probabilities
        inv = max(inv, float(np.max(np.abs(back - p))))
    noise = NoiseModel(eps_read_c=0.05, eps_read_h=0.05, applies_to={"midcircuit_readout", "final_readout"},
                       midcircuit_mode="record_only")
    mats = sampler.run_calibration(noise, 100_000, seed=5)
    rho = prepare_initial_state(DEFAULT)
    pull = 0.0
    for theta in (0.1, math.pi / 4, math.pi / 2, 3 * math.pi / 4):
        est = sampler.estimate_tpm(sampler.sample_tpm_circuit(DEFAULT, theta, 100_000, noise, seed=9), confusion=mats)
        ex = heatflow.q_semiclassical(rho, theta)
        pull = max(pull, abs(est.q_c - ex[0]) / est.se_c, abs(est.q_h - ex[1]) / est.se_h)
    criterion(11, "mitigation inverse", inv < 1e-12 and pull <= 3,
              f"inverse dev={inv:.1e} mitigated qsc max pull={pull:.2f} sigma")
