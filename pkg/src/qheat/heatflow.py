"""Heat exchange between a cold and a hot qubit prepared with thermal marginals.

Work qubits are ``c`` (index 0) and ``h`` (index 1). The preparation circuit
uses two ancillas (indices 2 and 3) that are traced out afterwards. All heats
are returned in the same energy units as ``delta``; with the default
``delta = 1`` they are heats in units of the gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qsim
from .qsim import DiagonalHamiltonian, QuantumState

QUBIT_C, QUBIT_H = 0, 1
ANCILLA_C, ANCILLA_H = 2, 3
DEFAULT_THETA_POINTS = 33


def default_theta_grid(points: int = DEFAULT_THETA_POINTS) -> tuple[float, ...]:
    if points < 1:
        raise ValueError("theta grid needs at least one point")
    return tuple(float(t) for t in np.linspace(0.0, np.pi, points))


@dataclass(frozen=True)
class ExperimentParams:
    """Preparation angles, energy gap and the interaction-angle grid."""

    t_c: float = math.pi / 3
    t_h: float = math.pi / 6
    delta: float = 1.0
    theta_grid: tuple[float, ...] = field(default_factory=default_theta_grid)

    def __post_init__(self):
        for name in ("t_c", "t_h"):
            t = getattr(self, name)
            if not 0.0 <= t <= math.pi:
                raise ValueError(f"{name} must lie in [0, pi], got {t}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        grid = tuple(float(t) for t in self.theta_grid)
        if not grid:
            raise ValueError("theta_grid must not be empty")
        object.__setattr__(self, "theta_grid", grid)

    @property
    def beta_c(self) -> float:
        return effective_beta(self.t_c, self.delta)

    @property
    def beta_h(self) -> float:
        return effective_beta(self.t_h, self.delta)

    def hamiltonians(self) -> tuple[DiagonalHamiltonian, DiagonalHamiltonian]:
        return DiagonalHamiltonian(QUBIT_C, self.delta), DiagonalHamiltonian(QUBIT_H, self.delta)

    def with_grid(self, theta_grid) -> "ExperimentParams":
        return ExperimentParams(self.t_c, self.t_h, self.delta, tuple(theta_grid))


@dataclass(frozen=True)
class HeatFlowResult:
    theta: float
    qq_c: float
    qq_h: float
    qsc_c: float
    qsc_h: float
    qq_bar: float
    qsc_bar: float
    dq_q: float
    dq_sc: float
    violation_i: float
    violation_i_c: float


def effective_beta(t: float, delta: float = 1.0) -> float:
    """Inverse temperature of a marginal prepared with swap angle ``t``.

    Returns ``math.inf`` at ``t == pi`` (the marginal is the ground state).
    """
    if not 0.0 <= t <= math.pi:
        raise ValueError(f"t must lie in [0, pi], got {t}")
    if t == math.pi:
        return math.inf
    return math.log1p(2.0 * math.tan(t / 2.0) ** 2) / delta


# --- initial state -------------------------------------------------------------

def closed_form_matrix(t_c: float, t_h: float) -> np.ndarray:
    """Two-qubit density matrix produced by the preparation circuit."""
    cc, ch = math.cos(t_c / 2), math.cos(t_h / 2)
    p00 = 1.0 - 0.5 * (cc**2 + ch**2)
    eta = -0.5 * cc * ch
    inv_zc = 1.0 - 0.5 * cc**2
    inv_zh = 1.0 - 0.5 * ch**2
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = p00
    rho[1, 1] = inv_zc - p00
    rho[2, 2] = inv_zh - p00
    rho[3, 3] = 1.0 - inv_zc - inv_zh + p00
    rho[1, 2] = rho[2, 1] = eta
    return rho


def coherence(rho: QuantumState) -> float:
    """The (|0_c 1_h>, |1_c 0_h>) coherence, called eta in the closed form."""
    return float(rho.data[1, 2].real)


def preparation_gates(t_c: float, t_h: float) -> list[qsim.GateOp]:
    """Singlet on (c, h), then partial swaps with the two ancillas."""
    return [
        qsim.x(QUBIT_C),
        qsim.x(QUBIT_H),
        qsim.hadamard(QUBIT_C),
        qsim.cnot(QUBIT_C, QUBIT_H),
        qsim.u_xy(t_c, (ANCILLA_C, QUBIT_C)),
        qsim.u_xy(t_h, (ANCILLA_H, QUBIT_H)),
    ]


def prepare_initial_state(params: ExperimentParams, method: str = "closed_form") -> QuantumState:
    if method == "closed_form":
        return QuantumState(2, closed_form_matrix(params.t_c, params.t_h))
    if method == "circuit":
        psi = qsim.apply_circuit(qsim.QuantumState.basis(4, 0), preparation_gates(params.t_c, params.t_h))
        return qsim.partial_trace(psi, (QUBIT_C, QUBIT_H))
    raise ValueError(f"unknown preparation method {method!r}")


# --- heat flows ------------------------------------------------------------------

def _check_pair(rho: QuantumState) -> None:
    if rho.n_qubits != 2:
        raise ValueError(f"expected a two-qubit (c, h) state, got {rho.n_qubits} qubits")


def _heat_out(initial: QuantumState, evolved_from: QuantumState, theta: float, delta: float):
    """Tr[initial H_x] - Tr[U evolved_from U^dag H_x] for x = c, h."""
    final = qsim.apply_gate(evolved_from, qsim.u_theta(theta))
    heats = []
    for q in (QUBIT_C, QUBIT_H):
        h = DiagonalHamiltonian(q, delta)
        heats.append(qsim.energy_expectation(initial, h) - qsim.energy_expectation(final, h))
    return heats[0], heats[1]


def q_quantum(rho: QuantumState, theta: float, delta: float = 1.0) -> tuple[float, float]:
    """Heat flowing out of c and out of h under the exchange unitary."""
    _check_pair(rho)
    rho = rho.to_density_matrix()
    return _heat_out(rho, rho, theta, delta)


def q_semiclassical(
    rho: QuantumState, theta: float, delta: float = 1.0, variant: str = "dephased"
) -> tuple[float, float]:
    """Two-point-measurement heat, from the dephased state or the product of marginals."""
    _check_pair(rho)
    rho = rho.to_density_matrix()
    if variant == "dephased":
        start = qsim.dephase(rho, (QUBIT_C, QUBIT_H))
    elif variant == "product_marginals":
        rc = qsim.partial_trace(rho, [QUBIT_C]).data
        rh = qsim.partial_trace(rho, [QUBIT_H]).data
        start = QuantumState(2, np.kron(rc, rh))
    else:
        raise ValueError(f"unknown semi-classical variant {variant!r}")
    return _heat_out(rho, start, theta, delta)


def q_analytic(params: ExperimentParams, theta: float) -> tuple[float, float]:
    """Closed forms of (Q_q, Q_sc) for the prepared state, heat out of c."""
    cc, ch = math.cos(params.t_c / 2), math.cos(params.t_h / 2)
    qq = 0.5 * cc**2 - 0.5 * (cc * math.cos(theta) - math.sin(theta) * ch) ** 2
    qsc = 0.25 * math.sin(theta) ** 2 * (math.cos(params.t_c) - math.cos(params.t_h))
    return qq * params.delta, qsc * params.delta


# --- violation witness -------------------------------------------------------------

def kappa(beta_c: float, beta_h: float, delta: float = 1.0) -> float:
    """Temperature-dependent prefactor of the semi-classical heat bound."""
    if not beta_c > beta_h:
        raise ValueError(
            f"the heat-flow bound needs beta_c > beta_h, got beta_c={beta_c}, beta_h={beta_h}"
        )
    if math.isinf(beta_c):
        return 1.0
    ec, eh = math.exp(beta_c * delta), math.exp(beta_h * delta)
    return (2.0 + ec + eh) / (ec - eh)


def violation(qq: float, qsc: float, beta_c: float, beta_h: float, delta: float = 1.0) -> float:
    """I = |Q_q| - kappa |Q_sc|; I > 0 witnesses quasiprobability negativity."""
    return abs(qq) - kappa(beta_c, beta_h, delta) * abs(qsc)


def _result(params, theta, qq_c, qq_h, qsc_c, qsc_h) -> HeatFlowResult:
    qq_bar = 0.5 * (qq_c - qq_h)
    qsc_bar = 0.5 * (qsc_c - qsc_h)
    bc, bh = params.beta_c, params.beta_h
    return HeatFlowResult(
        theta=float(theta),
        qq_c=qq_c,
        qq_h=qq_h,
        qsc_c=qsc_c,
        qsc_h=qsc_h,
        qq_bar=qq_bar,
        qsc_bar=qsc_bar,
        dq_q=qq_c + qq_h,
        dq_sc=qsc_c + qsc_h,
        violation_i=violation(qq_bar, qsc_bar, bc, bh, params.delta),
        violation_i_c=violation(qq_c, qsc_c, bc, bh, params.delta),
    )


def result_from_heats(params: ExperimentParams, theta: float, qq_c, qq_h, qsc_c, qsc_h) -> HeatFlowResult:
    """Derived means, discrepancies and witnesses for measured heats."""
    return _result(params, theta, float(qq_c), float(qq_h), float(qsc_c), float(qsc_h))


def sweep(params: ExperimentParams, mode: str = "analytic") -> list[HeatFlowResult]:
    """One :class:`HeatFlowResult` per grid angle, in grid order."""
    if mode not in ("analytic", "exact_sim"):
        raise ValueError(f"unknown sweep mode {mode!r}")
    rho = prepare_initial_state(params, "circuit") if mode == "exact_sim" else None
    results = []
    for theta in params.theta_grid:
        if mode == "analytic":
            qq, qsc = q_analytic(params, theta)
            # energy conservation makes the hot-side heats the exact negatives
            heats = (qq, -qq, qsc, -qsc)
        else:
            heats = q_quantum(rho, theta, params.delta) + q_semiclassical(rho, theta, params.delta)
        results.append(_result(params, theta, *heats))
    return results
