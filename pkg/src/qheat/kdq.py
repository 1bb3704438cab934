"""Margenau-Hill (real Kirkwood-Dirac) quasiprobabilities of the heat exchange.

The table is indexed ``entries[i, f]`` where ``i = 2*i_c + i_h`` labels the
initial energy pair and ``f = 2*f_c + f_h`` the final one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Optional

import numpy as np

from . import qsim
from .heatflow import ExperimentParams
from .qsim import QuantumState

ATOL = 1e-12


@dataclass(frozen=True)
class KdqDistribution:
    entries: np.ndarray = field(repr=False)
    theta: float
    params: Optional[ExperimentParams] = None

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.shape != (4, 4):
            raise ValueError(f"KDQ table must be 4x4, got {e.shape}")
        if abs(e.sum() - 1.0) > ATOL:
            raise ValueError(f"KDQ entries sum to {e.sum()!r}, expected 1")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    def p(self, i_c: int, i_h: int, f_c: int, f_h: int) -> float:
        return float(self.entries[2 * i_c + i_h, 2 * f_c + f_h])

    def rows(self) -> list[tuple[int, int, int, int, float]]:
        """Flat row-major listing ``(i_c, i_h, f_c, f_h, p)``."""
        return [(i_c, i_h, f_c, f_h, self.p(i_c, i_h, f_c, f_h))
                for i_c, i_h, f_c, f_h in product((0, 1), repeat=4)]

    def initial_marginals(self) -> np.ndarray:
        return self.entries.sum(axis=1)


def _projector(k: int) -> np.ndarray:
    p = np.zeros((4, 4))
    p[k, k] = 1.0
    return p


def kdq_distribution(
    rho: QuantumState, theta: float, params: Optional[ExperimentParams] = None
) -> KdqDistribution:
    """entries[i, f] = Re Tr[U^dag P_f U P_i rho] for energy projectors P."""
    if rho.n_qubits != 2:
        raise ValueError("KDQ needs a two-qubit (c, h) state")
    r = rho.density_matrix()
    u = qsim.u_theta(theta).matrix
    entries = np.empty((4, 4))
    for i in range(4):
        # P_i rho keeps only row i
        pi_rho = _projector(i) @ r
        for f in range(4):
            propagated = u.conj().T @ _projector(f) @ u
            entries[i, f] = np.real(np.trace(propagated @ pi_rho))
    dist = KdqDistribution(entries, float(theta), params)
    marg = dist.initial_marginals()
    diag = np.real(np.diag(r))
    if np.max(np.abs(marg - diag)) > ATOL:
        raise AssertionError("KDQ initial marginals disagree with the state populations")
    return dist


def kdq_heat(dist: KdqDistribution, delta: float = 1.0) -> tuple[float, float]:
    """Mean heat out of c and out of h reconstructed from the quasiprobabilities."""
    qq_c = qq_h = 0.0
    for i_c, i_h, f_c, f_h, p in dist.rows():
        qq_c += p * delta * (i_c - f_c)
        qq_h += p * delta * (i_h - f_h)
    return qq_c, qq_h


def negativity(dist: KdqDistribution) -> float:
    """Total weight carried by negative entries."""
    e = dist.entries
    return float(-e[e < 0].sum())
