"""Experiment-file ingestion, readout mitigation and noise-parameter fits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

from . import qsim
from .heatflow import ExperimentParams, closed_form_matrix

EXPERIMENT_COLUMNS = ("theta", "qq_c", "qq_h", "qsc_c", "qsc_h", "run_id")


class ExperimentFileError(ValueError):
    """Malformed experiment CSV; ``problems`` lists ``(line, message)`` pairs."""

    def __init__(self, path, problems):
        self.path = str(path)
        self.problems = list(problems)
        lines = "; ".join(f"line {n}: {msg}" if n else msg for n, msg in self.problems)
        super().__init__(f"{self.path}: {lines}")


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentRecord:
    theta: float
    qq_c: float
    qq_h: float
    qsc_c: float
    qsc_h: float
    run_id: int = 0

    def __post_init__(self):
        values = (self.theta, self.qq_c, self.qq_h, self.qsc_c, self.qsc_h)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"non-finite value in record {values}")
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta={self.theta!r} outside [0, pi]")

    @property
    def qq_bar(self) -> float:
        return 0.5 * (self.qq_c - self.qq_h)

    @property
    def qsc_bar(self) -> float:
        return 0.5 * (self.qsc_c - self.qsc_h)

    @property
    def dq_sc(self) -> float:
        return self.qsc_c + self.qsc_h


# --- CSV -----------------------------------------------------------------------

def load_experiment_csv(path) -> list[ExperimentRecord]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ExperimentFileError(path, [(0, "empty file")]) from None
        missing = [c for c in EXPERIMENT_COLUMNS if c not in header]
        if missing:
            raise ExperimentFileError(path, [(1, f"missing columns {missing}")])
        col = {name: header.index(name) for name in EXPERIMENT_COLUMNS}
        records, problems = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                problems.append((lineno, f"expected {len(header)} fields, got {len(row)}"))
                continue
            try:
                values = {}
                for name in EXPERIMENT_COLUMNS[:-1]:
                    values[name] = float(row[col[name]])
                values["run_id"] = int(row[col["run_id"]])
            except ValueError as exc:
                problems.append((lineno, f"non-numeric field ({exc})"))
                continue
            try:
                records.append(ExperimentRecord(**values))
            except ValueError as exc:
                problems.append((lineno, str(exc)))
    if problems:
        raise ExperimentFileError(path, problems)
    if not records:
        raise ExperimentFileError(path, [(0, "no data rows")])
    return records


def write_experiment_csv(records: Iterable[ExperimentRecord], path) -> None:
    # repr() round-trips floats exactly
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EXPERIMENT_COLUMNS)
        for r in records:
            w.writerow([repr(float(r.theta)), repr(float(r.qq_c)), repr(float(r.qq_h)),
                        repr(float(r.qsc_c)), repr(float(r.qsc_h)), int(r.run_id)])


# --- readout mitigation --------------------------------------------------------

@dataclass(frozen=True)
class ConfusionMatrix:
    """Per-qubit readout channel, ``matrix[a, b] = P(read a | prepared b)``."""

    matrix: np.ndarray = field(repr=True)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (2, 2):
            raise ValueError(f"confusion matrix must be 2x2, got {m.shape}")
        if np.any(m < 0) or np.any(m > 1):
            raise ValueError("confusion matrix entries must lie in [0, 1]")
        if np.max(np.abs(m.sum(axis=0) - 1.0)) > 1e-9:
            raise ValueError("confusion matrix columns must sum to 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_error_rates(cls, p1_given_0: float = 0.0, p0_given_1: float = 0.0) -> "ConfusionMatrix":
        return cls(np.array([[1 - p1_given_0, p0_given_1], [p1_given_0, 1 - p0_given_1]]))

    @classmethod
    def from_calibration(cls, counts_prep0: Mapping[str, int], counts_prep1: Mapping[str, int]) -> "ConfusionMatrix":
        """Estimate from single-qubit calibration counts after preparing |0> and |1>."""
        n0 = sum(counts_prep0.values())
        n1 = sum(counts_prep1.values())
        if n0 == 0 or n1 == 0:
            raise ValueError("calibration needs shots for both prepared states")
        return cls.from_error_rates(counts_prep0.get("1", 0) / n0, counts_prep1.get("0", 0) / n1)

    @property
    def identity(self) -> bool:
        return bool(np.array_equal(self.matrix, np.eye(2)))


@dataclass(frozen=True)
class MitigationResult:
    probabilities: np.ndarray
    unclipped: np.ndarray
    clip_l1: float


ConfusionLike = Union[ConfusionMatrix, Sequence[ConfusionMatrix]]


def _per_qubit(m: ConfusionLike, n: int) -> list[ConfusionMatrix]:
    if isinstance(m, ConfusionMatrix):
        return [m] * n
    m = list(m)
    if len(m) != n:
        raise ValueError(f"need {n} confusion matrices, got {len(m)}")
    return m


def _apply_per_qubit(probs: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    n = len(mats)
    t = probs.reshape((2,) * n)
    for q, m in enumerate(mats):
        t = np.moveaxis(np.tensordot(m, t, axes=([1], [q])), 0, q)
    return t.reshape(-1)


def _register_size(probs: np.ndarray) -> int:
    n = int(round(math.log2(probs.size))) if probs.size else 0
    if probs.ndim != 1 or n < 1 or 2**n != probs.size:
        raise ValueError(f"probability vector length {probs.size} is not 2^n")
    return n


def apply_confusion(probs, m: ConfusionLike) -> np.ndarray:
    """Push true outcome probabilities through independent per-qubit readout errors."""
    probs = np.asarray(probs, dtype=float)
    n = _register_size(probs)
    return _apply_per_qubit(probs, [c.matrix for c in _per_qubit(m, n)])


def mitigate_readout(raw_probs, m: ConfusionLike) -> MitigationResult:
    """Invert per-qubit readout errors, then clip to [0, 1] and renormalize."""
    raw = np.asarray(raw_probs, dtype=float)
    n = _register_size(raw)
    inverses = []
    for c in _per_qubit(m, n):
        if abs(np.linalg.det(c.matrix)) < 1e-12:
            raise ValueError(f"singular confusion matrix {c.matrix.tolist()}")
        inverses.append(np.linalg.inv(c.matrix))
    corrected = _apply_per_qubit(raw, inverses)
    clipped = np.clip(corrected, 0.0, 1.0)
    total = clipped.sum()
    if total <= 0:
        raise ValueError("mitigated distribution has no positive weight")
    clipped = clipped / total
    return MitigationResult(clipped, corrected, float(np.abs(clipped - corrected).sum()))


# --- forward noise models -----------------------------------------------------

def _array_heats(initial: np.ndarray, start: np.ndarray, theta: float, delta: float):
    u = qsim.u_theta(theta).matrix
    final = u @ start @ u.conj().T
    out = []
    for q in (0, 1):
        h = qsim.DiagonalHamiltonian(q, delta).matrix(2)
        out.append(float(np.real(np.trace(initial @ h) - np.trace(final @ h))))
    return out[0], out[1]


def model_qq(params: ExperimentParams, theta: float, zeta: float = 0.0) -> tuple[float, float]:
    """Quantum heats (c, h) when the initial coherence is shifted by ``zeta``.

    Plain matrix algebra: no positivity check, so unphysical shifts can be
    evaluated while fitting.
    """
    rho = closed_form_matrix(params.t_c, params.t_h)
    rho[1, 2] += zeta
    rho[2, 1] += zeta
    return _array_heats(rho, rho, theta, params.delta)


def biased_marginal(rho_x: np.ndarray, bias: float) -> np.ndarray:
    """Single-qubit marginal with its populations shifted by ``bias * sigma_z``."""
    return rho_x + bias * np.diag([1.0, -1.0])


def model_qsc(
    params: ExperimentParams, theta: float, delta_c: float = 0.0, delta_h: float = 0.0
) -> tuple[float, float]:
    """Two-point-measurement heats (c, h) with biased post-measurement marginals."""
    rho = closed_form_matrix(params.t_c, params.t_h)
    pops = np.real(np.diag(rho))
    rc = np.diag([pops[0] + pops[1], pops[2] + pops[3]])
    rh = np.diag([pops[0] + pops[2], pops[1] + pops[3]])
    start = np.kron(biased_marginal(rc, delta_c), biased_marginal(rh, delta_h))
    return _array_heats(rho, start, theta, params.delta)


# --- fits -------------------------------------------------------------------------

@dataclass(frozen=True)
class ZetaFit:
    zeta: float
    stderr: float
    residual: float
    n_points: int


@dataclass(frozen=True)
class DeltaFit:
    delta_c: float
    delta_h: float
    stderr_c: float
    stderr_h: float
    residual: float
    n_points: int

    @property
    def dq_sc(self) -> float:
        """Implied constant energy discrepancy (units of the gap)."""
        return self.delta_c + self.delta_h


def _require_grid(records: Sequence[ExperimentRecord]) -> None:
    distinct = {r.theta for r in records}
    if len(distinct) < 3:
        raise FitError(f"need at least 3 distinct theta values, got {len(distinct)}")


def fit_zeta(
    records: Sequence[ExperimentRecord],
    params: ExperimentParams,
    weights: Optional[Sequence[float]] = None,
) -> ZetaFit:
    """Least-squares coherence shift from the mean quantum heat."""
    records = list(records)
    _require_grid(records)
    theta = np.array([r.theta for r in records])
    data = np.array([r.qq_bar for r in records])
    w = np.ones_like(data) if weights is None else np.asarray(weights, dtype=float)

    def model(z):
        return np.array([0.5 * (c - h) for c, h in (model_qq(params, t, z) for t in theta)])

    base = model(0.0)
    slope = model(1.0) - base
    if np.sum(w * slope**2) < 1e-24:
        raise FitError("theta grid carries no information about the coherence shift")

    def objective(z):
        return float(np.sum(w * (data - model(z)) ** 2))

    res = minimize_scalar(objective, bounds=(-0.5, 0.5), method="bounded",
                          options={"xatol": 1e-13, "maxiter": 500})
    zeta = float(res.x)
    rss = objective(zeta)
    dof = max(len(data) - 1, 1)
    stderr = math.sqrt(rss / dof / np.sum(w * slope**2))
    return ZetaFit(zeta, stderr, rss, len(data))


def fit_deltas(records: Sequence[ExperimentRecord], params: ExperimentParams) -> DeltaFit:
    """Readout-bias pair from both semi-classical heats, by linear least squares.

    The model is affine in the biases, so its design matrix is read off the
    forward model at the unit vectors.
    """
    records = list(records)
    _require_grid(records)
    rows, y = [], []
    for r in records:
        m0 = model_qsc(params, r.theta)
        mc = model_qsc(params, r.theta, 1.0, 0.0)
        mh = model_qsc(params, r.theta, 0.0, 1.0)
        for k, obs in ((0, r.qsc_c), (1, r.qsc_h)):
            rows.append([mc[k] - m0[k], mh[k] - m0[k]])
            y.append(obs - m0[k])
    design, y = np.array(rows), np.array(y)
    sv = np.linalg.svd(design, compute_uv=False)
    if sv[-1] < 1e-9 * max(sv[0], 1e-300):
        raise FitError("rank-deficient design: the theta grid cannot separate delta_c and delta_h")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    rss = float(resid @ resid)
    dof = max(len(y) - 2, 1)
    cov = rss / dof * np.linalg.inv(design.T @ design)
    return DeltaFit(float(coef[0]), float(coef[1]), float(math.sqrt(cov[0, 0])),
                    float(math.sqrt(cov[1, 1])), rss, len(records))
