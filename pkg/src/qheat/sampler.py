"""Shot-level emulation of the quantum-heat and two-point-measurement circuits.

Each protocol draws whole shot arrays from a seeded ``numpy`` generator, so a
fixed seed reproduces every record bit for bit. Bitstrings list the cold
qubit first ("ch"); two-round records join the rounds with ":".
"""

from __future__ import annotations

import csv
import secrets
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import heatflow, qsim
from .analysis import ConfusionMatrix, ExperimentRecord, biased_marginal, mitigate_readout
from .heatflow import QUBIT_C, QUBIT_H, ExperimentParams, prepare_initial_state
from .qsim import QuantumState

STAGES = ("prep_coherence", "midcircuit_readout", "final_readout")
MIDCIRCUIT_MODES = ("record_only", "flip_state", "record_and_flip_state")
CIRCUIT_IDS = ("qq_initial", "qq_final", "tpm")
DEFAULT_SHOTS = 10_000
DEFAULT_RUNS = 15
SHOT_COLUMNS = ("circuit_id", "theta", "round", "bitstring", "count", "seed")


class NoiseError(ValueError):
    """A noise model that would produce an unphysical state."""


@dataclass(frozen=True)
class NoiseModel:
    """Coherence loss at preparation plus readout bias / misreads.

    ``delta_c``/``delta_h`` shift the post-measurement populations of the
    mid-circuit measurement by ``delta * sigma_z`` (towards |0> for positive
    values). ``eps_read_*`` is the probability of reading a |1> as 0 at the
    readout stages listed in ``applies_to``; ``midcircuit_mode`` decides whether
    a mid-circuit misread corrupts the record, the post-measurement state, or
    both.
    """

    zeta: float = 0.0
    delta_c: float = 0.0
    delta_h: float = 0.0
    eps_read_c: float = 0.0
    eps_read_h: float = 0.0
    applies_to: frozenset = field(default_factory=lambda: frozenset(STAGES))
    midcircuit_mode: str = "flip_state"

    def __post_init__(self):
        applies = frozenset(self.applies_to)
        unknown = applies - set(STAGES)
        if unknown:
            raise ValueError(f"unknown noise stages {sorted(unknown)}")
        object.__setattr__(self, "applies_to", applies)
        if abs(self.zeta) > 0.5:
            raise ValueError(f"|zeta| must be <= 1/2, got {self.zeta}")
        for name in ("eps_read_c", "eps_read_h"):
            eps = getattr(self, name)
            if not 0.0 <= eps <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {eps}")
        for name in ("delta_c", "delta_h"):
            if abs(getattr(self, name)) > 0.5:
                raise ValueError(f"|{name}| must be <= 1/2")
        if self.midcircuit_mode not in MIDCIRCUIT_MODES:
            raise ValueError(f"midcircuit_mode must be one of {MIDCIRCUIT_MODES}")

    def active(self, stage: str) -> bool:
        return stage in self.applies_to

    def eps(self, qubit: int) -> float:
        return self.eps_read_c if qubit == QUBIT_C else self.eps_read_h

    def bias(self, qubit: int) -> float:
        return self.delta_c if qubit == QUBIT_C else self.delta_h

    def check(self, params: ExperimentParams) -> None:
        """Raise :class:`NoiseError` if this model is unphysical for ``params``."""
        rho = prepare_initial_state(params)
        if self.active("prep_coherence"):
            rho = apply_noise_to_state(rho, self, "prep_coherence")
        if self.active("midcircuit_readout"):
            apply_noise_to_state(rho, self, "midcircuit_readout")


NOISELESS = NoiseModel()


def _checked(arr: np.ndarray, what: str) -> QuantumState:
    lam = np.linalg.eigvalsh(arr).min()
    if lam < -qsim.EIG_ATOL:
        raise NoiseError(f"{what} is not positive semidefinite (min eigenvalue {lam:.6g})")
    return QuantumState.from_array(arr)


def apply_noise_to_state(rho: QuantumState, noise: NoiseModel, stage: str, qubit: Optional[int] = None) -> QuantumState:
    """Exact density-matrix version of one noise stage.

    ``prep_coherence`` adds ``zeta`` to the (|01>, |10>) coherence of a
    (c, h) state. The readout stages replace a (c, h) state by the product of
    its bias-shifted marginals; a single-qubit input needs ``qubit``.
    """
    if stage not in STAGES:
        raise ValueError(f"unknown noise stage {stage!r}")
    if not noise.active(stage):
        raise ValueError(f"noise model does not apply to stage {stage!r}")
    if stage == "prep_coherence":
        if rho.n_qubits != 2:
            raise ValueError("coherence noise acts on the two-qubit (c, h) state")
        arr = rho.density_matrix()
        eta = arr[1, 2].real
        arr[1, 2] += noise.zeta
        arr[2, 1] += noise.zeta
        return _checked(arr, f"state with eta={eta:.6g} shifted by zeta={noise.zeta:.6g}")
    if rho.n_qubits == 1:
        if qubit not in (QUBIT_C, QUBIT_H):
            raise ValueError("single-qubit readout noise needs qubit=0 (c) or 1 (h)")
        arr = biased_marginal(rho.density_matrix(), noise.bias(qubit))
        return _checked(arr, f"marginal of qubit {qubit} with bias {noise.bias(qubit):.6g}")
    if rho.n_qubits != 2:
        raise ValueError("readout noise acts on a (c, h) pair or a single qubit")
    rc = biased_marginal(qsim.partial_trace(rho, [QUBIT_C]).density_matrix(), noise.delta_c)
    rh = biased_marginal(qsim.partial_trace(rho, [QUBIT_H]).density_matrix(), noise.delta_h)
    _checked(rc, f"cold marginal with bias {noise.delta_c:.6g}")
    _checked(rh, f"hot marginal with bias {noise.delta_h:.6g}")
    return _checked(np.kron(rc, rh), "biased product state")


# --- records ---------------------------------------------------------------------

@dataclass(frozen=True)
class ShotRecord:
    circuit_id: str
    theta: float
    outcomes: dict
    shots: int
    seed: int
    rounds: int = 1

    def __post_init__(self):
        if self.circuit_id not in CIRCUIT_IDS:
            raise ValueError(f"unknown circuit id {self.circuit_id!r}")
        total = sum(self.outcomes.values())
        if total != self.shots:
            raise ValueError(f"counts sum to {total}, expected {self.shots} shots")
        object.__setattr__(self, "outcomes", dict(sorted(self.outcomes.items())))

    def round_probabilities(self, round_index: int = 0) -> np.ndarray:
        """Empirical joint (c, h) outcome distribution of one measurement round."""
        p = np.zeros(4)
        for key, n in self.outcomes.items():
            p[int(key.split(":")[round_index], 2)] += n
        return p / self.shots


def write_shot_csv(records: Iterable[ShotRecord], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SHOT_COLUMNS)
        for rec in records:
            label = ":".join(str(r) for r in range(rec.rounds))
            for key, n in rec.outcomes.items():
                w.writerow([rec.circuit_id, repr(float(rec.theta)), label, key, n, rec.seed])


def read_shot_csv(path) -> list[ShotRecord]:
    grouped: dict = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(SHOT_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            key = (row["circuit_id"], float(row["theta"]), int(row["seed"]),
                   len(row["round"].split(":")))
            grouped.setdefault(key, Counter())[row["bitstring"]] += int(row["count"])
    return [ShotRecord(cid, theta, dict(counts), sum(counts.values()), seed, rounds)
            for (cid, theta, seed, rounds), counts in grouped.items()]


@dataclass(frozen=True)
class ProtocolEstimate:
    """Heat out of (c, h) with standard errors, in the energy units of ``delta``."""

    q_c: float
    q_h: float
    se_c: float
    se_h: float
    records: tuple = ()


# --- sampling helpers -----------------------------------------------------------

def _resolve_seed(seed: Optional[int]) -> int:
    return secrets.randbits(63) if seed is None else int(seed)


def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def _bit(idx: np.ndarray, qubit: int) -> np.ndarray:
    return (idx >> (1 - qubit)) & 1


def _sample(rng: np.random.Generator, probs: np.ndarray, size: int) -> np.ndarray:
    cdf = np.cumsum(probs / probs.sum())
    return np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), len(probs) - 1)


def _sample_rows(rng: np.random.Generator, table: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Draw one outcome per shot from the distribution ``table[rows[k]]``."""
    cdf = np.cumsum(table, axis=1)
    cdf /= cdf[:, -1:]
    u = rng.random(rows.size)
    return np.minimum((u[:, None] >= cdf[rows]).sum(axis=1), table.shape[1] - 1)


def _flip_down(idx: np.ndarray, rng: np.random.Generator, probs: Sequence[float]) -> np.ndarray:
    """Clear each set bit of qubit q with probability probs[q]."""
    idx = idx.copy()
    for q, p in enumerate(probs):
        if p > 0:
            hit = (_bit(idx, q) == 1) & (rng.random(idx.size) < p)
            idx[hit] &= ~(1 << (1 - q))
    return idx


def _relax_by_bias(idx: np.ndarray, rng: np.random.Generator, rho: QuantumState, noise: NoiseModel) -> np.ndarray:
    """Per-shot population transfer whose average equals the sigma_z bias."""
    idx = idx.copy()
    for q in (QUBIT_C, QUBIT_H):
        d = noise.bias(q)
        if d == 0:
            continue
        p1 = qsim.energy_expectation(rho, qsim.DiagonalHamiltonian(q, 1.0))
        src, rate = (1, d / p1) if d > 0 else (0, -d / (1.0 - p1))
        if not 0.0 <= rate <= 1.0:
            raise NoiseError(f"bias {d} on qubit {q} exceeds the available population")
        hit = (_bit(idx, q) == src) & (rng.random(idx.size) < rate)
        idx[hit] ^= 1 << (1 - q)
    return idx


def _initial_state(params: ExperimentParams, noise: NoiseModel) -> QuantumState:
    rho = prepare_initial_state(params)
    if noise.active("prep_coherence") and noise.zeta != 0:
        rho = apply_noise_to_state(rho, noise, "prep_coherence")
    return rho


def _final_readout(idx, rng, noise):
    if noise.active("final_readout"):
        return _flip_down(idx, rng, (noise.eps_read_c, noise.eps_read_h))
    return idx


def _batched(seed: int, key: int, shots: int, batches: int):
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if batches < 1:
        raise ValueError("batches must be >= 1")
    sizes = [shots // batches + (1 if b < shots % batches else 0) for b in range(batches)]
    return [(_rng(seed, key, b), n) for b, n in enumerate(sizes) if n]


def _counts(labels: Iterable[str]) -> dict:
    return dict(Counter(labels))


# --- protocols ---------------------------------------------------------------------

def sample_qq_circuit(
    params: ExperimentParams, theta: Optional[float], shots: int, noise: NoiseModel = NOISELESS,
    seed: Optional[int] = None, batches: int = 1,
) -> ShotRecord:
    """Prepare, optionally evolve (``theta`` not None) and measure (c, h)."""
    seed = _resolve_seed(seed)
    rho = _initial_state(params, noise)
    cid = "qq_initial" if theta is None else "qq_final"
    if theta is not None:
        rho = qsim.apply_gate(rho, qsim.u_theta(theta))
    probs = rho.probabilities()
    counts = Counter()
    for rng, n in _batched(seed, 0 if theta is None else 1, shots, batches):
        idx = _final_readout(_sample(rng, probs, n), rng, noise)
        counts.update(format(int(i), "02b") for i in idx)
    return ShotRecord(cid, 0.0 if theta is None else float(theta), dict(counts), shots, seed)


def _bit_means(rec: ShotRecord, round_index: int = 0) -> tuple[float, float]:
    p = rec.round_probabilities(round_index)
    return p[2] + p[3], p[1] + p[3]


def estimate_qq(initial: ShotRecord, final: ShotRecord, delta: float = 1.0,
                confusion: Optional[Sequence[ConfusionMatrix]] = None) -> ProtocolEstimate:
    """Q_q = <E_i> - <E_f> from two independent circuits, binomial errors."""
    means, var = [], []
    for rec in (initial, final):
        probs = rec.round_probabilities(0)
        scale = (1.0, 1.0)
        if confusion is not None:
            probs = mitigate_readout(probs, confusion).probabilities
            scale = tuple(1.0 / abs(1.0 - m.matrix[1, 0] - m.matrix[0, 1]) for m in confusion)
        pc, ph = probs[2] + probs[3], probs[1] + probs[3]
        raw_c, raw_h = _bit_means(rec)
        means.append((pc, ph))
        var.append((scale[0] ** 2 * raw_c * (1 - raw_c) / rec.shots,
                    scale[1] ** 2 * raw_h * (1 - raw_h) / rec.shots))
    q_c = delta * (means[0][0] - means[1][0])
    q_h = delta * (means[0][1] - means[1][1])
    se_c = delta * float(np.sqrt(var[0][0] + var[1][0]))
    se_h = delta * float(np.sqrt(var[0][1] + var[1][1]))
    return ProtocolEstimate(float(q_c), float(q_h), se_c, se_h, (initial, final))


def run_qq_protocol(
    params: ExperimentParams, theta: float, shots: int = DEFAULT_SHOTS, noise: NoiseModel = NOISELESS,
    seed: Optional[int] = None, batches: int = 1,
) -> ProtocolEstimate:
    """Two-circuit estimate of the quantum heat."""
    seed = _resolve_seed(seed)
    initial = sample_qq_circuit(params, None, shots, noise, seed, batches)
    final = sample_qq_circuit(params, theta, shots, noise, seed, batches)
    return estimate_qq(initial, final, params.delta)


def _final_table(theta: float) -> np.ndarray:
    """Row j: (c, h) outcome distribution after evolving basis state j."""
    gate = qsim.u_theta(theta)
    return np.array([qsim.apply_gate(QuantumState.basis(2, j), gate).probabilities() for j in range(4)])


def sample_tpm_circuit(
    params: ExperimentParams, theta: float, shots: int, noise: NoiseModel = NOISELESS,
    seed: Optional[int] = None, batches: int = 1,
) -> ShotRecord:
    """Prepare, measure mid-circuit with collapse, evolve, measure again."""
    seed = _resolve_seed(seed)
    rho = _initial_state(params, noise)
    branches = qsim.measurement_branches(rho, (QUBIT_C, QUBIT_H))
    born = np.zeros(4)
    for label, p, _ in branches:
        born[int(label, 2)] = p
    table = _final_table(theta)
    mid = noise.active("midcircuit_readout")
    eps = (noise.eps_read_c, noise.eps_read_h)
    counts = Counter()
    for rng, n in _batched(seed, 2, shots, batches):
        truth = _sample(rng, born, n)
        recorded, state = truth, truth
        if mid:
            state = _relax_by_bias(state, rng, rho, noise)
            if noise.midcircuit_mode == "record_only":
                recorded = _flip_down(truth, rng, eps)
            elif noise.midcircuit_mode == "flip_state":
                state = _flip_down(state, rng, eps)
            else:
                recorded = _flip_down(truth, rng, eps)
                # the same shots lose their excitation in state and record
                lost = recorded != truth
                state = np.where(lost, recorded, state)
        final = _final_readout(_sample_rows(rng, table, state), rng, noise)
        counts.update(f"{int(a):02b}:{int(b):02b}" for a, b in zip(recorded, final))
    return ShotRecord("tpm", float(theta), dict(counts), shots, seed, rounds=2)


def estimate_tpm(record: ShotRecord, delta: float = 1.0,
                 confusion: Optional[Sequence[ConfusionMatrix]] = None) -> ProtocolEstimate:
    """Q_sc = <E_i - E_f> per shot; standard error from the per-shot spread."""
    keys = list(record.outcomes)
    n = np.array([record.outcomes[k] for k in keys], dtype=float)
    first = np.array([int(k.split(":")[0], 2) for k in keys])
    second = np.array([int(k.split(":")[1], 2) for k in keys])
    est, se = [], []
    for q in (QUBIT_C, QUBIT_H):
        d = (_bit(first, q) - _bit(second, q)).astype(float)
        mean = float(n @ d / record.shots)
        var = float(n @ d**2 / record.shots - mean**2)
        est.append(mean)
        se.append(np.sqrt(max(var, 0.0) / record.shots))
    if confusion is not None:
        p_i = mitigate_readout(record.round_probabilities(0), confusion).probabilities
        p_f = mitigate_readout(record.round_probabilities(1), confusion).probabilities
        est = [(p_i[2] + p_i[3]) - (p_f[2] + p_f[3]), (p_i[1] + p_i[3]) - (p_f[1] + p_f[3])]
        se = [s / abs(1.0 - m.matrix[1, 0] - m.matrix[0, 1]) for s, m in zip(se, confusion)]
    return ProtocolEstimate(delta * float(est[0]), delta * float(est[1]),
                            delta * float(se[0]), delta * float(se[1]), (record,))


def run_tpm_protocol(
    params: ExperimentParams, theta: float, shots: int = DEFAULT_SHOTS, noise: NoiseModel = NOISELESS,
    seed: Optional[int] = None, batches: int = 1,
) -> ProtocolEstimate:
    """Single-circuit two-point-measurement estimate of the semi-classical heat."""
    return estimate_tpm(sample_tpm_circuit(params, theta, shots, noise, seed, batches), params.delta)


def run_calibration(noise: NoiseModel, shots: int = DEFAULT_SHOTS, seed: Optional[int] = None):
    """Readout calibration circuits (prepare |0> and |1>, then read) per work qubit."""
    seed = _resolve_seed(seed)
    mats = []
    for q in (QUBIT_C, QUBIT_H):
        counts = []
        for prepared in (0, 1):
            rng = _rng(seed, 10 + q, prepared)
            bits = np.full(shots, prepared)
            if noise.active("final_readout") and prepared == 1:
                bits = np.where(rng.random(shots) < noise.eps(q), 0, bits)
            counts.append(_counts(str(int(b)) for b in bits))
        mats.append(ConfusionMatrix.from_calibration(counts[0], counts[1]))
    return tuple(mats)


def simulate_records(
    params: ExperimentParams, shots: int = DEFAULT_SHOTS, runs: int = DEFAULT_RUNS,
    noise: NoiseModel = NOISELESS, seed: int = 0,
) -> list[ExperimentRecord]:
    """Shot-based dataset: every grid angle for every run, both protocols."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    noise.check(params)
    records = []
    for run in range(runs):
        for k, theta in enumerate(params.theta_grid):
            s = int(np.random.SeedSequence([seed, run, k]).generate_state(1, dtype=np.uint64)[0] >> 1)
            qq = run_qq_protocol(params, theta, shots, noise, s)
            sc = run_tpm_protocol(params, theta, shots, noise, s)
            records.append(ExperimentRecord(theta, qq.q_c, qq.q_h, sc.q_c, sc.q_h, run))
    return records


def exact_noisy_heats(params: ExperimentParams, theta: float, noise: NoiseModel) -> tuple[float, float, float, float]:
    """Shot-free (qq_c, qq_h, qsc_c, qsc_h) under the density-matrix noise stages."""
    rho = _initial_state(params, noise)
    qq = heatflow.q_quantum(rho, theta, params.delta)
    if noise.active("midcircuit_readout"):
        start = apply_noise_to_state(rho, noise, "midcircuit_readout")
        qsc = heatflow._heat_out(rho, start, theta, params.delta)
    else:
        qsc = heatflow.q_semiclassical(rho, theta, params.delta)
    return qq + tuple(qsc)
