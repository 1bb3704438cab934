"""Protocol circuits as documents: decomposition, QASM text and reconstruction.

Register layout: q[0] = c, q[1] = h, q[2] = ancilla of c, q[3] = ancilla of h.
The emitted QASM is a small OpenQASM 3 subset: one ``qubit`` register, ``bit``
registers per measurement round, the gates ``x h cx rx ry rz`` and
``measure`` assignments. Measurements do not end the circuit.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import qsim
from .heatflow import QUBIT_C, QUBIT_H, ExperimentParams, preparation_gates

PROTOCOLS = ("qq_initial", "qq_final", "tpm")
QUBIT_LABELS = ("c", "h", "a1", "a2")
RECONSTRUCTION_ATOL = 1e-9

_CONSTRUCTORS: dict[str, Callable[..., qsim.GateOp]] = {
    "id": lambda q: qsim.identity(q),
    "x": lambda q: qsim.x(q),
    "h": lambda q: qsim.hadamard(q),
    "cx": lambda a, b: qsim.cnot(a, b),
    "rx": lambda q, angle: qsim.rx(angle, q),
    "ry": lambda q, angle: qsim.ry(angle, q),
    "rz": lambda q, angle: qsim.rz(angle, q),
    "u_xy": lambda a, b, t: qsim.u_xy(t, (a, b)),
    "u_theta": lambda a, b, t: qsim.u_theta(t, (a, b)),
}
PRIMITIVES = ("x", "h", "cx", "rx", "ry", "rz")


class ReconstructionError(RuntimeError):
    """The emitted gate stream does not reproduce the intended unitary."""


class CircuitFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Instruction:
    kind: str  # "gate" or "measure"
    name: str  # gate name, or the classical register for a measurement
    targets: tuple[int, ...]
    params: tuple[float, ...] = ()

    def gate(self) -> qsim.GateOp:
        if self.kind != "gate":
            raise ValueError("measurements have no matrix")
        try:
            ctor = _CONSTRUCTORS[self.name]
        except KeyError:
            raise CircuitFormatError(f"unknown gate {self.name!r}") from None
        return ctor(*self.targets, *self.params)


def gate_instruction(op: qsim.GateOp) -> Instruction:
    return Instruction("gate", op.name, op.targets, op.params)


@dataclass
class CircuitDocument:
    n_qubits: int
    instructions: list[Instruction] = field(default_factory=list)
    name: str = "circuit"
    qubit_labels: tuple[str, ...] = ()

    def add(self, op: qsim.GateOp) -> "CircuitDocument":
        self.instructions.append(gate_instruction(op))
        return self

    def measure(self, register: str, qubits: Sequence[int]) -> "CircuitDocument":
        self.instructions.append(Instruction("measure", register, tuple(qubits)))
        return self

    def segments(self) -> list[list[Instruction]]:
        """Gate runs separated by measurement rounds (always len(rounds) + 1)."""
        out: list[list[Instruction]] = [[]]
        prev_measure = False
        for ins in self.instructions:
            if ins.kind == "measure":
                if not prev_measure:
                    out.append([])
                prev_measure = True
            else:
                out[-1].append(ins)
                prev_measure = False
        return out

    def measurement_rounds(self) -> list[tuple[str, tuple[int, ...]]]:
        rounds: list[tuple[str, tuple[int, ...]]] = []
        prev_measure = False
        for ins in self.instructions:
            if ins.kind == "measure":
                if prev_measure and rounds[-1][0] == ins.name:
                    rounds[-1] = (ins.name, rounds[-1][1] + ins.targets)
                else:
                    rounds.append((ins.name, ins.targets))
                prev_measure = True
            else:
                prev_measure = False
        return rounds

    def segment_unitaries(self) -> list[np.ndarray]:
        return [segment_unitary(seg, self.n_qubits) for seg in self.segments()]

    # -- internal line format --

    def to_lines(self) -> str:
        lines = [f"circuit {self.name}", "qubits " + " ".join([str(self.n_qubits), *self.qubit_labels])]
        for ins in self.instructions:
            targets = ",".join(str(t) for t in ins.targets)
            if ins.kind == "measure":
                lines.append(f"measure {ins.name} {targets}")
            else:
                line = f"gate {ins.name} {targets}"
                if ins.params:
                    line += " " + ",".join(repr(p) for p in ins.params)
                lines.append(line)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_lines(cls, text: str) -> "CircuitDocument":
        doc: Optional[CircuitDocument] = None
        name = "circuit"
        for lineno, raw in enumerate(text.splitlines(), start=1):
            parts = raw.split()
            if not parts or parts[0].startswith("#"):
                continue
            head = parts[0]
            try:
                if head == "circuit":
                    name = parts[1]
                elif head == "qubits":
                    doc = cls(int(parts[1]), [], name, tuple(parts[2:]))
                elif head in ("gate", "measure") and doc is not None:
                    targets = tuple(int(t) for t in parts[2].split(","))
                    params = tuple(float(p) for p in parts[3].split(",")) if len(parts) > 3 else ()
                    doc.instructions.append(Instruction(head, parts[1], targets, params))
                else:
                    raise CircuitFormatError(f"unexpected statement {head!r}")
            except (IndexError, ValueError) as exc:
                raise CircuitFormatError(f"line {lineno}: {raw.strip()!r}: {exc}") from None
        if doc is None:
            raise CircuitFormatError("missing 'qubits' declaration")
        return doc

    # -- OpenQASM 3 subset --

    def to_qasm(self) -> str:
        registers: dict[str, int] = {}
        for ins in self.instructions:
            if ins.kind == "measure":
                registers[ins.name] = registers.get(ins.name, 0) + len(ins.targets)
        lines = ["OPENQASM 3.0;", f"// {self.name}"]
        if self.qubit_labels:
            lines.append("// " + ", ".join(f"q[{i}]={lab}" for i, lab in enumerate(self.qubit_labels)))
        lines.append(f"qubit[{self.n_qubits}] q;")
        lines += [f"bit[{size}] {reg};" for reg, size in registers.items()]
        filled = {reg: 0 for reg in registers}
        for ins in self.instructions:
            if ins.kind == "measure":
                for t in ins.targets:
                    lines.append(f"{ins.name}[{filled[ins.name]}] = measure q[{t}];")
                    filled[ins.name] += 1
                continue
            if ins.name not in PRIMITIVES:
                raise CircuitFormatError(f"gate {ins.name!r} must be decomposed before QASM export")
            args = ", ".join(f"q[{t}]" for t in ins.targets)
            if ins.params:
                ps = ", ".join(repr(p) for p in ins.params)
                lines.append(f"{ins.name}({ps}) {args};")
            else:
                lines.append(f"{ins.name} {args};")
        return "\n".join(lines) + "\n"


_GATE_RE = re.compile(r"^([a-z]+)(?:\(([^)]*)\))?\s+(.+)$")
_MEAS_RE = re.compile(r"^(\w+)\[(\d+)\]\s*=\s*measure\s+q\[(\d+)\]$")
_QREF_RE = re.compile(r"^q\[(\d+)\]$")


def parse_qasm(text: str, name: str = "circuit") -> CircuitDocument:
    """Parse the subset written by :meth:`CircuitDocument.to_qasm`."""
    doc: Optional[CircuitDocument] = None
    body = "\n".join(line.split("//")[0] for line in text.splitlines())
    for stmt in (s.strip() for s in body.split(";")):
        if not stmt or stmt.startswith("OPENQASM") or stmt.startswith("bit["):
            continue
        m = re.match(r"^qubit\[(\d+)\]\s+q$", stmt)
        if m:
            doc = CircuitDocument(int(m.group(1)), [], name)
            continue
        if doc is None:
            raise CircuitFormatError(f"statement before qubit declaration: {stmt!r}")
        m = _MEAS_RE.match(stmt)
        if m:
            reg, q = m.group(1), int(m.group(3))
            last = doc.instructions[-1] if doc.instructions else None
            if last is not None and last.kind == "measure" and last.name == reg:
                doc.instructions[-1] = Instruction("measure", reg, last.targets + (q,))
            else:
                doc.instructions.append(Instruction("measure", reg, (q,)))
            continue
        m = _GATE_RE.match(stmt)
        if not m or m.group(1) not in PRIMITIVES:
            raise CircuitFormatError(f"unsupported statement {stmt!r}")
        params = tuple(float(p) for p in m.group(2).split(",")) if m.group(2) else ()
        targets = []
        for ref in m.group(3).split(","):
            qm = _QREF_RE.match(ref.strip())
            if not qm:
                raise CircuitFormatError(f"bad qubit reference {ref.strip()!r}")
            targets.append(int(qm.group(1)))
        doc.instructions.append(Instruction("gate", m.group(1), tuple(targets), params))
    if doc is None:
        raise CircuitFormatError("no qubit declaration")
    return doc


def segment_unitary(instructions: Sequence[Instruction], n_qubits: int) -> np.ndarray:
    u = np.eye(2**n_qubits, dtype=complex)
    for ins in instructions:
        u = qsim.embed(ins.gate(), n_qubits) @ u
    return u


# --- decomposition ------------------------------------------------------------------

def _pauli_pair_rotation(pa: str, pb: str, phi: float, a: int, b: int) -> list[qsim.GateOp]:
    """exp(-i phi/2 P_a Q_b) for P, Q in {X, Y}, via a CNOT-RZ-CNOT ladder."""
    def to_z(p, q):  # maps P onto Z
        return qsim.hadamard(q) if p == "X" else qsim.rx(math.pi / 2, q)

    def from_z(p, q):
        return qsim.hadamard(q) if p == "X" else qsim.rx(-math.pi / 2, q)

    return [to_z(pa, a), to_z(pb, b), qsim.cnot(a, b), qsim.rz(phi, b), qsim.cnot(a, b),
            from_z(pa, a), from_z(pb, b)]


def decompose_gate(op: qsim.GateOp) -> list[qsim.GateOp]:
    """Rewrite a gate into x, h, cx, rx, ry, rz (no global phase introduced)."""
    if op.name in PRIMITIVES:
        return [op]
    if op.name == "id":
        return []
    if op.name == "u_xy":
        (t,), (a, b) = op.params, op.targets
        # exp(i t/4 (XX + YY)); XX and YY commute
        return _pauli_pair_rotation("X", "X", -t / 2, a, b) + _pauli_pair_rotation("Y", "Y", -t / 2, a, b)
    if op.name == "u_theta":
        (theta,), (a, b) = op.params, op.targets
        # exp(i theta/2 (X_a Y_b - Y_a X_b)); the two terms commute
        return _pauli_pair_rotation("X", "Y", -theta, a, b) + _pauli_pair_rotation("Y", "X", theta, a, b)
    raise CircuitFormatError(f"no decomposition for gate {op.name!r}")


def decompose(doc: CircuitDocument) -> CircuitDocument:
    out = CircuitDocument(doc.n_qubits, [], doc.name, doc.qubit_labels)
    for ins in doc.instructions:
        if ins.kind == "measure":
            out.instructions.append(ins)
        else:
            out.instructions.extend(gate_instruction(g) for g in decompose_gate(ins.gate()))
    return out


# --- protocol circuits -------------------------------------------------------------

def build_protocol(params: ExperimentParams, protocol: str, theta: float = 0.0) -> CircuitDocument:
    """High-level circuit (with u_xy / u_theta gates) for one protocol."""
    if protocol not in PROTOCOLS:
        raise ValueError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
    doc = CircuitDocument(4, [], protocol, QUBIT_LABELS)
    for g in preparation_gates(params.t_c, params.t_h):
        doc.add(g)
    work = (QUBIT_C, QUBIT_H)
    if protocol == "tpm":
        doc.measure("m0", work)
        doc.add(qsim.u_theta(theta, work))
        doc.measure("m1", work)
    else:
        if protocol == "qq_final":
            doc.add(qsim.u_theta(theta, work))
        doc.measure("m0", work)
    return doc


@dataclass(frozen=True)
class ExportResult:
    document: CircuitDocument
    decomposed: CircuitDocument
    qasm: str
    max_error: float


def check_reconstruction(intended: CircuitDocument, emitted: CircuitDocument,
                         atol: float = RECONSTRUCTION_ATOL) -> float:
    """Compare every unitary segment; raise :class:`ReconstructionError` on mismatch."""
    if intended.measurement_rounds() != emitted.measurement_rounds():
        raise ReconstructionError("measurement rounds differ between intended and emitted circuit")
    worst = 0.0
    for k, (u, v) in enumerate(zip(intended.segment_unitaries(), emitted.segment_unitaries())):
        err = float(np.max(np.abs(u - v)))
        worst = max(worst, err)
        if err > atol:
            raise ReconstructionError(f"segment {k}: reconstructed unitary off by {err:.3e}")
    return worst


def export_document(doc: CircuitDocument) -> ExportResult:
    decomposed = decompose(doc)
    text = decomposed.to_qasm()
    parsed = parse_qasm(text, doc.name)
    err = check_reconstruction(doc, parsed)
    return ExportResult(doc, decomposed, text, err)


def export_protocol(params: ExperimentParams, protocol: str, theta: float = 0.0) -> ExportResult:
    return export_document(build_protocol(params, protocol, theta))


def export_gate(op: qsim.GateOp) -> tuple[ExportResult, np.ndarray]:
    """Export one gate on its own register; returns the reconstructed matrix too."""
    n = max(op.targets) + 1
    result = export_document(CircuitDocument(n, [gate_instruction(op)], op.name))
    parsed = parse_qasm(result.qasm)
    return result, parsed.segment_unitaries()[0]
