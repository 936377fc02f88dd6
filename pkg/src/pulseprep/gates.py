"""Gate-level reference circuits and their execution-time accounting.

Two baseline ansaetze are built here: a first-order product-formula layer
of the spin Hamiltonian (each exponential factor mapped exactly to
elementary gates) and the strongly entangling layer (per-qubit RZ RY RZ
followed by a ring of neighbor CNOTs).  Circuits carry an as-soon-as-
possible layering (two gates share a layer iff their qubit supports are
disjoint; no gate-commutation analysis), which yields the depth and the
parallel single-qubit-gate counts.

Durations price two-qubit gates serially (each occupies the device for
its full gate time) and single-qubit gates by parallel layers; this is
the accounting that reproduces the published per-layer execution times.
A critical-path mode where disjoint two-qubit gates overlap is available
for comparison.  SWAP gates inserted for non-adjacent ZZ factors on
nearest-neighbor hardware are excluded from counts and pricing by
default, matching the baseline bookkeeping convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .schwinger import SpinHamiltonian

SINGLE_QUBIT_KINDS = ("RX", "RY", "RZ", "H", "X")
TWO_QUBIT_KINDS = ("CNOT", "SWAP")

_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_Z = np.diag([1.0, -1.0]).astype(complex)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple  # 1-based indices
    angle: float | None = None

    def __post_init__(self):
        if self.kind in SINGLE_QUBIT_KINDS:
            if len(self.qubits) != 1:
                raise ValueError(f"{self.kind} acts on one qubit")
        elif self.kind in TWO_QUBIT_KINDS:
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError(f"{self.kind} needs two distinct qubits")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")

    @property
    def is_two_qubit(self) -> bool:
        return self.kind in TWO_QUBIT_KINDS

    def matrix(self) -> np.ndarray:
        if self.kind == "H":
            return _H.astype(complex)
        if self.kind == "X":
            return _X
        if self.kind == "CNOT":
            return _CNOT
        if self.kind == "SWAP":
            return _SWAP
        half = 0.5 * self.angle
        axis = {"RX": _X, "RY": _Y, "RZ": _Z}[self.kind]
        return np.cos(half) * np.eye(2) - 1j * np.sin(half) * axis


class Circuit:
    """Ordered gate list on `n_qubits` qubits (1-based indices)."""

    def __init__(self, n_qubits: int, gates=()):
        if n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        self.n_qubits = n_qubits
        self.gates: list[Gate] = []
        for g in gates:
            self.append(g)

    def append(self, gate: Gate) -> None:
        if any(not (1 <= q <= self.n_qubits) for q in gate.qubits):
            raise ValueError(f"gate {gate} out of range for {self.n_qubits} qubits")
        self.gates.append(gate)

    def add(self, kind: str, *qubits, angle: float | None = None) -> None:
        self.append(Gate(kind, tuple(qubits), angle))

    # -- counting ----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.gates)

    @property
    def gate_count(self) -> int:
        return len(self.gates)

    @property
    def two_qubit_count(self) -> int:
        return sum(1 for g in self.gates if g.is_two_qubit)

    @property
    def single_qubit_count(self) -> int:
        return sum(1 for g in self.gates if not g.is_two_qubit)

    def layers(self, skip_swaps: bool = False) -> list:
        """Greedy as-soon-as-possible layering; two gates share a layer
        iff their supports are disjoint."""
        busy = [0] * (self.n_qubits + 1)
        out: list[list[Gate]] = []
        for g in self.gates:
            if skip_swaps and g.kind == "SWAP":
                continue
            layer = max(busy[q] for q in g.qubits) + 1
            if layer > len(out):
                out.append([])
            out[layer - 1].append(g)
            for q in g.qubits:
                busy[q] = layer
        return out

    @property
    def depth(self) -> int:
        return len(self.layers())

    def parallel_single_qubit_layers(self, skip_swaps: bool = True) -> int:
        """Number of layers made of single-qubit gates only (a gate
        sharing a layer with a two-qubit gate hides under its time)."""
        return sum(
            1 for layer in self.layers(skip_swaps=skip_swaps)
            if not any(g.is_two_qubit for g in layer)
        )

    # -- serialization -----------------------------------------------------

    def to_text(self) -> str:
        lines = [f"qubits {self.n_qubits}"]
        for g in self.gates:
            parts = [g.kind] + [str(q) for q in g.qubits]
            if g.angle is not None:
                parts.append(repr(float(g.angle)))
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("qubits "):
            raise ValueError("circuit text must start with 'qubits N'")
        circ = cls(int(lines[0].split()[1]))
        for ln in lines[1:]:
            parts = ln.split()
            kind = parts[0]
            if kind in SINGLE_QUBIT_KINDS and kind not in ("H", "X"):
                circ.add(kind, int(parts[1]), angle=float(parts[2]))
            elif kind in ("H", "X"):
                circ.add(kind, int(parts[1]))
            else:
                circ.add(kind, int(parts[1]), int(parts[2]))
        return circ


# ---------------------------------------------------------------------------
# Baseline ansaetze


def _zz_factor(circ: Circuit, m: int, n: int, angle: float,
               topology: str | None) -> None:
    """exp(-i angle/2 Z_m Z_n) via CNOT-RZ-CNOT, with SWAP routing when the
    pair is non-adjacent on a nearest-neighbor device."""
    if topology == "nn" and n - m > 1:
        # Bring n next to m+... route the far qubit inward, one SWAP pair.
        for k in range(n, m + 1, -1):
            circ.add("SWAP", k - 1, k)
        near = m + 1
        circ.add("CNOT", m, near)
        circ.add("RZ", near, angle=angle)
        circ.add("CNOT", m, near)
        for k in range(m + 2, n + 1):
            circ.add("SWAP", k - 1, k)
    else:
        circ.add("CNOT", m, n)
        circ.add("RZ", n, angle=angle)
        circ.add("CNOT", m, n)


def trotter_layer(ham: SpinHamiltonian, theta: float,
                  topology: str | None = None) -> Circuit:
    """One first-order product-formula layer: an exponential factor
    exp(-i theta c P) per Pauli term of `ham`.

    Emission order: neighboring bonds in even-odd (brick-wall) order,
    each bond contributing its XX factor then its YY factor; then the ZZ
    factors; then the single-Z rotations.  Mutually commuting odd bonds
    land in shared layers, which the even-odd order exploits.  ZZ factors
    between non-adjacent qubits get SWAP routing when topology="nn".
    """
    if ham.n_sites > 6:
        raise ValueError("product-formula construction is verification-scale (<= 6 qubits)")
    xx, yy, zz, z1 = {}, {}, [], []
    for coeff, label in ham.terms:
        sup = [(i + 1, c) for i, c in enumerate(label) if c != "I"]
        ops = "".join(c for _, c in sup)
        if ops == "XX":
            xx[(sup[0][0], sup[1][0])] = coeff
        elif ops == "YY":
            yy[(sup[0][0], sup[1][0])] = coeff
        elif ops == "ZZ":
            zz.append(((sup[0][0], sup[1][0]), coeff))
        elif ops == "Z":
            z1.append((sup[0][0], coeff))
        else:
            raise ValueError(f"unsupported term pattern {label!r}")
    circ = Circuit(ham.n_sites)
    for (m, n) in sorted(xx, key=lambda b: (1 - b[0] % 2, b[0])):
        a = 2.0 * theta * xx[(m, n)]
        for q in (m, n):
            circ.add("H", q)
        circ.add("CNOT", m, n)
        circ.add("RZ", n, angle=a)
        circ.add("CNOT", m, n)
        for q in (m, n):
            circ.add("H", q)
        b = 2.0 * theta * yy[(m, n)]
        for q in (m, n):
            circ.add("RX", q, angle=np.pi / 2)
        circ.add("CNOT", m, n)
        circ.add("RZ", n, angle=b)
        circ.add("CNOT", m, n)
        for q in (m, n):
            circ.add("RX", q, angle=-np.pi / 2)
    for (m, n), coeff in sorted(zz):
        _zz_factor(circ, m, n, 2.0 * theta * coeff, topology)
    for q, coeff in sorted(z1):
        circ.add("RZ", q, angle=2.0 * theta * coeff)
    return circ


def strongly_entangling_layer(n_qubits: int, angles) -> Circuit:
    """Per-qubit RZ(a) RY(b) RZ(c) followed by the CNOT ring
    CNOT[i, i mod N + 1] (two qubits give both directions)."""
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (n_qubits, 3):
        raise ValueError(f"angles must have shape ({n_qubits}, 3)")
    if n_qubits < 2:
        raise ValueError("need at least two qubits")
    circ = Circuit(n_qubits)
    for col in range(3):
        kind = ("RZ", "RY", "RZ")[col]
        for q in range(1, n_qubits + 1):
            circ.add(kind, q, angle=float(angles[q - 1, col]))
    for q in range(1, n_qubits + 1):
        circ.add("CNOT", q, q % n_qubits + 1)
    return circ


# ---------------------------------------------------------------------------
# Duration accounting


@dataclass(frozen=True)
class GateTimeTable:
    single_qubit_ns: float
    two_qubit_ns: float
    swap_ns: float | None = None  # defaults to 3 two-qubit gates

    def __post_init__(self):
        if self.single_qubit_ns <= 0 or self.two_qubit_ns <= 0:
            raise ValueError("gate times must be positive")

    @classmethod
    def from_device(cls, spec) -> "GateTimeTable":
        return cls(spec.single_qubit_gate_ns, spec.two_qubit_gate_ns)

    def time_of(self, gate: Gate) -> float:
        if gate.kind == "SWAP":
            return self.swap_ns if self.swap_ns is not None else 3 * self.two_qubit_ns
        return self.two_qubit_ns if gate.is_two_qubit else self.single_qubit_ns


def circuit_duration(circuit: Circuit, table: GateTimeTable,
                     mode: str = "serial_two_qubit",
                     include_swaps: bool = False) -> float:
    """Wall-clock estimate in ns.

    serial_two_qubit (default): every as-soon-as-possible layer costs one
    single-qubit gate time, and every two-qubit gate extends its layer by
    (two-qubit time - single-qubit time), so two-qubit gates never
    overlap each other.  critical_path: disjoint gates overlap freely and
    the longest per-qubit chain of gate times is returned.
    """
    if mode == "serial_two_qubit":
        layers = circuit.layers(skip_swaps=not include_swaps)
        total = len(layers) * table.single_qubit_ns
        for layer in layers:
            for g in layer:
                if g.is_two_qubit:
                    total += table.time_of(g) - table.single_qubit_ns
        return total
    if mode == "critical_path":
        finish = np.zeros(circuit.n_qubits + 1)
        for g in circuit.gates:
            if g.kind == "SWAP" and not include_swaps:
                continue
            t = max(finish[q] for q in g.qubits) + table.time_of(g)
            for q in g.qubits:
                finish[q] = t
        return float(np.max(finish))
    raise ValueError(f"unknown duration mode {mode!r}")


# ---------------------------------------------------------------------------
# Exact statevector application


def _apply_gate(state: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    psi = state.reshape((2,) * n)
    axes = [q - 1 for q in gate.qubits]
    mat = gate.matrix()
    if len(axes) == 1:
        psi = np.tensordot(mat, psi, axes=([1], [axes[0]]))
        psi = np.moveaxis(psi, 0, axes[0])
    else:
        mat = mat.reshape(2, 2, 2, 2)
        psi = np.tensordot(mat, psi, axes=([2, 3], axes))
        psi = np.moveaxis(psi, [0, 1], axes)
    return psi.reshape(-1)


def simulate_circuit(circuit: Circuit, state: np.ndarray) -> np.ndarray:
    """Apply the circuit exactly to a statevector (qubit 1 = leftmost bit)."""
    state = np.asarray(state, dtype=complex)
    if state.shape != (2 ** circuit.n_qubits,):
        raise ValueError("state dimension mismatch")
    for g in circuit.gates:
        state = _apply_gate(state, g, circuit.n_qubits)
    return state


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    dim = 2 ** circuit.n_qubits
    cols = [simulate_circuit(circuit, np.eye(dim)[:, k]) for k in range(dim)]
    return np.column_stack(cols)
