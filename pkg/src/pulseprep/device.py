"""Coupled-transmon device descriptions and their lab-frame Hamiltonians.

A device is a set of anharmonic oscillators truncated to d levels,

    H_D = sum_i omega_i n_i - sum_i (delta_i/2) adag_i adag_i a_i a_i
          + sum_(i,j) g_ij (adag_i a_j + a_i adag_j),

driven through charge lines (rotating-wave approximation)

    H_C(t) = sum_i Omega_i(t) (exp(+i v_i t) a_i + exp(-i v_i t) adag_i),

where v_i is the drive frequency of qubit i and Delta nu_i = omega_i - v_i
its detuning from the qubit.  All internal frequencies are angular, in
rad/ns; device files store conventional frequencies in GHz/MHz and rates as
inverse microseconds, converted on load.  Qubits are 1-based, matching the
lattice sites they simulate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - version dependent
    import tomli as tomllib

TWO_PI = 2.0 * math.pi

# Drive constraints shared by every device considered here.
MAX_DRIVE_AMP = TWO_PI * 0.020  # rad/ns  (|Omega| <= 2pi x 20 MHz)
MAX_DETUNING = TWO_PI * 1.0  # rad/ns  (|Delta nu| <= 2pi x 1 GHz)

_PRESET_DIR = Path(__file__).parent / "devices"


@dataclass(frozen=True)
class DeviceSpec:
    """Static description of a transmon device.

    omega/delta/couplings are angular frequencies in rad/ns; couplings are
    (i, j, g) with 1-based i < j.  collapse holds per-qubit (Gamma1, Gamma2)
    rates in 1/ns when dissipation data is available, else None.
    """

    name: str
    n_qubits: int
    omega: tuple
    delta: tuple
    couplings: tuple
    levels: int = 4
    pulse_resolution: float = 0.1
    single_qubit_gate_ns: float = 71.0
    two_qubit_gate_ns: float = 400.0
    max_drive_amp: float = MAX_DRIVE_AMP
    max_detuning: float = MAX_DETUNING
    collapse: tuple | None = None

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("need at least one qubit")
        if self.levels not in (2, 3, 4):
            raise ValueError(f"levels must be 2, 3, or 4, got {self.levels}")
        if len(self.omega) != self.n_qubits or len(self.delta) != self.n_qubits:
            raise ValueError("omega/delta length must match n_qubits")
        if any(w <= 0 for w in self.omega):
            raise ValueError("qubit frequencies must be positive")
        seen = set()
        for i, j, g in self.couplings:
            if not (1 <= i < j <= self.n_qubits):
                raise ValueError(f"bad coupling pair ({i}, {j})")
            if (i, j) in seen:
                raise ValueError(f"duplicate coupling pair ({i}, {j})")
            seen.add((i, j))
        if self.collapse is not None and len(self.collapse) != self.n_qubits:
            raise ValueError("collapse rates must be given for every qubit")
        if self.pulse_resolution <= 0:
            raise ValueError("pulse resolution must be positive")

    @property
    def dim(self) -> int:
        return self.levels**self.n_qubits

    def topology(self) -> str:
        pairs = {(i, j) for i, j, _ in self.couplings}
        chain = {(i, i + 1) for i in range(1, self.n_qubits)}
        full = {(i, j) for i in range(1, self.n_qubits) for j in range(i + 1, self.n_qubits + 1)}
        if pairs == full and self.n_qubits > 2:
            return "all_to_all"
        if pairs == chain:
            return "nearest_neighbor"
        return "custom"

    def restrict(self, n_qubits: int, levels: int | None = None) -> "DeviceSpec":
        """Sub-device on qubits 1..n_qubits, keeping couplings inside the
        range (used to run smaller lattices on a larger preset)."""
        if not (1 <= n_qubits <= self.n_qubits):
            raise ValueError(f"cannot restrict {self.n_qubits} qubits to {n_qubits}")
        return replace(
            self,
            name=f"{self.name}[1..{n_qubits}]",
            n_qubits=n_qubits,
            levels=self.levels if levels is None else levels,
            omega=self.omega[:n_qubits],
            delta=self.delta[:n_qubits],
            couplings=tuple(
                (i, j, g) for i, j, g in self.couplings if j <= n_qubits
            ),
            collapse=None if self.collapse is None else self.collapse[:n_qubits],
        )

    def with_levels(self, levels: int) -> "DeviceSpec":
        return replace(self, levels=levels)

    def with_coupling_scale(self, factor: float) -> "DeviceSpec":
        return replace(
            self,
            couplings=tuple((i, j, g * factor) for i, j, g in self.couplings),
        )


def lowering(d: int) -> np.ndarray:
    """Truncated annihilation operator, a = sum sqrt(n) |n-1><n|."""
    return np.diag(np.sqrt(np.arange(1, d)), 1).astype(complex)


def number(d: int) -> np.ndarray:
    return np.diag(np.arange(d)).astype(complex)


def op_on(op: np.ndarray, qubit: int, n_qubits: int, d: int) -> np.ndarray:
    """Embed a single-qudit operator on 1-based `qubit` (qubit 1 is the most
    significant factor of the tensor product)."""
    out = np.array([[1.0 + 0j]])
    for q in range(1, n_qubits + 1):
        out = np.kron(out, op if q == qubit else np.eye(d))
    return out


def device_hamiltonian(spec: DeviceSpec) -> np.ndarray:
    """Lab-frame static Hamiltonian H_D (rad/ns), dense."""
    d, nq = spec.levels, spec.n_qubits
    H = np.zeros((spec.dim, spec.dim), dtype=complex)
    a = lowering(d)
    n_op = number(d)
    anh = n_op @ n_op - n_op  # adag adag a a = n(n-1) on the diagonal
    for q in range(1, nq + 1):
        H += spec.omega[q - 1] * op_on(n_op, q, nq, d)
        H -= 0.5 * spec.delta[q - 1] * op_on(anh, q, nq, d)
    for i, j, g in spec.couplings:
        hop = op_on(a.conj().T, i, nq, d) @ op_on(a, j, nq, d)
        H += g * (hop + hop.conj().T)
    return H


def frame_generator(spec: DeviceSpec) -> np.ndarray:
    """Diagonal of R = sum_i omega_i n_i, the rotating-frame generator."""
    d, nq = spec.levels, spec.n_qubits
    diag = np.zeros(spec.dim)
    for q in range(1, nq + 1):
        diag += spec.omega[q - 1] * np.diag(op_on(number(d), q, nq, d)).real
    return diag


def _convert(raw: dict, name: str) -> DeviceSpec:
    nq = int(raw["n_qubits"])
    omega = tuple(TWO_PI * f for f in raw["omega_ghz"])
    delta = tuple(TWO_PI * f for f in raw["delta_ghz"])
    couplings = tuple(
        (int(i), int(j), TWO_PI * 1e-3 * g) for i, j, g in raw["coupling_mhz"]
    )
    collapse = None
    if "gamma1_inverse_us" in raw:
        g1 = [1.0 / (1e3 * t) for t in raw["gamma1_inverse_us"]]
        g2 = [1.0 / (1e3 * t) for t in raw["gamma2_inverse_us"]]
        collapse = tuple(zip(g1, g2))
    return DeviceSpec(
        name=raw.get("name", name),
        n_qubits=nq,
        omega=omega,
        delta=delta,
        couplings=couplings,
        levels=int(raw.get("levels", 4)),
        pulse_resolution=float(raw.get("pulse_resolution_ns", 0.1)),
        single_qubit_gate_ns=float(raw.get("single_qubit_gate_ns", 71.0)),
        two_qubit_gate_ns=float(raw.get("two_qubit_gate_ns", 400.0)),
        collapse=collapse,
    )


def preset_names() -> list:
    return sorted(p.stem for p in _PRESET_DIR.glob("*.toml"))


def load_device(name_or_path: str) -> DeviceSpec:
    """Load a device file; bare names resolve against the shipped presets."""
    path = Path(name_or_path)
    if not path.suffix:
        path = _PRESET_DIR / f"{name_or_path}.toml"
    if not path.exists():
        raise FileNotFoundError(
            f"no device file {name_or_path!r}; presets: {', '.join(preset_names())}"
        )
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return _convert(raw, path.stem)
