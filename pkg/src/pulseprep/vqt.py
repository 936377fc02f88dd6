"""Pulse-level variational thermal-state preparation.

Two independent pulse ansätze are optimized jointly: the first evolves
|0...0> and its computational-basis distribution p models the ensemble
weights; the second evolves every basis state and supplies the ensemble
energy E = sum_i p_i <i|U2' M U2|i>.  The free energy F = E - S/beta with
the Shannon entropy S(p) is minimized; by the variational principle F is
bounded below by the exact Gibbs free energy at the same beta.

Each qubit's pulse has independent segment amplitudes, one drive
detuning, and one constant drive phase.  For truncations above two
levels, p is the projection onto the qubit subspace (leaked weight is
excluded, which penalizes leakage in the objective).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .device import DeviceSpec
from .engine import (
    ForwardPass,
    PropagationSetup,
    PulseSchedule,
    basis_state,
    embed_operator,
)
from .optimize import (
    ParamPacking,
    _rotated_measurement,
    adjoint_gradient,
    minimize_pulse,
    random_init,
)
from .schwinger import SpinHamiltonian, thermal_observables

_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class VqtConfig:
    """Configuration of a thermal-state optimization at one beta."""

    beta: float
    spec: DeviceSpec
    ham: SpinHamiltonian
    t1: float = 50.0
    t2: float = 50.0
    n_segments: int = 100
    restarts: int = 20
    maxiter: int = 500
    substep: float | None = None

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.t1 <= 0 or self.t2 <= 0:
            raise ValueError("pulse durations must be positive")
        if self.spec.n_qubits != self.ham.n_sites:
            raise ValueError("device and Hamiltonian sizes differ")


@dataclass
class ThermalResult:
    free_energy: float
    energy: float
    entropy: float
    distribution: dict
    schedule1: PulseSchedule
    schedule2: PulseSchedule
    beta: float
    restart_free_energies: list
    exact_free_energy: float
    converged: bool
    wall_time_s: float

    @property
    def f_mean(self) -> float:
        return float(np.mean(self.restart_free_energies))

    @property
    def f_std(self) -> float:
        if len(self.restart_free_energies) < 2:
            return 0.0
        return float(np.std(self.restart_free_energies, ddof=1))


def _qubit_subspace_indices(spec: DeviceSpec) -> np.ndarray:
    """Indices of the all-qubits-in-{0,1} basis states, ordered by bitstring."""
    idx = []
    for b in range(1 << spec.n_qubits):
        bits = format(b, f"0{spec.n_qubits}b")
        state = 0
        for ch in bits:
            state = state * spec.levels + int(ch)
        idx.append(state)
    return np.array(idx)


def ensemble_distribution(schedule1: PulseSchedule, spec: DeviceSpec,
                          substep: float | None = None):
    """Computational-basis distribution of U1|0...0>.

    Returns (probs, leaked) where probs maps bitstring -> probability of
    the corresponding all-{0,1} basis state and leaked is the weight
    outside that subspace (zero when levels == 2).
    """
    from .engine import propagate

    psi0 = basis_state("0" * spec.n_qubits, spec)
    psi = propagate(spec, schedule1, psi0, substep=substep)
    p_full = np.abs(psi.vector) ** 2
    idx = _qubit_subspace_indices(spec)
    probs = {
        format(b, f"0{spec.n_qubits}b"): float(p_full[i])
        for b, i in enumerate(idx)
    }
    return probs, float(1.0 - sum(probs.values()))


def shannon_entropy(p) -> float:
    """-sum p_i ln p_i with 0 ln 0 = 0; accepts a map or an array."""
    vals = np.asarray(list(p.values()) if isinstance(p, dict) else p,
                      dtype=float)
    if np.any(vals < -1e-12):
        raise ValueError("negative probability")
    vals = vals[vals > 0]
    return float(-(vals * np.log(vals)).sum())


def ensemble_energy(p: dict, schedule2: PulseSchedule, spec: DeviceSpec,
                    ham: SpinHamiltonian, substep: float | None = None) -> float:
    """sum_i p_i <i| U2' M U2 |i> over computational bitstrings i."""
    from .engine import measure_energy, propagate

    total = 0.0
    for bits, weight in p.items():
        if weight == 0.0:
            continue
        if len(bits) != spec.n_qubits:
            raise ValueError(f"bitstring {bits!r} does not match {spec.n_qubits} qubits")
        psi = propagate(spec, schedule2, basis_state(bits, spec), substep=substep)
        total += weight * measure_energy(psi, ham, spec)
    return float(total)


class FreeEnergyObjective:
    """F(Theta1, Theta2) = E - S/beta with exact joint gradients.

    The parameter vector is the concatenation of both ansätze in the
    per-qubit-phase packing.  Gradients: dF/dTheta2 is the adjoint of the
    p-weighted batch energy; dF/dTheta1 is the adjoint of <psi1|W|psi1>
    with the frozen effective weights w_i = e_i + (ln p_i + 1)/beta.
    """

    def __init__(self, config: VqtConfig):
        self.config = config
        spec, n = config.spec, config.n_segments
        self.packing = ParamPacking(spec.n_qubits, n, phase_mode="qubit")
        zero = np.zeros(self.packing.n_params)
        probe1 = self.packing.unpack(zero, config.t1)
        probe1.validate(spec)
        self.setup1 = PropagationSetup(spec, probe1, substep=config.substep)
        probe2 = self.packing.unpack(zero, config.t2)
        self.setup2 = PropagationSetup(spec, probe2, substep=config.substep)
        self.psi0 = basis_state("0" * spec.n_qubits, spec).vector.astype(complex)
        self.idx = _qubit_subspace_indices(spec)
        # Basis matrix: one column per computational bitstring.
        dim = spec.dim
        self.basis = np.zeros((dim, len(self.idx)), dtype=complex)
        self.basis[self.idx, np.arange(len(self.idx))] = 1.0
        embedded = embed_operator(config.ham, spec)
        self.m1 = None  # W depends on the current parameters
        self.m2 = _rotated_measurement(embedded, self.setup2)

    @property
    def n_params(self) -> int:
        return 2 * self.packing.n_params

    def bounds(self) -> list:
        return self.packing.bounds(self.config.spec) * 2

    def split(self, x: np.ndarray):
        k = self.packing.n_params
        return x[:k], x[k:]

    def schedules(self, x: np.ndarray):
        x1, x2 = self.split(x)
        return (self.packing.unpack(x1, self.config.t1),
                self.packing.unpack(x2, self.config.t2))

    def _forwards(self, x):
        sched1, sched2 = self.schedules(x)
        fwd1 = ForwardPass(self.setup1, sched1, self.psi0)
        fwd2 = ForwardPass(self.setup2, sched2, self.basis)
        return sched1, sched2, fwd1, fwd2

    def _assemble(self, fwd1, fwd2):
        beta = self.config.beta
        psi1 = fwd1.final
        p = np.abs(psi1[self.idx]) ** 2
        out = fwd2.final
        e_states = np.real(np.einsum("ic,ij,jc->c", out.conj(), self.m2, out))
        energy = float(p @ e_states)
        entropy = shannon_entropy(p)
        free = energy - entropy / beta
        return psi1, p, out, e_states, energy, entropy, free

    def value(self, x: np.ndarray) -> float:
        _, _, fwd1, fwd2 = self._forwards(x)
        return self._assemble(fwd1, fwd2)[-1]

    def value_and_grad(self, x: np.ndarray):
        sched1, sched2, fwd1, fwd2 = self._forwards(x)
        psi1, p, out, e_states, energy, entropy, free = self._assemble(fwd1, fwd2)
        beta = self.config.beta
        # Theta2: seed columns weighted by p
        seed2 = (self.m2 @ out) * p[None, :]
        g2 = adjoint_gradient(self.setup2, sched2, self.packing, fwd2, seed2)
        # Theta1: effective diagonal measurement W in the qubit subspace
        w = e_states + (np.log(np.maximum(p, _LOG_FLOOR)) + 1.0) / beta
        seed1 = np.zeros_like(psi1)
        seed1[self.idx] = w * psi1[self.idx]
        g1 = adjoint_gradient(self.setup1, sched1, self.packing, fwd1, seed1)
        return free, np.concatenate([g1, g2])


def prepare_thermal(config: VqtConfig, seed: int = 42,
                    stop_tol: float | None = None) -> ThermalResult:
    """Multi-restart joint minimization of the free energy.

    Restarts draw independent uniform starts for both ansätze; statistics
    over all restart minima are retained.  The variational bound
    F >= F_exact(beta) is checked on the best result.
    """
    t0 = time.perf_counter()
    obj = FreeEnergyObjective(config)
    bounds = obj.bounds()
    _, _, f_exact = thermal_observables(config.ham, config.beta)

    best = None
    f_restarts = []
    for r in range(config.restarts):
        rng = np.random.default_rng([seed, r])
        x0 = np.concatenate([
            random_init(obj.packing, config.spec, rng),
            random_init(obj.packing, config.spec, rng),
        ])
        res = minimize_pulse(obj.value_and_grad, x0, bounds,
                             maxiter=config.maxiter)
        f_restarts.append(float(res.fun))
        if best is None or res.fun < best.fun:
            best = res
        if stop_tol is not None and best.fun - f_exact <= stop_tol:
            break

    if best.fun < f_exact - 1e-9:
        raise RuntimeError(
            f"variational bound violated: F_opt={best.fun} < F_exact={f_exact}"
        )
    sched1, sched2 = obj.schedules(best.x)
    _, _, fwd1, fwd2 = obj._forwards(best.x)
    _, p, _, e_states, energy, entropy, free = obj._assemble(fwd1, fwd2)
    n = config.spec.n_qubits
    dist = {format(b, f"0{n}b"): float(p[b]) for b in range(len(p))}
    return ThermalResult(
        free_energy=free, energy=energy, entropy=entropy, distribution=dist,
        schedule1=sched1, schedule2=sched2, beta=config.beta,
        restart_free_energies=f_restarts, exact_free_energy=f_exact,
        converged=bool(best.converged), wall_time_s=time.perf_counter() - t0,
    )


def thermal_curve(spec: DeviceSpec, ham: SpinHamiltonian, betas,
                  seed: int = 42, progress=None, **config_kwargs) -> list:
    """Run prepare_thermal over a beta grid; returns one row dict per beta
    with optimized and exact E/S/F plus the restart spread."""
    rows = []
    for beta in betas:
        config = VqtConfig(beta=float(beta), spec=spec, ham=ham, **config_kwargs)
        res = prepare_thermal(config, seed=seed)
        e_exact, s_exact, f_exact = thermal_observables(ham, float(beta))
        row = {
            "beta": float(beta),
            "f_opt": res.free_energy, "f_exact": f_exact,
            "e_opt": res.energy, "e_exact": e_exact,
            "s_opt": res.entropy, "s_exact": s_exact,
            "f_mean": res.f_mean, "f_std": res.f_std,
        }
        rows.append(row)
        if progress is not None:
            progress(row)
    return rows
