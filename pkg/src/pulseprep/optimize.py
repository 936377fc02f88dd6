"""Gradient-based pulse optimization.

Trainable parameters are packed into a flat real vector: all amplitudes
qubit-by-qubit, then the per-qubit detunings, or per-segment phases instead
of detunings when the phase variant is enabled (detunings are then held
fixed).  Objectives are smooth functions of the discrete propagation map,
so gradients are computed by an adjoint pass that backpropagates through
the substep propagators exactly:

    dE/dtheta = sum_s 2 Re <chi_{s+1}| dU_s/dtheta |psi_s>,

with the costate chi marched backwards by the adjoint steps and dU_s
evaluated through the eigendecomposition already produced by the forward
pass (a Loewner-matrix form of the exponential's directional derivative).
A central finite-difference gradient over the same objective serves as an
independent cross-check.  The bounded quasi-Newton core is SciPy's
L-BFGS-B; multi-start restarts draw fresh uniform initial points from the
bounds box with deterministic per-restart seeds.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .device import DeviceSpec
from .engine import (
    DensityMatrix,
    ForwardPass,
    LindbladSetup,
    PropagationSetup,
    PulseSchedule,
    QuantumState,
    _rk4_scan,
    basis_state,
    embed_operator,
    leakage,
    measure_energy,
    propagate,
)
from .schwinger import SpinHamiltonian, exact_spectrum

WORKERS_ENV = "PULSEPREP_WORKERS"


# ---------------------------------------------------------------------------
# Parameter packing


@dataclass(frozen=True)
class ParamPacking:
    """Layout of the flat parameter vector for a schedule geometry.

    phase_mode "none" (default): [Omega_{1,1..n}, ..., Omega_{N,1..n},
    dnu_1, ..., dnu_N], length N*(n+1).  phase_mode "segment" (alias
    use_phases=True): detunings are frozen at fixed_detunings and
    per-segment phases are appended instead: [amps, phi_{1,1..n}, ...],
    length 2*N*n.  phase_mode "qubit": free detunings plus one constant
    drive phase per qubit, [amps, dnu_1..N, phi_1..N], length N*(n+2).
    """

    n_qubits: int
    n_segments: int
    use_phases: bool = False
    fixed_detunings: tuple = ()
    phase_mode: str = "none"

    def __post_init__(self):
        if self.phase_mode not in ("none", "segment", "qubit"):
            raise ValueError(f"unknown phase_mode {self.phase_mode!r}")
        if self.use_phases and self.phase_mode == "none":
            object.__setattr__(self, "phase_mode", "segment")

    @property
    def n_params(self) -> int:
        if self.phase_mode == "segment":
            return 2 * self.n_qubits * self.n_segments
        if self.phase_mode == "qubit":
            return self.n_qubits * (self.n_segments + 2)
        return self.n_qubits * (self.n_segments + 1)

    def unpack(self, x: np.ndarray, duration: float) -> PulseSchedule:
        nq, n = self.n_qubits, self.n_segments
        amps = np.asarray(x[: nq * n], dtype=float).reshape(nq, n)
        if self.phase_mode == "segment":
            phases = np.asarray(x[nq * n:], dtype=float).reshape(nq, n)
            det = np.array(self.fixed_detunings if self.fixed_detunings
                           else np.zeros(nq), dtype=float)
            return PulseSchedule(duration, amps, det, phases=phases)
        det = np.asarray(x[nq * n: nq * (n + 1)], dtype=float).copy()
        if self.phase_mode == "qubit":
            phi = np.asarray(x[nq * (n + 1):], dtype=float)
            phases = np.repeat(phi[:, None], n, axis=1)
            return PulseSchedule(duration, amps, det, phases=phases)
        return PulseSchedule(duration, amps, det)

    def pack(self, schedule: PulseSchedule) -> np.ndarray:
        parts = [schedule.amplitudes.ravel()]
        if self.phase_mode == "segment":
            parts.append(schedule.phases.ravel())
        elif self.phase_mode == "qubit":
            parts.append(schedule.detunings)
            parts.append(schedule.phases[:, 0])
        else:
            parts.append(schedule.detunings)
        return np.concatenate(parts)

    def bounds(self, spec: DeviceSpec) -> list:
        nq, n = self.n_qubits, self.n_segments
        out = [(-spec.max_drive_amp, spec.max_drive_amp)] * (nq * n)
        if self.phase_mode == "segment":
            out += [(-np.pi, np.pi)] * (nq * n)
        elif self.phase_mode == "qubit":
            out += [(-spec.max_detuning, spec.max_detuning)] * nq
            out += [(-np.pi, np.pi)] * nq
        else:
            out += [(-spec.max_detuning, spec.max_detuning)] * nq
        return out

    def gather(self, amp_grad, det_grad, phase_grad) -> np.ndarray:
        if self.phase_mode == "segment":
            return np.concatenate([amp_grad.ravel(), phase_grad.ravel()])
        if self.phase_mode == "qubit":
            return np.concatenate(
                [amp_grad.ravel(), det_grad, phase_grad.sum(axis=1)]
            )
        return np.concatenate([amp_grad.ravel(), det_grad])


def random_init(packing: ParamPacking, spec: DeviceSpec, rng) -> np.ndarray:
    """Uniform draw over the bounds box."""
    lo, hi = np.array(packing.bounds(spec)).T
    return rng.uniform(lo, hi)


def central_fd_gradient(fun, x: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central differences with per-coordinate step 1e-6 * max(1, |x_i|)."""
    g = np.zeros_like(x, dtype=float)
    for i in range(len(x)):
        h = rel_step * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fun(xp) - fun(xm)) / (2.0 * h)
    return g


# ---------------------------------------------------------------------------
# Adjoint gradient through the unitary propagator


def _drive_coeff_phases(setup, schedule, t, qubit):
    return np.exp(1j * setup.drive_phase(schedule, t, qubit))


def adjoint_gradient(setup: PropagationSetup, schedule: PulseSchedule,
                     packing: ParamPacking, fwd: ForwardPass,
                     seed: np.ndarray) -> np.ndarray:
    """Gradient of a real functional whose adjoint seed is chi_K = seed
    (e.g. seed = M psi_K for E = <psi_K|M|psi_K>; matrix-valued states
    trace over columns)."""
    K, h = setup.n_steps, setup.h
    nq, nseg = packing.n_qubits, packing.n_segments
    from .engine import _CHUNK, _unitaries

    n_chunks = (K + _CHUNK - 1) // _CHUNK
    amp_grad = np.zeros((nq, nseg))
    det_grad = np.zeros(nq)
    want_phase = packing.phase_mode != "none"
    want_det = packing.phase_mode != "segment"
    phase_grad = np.zeros((nq, nseg)) if want_phase else None

    # Single reverse sweep: per chunk, scan the costate backwards and
    # immediately contract the gradient terms, so each decomposition is
    # produced once even when the forward pass could not store them.
    chi_next = np.asarray(seed, dtype=complex)
    for ci in range(n_chunks - 1, -1, -1):
        start = ci * _CHUNK
        stop = min(start + _CHUNK, K)
        w, V = fwd.chunk_decomposition(ci)
        U = _unitaries(w, V, h)
        n_blk = stop - start
        chi_blk = np.empty((n_blk,) + chi_next.shape, dtype=complex)
        for k in range(n_blk - 1, -1, -1):
            chi_blk[k] = chi_next
            chi_next = U[k].conj().T @ chi_next
        Vh = V.conj().transpose(0, 2, 1)
        psi_blk = fwd.states[start: stop]
        if chi_blk.ndim == 2:  # vector states: add a column axis
            chi_blk = chi_blk[:, :, None]
            psi_blk = psi_blk[:, :, None]
        x = np.matmul(Vh, chi_blk)
        y = np.matmul(Vh, psi_blk)
        delta = w[:, :, None] - w[:, None, :]
        mean = 0.5 * (w[:, :, None] + w[:, None, :])
        phi = (-1j * h) * np.exp(-1j * h * mean) * np.sinc(h * delta / (2.0 * np.pi))
        G = np.einsum("kpc,kqc->kpq", x.conj(), y) * phi
        W = np.matmul(V, np.matmul(G.transpose(0, 2, 1), Vh))
        t_mid = setup.t_mid[start:stop]
        seg = setup.seg_of_mid[start:stop]
        for q in range(nq):
            A = setup.a_ops[q]
            trA = np.einsum("ab,kba->k", A, W)
            trAd = np.einsum("ab,kba->k", A.conj().T, W)
            ph = _drive_coeff_phases(setup, schedule, t_mid, q)
            per_step = 2.0 * np.real(ph * trA + ph.conj() * trAd)
            np.add.at(amp_grad[q], seg, per_step)
            amp = schedule.amplitudes[q, seg]
            if want_phase:
                g_phi = 2.0 * np.real(1j * amp * (ph * trA - ph.conj() * trAd))
                np.add.at(phase_grad[q], seg, g_phi)
            if want_det:
                # Drive phase is phi - dnu*t (rotating) or (omega - dnu)t
                # + phi (lab); d(phase)/d(dnu) = -t in both frames.
                tfac = -t_mid
                det_grad[q] += np.sum(
                    2.0 * np.real(1j * tfac * amp * (ph * trA - ph.conj() * trAd))
                )
    return packing.gather(amp_grad, det_grad, phase_grad)


# ---------------------------------------------------------------------------
# Objectives


def _rotated_measurement(M: np.ndarray, setup: PropagationSetup) -> np.ndarray:
    """Fold the final back-rotation into the measurement operator."""
    if setup.frame != "rotating":
        return M
    p = setup.to_lab_phase(setup.duration)
    return (p.conj()[:, None] * M) * p[None, :]


class EnergyObjective:
    """<psi(T)| H_embedded |psi(T)> as a function of the packed parameters,
    for unitary dynamics."""

    def __init__(self, spec: DeviceSpec, ham: SpinHamiltonian, duration: float,
                 packing: ParamPacking, init_state: QuantumState,
                 substep: float | None = None, frame: str = "rotating"):
        self.spec = spec
        self.packing = packing
        self.duration = duration
        probe = packing.unpack(np.zeros(packing.n_params), duration)
        probe.validate(spec)
        self.setup = PropagationSetup(spec, probe, substep=substep, frame=frame)
        self.psi0 = init_state.vector.astype(complex)
        self.embedded = embed_operator(ham, spec)
        self.m_rot = _rotated_measurement(self.embedded, self.setup)

    def _forward(self, x):
        schedule = self.packing.unpack(x, self.duration)
        fwd = ForwardPass(self.setup, schedule, self.psi0)
        return schedule, fwd

    def value(self, x: np.ndarray) -> float:
        _, fwd = self._forward(x)
        psi = fwd.final
        return float(np.real(psi.conj() @ (self.m_rot @ psi)))

    def value_and_grad(self, x: np.ndarray):
        schedule, fwd = self._forward(x)
        psi = fwd.final
        value = float(np.real(psi.conj() @ (self.m_rot @ psi)))
        grad = adjoint_gradient(self.setup, schedule, self.packing, fwd,
                                self.m_rot @ psi)
        return value, grad


# ---------------------------------------------------------------------------
# Adjoint gradient through the RK4 Lindblad propagator


class LindbladEnergyObjective:
    """tr(H_embedded rho(T)) under the driven Lindblad equation, with exact
    reverse-mode differentiation of the discrete RK4 map."""

    def __init__(self, spec: DeviceSpec, ham: SpinHamiltonian, duration: float,
                 packing: ParamPacking, init_state,
                 substep: float | None = None):
        self.spec = spec
        self.packing = packing
        self.duration = duration
        probe = packing.unpack(np.zeros(packing.n_params), duration)
        probe.validate(spec)
        self.setup = LindbladSetup(spec, probe, substep=substep)
        if isinstance(init_state, QuantumState):
            rho0 = np.outer(init_state.vector, init_state.vector.conj())
        else:
            rho0 = init_state.matrix
        self.rho0 = rho0.reshape(-1).astype(complex)
        self.embedded = embed_operator(ham, spec)
        m_rot = _rotated_measurement(self.embedded, self.setup.prop)
        self.m_vec = m_rot.T.reshape(-1)

    def _forward(self, x, keep_stages):
        schedule = self.packing.unpack(x, self.duration)
        states, stages = _rk4_scan(self.setup, schedule, self.rho0,
                                   keep_stages=keep_stages)
        return schedule, states, stages

    def value(self, x: np.ndarray) -> float:
        _, states, _ = self._forward(x, keep_stages=False)
        return float(np.real(self.m_vec @ states[-1]))

    def value_and_grad(self, x: np.ndarray):
        schedule, states, stages = self._forward(x, keep_stages=True)
        value = float(np.real(self.m_vec @ states[-1]))
        grad = self._adjoint(schedule, states, stages)
        return value, grad

    def _adjoint(self, schedule, states, stages):
        setup, packing = self.setup, self.packing
        K, h = setup.n_steps, setup.h
        dim = self.spec.dim
        nq, nseg = packing.n_qubits, packing.n_segments
        c = (h / 6.0) * np.array([1.0, 2.0, 2.0, 1.0])

        lam = np.empty((K + 1, dim * dim), dtype=complex)
        lam[K] = self.m_vec
        amp_grad = np.zeros((nq, nseg))
        det_grad = np.zeros(nq)
        want_phase = packing.phase_mode != "none"
        want_det = packing.phase_mode != "segment"
        phase_grad = np.zeros((nq, nseg)) if want_phase else None

        from .engine import _LCHUNK

        for start in range(K - (K % _LCHUNK or _LCHUNK), -1, -_LCHUNK):
            stop = min(start + _LCHUNK, K)
            L = setup.liouvillian_stack(schedule, setup.t_mid[start:stop])
            for k in range(stop - 1, start - 1, -1):
                Gt = L[k - start].T
                lk = lam[k + 1]
                # Adjoint RK4 step on the frozen generator: the transposed
                # degree-4 Taylor polynomial of exp(h G).
                g1 = Gt @ lk
                g2 = Gt @ g1
                g3 = Gt @ g2
                g4 = Gt @ g3
                lam[k] = (lk + h * g1 + (h ** 2 / 2.0) * g2
                          + (h ** 3 / 6.0) * g3 + (h ** 4 / 24.0) * g4)

                # Stage sensitivity vectors for the parameter derivatives.
                v1, v2, v3 = stages[k]
                rho = states[k]
                s4 = c[3] * lk
                s3 = c[2] * lk + h * (Gt @ s4)
                s2 = c[1] * lk + 0.5 * h * (Gt @ s3)
                s1 = c[0] * lk + 0.5 * h * (Gt @ s2)
                r2 = rho + 0.5 * h * v1
                r3 = rho + 0.5 * h * v2
                r4 = rho + h * v3
                # All four stages see the one midpoint-frozen generator, so
                # their contributions sum into a single sensitivity matrix.
                Q = np.zeros((dim, dim), dtype=complex)
                for s_vec, r_vec in ((s1, rho), (s2, r2), (s3, r3), (s4, r4)):
                    Q += (r_vec.reshape(dim, dim) @ s_vec.reshape(dim, dim).T
                          - s_vec.reshape(dim, dim).T @ r_vec.reshape(dim, dim))
                t_p = setup.t_mid[k]
                seg_p = int(setup.prop.seg_of_mid[k])
                for q in range(nq):
                    Aop = setup.prop.a_ops[q]
                    trA = np.einsum("ab,ba->", Aop, Q)
                    trAd = np.einsum("ab,ba->", Aop.conj().T, Q)
                    ph = np.exp(1j * setup.prop.drive_phase(
                        schedule, np.array([t_p]), q))[0]
                    base = -1j * (ph * trA + ph.conj() * trAd)
                    amp_grad[q, seg_p] += np.real(base)
                    amp = schedule.amplitudes[q, seg_p]
                    rot = -1j * (1j * amp * (ph * trA - ph.conj() * trAd))
                    if want_phase:
                        phase_grad[q, seg_p] += np.real(rot)
                    if want_det:
                        det_grad[q] += np.real(-t_p * rot)
        return packing.gather(amp_grad, det_grad, phase_grad)


# ---------------------------------------------------------------------------
# Bounded quasi-Newton with monotone best-seen tracking


@dataclass
class OptResult:
    x: np.ndarray
    fun: float
    n_iter: int
    n_eval: int
    converged: bool
    grad_norm: float
    message: str
    seed: int | None = None


def minimize_pulse(value_and_grad, x0: np.ndarray, bounds,
                   maxiter: int = 500, gtol: float = 1e-8,
                   ftol: float = 1e-10, seed: int | None = None,
                   trace: list | None = None) -> OptResult:
    """L-BFGS-B over the packed parameters; returns the best point ever
    evaluated, not just the final iterate.  When `trace` is a list, one
    (iteration, objective, grad_norm) tuple is appended per evaluation."""
    best = {"fun": np.inf, "x": np.asarray(x0, dtype=float).copy(), "neval": 0}

    def wrapped(x):
        value, grad = value_and_grad(x)
        best["neval"] += 1
        if trace is not None:
            trace.append((best["neval"], float(value),
                          float(np.max(np.abs(grad)))))
        if value < best["fun"]:
            best["fun"] = value
            best["x"] = x.copy()
        return value, grad

    res = _scipy_minimize(
        wrapped, x0, jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": maxiter, "gtol": gtol, "ftol": ftol},
    )
    return OptResult(
        x=best["x"], fun=float(best["fun"]), n_iter=int(res.nit),
        n_eval=best["neval"], converged=bool(res.success),
        grad_norm=float(np.max(np.abs(res.jac))), message=str(res.message),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Ground-state preparation driver


@dataclass
class RunResult:
    """Outcome of a multi-start ground-state preparation."""

    schedule: PulseSchedule
    energy: float
    exact_energy: float
    restarts: list
    duration: float
    init_label: str
    converged: bool
    leakage: dict | None = None
    bang_bang_fraction: float = 0.0
    wall_time_s: float = 0.0
    objective_kind: str = "unitary"
    trace: list | None = None

    @property
    def delta_e(self) -> float:
        return self.energy - self.exact_energy


def n_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def prepare_ground_state(spec: DeviceSpec, ham: SpinHamiltonian,
                         duration: float, init_label: str,
                         n_segments: int = 100, restarts: int = 10,
                         seed: int = 42, tol: float = 1e-3,
                         substep: float | None = None, maxiter: int = 500,
                         use_phases: bool = False, lindblad: bool = False,
                         stop_on_success: bool = True,
                         init_detuning_scale: float = 1.0,
                         exact_energy: float | None = None,
                         keep_trace: bool = False) -> RunResult:
    """Multi-start pulse search for the ground state of `ham` on `spec`.

    Each restart draws a fresh uniform point in the bounds box (seeded by
    (seed, restart index), so results are reproducible and independent of
    any worker pool).  Success is Delta E = E - E0 <= tol; by default the
    search stops at the first converged restart.
    """
    t0 = time.perf_counter()
    if exact_energy is None:
        exact_energy = float(exact_spectrum(ham, k=1)[0][0])
    # Segment count is reduced if the device resolution does not admit it.
    width = duration / n_segments
    if width < spec.pulse_resolution * (1 - 1e-9):
        n_segments = max(1, int(np.floor(duration / spec.pulse_resolution)))
    packing = ParamPacking(spec.n_qubits, n_segments, use_phases=use_phases)
    init = basis_state(init_label, spec)
    if lindblad:
        obj = LindbladEnergyObjective(spec, ham, duration, packing, init,
                                      substep=substep)
    else:
        obj = EnergyObjective(spec, ham, duration, packing, init,
                              substep=substep)
    bounds = packing.bounds(spec)

    results = []
    traces = []
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        x0 = random_init(packing, spec, rng)
        if not use_phases and init_detuning_scale != 1.0:
            x0[packing.n_qubits * n_segments:] *= init_detuning_scale
        tr = [] if keep_trace else None
        res = minimize_pulse(obj.value_and_grad, x0, bounds,
                             maxiter=maxiter, seed=seed, trace=tr)
        res.seed = r
        results.append(res)
        traces.append(tr)
        if stop_on_success and res.fun - exact_energy <= tol:
            break

    best_i = min(range(len(results)), key=lambda i: results[i].fun)
    best = results[best_i]
    schedule = packing.unpack(best.x, duration)
    amp_bound = spec.max_drive_amp
    bb = float(np.mean(np.abs(schedule.amplitudes) >= 0.95 * amp_bound))
    leak = None
    if not lindblad:
        final = propagate(spec, schedule, init, substep=substep)
        leak = leakage(final, spec) if spec.levels > 2 else None
    return RunResult(
        schedule=schedule,
        energy=float(best.fun),
        exact_energy=exact_energy,
        restarts=results,
        duration=duration,
        init_label=init_label,
        converged=bool(best.fun - exact_energy <= tol),
        leakage=leak,
        bang_bang_fraction=bb,
        wall_time_s=time.perf_counter() - t0,
        objective_kind="lindblad" if lindblad else "unitary",
        trace=traces[best_i] if keep_trace else None,
    )
