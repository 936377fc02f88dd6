"""Experiment drivers: minimum-evolution-time searches, coupling and
variance scans, and gate-baseline speedup reports.

The minimum evolution time (MET) of a preparation problem is located by an
ascending sweep: pulse durations are attempted from t_min upward in steps
of `resolution`, and the first duration whose best-of-restarts energy error
falls within tolerance is reported.  The sweep resolution is therefore an
intrinsic uncertainty of every MET value.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .device import DeviceSpec
from .engine import PulseSchedule, basis_state, measure_energy, propagate
from .optimize import ParamPacking, n_workers, prepare_ground_state, random_init
from .schwinger import SpinHamiltonian, exact_spectrum


@dataclass(frozen=True)
class MetAttempt:
    duration: float
    best_delta_e: float
    restarts_used: int
    converged: bool
    leakage: dict | None = None


@dataclass
class MetResult:
    """Outcome of one ascending MET sweep.

    met is None when no attempted duration converged before t_max; the
    attempt log always covers every duration tried, in ascending order.
    """

    met: float | None
    resolution: float
    tol: float
    attempts: list
    sem: float | None = None

    @property
    def found(self) -> bool:
        return self.met is not None

    def __post_init__(self):
        ts = [a.duration for a in self.attempts]
        if ts != sorted(ts):
            raise ValueError("attempt log must be ascending in duration")
        if self.met is not None:
            conv = [a.duration for a in self.attempts if a.converged]
            if not conv or min(conv) != self.met:
                raise ValueError("met must be the smallest converged attempt")


def find_met(spec: DeviceSpec, ham: SpinHamiltonian, init_label: str,
             t_min: float = 10.0, t_max: float = 200.0,
             resolution: float = 0.5, tol: float = 1e-3,
             restarts: int = 10, seed: int = 42, n_segments: int = 100,
             substep: float | None = None, maxiter: int = 500,
             progress=None) -> MetResult:
    """Ascending MET sweep from t_min to t_max in steps of `resolution`.

    Every attempted duration runs a full multi-start optimization (stopping
    early within a duration once tolerance is reached); the sweep stops at
    the first converged duration.  Returns met=None when nothing converges
    by t_max.
    """
    if not t_min < t_max:
        raise ValueError(f"need t_min < t_max, got {t_min} >= {t_max}")
    if resolution < spec.pulse_resolution:
        raise ValueError(
            f"sweep resolution {resolution} below device pulse resolution "
            f"{spec.pulse_resolution}"
        )
    exact = float(exact_spectrum(ham, k=1)[0][0])
    attempts = []
    n_steps = int(math.floor((t_max - t_min) / resolution + 1e-9))
    for k in range(n_steps + 1):
        T = t_min + k * resolution
        res = prepare_ground_state(
            spec, ham, T, init_label, n_segments=n_segments,
            restarts=restarts, seed=seed, tol=tol, substep=substep,
            maxiter=maxiter, stop_on_success=True, exact_energy=exact,
        )
        att = MetAttempt(T, float(res.delta_e), len(res.restarts),
                         bool(res.delta_e <= tol), leakage=res.leakage)
        attempts.append(att)
        if progress is not None:
            progress(att)
        if att.converged:
            return MetResult(T, resolution, tol, attempts)
    return MetResult(None, resolution, tol, attempts)


def repeated_met(spec, ham, init_label, repeats: int = 10, seed: int = 42,
                 **kwargs) -> MetResult:
    """Repeat the MET search with independent seed streams and aggregate.

    Returns the mean MET with the standard error over repeats in `sem`;
    the attempt log is the first repeat's.  Failed repeats are excluded
    from the mean but leave a None-met result if all fail.
    """
    runs = [
        find_met(spec, ham, init_label, seed=seed + 1000 * r, **kwargs)
        for r in range(repeats)
    ]
    mets = [r.met for r in runs if r.found]
    if not mets:
        return replace(runs[0], sem=None)
    sem = float(np.std(mets, ddof=1) / math.sqrt(len(mets))) if len(mets) > 1 else 0.0
    return MetResult(float(np.mean(mets)), runs[0].resolution, runs[0].tol,
                     runs[0].attempts, sem=sem)


@dataclass
class ScanGrid:
    """Complete rectangular grid of scan results.

    axes maps axis name -> tuple of values; cells maps a tuple of axis
    values (in axes-key order) -> payload dict.  validate() enforces that
    no cell of the cartesian product is missing.
    """

    axes: dict
    cells: dict = field(default_factory=dict)

    def validate(self) -> None:
        keys = list(self.axes)
        want = 1
        for k in keys:
            want *= len(self.axes[k])
        if len(self.cells) != want:
            raise ValueError(
                f"grid incomplete: {len(self.cells)} cells, expected {want}"
            )
        for combo in np.ndindex(*[len(self.axes[k]) for k in keys]):
            key = tuple(self.axes[keys[i]][c] for i, c in enumerate(combo))
            if key not in self.cells:
                raise ValueError(f"missing cell {key}")

    def column(self, payload_key: str) -> dict:
        return {cell: p[payload_key] for cell, p in self.cells.items()}


def _met_cell(args):
    spec, ham, init_label, repeats, seed, kwargs = args
    return repeated_met(spec, ham, init_label, repeats=repeats, seed=seed,
                        **kwargs)


def coupling_scan(spec: DeviceSpec, ham: SpinHamiltonian, g_values,
                  init_label: str, repeats: int = 10, seed: int = 42,
                  workers: int | None = None, progress=None,
                  **met_kwargs) -> ScanGrid:
    """MET as a function of a common inter-qubit coupling strength.

    Every coupling edge of `spec` is set to the scanned value g (rad/ns);
    qubit frequencies and anharmonicities stay fixed.  Each grid point
    aggregates `repeats` independent searches; the reported uncertainty
    combines the optimization spread with the sweep resolution in
    quadrature.  Points where no MET is found carry met=None rather than
    being dropped.
    """
    g_values = tuple(float(g) for g in g_values)
    jobs = []
    for g in g_values:
        spec_g = replace(
            spec, couplings=tuple((i, j, g) for i, j, _ in spec.couplings)
        )
        jobs.append((spec_g, ham, init_label, repeats, seed, met_kwargs))
    nw = n_workers() if workers is None else workers
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            results = list(pool.map(_met_cell, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_met_cell(job))
            if progress is not None:
                progress(job[0], results[-1])
    grid = ScanGrid(axes={"coupling": g_values})
    for g, res in zip(g_values, results):
        err = None
        if res.found:
            spread = res.sem if res.sem else 0.0
            err = math.hypot(spread, res.resolution)
        grid.cells[(g,)] = {"met": res.met, "met_err": err,
                            "sem": res.sem, "resolution": res.resolution}
    grid.validate()
    return grid


def met_monotone_decreasing(grid: ScanGrid, slack: float = 0.0) -> bool:
    """True when MET does not increase as the coupling grows (within slack =
    summed per-point uncertainties)."""
    gs = sorted(grid.axes["coupling"])
    mets = [grid.cells[(g,)]["met"] for g in gs]
    if any(m is None for m in mets):
        return False
    for lo, hi in zip(mets[1:], mets[:-1]):
        tol = slack if slack else 0.0
        if lo > hi + tol + 1e-12:
            return False
    return True


def variance_scan(spec: DeviceSpec, ham_builder, durations, site_counts,
                  samples: int = 100, segments: int = 100, seed: int = 42,
                  substep: float | None = None, levels: int | None = None,
                  progress=None) -> ScanGrid:
    """Variance of the energy objective over uniform random pulse parameters.

    For each (duration, site count) cell, `samples` parameter vectors are
    drawn uniformly from the bounds box of the default packing (amplitudes
    plus one detuning per qubit, N*(segments+1) parameters) and the
    variance of the measured energy is recorded.  ham_builder(n_sites)
    must return the target SpinHamiltonian.
    """
    durations = tuple(float(T) for T in durations)
    site_counts = tuple(int(n) for n in site_counts)
    grid = ScanGrid(axes={"duration": durations, "sites": site_counts})
    for n in site_counts:
        sub = spec.restrict(n, levels=levels) if n <= spec.n_qubits else None
        if sub is None:
            raise ValueError(f"preset has {spec.n_qubits} qubits, need {n}")
        ham = ham_builder(n)
        for T in durations:
            n_seg = segments
            if T / n_seg < sub.pulse_resolution * (1 - 1e-9):
                n_seg = max(1, int(np.floor(T / sub.pulse_resolution)))
            packing = ParamPacking(n, n_seg)
            rng = np.random.default_rng([seed, n, int(round(T * 1000))])
            psi0 = basis_state("0" * n, sub)
            energies = np.empty(samples)
            for s in range(samples):
                x = random_init(packing, sub, rng)
                sched = packing.unpack(x, T)
                psi = propagate(sub, sched, psi0, substep=substep)
                energies[s] = measure_energy(psi, ham, sub)
            grid.cells[(T, n)] = {
                "variance": float(np.var(energies)),
                "mean": float(np.mean(energies)),
                "n_params": packing.n_params,
            }
            if progress is not None:
                progress(T, n, grid.cells[(T, n)])
    grid.validate()
    return grid


@dataclass(frozen=True)
class SpeedupRow:
    baseline: str
    baseline_ns: float
    ratio_with_prep: float
    ratio_pulse_only: float


@dataclass
class SpeedupReport:
    met_ns: float
    prep_ns: float
    rows: list

    @property
    def total_ns(self) -> float:
        return self.met_ns + self.prep_ns


def speedup_report(met_ns: float, init_label: str, baselines: dict,
                   x_gate_ns: float = 71.0) -> SpeedupReport:
    """Compare pulse-level preparation time against gate-level baselines.

    The pulse total adds one X-gate time per '1' bit of the initial label.
    Both ratio conventions are reported: baseline / (met + prep) and
    baseline / met, since published comparisons mix the two.
    """
    if not baselines:
        raise ValueError("no baselines given")
    prep = x_gate_ns * init_label.count("1")
    rows = [
        SpeedupRow(name, float(ns), float(ns) / (met_ns + prep),
                   float(ns) / met_ns)
        for name, ns in baselines.items()
    ]
    return SpeedupReport(met_ns=float(met_ns), prep_ns=prep, rows=rows)
