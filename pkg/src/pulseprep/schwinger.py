"""Lattice Schwinger model as a spin Hamiltonian.

After gauge fixing, staggered fermions, and a Jordan-Wigner transformation,
the model on N sites with open boundaries becomes a qubit Hamiltonian

    H = H_ZZ + H_pm + H_Z

with an asymmetric long-range ZZ interaction

    H_ZZ = (J/2) sum_{m=1}^{N-2} sum_{n=m+1}^{N-1} (N - n) Z_m Z_n,
    J = e^2 a / 2,

a staggered nearest-neighbour hopping term

    H_pm = sum_{n=1}^{N-1} c_n (X_n X_{n+1} + Y_n Y_{n+1}) / 2,
    c_n = 1/(2a) - (-1)^n m sin(theta) / 2,

(the 1/2 is the usual sigma+ sigma- + h.c. normalization of the kinetic
term), and a staggered mass plus background term

    H_Z = (m/2) cos(theta) sum_{n=1}^{N} (-1)^n Z_n
          - (J/2) sum_{n=1}^{N-1} (n mod 2) sum_{l=1}^{n} Z_l.

Sites are 1-based and site 1 maps to the leftmost bit of a basis label, so
for N=3 the basis state |100> has site 1 excited.  The hopping conserves the
number of excited sites, so eigenstates live in fixed-excitation sectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Dense diagonalization guard: 2^12 = 4096 is the largest dimension handled.
MAX_DENSE_SITES = 12

_PAULI_OK = frozenset("IXYZ")


@dataclass(frozen=True)
class SchwingerParams:
    """Physical parameters: sites, fermion mass, lattice spacing, topological
    angle (radians), and electric charge."""

    n_sites: int
    mass: float = 0.5
    spacing: float = 0.1
    theta: float = 0.5
    charge: float = 0.2

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError(f"need at least 2 sites, got {self.n_sites}")
        if self.spacing <= 0:
            raise ValueError(f"lattice spacing must be positive, got {self.spacing}")

    @property
    def coupling_j(self) -> float:
        return self.charge**2 * self.spacing / 2.0


class SpinHamiltonian:
    """Sum of Pauli strings: a list of (coefficient, label) terms on n_sites
    qubits, with label characters in 'IXYZ' and position k acting on site k+1.
    """

    def __init__(self, n_sites: int, terms):
        self.n_sites = int(n_sites)
        cleaned = []
        for coeff, label in terms:
            if len(label) != self.n_sites or not set(label) <= _PAULI_OK:
                raise ValueError(f"bad Pauli label {label!r} for {self.n_sites} sites")
            cleaned.append((float(coeff), str(label)))
        self.terms = cleaned

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    def matrix(self) -> np.ndarray:
        """Dense Hermitian matrix in the computational basis (qubit 1 is the
        most significant bit)."""
        if self.n_sites > MAX_DENSE_SITES:
            raise ValueError(
                f"dense build limited to {MAX_DENSE_SITES} sites, got {self.n_sites}"
            )
        n, dim = self.n_sites, self.dim
        basis = np.arange(dim)
        H = np.zeros((dim, dim), dtype=complex)
        for coeff, label in self.terms:
            flip = 0
            for k, p in enumerate(label):
                if p in "XY":
                    flip |= 1 << (n - 1 - k)
            amp = np.full(dim, coeff, dtype=complex)
            for k, p in enumerate(label):
                bit = (basis >> (n - 1 - k)) & 1
                if p == "Z":
                    amp *= 1.0 - 2.0 * bit
                elif p == "Y":
                    # Y|0> = i|1>, Y|1> = -i|0>; phase depends on the source bit
                    amp *= 1j * (1.0 - 2.0 * bit)
            H[basis ^ flip, basis] += amp
        return H

    def to_text(self) -> str:
        """One term per line: '<coefficient> <pauli_string>'."""
        return "\n".join(f"{c:.17g} {s}" for c, s in self.terms) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SpinHamiltonian":
        terms = []
        n_sites = None
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            c, label = line.split()
            if n_sites is None:
                n_sites = len(label)
            terms.append((float(c), label))
        if not terms:
            raise ValueError("no terms found")
        return cls(n_sites, terms)


def _label(n_sites: int, ops: dict) -> str:
    return "".join(ops.get(site, "I") for site in range(1, n_sites + 1))


def build_schwinger(params: SchwingerParams) -> SpinHamiltonian:
    """Assemble the spin Hamiltonian term list for the given parameters.

    Terms with zero coefficient are kept out; the constant (identity) part is
    zero for this model so the term list covers H exactly.
    """
    N = params.n_sites
    J = params.coupling_j
    m, a, theta = params.mass, params.spacing, params.theta
    terms = []

    for mm in range(1, N - 1):
        for n in range(mm + 1, N):
            terms.append(((J / 2.0) * (N - n), _label(N, {mm: "Z", n: "Z"})))

    for n in range(1, N):
        c = 1.0 / (2.0 * a) - ((-1.0) ** n) * m * math.sin(theta) / 2.0
        terms.append((c / 2.0, _label(N, {n: "X", n + 1: "X"})))
        terms.append((c / 2.0, _label(N, {n: "Y", n + 1: "Y"})))

    # Per-site Z coefficients: staggered mass plus the cumulative background
    # sum, merged into one term per site.
    zc = np.zeros(N + 1)
    for n in range(1, N + 1):
        zc[n] += (m / 2.0) * math.cos(theta) * ((-1.0) ** n)
    for n in range(1, N):
        if n % 2 == 1:
            for l in range(1, n + 1):
                zc[l] -= J / 2.0
    for n in range(1, N + 1):
        if zc[n] != 0.0:
            terms.append((zc[n], _label(N, {n: "Z"})))

    return SpinHamiltonian(N, terms)


def exact_spectrum(ham: SpinHamiltonian, k: int = 1):
    """Lowest k eigenvalues and eigenvectors by dense diagonalization.

    Returns (energies, vectors) with vectors in columns.  Hermiticity of the
    assembled matrix is checked; degenerate ground spaces come back in eigh's
    ordering.
    """
    H = ham.matrix()
    if not np.allclose(H, H.conj().T, atol=1e-12):
        raise ValueError("assembled matrix is not Hermitian")
    w, V = np.linalg.eigh(H)
    k = min(k, len(w))
    return w[:k], V[:, :k]


def ground_probabilities(ham: SpinHamiltonian, threshold: float = 1e-6) -> dict:
    """Basis-state probabilities of the ground state, as {bitstring: p} for
    entries above threshold."""
    _, V = exact_spectrum(ham, k=1)
    p = np.abs(V[:, 0]) ** 2
    n = ham.n_sites
    return {
        format(b, f"0{n}b"): float(p[b]) for b in np.argsort(-p) if p[b] > threshold
    }


def thermal_observables(ham: SpinHamiltonian, beta: float):
    """Gibbs-ensemble energy, entropy, and free energy at inverse temperature
    beta.

    p_i = exp(-beta E_i)/Z over the full spectrum, E = sum p_i E_i,
    S = -sum p_i ln p_i, F = E - S/beta.  At beta = 0 the distribution is
    uniform and F is undefined (returned as nan).
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    w = np.linalg.eigvalsh(ham.matrix())
    x = -beta * (w - w.min())
    p = np.exp(x)
    p /= p.sum()
    energy = float(p @ w)
    nz = p[p > 0]
    entropy = float(-(nz * np.log(nz)).sum())
    free = energy - entropy / beta if beta > 0 else math.nan
    return energy, entropy, free
