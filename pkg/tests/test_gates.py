"""Gate-level baselines: construction, exactness, counting, pricing."""

import numpy as np
import pytest
from scipy.linalg import expm

from pulseprep.gates import (
    Circuit,
    Gate,
    GateTimeTable,
    circuit_duration,
    circuit_unitary,
    simulate_circuit,
    strongly_entangling_layer,
    trotter_layer,
)
from pulseprep.schwinger import SchwingerParams, build_schwinger

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def kron_pauli(label):
    out = np.array([[1.0 + 0j]])
    for c in label:
        out = np.kron(out, PAULI[c])
    return out


def dense(ham):
    return sum(c * kron_pauli(lbl) for c, lbl in ham.terms)


# -- gate and circuit basics -------------------------------------------------


def test_gate_arity_validation():
    with pytest.raises(ValueError):
        Gate("RX", (1, 2), angle=0.1)
    with pytest.raises(ValueError):
        Gate("CNOT", (1,))
    with pytest.raises(ValueError):
        Gate("CNOT", (2, 2))
    with pytest.raises(ValueError):
        Gate("T", (1,))


def test_gate_matrices_are_unitary():
    gates = [Gate("H", (1,)), Gate("X", (1,)), Gate("CNOT", (1, 2)),
             Gate("SWAP", (1, 2)), Gate("RX", (1,), angle=0.7),
             Gate("RY", (1,), angle=-1.3), Gate("RZ", (1,), angle=2.1)]
    for g in gates:
        m = g.matrix()
        assert np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=1e-12)


def test_rz_is_z_exponential():
    a = 0.83
    want = expm(-0.5j * a * PAULI["Z"])
    assert np.allclose(Gate("RZ", (1,), angle=a).matrix(), want, atol=1e-12)


def test_circuit_range_validation():
    circ = Circuit(2)
    with pytest.raises(ValueError):
        circ.add("RX", 3, angle=0.1)
    with pytest.raises(ValueError):
        Circuit(0)


def test_asap_layering():
    circ = Circuit(3)
    circ.add("H", 1)
    circ.add("H", 2)          # disjoint support: same layer
    circ.add("CNOT", 1, 2)    # waits for both
    circ.add("H", 3)          # free qubit: rides in layer 1
    layers = circ.layers()
    assert [len(l) for l in layers] == [3, 1]
    assert circ.depth == 2
    assert circ.parallel_single_qubit_layers() == 1


def test_text_round_trip():
    circ = Circuit(3)
    circ.add("H", 1)
    circ.add("RZ", 2, angle=-0.12345678901234567)
    circ.add("CNOT", 1, 3)
    circ.add("SWAP", 2, 3)
    back = Circuit.from_text(circ.to_text())
    assert back.n_qubits == 3
    assert [(g.kind, g.qubits, g.angle) for g in back.gates] == \
        [(g.kind, g.qubits, g.angle) for g in circ.gates]
    with pytest.raises(ValueError):
        Circuit.from_text("no header\n")


# -- product-formula layer ---------------------------------------------------


def ordered_factors(ham, theta, circ_order=True):
    """Pauli factors in the circuit's emission order."""
    xx, yy, zz, z1 = {}, {}, [], []
    for coeff, label in ham.terms:
        sup = [(i + 1, c) for i, c in enumerate(label) if c != "I"]
        ops = "".join(c for _, c in sup)
        if ops == "XX":
            xx[(sup[0][0], sup[1][0])] = (coeff, label)
        elif ops == "YY":
            yy[(sup[0][0], sup[1][0])] = (coeff, label)
        elif ops == "ZZ":
            zz.append(((sup[0][0], sup[1][0]), (coeff, label)))
        else:
            z1.append((sup[0][0], (coeff, label)))
    out = []
    for bond in sorted(xx, key=lambda b: (1 - b[0] % 2, b[0])):
        out.append(xx[bond])
        out.append(yy[bond])
    out.extend(t for _, t in sorted(zz))
    out.extend(t for _, t in sorted(z1))
    return out


@pytest.mark.parametrize("n_sites", [2, 3])
def test_trotter_layer_is_exact_factor_product(n_sites):
    ham = build_schwinger(SchwingerParams(n_sites, spacing=0.1))
    theta = 0.3
    circ = trotter_layer(ham, theta)
    want = np.eye(2 ** n_sites, dtype=complex)
    # Circuit order is left-to-right application, so later factors
    # multiply from the left.
    for coeff, label in ordered_factors(ham, theta):
        want = expm(-1j * theta * coeff * kron_pauli(label)) @ want
    assert np.max(np.abs(circuit_unitary(circ) - want)) < 1e-12


def test_trotter_error_quarters_under_theta_halving():
    ham = build_schwinger(SchwingerParams(3, spacing=0.1))
    H = dense(ham)

    def err(theta):
        U = circuit_unitary(trotter_layer(ham, theta))
        return np.linalg.norm(U - expm(-1j * theta * H), 2)

    ratio = err(0.05) / err(0.025)
    assert ratio == pytest.approx(4.0, abs=0.3)


def test_trotter_layer_counts():
    # (sites, topology) -> (gates, swaps, cnots, depth skipping swaps)
    frozen = {
        (2, None): (16, 0, 4, 11),
        (3, None): (34, 0, 10, 24),
        (4, None): (55, 0, 18, 30),
        (4, "nn"): (57, 2, 18, 30),
    }
    for (n, topo), (total, swaps, cnots, depth) in frozen.items():
        ham = build_schwinger(SchwingerParams(n, spacing=0.1))
        circ = trotter_layer(ham, 0.1, topology=topo)
        got_swaps = sum(1 for g in circ.gates if g.kind == "SWAP")
        got_cnots = sum(1 for g in circ.gates if g.kind == "CNOT")
        assert (len(circ), got_swaps, got_cnots,
                len(circ.layers(skip_swaps=True))) == (total, swaps, cnots, depth)


def test_trotter_routing_preserves_unitary_on_qubit_subspace():
    # SWAP routing must leave the implemented map unchanged.
    ham = build_schwinger(SchwingerParams(4, spacing=0.1))
    plain = circuit_unitary(trotter_layer(ham, 0.2))
    routed = circuit_unitary(trotter_layer(ham, 0.2, topology="nn"))
    assert np.max(np.abs(plain - routed)) < 1e-12


def test_trotter_rejects_large_lattices():
    ham = build_schwinger(SchwingerParams(7, spacing=0.1))
    with pytest.raises(ValueError):
        trotter_layer(ham, 0.1)


# -- strongly entangling layer ----------------------------------------------


def test_entangling_layer_zero_angles_is_cnot_ring():
    circ = strongly_entangling_layer(3, np.zeros((3, 3)))
    ring = Circuit(3)
    for q in (1, 2, 3):
        ring.add("CNOT", q, q % 3 + 1)
    assert np.allclose(circuit_unitary(circ), circuit_unitary(ring), atol=1e-12)


def test_entangling_layer_validation():
    with pytest.raises(ValueError):
        strongly_entangling_layer(3, np.zeros((2, 3)))
    with pytest.raises(ValueError):
        strongly_entangling_layer(1, np.zeros((1, 3)))


def test_entangling_layer_counts():
    circ = strongly_entangling_layer(3, np.zeros((3, 3)))
    assert (len(circ), circ.two_qubit_count, circ.depth) == (12, 3, 6)
    circ2 = strongly_entangling_layer(2, np.zeros((2, 3)))
    assert (len(circ2), circ2.two_qubit_count, circ2.depth) == (8, 2, 5)


# -- simulation --------------------------------------------------------------


def test_simulation_bit_order():
    # Qubit 1 is the leftmost bit: X on qubit 1 maps |00> to |10>.
    circ = Circuit(2)
    circ.add("X", 1)
    out = simulate_circuit(circ, np.eye(4)[0])
    assert np.argmax(np.abs(out)) == 2


def test_simulation_cnot():
    circ = Circuit(2)
    circ.add("X", 1)
    circ.add("CNOT", 1, 2)
    out = simulate_circuit(circ, np.eye(4)[0])
    assert np.argmax(np.abs(out)) == 3  # |11>


def test_simulation_dimension_check():
    circ = Circuit(2)
    with pytest.raises(ValueError):
        simulate_circuit(circ, np.zeros(5))


# -- pricing -----------------------------------------------------------------


def test_gate_time_table():
    with pytest.raises(ValueError):
        GateTimeTable(0.0, 400.0)
    tab = GateTimeTable(71.0, 400.0)
    assert tab.time_of(Gate("RZ", (1,), angle=0.1)) == 71.0
    assert tab.time_of(Gate("CNOT", (1, 2))) == 400.0
    assert tab.time_of(Gate("SWAP", (1, 2))) == 1200.0  # 3 two-qubit gates
    assert GateTimeTable(71.0, 400.0, swap_ns=500.0).time_of(
        Gate("SWAP", (1, 2))) == 500.0


def test_duration_modes_on_hand_example():
    # Two CNOTs with disjoint supports share an ASAP layer: serial pricing
    # still charges both gate times; the critical path charges one.
    circ = Circuit(4)
    circ.add("CNOT", 1, 2)
    circ.add("CNOT", 3, 4)
    tab = GateTimeTable(10.0, 100.0)
    assert circuit_duration(circ, tab) == 10.0 + 2 * 90.0
    assert circuit_duration(circ, tab, mode="critical_path") == 100.0
    with pytest.raises(ValueError):
        circuit_duration(circ, tab, mode="parallel")


def test_frozen_layer_durations():
    frozen = [
        (2, 660.0, 3137.0),
        (3, 400.0, 4994.0),
        (4, 400.0, 8052.0),
    ]
    for n, t2, want in frozen:
        ham = build_schwinger(SchwingerParams(n, spacing=0.1))
        circ = trotter_layer(ham, 0.1, topology="nn")
        assert circuit_duration(circ, GateTimeTable(71.0, t2)) == want
    sel3 = strongly_entangling_layer(3, np.zeros((3, 3)))
    assert circuit_duration(sel3, GateTimeTable(71.0, 400.0)) == 1413.0
    sel2 = strongly_entangling_layer(2, np.zeros((2, 3)))
    assert circuit_duration(sel2, GateTimeTable(71.0, 660.0)) == 1533.0


def test_swap_inclusion_raises_cost():
    ham = build_schwinger(SchwingerParams(4, spacing=0.1))
    circ = trotter_layer(ham, 0.1, topology="nn")
    tab = GateTimeTable(71.0, 400.0)
    base = circuit_duration(circ, tab)
    assert circuit_duration(circ, tab, include_swaps=True) > base
