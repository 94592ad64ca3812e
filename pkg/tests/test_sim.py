import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_matrix
from qcard import sim
from qcard.errors import ConfigurationError, UsageError
from qcard.sim import Gate, StateVector


def random_state(rng, n):
    return sim.haar_random_state(n, rng)


def all_gates(n, rng):
    gates = []
    for q in range(n):
        gates.append(Gate("X", q))
        for kind in ("RX", "RY", "RZ"):
            gates.append(Gate(kind, q, angle=float(rng.uniform(-2 * np.pi, 2 * np.pi))))
        for c in range(n):
            if c != q:
                gates.append(Gate("CY", q, control=c))
                gates.append(Gate("CNOT", q, control=c))
    return gates


@pytest.mark.parametrize("n", [1, 2, 6])
def test_init_zero(n):
    state = sim.init_zero(n)
    expected = np.zeros(2**n)
    expected[0] = 1
    np.testing.assert_array_equal(state.amps, expected)


@pytest.mark.parametrize("n", [0, 13, -1])
def test_init_zero_range(n):
    with pytest.raises(ConfigurationError):
        sim.init_zero(n)


def test_x_on_zero_gives_one():
    out = sim.apply_gate(sim.init_zero(1), Gate("X", 0))
    np.testing.assert_array_equal(out.amps, [0, 1])


def test_ry_pi():
    out = sim.apply_gate(sim.init_zero(1), Gate("RY", 0, angle=math.pi))
    np.testing.assert_allclose(np.abs(out.amps), [0, 1], atol=1e-15)


def test_cy_with_control_off_is_identity(rng):
    # control qubit 1 in |0>: prepare an arbitrary state on qubit 0 only
    state = sim.run([Gate("RY", 0, angle=0.7), Gate("RZ", 0, angle=1.1)], 2)
    out = sim.apply_gate(state, Gate("CY", 0, control=1))
    np.testing.assert_allclose(out.amps, state.amps, atol=1e-15)


def test_cnot_on_10_gives_11():
    # |10>: qubit 1 set, index 2; control qubit 1 flips qubit 0 -> |11>, index 3
    state = StateVector(2, [0, 0, 1, 0])
    out = sim.apply_gate(state, Gate("CNOT", 0, control=1))
    np.testing.assert_array_equal(out.amps, [0, 0, 0, 1])


def test_qubit_order_lsb():
    out = sim.apply_gate(sim.init_zero(3), Gate("X", 0))
    assert np.argmax(np.abs(out.amps)) == 1
    out = sim.apply_gate(sim.init_zero(3), Gate("X", 2))
    assert np.argmax(np.abs(out.amps)) == 4


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_gates_match_dense_matrices(n, rng):
    for gate in all_gates(n, rng):
        state = random_state(rng, n)
        out = sim.apply_gate(state, gate)
        np.testing.assert_allclose(out.amps, dense_matrix(gate, n) @ state.amps, atol=1e-12)


def test_apply_gate_does_not_mutate_input(rng):
    state = random_state(rng, 3)
    before = state.amps.copy()
    sim.apply_gate(state, Gate("CY", 2, control=0))
    np.testing.assert_array_equal(state.amps, before)


def test_probabilities():
    np.testing.assert_array_equal(sim.probabilities(StateVector(1, [1, 0])), [1, 0])
    half = StateVector(1, [1 / math.sqrt(2), 1 / math.sqrt(2)])
    np.testing.assert_allclose(sim.probabilities(half), [0.5, 0.5], atol=1e-15)


def test_rx_half_pi_probabilities():
    # cos^2(pi/4) = sin^2(pi/4) = 1/2
    out = sim.apply_gate(sim.init_zero(1), Gate("RX", 0, angle=math.pi / 2))
    np.testing.assert_allclose(sim.probabilities(out), [0.5, 0.5], atol=1e-15)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="RX", target=0),
        dict(kind="RX", target=0, control=1, angle=0.1),
        dict(kind="CY", target=0),
        dict(kind="CNOT", target=1, control=1),
        dict(kind="X", target=0, angle=1.0),
        dict(kind="H", target=0),
    ],
)
def test_gate_invariants(kwargs):
    with pytest.raises(UsageError):
        Gate(**kwargs)


def test_index_out_of_range():
    with pytest.raises(UsageError):
        sim.apply_gate(sim.init_zero(2), Gate("X", 2))
    with pytest.raises(UsageError):
        sim.apply_gate(sim.init_zero(2), Gate("CNOT", 0, control=5))


def test_haar_deterministic():
    a = sim.haar_random_state(3, 42)
    b = sim.haar_random_state(3, 42)
    np.testing.assert_array_equal(a.amps, b.amps)
    assert abs(a.norm() - 1) < 1e-10


def test_haar_single_qubit_marginal_mean():
    rng = np.random.default_rng(7)
    p0 = [sim.probabilities(sim.haar_random_state(1, rng))[0] for _ in range(10_000)]
    assert abs(np.mean(p0) - 0.5) < 0.02


def test_unitarity_many_states(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        gates = all_gates(n, rng)
        gate = gates[int(rng.integers(len(gates)))]
        out = sim.apply_gate(random_state(rng, n), gate)
        assert abs(out.norm() - 1) < 1e-10


angles = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(theta=angles, seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4), data=st.data())
def test_involutions(theta, seed, n, data):
    q = data.draw(st.integers(0, n - 1))
    state = sim.haar_random_state(n, seed)
    twice = sim.run([Gate("X", q), Gate("X", q)], n, state)
    np.testing.assert_allclose(twice.amps, state.amps, atol=1e-10)
    back = sim.run([Gate("RX", q, angle=theta), Gate("RX", q, angle=-theta)], n, state)
    np.testing.assert_allclose(back.amps, state.amps, atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(a=angles, b=angles, seed=st.integers(0, 2**32 - 1))
def test_rz_composition(a, b, seed):
    state = sim.haar_random_state(2, seed)
    two = sim.run([Gate("RZ", 1, angle=a), Gate("RZ", 1, angle=b)], 2, state)
    one = sim.apply_gate(state, Gate("RZ", 1, angle=a + b))
    np.testing.assert_allclose(two.amps, one.amps, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(["CY", "CNOT"]))
def test_control_inactive_on_zero(seed, kind):
    # qubit 2 stays |0>; arbitrary state on qubits 0 and 1
    rng = np.random.default_rng(seed)
    prep = [Gate(k, q, angle=float(rng.uniform(-4, 4))) for q in (0, 1) for k in ("RY", "RZ", "RX")]
    prep.append(Gate("CNOT", 1, control=0))
    state = sim.run(prep, 3)
    for target in (0, 1):
        out = sim.apply_gate(state, Gate(kind, target, control=2))
        np.testing.assert_allclose(out.amps, state.amps, atol=1e-10)


def test_batched_kernel_matches_single(rng):
    states = np.stack([random_state(rng, 3).amps for _ in range(5)], axis=1)
    angles = rng.uniform(-3, 3, size=5)
    for kind in ("RX", "RY", "RZ"):
        batch = states.copy()
        sim.apply_rotation(batch, kind, 1, 3, angles)
        for i in range(5):
            single = sim.apply_gate(StateVector(3, states[:, i]), Gate(kind, 1, angle=float(angles[i])))
            np.testing.assert_allclose(batch[:, i], single.amps, atol=1e-15)
