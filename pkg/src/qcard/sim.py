"""Dense statevector simulator for the handful of gates the circuits need.

Qubit ``q`` is bit ``q`` of the basis-state index (qubit 0 is the least
significant bit), so for two qubits ``|q1 q0>`` the index of ``|10>`` is 2.

The kernels at the bottom work on amplitude arrays whose first axis is the
basis-state index and whose trailing axes are a batch; the training engine
uses them to push thousands of shifted circuits through one gate at a time. ``apply_gate`` is the
single-state convenience wrapper around them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, UsageError

MAX_QUBITS = 12

ROTATIONS = frozenset({"RX", "RY", "RZ"})
CONTROLLED = frozenset({"CY", "CNOT"})
GATE_KINDS = ROTATIONS | CONTROLLED | {"X"}


@dataclass(frozen=True)
class Gate:
    kind: str
    target: int
    control: int | None = None
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise UsageError(f"unknown gate kind {self.kind!r}")
        if (self.control is not None) != (self.kind in CONTROLLED):
            raise UsageError(f"{self.kind} gate: control given iff the gate is controlled")
        if (self.angle is not None) != (self.kind in ROTATIONS):
            raise UsageError(f"{self.kind} gate: angle given iff the gate is a rotation")
        if self.control is not None and self.control == self.target:
            raise UsageError(f"{self.kind} gate: control and target are both qubit {self.target}")

    def qubits(self) -> tuple[int, ...]:
        return (self.target,) if self.control is None else (self.control, self.target)


@dataclass
class StateVector:
    n_qubits: int
    amps: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=np.complex128)
        if self.amps.shape != (1 << self.n_qubits,):
            raise UsageError(
                f"{self.n_qubits}-qubit state needs {1 << self.n_qubits} amplitudes, got shape {self.amps.shape}"
            )

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amps, self.amps).real))

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amps.copy())


def _check_n_qubits(n_qubits: int) -> None:
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")


def init_zero(n_qubits: int) -> StateVector:
    _check_n_qubits(n_qubits)
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Return ``U @ state`` for the gate's unitary. The input is left untouched."""
    for q in gate.qubits():
        if not 0 <= q < state.n_qubits:
            raise UsageError(f"{gate.kind} gate touches qubit {q} of a {state.n_qubits}-qubit state")
    amps = state.amps.copy()
    if gate.kind in ROTATIONS:
        apply_rotation(amps, gate.kind, gate.target, state.n_qubits, gate.angle)
    elif gate.kind == "X":
        apply_x(amps, gate.target, state.n_qubits)
    else:
        apply_controlled(amps, gate.kind, gate.control, gate.target, state.n_qubits)
    return StateVector(state.n_qubits, amps)


def run(gates, n_qubits: int, state: StateVector | None = None) -> StateVector:
    """Apply ``gates`` in order, starting from ``|0...0>`` unless a state is given."""
    state = init_zero(n_qubits) if state is None else state
    for gate in gates:
        state = apply_gate(state, gate)
    return state


def probabilities(state: StateVector) -> np.ndarray:
    return np.abs(state.amps) ** 2


def fidelity(a: StateVector, b: StateVector) -> float:
    return float(abs(np.vdot(a.amps, b.amps)) ** 2)


def haar_random_state(n_qubits: int, rng_seed) -> StateVector:
    """Haar-distributed pure state: i.i.d. complex Gaussian amplitudes, normalized.

    ``rng_seed`` may be an integer or an existing ``numpy.random.Generator``.
    """
    _check_n_qubits(n_qubits)
    rng = np.random.default_rng(rng_seed)
    return StateVector(n_qubits, haar_random_amplitudes(n_qubits, 1, rng)[0])


def haar_random_amplitudes(n_qubits: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    dim = 1 << n_qubits
    amps = rng.standard_normal((samples, dim)) + 1j * rng.standard_normal((samples, dim))
    amps /= np.linalg.norm(amps, axis=1, keepdims=True)
    return amps


# Batched kernels. ``amps`` has shape (2**n, ...): the basis-state index comes
# first and any batch axes trail it, so the inner loops run over the batch.
# Arrays are updated in place.

def _reshaped(amps: np.ndarray, shape: tuple) -> np.ndarray:
    # shape assignment raises instead of silently copying, so writes reach ``amps``
    view = amps.view()
    view.shape = shape
    return view


def _split(amps: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    trail = amps.shape[1:]
    return _reshaped(amps, (1 << (n_qubits - 1 - qubit), 2, 1 << qubit) + trail)


def apply_rotation(amps: np.ndarray, kind: str, target: int, n_qubits: int, angle) -> None:
    """Half-angle rotation about x, y or z. ``angle`` broadcasts against the batch axes."""
    view = _split(amps, target, n_qubits)
    half = np.asarray(angle, dtype=np.float64) / 2.0
    a0 = view[:, 0]
    a1 = view[:, 1]
    if kind == "RZ":
        phase = np.exp(-1j * half)
        a0 *= phase
        a1 *= phase.conj()
        return
    c = np.cos(half).astype(np.complex128)
    if kind == "RX":
        s = -1j * np.sin(half)
        new0 = c * a0 + s * a1
        new1 = s * a0 + c * a1
    elif kind == "RY":
        s = np.sin(half).astype(np.complex128)
        new0 = c * a0 - s * a1
        new1 = s * a0 + c * a1
    else:
        raise UsageError(f"{kind} is not a rotation")
    a0[...] = new0
    a1[...] = new1


def apply_x(amps: np.ndarray, target: int, n_qubits: int) -> None:
    view = _split(amps, target, n_qubits)
    view[...] = view[:, ::-1].copy()


def apply_controlled(amps: np.ndarray, kind: str, control: int, target: int, n_qubits: int) -> None:
    """CNOT or CY: act on ``target`` only where ``control`` reads 1."""
    view = _reshaped(amps, (2,) * n_qubits + amps.shape[1:])
    c_axis = n_qubits - 1 - control
    t_axis = n_qubits - 1 - target

    def index(c, t):
        idx = [slice(None)] * view.ndim
        idx[c_axis], idx[t_axis] = c, t
        return tuple(idx)

    a0 = view[index(1, 0)].copy()
    a1 = view[index(1, 1)].copy()
    if kind == "CNOT":
        view[index(1, 0)] = a1
        view[index(1, 1)] = a0
    elif kind == "CY":
        view[index(1, 0)] = -1j * a1
        view[index(1, 1)] = 1j * a0
    else:
        raise UsageError(f"{kind} is not a controlled gate")
