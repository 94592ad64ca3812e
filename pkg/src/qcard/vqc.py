"""Query encoding, the CY-ring ansatz, forward passes and parameter-shift gradients.

Two routes through the same circuit live here. ``encode_query`` /
``build_ansatz`` / ``forward`` produce explicit gate lists and run them on
the reference simulator one gate at a time. ``CircuitEngine`` runs the same
circuit for a whole batch of queries at once and produces the probability
Jacobian with respect to every angle, which is what training needs.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import sim
from .errors import ConfigurationError, WorkloadError
from .sim import Gate

SHIFT = math.pi / 2


@dataclass(frozen=True)
class EncodingSpec:
    """Table ids rotate about x by pi*t/(T+1), selectivities about z by pi*s.

    The table angle stays strictly inside (0, pi). At exactly pi the qubit
    sits on the |1> pole, where the z rotation is only a global phase and
    every selectivity of that table would encode to the same state.
    """

    n_qubits: int
    max_table_id: int

    def __post_init__(self):
        if self.max_table_id < 1:
            raise ConfigurationError(f"max_table_id must be >= 1, got {self.max_table_id}")
        if not 1 <= self.n_qubits <= sim.MAX_QUBITS:
            raise ConfigurationError(f"n_qubits must be in [1, {sim.MAX_QUBITS}], got {self.n_qubits}")


@dataclass(frozen=True)
class AnsatzSpec:
    n_qubits: int
    n_layers: int = 16

    def __post_init__(self):
        if self.n_layers < 1:
            raise ConfigurationError(f"n_layers must be >= 1, got {self.n_layers}")
        if not 1 <= self.n_qubits <= sim.MAX_QUBITS:
            raise ConfigurationError(f"n_qubits must be in [1, {sim.MAX_QUBITS}], got {self.n_qubits}")

    @property
    def n_params(self) -> int:
        return self.n_layers * self.n_qubits * 2


def canonical_slots(slots) -> list[tuple[int, float]]:
    out = sorted((int(t), float(s)) for t, s in slots)
    for (a, _), (b, _) in zip(out, out[1:]):
        if a == b:
            raise WorkloadError(f"table id {a} appears twice in one query")
    return out


def encoding_angles(spec: EncodingSpec, slots) -> np.ndarray:
    """(n_qubits, 2) array of (RX angle, RZ angle); unused qubits stay at 0 (identity)."""
    slots = canonical_slots(slots)
    if len(slots) > spec.n_qubits:
        raise WorkloadError(f"query has {len(slots)} tables but the encoding has {spec.n_qubits} qubits")
    angles = np.zeros((spec.n_qubits, 2))
    for q, (t, s) in enumerate(slots):
        if not 1 <= t <= spec.max_table_id:
            raise WorkloadError(f"table id {t} outside [1, {spec.max_table_id}]")
        if not 0.0 <= s <= 1.0:
            raise WorkloadError(f"selectivity {s} outside [0, 1]")
        angles[q] = (math.pi * t / (spec.max_table_id + 1), math.pi * s)
    return angles


def encode_query(spec: EncodingSpec, slots) -> list[Gate]:
    angles = encoding_angles(spec, slots)
    gates = []
    for q in range(len(canonical_slots(slots))):
        gates.append(Gate("RX", q, angle=float(angles[q, 0])))
        gates.append(Gate("RZ", q, angle=float(angles[q, 1])))
    return gates


def _ansatz_ops(spec: AnsatzSpec):
    """Yield (kind, target, control, param_index) in circuit order."""
    n = spec.n_qubits
    k = 0
    for _ in range(spec.n_layers):
        if n > 1:
            for q in range(n):
                # a 2-qubit ring would visit the same pair twice; that is intended
                yield "CY", (q + 1) % n, q, None
        for q in range(n):
            yield "RY", q, None, k
            yield "RZ", q, None, k + 1
            k += 2


def build_ansatz(spec: AnsatzSpec, params) -> list[Gate]:
    params = np.asarray(params, dtype=np.float64).ravel()
    if params.size != spec.n_params:
        raise ConfigurationError(f"ansatz needs {spec.n_params} parameters, got {params.size}")
    gates = []
    for kind, target, control, k in _ansatz_ops(spec):
        if k is None:
            gates.append(Gate(kind, target, control=control))
        else:
            gates.append(Gate(kind, target, angle=float(params[k])))
    return gates


def init_params(spec: AnsatzSpec, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-math.pi, math.pi, size=spec.n_params)


def forward(enc: list[Gate], ansatz: list[Gate], n_qubits: int) -> np.ndarray:
    state = sim.run(enc, n_qubits)
    state = sim.run(ansatz, n_qubits, state)
    return sim.probabilities(state)


def parameter_shift_grad(enc: list[Gate], spec: AnsatzSpec, params, loss_tail) -> np.ndarray:
    """Gradient of ``loss_tail(probs)`` with respect to every ansatz angle.

    ``loss_tail`` returns ``(loss, dloss_dprobs)``. Each angle's probability
    derivative is (p(theta + pi/2) - p(theta - pi/2)) / 2, exact for rotation
    gates, evaluated on the reference simulator.
    """
    params = np.asarray(params, dtype=np.float64).ravel()
    n = spec.n_qubits
    _, dloss = loss_tail(forward(enc, build_ansatz(spec, params), n))
    dloss = np.asarray(dloss, dtype=np.float64)
    grad = np.empty(spec.n_params)
    for k in range(spec.n_params):
        shifted = params.copy()
        shifted[k] += SHIFT
        p_plus = forward(enc, build_ansatz(spec, shifted), n)
        shifted[k] -= 2 * SHIFT
        p_minus = forward(enc, build_ansatz(spec, shifted), n)
        grad[k] = dloss @ ((p_plus - p_minus) / 2)
    return grad


class CircuitEngine:
    """Batched forward passes and parameter-shift Jacobians for many queries.

    Shifted circuits share their prefix with the unshifted one, so the batch
    for a query starts as the single unshifted state and gains the +/- copies
    for angle ``k`` right before gate ``k``. Every query's Jacobian is
    computed independently of the others, so chunking across threads does not
    change the result.
    """

    # upper bound on complex amplitudes held per chunk
    chunk_elements = 1 << 22

    def __init__(self, encoding: EncodingSpec, ansatz: AnsatzSpec, workers: int = 1):
        if encoding.n_qubits != ansatz.n_qubits:
            raise ConfigurationError(
                f"encoding width {encoding.n_qubits} != ansatz width {ansatz.n_qubits}"
            )
        self.encoding = encoding
        self.ansatz = ansatz
        self.workers = max(1, int(workers))
        self._ops = list(_ansatz_ops(ansatz))

    @property
    def dim(self) -> int:
        return 1 << self.encoding.n_qubits

    def encode_batch(self, slot_lists) -> np.ndarray:
        return np.stack([encoding_angles(self.encoding, s) for s in slot_lists])

    def _encoded_states(self, angles: np.ndarray) -> np.ndarray:
        """Encoded states as columns, shape (2**n, n_queries)."""
        n = self.encoding.n_qubits
        amps = np.zeros((self.dim, len(angles)), dtype=np.complex128)
        amps[0] = 1.0
        for q in range(n):
            sim.apply_rotation(amps, "RX", q, n, angles[:, q, 0])
            sim.apply_rotation(amps, "RZ", q, n, angles[:, q, 1])
        return amps

    def probs(self, angles: np.ndarray, theta) -> np.ndarray:
        """Probability vectors, shape (n_queries, 2**n)."""
        theta = np.asarray(theta, dtype=np.float64)
        n = self.encoding.n_qubits
        amps = self._encoded_states(angles)
        for kind, target, control, k in self._ops:
            if k is None:
                sim.apply_controlled(amps, kind, control, target, n)
            else:
                sim.apply_rotation(amps, kind, target, n, theta[k])
        return (np.abs(amps) ** 2).T

    def _jacobian_chunk(self, angles: np.ndarray, theta: np.ndarray):
        # layout (2**n, circuit variant, query); variant 0 is unshifted,
        # 2k+1 / 2k+2 carry the +/- shift of angle k
        n = self.encoding.n_qubits
        n_params = self.ansatz.n_params
        amps = np.empty((self.dim, 2 * n_params + 1, len(angles)), dtype=np.complex128)
        amps[:, 0] = self._encoded_states(angles)
        active = 1
        for kind, target, control, k in self._ops:
            if k is None:
                sim.apply_controlled(amps[:, :active], kind, control, target, n)
                continue
            amps[:, 2 * k + 1] = amps[:, 0]
            amps[:, 2 * k + 2] = amps[:, 0]
            active = 2 * k + 3
            shifted = np.full(active, theta[k])
            shifted[2 * k + 1] += SHIFT
            shifted[2 * k + 2] -= SHIFT
            sim.apply_rotation(amps[:, :active], kind, target, n, shifted[:, None])
        p = np.abs(amps) ** 2
        jac = (p[:, 1::2] - p[:, 2::2]) / 2
        return p[:, 0].T, jac.transpose(2, 1, 0)

    def probs_and_jacobian(self, angles: np.ndarray, theta):
        """Return probs (Q, 2**n) and d probs / d theta with shape (Q, n_params, 2**n)."""
        theta = np.asarray(theta, dtype=np.float64)
        per_query = (2 * self.ansatz.n_params + 1) * self.dim
        step = max(1, self.chunk_elements // per_query)
        chunks = [angles[i:i + step] for i in range(0, len(angles), step)]
        if self.workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                parts = list(pool.map(lambda a: self._jacobian_chunk(a, theta), chunks))
        else:
            parts = [self._jacobian_chunk(a, theta) for a in chunks]
        if len(parts) == 1:
            return parts[0]
        return np.concatenate([p for p, _ in parts]), np.concatenate([j for _, j in parts])
