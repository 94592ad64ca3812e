import numpy as np
import pytest

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)


def rot(kind, theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    return np.diag([np.exp(-1j * theta / 2), np.exp(1j * theta / 2)])


def embed(ops: dict, n: int) -> np.ndarray:
    """Full 2**n matrix acting with ops[q] on qubit q (qubit 0 = least significant)."""
    out = np.array([[1.0 + 0j]])
    for q in reversed(range(n)):
        out = np.kron(out, ops.get(q, I2))
    return out


def dense_matrix(gate, n: int) -> np.ndarray:
    """Independent matrix construction for one sim.Gate."""
    if gate.kind in ("RX", "RY", "RZ"):
        return embed({gate.target: rot(gate.kind, gate.angle)}, n)
    if gate.kind == "X":
        return embed({gate.target: X}, n)
    target_op = X if gate.kind == "CNOT" else Y
    return embed({gate.control: P0}, n) + embed({gate.control: P1, gate.target: target_op}, n)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
