"""Dense complex linear algebra: gate constants, tensor products, and the
global-phase-insensitive distance metric shared by every other module.

Conventions
-----------
Basis ordering is most-significant-qubit first: a two-qubit state
``|q1 q0>`` is the column vector ``(a_00, a_01, a_10, a_11)`` with ``q1``
the left (top) qubit.  ``tensor(a, b)`` therefore places ``a`` on the more
significant qubit(s).
"""

from __future__ import annotations

import cmath
import math

import numpy as np

UNITARY_TOL = 1e-10

_SQRT2_INV = 1.0 / math.sqrt(2.0)

H = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
S = np.array([[1, 0], [0, 1j]], dtype=complex)
SDAG = np.array([[1, 0], [0, -1j]], dtype=complex)
T = np.array([[1, 0], [0, cmath.exp(1j * math.pi / 4)]], dtype=complex)
I2 = np.eye(2, dtype=complex)

# |q1 q0> ordering: q1 is the control of CNOT, q0 the target.
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
# control q0, target q1
CNOT_REVERSED = np.array(
    [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
CZ = np.diag([1, 1, 1, -1]).astype(complex)


def rz(theta: float) -> np.ndarray:
    """Z rotation exp(i*theta*Z/2)."""
    return np.array(
        [[cmath.exp(0.5j * theta), 0], [0, cmath.exp(-0.5j * theta)]], dtype=complex
    )


def rx(theta: float) -> np.ndarray:
    """X rotation exp(i*theta*X/2)."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, 1j * s], [1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    """Y rotation exp(i*theta*Y/2)."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, s], [-s, c]], dtype=complex)


def phase(theta: float) -> np.ndarray:
    """Phase gate diag(1, exp(i*theta))."""
    return np.array([[1, 0], [0, cmath.exp(1j * theta)]], dtype=complex)


def rotation_gate(d: int) -> np.ndarray:
    """Phase rotation diag(1, exp(i*pi/2^d))."""
    return phase(math.pi / 2**d)


def controlled_phase(theta: float) -> np.ndarray:
    """Controlled phase diag(1, 1, 1, exp(i*theta))."""
    m = np.eye(4, dtype=complex)
    m[3, 3] = cmath.exp(1j * theta)
    return m


def controlled_rotation(d: int) -> np.ndarray:
    """Controlled phase rotation of magnitude pi/2^d."""
    return controlled_phase(math.pi / 2**d)


_NAMED = {
    "H": H,
    "X": X,
    "Y": Y,
    "Z": Z,
    "S": S,
    "Sdag": SDAG,
    "T": T,
    "Tdag": T.conj().T,
    "I": I2,
    "CNOT": CNOT,
    "CNOT_reversed": CNOT_REVERSED,
    "SWAP": SWAP,
    "CZ": CZ,
}


def gate_constant(name: str) -> np.ndarray:
    """Look up a gate matrix by name.

    Parametrised forms: ``Rz(theta)``, ``Rx(theta)``, ``Ry(theta)``,
    ``P(theta)`` for diag(1, e^{i theta}) and ``CP(theta)`` for the
    controlled phase.  Raises KeyError for unknown names.
    """
    if name in _NAMED:
        return _NAMED[name].copy()
    if name.endswith(")") and "(" in name:
        head, arg = name[:-1].split("(", 1)
        theta = float(arg)
        if head == "Rz":
            return rz(theta)
        if head == "Rx":
            return rx(theta)
        if head == "Ry":
            return ry(theta)
        if head == "P":
            return phase(theta)
        if head == "CP":
            return controlled_phase(theta)
    raise KeyError(f"unknown gate constant: {name!r}")


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with ``a`` on the more significant qubit(s)."""
    return np.kron(a, b)


def tensor_all(*ops: np.ndarray) -> np.ndarray:
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def dag(u: np.ndarray) -> np.ndarray:
    return u.conj().T


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return np.max(np.abs(dag(u) @ u - np.eye(u.shape[0]))) <= tol


def dist(u: np.ndarray, v: np.ndarray) -> float:
    """Global-phase-insensitive distance sqrt((m - |tr(u^dag v)|)/m).

    Evaluated as ||u - e^{i phi} v||_F / sqrt(2m) with the optimal phase
    phi = arg tr(u^dag v), which is algebraically identical for unitary
    inputs but avoids the catastrophic cancellation of m - |tr| near zero.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    m = u.shape[0]
    tr = np.sum(np.conj(u) * v)          # tr(u^dag v)
    if tr != 0:
        v = v * (abs(tr) / tr)
    d2 = np.sum(np.abs(u - v) ** 2) / (2 * m)
    return math.sqrt(min(max(float(d2), 0.0), 1.0))


def basis_state(n_qubits: int, index: int = 0) -> np.ndarray:
    """Computational basis state |index> on n qubits (MSB-first index)."""
    v = np.zeros(2**n_qubits, dtype=complex)
    v[index] = 1.0
    return v


def state_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 for state vectors."""
    return abs(np.vdot(a, b)) ** 2


def is_normalized(state: np.ndarray, tol: float = 1e-10) -> bool:
    return abs(np.vdot(state, state).real - 1.0) <= tol


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_su2(rng: np.random.Generator) -> np.ndarray:
    """Single-qubit unitary with alpha, beta, theta uniform in [0, 2*pi).

    Parameterisation: rows (e^{i(a+b)/2} cos t, e^{i(a-b)/2} sin t;
    -e^{i(-a+b)/2} sin t, e^{-i(a+b)/2} cos t).
    """
    alpha, beta, theta = rng.uniform(0.0, 2 * math.pi, size=3)
    ct, st = math.cos(theta), math.sin(theta)
    return np.array(
        [
            [cmath.exp(0.5j * (alpha + beta)) * ct, cmath.exp(0.5j * (alpha - beta)) * st],
            [-cmath.exp(0.5j * (-alpha + beta)) * st, cmath.exp(-0.5j * (alpha + beta)) * ct],
        ],
        dtype=complex,
    )
