"""Canonical decomposition of 2-qubit gates and synthesis from interactions.

Any 4x4 unitary G factors, up to global phase, as

    G = (G2A (x) G2B) * exp(i(t1 XX + t2 YY + t3 ZZ)) * (G1A (x) G1B)

with single-qubit corrections and a purely nonlocal core.  The nonlocal
angles are made unique by restricting them to the standard chamber

    t1 >= t2 >= t3 >= 0,  t1 + t2 <= pi/2,  t1 <= pi/4 when t3 = 0.

The same machinery expresses an arbitrary gate as three free-evolution
periods of a fixed two-body interaction interspersed with single-qubit
gates.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import I2, X, Y, Z, dist, is_unitary, rx, ry, rz, tensor

# Transformation from the magic (Bell-like) basis to the computational basis.
MAGIC_Q = np.array(
    [
        [1, -1j, 0, 0],
        [0, 0, 1, -1j],
        [0, 0, -1, -1j],
        [1, 1j, 0, 0],
    ],
    dtype=complex,
) / math.sqrt(2.0)

_GS_DROP_TOL = 1e-8       # Gram-Schmidt linear-dependence drop tolerance
_EIG_CLUSTER_TOL = 1e-8   # eigenvalue degeneracy clustering tolerance
_CHAMBER_SLACK = 1e-12


def _eps_from_theta(theta) -> np.ndarray:
    t1, t2, t3 = theta
    return np.array([t1 - t2 + t3, -t1 + t2 + t3, -(t1 + t2 + t3), t1 + t2 - t3])


def nonlocal_gate(theta) -> np.ndarray:
    """exp(i(t1 XX + t2 YY + t3 ZZ)), diagonal in the magic basis."""
    eps = _eps_from_theta(theta)
    return MAGIC_Q @ np.diag(np.exp(1j * eps)) @ MAGIC_Q.conj().T


@dataclass
class CanonicalForm:
    """Unique nonlocal angles plus local corrections of a 2-qubit gate."""

    theta: np.ndarray                 # (t1, t2, t3)
    g1a: np.ndarray
    g1b: np.ndarray
    g2a: np.ndarray
    g2b: np.ndarray
    phase: float                      # global phase e^{i phase}

    def reassemble(self) -> np.ndarray:
        return (
            cmath.exp(1j * self.phase)
            * tensor(self.g2a, self.g2b)
            @ nonlocal_gate(self.theta)
            @ tensor(self.g1a, self.g1b)
        )


def _real_orthonormal_eigenbasis(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Real orthonormal eigenbasis of a symmetric unitary 4x4 matrix.

    Returns (basis, eigenvalues) with basis rows the eigenvectors.  Within
    each degenerate cluster the basis is extracted from the real and
    imaginary parts of the computed eigenvectors, largest norm first, with
    Gram-Schmidt orthonormalisation.
    """
    vals, vecs = np.linalg.eig(m)
    order = np.argsort(np.round(np.angle(vals), 10), kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    rows: list[np.ndarray] = []
    row_vals: list[complex] = []
    i = 0
    while i < 4:
        j = i
        while j < 4 and abs(vals[j] - vals[i]) <= _EIG_CLUSTER_TOL:
            j += 1
        cluster = vecs[:, i:j]
        want = j - i
        candidates = []
        for k in range(want):
            candidates.append(np.real(cluster[:, k]))
            candidates.append(np.imag(cluster[:, k]))
        candidates.sort(key=lambda v: -np.linalg.norm(v))
        got: list[np.ndarray] = []
        for cand in candidates:
            v = cand.copy()
            for u in rows + got:
                v -= np.dot(u.conj().real, v) * u
            nrm = np.linalg.norm(v)
            if nrm > _GS_DROP_TOL:
                got.append(v / nrm)
                if len(got) == want:
                    break
        if len(got) != want:
            raise ArithmeticError("failed to extract a real eigenbasis")
        rows.extend(got)
        row_vals.extend([vals[i]] * want)
        i = j
    basis = np.array(rows, dtype=float)
    # Rayleigh quotients give eigenvalues matched to the extracted rows.
    eig = np.array([r @ m @ r for r in basis])
    return basis, eig


def _split_su2_kron(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split m in SU(2) (x) SU(2) into its factors (up to mutual sign)."""
    b00, b01 = m[0:2, 0:2], m[0:2, 2:4]
    a2 = b00[0, 0] * b00[1, 1] - b00[0, 1] * b00[1, 0]
    b2 = b01[0, 0] * b01[1, 1] - b01[0, 1] * b01[1, 0]
    if abs(a2) >= abs(b2):
        a = cmath.sqrt(a2)
        v = b00 / a
        b = np.sum(v.conj() * b01) / 2.0
    else:
        b = cmath.sqrt(b2)
        v = b01 / b
        a = np.sum(v.conj() * b00) / 2.0
    first = np.array([[a, b], [-np.conj(b), np.conj(a)]])
    if dist(tensor(first, v), m) > 1e-6:
        raise ArithmeticError("matrix is not a Kronecker product of SU(2) factors")
    return first, v


def _fix_mutual_sign(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Resolve the (A, B) vs (-A, -B) ambiguity deterministically."""
    re, im = a[0, 0].real, a[0, 0].imag
    if re < -_CHAMBER_SLACK or (abs(re) <= _CHAMBER_SLACK and im < 0):
        return -a, -b
    return a, b


# single-qubit conjugation factors for the chamber transformations
_P_FOR_AXIS = {0: X, 1: Y, 2: Z}
_ROT = {0: rx, 1: ry, 2: rz}


class _Working:
    """Mutable decomposition state threaded through chamber normalisation."""

    def __init__(self, theta, g1a, g1b, g2a, g2b, phase):
        self.theta = np.array(theta, dtype=float)
        self.g1a, self.g1b = g1a, g1b
        self.g2a, self.g2b = g2a, g2b
        self.phase = phase

    def shift(self, axis: int, steps: int) -> None:
        """theta[axis] -= steps*pi/2, absorbing i^steps (P(x)P) on the left."""
        if steps == 0:
            return
        p = _P_FOR_AXIS[axis]
        self.theta[axis] -= steps * math.pi / 2
        if steps % 2:
            self.g2a = self.g2a @ p
            self.g2b = self.g2b @ p
        self.phase += steps * math.pi / 2

    def conjugate(self, axis: int, sign: int) -> None:
        """Conjugate the core by p (x) p^{+-1} with p = exp(i pi/4 sigma).

        sign +1 uses p (x) p (parameter permutation), -1 uses p (x) p^dag
        (permutation with sign flips); theta is updated by the caller.
        """
        rot = _ROT[axis]
        p = rot(math.pi / 2)
        q = p if sign > 0 else p.conj().T
        self.g2a = self.g2a @ p.conj().T
        self.g2b = self.g2b @ q.conj().T
        self.g1a = p @ self.g1a
        self.g1b = q @ self.g1b

    def swap_axes(self, i: int, j: int) -> None:
        """Swap theta_i and theta_j via the matching P conjugation."""
        axis = ({0, 1, 2} - {i, j}).pop()
        self.conjugate(axis, +1)
        self.theta[[i, j]] = self.theta[[j, i]]

    def flip_pair(self, i: int, j: int) -> None:
        """(theta_i, theta_j) -> (pi/2 - theta_j, pi/2 - theta_i)."""
        axis = ({0, 1, 2} - {i, j}).pop()
        self.conjugate(axis, -1)
        ti, tj = self.theta[i], self.theta[j]
        self.theta[i], self.theta[j] = -tj, -ti
        self.shift(i, -1)
        self.shift(j, -1)


def _normalize_chamber(w: _Working) -> None:
    for axis in range(3):
        steps = math.floor(w.theta[axis] / (math.pi / 2))
        w.shift(axis, steps)
        if w.theta[axis] >= math.pi / 2 - _CHAMBER_SLACK:
            w.shift(axis, 1)
        if w.theta[axis] < 0.0:
            w.theta[axis] = 0.0
    order = np.argsort(-w.theta, kind="stable")
    _apply_sort(w, order)
    if w.theta[0] + w.theta[1] > math.pi / 2 + _CHAMBER_SLACK:
        w.flip_pair(0, 1)
        _apply_sort(w, np.argsort(-w.theta, kind="stable"))
    if w.theta[2] <= _CHAMBER_SLACK and w.theta[0] > math.pi / 4 + _CHAMBER_SLACK:
        w.flip_pair(0, 2)
        _apply_sort(w, np.argsort(-w.theta, kind="stable"))


def _apply_sort(w: _Working, order: np.ndarray) -> None:
    # realize the sorting permutation as at most two transpositions
    cur = [0, 1, 2]
    for i in range(3):
        p = cur.index(order[i])
        if p != i:
            w.swap_axes(i, p)
            cur[i], cur[p] = cur[p], cur[i]


def decompose(g: np.ndarray) -> CanonicalForm:
    """Canonical decomposition of a 4x4 unitary.

    The reassembled form matches ``g`` exactly (including global phase) and
    the returned angles satisfy the uniqueness constraints.
    """
    g = np.asarray(g, dtype=complex)
    if g.shape != (4, 4) or not is_unitary(g, 1e-8):
        raise ValueError("decompose expects a 4x4 unitary matrix")
    # phase-normalize so det(gs) = 1; the quarter-angle is fixed only up to
    # multiples of pi/2 and is taken in (-pi/4, pi/4]
    delta = np.angle(np.linalg.det(g)) / 4.0
    while delta <= -math.pi / 4:
        delta += math.pi / 2
    while delta > math.pi / 4:
        delta -= math.pi / 2
    gs = np.exp(-1j * delta) * g
    gt = MAGIC_Q.conj().T @ gs @ MAGIC_Q
    m = gt.T @ gt
    o1, eigvals = _real_orthonormal_eigenbasis(m)
    if np.linalg.det(o1) < 0:
        o1[0] *= -1
    eps = np.angle(eigvals) / 2.0
    eps[eps <= -math.pi / 2 + 1e-15] += math.pi
    n = round(float(np.sum(eps)) / math.pi)
    if n > 0:
        for idx in np.argsort(-eps, kind="stable")[:n]:
            eps[idx] -= math.pi
    elif n < 0:
        for idx in np.argsort(eps, kind="stable")[: -n]:
            eps[idx] += math.pi
    o2t = gt @ o1.T @ np.diag(np.exp(-1j * eps))
    if np.max(np.abs(o2t.imag)) > 1e-6:
        raise ArithmeticError("second orthogonal factor is not real")
    o2t = o2t.real
    o1c = MAGIC_Q @ o1 @ MAGIC_Q.conj().T
    o2c = MAGIC_Q @ o2t @ MAGIC_Q.conj().T
    g1a, g1b = _split_su2_kron(o1c)
    g2a, g2b = _split_su2_kron(o2c)
    theta = np.array(
        [(eps[0] + eps[3]) / 2, (eps[1] + eps[3]) / 2, (eps[0] + eps[1]) / 2]
    )
    w = _Working(theta, g1a, g1b, g2a, g2b, delta)
    _normalize_chamber(w)
    w.g1a, w.g1b = _fix_mutual_sign(w.g1a, w.g1b)
    w.g2a, w.g2b = _fix_mutual_sign(w.g2a, w.g2b)
    # fold any residual phase mismatch into the reported global phase
    probe = (
        tensor(w.g2a, w.g2b) @ nonlocal_gate(w.theta) @ tensor(w.g1a, w.g1b)
    )
    tr = np.sum(np.conj(probe) * g)
    w.phase = float(np.angle(tr))
    return CanonicalForm(w.theta, w.g1a, w.g1b, w.g2a, w.g2b, w.phase)


@dataclass
class InteractionSpec:
    """Two-body evolution U(t) with nonlocal part exp(i(phi . sigma) t).

    ``local_decomp(t)`` supplies the single-qubit corrections
    (u1a, u1b, u2a, u2b) with U(t) = (u2a (x) u2b) U_phi_t (u1a (x) u1b);
    the default is no correction.
    """

    phi: tuple[float, float, float]
    local_decomp: Callable[[float], tuple] | None = None

    def locals_at(self, t: float) -> tuple:
        if self.local_decomp is None:
            return (I2, I2, I2, I2)
        return self.local_decomp(t)

    def evolution(self, t: float) -> np.ndarray:
        u1a, u1b, u2a, u2b = self.locals_at(t)
        return tensor(u2a, u2b) @ nonlocal_gate(np.array(self.phi) * t) @ tensor(u1a, u1b)


@dataclass
class SynthesisResult:
    times: tuple[float, float, float]
    locals: tuple                      # U1..U8
    phase: float
    arrangement: int

    def reassemble(self, interaction: InteractionSpec) -> np.ndarray:
        u1, u2, u3, u4, u5, u6, u7, u8 = self.locals
        t1, t2, t3 = self.times
        out = tensor(u1, u2)
        out = interaction.evolution(t1) @ out
        out = tensor(u3, u4) @ out
        out = interaction.evolution(t2) @ out
        out = tensor(u5, u6) @ out
        out = interaction.evolution(t3) @ out
        out = tensor(u7, u8) @ out
        return cmath.exp(1j * self.phase) * out


def _pair(*factors) -> tuple[np.ndarray, np.ndarray]:
    """Compose per-qubit factor pairs left to right into (A, B)."""
    a = I2
    b = I2
    for fa, fb in factors:
        a = a @ fa
        b = b @ fb
    return a, b


_P = {
    "P12": (rz(math.pi / 2), rz(math.pi / 2)),
    "P13": (ry(math.pi / 2), ry(math.pi / 2)),
    "P23": (rx(math.pi / 2), rx(math.pi / 2)),
    "M12": (rz(math.pi / 2), rz(-math.pi / 2)),
    "M13": (ry(math.pi / 2), ry(-math.pi / 2)),
    "M23": (rx(math.pi / 2), rx(-math.pi / 2)),
}

# Column matrices of the linear systems theta = M . t for the two
# interaction rearrangements, and their sandwich factor pairs.
_ARRANGEMENTS = [
    {
        "matrix": lambda p: np.array(
            [[p[0], -p[2], p[2]], [p[1], -p[0], -p[1]], [p[2], p[1], -p[0]]]
        ),
        "s2": lambda: _pair(_P["M12"], _P["P23"]),
        "s3": lambda: _pair(_P["M23"], _P["P23"], _P["P13"]),
    },
    {
        "matrix": lambda p: np.array(
            [[p[0], -p[2], -p[0]], [p[1], p[0], -p[1]], [p[2], -p[1], p[2]]]
        ),
        "s2": lambda: _pair(_P["M23"], _P["M13"]),
        "s3": lambda: _pair(_P["M12"], _P["P12"]),
    },
]


def synthesize(g: np.ndarray, interaction: InteractionSpec) -> SynthesisResult:
    """Express g as three periods of U(t) plus eight single-qubit gates."""
    cf = decompose(g)
    phi = np.asarray(interaction.phi, dtype=float)
    last_err: Exception | None = None
    for arr_idx, arr in enumerate(_ARRANGEMENTS):
        m = arr["matrix"](phi)
        if abs(np.linalg.det(m)) < 1e-12:
            last_err = ValueError(
                f"interaction phi={tuple(phi)} gives a singular time system"
            )
            continue
        times = np.linalg.solve(m, cf.theta)
        s2a, s2b = arr["s2"]()
        s3a, s3b = arr["s3"]()
        u1a_t1, u1b_t1, u2a_t1, u2b_t1 = interaction.locals_at(times[0])
        u1a_t2, u1b_t2, u2a_t2, u2b_t2 = interaction.locals_at(times[1])
        u1a_t3, u1b_t3, u2a_t3, u2b_t3 = interaction.locals_at(times[2])
        locals8 = (
            u1a_t1.conj().T @ cf.g1a,
            u1b_t1.conj().T @ cf.g1b,
            u1a_t2.conj().T @ s2a.conj().T @ u2a_t1.conj().T,
            u1b_t2.conj().T @ s2b.conj().T @ u2b_t1.conj().T,
            u1a_t3.conj().T @ (s3a.conj().T @ s2a) @ u2a_t2.conj().T,
            u1b_t3.conj().T @ (s3b.conj().T @ s2b) @ u2b_t2.conj().T,
            cf.g2a @ s3a @ u2a_t3.conj().T,
            cf.g2b @ s3b @ u2b_t3.conj().T,
        )
        result = SynthesisResult(tuple(times), locals8, cf.phase, arr_idx)
        if dist(result.reassemble(interaction), g) < 1e-8:
            return result
        last_err = ArithmeticError("synthesis verification failed")
    raise last_err if last_err is not None else RuntimeError("synthesis failed")
