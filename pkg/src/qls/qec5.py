"""5-qubit quantum error correction on a line of qubits.

Provides the depth-6 nearest-neighbor encode circuit, the measured and
measurement-free correction schemes, a slow-reset 9-qubit variant, discrete
and continuous error models, and the Monte-Carlo harness estimating the
per-step logical error rate.

Wire layout of the 5-qubit block: the data qubit sits on wire 3; syndrome
bits b1..b4 are read from wires (4, 0, 1, 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import sqrtm

from . import linalg
from .circuit import Circuit, run_statevector

DATA_WIRE = 3
ANC_WIRES = (4, 0, 1, 2)      # wires holding syndrome bits b1..b4

# Syndrome -> data correction; the ancilla reset pattern is the bits
# themselves (X wherever a 1 was measured).
SYNDROME_TABLE = {
    0b0000: "I", 0b0001: "I", 0b0010: "I", 0b0011: "Z",
    0b0100: "I", 0b0101: "X", 0b0110: "Z", 0b0111: "X",
    0b1000: "Z", 0b1001: "I", 0b1010: "X", 0b1011: "X",
    0b1100: "Z", 0b1101: "X", 0b1110: "XZ", 0b1111: "Z",
}

# Rearranged action table implemented by the measurement-free corrector:
# after its permutation stage the required action against the (permuted)
# ancilla value is column REARRANGED below.
REARRANGED_TABLE = {
    0b0000: "I", 0b0001: "I", 0b0010: "I", 0b0011: "I",
    0b0100: "XZ", 0b0101: "X", 0b0110: "Z", 0b0111: "I",
    0b1000: "X", 0b1001: "Z", 0b1010: "X", 0b1011: "Z",
    0b1100: "X", 0b1101: "Z", 0b1110: "X", 0b1111: "Z",
}

# Encoder found by symplectic search: ten compound 2-qubit Clifford gates in
# a depth-6 brick pattern, plus one single-qubit pre-rotation on the data
# wire.  Words are applied left to right; letters a/b refer to the first and
# second wire of the pair.
_ENC_PATTERN = [(2, 3), (1, 2), (3, 4), (0, 1), (2, 3),
                (1, 2), (3, 4), (0, 1), (2, 3), (1, 2)]
_ENC_WORDS = [
    ["Ha", "Hb", "Sa", "CX", "Ha", "CXr"],
    ["Hb", "Sb", "CX", "CXr", "Ha"],
    ["Ha", "Hb", "CX", "Sb", "SW"],
    ["Hb", "CX", "Sb", "CXr"],
    ["Ha", "Sa", "CX", "Ha", "CX", "SW"],
    ["Hb", "Sa", "Ha", "Sb", "CX", "SW"],
    ["Ha", "Sa", "SW"],
    ["CX", "Ha", "Sa", "Sb", "CXr"],
    ["Ha", "Hb", "Sb", "CX", "Sb", "CXr"],
    ["Hb", "Sa", "CXr", "Ha", "CX"],
]

_WORD_GENS = {
    "Ha": np.kron(linalg.H, linalg.I2),
    "Hb": np.kron(linalg.I2, linalg.H),
    "Sa": np.kron(linalg.S, linalg.I2),
    "Sb": np.kron(linalg.I2, linalg.S),
    "CX": linalg.CNOT,
    "CXr": linalg.CNOT_REVERSED,
    "SW": linalg.SWAP,
}


def _word_matrix(word) -> np.ndarray:
    u = np.eye(4, dtype=complex)
    for name in word:
        u = _WORD_GENS[name] @ u
    return u


def build_encode_lnn() -> Circuit:
    """Depth-6 nearest-neighbor encoder for the 5-qubit code.

    Takes the data qubit on wire 3 (ancillae |0000>) to the code state whose
    decode-time syndrome/correction behavior is exactly SYNDROME_TABLE.
    """
    c = Circuit(5, name="encode5")
    # data-frame rotation; folded out again by the inverse
    c.unitary((linalg.H @ linalg.S).conj().T, DATA_WIRE, name="frame")
    for pair, word in zip(_ENC_PATTERN, _ENC_WORDS):
        c.unitary(_word_matrix(word), pair[0], pair[1], name="enc")
    return c


def build_decode_lnn() -> Circuit:
    return build_encode_lnn().inverse()


def syndrome_action(bits) -> tuple[str, tuple[int, ...]]:
    """Action for 4 measured syndrome bits (b1, b2, b3, b4).

    Returns the data correction ("I", "X", "Z" or "XZ") and the ancilla
    indices (0-based into b1..b4) that must be X-reset.
    """
    bits = tuple(int(b) for b in bits)
    if len(bits) != 4 or any(b not in (0, 1) for b in bits):
        raise ValueError("syndrome_action expects 4 bits")
    s = (bits[0] << 3) | (bits[1] << 2) | (bits[2] << 1) | bits[3]
    resets = tuple(i for i, b in enumerate(bits) if b)
    return SYNDROME_TABLE[s], resets


# -- measurement-free corrector ---------------------------------------------


class _LineBuilder:
    """Emits adjacent-pair gates while tracking logical-bit wire positions."""

    def __init__(self, circuit: Circuit, positions: dict[str, int]):
        self.c = circuit
        self.pos = positions          # logical name -> wire

    def wire(self, name: str) -> int:
        return self.pos[name]

    def swap(self, w1: int, w2: int) -> None:
        self.c.swap(w1, w2)
        self._relabel(w1, w2)

    def _relabel(self, w1: int, w2: int) -> None:
        inv = {w: n for n, w in self.pos.items()}
        n1, n2 = inv.get(w1), inv.get(w2)
        if n1 is not None:
            self.pos[n1] = w2
        if n2 is not None:
            self.pos[n2] = w1

    def x(self, name: str) -> None:
        self.c.x(self.pos[name])

    def cx(self, ctrl: str, tgt: str) -> None:
        wc, wt = self.pos[ctrl], self.pos[tgt]
        while abs(wc - wt) > 1:
            step = wc + (1 if wt > wc else -1)
            self.swap(wc, step)
            wc = step
        self.c.cnot(wc, wt)

    def ccu(self, c1: str, c2: str, tgt: str, u2: np.ndarray,
            hollow=()) -> None:
        """Doubly controlled u2 via five adjacent 2-qubit gates.

        Controls end up swapped (tracked).  Hollow controls fire on |0>.
        """
        for name in hollow:
            self.x(name)
        self._bring_together(c1, c2, tgt)
        t = self.pos[tgt]
        # middle control is the one adjacent to the target
        if abs(self.pos[c2] - t) == 1:
            a, b = self.pos[c1], self.pos[c2]
        else:
            a, b = self.pos[c2], self.pos[c1]
        v = sqrtm(u2).astype(complex)
        cv = np.eye(4, dtype=complex)
        cv[2:, 2:] = v
        cvd = np.eye(4, dtype=complex)
        cvd[2:, 2:] = v.conj().T
        def pair(w1, w2, m):
            if w1 < w2:
                self.c.unitary(m, w1, w2, name="ccu")
            else:
                sw = linalg.SWAP
                self.c.unitary(sw @ m @ sw, w2, w1, name="ccu")
        pair(b, t, cv)
        pair(a, b, linalg.CNOT)
        pair(b, t, cvd)
        pair(a, b, linalg.SWAP @ linalg.CNOT)
        pair(b, t, cv)
        self._relabel(a, b)
        for name in hollow:
            self.x(name)

    def _bring_together(self, c1: str, c2: str, tgt: str) -> None:
        """Arrange (c1, c2, tgt) or (c2, c1, tgt) on consecutive wires.

        Minimal adjacent-swap plan found by BFS over wire arrangements;
        controls are interchangeable and either line direction is fine.
        """
        names = sorted(self.pos)
        width = self.c.width

        def acceptable(pos: dict[str, int]) -> bool:
            w1, w2, wt = pos[c1], pos[c2], pos[tgt]
            for a, b in ((w1, w2), (w2, w1)):
                if b - a == 1 and wt - b == 1:
                    return True
                if a - b == 1 and b - wt == 1:
                    return True
            return False

        start = tuple(self.pos[n] for n in names)
        if acceptable(self.pos):
            return
        from collections import deque
        prev: dict[tuple, tuple | None] = {start: None}
        moves: dict[tuple, int] = {}
        queue = deque([start])
        goal = None
        while queue:
            cur = queue.popleft()
            posmap = dict(zip(names, cur))
            if acceptable(posmap):
                goal = cur
                break
            for w in range(width - 1):
                nxt = tuple(w + 1 if p == w else w if p == w + 1 else p
                            for p in cur)
                if nxt not in prev:
                    prev[nxt] = cur
                    moves[nxt] = w
                    queue.append(nxt)
        plan = []
        while prev[goal] is not None:
            plan.append(moves[goal])
            goal = prev[goal]
        for w in reversed(plan):
            self.swap(w, w + 1)


def build_correct_nomeas_lnn() -> Circuit:
    """Quantum-logic corrector for a freshly decoded block.

    First rearranges the 16 ancilla basis states so the required action
    table becomes REARRANGED_TABLE, then applies the controlled corrections
    to the data qubit.  Built from 1- and 2-qubit gates only.
    """
    c = Circuit(5, name="correct5")
    lb = _LineBuilder(c, {"b1": ANC_WIRES[0], "b2": ANC_WIRES[1],
                          "b3": ANC_WIRES[2], "b4": ANC_WIRES[3],
                          "d": DATA_WIRE})
    # bring b1 next to the other syndrome bits (data moves to the end)
    lb.swap(3, 4)
    X = linalg.X
    Z = linalg.Z
    # permutation stage: CCX(b2,b3->b4), CX(b4->b1), CCX(b1,b3->b4),
    # CX(b1->b3), CX(b2->b3), CCX(b3,b4->b1), X(b4)
    lb.ccu("b2", "b3", "b4", X)
    lb.cx("b4", "b1")
    lb.ccu("b1", "b3", "b4", X)
    lb.cx("b1", "b3")
    lb.cx("b2", "b3")
    lb.ccu("b3", "b4", "b1", X)
    lb.x("b4")
    # corrective stage per REARRANGED_TABLE:
    #   X on data iff (b1 & !b4); Z iff (b1 & b4)
    lb.ccu("b1", "b4", "d", X, hollow=("b4",))
    lb.ccu("b1", "b4", "d", Z)
    #   X iff (!b1 & b2 & !b3): dirty-ancilla double toffoli via b4
    lb.ccu("b1", "b4", "d", X, hollow=("b1",))      # pre-cancel !b1 & b4
    lb.ccu("b2", "b3", "b4", X, hollow=("b3",))
    lb.ccu("b1", "b4", "d", X, hollow=("b1",))
    lb.ccu("b2", "b3", "b4", X, hollow=("b3",))     # restore b4
    #   Z iff (!b1 & b2 & !b4): same trick via b3
    lb.ccu("b1", "b3", "d", Z, hollow=("b1",))
    lb.ccu("b2", "b4", "b3", X, hollow=("b4",))
    lb.ccu("b1", "b3", "d", Z, hollow=("b1",))
    lb.ccu("b2", "b4", "b3", X, hollow=("b4",))
    # walk the data qubit back to its home wire
    wd = lb.pos["d"]
    while wd != DATA_WIRE:
        step = wd + (1 if DATA_WIRE > wd else -1)
        lb.swap(wd, step)
        wd = step
    return c


def build_correct_nomeas() -> Circuit:
    """Reference corrector with explicit multi-controlled gates."""
    c = Circuit(5, name="correct5_ref")
    b1, b2, b3, b4 = ANC_WIRES
    d = DATA_WIRE

    def mc(controls, values, wire, u2):
        qs = sorted(controls + (wire,))
        dim = 2 ** len(qs)
        m = np.eye(dim, dtype=complex)
        rows = []
        for idx in range(dim):
            bits = {q: (idx >> (len(qs) - 1 - k)) & 1 for k, q in enumerate(qs)}
            if all(bits[cq] == v for cq, v in zip(controls, values)):
                rows.append(idx)
        ti = len(qs) - 1 - qs.index(wire)
        for r in rows:
            if (r >> ti) & 1 == 0:
                r2 = r | (1 << ti)
                if r2 in rows:
                    sub = np.array([[m[r, r], 0], [0, m[r2, r2]]])
                    m[np.ix_([r, r2], [r, r2])] = u2
        c.add_multicontrolled = None
        return m, qs

    # permutation stage on ancilla bits (b1, b2, b3, b4)
    for gate in [("CCX", (b2, b3), (1, 1), b4), ("CX", (b4,), (1,), b1),
                 ("CCX", (b1, b3), (1, 1), b4), ("CX", (b1,), (1,), b3),
                 ("CX", (b2,), (1,), b3), ("CCX", (b3, b4), (1, 1), b1)]:
        _, controls, values, wire = gate
        m, qs = mc(controls, values, wire, linalg.X)
        c.unitary(m, *qs, name="perm")
    c.x(b4)
    for controls, values, u2 in [
        ((b1, b4), (1, 0), linalg.X),
        ((b1, b4), (1, 1), linalg.Z),
        ((b1, b2, b3), (0, 1, 0), linalg.X),
        ((b1, b2, b4), (0, 1, 0), linalg.Z),
    ]:
        m, qs = mc(controls, values, d, u2)
        c.unitary(m, *qs, name="correct")
    return c


# -- error models and Monte-Carlo harness ------------------------------------


@dataclass
class ErrorModel:
    """Discrete X/Z/XZ errors with probability p per qubit per step, or
    continuous random rotations with angle parameters ~ N(0, sigma)."""

    kind: str                  # "discrete" | "continuous"
    p: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("discrete", "continuous"):
            raise ValueError("kind must be 'discrete' or 'continuous'")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must be a probability")
        if self.sigma < 0.0:
            raise ValueError("sigma must be non-negative")


@dataclass
class QecCycleConfig:
    wait_steps: int
    scheme: str = "measured"    # "measured" | "nomeas" | "slowreset"
    seed: int = 0
    trials: int = 100_000

    def __post_init__(self):
        if self.scheme not in ("measured", "nomeas", "slowreset"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.trials < 1:
            raise ValueError("trials must be positive")


@dataclass
class CycleResult:
    eps_final: float
    eps_step: float
    T: int
    trials: int
    ci_low: float               # Wilson 95% interval on eps_step
    ci_high: float


def _wilson(k: int, n: int, z: float = 1.959964) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    phat = k / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(centre - half, 0.0), min(centre + half, 1.0)


def eps_step_from_final(eps_final: float, T: int) -> float:
    """Per-step error rate: 1 - (1 - eps_final)^(1/T)."""
    eps_final = min(max(eps_final, 0.0), 1.0)
    return 1.0 - (1.0 - eps_final) ** (1.0 / T)


def _layer_ops(circ: Circuit) -> list[list[tuple[np.ndarray, tuple[int, ...]]]]:
    """Group a unitary circuit's gates into time-step layers."""
    layers = circ.layers()
    depth = max(layers) if layers else 0
    out = [[] for _ in range(depth)]
    for g, layer in zip(circ.gates, layers):
        out[max(layer, 1) - 1].append((g.matrix, g.qubits))
    return out


class _StepProgram:
    """Cycle schedule: per-step gate lists plus special stage markers."""

    def __init__(self, width: int, data_wire: int):
        self.width = width
        self.data_wire = data_wire
        self.steps: list[dict] = []

    def add_gates(self, layers) -> None:
        for ops in layers:
            self.steps.append({"ops": ops})

    def add_wait_marker(self, n: int) -> None:
        if n > 0:
            self.steps.append({"wait": n})

    def add_measure_correct(self) -> None:
        self.steps.append({"measure": ANC_WIRES})
        self.steps.append({"table_correct": True})

    def add_reset(self, wires) -> None:
        self.steps.append({"reset": tuple(wires)})

    @property
    def duration(self) -> int:
        return sum(s.get("wait", 1) for s in self.steps if not s.get("ideal"))


def cycle_program(scheme: str, wait_steps: int) -> _StepProgram:
    """Build the step schedule of one QEC cycle for the given scheme."""
    enc = build_encode_lnn()
    dec = build_decode_lnn()
    if scheme == "measured":
        prog = _StepProgram(5, DATA_WIRE)
        prog.add_gates(_layer_ops(enc))
        prog.add_wait_marker(wait_steps)
        prog.add_gates(_layer_ops(dec))
        prog.add_measure_correct()
    elif scheme == "nomeas":
        prog = _StepProgram(5, DATA_WIRE)
        prog.add_gates(_layer_ops(enc))
        prog.add_wait_marker(wait_steps)
        prog.add_gates(_layer_ops(dec))
        prog.add_gates(_layer_ops(build_correct_nomeas_lnn()))
        prog.add_reset(ANC_WIRES)
    else:  # slowreset: hand the data to a fresh block while stale resets
        prog = _StepProgram(9, DATA_WIRE + 4)
        wide = Circuit(9)
        wide.extend(enc)
        prog.add_gates(_layer_ops(wide))
        prog.add_wait_marker(wait_steps)
        wide = Circuit(9)
        wide.extend(dec)
        prog.add_gates(_layer_ops(wide))
        wide = Circuit(9)
        wide.extend(build_correct_nomeas_lnn())
        prog.add_gates(_layer_ops(wide))
        sw = linalg.SWAP
        prog.steps.append({"ops": [(sw, (3, 4))]})
        prog.steps.append({"ops": [(sw, (4, 5))], "reset": (3, 0)})
        prog.steps.append({"ops": [(sw, (5, 6))], "reset": (1,)})
        prog.steps.append({"ops": [(sw, (6, 7))], "reset": (2,)})
        enc_r = Circuit(9)
        enc_r.extend(build_encode_lnn(), offset=4)
        prog.add_gates(_layer_ops(enc_r))
        # error-free unencode of the fresh block, used only to read out the
        # logical fidelity; not part of the cycle duration
        dec_r = Circuit(9)
        dec_r.extend(dec, offset=4)
        for ops in _layer_ops(dec_r):
            prog.steps.append({"ops": ops, "ideal": True})
    return prog


class _BatchState:
    """Batch of statevectors with per-trial measurement records."""

    def __init__(self, width: int, batch: int, init: np.ndarray):
        self.width = width
        self.batch = batch
        self.state = np.tile(init, (batch, 1)).astype(complex)

    def apply(self, mat: np.ndarray, wires) -> None:
        k = len(wires)
        n = self.width
        psi = self.state.reshape((self.batch,) + (2,) * n)
        axes = [1 + w for w in wires]
        psi = np.moveaxis(psi, axes, range(n - k + 1, n + 1))
        shp = psi.shape
        psi = psi.reshape(-1, 2 ** k) @ mat.T
        psi = np.moveaxis(psi.reshape(shp), range(n - k + 1, n + 1), axes)
        self.state = psi.reshape(self.batch, -1)

    def apply_subset(self, idx: np.ndarray, mat: np.ndarray, wire: int) -> None:
        if idx.size == 0:
            return
        n = self.width
        sub = self.state[idx].reshape((idx.size,) + (2,) * n)
        sub = np.moveaxis(sub, 1 + wire, n)
        shp = sub.shape
        sub = sub.reshape(-1, 2) @ mat.T
        sub = np.moveaxis(sub.reshape(shp), n, 1 + wire)
        self.state[idx] = sub.reshape(idx.size, -1)

    def apply_per_trial(self, mats: np.ndarray, wire: int) -> None:
        """mats: (batch, 2, 2), one single-qubit unitary per trial."""
        n = self.width
        psi = self.state.reshape((self.batch,) + (2,) * n)
        psi = np.moveaxis(psi, 1 + wire, 1)
        shp = psi.shape
        psi = psi.reshape(self.batch, 2, -1)
        psi = np.einsum("bij,bjk->bik", mats, psi)
        psi = np.moveaxis(psi.reshape(shp), 1, 1 + wire)
        self.state = psi.reshape(self.batch, -1)

    def measure(self, wire: int, rng: np.random.Generator) -> np.ndarray:
        n = self.width
        psi = self.state.reshape((self.batch,) + (2,) * n)
        psi = np.moveaxis(psi, 1 + wire, 1).reshape(self.batch, 2, -1)
        p1 = np.sum(np.abs(psi[:, 1, :]) ** 2, axis=1)
        outcome = (rng.random(self.batch) < p1).astype(np.int64)
        keep = np.where(outcome == 1, p1, 1 - p1)
        psi[np.arange(self.batch), 1 - outcome, :] = 0.0
        psi /= np.sqrt(np.maximum(keep, 1e-300))[:, None, None]
        psi = psi.reshape((self.batch, 2) + (2,) * (n - 1))
        psi = np.moveaxis(psi, 1, 1 + wire)
        self.state = psi.reshape(self.batch, -1)
        return outcome

    def reset(self, wire: int, rng: np.random.Generator) -> None:
        outcome = self.measure(wire, rng)
        idx = np.nonzero(outcome)[0]
        self.apply_subset(idx, linalg.X, wire)

    def data_fidelity(self, target: np.ndarray, wire: int) -> np.ndarray:
        n = self.width
        psi = self.state.reshape((self.batch,) + (2,) * n)
        psi = np.moveaxis(psi, 1 + wire, 1).reshape(self.batch, 2, -1)
        amp = np.einsum("i,bik->bk", target.conj(), psi)
        return np.sum(np.abs(amp) ** 2, axis=1)


_PAULI_1Q = [linalg.X, linalg.Z, linalg.X @ linalg.Z]


def _apply_discrete_errors(bs: _BatchState, p: float,
                           rng: np.random.Generator) -> None:
    for w in range(bs.width):
        u = rng.random(bs.batch)
        for t in range(3):
            idx = np.nonzero((u >= t * p / 3) & (u < (t + 1) * p / 3))[0]
            bs.apply_subset(idx, _PAULI_1Q[t], w)


def _continuous_batch(sigma: float, batch: int,
                      rng: np.random.Generator) -> np.ndarray:
    alpha, beta, theta = rng.normal(0.0, sigma, size=(3, batch))
    ct, st = np.cos(theta / 2), np.sin(theta / 2)
    out = np.empty((batch, 2, 2), dtype=complex)
    out[:, 0, 0] = np.exp(0.5j * (alpha + beta)) * ct
    out[:, 0, 1] = np.exp(0.5j * (alpha - beta)) * st
    out[:, 1, 0] = -np.exp(0.5j * (-alpha + beta)) * st
    out[:, 1, 1] = np.exp(-0.5j * (alpha + beta)) * ct
    return out


def _apply_continuous_errors(bs: _BatchState, sigma: float,
                             rng: np.random.Generator) -> None:
    for w in range(bs.width):
        bs.apply_per_trial(_continuous_batch(sigma, bs.batch, rng), w)


def _apply_wait_discrete(bs: _BatchState, p: float, n_steps: int,
                         rng: np.random.Generator) -> None:
    # Pauli errors over idle steps collapse to one net X^a Z^b per qubit
    # (ordering only contributes a global phase per trial).
    counts = rng.multinomial(n_steps, [p / 3, p / 3, p / 3, 1 - p],
                             size=(bs.batch, bs.width))
    a = (counts[..., 0] + counts[..., 2]) % 2
    b = (counts[..., 1] + counts[..., 2]) % 2
    for w in range(bs.width):
        bs.apply_subset(np.nonzero(a[:, w])[0], linalg.X, w)
        bs.apply_subset(np.nonzero(b[:, w])[0], linalg.Z, w)


_TABLE_CODES = np.array(
    [{"I": 0, "X": 1, "Z": 2, "XZ": 3}[SYNDROME_TABLE[s]] for s in range(16)]
)


def run_cycle(cfg: QecCycleConfig, model: ErrorModel,
              batch_size: int = 20_000) -> CycleResult:
    """Monte-Carlo estimate of the per-step logical error of one QEC cycle."""
    prog = cycle_program(cfg.scheme, cfg.wait_steps)
    T = prog.duration
    psi = np.array([math.sin(math.pi / 8), math.cos(math.pi / 8)],
                   dtype=complex)
    init = np.zeros(2 ** prog.width, dtype=complex)
    init[0] = psi[0]
    init[1 << (prog.width - 1 - DATA_WIRE)] = psi[1]
    rng = np.random.default_rng(cfg.seed)
    total_err = 0.0
    total_sq = 0.0
    done = 0
    while done < cfg.trials:
        batch = min(batch_size, cfg.trials - done)
        bs = _BatchState(prog.width, batch, init)
        bits = np.zeros((batch, 4), dtype=np.int64)
        for step in prog.steps:
            if "wait" in step:
                n = step["wait"]
                if model.kind == "discrete":
                    if model.p > 0:
                        _apply_wait_discrete(bs, model.p, n, rng)
                else:
                    for _ in range(n):
                        if model.sigma > 0:
                            _apply_continuous_errors(bs, model.sigma, rng)
                continue
            for mat, wires in step.get("ops", ()):
                bs.apply(mat, wires)
            if "measure" in step:
                for i, w in enumerate(step["measure"]):
                    bits[:, i] = bs.measure(w, rng)
            if step.get("table_correct"):
                syn = (bits[:, 0] << 3) | (bits[:, 1] << 2) | (bits[:, 2] << 1) | bits[:, 3]
                codes = _TABLE_CODES[syn]
                for code, mat in ((1, linalg.X), (2, linalg.Z),
                                  (3, linalg.X @ linalg.Z)):
                    bs.apply_subset(np.nonzero(codes == code)[0], mat,
                                    DATA_WIRE)
                for i, w in enumerate(ANC_WIRES):
                    bs.apply_subset(np.nonzero(bits[:, i] == 1)[0], linalg.X, w)
            if "reset" in step:
                for w in step["reset"]:
                    bs.reset(w, rng)
            if step.get("ideal"):
                continue
            if model.kind == "discrete":
                if model.p > 0:
                    _apply_discrete_errors(bs, model.p, rng)
            else:
                if model.sigma > 0:
                    _apply_continuous_errors(bs, model.sigma, rng)
        fid = bs.data_fidelity(psi, prog.data_wire)
        if model.kind == "discrete":
            # per the tables, a trial counts as destroyed once the data
            # qubit is left with any residual error
            err = (fid < 1.0 - 1e-9).astype(float)
        else:
            err = np.clip(1.0 - fid, 0.0, 1.0)
        total_err += float(np.sum(err))
        total_sq += float(np.sum(err * err))
        done += batch
    eps_final = total_err / cfg.trials
    eps_step = eps_step_from_final(eps_final, T)
    lo, hi = _wilson(int(round(total_err)), cfg.trials)
    return CycleResult(eps_final, eps_step, T, cfg.trials,
                       eps_step_from_final(lo, T), eps_step_from_final(hi, T))


def find_topt(model: ErrorModel, scheme: str = "measured",
              trials: int = 100_000, seed: int = 0,
              scan_trials: int | None = None,
              t_min: int = 2, t_max: int = 100_000) -> tuple[int, CycleResult]:
    """Scan wait times for the one minimizing the per-step error.

    Geometric sweep (factor 1.25) followed by +-10% local refinement.
    Returns (T_wait_opt, result at the optimum).
    """
    if scan_trials is None:
        scan_trials = max(trials // 5, 10000)
    # the optimum wait scales roughly as 1/sqrt(p) or 1/sigma
    if model.kind == "discrete" and model.p > 0:
        t_hi = min(t_max, max(100, int(25.0 / math.sqrt(model.p))))
    elif model.kind == "continuous" and model.sigma > 0:
        t_hi = min(t_max, max(100, int(25.0 / model.sigma)))
    else:
        t_hi = t_max
    grid = []
    t = float(t_min)
    while t <= t_hi:
        grid.append(int(round(t)))
        t *= 1.25
    grid = sorted(set(grid))
    scanned: list[tuple[int, CycleResult]] = []
    best = None
    for tw in grid:
        res = run_cycle(QecCycleConfig(tw, scheme, seed, scan_trials), model)
        scanned.append((tw, res))
        if best is None or res.eps_step < best.eps_step:
            best = res
        if res.eps_final > 0.5 or res.ci_low > 2.0 * best.ci_high:
            # deep in the multi-error regime the per-step formula loses
            # meaning; stop once clearly past the interior minimum
            break
    floor = best.eps_step
    plateau = [tw for tw, res in scanned if res.eps_step <= 1.2 * floor]
    cands = set(plateau[-6:])
    cands.update(max(1, int(round(plateau[-1] * f))) for f in (0.9, 1.1))
    best_t, best = None, None
    for tw in sorted(cands):
        res = run_cycle(QecCycleConfig(tw, scheme, seed + 1, trials), model)
        if best is None or res.eps_step < best.eps_step:
            best_t, best = tw, res
    return best_t, best


def equivalent_p(sigma: float, T: int, trials: int = 100_000,
                 seed: int = 0) -> float:
    """Discrete error rate giving the same final error as continuous noise
    of deviation sigma acting on one idle qubit for T steps."""
    if T < 1 or trials < 1:
        raise ValueError("T and trials must be positive")
    psi = np.array([math.sin(math.pi / 8), math.cos(math.pi / 8)],
                   dtype=complex)
    rng = np.random.default_rng(seed)
    state = np.tile(psi, (trials, 1))
    for _ in range(T):
        mats = _continuous_batch(sigma, trials, rng)
        state = np.einsum("bij,bj->bi", mats, state)
    fid = np.abs(state @ psi.conj()) ** 2
    eps_final = float(np.mean(np.clip(1 - fid, 0, 1)))
    return eps_step_from_final(eps_final, T)


# -- stabilizer validation target ---------------------------------------------


def gottesman_code_check() -> dict:
    """Verify the reference 5-qubit code stabilizers and logical operators.

    Builds |0_L> and |1_L> from their 16-term superpositions and checks the
    four stabilizer eigenvalues and the X_L/Z_L logical action.
    """
    plus0 = ["00000", "10010", "01001", "10100", "01010"]
    minus0 = ["11011", "00110", "11000", "11101", "00011", "11110", "01111",
              "10001", "01100", "10111"]
    plus0_tail = ["00101"]
    zero = np.zeros(32, dtype=complex)
    for b in plus0 + plus0_tail:
        zero[int(b, 2)] += 1
    for b in minus0:
        zero[int(b, 2)] -= 1
    zero /= 4.0
    one = np.zeros(32, dtype=complex)
    for b in ["11111", "01101", "10110", "01011", "10101"]:
        one[int(b, 2)] += 1
    for b in ["00100", "11001", "00111", "00010", "11100", "00001", "10000",
              "01110", "10011", "01000"]:
        one[int(b, 2)] -= 1
    one[int("11010", 2)] += 1
    one /= 4.0

    paulis = {"I": linalg.I2, "X": linalg.X, "Y": linalg.Y, "Z": linalg.Z}

    def op(spec: str) -> np.ndarray:
        return linalg.tensor_all(*[paulis[ch] for ch in spec])

    stabilizers = {
        "M1": "XZZXI", "M2": "IXZZX", "M3": "XIXZZ", "M4": "ZXIXZ",
    }
    report = {"norm0": float(np.vdot(zero, zero).real),
              "norm1": float(np.vdot(one, one).real)}
    for name, spec in stabilizers.items():
        m = op(spec)
        report[f"{name}|0L"] = float(np.linalg.norm(m @ zero - zero))
        report[f"{name}|1L"] = float(np.linalg.norm(m @ one - one))
    xl = op("XXXXX")
    zl = op("ZZZZZ")
    report["XL 0->1"] = float(np.linalg.norm(xl @ zero - one))
    report["XL 1->0"] = float(np.linalg.norm(xl @ one - zero))
    report["ZL |0L>"] = float(np.linalg.norm(zl @ zero - zero))
    report["ZL |1L>"] = float(np.linalg.norm(zl @ one + one))
    report["ok"] = all(v < 1e-10 for k, v in report.items()
                       if k not in ("ok", "norm0", "norm1")) \
        and abs(report["norm0"] - 1) < 1e-10 and abs(report["norm1"] - 1) < 1e-10
    return report
