"""Circuit intermediate representation and statevector execution.

A :class:`Circuit` is an ordered list of :class:`PlacedGate` on an indexed
qubit line.  Gate counting and depth follow the compound-gate convention:
a 2-qubit gate (including explicit compound matrices) costs 1, single-qubit
gates merge into adjacent 2-qubit gates and cost nothing, measurement and
reset each have depth 1.

Circuits are immutable by convention once handed to consumers; builder
methods mutate in place and return ``self`` for chaining.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import linalg

GATE = "gate"
MEASURE = "measure"
RESET = "reset"


@dataclass(frozen=True)
class PlacedGate:
    kind: str                      # GATE | MEASURE | RESET
    qubits: tuple[int, ...]
    name: str = ""
    matrix: np.ndarray | None = None
    cbit: int | None = None        # measurement result destination
    condition: tuple | None = None  # ("bit", i, v) or ("maj3", (i, j, k), v)

    @property
    def is_measurement(self) -> bool:
        return self.kind == MEASURE

    @property
    def is_reset(self) -> bool:
        return self.kind == RESET

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)


class ClassicalRegister:
    """Bits written by measurement gates; unwritten bits read as 0."""

    def __init__(self) -> None:
        self.bits: dict[int, int] = {}
        self.history: list[tuple[int, int]] = []

    def write(self, index: int, value: int) -> None:
        self.bits[index] = value
        self.history.append((index, value))

    def __getitem__(self, index: int) -> int:
        return self.bits.get(index, 0)

    def value(self, indices: Sequence[int]) -> int:
        """Bits assembled into an integer, first index most significant."""
        out = 0
        for i in indices:
            out = (out << 1) | self[i]
        return out


def _check_condition(cond: tuple, creg: ClassicalRegister) -> bool:
    tag = cond[0]
    if tag == "bit":
        return creg[cond[1]] == cond[2]
    if tag == "maj3":
        i, j, k = cond[1]
        maj = 1 if creg[i] + creg[j] + creg[k] >= 2 else 0
        return maj == cond[2]
    raise ValueError(f"unknown condition {cond!r}")


class Circuit:
    def __init__(self, width: int, name: str = "") -> None:
        if width < 1:
            raise ValueError("width must be positive")
        self.width = width
        self.name = name
        self.gates: list[PlacedGate] = []

    # -- builders ---------------------------------------------------------

    def add(self, gate: PlacedGate) -> "Circuit":
        for q in gate.qubits:
            if not 0 <= q < self.width:
                raise ValueError(f"qubit {q} outside width {self.width}")
        if len(set(gate.qubits)) != len(gate.qubits):
            raise ValueError("duplicate qubit indices in gate")
        self.gates.append(gate)
        return self

    def gate(self, name: str, *qubits: int, condition: tuple | None = None) -> "Circuit":
        m = linalg.gate_constant(name)
        if m.shape[0] != 2 ** len(qubits):
            raise ValueError(f"{name} expects {int(math.log2(m.shape[0]))} qubits")
        return self.add(PlacedGate(GATE, tuple(qubits), name=name, matrix=m,
                                   condition=condition))

    def unitary(self, matrix: np.ndarray, *qubits: int, name: str = "U",
                condition: tuple | None = None) -> "Circuit":
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (2 ** len(qubits),) * 2:
            raise ValueError("matrix shape does not match qubit count")
        return self.add(PlacedGate(GATE, tuple(qubits), name=name, matrix=matrix,
                                   condition=condition))

    def h(self, q: int, **kw) -> "Circuit":
        return self.gate("H", q, **kw)

    def x(self, q: int, **kw) -> "Circuit":
        return self.gate("X", q, **kw)

    def z(self, q: int, **kw) -> "Circuit":
        return self.gate("Z", q, **kw)

    def s(self, q: int, **kw) -> "Circuit":
        return self.gate("S", q, **kw)

    def t(self, q: int, **kw) -> "Circuit":
        return self.gate("T", q, **kw)

    def rz(self, theta: float, q: int, **kw) -> "Circuit":
        return self.add(PlacedGate(GATE, (q,), name=f"Rz({theta!r})",
                                   matrix=linalg.rz(theta), **kw))

    def phase(self, theta: float, q: int, **kw) -> "Circuit":
        return self.add(PlacedGate(GATE, (q,), name=f"P({theta!r})",
                                   matrix=linalg.phase(theta), **kw))

    def cnot(self, control: int, target: int, **kw) -> "Circuit":
        if control < target:
            return self.gate("CNOT", control, target, **kw)
        return self.gate("CNOT_reversed", target, control, **kw)

    def cz(self, a: int, b: int, **kw) -> "Circuit":
        return self.gate("CZ", min(a, b), max(a, b), **kw)

    def swap(self, a: int, b: int, **kw) -> "Circuit":
        return self.gate("SWAP", min(a, b), max(a, b), **kw)

    def cphase(self, theta: float, a: int, b: int, **kw) -> "Circuit":
        return self.add(PlacedGate(GATE, (min(a, b), max(a, b)),
                                   name=f"CP({theta!r})",
                                   matrix=linalg.controlled_phase(theta), **kw))

    def measure(self, q: int, cbit: int) -> "Circuit":
        return self.add(PlacedGate(MEASURE, (q,), name="MEASURE", cbit=cbit))

    def reset(self, q: int) -> "Circuit":
        return self.add(PlacedGate(RESET, (q,), name="RESET"))

    def extend(self, other: "Circuit", offset: int = 0) -> "Circuit":
        """Append another circuit's gates, shifting qubit indices by offset."""
        for g in other.gates:
            self.add(replace(g, qubits=tuple(q + offset for q in g.qubits)))
        return self

    def inverse(self) -> "Circuit":
        """Reversed circuit with each gate conjugate-transposed.

        Only defined for purely unitary circuits.
        """
        inv = Circuit(self.width, name=f"{self.name}^-1" if self.name else "")
        for g in reversed(self.gates):
            if g.kind != GATE or g.condition is not None:
                raise ValueError("inverse of non-unitary circuit")
            inv.add(replace(g, matrix=g.matrix.conj().T,
                            name=g.name + "^-1" if g.name else "U^-1"))
        return inv

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self) -> Iterator[PlacedGate]:
        return iter(self.gates)

    # -- accounting -------------------------------------------------------

    def counted_gates(self) -> int:
        """Number of counted gates: multi-qubit gates only (compound rule)."""
        return sum(1 for g in self.gates if g.kind == GATE and g.n_qubits >= 2)

    def gate_count(self, include_singles: bool = False) -> int:
        if include_singles:
            return sum(1 for g in self.gates if g.kind == GATE)
        return self.counted_gates()

    def layers(self, cc_single_depth: int = 0) -> list[int]:
        """Greedy left-to-right layer index for each gate.

        Multi-qubit gates, measurements and resets advance their qubits'
        clocks by one; bare single-qubit gates merge into the current layer
        of their qubit (classically controlled singles advance the clock
        when ``cc_single_depth`` is 1).
        """
        clock = [0] * self.width
        out: list[int] = []
        pending: list[int] = []            # indices of singles before any advance
        for idx, g in enumerate(self.gates):
            advances = (
                g.kind in (MEASURE, RESET)
                or g.n_qubits >= 2
                or (g.condition is not None and cc_single_depth)
            )
            if advances:
                t = max(clock[q] for q in g.qubits) + 1
                for q in g.qubits:
                    clock[q] = t
                out.append(t)
            else:
                q = g.qubits[0]
                if clock[q] == 0:
                    out.append(-1)         # fixed up below: joins next advance
                    pending.append(idx)
                else:
                    out.append(clock[q])
        # singles that precede any advancing gate on their qubit join the
        # layer of the next advancing gate there (or layer 1 if none).
        for idx in pending:
            q = self.gates[idx].qubits[0]
            layer = 1
            for jdx in range(idx + 1, len(self.gates)):
                g = self.gates[jdx]
                if q in g.qubits and out[jdx] >= 1:
                    layer = out[jdx]
                    break
            out[idx] = layer
        return out

    def depth(self, cc_single_depth: int = 0) -> int:
        if not self.gates:
            return 0
        return max(self.layers(cc_single_depth), default=0)

    def is_lnn(self) -> bool:
        """True iff every multi-qubit gate touches adjacent line indices."""
        for g in self.gates:
            if g.kind == GATE and g.n_qubits >= 2:
                qs = sorted(g.qubits)
                if any(b - a != 1 for a, b in zip(qs, qs[1:])):
                    return False
        return True

    # -- transformation ---------------------------------------------------

    def merge_compound(self) -> "Circuit":
        """Fuse runs of gates sharing one 2-qubit support into compound gates.

        Adjacent 2-qubit gates on the same pair, along with single-qubit
        gates on either member before and in between, become one
        explicit-matrix gate.  Measurements, resets and conditioned gates
        break runs.  The result is unitarily equivalent to the original.
        """
        out = Circuit(self.width, name=self.name)
        pending: dict[int, list[PlacedGate]] = {}   # buffered bare singles
        n = len(self.gates)

        def flush(qubits: Iterable[int]) -> None:
            for q in qubits:
                for s in pending.pop(q, []):
                    out.add(s)

        i = 0
        while i < n:
            g = self.gates[i]
            mergeable = g.kind == GATE and g.condition is None
            if mergeable and g.n_qubits == 1:
                pending.setdefault(g.qubits[0], []).append(g)
                i += 1
                continue
            if not (mergeable and g.n_qubits == 2):
                flush(list(pending.keys()) if g.kind != GATE or g.n_qubits > 2
                      else g.qubits)
                flush(g.qubits)
                out.add(g)
                i += 1
                continue
            pair = frozenset(g.qubits)
            order = g.qubits
            acc = np.eye(4, dtype=complex)
            count = 0
            for q in order:
                for s in pending.pop(q, []):
                    acc = _expand_pair(s.matrix, s.qubits, order) @ acc
                    count += 1
            acc = _expand_pair(g.matrix, g.qubits, order) @ acc
            count += 1
            j = i + 1
            while j < n:
                h = self.gates[j]
                if h.kind != GATE or h.condition is not None:
                    break
                if h.n_qubits == 1 and h.qubits[0] in pair:
                    acc = _expand_pair(h.matrix, h.qubits, order) @ acc
                    count += 1
                    j += 1
                elif h.n_qubits == 2 and frozenset(h.qubits) == pair:
                    acc = _expand_pair(h.matrix, h.qubits, order) @ acc
                    count += 1
                    j += 1
                else:
                    break
            if count > 1:
                out.unitary(acc, *order, name="compound")
            else:
                out.add(g)
            i = j
        flush(list(pending.keys()))
        return out

    # -- serialization ----------------------------------------------------

    def to_text(self) -> str:
        lines = [f"# circuit width={self.width} name={self.name}"]
        for g in self.gates:
            parts = []
            if g.condition is not None:
                if g.condition[0] == "bit":
                    parts.append(f"?c{g.condition[1]}={g.condition[2]}")
                else:
                    i, j, k = g.condition[1]
                    parts.append(f"?maj{i},{j},{k}={g.condition[2]}")
            if g.kind == MEASURE:
                parts.append(f"MEASURE {g.qubits[0]} -> {g.cbit}")
            elif g.kind == RESET:
                parts.append(f"RESET {g.qubits[0]}")
            else:
                name = g.name if _is_standard(g.name) else None
                if name is None:
                    flat = " ".join(repr(x) for z in g.matrix.ravel()
                                    for x in (z.real, z.imag))
                    parts.append("U%d %s %s" % (g.n_qubits,
                                                " ".join(map(str, g.qubits)), flat))
                else:
                    parts.append(f"{name} {' '.join(map(str, g.qubits))}")
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        header = lines[0]
        if not header.startswith("# circuit"):
            raise ValueError("missing circuit header")
        fields = dict(item.split("=", 1) for item in header[2:].split()[1:]
                      if "=" in item)
        c = cls(int(fields["width"]), name=fields.get("name", ""))
        for ln in lines[1:]:
            tokens = ln.split()
            condition = None
            if tokens[0].startswith("?"):
                tok = tokens.pop(0)[1:]
                lhs, val = tok.split("=")
                if lhs.startswith("maj"):
                    idxs = tuple(int(x) for x in lhs[3:].split(","))
                    condition = ("maj3", idxs, int(val))
                else:
                    condition = ("bit", int(lhs[1:]), int(val))
            op = tokens[0]
            if op == "MEASURE":
                c.measure(int(tokens[1]), int(tokens[3]))
            elif op == "RESET":
                c.reset(int(tokens[1]))
            elif op.startswith("U") and op[1:].isdigit():
                nq = int(op[1:])
                qubits = tuple(int(t) for t in tokens[1:1 + nq])
                vals = [float(t) for t in tokens[1 + nq:]]
                dim = 2 ** nq
                mat = np.array([complex(vals[2 * i], vals[2 * i + 1])
                                for i in range(dim * dim)]).reshape(dim, dim)
                c.unitary(mat, *qubits, condition=condition)
            else:
                qubits = [int(t) for t in tokens[1:]]
                if "(" in op:
                    head, arg = op[:-1].split("(", 1)
                    theta = float(arg)
                    if head == "Rz":
                        c.rz(theta, *qubits, condition=condition)
                    elif head == "P":
                        c.phase(theta, *qubits, condition=condition)
                    elif head == "CP":
                        c.cphase(theta, *qubits, condition=condition)
                    else:
                        c.add(PlacedGate(GATE, tuple(qubits), name=op,
                                         matrix=linalg.gate_constant(op),
                                         condition=condition))
                else:
                    c.gate(op, *qubits, condition=condition)
        return c


def _is_standard(name: str) -> bool:
    if not name:
        return False
    try:
        linalg.gate_constant(name)
    except (KeyError, ValueError):
        return False
    return True


def _expand_pair(matrix: np.ndarray, qubits: tuple[int, ...],
                 order: tuple[int, int]) -> np.ndarray:
    """Express a 1- or 2-qubit gate as a 4x4 matrix in basis |order>."""
    if len(qubits) == 2:
        if qubits == order:
            return matrix
        # swapped orientation
        sw = linalg.SWAP
        return sw @ matrix @ sw
    if qubits[0] == order[0]:
        return np.kron(matrix, linalg.I2)
    return np.kron(linalg.I2, matrix)


# -- execution -------------------------------------------------------------


def apply_unitary(state: np.ndarray, matrix: np.ndarray,
                  qubits: Sequence[int], width: int) -> np.ndarray:
    """Apply a k-qubit unitary to the given qubits of an MSB-first state."""
    k = len(qubits)
    psi = state.reshape((2,) * width)
    psi = np.moveaxis(psi, qubits, range(k))
    shp = psi.shape
    psi = matrix @ psi.reshape(2**k, -1)
    psi = np.moveaxis(psi.reshape(shp), range(k), qubits)
    return psi.reshape(-1)


def _prob_one(state: np.ndarray, qubit: int, width: int) -> float:
    psi = state.reshape((2,) * width)
    psi = np.moveaxis(psi, qubit, 0)
    return float(np.sum(np.abs(psi[1]) ** 2))


def _project(state: np.ndarray, qubit: int, width: int, value: int,
             norm: float) -> np.ndarray:
    psi = state.reshape((2,) * width).copy()
    psi = np.moveaxis(psi, qubit, 0)
    psi[1 - value] = 0.0
    psi /= math.sqrt(norm)
    return np.moveaxis(psi, 0, qubit).reshape(-1)


def run_statevector(
    circuit: Circuit,
    input_state: np.ndarray | None = None,
    seed: int | np.random.Generator | None = None,
    check_norm: bool = True,
) -> tuple[np.ndarray, ClassicalRegister]:
    """Execute a circuit on a state vector.

    Measurement outcomes are drawn from the given seed or Generator; the
    outcome stream is deterministic for a fixed seed.  Resets project and
    re-prepare |0>.  Classically controlled gates consult the register.
    """
    if circuit.width > 24:
        raise ValueError("statevector execution limited to 24 qubits")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if input_state is None:
        state = linalg.basis_state(circuit.width)
    else:
        state = np.array(input_state, dtype=complex)
        if state.shape != (2**circuit.width,):
            raise ValueError("input state has wrong dimension")
        if check_norm and not linalg.is_normalized(state):
            raise ValueError("input state is not normalized")
    creg = ClassicalRegister()
    for g in circuit.gates:
        if g.condition is not None and not _check_condition(g.condition, creg):
            continue
        if g.kind == GATE:
            state = apply_unitary(state, g.matrix, g.qubits, circuit.width)
        elif g.kind == MEASURE:
            p1 = _prob_one(state, g.qubits[0], circuit.width)
            outcome = 1 if rng.random() < p1 else 0
            state = _project(state, g.qubits[0], circuit.width, outcome,
                             p1 if outcome else 1.0 - p1)
            if g.cbit is not None:
                creg.write(g.cbit, outcome)
        else:  # RESET
            p1 = _prob_one(state, g.qubits[0], circuit.width)
            outcome = 1 if rng.random() < p1 else 0
            state = _project(state, g.qubits[0], circuit.width, outcome,
                             p1 if outcome else 1.0 - p1)
            if outcome:
                state = apply_unitary(state, linalg.X, g.qubits, circuit.width)
    return state, creg


@dataclass
class Branch:
    probability: float
    register: ClassicalRegister
    state: np.ndarray


def enumerate_branches(
    circuit: Circuit,
    input_state: np.ndarray | None = None,
    cutoff: float = 1e-12,
) -> list[Branch]:
    """Exhaustively enumerate measurement branches with exact probabilities.

    Returns one Branch per distinct outcome path with probability above the
    cutoff.  Useful for proving properties on every branch rather than
    sampling.
    """
    if input_state is None:
        input_state = linalg.basis_state(circuit.width)
    results: list[Branch] = []

    def walk(state: np.ndarray, idx: int, prob: float, creg: ClassicalRegister):
        for j in range(idx, len(circuit.gates)):
            g = circuit.gates[j]
            if g.condition is not None and not _check_condition(g.condition, creg):
                continue
            if g.kind == GATE:
                state = apply_unitary(state, g.matrix, g.qubits, circuit.width)
                continue
            p1 = _prob_one(state, g.qubits[0], circuit.width)
            for outcome in (0, 1):
                p = p1 if outcome else 1.0 - p1
                if p * prob <= cutoff:
                    continue
                sub = _project(state, g.qubits[0], circuit.width, outcome, p)
                creg2 = ClassicalRegister()
                creg2.bits = dict(creg.bits)
                creg2.history = list(creg.history)
                if g.kind == MEASURE and g.cbit is not None:
                    creg2.write(g.cbit, outcome)
                if g.kind == RESET and outcome:
                    sub = apply_unitary(sub, linalg.X, g.qubits, circuit.width)
                walk(sub, j + 1, prob * p, creg2)
            return
        results.append(Branch(prob, creg, state))

    walk(np.array(input_state, dtype=complex), 0, 1.0, ClassicalRegister())
    return results


def to_unitary(circuit: Circuit) -> np.ndarray:
    """Full unitary of a measurement-free circuit (width <= 12)."""
    if circuit.width > 12:
        raise ValueError("to_unitary supports at most 12 qubits")
    dim = 2**circuit.width
    u = np.eye(dim, dtype=complex)
    for g in circuit.gates:
        if g.kind != GATE or g.condition is not None:
            raise ValueError("to_unitary requires a purely unitary circuit")
        u = apply_unitary_to_matrix(u, g.matrix, g.qubits, circuit.width)
    return u


def apply_unitary_to_matrix(mat: np.ndarray, gate: np.ndarray,
                            qubits: Sequence[int], width: int) -> np.ndarray:
    """Left-multiply gate (on given qubits) onto a full 2^n x 2^n matrix."""
    k = len(qubits)
    dim = 2**width
    m = mat.reshape((2,) * width + (dim,))
    m = np.moveaxis(m, qubits, range(k))
    shp = m.shape
    m = gate @ m.reshape(2**k, -1)
    m = np.moveaxis(m.reshape(shp), range(k), qubits)
    return m.reshape(dim, dim)
