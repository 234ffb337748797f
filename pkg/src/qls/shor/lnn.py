"""Nearest-neighbor circuits for quantum period finding.

Constructors for the Fourier transform, conditional modular arithmetic,
register swapping, and the complete 2L+4 qubit factoring circuit with a
recycled control qubit, together with their closed-form gate and depth
counts.  All circuits are built from 1- and 2-qubit gates on adjacent
wires; compound gates are emitted as single explicit-matrix gates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import linalg
from ..circuit import Circuit
from .core import PeriodInstance, PostprocessResult, postprocess


def _cp(theta: float) -> np.ndarray:
    return linalg.controlled_phase(theta)


def _upper(m2: np.ndarray) -> np.ndarray:
    return np.kron(m2, linalg.I2)


def _lower(m2: np.ndarray) -> np.ndarray:
    return np.kron(linalg.I2, m2)


def qft_meetings(n: int) -> list[tuple[int, int, int]]:
    """Meeting schedule of the triangular reversal network.

    Logical lines a < b meet at layer a+b (1-indexed); returns tuples
    (a, b, upper_wire_position) in emission order.
    """
    pos = list(range(n))            # pos[line] = wire
    out = []
    for layer in range(1, 2 * n - 2):
        pairs = [(a, layer - a) for a in range(n)
                 if a < layer - a < n]
        for a, b in pairs:
            wa, wb = pos[a], pos[b]
            if abs(wa - wb) != 1:
                raise AssertionError("network schedule broken")
            out.append((a, b, min(wa, wb)))
            pos[a], pos[b] = wb, wa
    return out


def build_qft_lnn(L: int, offset: int = 0, width: int | None = None,
                  inverse: bool = False, d_max: int | None = None,
                  circuit: Circuit | None = None) -> Circuit:
    """Fourier transform on L adjacent wires without net line reversal.

    Each compound gate fuses the controlled phase, any Hadamards due on the
    pair, and the line swap.  ``d_max`` truncates controlled rotations of
    magnitude below pi/2^d_max (the swaps remain, so the count is
    unchanged).
    """
    if L < 2:
        raise ValueError("transform needs at least 2 wires")
    c = circuit if circuit is not None else Circuit(width or L, name="qft")
    sign = -1.0 if inverse else 1.0
    meetings = qft_meetings(L)
    if inverse:
        meetings = list(reversed(meetings))
    for a, b, w in meetings:
        d = b - a
        keep = d_max is None or d <= d_max
        m = _cp(sign * math.pi / 2 ** d) if keep else np.eye(4, dtype=complex)
        h_low = b == a + 1              # H of line b, after its last phase
        h_up = a == 0 and b == 1        # H of line 0, before everything
        if not inverse:
            if h_up:
                m = m @ _upper(linalg.H)
            if h_low:
                m = _lower(linalg.H) @ m
            m = linalg.SWAP @ m
        else:
            if h_low:
                m = m @ _lower(linalg.H)
            if h_up:
                m = _upper(linalg.H) @ m
            m = m @ linalg.SWAP
        c.unitary(m, offset + w, offset + w + 1, name="qftc")
    return c


def dft_matrix(L: int) -> np.ndarray:
    dim = 1 << L
    j, k = np.meshgrid(np.arange(dim), np.arange(dim), indexing="ij")
    return np.exp(2j * np.pi * j * k / dim) / math.sqrt(dim)


class _RegisterTracker:
    """Tracks which wire holds which named line while emitting gates."""

    def __init__(self, circuit: Circuit, positions: dict[str, int]):
        self.c = circuit
        self.pos = dict(positions)
        self.wire_of = dict(positions)

    def _swap_names(self, w1: int, w2: int) -> None:
        inv = {w: n for n, w in self.pos.items()}
        n1, n2 = inv.get(w1), inv.get(w2)
        if n1 is not None:
            self.pos[n1] = w2
        if n2 is not None:
            self.pos[n2] = w1

    def swap(self, w1: int, w2: int, fuse: np.ndarray | None = None,
             name: str = "swap") -> None:
        m = linalg.SWAP if fuse is None else linalg.SWAP @ fuse
        self.c.unitary(m, min(w1, w2), max(w1, w2), name=name)
        self._swap_names(w1, w2)

    def plain(self, m: np.ndarray, w1: int, w2: int, name: str = "g") -> None:
        self.c.unitary(m, min(w1, w2), max(w1, w2), name=name)


def _phi_angle(addend: int, bit: int, n: int) -> float:
    """Phase picked up by register bit `bit` (0 = least significant) when
    the classical value `addend` is added in Fourier space."""
    return 2.0 * math.pi * addend * (1 << bit) / (1 << n)


def _walk(tr: _RegisterTracker, ctrl: str, phi_lines: list[str],
          addend: int, n: int, down: bool, sign: float = 1.0) -> None:
    """Move a control through the register, fusing a controlled phase with
    each swap.  Lines are visited in spatial order along the walk."""
    order = sorted(phi_lines, key=lambda nm: tr.pos[nm], reverse=not down)
    for name in order:
        wc = tr.pos[ctrl]
        wr = tr.pos[name]
        bit = int(name[1:])
        theta = sign * _phi_angle(addend, bit, n)
        tr.swap(wc, wr, fuse=_cp(theta), name="walkc")


def _phi_rotations(tr: _RegisterTracker, phi_lines: list[str], addend: int,
                   n: int, sign: float, circuit: Circuit) -> None:
    for name in phi_lines:
        bit = int(name[1:])
        circuit.phase(sign * _phi_angle(addend, bit, n), tr.pos[name])


_SQRT_X = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])


def _tof5(tr: _RegisterTracker, c1: str, c2: str, tgt: str) -> None:
    """Five-gate Toffoli on consecutive wires (c1, c2, tgt); the control
    wires end up exchanged (tracked)."""
    a, b, t = tr.pos[c1], tr.pos[c2], tr.pos[tgt]
    if not (abs(a - b) == 1 and abs(b - t) == 1):
        raise AssertionError("toffoli operands not consecutive")
    cv = np.eye(4, dtype=complex)
    cv[2:, 2:] = _SQRT_X
    cvd = cv.conj().T

    def pair(w1, w2, m, name):
        if w1 < w2:
            tr.plain(m, w1, w2, name)
        else:
            tr.plain(linalg.SWAP @ m @ linalg.SWAP, w2, w1, name)

    pair(b, t, cv, "tof")
    pair(a, b, linalg.CNOT, "tof")
    pair(b, t, cvd, "tof")
    pair(a, b, linalg.SWAP @ linalg.CNOT, "tof")
    pair(b, t, cv, "tof")
    tr._swap_names(a, b)


def _qft_phi(tr: _RegisterTracker, phi_lines: list[str], inverse: bool,
             circuit: Circuit, d_max: int | None = None) -> None:
    """Fourier block on the register zone, honoring the current layout.

    The zone must be contiguous; line significance may run either way.
    """
    wires = sorted(tr.pos[name] for name in phi_lines)
    n = len(wires)
    if wires != list(range(wires[0], wires[0] + n)):
        raise AssertionError("register zone not contiguous")
    # order lines by significance: transform line 0 = most significant
    by_sig = sorted(phi_lines, key=lambda s: -int(s[1:]))
    posmap = {i: tr.pos[name] for i, name in enumerate(by_sig)}
    sign = -1.0 if inverse else 1.0
    # simulate the forward network once, recording wire geometry per gate
    record = []
    for a, b, _w in qft_meetings(n):
        wa, wb = posmap[a], posmap[b]
        record.append((a, b, min(wa, wb), wa < wb))
        posmap[a], posmap[b] = wb, wa
    if inverse:
        record = list(reversed(record))
    for a, b, lo, a_upper in record:
        d = b - a
        keep = d_max is None or d <= d_max
        m = _cp(sign * math.pi / 2 ** d) if keep else np.eye(4, dtype=complex)
        h_low = b == a + 1
        h_up = a == 0 and b == 1
        emb_a = _upper if a_upper else _lower
        emb_b = _lower if a_upper else _upper
        if not inverse:
            if h_up:
                m = m @ emb_a(linalg.H)
            if h_low:
                m = emb_b(linalg.H) @ m
            m = linalg.SWAP @ m
        else:
            if h_low:
                m = m @ emb_b(linalg.H)
            if h_up:
                m = emb_a(linalg.H) @ m
            m = m @ linalg.SWAP
        tr.plain(m, lo, lo + 1, "qftc")
    # net effect of the block preserves the significance layout, so the
    # tracker's line names are unchanged


def adder_layout(L: int) -> dict[str, int]:
    """Wire map of the conditional modular adder on 2L+4 wires.

    Multiplicand storage on top, then the active bit, control, work qubits,
    and the phase register with its most significant bit uppermost.
    """
    n = L + 1
    pos = {f"s{i}": i for i in range(L - 1)}
    pos["x"] = L - 1
    pos["k"] = L
    pos["kx"] = L + 1
    pos["ms"] = L + 2
    for b in range(n):
        pos[f"f{b}"] = 2 * L + 3 - b          # f0 (LSB) at the bottom
    return pos


def build_mod_add_lnn(L: int, addend: int, modulus: int,
                      circuit: Circuit | None = None,
                      tracker: _RegisterTracker | None = None,
                      d_max: int | None = None) -> Circuit:
    """Conditional modular addition in Fourier space.

    Adds ``addend`` mod ``modulus`` to the L+1 qubit phase register iff both
    the active multiplicand bit and the control qubit are 1.  The register
    is expected and left Fourier-transformed.  The work qubits travel
    through the transform blocks as woven swap lines, so the gate count is
    2L^2+8L+22 at depth 8L+16.
    """
    if not 0 <= addend < modulus < (1 << L):
        raise ValueError("need 0 <= addend < modulus < 2^L")
    n = L + 1
    if tracker is None:
        c = circuit if circuit is not None else Circuit(2 * L + 4, name="modadd")
        tr = _RegisterTracker(c, adder_layout(L))
    else:
        tr = tracker
        c = tr.c
    phi = [f"f{b}" for b in range(n)]
    # the multiplicand bit currently in the active slot, just above k
    active = {w: nm for nm, w in tr.pos.items()}[tr.pos["k"] - 1]
    _tof5(tr, active, "k", "kx")
    tr.swap(tr.pos["kx"], tr.pos["ms"], name="seat")
    _walk(tr, "kx", phi, addend, n, down=True)
    _phi_rotations(tr, phi, modulus, n, -1.0, c)
    _qft_phi(tr, phi, inverse=True, circuit=c, d_max=d_max)
    c.cnot(tr.pos[f"f{n-1}"], tr.pos["ms"])
    _fourier_block_ext(tr, phi, c, inverse=False,
                       riders=[("kx", addend, -1.0, n)], d_max=d_max)
    tr.swap(tr.pos["ms"], tr.pos["kx"], name="seat")
    _walk(tr, "ms", phi, modulus, n, down=True)
    _fourier_block_ext(tr, phi, c, inverse=True,
                       riders=[("ms", None, 1.0, n)], d_max=d_max)
    w_msb, w_ms = tr.pos[f"f{n-1}"], tr.pos["ms"]
    c.x(w_msb)
    c.cnot(w_msb, w_ms)
    c.x(w_msb)
    tr.swap(tr.pos["kx"], tr.pos["ms"], name="seat")
    _walk(tr, "kx", phi, 0, n, down=True)       # plain positioning descent
    _fourier_block_ext(tr, phi, c, inverse=False,
                       riders=[("kx", addend, 1.0, n)], d_max=d_max)
    tr.swap(tr.pos["ms"], tr.pos["kx"], name="seat")
    _tof5(tr, "k", active, "kx")        # roles swapped by the first toffoli
    return c


def _fourier_block_ext(tr: _RegisterTracker, phi_lines: list[str],
                       circuit: Circuit, inverse: bool,
                       riders: list[tuple[str, int | None, float, int]],
                       d_max: int | None = None) -> None:
    """Fourier block with extra lines (riders) woven through the network.

    Riders cross the register during the transform as additional lines of
    the triangle network: on a forward block they enter from the far side
    of the most-significant end and may carry late-applying phase payloads
    (addend, sign, n_bits); on an inverse block they enter from the
    most-significant side with early payloads.  Each rider contributes one
    compound gate per line it crosses.
    """
    n_z = len(phi_lines)
    n_tot = n_z + len(riders)
    zone_wires = sorted(tr.pos[name] for name in phi_lines)
    if zone_wires != list(range(zone_wires[0], zone_wires[0] + n_z)):
        raise AssertionError("register zone not contiguous")
    by_sig = sorted(phi_lines, key=lambda s: -int(s[1:]))
    msb_wire = tr.pos[by_sig[0]]
    anchor_top = msb_wire == zone_wires[0]
    # rider wires must extend the span on the entry side
    rider_names = [r[0] for r in riders]
    rider_wires = [tr.pos[nm] for nm in rider_names]
    span = sorted(zone_wires + rider_wires)
    if span != list(range(span[0], span[0] + n_tot)):
        raise AssertionError("riders do not extend the zone contiguously")

    # positions indexed from the anchor end
    def pos_of(wire: int) -> int:
        return (wire - span[0]) if anchor_top else (span[-1] - wire)

    def wire_of(pos: int) -> int:
        return (span[0] + pos) if anchor_top else (span[-1] - pos)

    # Line index = forward-network entry position; inverse blocks replay
    # the forward network backwards, so current positions mirror.  Zone
    # lines take the consecutive indices left free by the riders; the
    # register must sit most-significant-first toward the anchor.
    n_r = len(riders)
    rider_line = {}
    payloads = {}
    for nm, addend, sign, nbits in riders:
        p = pos_of(tr.pos[nm])
        line = p if not inverse else n_tot - 1 - p
        rider_line[nm] = line
        payloads[line] = (addend, sign, nbits)
    zone_lines = sorted(set(range(n_tot)) - set(rider_line.values()))
    if zone_lines != list(range(zone_lines[0], zone_lines[0] + n_z)):
        raise AssertionError("rider positions split the register lines")
    z0 = zone_lines[0]
    zone_entry0 = z0 if not inverse else n_tot - n_z - z0
    for i, name in enumerate(by_sig):
        if pos_of(tr.pos[name]) != zone_entry0 + i:
            raise AssertionError("zone must be ordered most-significant "
                                 "toward the anchor")
    sig_of_line = {i: int(by_sig[i][1:]) for i in range(n_z)}
    qsign = -1.0 if inverse else 1.0

    # forward schedule with positions; payload phases are valid late on a
    # forward block and early (by the dagger construction) on an inverse one
    posmap = {i: i for i in range(n_tot)}
    record = []
    for a, b, _w in qft_meetings(n_tot):
        pa, pb = posmap[a], posmap[b]
        record.append((a, b, min(pa, pb), pa < pb))
        posmap[a], posmap[b] = pb, pa
    if inverse:
        record = list(reversed(record))
    zlo, zhi = z0, z0 + n_z - 1
    for a, b, lo_pos, a_first in record:
        if zlo <= a <= zhi and zlo <= b <= zhi:     # zone-zone meeting
            la, lb = a - z0, b - z0
            d = lb - la
            keep = d_max is None or d <= d_max
            m = _cp(qsign * math.pi / 2 ** d) if keep else np.eye(4, dtype=complex)
            h_low = lb == la + 1
            h_up = la == 0 and lb == 1
            emb_a = _upper if (a_first == anchor_top) else _lower
            emb_b = _lower if (a_first == anchor_top) else _upper
            if not inverse:
                if h_up:
                    m = m @ emb_a(linalg.H)
                if h_low:
                    m = emb_b(linalg.H) @ m
                m = linalg.SWAP @ m
            else:
                if h_low:
                    m = m @ emb_b(linalg.H)
                if h_up:
                    m = emb_a(linalg.H) @ m
                m = m @ linalg.SWAP
        elif (zlo <= a <= zhi) != (zlo <= b <= zhi):   # rider meets zone line
            rider = b if zlo <= a <= zhi else a
            zline = a if rider == b else b
            addend, sgn, nbits = payloads[rider]
            if addend is None:
                m = linalg.SWAP
            else:
                if rider > zline:
                    # after the line's processing it carries the transform
                    # bit of significance = local index (bit reversal)
                    sig = zline - z0
                else:
                    # before processing the line still carries its input bit
                    sig = n_z - 1 - (zline - z0)
                theta = sgn * _phi_angle(addend, sig, nbits)
                m = linalg.SWAP @ _cp(theta)
        else:                            # rider-rider crossing
            m = linalg.SWAP
        w_lo = wire_of(lo_pos) if anchor_top else wire_of(lo_pos + 1)
        tr.plain(m, w_lo, w_lo + 1, "qftx")
    # riders physically cross to the other side; the register keeps its
    # semantic orientation in the span they vacated
    for nm, line in rider_line.items():
        tr.pos[nm] = wire_of(n_tot - 1 - line) if not inverse else wire_of(line)
    for i, name in enumerate(by_sig):
        tr.pos[name] = (wire_of(n_tot - n_z - z0 + i) if not inverse
                        else wire_of(z0 + i))
    if sorted(tr.pos.values()) != sorted(set(tr.pos.values())):
        raise AssertionError("tracker positions collided")


# Frozen six-gate controlled-swap block: gates alternate between the
# (control, upper) and (upper, lower) pairs; the control exits below.
_CSWAP_BLOCK_PAIRS = (0, 1, 0, 1, 0, 1)
_CSWAP_BLOCK = [
    np.array([
        [complex(-0.42818820943075453, -0.4701361385078481), complex(-0.12071508972944234, 0.5066696234445685), complex(0.288966745165038, -0.453580117308701), complex(-0.17831121853596962, 0.05752421297794866)],
        [complex(-0.2557951613859397, 0.4537125473484166), complex(-0.6336180786525134, 0.05386336260653661), complex(-0.11334285174601631, 0.14918888595533922), complex(-0.5236931564304912, 0.12240171786752)],
        [complex(-0.3804672766136, 0.22216704521904856), complex(0.32586363086964354, 0.15504830822968077), complex(0.5532198353105254, 0.5444992632987018), complex(-0.027494706471053967, -0.2690200342700725)],
        [complex(0.27045084290896526, 0.2389213790732499), complex(-0.05510879301193773, 0.4371230553149763), complex(-0.1764509399876297, -0.20492145690503547), complex(-0.015050817733013727, -0.7760831829123738)],
    ]),
    np.array([
        [complex(-0.2373754410477491, -0.24862301745727194), complex(-0.1535772180103494, 0.20589663023927696), complex(0.36118566034093824, 0.04116983974071595), complex(-0.4996961304112384, -0.6587972762952035)],
        [complex(-0.7294926774728202, -0.03155696328314416), complex(0.11928240304527249, -0.41973240724549843), complex(-0.43725920642083455, 0.2787436994466368), complex(-0.036558020104759226, -0.07880897029254692)],
        [complex(0.47364811469528156, 0.08788458376051146), complex(-0.26209743843267563, -0.2451196523430743), complex(-0.6173062269529047, -0.09827449958954906), complex(-0.4434456084954476, -0.2275657913368837)],
        [complex(-0.26718463939867987, 0.21267397257763915), complex(-0.299781987234294, 0.724547499704508), complex(-0.43490268066595883, -0.13817055664643207), complex(0.22265748718670947, -0.1036148140206071)],
    ]),
    np.array([
        [complex(-0.12203578986234676, -0.334605628607786), complex(-0.48407166798915724, -0.5374161667922183), complex(0.2246179185096608, -0.13706683434811023), complex(0.4517322341643081, -0.27695177457512965)],
        [complex(-0.043474231383385166, -0.09806320462863566), complex(0.29472805952655046, -0.5016311326547782), complex(-0.024744163708918993, 0.004955710211219124), complex(-0.6464694880638843, -0.4810774834513178)],
        [complex(-0.5670728769414791, 0.272565006932032), complex(0.2742916599115517, -0.23702456908547692), complex(-0.3753895669980134, -0.5168415183838624), complex(0.19242493330375, 0.16628370663724112)],
        [complex(-0.5924422031145226, 0.3388050229889077), complex(0.08027946583482702, -0.022331769250030005), complex(0.4683327464053379, 0.5502223163530947), complex(0.05925116543113815, -0.04109783984901541)],
    ]),
    np.array([
        [complex(-0.6829765121703624, 0.14239390374403757), complex(0.4590363047984575, 0.06493907485923951), complex(-0.25736635542603703, 0.20703228231820406), complex(-0.42375523487858985, 0.09832263991253314)],
        [complex(-0.44183954100252953, 0.2764867452653991), complex(0.14943072779616484, 0.06587112207236907), complex(0.0565507952914477, -0.3055055007853832), complex(0.7328743854780245, -0.26082155627639686)],
        [complex(-0.07308739420725734, -0.3978830538745312), complex(0.3762498613209849, -0.5998687543966906), complex(0.48717273534898675, 0.05636743166963244), complex(-0.03931248068476009, -0.3047635067457034)],
        [complex(0.07498436101673085, -0.2689323586884683), complex(0.08927351625757245, -0.4990228441165304), complex(-0.741259304652734, -0.06624704944306983), complex(0.2717055850982477, 0.1933422331780607)],
    ]),
    np.array([
        [complex(-0.40014913392707707, 0.4601871163856983), complex(0.16093075728260686, -0.14093101569619948), complex(0.21606190056986377, -0.5211819009068959), complex(-0.18426229452373616, -0.4796689658622614)],
        [complex(-0.061949297076308495, -0.14673576368195906), complex(0.4124017022798334, 0.5645297053648469), complex(-0.41286834174901726, -0.4912840282822184), complex(0.232063142218089, 0.1420858259147586)],
        [complex(-0.339404526826908, 0.10116811762311666), complex(-0.2677626528981772, -0.48106643769170065), complex(-0.13359006977161528, -0.28662353241216254), complex(0.46660497853590865, 0.503714464073684)],
        [complex(-0.4942953449087882, 0.4826811369071197), complex(-0.0019056542097927592, 0.4029210848469464), complex(-0.027937307679495517, 0.4112013715821438), complex(-0.2151869513414575, 0.37969660883960965)],
    ]),
    np.array([
        [complex(0.54490268960187, -0.4171177749113814), complex(0.41332969673385356, -0.19102998548720657), complex(-0.32736410998775406, 0.34092902548119114), complex(-0.2614231978039959, 0.1732569706724345)],
        [complex(0.0646532815347867, 0.0476947637556069), complex(-0.07936456326748922, -0.09144280441096811), complex(0.46477673096673033, 0.28848173745136385), complex(-0.5884516446042115, -0.5773821800050802)],
        [complex(-0.4406020377572906, 0.17108391288415156), complex(-0.31010403621151444, 0.046856728033268534), complex(-0.5945878195286383, 0.3425952482895124), complex(-0.4346892697043532, 0.13556965870443854)],
        [complex(-0.3528471144011693, 0.4180167895549728), complex(0.6566313635256286, -0.4984784571667006), complex(0.046744794568442466, -0.06534341193780448), complex(-0.09027316498648134, 0.08069247836388128)],
    ]),
]


def _mesh_schedule(L: int) -> list[list[int]]:
    """Layered adjacent swaps interleaving [A1..AL B1..BL] to [A1 B1 A2 B2..].

    Returned as layers of swap positions (0-based, relative to the 2L-wire
    block); L(L-1)/2 swaps in L-1 layers.
    """
    target = {}
    for j in range(L):
        target[j] = 2 * j          # A_j: position j -> 2j
        target[L + j] = 2 * j + 1  # B_j
    cur = list(range(2 * L))
    layers = []
    while [target[q] for q in cur] != list(range(2 * L)):
        layer = []
        p = 0
        while p < 2 * L - 1:
            if target[cur[p]] > target[cur[p + 1]]:
                layer.append(p)
                cur[p], cur[p + 1] = cur[p + 1], cur[p]
                p += 2
            else:
                p += 1
        if not layer:
            raise AssertionError("mesh schedule stalled")
        layers.append(layer)
    return layers


def build_cswap_lnn(L: int) -> Circuit:
    """Controlled swap of two L-qubit registers on a line.

    Control on wire 0, registers on wires 1..L and L+1..2L.  The registers
    are meshed, conditionally swapped pairwise with the control walking to
    the far end, and unmeshed.  Gate count L^2+5L, depth 6L.
    """
    if L < 2:
        raise ValueError("needs L >= 2")
    c = Circuit(2 * L + 1, name="cswap")
    mesh = _mesh_schedule(L)
    for layer in mesh:
        for p in layer:
            c.swap(1 + p, 2 + p)
    for j in range(L):
        base = 2 * j               # control wire before pair j
        for g, pair in zip(_CSWAP_BLOCK, _CSWAP_BLOCK_PAIRS):
            w = base + pair
            c.unitary(g, w, w + 1, name="fredkin")
    # the control's passage shifted the registers up one wire
    for layer in reversed(mesh):
        for p in reversed(layer):
            c.swap(p, 1 + p)
    return c


def _bubble(tr: _RegisterTracker, name: str, target: int,
            label: str = "move") -> int:
    """Move a line to a target wire with adjacent swaps; returns swap count."""
    n = 0
    while tr.pos[name] != target:
        w = tr.pos[name]
        step = w + (1 if target > w else -1)
        tr.swap(w, step, name=label)
        n += 1
    return n


def _x_rotation(tr: _RegisterTracker, L: int) -> None:
    """Rotate the multiplicand register by one slot (consumed bit to top)."""
    for w in range(L - 1, 0, -1):
        tr.swap(w, w - 1, name="rot")


def build_mod_mult_lnn(L: int, multiplier: int, modulus: int,
                       circuit: Circuit | None = None,
                       tracker: _RegisterTracker | None = None,
                       d_max: int | None = None) -> Circuit:
    """Conditional modular multiplication |x, phi(0)> -> |a x mod N, phi(0)>.

    Multiply-into-temporary via L conditional additions, controlled register
    swap, then the inverse multiplication clears the temporary.  The phase
    register is expected and left Fourier-transformed.  Gate count
    4L^3+20L^2+58L-2.
    """
    if math.gcd(multiplier, modulus) != 1:
        raise ValueError("multiplier must be invertible mod modulus")
    n = L + 1
    if tracker is None:
        c = circuit if circuit is not None else Circuit(2 * L + 4, name="modmult")
        tr = _RegisterTracker(c, adder_layout(L))
    else:
        tr = tracker
        c = tr.c
    inv = pow(multiplier, -1, modulus)

    def add_phase(value: int, subtract: bool) -> None:
        for bit in range(L):
            addend = (value << bit) % modulus
            if subtract:
                addend = (modulus - addend) % modulus
            build_mod_add_lnn(L, addend, modulus, tracker=tr, d_max=d_max)
            _x_rotation(tr, L)

    add_phase(multiplier, subtract=False)
    phi = [f"f{b}" for b in range(n)]
    _qft_phi(tr, phi, inverse=True, circuit=c, d_max=d_max)

    # clear the corridor: the work qubits sink below the value bits and the
    # control climbs over the multiplicand block, leaving the two registers
    # contiguous with the control on top
    _bubble(tr, f"f{n-1}", 2 * L + 3, "park")
    _bubble(tr, "ms", 2 * L + 2, "park")
    _bubble(tr, "kx", 2 * L + 1, "park")
    _bubble(tr, "k", 0, "park")
    mesh = _mesh_schedule(L)
    for layer in mesh:
        for p in layer:
            tr.swap(1 + p, 2 + p, name="mesh")
    for j in range(L):
        base = 2 * j
        for g, pair in zip(_CSWAP_BLOCK, _CSWAP_BLOCK_PAIRS):
            w = base + pair
            tr.plain(g, w, w + 1, "fredkin")
        tr._swap_names(base, base + 1)
        tr._swap_names(base + 1, base + 2)
    for layer in reversed(mesh):
        for p in reversed(layer):
            tr.swap(p, 1 + p, name="mesh")
    # restore the working layout
    _bubble(tr, "k", L, "park")
    _bubble(tr, "kx", L + 1, "park")
    _bubble(tr, "ms", L + 2, "park")
    _bubble(tr, f"f{n-1}", L + 3, "park")
    _qft_phi(tr, phi, inverse=False, circuit=c, d_max=d_max)
    add_phase(inv, subtract=True)
    return c


@dataclass
class ShorCircuitSpec:
    """Parameters of the complete period-finding circuit."""

    N: int
    m: int
    d_max: int | None = None

    def __post_init__(self):
        self.instance = PeriodInstance(self.N, self.m)
        self.L = self.instance.L


def build_shor_lnn(spec: ShorCircuitSpec) -> Circuit:
    """Complete 2L+4 qubit period-finding circuit with a recycled control.

    One control qubit is prepared, controls a modular multiplication, takes
    the measurement-based Fourier rotation, and is measured and reset 2L
    times; measured bits assemble j least-significant first.  ``d_max``
    drops classical rotations of magnitude below pi/2^d_max.
    """
    N, m, L = spec.N, spec.m, spec.L
    n = L + 1
    width = 2 * L + 4
    c = Circuit(width, name=f"shor-N{N}-m{m}")
    tr = _RegisterTracker(c, adder_layout(L))
    phi = [f"f{b}" for b in range(n)]
    c.x(L - 1)                          # multiplicand register starts at 1
    _qft_phi(tr, phi, inverse=False, circuit=c)   # phase register to phi(0)
    k_wire = tr.pos["k"]
    for t in range(2 * L):
        i = 2 * L - 1 - t               # exponent processed this round
        c.h(k_wire)
        a = pow(m, 1 << i, N)
        build_mod_mult_lnn(L, a, N, tracker=tr, d_max=spec.d_max)
        # measurement-based Fourier rotation from earlier bits
        for s in range(t):
            d = t - s + 1
            if spec.d_max is not None and d > spec.d_max:
                continue
            c.phase(-math.pi / 2 ** (t - s), k_wire,
                    condition=("bit", s, 1))
        c.h(k_wire)
        c.measure(k_wire, t)
        c.reset(k_wire)
    return c


def run_shor_shots(spec: ShorCircuitSpec, shots: int, seed: int = 0,
                   batch: int = 500) -> list[int]:
    """Simulate the circuit and return the measured j values.

    Shots are vectorized: unitary gates broadcast over the batch while
    measurements, resets and classically controlled rotations act per shot.
    """
    circ = build_shor_lnn(spec)
    width = circ.width
    dim = 1 << width
    rng = np.random.default_rng(seed)
    n_bits = 2 * spec.L
    out: list[int] = []
    done = 0
    while done < shots:
        b = min(batch, shots - done)
        state = np.zeros((b, dim), dtype=complex)
        state[:, 0] = 1.0
        bits = np.zeros((b, n_bits), dtype=np.int64)
        for g in circ.gates:
            qs = g.qubits
            if g.kind == "gate" and g.condition is None:
                if len(qs) == 1:
                    q = qs[0]
                    view = state.reshape(b, 1 << q, 2, -1)
                    np.matmul(g.matrix, view, out=view)
                else:
                    a = min(qs)
                    if max(qs) != a + 1:
                        raise AssertionError("non-adjacent gate")
                    view = state.reshape(b, 1 << a, 4, -1)
                    np.matmul(g.matrix, view, out=view)
            elif g.kind == "gate":
                # classically controlled single-qubit diagonal
                tag, s, val = g.condition
                mask = bits[:, s] == val
                q = qs[0]
                view = state.reshape(b, 1 << q, 2, -1)
                factors = np.where(mask, g.matrix[1, 1], 1.0)
                view[:, :, 1, :] *= factors[:, None, None]
                if abs(g.matrix[0, 0] - 1.0) > 1e-12:
                    view[:, :, 0, :] *= np.where(mask, g.matrix[0, 0], 1.0)
            else:
                q = qs[0]
                view = state.reshape(b, 1 << q, 2, -1)
                p1 = np.einsum("aqc->a", np.abs(view[:, :, 1, :]) ** 2).real
                outcome = (rng.random(b) < p1).astype(np.int64)
                keep = np.where(outcome == 1, p1, 1.0 - p1)
                sel = np.arange(b)
                view[sel, :, 1 - outcome, :] = 0.0
                state *= 1.0 / np.sqrt(np.maximum(keep, 1e-300))[:, None]
                if g.kind == "measure" and g.cbit is not None:
                    bits[:, g.cbit] = outcome
                if g.kind == "reset":
                    idx = np.nonzero(outcome)[0]
                    if idx.size:
                        sub = view[idx]
                        view[idx] = sub[:, :, ::-1, :]
        out.extend(int(x) for x in
                   (bits * (1 << np.arange(n_bits))).sum(axis=1))
        done += b
    return out


def factor_with_shots(N: int, m: int, shots: int, seed: int = 0,
                      d_max: int | None = None) -> dict:
    """Factor N via simulated period finding plus classical postprocessing."""
    spec = ShorCircuitSpec(N, m, d_max)
    js = run_shor_shots(spec, shots, seed)
    result = postprocess(js, spec.instance)
    out = {"N": N, "m": m, "shots": shots, "j_values": js,
           "r": result.r, "factors": None, "evidence": result.evidence}
    if result.r is not None and result.r % 2 == 0:
        y = pow(m, result.r // 2, N)
        if y != N - 1:
            f1, f2 = math.gcd(y - 1, N), math.gcd(y + 1, N)
            if 1 < f1 < N:
                out["factors"] = tuple(sorted((f1, N // f1)))
            elif 1 < f2 < N:
                out["factors"] = tuple(sorted((f2, N // f2)))
    return out


def count_formulas(L: int) -> dict:
    """Closed-form gate and depth counts for the period-finding circuits."""
    if L < 2:
        raise ValueError("L must be at least 2")
    return {
        "qft": {"lnn_gates": L * (L - 1) // 2, "lnn_depth": 2 * L - 3,
                "general_gates": L * (L - 1) // 2, "general_depth": 2 * L - 3},
        "mod_add": {"lnn_gates": 2 * L * L + 8 * L + 22,
                    "lnn_depth": 8 * L + 16,
                    "general_gates": 2 * L * L + 6 * L + 14,
                    "general_depth": 8 * L + 13},
        "cswap": {"lnn_gates": L * L + 5 * L, "lnn_depth": 6 * L,
                  "general_gates": 6 * L, "general_depth": 4 * L + 2},
        "mod_mult": {"lnn_gates": 4 * L**3 + 20 * L * L + 58 * L - 2,
                     "lnn_depth": 16 * L * L + 40 * L - 7,
                     "general_gates": 4 * L**3 + 13 * L * L + 35 * L + 4,
                     "general_depth": 16 * L * L + 33 * L - 6},
        "full": {"lnn_gates": 8 * L**4 + 40 * L**3 + 116.5 * L * L + 4.5 * L - 2,
                 "lnn_depth": 32 * L**3 + 80 * L * L - 4 * L - 2,
                 "general_gates": 8 * L**4 + 26 * L**3 + 70.5 * L * L + 8.5 * L - 1,
                 "general_depth": 32 * L**3 + 66 * L * L - 2 * L - 1,
                 "width": 2 * L + 4},
    }
