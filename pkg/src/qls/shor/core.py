"""Number-theoretic and spectral mathematics of quantum period finding.

Covers the measurement distribution of the period-finding register for the
exact and truncated (approximate) Fourier transforms, the probability of
useful output, continued-fraction postprocessing, and the scaling relation
between integer length and the smallest available controlled rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


def multiplicative_order(m: int, N: int) -> int:
    if math.gcd(m, N) != 1:
        raise ValueError("m and N must be coprime")
    r, x = 1, m % N
    while x != 1:
        x = (x * m) % N
        r += 1
    return r


@dataclass
class PeriodInstance:
    """A factoring instance: odd composite N, base m, derived L and r."""

    N: int
    m: int
    L: int = 0
    r: int = 0

    def __post_init__(self):
        if self.N % 2 == 0 or self.N < 9:
            raise ValueError("N must be an odd composite")
        if not 1 < self.m < self.N:
            raise ValueError("m must satisfy 1 < m < N")
        if math.gcd(self.m, self.N) != 1:
            raise ValueError("gcd(m, N) must be 1")
        if self.L == 0:
            self.L = self.N.bit_length()
        if self.r == 0:
            self.r = multiplicative_order(self.m, self.N)


@dataclass
class AqftSpec:
    """Truncated Fourier transform: rotations below pi/2^d_max are dropped.

    ``sigma`` adds a normally distributed angle to each retained controlled
    rotation, averaged over ``noise_draws`` samples.
    """

    n_bits: int
    d_max: int
    sigma: float = 0.0
    noise_draws: int = 64
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.d_max <= self.n_bits:
            raise ValueError("d_max out of range")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


def _geom_probability(j: int, r: int, two_l: int, M: int) -> float:
    """|sum_{p<M} exp(2 pi i j p r / 2^{2L})|^2 via the closed form."""
    if M <= 0:
        return 0.0
    x = (j * r) % (1 << two_l)
    ang = math.pi * x / (1 << (two_l - 1))
    s = math.sin(ang / 2)
    if abs(s) < 1e-9:
        # near-degenerate denominator: term-wise compensated sum
        total = 0.0 + 0.0j
        for p in range(M):
            total += complex(math.cos(ang * p), math.sin(ang * p))
        return abs(total) ** 2
    num = math.sin(ang * M / 2)
    return (num / s) ** 2


def pr_j(j: int, r: int, L: int, partial: str = "average") -> float:
    """Probability of measuring j after quantum period finding.

    ``partial`` selects the convention for periods not dividing 2^{2L}:
    "average" models the physical pre-measurement state (sum over the
    offset of the first period, weighted by its probability); "floor" is
    the idealized sum with floor(2^{2L}/r) terms.
    """
    two_l = 2 * L
    dim = 1 << two_l
    if not 0 <= j < dim:
        raise ValueError("j out of range")
    if not 1 <= r <= (1 << L):
        raise ValueError("r out of range")
    if dim % r == 0:
        return r / dim**2 * _geom_probability(j, r, two_l, dim // r)
    if partial == "floor":
        return r / dim**2 * _geom_probability(j, r, two_l, dim // r)
    if partial != "average":
        raise ValueError("partial must be 'average' or 'floor'")
    m_lo, rem = divmod(dim, r)
    # offsets k0 < rem contain one extra period
    hi = _geom_probability(j, r, two_l, m_lo + 1)
    lo = _geom_probability(j, r, two_l, m_lo)
    return (rem * hi + (r - rem) * lo) / dim**2


def _phase_weight_matrix(two_l: int, d_max: int) -> np.ndarray:
    """Bit-pair weights 2^{m+n} retained by the truncation.

    A term [j]_m [k]_n contributes the controlled rotation pi/2^d with
    d = 2L-1-(m+n); the transform keeps d <= d_max.
    """
    w = np.zeros((two_l, two_l))
    for m in range(two_l):
        for n in range(two_l):
            mn = m + n
            if mn < two_l and 2 * two_l > mn >= two_l - 1 - d_max:
                w[m, n] = float(1 << mn)
    return w


def _bits_matrix(values: np.ndarray, two_l: int) -> np.ndarray:
    out = np.zeros((len(values), two_l))
    for b in range(two_l):
        out[:, b] = (values >> b) & 1
    return out


def _noise_matrices(spec: AqftSpec, rng: np.random.Generator) -> np.ndarray:
    """Per-draw additive phase for each retained ordered bit pair."""
    two_l = spec.n_bits
    mask = _phase_weight_matrix(two_l, spec.d_max) > 0
    draws = np.zeros((spec.noise_draws, two_l, two_l))
    for d in range(spec.noise_draws):
        delta = rng.normal(0.0, spec.sigma, size=(two_l, two_l))
        draws[d][mask] = delta[mask]
    return draws


def _aqft_amplitudes(j_values: np.ndarray, r: int, L: int, spec: AqftSpec,
                     partial: str) -> np.ndarray:
    """Pr(j) for each j under the truncated transform."""
    two_l = 2 * L
    dim = 1 << two_l
    w = _phase_weight_matrix(two_l, spec.d_max)
    jbits = _bits_matrix(np.asarray(j_values, dtype=np.int64), two_l)
    if spec.sigma > 0:
        rng = np.random.default_rng(spec.seed)
        noise = _noise_matrices(spec, rng)
        acc = np.zeros(len(j_values))
        for d in range(spec.noise_draws):
            sub = AqftSpec(spec.n_bits, spec.d_max, 0.0)
            acc += _aqft_pr_core(jbits, r, L, w, partial,
                                 noise[d])
        return acc / spec.noise_draws
    return _aqft_pr_core(jbits, r, L, w, partial, None)


def _aqft_pr_core(jbits: np.ndarray, r: int, L: int, w: np.ndarray,
                  partial: str, noise: np.ndarray | None) -> np.ndarray:
    two_l = 2 * L
    dim = 1 << two_l
    m_lo, rem = divmod(dim, r)
    scale = 2 * math.pi / dim
    out = np.zeros(jbits.shape[0])
    if dim % r == 0 or partial == "floor":
        offsets = [(0, m_lo, r)]       # (k0, terms, weight-multiplier)
    else:
        offsets = [(k0, m_lo + (1 if k0 < rem else 0), 1) for k0 in range(r)]
    for k0, m_terms, mult in offsets:
        k = k0 + r * np.arange(m_terms, dtype=np.int64)
        kbits = _bits_matrix(k, two_l)
        # integer bilinear form, reduced mod 2^{2L} before scaling
        phases = np.mod(kbits @ w @ jbits.T, float(dim)) * scale
        if noise is not None:
            phases = phases + kbits @ noise @ jbits.T
        amps = np.exp(1j * phases).sum(axis=0)
        out += mult * np.abs(amps) ** 2
    return out / dim**2


def pr_j_aqft(j: int, r: int, L: int, spec: AqftSpec,
              partial: str = "average") -> float:
    """Probability of measuring j when the truncated transform is used."""
    if spec.n_bits != 2 * L:
        raise ValueError("spec.n_bits must equal 2L")
    return float(_aqft_amplitudes(np.array([j]), r, L, spec, partial)[0])


def useful_j_values(r: int, L: int) -> np.ndarray:
    """All j = floor/ceil of c*2^{2L}/r for 0 < c < r, deduplicated."""
    dim = 1 << (2 * L)
    vals = set()
    for c in range(1, r):
        vals.add(c * dim // r)
        vals.add(-((-c * dim) // r))   # ceiling
    return np.array(sorted(v for v in vals if v < dim), dtype=np.int64)


def usefulness_s(r: int, L: int, spec: AqftSpec | None = None,
                 partial: str = "average") -> float:
    """Probability s that period finding yields a useful j."""
    js = useful_j_values(r, L)
    if spec is None or (spec.d_max == 2 * L and spec.sigma == 0):
        return float(sum(pr_j(int(j), r, L, partial) for j in js))
    return float(np.sum(_aqft_amplitudes(js, r, L, spec, partial)))


def s_scaling_fit(d_max: int, l_values, partial: str = "floor") -> tuple[float, float]:
    """Least-squares fit of log2 s against L at r = 2^{L-1} + 2.

    Returns (slope, intercept).  The idealized "floor" sum keeps the large-L
    points tractable.
    """
    ls, logs = [], []
    for L in l_values:
        r = 2 ** (L - 1) + 2
        spec = AqftSpec(2 * L, d_max)
        s = usefulness_s(r, L, spec, partial)
        if s > 0:
            ls.append(L)
            logs.append(math.log2(s))
    slope, intercept = np.polyfit(ls, logs, 1)
    return float(slope), float(intercept)


@dataclass
class ConvergentList:
    denominators: list[int]
    convergents: list[Fraction]

    def __iter__(self):
        return iter(self.convergents)


def continued_fraction(j: int, denominator: int) -> ConvergentList:
    """Exact continued fraction expansion of j/denominator in (0, 1)."""
    if denominator <= 0:
        raise ValueError("denominator must be positive")
    if j == 0:
        return ConvergentList([], [])
    if not 0 < j < denominator:
        raise ValueError("expects 0 < j < denominator")
    terms: list[int] = []
    num, den = j, denominator
    # j/denominator = 1/(a1 + 1/(a2 + ...)) with integer terms a_i
    while num:
        a, rem = divmod(den, num)
        terms.append(a)
        den, num = num, rem
    convs: list[Fraction] = []
    for n in range(1, len(terms) + 1):
        value = Fraction(0)
        for a in reversed(terms[:n]):
            value = Fraction(1, a + value)
        convs.append(value)
    return ConvergentList(terms, convs)


@dataclass
class PostprocessResult:
    r: int | None
    candidates: list[tuple[int, int]]      # (numerator, denominator) tried
    evidence: list[str] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.r is not None


def postprocess(measurements, instance: PeriodInstance) -> PostprocessResult:
    """Recover the period from measured j values.

    For each j, every convergent denominator d < 2^L is tested directly via
    m^d mod N; failing that, pairs of denominators whose numerators are
    coprime are combined with the least common multiple.
    """
    N, m, L = instance.N, instance.m, instance.L
    dim = 1 << (2 * L)
    cands: list[tuple[int, int]] = []
    evidence: list[str] = []
    for j in measurements:
        if not 0 <= j < dim:
            raise ValueError("measurement out of range")
        if j == 0:
            continue
        for frac in continued_fraction(int(j), dim):
            c, d = frac.numerator, frac.denominator
            if d >= (1 << L) or d < 1:
                continue
            if (c, d) not in cands:
                cands.append((c, d))
            if d > 1 and pow(m, d, N) == 1:
                evidence.append(f"j={j}: denominator {d} has m^d = 1 mod N")
                return PostprocessResult(d, cands, evidence)
    for i in range(len(cands)):
        for k in range(i + 1, len(cands)):
            (c1, d1), (c2, d2) = cands[i], cands[k]
            if math.gcd(c1, c2) == 1:
                cand = d1 * d2 // math.gcd(d1, d2)
                if cand < (1 << L) and cand > 1 and pow(m, cand, N) == 1:
                    evidence.append(
                        f"lcm({d1},{d2})={cand} from coprime numerators "
                        f"{c1},{c2} has m^r = 1 mod N")
                    return PostprocessResult(cand, cands, evidence)
    return PostprocessResult(None, cands, evidence)


def lmax_relation(d_max: int, f_max: float) -> float:
    """Largest factorable integer length for a given rotation cutoff and
    acceptable number of period-finding repetitions."""
    if d_max < 1 or f_max < 1:
        raise ValueError("d_max and f_max must be at least 1")
    return 4.0 ** (d_max - 1) * math.log2(f_max)
