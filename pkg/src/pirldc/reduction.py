"""One quantum query from two classical ones, and the random access code sieve.

The query register is ``position (m) (x) phase subset (2^ell)``; a basis
index is ``j * 2^ell + T`` where bit ``k`` of ``T`` says whether answer bit
``k`` (0-based) lies in the subset.  The oracle multiplies ``|j>|z_T>`` by
``(-1)^(T . y_j)``, so states are stored directly in the phase basis.

Within a selection set ``S = {s_1 < ... < s_b}`` the element ``s_q`` maps to
data qubit ``q``, qubit 1 being the most significant bit of the b-bit index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bits import as_bits
from .bounds import low_weight_count
from .codes import Code, DecoderSpec, query_histogram
from .errors import NotAPOVM, PirError, SelectionMismatch
from .linalg import measure_probability, popcount, walsh_hadamard
from .superposed import branch_projector, build_decoding_unitary, run_superposed

MAX_RAC_DIM = 2**16
MAX_SIEVE_DIM = 2**22
LEAK_TOL = 1e-12


def phase_table(y: np.ndarray) -> np.ndarray:
    """``(-1)^(T . y_j)`` for every position ``j`` and subset index ``T``."""
    y = np.asarray(y, dtype=np.int64)
    m, ell = y.shape
    y_idx = y @ (1 << np.arange(ell, dtype=np.int64))
    T = np.arange(1 << ell, dtype=np.int64)
    return 1.0 - 2.0 * (popcount(y_idx[:, None] & T[None, :]) & 1)


@lru_cache(maxsize=None)
def _subsets(selection: tuple[int, ...]) -> np.ndarray:
    b = len(selection)
    out = np.zeros(1 << b, dtype=np.int64)
    for t in range(1 << b):
        for q, s in enumerate(selection):
            if (t >> (b - 1 - q)) & 1:
                out[t] |= 1 << s
    return out


def subsets_of(selection) -> np.ndarray:
    """Register index of ``T`` for each b-bit index ``t``, following the qubit map."""
    return _subsets(tuple(int(s) for s in selection))


def query_state(decoder: DecoderSpec, i: int, r: int) -> np.ndarray:
    """``|Q_ir>``: both queried positions, each with a uniform superposition over ``T`` in ``S``."""
    d = 1 << decoder.ell
    state = np.zeros((decoder.m, d))
    amp = 1.0 / math.sqrt(2 * (1 << decoder.b))
    for s in (0, 1):
        state[decoder.queries[i, r, s], subsets_of(decoder.selections[i, r, s])] = amp
    return state.ravel()


def relabel_to_superposed(state: np.ndarray, decoder: DecoderSpec, i: int, r: int) -> np.ndarray:
    """Map an answered query state onto ``(|0,a0> + |1,a1>)/sqrt(2)``.

    Each branch's ``2^b`` phase amplitudes are routed to the data qubits and
    passed through ``H^(x)b``.  Raises if the state has weight outside the
    two branches' subset blocks, where this map is undefined.
    """
    b = decoder.b
    k = 1 << b
    grid = np.asarray(state, dtype=float).reshape(decoder.m, 1 << decoder.ell)
    H = walsh_hadamard(b)
    psi = np.zeros(2 * k)
    captured = 0.0
    for s in (0, 1):
        block = grid[decoder.queries[i, r, s], subsets_of(decoder.selections[i, r, s])]
        captured += float(block @ block)
        psi[s * k : (s + 1) * k] = H @ block
    if abs(captured - float(grid.ravel() @ grid.ravel())) > LEAK_TOL:
        raise SelectionMismatch("state has support outside the selection sets of this query")
    return psi


def superposed_output_prob(psi: np.ndarray, decoder: DecoderSpec, i: int, r: int, target: int) -> float:
    """Run the superposed-input algorithm for this ``(i, r)``'s ``f``; Pr[output = target]."""
    dec = build_decoding_unitary(decoder.function(i, r))
    ext = np.zeros(2 * len(psi))
    ext[0::2] = psi
    final = run_superposed(dec, ext)
    return measure_probability(final, branch_projector(decoder.b, target))


@dataclass(frozen=True)
class QuantumRun:
    i: int
    r: int | None
    success: float  # Pr[output = x_i], simulated
    p: float  # classical correctness Pr[f(a0, a1) = x_i]
    prob_f: float  # Pr[output = f(a0, a1)]

    def predicted(self, b: int) -> float:
        """Success predicted from ``p`` alone."""
        hi = 0.5 + 0.5 ** (b + 1)
        return hi * self.p + (1 - hi) * (1 - self.p)

    def to_dict(self) -> dict:
        return {"r": self.r, "success": self.success, "p_classical": self.p, "prob_output_f": self.prob_f}


class QuantumDecoder:
    """The one-query quantum decoder built from a classical 2-query decoder, for a fixed ``x``."""

    def __init__(self, decoder: DecoderSpec, code: Code, x):
        if (1 << decoder.ell) * decoder.m > MAX_SIEVE_DIM:
            raise PirError("query register too large to simulate")
        self.decoder = decoder
        self.x = as_bits(x)
        self.y = code.encode(self.x)
        self.phases = phase_table(self.y).ravel()

    def answered_state(self, i: int, r: int) -> np.ndarray:
        return query_state(self.decoder, i, r) * self.phases

    def run(self, i: int, r: int) -> QuantumRun:
        dec = self.decoder
        psi = relabel_to_superposed(self.answered_state(i, r), dec, i, r)
        target = int(self.x[i])
        a0, a1 = dec.read(self.y, i, r)
        f_val = dec.function(i, r)(a0, a1)
        success = superposed_output_prob(psi, dec, i, r, target)
        prob_f = success if f_val == target else 1.0 - success
        return QuantumRun(i, r, success, float(f_val == target), prob_f)

    def run_all(self, i: int) -> QuantumRun:
        runs = [self.run(i, r) for r in range(self.decoder.R)]
        w = self.decoder.probs
        return QuantumRun(
            i,
            None,
            float(sum(p * q.success for p, q in zip(w, runs))),
            float(sum(p * q.p for p, q in zip(w, runs))),
            float(sum(p * q.prob_f for p, q in zip(w, runs))),
        )


def quantum_decoder_from_classical(
    decoder: DecoderSpec, code: Code, x, i: int, r: int | None = None
) -> QuantumRun:
    """Exact success of the one-query decoder; averaged over the randomness if ``r`` is None."""
    qd = QuantumDecoder(decoder, code, x)
    return qd.run_all(i) if r is None else qd.run(i, r)


def quantum_query_histogram(decoder: DecoderSpec, i: int) -> np.ndarray:
    """Pr over ``r`` that ``|Q_ir>`` has non-zero amplitude on each position."""
    hist = np.zeros(decoder.m)
    d = 1 << decoder.ell
    for r in range(decoder.R):
        blocks = np.abs(query_state(decoder, i, r).reshape(decoder.m, d)).sum(axis=1)
        hist[blocks > 0] += decoder.probs[r]
    return hist


# --------------------------------------------------------------------------
# random access code


@dataclass(frozen=True, eq=False)
class RacState:
    """``|U(x)> = m^-1/2 sum_j |j> u^-1/2 sum_{|T| <= b} (-1)^(T . C(x)_j) |z_T>``."""

    x: np.ndarray
    vector: np.ndarray
    m: int
    ell: int
    b: int
    u: int

    def blocks(self) -> np.ndarray:
        return self.vector.reshape(self.m, 1 << self.ell)


def rac_state(code: Code, x, b: int) -> RacState:
    if code.m * (1 << code.ell) > MAX_RAC_DIM:
        raise PirError(f"m * 2^ell = {code.m * (1 << code.ell)} exceeds the {MAX_RAC_DIM} cap")
    if not 1 <= b <= code.ell:
        raise PirError("need 1 <= b <= ell")
    x = as_bits(x)
    y = code.encode(x)
    u = low_weight_count(code.ell, b)
    weights = popcount(np.arange(1 << code.ell))
    support = (weights <= b).astype(float)
    vec = phase_table(y) * support[None, :] / math.sqrt(code.m * u)
    return RacState(x, vec.ravel(), code.m, code.ell, b, u)


def sieve_alphas(decoder: DecoderSpec, i: int) -> np.ndarray:
    """``alpha_j = sqrt(Pr[query j] / 2)``, the position amplitudes of ``|V_i(x)>``."""
    return np.sqrt(query_histogram(decoder)[i] / 2)


def sieve_povm_diagonal(decoder: DecoderSpec, i: int, c: float) -> np.ndarray:
    """Per-position eigenvalue ``(2m/c) alpha_j^2`` of ``M^dagger M`` (it is identity on the phase register)."""
    alpha2 = sieve_alphas(decoder, i) ** 2
    worst = float(alpha2.max())
    if worst > c / (2 * decoder.m) + 1e-12:
        raise NotAPOVM(f"alpha_j^2 = {worst} exceeds c/(2m) = {c / (2 * decoder.m)}")
    return (2 * decoder.m / c) * alpha2


def phi_states(decoder: DecoderSpec, i: int) -> np.ndarray:
    """``phi[j, r]``: the normalized superposition over the ``r`` that query ``j``."""
    alpha = sieve_alphas(decoder, i)
    phi = np.zeros((decoder.m, decoder.R))
    for s in (0, 1):
        np.add.at(phi, (decoder.queries[i, :, s], np.arange(decoder.R)), np.sqrt(decoder.probs / 2))
    nz = alpha > 0
    phi[nz] /= alpha[nz, None]
    return phi


def v_state_direct(rac: RacState, decoder: DecoderSpec, i: int) -> np.ndarray:
    """``|V_i(x)> = sum_r sqrt(p_r) |r> (|j0r>|U_j0r> + |j1r>|U_j1r>)/sqrt(2)`` as an (R, m, 2^ell) array."""
    blocks = rac.blocks() * math.sqrt(rac.m)
    V = np.zeros((decoder.R, rac.m, 1 << rac.ell))
    for r in range(decoder.R):
        for s in (0, 1):
            j = decoder.queries[i, r, s]
            V[r, j] += math.sqrt(decoder.probs[r] / 2) * blocks[j]
    return V


@dataclass(frozen=True)
class SieveResult:
    stage1: float
    stage2: float
    conditional_correct: float
    c: float
    u: int
    b: int

    @property
    def success(self) -> float:
        return self.stage1 * self.stage2

    @property
    def predicted_success(self) -> float:
        return 2 ** (self.b + 1) / (self.c * self.u)

    def to_dict(self) -> dict:
        return {
            "stage1": self.stage1,
            "stage2": self.stage2,
            "success": self.success,
            "predicted_success": self.predicted_success,
            "conditional_correct": self.conditional_correct,
            "c": self.c,
            "u": self.u,
        }


def rac_sieve(rac: RacState, decoder: DecoderSpec, i: int, c: float | None = None) -> SieveResult:
    """Turn one copy of ``|U(x)>`` into the answer to the decoder's query, or fail.

    Stage 1 is the POVM ``{M^dagger M, I - M^dagger M}`` with
    ``M = sqrt(2m/c) sum_j alpha_j |j><j| (x) I``; on success the state is
    lifted to ``|V_i(x)>`` through the ``phi_j`` states.  Stage 2 measures
    ``r`` and projects each branch onto the subsets of its selection set.
    ``c`` defaults to the decoder's measured smoothness.
    """
    if rac.b != decoder.b or rac.m != decoder.m or rac.ell != decoder.ell:
        raise PirError("random access state and decoder disagree on m, ell or b")
    if decoder.R * rac.m * (1 << rac.ell) > MAX_SIEVE_DIM:
        raise PirError("sieve state too large to simulate")
    if c is None:
        c = float(decoder.m * query_histogram(decoder)[i].max())
    mu2 = sieve_povm_diagonal(decoder, i, c)
    blocks = rac.blocks()
    stage1 = float(np.sum(mu2[:, None] * blocks**2))
    v_prime = np.sqrt(mu2)[:, None] * blocks / math.sqrt(stage1)
    V = phi_states(decoder, i).T[:, :, None] * v_prime[None, :, :]

    qd = QuantumDecoderFromState(decoder, rac.x)
    stage2 = 0.0
    correct = 0.0
    for r in range(decoder.R):
        pr = float(np.sum(V[r] ** 2))
        if pr == 0:
            continue
        kept = np.zeros_like(V[r])
        for s in (0, 1):
            j = decoder.queries[i, r, s]
            T = subsets_of(decoder.selections[i, r, s])
            kept[j, T] = V[r][j, T]
        pk = float(np.sum(kept**2))
        if pk == 0:
            continue
        stage2 += pk
        correct += pk * qd.output_prob(kept.ravel() / math.sqrt(pk), i, r)
    return SieveResult(stage1, stage2, correct / stage2, c, rac.u, rac.b)


class QuantumDecoderFromState:
    """Finish decoding from an already answered query state."""

    def __init__(self, decoder: DecoderSpec, x):
        self.decoder = decoder
        self.x = as_bits(x)

    def output_prob(self, state: np.ndarray, i: int, r: int) -> float:
        psi = relabel_to_superposed(state, self.decoder, i, r)
        return superposed_output_prob(psi, self.decoder, i, r, int(self.x[i]))


def default_copies(c: float, u: int, b: int) -> int:
    return math.ceil(c * u / 2 ** (b + 1) - 1e-12)


def multi_copy_success(fail_prob: float, p_cond: float, copies: int) -> float:
    """Run the sieve on each copy; decode from the first success, else flip a coin."""
    if copies < 1:
        raise PirError("need at least one copy")
    all_fail = fail_prob**copies
    return (1 - all_fail) * p_cond + all_fail * 0.5


@dataclass(frozen=True)
class MultiCopyResult:
    sieve: SieveResult
    copies: int
    overall: float

    def to_dict(self) -> dict:
        return {"copies": self.copies, "overall": self.overall, "fail_all": (1 - self.sieve.success) ** self.copies}


def rac_multi_copy(code: Code, decoder: DecoderSpec, x, i: int, copies: int | None = None, c: float | None = None) -> MultiCopyResult:
    sieve = rac_sieve(rac_state(code, x, decoder.b), decoder, i, c)
    if copies is None:
        copies = default_copies(sieve.c, sieve.u, sieve.b)
    return MultiCopyResult(sieve, copies, multi_copy_success(1 - sieve.success, sieve.conditional_correct, copies))
