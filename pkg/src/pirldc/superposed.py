"""Computing ``f(a0, a1)`` from one copy of ``(|0,a0> + |1,a1>)/sqrt(2)``.

Register layout, most significant first: the branch qubit, the ``b`` data
qubits holding ``a``, then one ancilla.  A basis index is therefore
``branch * 2^(b+1) + a * 2 + ancilla``, and the decoding unitary ``U`` acts on
the last ``b + 1`` qubits with index ``w * 2 + flag``.

A truth table is indexed by ``w * 2^b + a`` (``w`` is the first argument).
It is written in hex with bit ``k`` of the integer holding entry ``k``, so
``"6"`` at ``b = 1`` is XOR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bits import bits_to_int
from .errors import PirError
from .linalg import complete_to_unitary, measure_probability, psd_factor, trace_norm


@dataclass(frozen=True)
class BooleanFunction:
    b: int
    table: tuple[int, ...]

    def __post_init__(self):
        if self.b < 1:
            raise PirError("b must be at least 1")
        if len(self.table) != 1 << (2 * self.b):
            raise PirError(f"table for b={self.b} needs {1 << (2 * self.b)} entries, got {len(self.table)}")
        if set(self.table) - {0, 1}:
            raise PirError("truth table entries must be 0 or 1")

    @classmethod
    def from_int(cls, value: int, b: int) -> "BooleanFunction":
        size = 1 << (2 * b)
        if not 0 <= value < 1 << size:
            raise PirError(f"table value {value:#x} does not fit {size} entries")
        return cls(b, tuple((value >> k) & 1 for k in range(size)))

    @classmethod
    def from_hex(cls, text: str, b: int) -> "BooleanFunction":
        try:
            value = int(text, 16)
        except ValueError:
            raise PirError(f"not a hex truth table: {text!r}") from None
        return cls.from_int(value, b)

    @classmethod
    def parity(cls, b: int) -> "BooleanFunction":
        return cls(b, tuple(bin(k).count("1") & 1 for k in range(1 << (2 * b))))

    @classmethod
    def constant(cls, b: int, value: int = 0) -> "BooleanFunction":
        return cls(b, (value,) * (1 << (2 * b)))

    def to_int(self) -> int:
        return sum(v << k for k, v in enumerate(self.table))

    def to_hex(self) -> str:
        return format(self.to_int(), "x")

    def __call__(self, w, a) -> int:
        w = w if isinstance(w, (int, np.integer)) else bits_to_int(w)
        a = a if isinstance(a, (int, np.integer)) else bits_to_int(a)
        return self.table[(int(w) << self.b) | int(a)]

    def signs(self) -> np.ndarray:
        """``S[w, a] = (-1)^f(w, a)``."""
        t = np.array(self.table, dtype=float).reshape(1 << self.b, 1 << self.b)
        return 1.0 - 2.0 * t


def gram_matrix(f: BooleanFunction) -> np.ndarray:
    """``C[a, a'] = 4^-b sum_w (-1)^(f(w,a) + f(w,a'))``."""
    S = f.signs()
    return (S.T @ S) / float(1 << (2 * f.b))


@dataclass(frozen=True, eq=False)
class DecodingUnitary:
    f: BooleanFunction
    U: np.ndarray
    junk_states: np.ndarray  # column a is the unnormalized |phi_a>

    @property
    def b(self) -> int:
        return self.f.b


@lru_cache(maxsize=4096)
def build_decoding_unitary(f: BooleanFunction) -> DecodingUnitary:
    """Unitary sending ``|a>|0>`` to ``2^-b sum_w (-1)^f(w,a) |w>|0> + |phi_a>|1>``.

    The junk states are the columns of a factor ``A`` of ``I - C`` with ``C``
    the Gram matrix, which makes the prescribed columns orthonormal.
    """
    b = f.b
    k = 1 << b
    A = psd_factor(np.eye(k) - gram_matrix(f))
    S = f.signs()
    columns = {}
    for a in range(k):
        psi = np.zeros(2 * k)
        psi[0::2] = S[:, a] / k
        psi[1::2] = A[:, a]
        columns[2 * a] = psi
    U = complete_to_unitary(columns, 2 * k)
    U.setflags(write=False)
    return DecodingUnitary(f, U, A)


def hadamard_on_branch(b: int) -> np.ndarray:
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
    return np.kron(h, np.eye(1 << (b + 1)))


def controlled(U: np.ndarray) -> np.ndarray:
    """``|0><0| (x) I + |1><1| (x) U``."""
    d = U.shape[0]
    out = np.zeros((2 * d, 2 * d))
    out[:d, :d] = np.eye(d)
    out[d:, d:] = U
    return out


def superposed_input(b: int, a0: int, a1: int) -> np.ndarray:
    """``(|0,a0> + |1,a1>)/sqrt(2)`` extended by the ancilla ``|0>``."""
    k = 1 << b
    if not (0 <= a0 < k and 0 <= a1 < k):
        raise PirError(f"inputs must be {b}-bit strings")
    psi = np.zeros(4 * k)
    psi[2 * a0] = psi[2 * k + 2 * a1] = 1.0 / math.sqrt(2)
    return psi


def run_superposed(dec: DecodingUnitary, psi: np.ndarray) -> np.ndarray:
    """Controlled-U then a Hadamard on the branch qubit; returns the final state."""
    return hadamard_on_branch(dec.b) @ (controlled(dec.U) @ psi)


def branch_projector(b: int, value: int) -> np.ndarray:
    P = np.zeros((2, 2))
    P[value, value] = 1.0
    return np.kron(P, np.eye(1 << (b + 1)))


def _as_int(a) -> int:
    return int(a) if isinstance(a, (int, np.integer)) else bits_to_int(a)


def superposed_success_prob(f: BooleanFunction, a0, a1) -> float:
    """Exact probability that the measured branch qubit equals ``f(a0, a1)``."""
    a0, a1 = _as_int(a0), _as_int(a1)
    final = run_superposed(build_decoding_unitary(f), superposed_input(f.b, a0, a1))
    return measure_probability(final, branch_projector(f.b, f(a0, a1)))


def psi_state(b: int, a0: int, a1: int) -> np.ndarray:
    """``|Psi_{a0 a1}>`` without the ancilla, index ``branch * 2^b + a``."""
    k = 1 << b
    v = np.zeros(2 * k)
    v[a0] = v[k + a1] = 1.0 / math.sqrt(2)
    return v


def class_ensembles(f: BooleanFunction) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Unnormalized sums of ``|Psi><Psi|`` over ``f^-1(0)`` and ``f^-1(1)`` plus class sizes."""
    b = f.b
    k = 1 << b
    d = 2 * k
    sums = [np.zeros((d, d)), np.zeros((d, d))]
    sizes = [0, 0]
    for a0 in range(k):
        for a1 in range(k):
            v = psi_state(b, a0, a1)
            c = f(a0, a1)
            sums[c] += np.outer(v, v)
            sizes[c] += 1
    return sums[0], sums[1], sizes[0], sizes[1]


def parity_ensembles(b: int) -> tuple[np.ndarray, np.ndarray]:
    """``rho_c = 2^-(2b-1) sum_{parity(a0 a1) = c} |Psi><Psi|``."""
    s0, s1, _, _ = class_ensembles(BooleanFunction.parity(b))
    norm = float(1 << (2 * b - 1))
    return s0 / norm, s1 / norm


def parity_distinguishability(b: int) -> float:
    """``||rho_0 - rho_1||_tr`` for the 2b-bit parity ensembles (equals ``2/2^b``)."""
    if b < 1:
        raise PirError("b must be at least 1")
    rho0, rho1 = parity_ensembles(b)
    return trace_norm(rho0 - rho1)


def bias_ceiling(f: BooleanFunction) -> float:
    """Largest bias any measurement achieves on a uniformly random input pair.

    Helstrom's bound with priors ``|f^-1(c)| / 4^b`` gives
    ``||sigma_0 - sigma_1||_tr / 2`` for the prior-weighted ensembles; for a
    balanced ``f`` this is ``||rho_0 - rho_1||_tr / 4``.  A worst-case bias can
    never exceed it.
    """
    s0, s1, _, _ = class_ensembles(f)
    total = float(1 << (2 * f.b))
    return trace_norm((s0 - s1) / total) / 2


@dataclass(frozen=True)
class QDecodeReport:
    b: int
    f_hex: str
    a0: int
    a1: int
    target: int
    prob_correct: float
    bias: float
    tracenorm_ceiling: float

    def to_dict(self) -> dict:
        return {
            "b": self.b,
            "f": self.f_hex,
            "a0": format(self.a0, f"0{self.b}b"),
            "a1": format(self.a1, f"0{self.b}b"),
            "f_value": self.target,
            "prob_correct": self.prob_correct,
            "bias": self.bias,
            "tracenorm_ceiling": self.tracenorm_ceiling,
        }


def qdecode(f: BooleanFunction, a0, a1) -> QDecodeReport:
    a0, a1 = _as_int(a0), _as_int(a1)
    p = superposed_success_prob(f, a0, a1)
    return QDecodeReport(f.b, f.to_hex(), a0, a1, f(a0, a1), p, p - 0.5, bias_ceiling(f))
