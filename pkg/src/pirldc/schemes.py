"""The two-server square and cube PIR schemes and an exact privacy auditor.

Every scheme method accepts either a single bit string or a 2-D batch of
them (one per row), so exhaustive runs over all randomness strings are a
handful of array operations rather than millions of Python calls.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bits import (
    Arrangement,
    Database,
    all_bitstrings,
    as_bits,
    bits_to_str,
    index_split,
    mask_positions,
    rows_to_int,
    subset_mask,
)
from .errors import ArrangementError, EnumerationTooLarge, LengthMismatch, PirError

DEFAULT_ENUMERATION_CAP = 2**24


@dataclass(frozen=True)
class PirParams:
    n: int
    t: int
    ell: int
    b: int
    k: int = 2
    eps: float = 0.5
    eta: float = 0.0

    def __post_init__(self):
        if min(self.t, self.ell, self.b) < 1 or self.b > self.ell:
            raise PirError(f"need t, ell, b >= 1 and b <= ell: {self}")
        if not 0 <= self.eps <= 0.5 or not 0 <= self.eta <= 1:
            raise PirError(f"need 0 <= eps <= 1/2 and 0 <= eta <= 1: {self}")


@dataclass(frozen=True)
class Transcript:
    i: int
    randomness: np.ndarray
    q0: np.ndarray
    q1: np.ndarray
    a0: np.ndarray
    a1: np.ndarray
    S0: np.ndarray
    S1: np.ndarray
    output: int

    def to_dict(self) -> dict:
        """JSON-ready form; the index and selection sets are 1-based."""
        return {
            "index": self.i + 1,
            "randomness": bits_to_str(self.randomness),
            "q0": bits_to_str(self.q0),
            "q1": bits_to_str(self.q1),
            "a0": bits_to_str(self.a0),
            "a1": bits_to_str(self.a1),
            "S0": [p + 1 for p in mask_positions(self.S0)],
            "S1": [p + 1 for p in mask_positions(self.S1)],
            "output": self.output,
        }


def _check_len(a: np.ndarray, length: int, what: str) -> None:
    if a.shape[-1] != length:
        raise LengthMismatch(f"{what} has {a.shape[-1]} bits, expected {length}")


def _batch(a) -> tuple[np.ndarray, bool]:
    a = np.asarray(a, dtype=np.uint8)
    return (a[None, :], True) if a.ndim == 1 else (a, False)


class PirScheme:
    """Common interface: user-side query/reconstruct plus the server answer map."""

    name: str
    scheme_id: int
    kind: str

    def __init__(self, n: int):
        self.n = n
        self.arrangement = Arrangement.for_size(self.kind, n, pad=True)
        self.side = self.arrangement.side

    # sizes, filled in by subclasses
    t: int
    ell: int
    b: int

    @property
    def randomness_bits(self) -> int:
        return self.t

    @property
    def params(self) -> PirParams:
        return PirParams(n=self.n, t=self.t, ell=self.ell, b=self.b)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n})"

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.n == other.n

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.n))

    def database(self, bits) -> Database:
        return Database(bits, self.arrangement)

    def coords(self, i: int) -> tuple[int, ...]:
        if not 0 <= i < self.n:
            if 0 <= i < self.arrangement.size:
                raise ArrangementError(f"index {i} falls in zero padding beyond n={self.n}")
            raise ArrangementError(f"index {i} outside [0, {self.n})")
        return index_split(i, self.arrangement)

    def _grid(self, db: Database) -> np.ndarray:
        if db.arrangement != self.arrangement:
            raise ArrangementError(f"database laid out as {db.arrangement}, scheme needs {self.arrangement}")
        return db.grid

    def queries(self, i: int, randomness) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def answer(self, db: Database, q) -> np.ndarray:
        raise NotImplementedError

    def selection(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def reconstruct(self, i: int, a0, a1):
        """XOR of the selected bits of both answers."""
        S0, S1 = self.selection(i)
        a0 = np.asarray(a0, dtype=np.uint8)
        a1 = np.asarray(a1, dtype=np.uint8)
        _check_len(a0, self.ell, "answer 0")
        _check_len(a1, self.ell, "answer 1")
        out = (a0[..., S0.astype(bool)].sum(axis=-1) + a1[..., S1.astype(bool)].sum(axis=-1)) & 1
        return int(out) if np.ndim(out) == 0 else out.astype(np.uint8)


class SquareScheme(PirScheme):
    """sqrt(n) x sqrt(n) layout; one inner product per column, b = 1."""

    name = "square"
    scheme_id = 1
    kind = "square"

    def __init__(self, n: int):
        super().__init__(n)
        self.t = self.ell = self.side
        self.b = 1

    def queries(self, i, randomness):
        A = np.asarray(randomness, dtype=np.uint8)
        _check_len(A, self.side, "randomness A")
        i1, _ = self.coords(i)
        q1 = A.copy()
        q1[..., i1] ^= 1
        return A.copy(), q1

    def answer(self, db, q):
        X = self._grid(db)
        q = np.asarray(q, dtype=np.uint8)
        _check_len(q, self.side, "query")
        return ((q.astype(np.int64) @ X.astype(np.int64)) & 1).astype(np.uint8)

    def selection(self, i):
        _, i2 = self.coords(i)
        S = subset_mask([i2], self.ell)
        return S, S


class CubeScheme(PirScheme):
    """n^(1/3)-sided cube; 3 n^(1/3) query and answer bits, b = 3.

    The answer to ``T1 T2 T3`` lists, axis by axis and position by position,
    ``b(T with bit p of axis k toggled) xor b(T)`` where ``b(T)`` is the XOR
    of the database over the subcube ``T1 x T2 x T3``.  Toggling position
    ``p`` adds or removes exactly the slice at ``p``, so each emitted bit is
    the parity of that slice over the other two axes.
    """

    name = "cube"
    scheme_id = 2
    kind = "cube"

    def __init__(self, n: int):
        super().__init__(n)
        self.t = self.ell = 3 * self.side
        self.b = 3

    def split(self, q) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = self.side
        return q[..., :s], q[..., s : 2 * s], q[..., 2 * s :]

    def queries(self, i, randomness):
        T = np.asarray(randomness, dtype=np.uint8)
        _check_len(T, self.t, "randomness T1T2T3")
        q1 = T.copy()
        for axis, c in enumerate(self.coords(i)):
            q1[..., axis * self.side + c] ^= 1
        return T.copy(), q1

    def answer(self, db, q):
        X = self._grid(db).astype(np.int64)
        q, single = _batch(q)
        _check_len(q, self.t, "query")
        T1, T2, T3 = (part.astype(np.int64) for part in self.split(q))
        ax1 = np.einsum("pjk,nj,nk->np", X, T2, T3)
        ax2 = np.einsum("ipk,ni,nk->np", X, T1, T3)
        ax3 = np.einsum("ijp,ni,nj->np", X, T1, T2)
        out = (np.concatenate([ax1, ax2, ax3], axis=1) & 1).astype(np.uint8)
        return out[0] if single else out

    def selection(self, i):
        S = subset_mask([axis * self.side + c for axis, c in enumerate(self.coords(i))], self.ell)
        return S, S


SCHEMES = {"square": SquareScheme, "cube": CubeScheme}


def get_scheme(name: str, n: int) -> PirScheme:
    try:
        return SCHEMES[name](n)
    except KeyError:
        raise PirError(f"unknown scheme {name!r}; choose from {sorted(SCHEMES)}") from None


def scheme_by_id(scheme_id: int) -> type[PirScheme]:
    for cls in SCHEMES.values():
        if cls.scheme_id == scheme_id:
            return cls
    raise PirError(f"unknown scheme id {scheme_id}")


# functional forms of the individual steps


def square_query(i: int, A, n: int):
    return SquareScheme(n).queries(i, A)


def square_answer(db: Database, q) -> np.ndarray:
    return SquareScheme(db.n).answer(db, q)


def square_reconstruct(i: int, a0, a1, n: int) -> int:
    return SquareScheme(n).reconstruct(i, a0, a1)


def cube_query(i: int, T1, T2, T3, n: int):
    return CubeScheme(n).queries(i, np.concatenate([as_bits(T1), as_bits(T2), as_bits(T3)]))


def cube_answer(db: Database, q) -> np.ndarray:
    return CubeScheme(db.n).answer(db, q)


def cube_reconstruct(i: int, a0, a1, n: int) -> int:
    return CubeScheme(n).reconstruct(i, a0, a1)


# protocol runs


def run_protocol(scheme: PirScheme, db: Database, i: int, randomness) -> Transcript:
    r = as_bits(randomness)
    _check_len(r, scheme.randomness_bits, "randomness")
    q0, q1 = scheme.queries(i, r)
    a0 = scheme.answer(db, q0)
    a1 = scheme.answer(db, q1)
    S0, S1 = scheme.selection(i)
    out = scheme.reconstruct(i, a0, a1)
    return Transcript(i, r, q0, q1, a0, a1, S0, S1, out)


def run_all_randomness(scheme: PirScheme, db: Database, i: int) -> np.ndarray:
    """Output bit for every randomness string, in enumeration order."""
    R = all_bitstrings(scheme.randomness_bits)
    q0, q1 = scheme.queries(i, R)
    return scheme.reconstruct(i, scheme.answer(db, q0), scheme.answer(db, q1))


def query_distribution(
    scheme: PirScheme, i: int, server: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> Counter:
    """Exact multiset of the query sent to ``server`` over all randomness."""
    if server not in (0, 1):
        raise PirError(f"server must be 0 or 1, got {server}")
    if 2**scheme.randomness_bits > cap:
        raise EnumerationTooLarge(
            f"2^{scheme.randomness_bits} randomness strings exceed the cap of {cap}"
        )
    qs = scheme.queries(i, all_bitstrings(scheme.randomness_bits))[server]
    values, counts = np.unique(rows_to_int(qs), return_counts=True)
    return Counter(dict(zip(values.tolist(), counts.tolist())))


def total_variation(p: Counter, q: Counter) -> Fraction:
    np_, nq = sum(p.values()), sum(q.values())
    keys = set(p) | set(q)
    return sum((abs(Fraction(p[k], np_) - Fraction(q[k], nq)) for k in keys), Fraction(0)) / 2


def audit_privacy(
    scheme: PirScheme, server: int, i_a: int, i_b: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> Fraction:
    """Exact TVD between the query distributions ``server`` sees under ``i_a`` and ``i_b``."""
    return total_variation(
        query_distribution(scheme, i_a, server, cap), query_distribution(scheme, i_b, server, cap)
    )
