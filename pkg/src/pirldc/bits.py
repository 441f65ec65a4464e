"""Bit strings, subsets, and the square/cube arrangements of a database.

Bit strings are plain ``numpy.uint8`` arrays of 0/1 values, marked read-only
when built through :func:`as_bits`.  A subset ``S`` of ``[n]`` is the n-bit
string with ``S_i = 1`` iff ``i`` is in ``S``.  All indices here are 0-based;
the CLI converts from the 1-based convention at its boundary.

Whenever a bit string is converted to an integer, the first bit is the most
significant one.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import ArrangementError, LengthMismatch, PirError

ARRANGEMENTS = ("flat", "square", "cube")


def as_bits(value) -> np.ndarray:
    """Coerce a ``'0101'`` string, a sequence of 0/1 or an array to a bit array."""
    if isinstance(value, str):
        if value and set(value) - {"0", "1"}:
            raise PirError(f"not a bit string: {value!r}")
        arr = np.frombuffer(value.encode("ascii"), dtype=np.uint8) - ord("0")
    else:
        arr = np.asarray(value)
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise PirError("bit arrays may only hold 0 and 1")
        arr = arr.astype(np.uint8)
    arr = np.array(arr, dtype=np.uint8)
    arr.setflags(write=False)
    return arr


def bits_to_str(a) -> str:
    return "".join("1" if v else "0" for v in np.asarray(a).ravel())


def bits_to_int(a) -> int:
    out = 0
    for v in np.asarray(a).ravel():
        out = (out << 1) | int(v)
    return out


def int_to_bits(value: int, length: int) -> np.ndarray:
    if value < 0 or value >> length:
        raise PirError(f"{value} does not fit in {length} bits")
    shifts = np.arange(length - 1, -1, -1)
    return ((value >> shifts) & 1).astype(np.uint8)


def rows_to_int(rows: np.ndarray) -> np.ndarray:
    """Integer value of each row of a 2-D bit array (first column is the MSB)."""
    rows = np.asarray(rows, dtype=np.int64)
    weights = 1 << np.arange(rows.shape[-1] - 1, -1, -1, dtype=np.int64)
    return rows @ weights


@lru_cache(maxsize=64)
def _all_bitstrings(k: int) -> np.ndarray:
    out = ((np.arange(1 << k)[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)
    out.setflags(write=False)
    return out


def all_bitstrings(k: int) -> np.ndarray:
    """All ``2**k`` strings of length ``k``; row ``r`` spells ``r`` in binary."""
    if k < 0 or k > 26:
        raise PirError(f"refusing to enumerate 2^{k} strings")
    return _all_bitstrings(k)


def unit(i: int, n: int) -> np.ndarray:
    """The n-bit string ``e_i`` of the singleton ``{i}``."""
    if not 0 <= i < n:
        raise PirError(f"index {i} outside [0, {n})")
    e = np.zeros(n, dtype=np.uint8)
    e[i] = 1
    return e


def subset_mask(positions: Iterable[int], length: int) -> np.ndarray:
    mask = np.zeros(length, dtype=np.uint8)
    for p in positions:
        if not 0 <= p < length:
            raise PirError(f"subset element {p} outside [0, {length})")
        mask[p] = 1
    mask.setflags(write=False)
    return mask


def cardinality(mask) -> int:
    return int(np.count_nonzero(mask))


def mask_positions(mask) -> list[int]:
    return [int(p) for p in np.flatnonzero(mask)]


def restrict(a, mask) -> np.ndarray:
    """``a`` restricted to the set ``mask``, bits kept in increasing index order."""
    a = np.asarray(a)
    mask = np.asarray(mask)
    if a.shape[-1] != mask.shape[-1]:
        raise LengthMismatch(f"string of length {a.shape[-1]} vs mask of length {mask.shape[-1]}")
    return a[..., mask.astype(bool)]


def inner_product_mod2(a, b):
    """``sum_i a_i b_i mod 2`` along the last axis (broadcasts over leading axes)."""
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    if a.shape[-1] != b.shape[-1]:
        raise LengthMismatch(f"lengths {a.shape[-1]} and {b.shape[-1]} differ")
    out = np.bitwise_and(a, b).sum(axis=-1, dtype=np.int64) & 1
    return int(out) if np.ndim(out) == 0 else out.astype(np.uint8)


def xor(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    if a.shape[-1] != b.shape[-1]:
        raise LengthMismatch(f"lengths {a.shape[-1]} and {b.shape[-1]} differ")
    return np.bitwise_xor(a, b)


# --------------------------------------------------------------------------
# arrangements


def _iroot(n: int, k: int) -> int:
    r = round(n ** (1.0 / k)) if n else 0
    while r**k > n:
        r -= 1
    while (r + 1) ** k <= n:
        r += 1
    return r


@dataclass(frozen=True)
class Arrangement:
    kind: str
    side: int

    @property
    def ndim(self) -> int:
        return {"flat": 1, "square": 2, "cube": 3}[self.kind]

    @property
    def size(self) -> int:
        return self.side**self.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.ndim

    @classmethod
    def for_size(cls, kind: str, n: int, pad: bool = False) -> "Arrangement":
        """Arrangement holding ``n`` bits.

        Without ``pad`` the size must be an exact square/cube; with it the side
        is rounded up and the tail is understood to be zero padding.
        """
        if kind not in ARRANGEMENTS:
            raise ArrangementError(f"unknown arrangement {kind!r}")
        if n < 1:
            raise ArrangementError("database must hold at least one bit")
        k = ARRANGEMENTS.index(kind) + 1
        if k == 1:
            return cls(kind, n)
        side = _iroot(n, k)
        if side**k != n:
            if not pad:
                raise ArrangementError(f"n={n} is not a perfect {kind}")
            side += 1
        return cls(kind, side)


def index_split(i: int, arrangement: Arrangement) -> tuple[int, ...]:
    """Row-major coordinates of position ``i``."""
    if not 0 <= i < arrangement.size:
        raise ArrangementError(f"index {i} outside the {arrangement.kind} of size {arrangement.size}")
    return tuple(int(c) for c in np.unravel_index(i, arrangement.shape))


def index_join(coords: Sequence[int], arrangement: Arrangement) -> int:
    if len(coords) != arrangement.ndim:
        raise ArrangementError(f"expected {arrangement.ndim} coordinates, got {len(coords)}")
    if any(not 0 <= c < arrangement.side for c in coords):
        raise ArrangementError(f"coordinates {tuple(coords)} outside side {arrangement.side}")
    return int(np.ravel_multi_index(tuple(coords), arrangement.shape))


@dataclass(frozen=True, eq=False)
class Database:
    """An n-bit database, optionally laid out as a (zero-padded) square or cube."""

    bits: np.ndarray
    arrangement: Arrangement

    def __init__(self, bits, arrangement: str | Arrangement = "flat"):
        x = as_bits(bits)
        if x.ndim != 1:
            raise PirError("database must be a 1-D bit string")
        if isinstance(arrangement, str):
            arrangement = Arrangement.for_size(arrangement, len(x), pad=True)
        if arrangement.size < len(x):
            raise ArrangementError(f"{arrangement} cannot hold {len(x)} bits")
        object.__setattr__(self, "bits", x)
        object.__setattr__(self, "arrangement", arrangement)
        padded = np.zeros(arrangement.size, dtype=np.uint8)
        padded[: len(x)] = x
        grid = padded.reshape(arrangement.shape)
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def padded(self) -> bool:
        return self.arrangement.size != self.n

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> int:
        return int(self.bits[i])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Database)
            and self.arrangement == other.arrangement
            and np.array_equal(self.bits, other.bits)
        )

    def __hash__(self) -> int:
        return hash((self.arrangement, self.bits.tobytes()))

    def check_index(self, i: int) -> None:
        if not 0 <= i < self.n:
            if 0 <= i < self.arrangement.size:
                raise ArrangementError(f"index {i} falls in zero padding beyond n={self.n}")
            raise ArrangementError(f"index {i} outside [0, {self.n})")

    def with_arrangement(self, kind: str) -> "Database":
        return Database(self.bits, kind)


# --------------------------------------------------------------------------
# database files


def parse_database_text(text: str) -> np.ndarray:
    lines = text.split()
    if len(lines) != 2 or not lines[0].isdigit():
        raise PirError("text database must be two lines: n, then n characters 0/1")
    n = int(lines[0])
    if len(lines[1]) != n:
        raise PirError(f"header says n={n} but {len(lines[1])} bits follow")
    return as_bits(lines[1])


def unpack_bits(data: bytes, n: int) -> np.ndarray:
    """First ``n`` bits of ``data``, most significant bit of each byte first."""
    if n > 8 * len(data):
        raise PirError(f"{len(data)} bytes cannot hold {n} bits")
    return as_bits(np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:n])


def pack_bits(a) -> bytes:
    return np.packbits(np.asarray(a, dtype=np.uint8)).tobytes()


def load_database(path: str | os.PathLike, n: int | None = None) -> np.ndarray:
    """Read a database file.

    The text form (``n`` on the first line, the bits on the second) is tried
    first; anything else is taken as raw packed bits, which needs ``n``.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError:
        text = None
    if text is not None and text[:1].isdigit():
        try:
            x = parse_database_text(text)
        except PirError:
            if n is None:
                raise
        else:
            if n is not None and n != len(x):
                raise PirError(f"file holds {len(x)} bits, expected {n}")
            return x
    if n is None:
        raise PirError("raw binary database needs its bit length")
    return unpack_bits(data, n)


def save_database(path: str | os.PathLike, x, binary: bool = False) -> None:
    x = as_bits(x)
    if binary:
        with open(path, "wb") as fh:
            fh.write(pack_bits(x))
    else:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"{len(x)}\n{bits_to_str(x)}\n")


def random_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    return as_bits(rng.integers(0, 2, size=n, dtype=np.uint8))
