"""Smooth codes derived from PIR schemes, their decoders, and corruption trials.

Concatenating every server's answer to every possible query gives a
codeword of ``m = 2 * 2^t`` entries of ``ell`` bits; position ``s * 2^t + q``
holds server ``s``'s answer to the query whose bits spell ``q``.  The
decoder replays the PIR user: its randomness is the user's randomness, and
it reads the two positions the user would have queried.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bits import all_bitstrings, as_bits, rows_to_int
from .errors import EnumerationTooLarge, PirError, SelectionMismatch
from .schemes import PirScheme, get_scheme
from .superposed import BooleanFunction

MAX_QUERY_BITS = 20


@dataclass(frozen=True, eq=False)
class Code:
    n: int
    m: int
    ell: int
    encoder: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    source: dict = field(default_factory=dict)

    def encode(self, x) -> np.ndarray:
        y = np.asarray(self.encoder(as_bits(x)), dtype=np.uint8)
        if y.shape != (self.m, self.ell):
            raise PirError(f"encoder produced shape {y.shape}, expected {(self.m, self.ell)}")
        return y


@dataclass(frozen=True, eq=False)
class DecoderSpec:
    """A non-adaptive randomized 2-query decoder that reads ``b`` bits per answer.

    ``queries[i, r]`` is the position pair, ``selections[i, r, s]`` the sorted
    ``b`` bit positions read from answer ``s``, and
    ``functions[f_ids[i, r]]`` the output function on ``a0 || a1``.
    """

    n: int
    m: int
    ell: int
    b: int
    probs: np.ndarray  # (R,)
    queries: np.ndarray  # (n, R, 2)
    selections: np.ndarray  # (n, R, 2, b)
    functions: tuple[BooleanFunction, ...]
    f_ids: np.ndarray  # (n, R)

    def __post_init__(self):
        R = len(self.probs)
        if self.queries.shape != (self.n, R, 2):
            raise PirError(f"queries have shape {self.queries.shape}, expected {(self.n, R, 2)}")
        if self.selections.shape != (self.n, R, 2, self.b):
            raise PirError("selection table has the wrong shape")
        if np.any(self.queries[..., 0] == self.queries[..., 1]):
            raise PirError("the two queries must be distinct")
        if self.queries.min() < 0 or self.queries.max() >= self.m:
            raise PirError("query positions outside the codeword")
        if self.selections.min() < 0 or self.selections.max() >= self.ell:
            raise PirError("selected bits outside the alphabet")
        if self.b > 1 and np.any(np.diff(self.selections, axis=-1) <= 0):
            raise SelectionMismatch("selection sets must be strictly increasing (distinct b bits)")
        if abs(float(self.probs.sum()) - 1.0) > 1e-12 or self.probs.min() < 0:
            raise PirError("randomness distribution must sum to 1")
        if any(f.b != self.b for f in self.functions):
            raise PirError("output functions must take 2b bits")

    @property
    def R(self) -> int:
        return len(self.probs)

    def function(self, i: int, r: int) -> BooleanFunction:
        return self.functions[self.f_ids[i, r]]

    def read(self, y: np.ndarray, i: int, r: int) -> tuple[np.ndarray, np.ndarray]:
        """The two ``b``-bit strings ``y[j0]|S0`` and ``y[j1]|S1``."""
        j0, j1 = self.queries[i, r]
        S0, S1 = self.selections[i, r]
        return y[j0, S0], y[j1, S1]

    def decode(self, y: np.ndarray, i: int, r: int) -> int:
        a0, a1 = self.read(y, i, r)
        return self.function(i, r)(a0, a1)

    def decode_all(self, y: np.ndarray, i: int) -> np.ndarray:
        """Output for every randomness value at index ``i``."""
        y = np.asarray(y, dtype=np.uint8)
        j = self.queries[i]
        S = self.selections[i]
        rows = np.arange(self.R)
        a0 = y[j[:, 0][:, None], S[:, 0]]
        a1 = y[j[:, 1][:, None], S[:, 1]]
        weights = 1 << np.arange(2 * self.b - 1, -1, -1)
        idx = np.concatenate([a0, a1], axis=1).astype(np.int64) @ weights
        tables = np.array([f.table for f in self.functions], dtype=np.uint8)
        return tables[self.f_ids[i][rows], idx]

    def success_probability(self, y: np.ndarray, i: int, target: int) -> float:
        return float(self.probs[self.decode_all(y, i) == target].sum())


def pir_to_code(scheme: PirScheme) -> tuple[Code, DecoderSpec]:
    t = scheme.t
    if t > MAX_QUERY_BITS:
        raise EnumerationTooLarge(f"2^{t} queries per server is beyond the 2^{MAX_QUERY_BITS} cap")
    half = 1 << t
    Q = all_bitstrings(t)

    def encoder(x):
        table = scheme.answer(scheme.database(x), Q)
        return np.concatenate([table, table], axis=0)

    code = Code(scheme.n, 2 * half, scheme.ell, encoder, {"scheme": scheme.name, "n": scheme.n})
    Rbits = all_bitstrings(scheme.randomness_bits)
    R = len(Rbits)
    queries = np.empty((scheme.n, R, 2), dtype=np.int64)
    selections = np.empty((scheme.n, R, 2, scheme.b), dtype=np.int64)
    for i in range(scheme.n):
        q0, q1 = scheme.queries(i, Rbits)
        queries[i, :, 0] = rows_to_int(q0)
        queries[i, :, 1] = half + rows_to_int(q1)
        for s, mask in enumerate(scheme.selection(i)):
            selections[i, :, s] = np.flatnonzero(mask)
    decoder = DecoderSpec(
        n=scheme.n,
        m=code.m,
        ell=scheme.ell,
        b=scheme.b,
        probs=np.full(R, 1.0 / R),
        queries=queries,
        selections=selections,
        functions=(BooleanFunction.parity(scheme.b),),
        f_ids=np.zeros((scheme.n, R), dtype=np.int64),
    )
    return code, decoder


@dataclass(frozen=True)
class SmoothnessReport:
    c_star: float
    histogram: np.ndarray  # (n, m): Pr[decoder for i queries j]

    def to_dict(self) -> dict:
        return {"c_star": self.c_star, "max_query_prob": float(self.histogram.max())}


def query_histogram(decoder: DecoderSpec) -> np.ndarray:
    hist = np.zeros((decoder.n, decoder.m))
    for s in (0, 1):
        for i in range(decoder.n):
            np.add.at(hist[i], decoder.queries[i, :, s], decoder.probs)
    return hist


def smoothness_profile(decoder: DecoderSpec) -> SmoothnessReport:
    hist = query_histogram(decoder)
    return SmoothnessReport(float(decoder.m * hist.max()), hist)


CORRUPTION_MODELS = ("random", "hot")


def corruption_count(delta: float, m: int) -> int:
    if not 0 <= delta <= 1:
        raise PirError(f"corruption fraction must lie in [0, 1], got {delta}")
    return math.floor(delta * m + 1e-9)


def _different_entry(rng: np.random.Generator, ell: int) -> np.ndarray:
    while True:
        flip = rng.integers(0, 2, size=ell, dtype=np.uint8)
        if flip.any():
            return flip


def corrupt(
    y: np.ndarray,
    delta: float,
    model: str = "random",
    rng: np.random.Generator | None = None,
    decoder: DecoderSpec | None = None,
    i: int | None = None,
) -> np.ndarray:
    """Replace exactly ``floor(delta m)`` entries of the codeword ``y``.

    ``random`` picks the positions uniformly and overwrites each with a
    uniformly random *different* entry.  ``hot`` picks the positions the
    decoder queries most often for index ``i`` (ties by position) and
    complements them.
    """
    y = np.array(y, dtype=np.uint8)
    m, ell = y.shape
    count = corruption_count(delta, m)
    if model == "random":
        rng = rng if rng is not None else np.random.default_rng()
        for j in rng.choice(m, size=count, replace=False):
            y[j] ^= _different_entry(rng, ell)
    elif model == "hot":
        if decoder is None or i is None:
            raise PirError("the hot model needs the decoder and the target index")
        hist = query_histogram(decoder)[i]
        order = np.lexsort((np.arange(m), -hist))
        y[order[:count]] ^= 1
    else:
        raise PirError(f"unknown corruption model {model!r}")
    return y


def local_decode_trial(
    code: Code,
    decoder: DecoderSpec,
    x,
    i: int,
    delta: float,
    model: str,
    trials: int,
    rng: np.random.Generator,
) -> float:
    """Fraction of trials in which decoding a freshly corrupted word gives ``x_i``."""
    if trials < 1:
        raise PirError("need at least one trial")
    x = as_bits(x)
    y = code.encode(x)
    hits = 0
    for _ in range(trials):
        word = corrupt(y, delta, model, rng, decoder, i)
        r = int(rng.choice(decoder.R, p=decoder.probs))
        hits += decoder.decode(word, i, r) == x[i]
    return hits / trials


# --------------------------------------------------------------------------
# code.json


def code_to_dict(code: Code, decoder: DecoderSpec) -> dict:
    """JSON form; indices ``i``, positions ``j`` and selected bits are 1-based."""
    rows = []
    for i in range(decoder.n):
        for r in range(decoder.R):
            j0, j1 = decoder.queries[i, r]
            S0, S1 = decoder.selections[i, r]
            rows.append(
                {
                    "i": i + 1,
                    "r": r,
                    "p": float(decoder.probs[r]),
                    "j0": int(j0) + 1,
                    "j1": int(j1) + 1,
                    "S0": [int(s) + 1 for s in S0],
                    "S1": [int(s) + 1 for s in S1],
                    "f": int(decoder.f_ids[i, r]),
                }
            )
    return {
        "schema": 1,
        "source": code.source,
        "n": code.n,
        "m": code.m,
        "ell": code.ell,
        "b": decoder.b,
        "randomness": decoder.R,
        "functions": [f.to_hex() for f in decoder.functions],
        "decoder": rows,
    }


def code_from_dict(obj: dict) -> tuple[Code, DecoderSpec]:
    source = obj.get("source") or {}
    if "scheme" not in source:
        raise PirError("code.json does not name the scheme that generates the codewords")
    code, _ = pir_to_code(get_scheme(source["scheme"], int(source["n"])))
    if (code.m, code.ell) != (obj["m"], obj["ell"]):
        raise PirError("code.json parameters disagree with its generating scheme")
    n, R, b = int(obj["n"]), int(obj["randomness"]), int(obj["b"])
    probs = np.zeros(R)
    queries = np.zeros((n, R, 2), dtype=np.int64)
    selections = np.zeros((n, R, 2, b), dtype=np.int64)
    f_ids = np.zeros((n, R), dtype=np.int64)
    for row in obj["decoder"]:
        i, r = row["i"] - 1, row["r"]
        probs[r] = row["p"]
        queries[i, r] = (row["j0"] - 1, row["j1"] - 1)
        selections[i, r, 0] = [s - 1 for s in row["S0"]]
        selections[i, r, 1] = [s - 1 for s in row["S1"]]
        f_ids[i, r] = row["f"]
    functions = tuple(BooleanFunction.from_hex(h, b) for h in obj["functions"])
    return code, DecoderSpec(n, code.m, code.ell, b, probs, queries, selections, functions, f_ids)


def save_code(path, code: Code, decoder: DecoderSpec) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(code_to_dict(code, decoder), fh, separators=(",", ":"))
        fh.write("\n")


def load_code(path) -> tuple[Code, DecoderSpec]:
    with open(path, encoding="utf-8") as fh:
        return code_from_dict(json.load(fh))


def make_decoder(
    n: int,
    m: int,
    ell: int,
    b: int,
    queries: Sequence,
    selections: Sequence,
    functions: Sequence[BooleanFunction],
    f_ids=None,
    probs=None,
) -> DecoderSpec:
    """Build a decoder from plain nested lists (mainly for hand-written examples)."""
    queries = np.asarray(queries, dtype=np.int64)
    selections = np.asarray(selections, dtype=np.int64)
    R = queries.shape[1]
    probs = np.full(R, 1.0 / R) if probs is None else np.asarray(probs, dtype=float)
    f_ids = np.zeros((n, R), dtype=np.int64) if f_ids is None else np.asarray(f_ids, dtype=np.int64)
    return DecoderSpec(n, m, ell, b, probs, queries, selections, tuple(functions), f_ids)
