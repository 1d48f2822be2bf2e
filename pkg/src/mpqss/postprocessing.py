"""Classical post-processing: error rate, nested GF(2) codes, key distillation, one-time pad.

Error correction and privacy amplification use a pair of binary linear codes
with the smaller one nested inside the larger: the big code's syndrome
decoding removes transmission errors, and the coset of the corrected word in
the small code becomes the shared key, erasing whatever an eavesdropper
learned about individual bits. The canonical desk-scale pair is the [7,4]
Hamming code over its [7,3] dual, giving one key bit per seven-bit block.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DecodeFailure, KeyMaterialError

Bits = tuple[int, ...]


def binary_entropy(delta: float) -> float:
    """Shannon entropy of a {delta, 1-delta} coin, in bits; 0 at both endpoints."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"entropy argument must be in [0, 1], got {delta}")
    if delta in (0.0, 1.0):
        return 0.0
    return -delta * math.log2(delta) - (1.0 - delta) * math.log2(1.0 - delta)


def key_rate(delta: float) -> float:
    """Asymptotic secure-key fraction max(1 - 2*H(delta), 0) at error rate delta."""
    return max(1.0 - 2.0 * binary_entropy(delta), 0.0)


# ---------------------------------------------------------------------------
# GF(2) linear algebra


def as_bit_matrix(rows: Iterable[Iterable[int]]) -> np.ndarray:
    mat = np.array([[int(x) & 1 for x in row] for row in rows], dtype=np.uint8)
    if mat.ndim != 2:
        raise ValueError("expected a rectangular bit matrix")
    return mat


def gf2_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a.astype(np.uint8) @ b.astype(np.uint8)) % 2


def gf2_rref(mat: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2); returns (rref, pivot columns)."""
    m = mat.copy().astype(np.uint8)
    rows, cols = m.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        pivot = next((i for i in range(r, rows) if m[i, c]), None)
        if pivot is None:
            continue
        m[[r, pivot]] = m[[pivot, r]]
        for i in range(rows):
            if i != r and m[i, c]:
                m[i] ^= m[r]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return m, pivots


def gf2_rank(mat: np.ndarray) -> int:
    return len(gf2_rref(mat)[1])


def gf2_nullspace(mat: np.ndarray) -> np.ndarray:
    """Row basis of {x : mat @ x = 0 over GF(2)}; shape (cols - rank, cols)."""
    rref, pivots = gf2_rref(mat)
    cols = mat.shape[1]
    free = [c for c in range(cols) if c not in pivots]
    basis = np.zeros((len(free), cols), dtype=np.uint8)
    for i, fc in enumerate(free):
        basis[i, fc] = 1
        for row, pc in zip(rref, pivots):
            if row[fc]:
                basis[i, pc] = 1
    return basis


def load_matrix(text: str) -> np.ndarray:
    """Parse the plain-text matrix format: one row per line of '0'/'1' characters."""
    rows = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if any(c not in "01" for c in line):
            raise ValueError(f"line {no}: rows must be '0'/'1' strings, got {line!r}")
        rows.append([int(c) for c in line])
    if not rows:
        raise ValueError("no matrix rows found")
    if len({len(r) for r in rows}) != 1:
        raise ValueError("rows have differing lengths")
    return as_bit_matrix(rows)


def dump_matrix(mat: np.ndarray) -> str:
    return "\n".join("".join(str(int(x)) for x in row) for row in mat) + "\n"


# ---------------------------------------------------------------------------
# Linear codes


class LinearCode:
    """Binary linear code with a syndrome table covering its designed radius."""

    def __init__(self, generator: np.ndarray, parity_check: np.ndarray, radius: int):
        self.generator = generator.astype(np.uint8) % 2
        self.parity_check = parity_check.astype(np.uint8) % 2
        self.length = self.generator.shape[1]
        self.dimension = self.generator.shape[0]
        self.radius = radius
        if self.parity_check.shape[1] != self.length:
            raise ValueError("generator and parity check disagree on code length")
        if gf2_matmul(self.generator, self.parity_check.T).any():
            raise ValueError("generator rows must satisfy every parity check")
        if gf2_rank(self.generator) != self.dimension:
            raise ValueError("generator rows are linearly dependent")
        if gf2_rank(self.parity_check) != self.length - self.dimension:
            raise ValueError("parity check rank must equal length - dimension")
        self.syndrome_table = self._build_syndrome_table(radius)

    @classmethod
    def from_parity_check(cls, parity_check: np.ndarray, radius: int) -> "LinearCode":
        return cls(gf2_nullspace(parity_check), parity_check, radius)

    @classmethod
    def from_generator(cls, generator: np.ndarray, radius: int) -> "LinearCode":
        return cls(generator, gf2_nullspace(generator), radius)

    def _build_syndrome_table(self, radius: int) -> dict[bytes, np.ndarray]:
        table: dict[bytes, np.ndarray] = {}
        for weight in range(radius + 1):
            for support in itertools.combinations(range(self.length), weight):
                err = np.zeros(self.length, dtype=np.uint8)
                err[list(support)] = 1
                key = self.syndrome(err)
                if key not in table:  # lighter patterns claim a syndrome first
                    table[key] = err
        return table

    def syndrome(self, word: Sequence[int]) -> bytes:
        w = np.asarray(word, dtype=np.uint8) % 2
        return gf2_matmul(self.parity_check, w).tobytes()

    def contains(self, word: Sequence[int]) -> bool:
        return not any(self.syndrome(word))

    def codewords(self) -> list[np.ndarray]:
        """All 2^k codewords; intended for the small code sizes used here."""
        if self.dimension > 20:
            raise ValueError("codeword enumeration is for desk-scale codes only")
        out = []
        for msg in itertools.product((0, 1), repeat=self.dimension):
            out.append(gf2_matmul(np.array(msg, dtype=np.uint8), self.generator))
        return out

    def random_codeword(self, rng: random.Random) -> np.ndarray:
        msg = np.array([rng.getrandbits(1) for _ in range(self.dimension)], dtype=np.uint8)
        return gf2_matmul(msg, self.generator)

    def __repr__(self) -> str:
        return f"LinearCode[{self.length},{self.dimension}] t={self.radius}"


def syndrome_decode(code: LinearCode, word: Sequence[int]) -> np.ndarray:
    """Nearest codeword via the syndrome table; exact up to ``code.radius`` errors."""
    w = np.asarray(word, dtype=np.uint8) % 2
    if w.shape != (code.length,):
        raise ValueError(f"word length {w.shape} does not match code length {code.length}")
    key = code.syndrome(w)
    err = code.syndrome_table.get(key)
    if err is None:
        raise DecodeFailure(f"syndrome {key.hex()} exceeds the designed radius {code.radius}")
    return (w ^ err).astype(np.uint8)


# ---------------------------------------------------------------------------
# Nested pair and key extraction


class CssPair:
    """Nested codes (small inside big) whose coset structure yields the key.

    Key bits per block = dim(big) - dim(small). Coset labels are fixed by
    sorting the lexicographically smallest member of each coset and numbering
    in order, so both sides derive identical labels with no negotiation.
    """

    def __init__(self, c1: LinearCode, c2: LinearCode):
        if c1.length != c2.length:
            raise ValueError("nested codes must share a length")
        for row in c2.generator:
            if not c1.contains(row):
                raise ValueError("every codeword of the small code must lie in the big one")
        self.c1 = c1
        self.c2 = c2
        self.key_bits = c1.dimension - c2.dimension
        if self.key_bits < 1:
            raise ValueError("the nesting yields no key bits")
        self._c2_words = [tuple(int(x) for x in w) for w in c2.codewords()]
        reps = sorted({self._coset_rep(w) for w in c1.codewords()})
        if len(reps) != 2 ** self.key_bits:
            raise ValueError("coset count does not match 2^(k1 - k2)")
        self._labels = {
            rep: tuple(int(b) for b in format(i, f"0{self.key_bits}b"))
            for i, rep in enumerate(reps)
        }

    def _coset_rep(self, word: Sequence[int]) -> Bits:
        w = tuple(int(x) for x in word)
        return min(tuple(a ^ b for a, b in zip(w, c)) for c in self._c2_words)

    def coset_key(self, u: Sequence[int]) -> Bits:
        """Label of u's coset; equal for inputs differing by a small-code word."""
        if not self.c1.contains(u):
            raise ValueError("coset keys are defined on codewords of the big code only")
        return self._labels[self._coset_rep(u)]

    def cosets(self) -> dict[Bits, Bits]:
        return dict(self._labels)


HAMMING_PARITY_CHECK = as_bit_matrix(
    [
        [1, 0, 1, 0, 1, 0, 1],
        [0, 1, 1, 0, 0, 1, 1],
        [0, 0, 0, 1, 1, 1, 1],
    ]
)


def build_canonical_css() -> CssPair:
    """[7,4] Hamming over its [7,3] dual: one key bit per block, radius 1."""
    c1 = LinearCode.from_parity_check(HAMMING_PARITY_CHECK, radius=1)
    c2 = LinearCode.from_generator(HAMMING_PARITY_CHECK, radius=1)
    return CssPair(c1, c2)


def draw_group_codeword(code: LinearCode, parties: int, rng: random.Random) -> np.ndarray:
    """XOR of one random codeword per party; still uniform over the code."""
    if parties < 1:
        raise ValueError("need at least one party")
    u = np.zeros(code.length, dtype=np.uint8)
    for _ in range(parties):
        u ^= code.random_codeword(rng)
    return u


@dataclass
class ReconcileResult:
    key_alice: Bits
    key_bob: Bits | None
    public: Bits  # the announced u + v block
    discarded: bool

    @property
    def agreed(self) -> bool:
        return not self.discarded and self.key_alice == self.key_bob


def reconcile(
    pair: CssPair, held: Sequence[int], noisy: Sequence[int], u: Sequence[int]
) -> ReconcileResult:
    """One block of error correction plus coset key extraction.

    The holders of ``held`` announce u XOR held. The other side XORs the
    announcement into its noisy copy, leaving u plus the channel error, decodes
    back to a codeword, and both sides take that codeword's coset label as the
    key. Keys agree whenever the error weight stays within the code radius;
    blocks whose syndrome falls outside the table are discarded.
    """
    v = np.asarray(held, dtype=np.uint8) % 2
    w = np.asarray(noisy, dtype=np.uint8) % 2
    uu = np.asarray(u, dtype=np.uint8) % 2
    if v.shape != (pair.c1.length,) or w.shape != (pair.c1.length,):
        raise ValueError(f"blocks must have length {pair.c1.length}")
    key_alice = pair.coset_key(uu)
    public = (uu ^ v).astype(np.uint8)
    received = (w ^ public).astype(np.uint8)  # u xor error
    try:
        decoded = syndrome_decode(pair.c1, received)
    except DecodeFailure:
        return ReconcileResult(key_alice, None, tuple(int(x) for x in public), True)
    return ReconcileResult(
        key_alice, pair.coset_key(decoded), tuple(int(x) for x in public), False
    )


@dataclass
class StreamResult:
    final_alice: Bits
    final_bob: Bits
    blocks_total: int
    blocks_ok: int  # kept by both sides with agreeing keys (simulation statistic)
    blocks_discarded: int  # decode failures, dropped by both sides
    padding: Bits  # publicly announced tail fill, excluded from the final keys

    @property
    def block_yield(self) -> float:
        return self.blocks_ok / self.blocks_total if self.blocks_total else 0.0


def reconcile_stream(
    pair: CssPair,
    held: Sequence[int],
    noisy: Sequence[int],
    rng: random.Random,
    group_size: int = 1,
) -> StreamResult:
    """Blockwise reconciliation of two equal-length bit strings.

    A short final block is padded with publicly announced random bits on both
    sides; the padded block's key bits are dropped from the final keys since
    part of that block is public. Each block's codeword is drawn as the XOR of
    ``group_size`` random codewords, one per cooperating sender.

    ``blocks_ok`` counts blocks whose two keys actually agree, which an error
    beyond the code radius can silently break; the parties would confirm this
    with a hash in deployment, the simulator just compares.
    """
    if len(held) != len(noisy):
        raise ValueError("both strings must have equal length")
    n = pair.c1.length
    padding: list[int] = []
    held_list = [int(b) for b in held]
    noisy_list = [int(b) for b in noisy]
    if len(held_list) % n:
        padding = [rng.getrandbits(1) for _ in range(n - len(held_list) % n)]
        held_list.extend(padding)
        noisy_list.extend(padding)
    final_alice: list[int] = []
    final_bob: list[int] = []
    total = ok = dropped = 0
    for start in range(0, len(held_list), n):
        u = draw_group_codeword(pair.c1, group_size, rng)
        res = reconcile(pair, held_list[start : start + n], noisy_list[start : start + n], u)
        total += 1
        padded_block = bool(padding) and start + n >= len(held_list)
        if res.discarded:
            dropped += 1
            continue
        if res.agreed:
            ok += 1
        if not padded_block:
            final_alice.extend(res.key_alice)
            final_bob.extend(res.key_bob)
    return StreamResult(
        tuple(final_alice), tuple(final_bob), total, ok, dropped, tuple(padding)
    )


@dataclass
class KeyMaterial:
    """Both sides' sifted strings, the estimated error rate, and the distilled key."""

    held: Bits
    noisy: Bits
    delta: float
    final_key: Bits | None = None

    def __post_init__(self):
        if len(self.held) != len(self.noisy):
            raise ValueError("held and noisy strings must have equal length")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must be in [0, 1]")


# ---------------------------------------------------------------------------
# One-time pad


def xor_bits(a: Sequence[int], b: Sequence[int]) -> Bits:
    if len(a) != len(b):
        raise ValueError("XOR operands must have equal length")
    return tuple(int(x) ^ int(y) for x, y in zip(a, b))


def otp_send(message: Sequence[int], keys: Sequence[Sequence[int]]) -> Bits:
    """Encrypt by XOR against the concatenated block keys.

    Refuses when the key material is shorter than the message; decryption is
    the same XOR. Use :class:`OneTimePad` when the same material serves several
    messages, so reuse is refused too.
    """
    stream = [int(b) for block in keys for b in block]
    if len(stream) < len(message):
        raise KeyMaterialError(
            f"message needs {len(message)} key bits but only {len(stream)} are available"
        )
    return xor_bits(message, stream[: len(message)])


class OneTimePad:
    """Key-stream holder that consumes bits exactly once."""

    def __init__(self, key_bits: Sequence[int]):
        self._bits = [int(b) for b in key_bits]
        self._used = 0

    @classmethod
    def from_block_keys(cls, keys: Sequence[Sequence[int]]) -> "OneTimePad":
        return cls([int(b) for block in keys for b in block])

    @property
    def remaining(self) -> int:
        return len(self._bits) - self._used

    def _take(self, count: int) -> list[int]:
        if count > self.remaining:
            raise KeyMaterialError(
                f"refusing to reuse pad bits: {count} requested, {self.remaining} unused"
            )
        chunk = self._bits[self._used : self._used + count]
        self._used += count
        return chunk

    def encrypt(self, message: Sequence[int]) -> Bits:
        return xor_bits(message, self._take(len(message)))

    def decrypt(self, ciphertext: Sequence[int]) -> Bits:
        return xor_bits(ciphertext, self._take(len(ciphertext)))


def bits_to_hex(bits: Sequence[int]) -> str:
    """Hex rendering for reports; pads the tail with zeros to a nibble."""
    if not bits:
        return ""
    text = "".join(str(int(b)) for b in bits)
    text += "0" * (-len(text) % 4)
    return "".join(format(int(text[i : i + 4], 2), "x") for i in range(0, len(text), 4))


def hex_to_bits(text: str) -> Bits:
    """Inverse of :func:`bits_to_hex` up to nibble padding."""
    text = text.strip().lower()
    if text and any(c not in "0123456789abcdef" for c in text):
        raise ValueError(f"not a hex string: {text!r}")
    return tuple(int(b) for c in text for b in format(int(c, 16), "04b"))
