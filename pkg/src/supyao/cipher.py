"""Toy in-place, format-preserving, non-mixing block cipher.

Each round XORs a rotated copy of the key and the aux value into the message,
substitutes every full nibble through a 4-bit S-box and rotates the message
left by 3. Every step is a width-preserving bijection on the message register,
and the key and aux registers are left untouched, so encryption is a
permutation of (key, aux, message) labels that leaves key and aux alone.

The cipher has no cryptographic strength and is not meant to.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .qsim import BasisPermutation, RegisterLayout, SparseState, StateError

PRESENT_SBOX = (0xC, 0x5, 0x6, 0xB, 0x9, 0x0, 0xA, 0xD, 0x3, 0xE, 0xF, 0x8, 0x4, 0x7, 0x1, 0x2)
MSG_ROTATION = 3
MAX_GAME_WIDTH = 24
MAX_GAME_QUERIES = 1 << 10


def rotl(value: int, shift: int, width: int) -> int:
    """Rotate ``value`` left by ``shift`` within ``width`` bits."""
    if width <= 0:
        return 0
    shift %= width
    mask = (1 << width) - 1
    return ((value << shift) | (value >> (width - shift))) & mask


def rotr(value: int, shift: int, width: int) -> int:
    return rotl(value, -shift % max(width, 1), width)


@dataclass(frozen=True)
class CipherSpec:
    """Widths and round structure of the toy cipher.

    Attributes:
        n_k: key width in bits.
        n_a: aux width in bits.
        n_m: message width in bits; must exceed ``n_k``.
        rounds: number of rounds.
        sbox: 4-bit substitution table, a bijection on 0..15.
    """

    n_k: int = 8
    n_a: int = 8
    n_m: int = 21
    rounds: int = 8
    sbox: tuple[int, ...] = PRESENT_SBOX
    _tables: tuple = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "sbox", tuple(int(v) for v in self.sbox))
        if min(self.n_k, self.n_a, self.n_m) < 1:
            raise ValueError("cipher widths must be positive")
        if self.n_m <= self.n_k:
            raise ValueError(f"message width {self.n_m} must exceed key width {self.n_k}")
        if self.rounds < 1:
            raise ValueError("rounds must be positive")
        if sorted(self.sbox) != list(range(16)):
            raise ValueError("sbox must be a bijection on 16 values")
        inv = [0] * 16
        for i, v in enumerate(self.sbox):
            inv[v] = i
        fwd_byte = tuple((self.sbox[b >> 4] << 4) | self.sbox[b & 0xF] for b in range(256))
        inv_byte = tuple((inv[b >> 4] << 4) | inv[b & 0xF] for b in range(256))
        object.__setattr__(self, "_tables", (tuple(self.sbox), tuple(inv), fwd_byte, inv_byte))

    @property
    def nibbles(self) -> int:
        """Number of full nibbles passed through the S-box each round."""
        return self.n_m // 4

    def to_json(self) -> str:
        return json.dumps(
            {"n_k": self.n_k, "n_a": self.n_a, "n_m": self.n_m, "rounds": self.rounds,
             "sbox": list(self.sbox)},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "CipherSpec":
        data = json.loads(text)
        return cls(int(data["n_k"]), int(data["n_a"]), int(data["n_m"]), int(data["rounds"]),
                   tuple(data["sbox"]))

    def with_message_width(self, n_m: int) -> "CipherSpec":
        return CipherSpec(self.n_k, self.n_a, n_m, self.rounds, self.sbox)


def _check(spec: CipherSpec, k: int, aux: int, m: int) -> None:
    if not 0 <= k < (1 << spec.n_k):
        raise ValueError(f"key {k} does not fit {spec.n_k} bits")
    if not 0 <= aux < (1 << spec.n_a):
        raise ValueError(f"aux {aux} does not fit {spec.n_a} bits")
    if not 0 <= m < (1 << spec.n_m):
        raise ValueError(f"message {m} does not fit {spec.n_m} bits")


def _substitute(spec: CipherSpec, m: int, inverse: bool) -> int:
    small, small_inv, byte, byte_inv = spec._tables
    nib = small_inv if inverse else small
    tab = byte_inv if inverse else byte
    full = spec.nibbles
    out = m >> (4 * full) << (4 * full)
    shift = 0
    while full - shift // 4 >= 2:
        out |= tab[(m >> shift) & 0xFF] << shift
        shift += 8
    if shift // 4 < full:
        out |= nib[(m >> shift) & 0xF] << shift
    return out


def round_key(spec: CipherSpec, k: int, r: int) -> int:
    """Key material XORed in round ``r``: ``k`` rotated within its width, zero-extended."""
    return rotl(k, r, spec.n_k) & ((1 << spec.n_m) - 1)


def aux_word(spec: CipherSpec, aux: int) -> int:
    """Aux value truncated or zero-padded to the message width."""
    return aux & ((1 << spec.n_m) - 1)


def round_forward(spec: CipherSpec, k: int, aux: int, m: int, r: int) -> int:
    m ^= round_key(spec, k, r)
    m ^= aux_word(spec, aux)
    m = _substitute(spec, m, inverse=False)
    return rotl(m, MSG_ROTATION, spec.n_m)


def round_backward(spec: CipherSpec, k: int, aux: int, m: int, r: int) -> int:
    m = rotr(m, MSG_ROTATION, spec.n_m)
    m = _substitute(spec, m, inverse=True)
    m ^= aux_word(spec, aux)
    return m ^ round_key(spec, k, r)


# The key and aux registers are never modified, so the non-mixing maps are identities.
def e_k(spec: CipherSpec, k: int) -> int:
    return k


def e_a(spec: CipherSpec, aux: int) -> int:
    return aux


def d_k(spec: CipherSpec, k: int) -> int:
    return k


def d_a(spec: CipherSpec, aux: int) -> int:
    return aux


def e_k_inv(spec: CipherSpec, k: int) -> int:
    return k


def e_a_inv(spec: CipherSpec, aux: int) -> int:
    return aux


def d_k_inv(spec: CipherSpec, k: int) -> int:
    return k


def d_a_inv(spec: CipherSpec, aux: int) -> int:
    return aux


@lru_cache(maxsize=1 << 16)
def _schedule(spec: CipherSpec, k: int, aux: int) -> tuple[int, ...]:
    """Per-round whitening words ``round_key ^ aux_word``."""
    a = aux_word(spec, aux)
    return tuple(round_key(spec, k, r) ^ a for r in range(spec.rounds))


@lru_cache(maxsize=1 << 18)
def _enc_msg(spec: CipherSpec, k: int, aux: int, m: int) -> int:
    # inlined round_forward; kept equal to it by the test suite
    nm, mask = spec.n_m, (1 << spec.n_m) - 1
    _, _, byte, _ = spec._tables
    full = spec.nibbles
    nib = spec._tables[0]
    high = ~((1 << (4 * full)) - 1)
    rot = MSG_ROTATION % nm
    for w in _schedule(spec, k, aux):
        m ^= w
        out = m & high
        shift = 0
        while full - shift // 4 >= 2:
            out |= byte[(m >> shift) & 0xFF] << shift
            shift += 8
        if shift // 4 < full:
            out |= nib[(m >> shift) & 0xF] << shift
        m = ((out << rot) | (out >> (nm - rot))) & mask
    return m


@lru_cache(maxsize=1 << 18)
def _dec_msg(spec: CipherSpec, k: int, aux: int, c: int) -> int:
    nm, mask = spec.n_m, (1 << spec.n_m) - 1
    _, nib, _, byte = spec._tables
    full = spec.nibbles
    high = ~((1 << (4 * full)) - 1)
    rot = MSG_ROTATION % nm
    for w in reversed(_schedule(spec, k, aux)):
        c = ((c >> rot) | (c << (nm - rot))) & mask
        out = c & high
        shift = 0
        while full - shift // 4 >= 2:
            out |= byte[(c >> shift) & 0xFF] << shift
            shift += 8
        if shift // 4 < full:
            out |= nib[(c >> shift) & 0xF] << shift
        c = out ^ w
    return c


def enc(spec: CipherSpec, k: int, aux: int, m: int) -> tuple[int, int, int]:
    """Encrypt ``m``; returns ``(e_K(k), e_A(aux), c)``."""
    _check(spec, k, aux, m)
    return e_k(spec, k), e_a(spec, aux), _enc_msg(spec, k, aux, m)


def dec(spec: CipherSpec, k: int, aux: int, c: int) -> tuple[int, int, int]:
    """Decrypt ``c``; returns ``(d_K(k), d_A(aux), m)``."""
    _check(spec, k, aux, c)
    return d_k(spec, k), d_a(spec, aux), _dec_msg(spec, k, aux, c)


def seq_enc(spec: CipherSpec, keys: Sequence[int], auxes: Sequence[int], m: int) -> int:
    """Encrypt under each (key, aux) pair in order; the first pair is innermost."""
    if len(keys) != len(auxes):
        raise ValueError(f"{len(keys)} keys but {len(auxes)} aux values")
    for k, a in zip(keys, auxes):
        _, _, m = enc(spec, k, a, m)
    return m


def seq_dec(spec: CipherSpec, keys: Sequence[int], auxes: Sequence[int], c: int) -> int:
    """Inverse of :func:`seq_enc` for the same key and aux lists."""
    if len(keys) != len(auxes):
        raise ValueError(f"{len(keys)} keys but {len(auxes)} aux values")
    for k, a in zip(reversed(keys), reversed(auxes)):
        _, _, c = dec(spec, k, a, c)
    return c


def oracle_layout(spec: CipherSpec, key="key", aux="aux", msg="msg") -> RegisterLayout:
    return RegisterLayout.of((key, spec.n_k), (aux, spec.n_a), (msg, spec.n_m))


def minimal_oracle(spec: CipherSpec, direction: str = "enc") -> BasisPermutation:
    """The cipher as a permutation of packed ``key|aux|msg`` labels.

    The label packs the key in the top bits, then aux, then the message,
    matching a register list ``[(key, n_k), (aux, n_a), (msg, n_m)]``.
    """
    if direction not in ("enc", "dec"):
        raise ValueError(f"direction must be 'enc' or 'dec', not {direction!r}")
    nm, na = spec.n_m, spec.n_a
    mmask, amask = (1 << nm) - 1, (1 << na) - 1

    def split(label):
        return label >> (na + nm), (label >> nm) & amask, label & mmask

    def join(k, a, m):
        return (k << (na + nm)) | (a << nm) | m

    # labels split from a packed layout are always in range, so skip enc/dec's checks
    def fwd(label):
        k, a, m = split(label)
        return join(e_k(spec, k), e_a(spec, a), _enc_msg(spec, k, a, m))

    def bwd(label):
        k, a, c = split(label)
        # undo the key/aux maps first so the message is decrypted under the original key
        k, a = e_k_inv(spec, k), e_a_inv(spec, a)
        return join(k, a, _dec_msg(spec, k, a, c))

    def dec_fwd(label):
        k, a, c = split(label)
        return join(d_k(spec, k), d_a(spec, a), _dec_msg(spec, k, a, c))

    def dec_bwd(label):
        k, a, m = split(label)
        k, a = d_k_inv(spec, k), d_a_inv(spec, a)
        return join(k, a, _enc_msg(spec, k, a, m))

    width = spec.n_k + na + nm
    if direction == "enc":
        return BasisPermutation(width, fwd, bwd, "M_Enc")
    return BasisPermutation(width, dec_fwd, dec_bwd, "M_Dec")


def padding_for_security(eta: int, n_x: int, n_y: int) -> int:
    """Padding length ``eta + 2 (n_X + n_Y)`` giving failure probability about ``2^-eta``."""
    if eta < 0 or n_x < 0 or n_y < 0:
        raise ValueError("eta and widths must be non-negative")
    return eta + 2 * (n_x + n_y)


class LazyPermutation:
    """A uniformly random permutation of ``width``-bit strings, sampled on demand."""

    def __init__(self, width: int, rng: np.random.Generator):
        if width > MAX_GAME_WIDTH:
            raise ValueError(f"lazy permutation limited to {MAX_GAME_WIDTH} bits")
        self.width = width
        self.rng = rng
        self.forward: dict[int, int] = {}
        self.used: set[int] = set()

    def __call__(self, x: int) -> int:
        if x not in self.forward:
            size = 1 << self.width
            while True:
                y = int(self.rng.integers(size))
                if y not in self.used:
                    break
            self.forward[x] = y
            self.used.add(y)
        return self.forward[x]


@dataclass
class GameResult:
    b: int
    guess: int
    queries: int
    transcript: list[dict] = field(default_factory=list)

    @property
    def correct(self) -> bool:
        return self.b == self.guess


Adversary = Callable[[Callable[[SparseState], SparseState], int, np.random.Generator], int]


def ro_p_game(
    spec: CipherSpec, adversary: Adversary, q: int, seed: int | np.random.SeedSequence
) -> GameResult:
    """Real-or-permutation game against a sparse-state query adversary.

    The adversary is called as ``adversary(oracle, q, rng)`` and returns its
    guess bit. Each ``oracle(state)`` call takes a state on a single register
    of ``n_m`` qubits and returns a state on ``[("aux", n_a), ("msg", n_m)]``
    after applying either the keyed encryption (b = 0) or a random message
    permutation (b = 1), with a fresh uniformly random aux per query.
    """
    if q > MAX_GAME_QUERIES:
        raise ValueError(f"query budget {q} exceeds {MAX_GAME_QUERIES}")
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    chal_seq, adv_seq = seq.spawn(2)
    chal = np.random.default_rng(chal_seq)
    b = int(chal.integers(2))
    key = int(chal.integers(1 << spec.n_k))
    sigma = LazyPermutation(spec.n_m, chal) if b == 1 else None
    transcript: list[dict] = []
    out_layout = RegisterLayout.of(("aux", spec.n_a), ("msg", spec.n_m))

    def oracle(state: SparseState) -> SparseState:
        if len(transcript) >= q:
            raise RuntimeError(f"query budget of {q} exhausted")
        if state.layout.width != spec.n_m or len(state.layout.registers) != 1:
            raise StateError(f"queries must be a single {spec.n_m}-qubit register")
        aux = int(chal.integers(1 << spec.n_a))
        terms = {}
        for m, amp in state.terms.items():
            if b == 0:
                _, a2, c = enc(spec, key, aux, m)
            else:
                a2, c = e_a(spec, aux), sigma(m)
            terms[(a2 << spec.n_m) | c] = amp
        transcript.append({"aux": aux, "support": sorted(state.terms)})
        return SparseState(out_layout, terms, state.max_terms)

    guess = int(adversary(oracle, q, np.random.default_rng(adv_seq))) & 1
    return GameResult(b, guess, len(transcript), transcript)
