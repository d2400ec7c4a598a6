"""Single-table garbling of a whole one-bit-output function.

Input bit ``i`` of an ``n``-bit integer input is bit ``n - 1 - i`` of the
integer, so ``format(x, f"0{n}b")[i]`` is wire ``i``. The plaintext of every
entry is ``(f(x, y) ^ k^z) || 0^(n_M - 1)``: the output bit sits in the most
significant message bit and the low ``p`` bits serve as the padding check.
Encryption applies the evaluator's wire keys first and the garbler's last.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cipher
from .cipher import CipherSpec


class _Abort:
    """Sentinel returned when no entry passes the padding check."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ABORT"

    def __bool__(self):
        return False


ABORT = _Abort()


def bits_of(value: int, width: int) -> list[int]:
    """Wire bits of an integer input, wire 0 first (most significant)."""
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


def from_bits(bits: Sequence[int]) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | (int(b) & 1)
    return out


@dataclass(frozen=True)
class FunctionSpec:
    """Truth table of ``f: {0,1}^n_x x {0,1}^n_y -> {0,1}``.

    ``table[x * 2**n_y + y]`` is ``f(x, y)``.
    """

    n_x: int
    n_y: int
    table: tuple[int, ...]
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "table", tuple(int(v) for v in self.table))
        if self.n_x < 0 or self.n_y < 0 or self.n_x + self.n_y < 1:
            raise ValueError("need at least one input bit")
        if len(self.table) != 1 << (self.n_x + self.n_y):
            raise ValueError(
                f"truth table has {len(self.table)} entries, expected {1 << (self.n_x + self.n_y)}"
            )
        if any(v not in (0, 1) for v in self.table):
            raise ValueError("truth table entries must be bits")

    @property
    def n(self) -> int:
        return self.n_x + self.n_y

    def __call__(self, x: int, y: int) -> int:
        if not (0 <= x < 1 << self.n_x and 0 <= y < 1 << self.n_y):
            raise ValueError(f"input ({x}, {y}) out of range")
        return self.table[(x << self.n_y) | y]

    @classmethod
    def from_callable(cls, n_x: int, n_y: int, fn, name: str = "custom") -> "FunctionSpec":
        return cls(n_x, n_y, tuple(int(fn(x, y)) & 1 for x in range(1 << n_x)
                                   for y in range(1 << n_y)), name)

    @classmethod
    def builtin(cls, name: str, n_x: int = 1, n_y: int = 1) -> "FunctionSpec":
        """Named functions on the concatenated input bits.

        ``and``/``or``/``xor`` act on all ``n_x + n_y`` bits; ``ot`` is the
        bit oblivious transfer with garbler choice bit ``b`` and evaluator
        pair ``y = x0 x1``, returning ``x_b`` (widths forced to 1 and 2).
        """
        name = name.lower()
        if name == "ot":
            return cls.from_callable(1, 2, lambda b, y: (y >> (1 - b)) & 1, "ot")
        n = n_x + n_y
        full = (1 << n) - 1
        ops = {
            "and": lambda v: int(v == full),
            "or": lambda v: int(v != 0),
            "xor": lambda v: bin(v).count("1") & 1,
        }
        if name not in ops:
            raise ValueError(f"unknown builtin function {name!r}")
        op = ops[name]
        return cls.from_callable(n_x, n_y, lambda x, y: op((x << n_y) | y), name)

    @classmethod
    def parse_truth_table(cls, text: str, name: str = "table") -> "FunctionSpec":
        """Parse lines ``x y f`` of binary strings (``x f`` when there is no evaluator input)."""
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) == 2:
                parts = [parts[0], "", parts[1]]
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 'x y f', got {line!r}")
            if any(set(p) - {"0", "1"} for p in parts) or parts[2] not in ("0", "1"):
                raise ValueError(f"line {lineno}: entries must be binary strings")
            rows.append((parts[0], parts[1], int(parts[2])))
        if not rows:
            raise ValueError("empty truth table")
        n_x, n_y = len(rows[0][0]), len(rows[0][1])
        table: dict[int, int] = {}
        for xs, ys, v in rows:
            if len(xs) != n_x or len(ys) != n_y:
                raise ValueError("inconsistent input widths in truth table")
            key = (int(xs or "0", 2) << n_y) | int(ys or "0", 2)
            if key in table:
                raise ValueError(f"duplicate row for x={xs} y={ys}")
            table[key] = v
        if len(table) != 1 << (n_x + n_y):
            raise ValueError(f"truth table lists {len(table)} of {1 << (n_x + n_y)} rows")
        return cls(n_x, n_y, tuple(table[i] for i in range(len(table))), name)

    @classmethod
    def load(cls, path: str | Path) -> "FunctionSpec":
        path = Path(path)
        return cls.parse_truth_table(path.read_text(), path.stem)

    def to_truth_table(self) -> str:
        lines = []
        for x in range(1 << self.n_x):
            for y in range(1 << self.n_y):
                xs = format(x, f"0{self.n_x}b") if self.n_x else ""
                ys = format(y, f"0{self.n_y}b") if self.n_y else ""
                lines.append(" ".join(s for s in (xs, ys) if s) + f" {self(x, y)}")
        return "\n".join(lines) + "\n"

    def nontrivial_pairs(self) -> list[tuple[int, int]]:
        """Ordered pairs ``(x0, x1)`` whose outputs agree for some y and differ for another."""
        out = []
        for x0 in range(1 << self.n_x):
            for x1 in range(1 << self.n_x):
                if x0 != x1 and self.is_nontrivial(x0, x1):
                    out.append((x0, x1))
        return out

    def is_nontrivial(self, x0: int, x1: int) -> bool:
        diffs = {self(x0, y) ^ self(x1, y) for y in range(1 << self.n_y)}
        return diffs == {0, 1}


def sample_key_pair(spec: CipherSpec, rng: np.random.Generator) -> tuple[int, int]:
    """Two distinct uniformly random keys."""
    while True:
        k0, k1 = (int(v) for v in rng.integers(1 << spec.n_k, size=2))
        if k0 != k1:
            return k0, k1


def default_padding(spec: CipherSpec) -> int:
    return spec.n_m - 1


@dataclass(frozen=True)
class GarbleInstance:
    """Keys, aux values and garbled entries for one output mask.

    ``entries[t]`` is the initial entry with index ``perm[t]``, where the
    initial index of input pair ``(x, y)`` is ``x * 2**n_y + y``.
    """

    function: FunctionSpec
    spec: CipherSpec
    garbler_keys: tuple[tuple[int, int], ...]
    evaluator_keys: tuple[tuple[int, int], ...]
    kz: int
    auxes: tuple[int, ...]
    p: int
    entries: tuple[int, ...]
    perm: tuple[int, ...]

    def __post_init__(self):
        f = self.function
        if len(self.garbler_keys) != f.n_x or len(self.evaluator_keys) != f.n_y:
            raise ValueError("wire key count does not match function widths")
        if len(self.auxes) != f.n:
            raise ValueError("need one aux value per input wire")
        if len(self.entries) != 1 << f.n or sorted(self.perm) != list(range(1 << f.n)):
            raise ValueError("entries and permutation must cover every input pair")
        if not 1 <= self.p <= self.spec.n_m - 1:
            raise ValueError(f"padding {self.p} outside 1..{self.spec.n_m - 1}")

    @property
    def garbler_auxes(self) -> tuple[int, ...]:
        return self.auxes[: self.function.n_x]

    @property
    def evaluator_auxes(self) -> tuple[int, ...]:
        return self.auxes[self.function.n_x:]

    def keys_for_x(self, x: int) -> list[int]:
        return [pair[b] for pair, b in zip(self.garbler_keys, bits_of(x, self.function.n_x))]

    def keys_for_y(self, y: int) -> list[int]:
        return [pair[b] for pair, b in zip(self.evaluator_keys, bits_of(y, self.function.n_y))]

    def key_sequence(self, gkeys: Sequence[int], ekeys: Sequence[int]) -> tuple[list[int], list[int]]:
        """Keys and aux values in encryption order (evaluator wires first)."""
        return list(ekeys) + list(gkeys), list(self.evaluator_auxes) + list(self.garbler_auxes)

    def initial_entries(self) -> list[int]:
        out = [0] * len(self.entries)
        for t, idx in enumerate(self.perm):
            out[idx] = self.entries[t]
        return out

    def entry_for(self, x: int, y: int) -> int:
        return self.initial_entries()[(x << self.function.n_y) | y]

    def to_dict(self) -> dict:
        hk = lambda k: format(k, f"0{(self.spec.n_k + 3) // 4}x")
        hm = lambda m: format(m, f"0{(self.spec.n_m + 3) // 4}x")
        return {
            "function": {"name": self.function.name, "n_x": self.function.n_x,
                         "n_y": self.function.n_y, "table": list(self.function.table)},
            "cipher": json.loads(self.spec.to_json()),
            "garbler_keys": [[hk(a), hk(b)] for a, b in self.garbler_keys],
            "evaluator_keys": [[hk(a), hk(b)] for a, b in self.evaluator_keys],
            "kz": self.kz,
            "auxes": [format(a, f"0{(self.spec.n_a + 3) // 4}x") for a in self.auxes],
            "p": self.p,
            "entries": [hm(e) for e in self.entries],
            "perm": list(self.perm),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "GarbleInstance":
        fd = d["function"]
        h = lambda s: int(s, 16)
        return cls(
            FunctionSpec(fd["n_x"], fd["n_y"], tuple(fd["table"]), fd["name"]),
            CipherSpec.from_json(json.dumps(d["cipher"])),
            tuple((h(a), h(b)) for a, b in d["garbler_keys"]),
            tuple((h(a), h(b)) for a, b in d["evaluator_keys"]),
            int(d["kz"]),
            tuple(h(a) for a in d["auxes"]),
            int(d["p"]),
            tuple(h(e) for e in d["entries"]),
            tuple(int(i) for i in d["perm"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "GarbleInstance":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class WireKeys:
    garbler: tuple[tuple[int, int], ...]
    evaluator: tuple[tuple[int, int], ...]
    auxes: tuple[int, ...]


def sample_wire_keys(f: FunctionSpec, spec: CipherSpec, rng: np.random.Generator) -> WireKeys:
    garbler = tuple(sample_key_pair(spec, rng) for _ in range(f.n_x))
    evaluator = tuple(sample_key_pair(spec, rng) for _ in range(f.n_y))
    auxes = tuple(int(a) for a in rng.integers(1 << spec.n_a, size=f.n))
    return WireKeys(garbler, evaluator, auxes)


def plaintext(spec: CipherSpec, bit: int) -> int:
    """``bit || 0^(n_M - 1)``."""
    return (bit & 1) << (spec.n_m - 1)


def garble(
    f: FunctionSpec,
    spec: CipherSpec,
    kz: int,
    rng: np.random.Generator,
    p: int | None = None,
    permute: bool = True,
    keys: WireKeys | None = None,
) -> GarbleInstance:
    """Garble ``f`` as a single table with output mask ``kz``.

    Args:
        f: function to garble.
        spec: cipher parameters.
        kz: output mask bit.
        rng: source for keys, aux values and the table permutation.
        p: padding bits checked by the evaluator (default ``n_M - 1``).
        permute: shuffle the table; the attack skips this.
        keys: reuse existing wire keys instead of sampling them.
    """
    p = default_padding(spec) if p is None else p
    keys = keys or sample_wire_keys(f, spec, rng)
    initial = []
    for x in range(1 << f.n_x):
        gk = [pair[b] for pair, b in zip(keys.garbler, bits_of(x, f.n_x))]
        for y in range(1 << f.n_y):
            ek = [pair[b] for pair, b in zip(keys.evaluator, bits_of(y, f.n_y))]
            ks = ek + gk
            auxes = list(keys.auxes[f.n_x:]) + list(keys.auxes[: f.n_x])
            initial.append(cipher.seq_enc(spec, ks, auxes, plaintext(spec, f(x, y) ^ kz)))
    n = len(initial)
    perm = tuple(int(i) for i in rng.permutation(n)) if permute else tuple(range(n))
    return GarbleInstance(f, spec, keys.garbler, keys.evaluator, kz & 1, keys.auxes, p,
                          tuple(initial[i] for i in perm), perm)


def garble_both_masks(
    f: FunctionSpec, spec: CipherSpec, rng: np.random.Generator, p: int | None = None,
    keys: WireKeys | None = None,
) -> tuple[GarbleInstance, GarbleInstance]:
    """Unpermuted tables for ``k^z = 0`` and ``k^z = 1`` under shared wire keys."""
    keys = keys or sample_wire_keys(f, spec, rng)
    return (garble(f, spec, 0, rng, p, permute=False, keys=keys),
            garble(f, spec, 1, rng, p, permute=False, keys=keys))


def padding_ok(spec: CipherSpec, m: int, p: int) -> bool:
    return m & ((1 << p) - 1) == 0


def output_bit(spec: CipherSpec, m: int) -> int:
    return (m >> (spec.n_m - 1)) & 1


@dataclass(frozen=True)
class Evaluation:
    """Result of the evaluator's decrypt loop."""

    output: int | _Abort
    accepted_index: int | None
    attempts: int


def evaluate_trace(
    instance: GarbleInstance, gkeys: Sequence[int], ekeys: Sequence[int]
) -> Evaluation:
    """Try entries in table order; accept the first whose low ``p`` bits are zero."""
    spec = instance.spec
    keys, auxes = instance.key_sequence(gkeys, ekeys)
    for t, entry in enumerate(instance.entries):
        m = cipher.seq_dec(spec, list(keys), auxes, entry)
        if padding_ok(spec, m, instance.p):
            return Evaluation(output_bit(spec, m), t, t + 1)
    return Evaluation(ABORT, None, len(instance.entries))


def evaluate(instance: GarbleInstance, gkeys: Sequence[int], ekeys: Sequence[int]):
    """Masked output bit ``f(x, y) ^ k^z``, or ``ABORT``."""
    return evaluate_trace(instance, gkeys, ekeys).output


@dataclass(frozen=True)
class FreeXorKeys:
    """Wire keys with a global offset: ``k1 = k0 ^ offset`` on every wire."""

    offset: int
    zero_keys: dict = field(default_factory=dict)

    def key(self, wire: str, bit: int) -> int:
        return self.zero_keys[wire] ^ (self.offset if bit else 0)

    def pair(self, wire: str) -> tuple[int, int]:
        return self.key(wire, 0), self.key(wire, 1)

    def with_input(self, wire: str, k0: int) -> "FreeXorKeys":
        return FreeXorKeys(self.offset, {**self.zero_keys, wire: k0})

    def with_xor(self, out: str, a: str, b: str) -> "FreeXorKeys":
        """Output wire of an XOR gate: ``k0_out = k0_a ^ k0_b``."""
        return self.with_input(out, self.zero_keys[a] ^ self.zero_keys[b])


def evaluate_free_xor(ka: int, kb: int) -> int:
    """Key for the XOR of two wires from one key of each."""
    return ka ^ kb


OT_FUNCTION = FunctionSpec.builtin("ot")
AND_GATE = FunctionSpec.builtin("and", 1, 1)


@dataclass(frozen=True)
class FreeXorOT:
    """Bit OT ``b x1 ^ (1 ^ b) x0 = b (x0 ^ x1) ^ x0`` with only the AND gate garbled.

    The evaluator's wires ``x0`` and ``x1`` and their XOR ``X`` follow the
    free-XOR discipline. The garbled AND table takes the garbler's bit ``b``
    and ``X``. The final XOR with ``x0`` acts on the one-bit masked output,
    where the label of value ``v`` is ``v ^ k^z`` (zero label ``k^z``, offset 1),
    so it is a CNOT from the evaluator's ``x0`` bit.
    """

    keys: FreeXorKeys
    and_table: GarbleInstance

    @property
    def kz(self) -> int:
        return self.and_table.kz

    def ot_pairs(self) -> list[tuple[int, int]]:
        """Sender inputs of the two string OTs, for wires ``x0`` and ``x1``."""
        return [self.keys.pair("x0"), self.keys.pair("x1")]

    def evaluate(self, kb: int, k_x0: int, k_x1: int, x0: int):
        """Masked ``OT(b, x0, x1) ^ k^z`` from one key per wire, or ``ABORT``."""
        k_X = evaluate_free_xor(k_x0, k_x1)
        out = evaluate(self.and_table, [kb], [k_X])
        if out is ABORT:
            return ABORT
        return out ^ x0


def freexor_ot_garble(
    spec: CipherSpec, rng: np.random.Generator, kz: int | None = None, p: int | None = None,
    permute: bool = True,
) -> FreeXorOT:
    """Garble the AND gate of ``b X`` with free-XOR keys on ``x0``, ``x1`` and ``X``."""
    while True:
        offset = int(rng.integers(1 << spec.n_k))
        if offset:
            break
    k_x0, k_x1 = (int(v) for v in rng.integers(1 << spec.n_k, size=2))
    keys = FreeXorKeys(offset).with_input("x0", k_x0).with_input("x1", k_x1).with_xor("X", "x0", "x1")
    kz = int(rng.integers(2)) if kz is None else kz
    wires = WireKeys(
        garbler=(sample_key_pair(spec, rng),),
        evaluator=(keys.pair("X"),),
        auxes=tuple(int(a) for a in rng.integers(1 << spec.n_a, size=2)),
    )
    table = garble(AND_GATE, spec, kz, rng, p, permute=permute, keys=wires)
    return FreeXorOT(keys, table)
