"""Adversarial garbler strategies and the guessing baselines they are scored against.

The superposition garbler prepares keys and tables honestly but sends each
key copy as a superposition over two (or more) of its inputs and each table
copy as a superposition over every garbled entry for both output masks.
When the evaluator accepts a copy and returns the key and output registers,
a clean-up turns the keys into a repetition encoding of the inputs, and a
logical Hadamard reads off ``f(x0, y) ^ f(x1, y)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import cipher, qsim
from .cipher import CipherSpec
from .garbling import (
    AND_GATE,
    OT_FUNCTION,
    FunctionSpec,
    WireKeys,
    bits_of,
    freexor_ot_garble,
    garble,
    garble_both_masks,
    sample_wire_keys,
)
from .protocols import (
    OUT,
    TABLE,
    GarblerSetup,
    IdealTwoParty,
    QuantumRun,
    garbler_key_reg,
    run_freexor_ot_quantum,
    run_modified_yao_quantum,
    run_superposition_resistant_yao,
)
from .qsim import RegisterLayout, SparseState

INV_SQRT2 = 1.0 / math.sqrt(2.0)
MINUS = (INV_SQRT2, -INV_SQRT2)
REF = "ref"


@dataclass(frozen=True)
class AttackConfig:
    """Inputs chosen by the environment plus optional superposition weights.

    Attributes:
        f: the function being computed.
        x0, x1: the garbler input pair to superpose.
        y: the honest evaluator's input.
        spec: cipher parameters.
        psi: amplitudes over garbler inputs (default uniform over ``x0, x1``).
        phi: amplitudes ``(alpha, beta)`` over the output mask (default ``|->``).
        allow_trivial: accept pairs that do not satisfy the non-triviality scan,
            needed when the function has no such pair (e.g. ``n_y = 0``).
    """

    f: FunctionSpec
    x0: int
    x1: int
    y: int
    spec: CipherSpec = field(default_factory=CipherSpec)
    psi: Mapping[int, complex] | None = None
    phi: tuple[complex, complex] | None = None
    allow_trivial: bool = False

    def __post_init__(self):
        f = self.f
        for x in (self.x0, self.x1):
            if not 0 <= x < 1 << f.n_x:
                raise ValueError(f"garbler input {x} does not fit {f.n_x} bits")
        if not 0 <= self.y < 1 << f.n_y:
            raise ValueError(f"evaluator input {self.y} does not fit {f.n_y} bits")
        if self.x0 == self.x1:
            raise ValueError("the two garbler inputs must differ")
        if not self.allow_trivial and not f.is_nontrivial(self.x0, self.x1):
            raise ValueError(f"({self.x0}, {self.x1}) is not a non-trivial pair for {f.name}")
        psi = self.key_amplitudes()
        if abs(sum(abs(a) ** 2 for a in psi.values()) - 1.0) > qsim.NORM_TOL:
            raise ValueError("psi is not normalized")
        if any(not 0 <= x < 1 << f.n_x for x in psi):
            raise ValueError("psi has support outside the garbler input space")
        a, b = self.mask_amplitudes()
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > qsim.NORM_TOL:
            raise ValueError("phi is not normalized")

    def key_amplitudes(self) -> dict[int, complex]:
        if self.psi is None:
            return {self.x0: INV_SQRT2, self.x1: INV_SQRT2}
        return {int(x): complex(a) for x, a in self.psi.items() if abs(a) > 0}

    def mask_amplitudes(self) -> tuple[complex, complex]:
        return MINUS if self.phi is None else (complex(self.phi[0]), complex(self.phi[1]))

    @property
    def target(self) -> int:
        """``f(x0, y) ^ f(x1, y)``, the bit the adversary tries to learn."""
        return self.f(self.x0, self.y) ^ self.f(self.x1, self.y)


@dataclass
class AttackOutcome:
    """Result of one attack run.

    ``l_prime[i]`` is the repetition length of garbler wire ``i`` after the
    key clean-up, ``logical_length`` the total length over the wires where the
    two inputs differ. ``prediction`` is the adversary's final bit, either
    extracted or guessed.
    """

    generated: bool
    copies_used: int
    l_prime: list[int] = field(default_factory=list)
    logical_length: int = 0
    extracted_bit: int | None = None
    guessed: bool = False
    prediction: int | None = None
    state: SparseState | None = None
    fidelity: float | None = None
    out_minus_fidelity: float | None = None
    ops: list[tuple[str, tuple[str, ...]]] = field(default_factory=list)
    seed: object = None
    run: QuantumRun | None = None
    evaluator_success: bool | None = None

    def to_dict(self) -> dict:
        return {
            "generated": self.generated,
            "copies_used": self.copies_used,
            "l_prime": list(self.l_prime),
            "extracted_bit": self.extracted_bit,
            "guessed": self.guessed,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# Garbler strategies


class SuperpositionGarbler:
    """Sends key copies weighted by ``psi`` and table copies weighted by ``phi``.

    With ``keep_reference`` the garbler also keeps a register ``ref`` holding
    the (key input, table index, mask) label of each branch, so the sent
    block is entangled with a register the garbler never sends.
    """

    def __init__(self, config: AttackConfig, keep_reference: bool = False,
                 garbling: tuple | None = None):
        self.config = config
        self.keep_reference = keep_reference
        self.garbling = garbling
        self.received: dict[int, SparseState] = {}

    def setup(self, f, spec, p, rng) -> GarblerSetup:
        if f != self.config.f:
            raise ValueError("strategy was configured for a different function")
        self.spec, self.f = spec, f
        if self.garbling is None:
            self.garbling = garble_both_masks(f, spec, rng, p)
        t0, t1 = self.garbling
        self.tables = (t0, t1)
        self.garbler_keys = t0.garbler_keys
        n = f.n
        psi = self.config.key_amplitudes()
        alpha, beta = self.config.mask_amplitudes()
        regs = [(garbler_key_reg(i), spec.n_k) for i in range(f.n_x)] + [(TABLE, spec.n_m)]
        if self.keep_reference:
            regs = [(REF, f.n_x + n + 1)] + regs
        self.layout = RegisterLayout(tuple(regs))
        scale = 1.0 / math.sqrt(1 << n)
        amps = []
        for x, a in psi.items():
            keys = t0.keys_for_x(x)
            for idx in range(1 << n):
                for kz, b in ((0, alpha), (1, beta)):
                    if b == 0:
                        continue
                    values = {garbler_key_reg(i): k for i, k in enumerate(keys)}
                    values[TABLE] = self.tables[kz].entries[idx]
                    if self.keep_reference:
                        values[REF] = (((x << n) | idx) << 1) | kz
                    amps.append((values, a * b * scale))
        self.block = SparseState.from_registers(self.layout, amps)
        return GarblerSetup(list(t0.evaluator_keys), t0.auxes, 1 << n)

    def send_copy(self, index: int) -> SparseState:
        return self.block

    def receive(self, index: int, state: SparseState) -> None:
        self.received[index] = state


class QPPTGarbler:
    """Measured shadow of the superposition garbler.

    Each copy is a basis state: a key for ``x0`` or ``x1`` chosen by a fair
    coin and one garbled entry drawn uniformly from both masked tables.
    """

    def __init__(self, config: AttackConfig):
        self.config = config
        self.received: dict[int, SparseState] = {}
        self.sent: list[SparseState] = []

    def setup(self, f, spec, p, rng) -> GarblerSetup:
        self.rng = rng
        self.tables = garble_both_masks(f, spec, rng, p)
        t0 = self.tables[0]
        self.layout = RegisterLayout(
            tuple((garbler_key_reg(i), spec.n_k) for i in range(f.n_x)) + ((TABLE, spec.n_m),))
        self.n = f.n
        return GarblerSetup(list(t0.evaluator_keys), t0.auxes, 1 << f.n)

    def send_copy(self, index: int) -> SparseState:
        x = (self.config.x0, self.config.x1)[int(self.rng.integers(2))]
        kz = int(self.rng.integers(2))
        idx = int(self.rng.integers(1 << self.n))
        values = {garbler_key_reg(i): k for i, k in enumerate(self.tables[0].keys_for_x(x))}
        values[TABLE] = self.tables[kz].entries[idx]
        block = SparseState.basis(self.layout, values)
        self.sent.append(block)
        return block

    def receive(self, index: int, state: SparseState) -> None:
        self.received[index] = state


class FreeXorOTGarbler(SuperpositionGarbler):
    """Superposition garbler for the bit OT whose only garbled gate is AND(b, X)."""

    def __init__(self, config: AttackConfig, keep_reference: bool = False):
        super().__init__(config, keep_reference)

    def setup(self, f, spec, p, rng) -> GarblerSetup:
        inst = freexor_ot_garble(spec, rng, kz=0, p=p, permute=False)
        t0 = inst.and_table
        keys = WireKeys(t0.garbler_keys, t0.evaluator_keys, t0.auxes)
        t1 = garble(AND_GATE, spec, 1, rng, p, permute=False, keys=keys)
        self.freexor = inst
        self.garbling = (t0, t1)
        inner = AttackConfig(AND_GATE, self.config.x0, self.config.x1, 0, spec,
                             self.config.psi, self.config.phi, allow_trivial=True)
        outer, self.config = self.config, inner
        try:
            setup = super().setup(AND_GATE, spec, p, rng)
        finally:
            self.config = outer
        return GarblerSetup(inst.ot_pairs(), setup.auxes, setup.copies)


# ---------------------------------------------------------------------------
# Clean-up and extraction


def _log(ops, name, regs):
    ops.append((name, tuple(regs)))


def key_cleanup(
    state: SparseState, garbler_keys, spec: CipherSpec, ops: list | None = None
) -> tuple[SparseState, list[int], list]:
    """Turn returned key registers into repetition encodings ``w{i}`` of the input bits.

    Applies the inverse of d_K to every key register, flips the bits where the
    wire's two keys differ and the 0-key holds a 1, discards (verified) the bits
    where the keys agree and merges the rest into ``w{i}``. The output register
    is never touched.
    """
    ops = [] if ops is None else ops
    dk_inv = qsim.BasisPermutation(spec.n_k, lambda k: cipher.d_k_inv(spec, k),
                                   lambda k: cipher.d_k(spec, k), "d_K^-1")
    l_prime = []
    for i, (k0, k1) in enumerate(garbler_keys):
        reg = garbler_key_reg(i)
        state = qsim.apply_basis_permutation(state, [reg], dk_inv)
        _log(ops, "d_K^-1", [reg])
        diff = k0 ^ k1
        flip = diff & k0
        if flip:
            state = qsim.apply_x(state, reg, flip)
            _log(ops, "X", [reg])
        bits = [f"{reg}.{j}" for j in range(spec.n_k)]
        state = qsim.partition_register(state, reg, [(b, 1) for b in bits])
        keep, drop = [], []
        for j, b in enumerate(bits):
            (keep if (diff >> (spec.n_k - 1 - j)) & 1 else drop).append(b)
        if drop:
            state = qsim.discard_register(state, drop)
            _log(ops, "discard", drop)
        state = qsim.merge_registers(state, keep, f"w{i}")
        _log(ops, "merge", keep)
        l_prime.append(len(keep))
    return state, l_prime, ops


def encoded_target_state(config: AttackConfig, l_prime, extra: SparseState | None = None) -> SparseState:
    """``sum_x psi_x |x^L'> (alpha |f(x,y)> + beta |f(x,y)^1>)`` in the clean-up layout."""
    f = config.f
    regs = [(f"w{i}", l) for i, l in enumerate(l_prime)] + [(OUT, 1)]
    layout = RegisterLayout(tuple(regs))
    alpha, beta = config.mask_amplitudes()
    amps = []
    for x, a in config.key_amplitudes().items():
        values = {f"w{i}": ((1 << l) - 1) * b for i, (l, b) in enumerate(zip(l_prime, bits_of(x, f.n_x)))}
        fx = f(x, config.y)
        amps.append(({**values, OUT: fx}, a * alpha))
        amps.append(({**values, OUT: fx ^ 1}, a * beta))
    return SparseState.from_registers(layout, amps)


def extract_xor(
    state: SparseState, config: AttackConfig, l_prime, rng: np.random.Generator, ops: list
) -> tuple[int, float, int]:
    """Logical-Hadamard readout of ``f(x0, y) ^ f(x1, y)``.

    Returns ``(bit, fidelity of the out register with |->, logical length)``.
    """
    n_x = config.f.n_x
    b0, b1 = bits_of(config.x0, n_x), bits_of(config.x1, n_x)
    differing = []
    for j in range(n_x):
        reg = f"w{j}"
        if b0[j] == b1[j]:
            state = qsim.discard_register(state, reg)
            _log(ops, "discard", [reg])
        else:
            differing.append(reg)
            if b0[j] == 1:
                state = qsim.apply_x(state, reg)
                _log(ops, "X", [reg])
    state = qsim.merge_registers(state, differing, "logical")
    out_local, state = qsim.factor_out(state, [OUT])
    minus = SparseState(out_local.layout, {0: INV_SQRT2, 1: -INV_SQRT2})
    out_fid = qsim.fidelity(out_local, minus)
    _log(ops, "factor-out", [OUT])
    state = state.normalized()
    state = qsim.apply_logical_hadamard(state, "logical")
    _log(ops, "H_L", ["logical"])
    length = state.layout.width_of("logical")
    if length > 1:
        state = qsim.partition_register(state, "logical", [("first", 1), ("rest", length - 1)])
    else:
        state = qsim.partition_register(state, "logical", [("first", 1)])
    bit, _, _ = qsim.measure_register(state, "first", rng)
    _log(ops, "measure", ["first"])
    return bit, out_fid, length


# ---------------------------------------------------------------------------
# Attack procedures


def _generate(config: AttackConfig, rng, strategy, runner) -> AttackOutcome:
    run = runner(strategy, rng)
    copies = len(run.copy_probabilities)
    if not run.success:
        return AttackOutcome(False, copies, run=run)
    returned = run.returned
    ops: list = []
    state, l_prime, ops = key_cleanup(returned, strategy.garbler_keys, config.spec, ops)
    target = encoded_target_state(config, l_prime)
    fid = qsim.fidelity(qsim.reorder(state, target.layout.names), target)
    return AttackOutcome(True, copies, l_prime, sum(l for l, a, b in zip(
        l_prime, bits_of(config.x0, config.f.n_x), bits_of(config.x1, config.f.n_x)) if a != b),
        state=state, fidelity=fid, ops=ops, run=run)


def _yao_runner(config: AttackConfig, exact: bool = False):
    return lambda strategy, rng: run_modified_yao_quantum(
        config.f, strategy, config.y, config.spec, rng, exact=exact)


def generalized_superposition(config: AttackConfig, rng: np.random.Generator) -> AttackOutcome:
    """Generate ``U_f^y |psi>|phi>`` (encoded) by sending weighted superpositions."""
    return _generate(config, rng, SuperpositionGarbler(config), _yao_runner(config))


def attack1_generate(config: AttackConfig, rng: np.random.Generator) -> AttackOutcome:
    """Superposition generation with uniform weights over the input pair and ``|->`` on the mask."""
    if config.psi is not None or config.phi is not None:
        raise ValueError("attack1 uses the default weights; see generalized_superposition")
    return generalized_superposition(config, rng)


def _finish(config: AttackConfig, outcome: AttackOutcome, rng) -> AttackOutcome:
    if not outcome.generated:
        outcome.guessed = True
        outcome.prediction = int(rng.integers(2))
        return outcome
    bit, out_fid, length = extract_xor(outcome.state, config, outcome.l_prime, rng, outcome.ops)
    outcome.extracted_bit = bit
    outcome.prediction = bit
    outcome.out_minus_fidelity = out_fid
    outcome.logical_length = length
    return outcome


def attack2_full(config: AttackConfig, rng: np.random.Generator) -> AttackOutcome:
    """Generation followed by extraction, or a fair-coin guess if generation failed."""
    return _finish(config, attack1_generate(config, rng), rng)


def exact_generation(config: AttackConfig, rng: np.random.Generator) -> QuantumRun:
    """Dual-branch run of the superposition garbler: exact per-copy and total success probabilities."""
    return run_modified_yao_quantum(config.f, SuperpositionGarbler(config), config.y, config.spec,
                                    rng, exact=True)


def qppt_reduced_attack(config: AttackConfig, rng: np.random.Generator) -> AttackOutcome:
    """Classical-message adversary: basis-state copies, then a fair-coin guess."""
    strategy = QPPTGarbler(config)
    run = run_modified_yao_quantum(config.f, strategy, config.y, config.spec, rng)
    if not all(b.is_basis_state() for b in strategy.sent):
        raise AssertionError("measured adversary sent a superposition")
    out = AttackOutcome(run.success, len(run.copy_probabilities), run=run)
    out.guessed = True
    out.prediction = int(rng.integers(2))
    return out


def resistant_attack(config: AttackConfig, rng: np.random.Generator,
                     keep_reference: bool = False) -> AttackOutcome:
    """The superposition garbler against the resistant protocol.

    No register comes back, so the adversary can only fall back to its guess.
    """
    strategy = SuperpositionGarbler(config, keep_reference=keep_reference)
    res = run_superposition_resistant_yao(config.f, strategy, config.y, config.spec, rng,
                                          compute_views=keep_reference)
    out = AttackOutcome(bool(strategy.received), len(res.copy_probabilities))
    out.evaluator_success = res.evaluator_output is not None and res.evaluator_output in (0, 1)
    return _finish(config, out, rng)


def ot_config(x0: int, x1: int, spec: CipherSpec | None = None, psi=None, phi=None) -> AttackConfig:
    """Config for the OT attack: garbler pair ``b = 0, 1`` against evaluator bits ``(x0, x1)``."""
    return AttackConfig(OT_FUNCTION, 0, 1, (x0 << 1) | x1, spec or CipherSpec(), psi, phi,
                        allow_trivial=True)


def ot_freexor_attack(spec: CipherSpec, x0: int, x1: int, rng: np.random.Generator,
                      exact: bool = False) -> AttackOutcome | QuantumRun:
    """Superposition attack on the free-XOR bit OT; extracts ``x0 ^ x1`` on success.

    With ``exact`` returns the dual-branch run instead of a sampled outcome.
    """
    config = ot_config(x0, x1, spec)
    strategy = FreeXorOTGarbler(config)
    runner = lambda s, r: run_freexor_ot_quantum(s, x0, x1, spec, r, exact=exact)
    if exact:
        return runner(strategy, rng)
    return _finish(config, _generate(config, rng, strategy, runner), rng)


# ---------------------------------------------------------------------------
# Ideal-world baselines and environments


def simulator_baseline(config: AttackConfig, ideal: IdealTwoParty, rng: np.random.Generator,
                       q: float = 0.5) -> int:
    """Query the ideal functionality once, then output 0 with probability ``q``."""
    x = (config.x0, config.x1)[int(rng.integers(2))]
    ideal.query(x)
    return 0 if rng.random() < q else 1


def counter_environment(f: FunctionSpec, x0: int, x1: int, q: float) -> int:
    """Evaluator input that minimizes the win rate of a ``q``-biased guesser."""
    want = 1 if q >= 0.5 else 0
    for y in range(1 << f.n_y):
        if f(x0, y) ^ f(x1, y) == want:
            return y
    raise ValueError("no evaluator input realizes the required XOR value")


def uniform_environment(f: FunctionSpec, rng: np.random.Generator) -> int:
    return int(rng.integers(1 << f.n_y)) if f.n_y else 0
