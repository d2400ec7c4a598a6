"""Ideal functionalities and protocol runners.

The quantum runners embed the garbled-table protocol in the sparse engine.
The garbler is a strategy object that emits one register block per key and
table copy. The evaluator is honest: it decrypts each block with minimal
oracles, measures the padding pattern and either returns the block to the
garbler (modified protocol) or keeps the result (resistant variant).

Copy blocks are produced by the garbler as product states, so each block is
simulated on its own. After a failed padding check the evaluator's key and
aux registers are split off with a verified factorization before the next
block is attached.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from . import cipher, qsim
from .cipher import CipherSpec
from .garbling import (
    ABORT,
    FunctionSpec,
    GarbleInstance,
    bits_of,
    evaluate_trace,
    garble,
    output_bit,
)
from .qsim import RegisterLayout, SparseState

TABLE = "table"
OUT = "out"
PAD = "pad"


def garbler_key_reg(i: int) -> str:
    return f"kG{i}"


def evaluator_key_reg(j: int) -> str:
    return f"kE{j}"


def aux_reg(i: int) -> str:
    return f"aux{i}"


@dataclass
class Event:
    step: str
    party: str
    registers: list[str] = field(default_factory=list)
    outcome: object = None
    probability: float | None = None


@dataclass
class Transcript:
    """Ordered record of one protocol run."""

    seed: object = None
    events: list[Event] = field(default_factory=list)
    outputs: dict = field(default_factory=dict)

    def add(self, step, party, registers=(), outcome=None, probability=None) -> None:
        if outcome is ABORT:
            outcome = "abort"
        self.events.append(Event(step, party, list(registers), outcome,
                                 None if probability is None else float(probability)))

    def to_dict(self) -> dict:
        outputs = {k: ("abort" if v is ABORT else v) for k, v in self.outputs.items()}
        return {"seed": self.seed, "events": [asdict(e) for e in self.events], "outputs": outputs}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def steps(self) -> list[str]:
        return [e.step for e in self.events]


# ---------------------------------------------------------------------------
# Ideal functionalities


@dataclass(frozen=True)
class OTResult:
    receiver: object
    sender: object
    choice: int | None
    probability: float


def ideal_ot(
    pair: tuple[int, int] | object,
    choice: int | SparseState | object,
    rng: np.random.Generator,
    register: str | None = None,
) -> OTResult:
    """String OT: measure the receiver's choice, return the chosen key as a basis value.

    ``choice`` is a bit or a state holding a one-qubit ``register``. Malformed
    sender input or choice makes both parties receive ``ABORT``.
    """
    if pair is ABORT or not (isinstance(pair, tuple) and len(pair) == 2):
        return OTResult(ABORT, ABORT, None, 1.0)
    if choice is ABORT:
        return OTResult(ABORT, ABORT, None, 1.0)
    if isinstance(choice, SparseState):
        reg = register or choice.layout.names[0]
        if choice.layout.width_of(reg) != 1:
            return OTResult(ABORT, ABORT, None, 1.0)
        b, prob, _ = qsim.measure_register(choice, reg, rng)
    else:
        if choice not in (0, 1):
            return OTResult(ABORT, ABORT, None, 1.0)
        b, prob = int(choice), 1.0
    return OTResult(int(pair[b]), None, b, prob)


def key_distribution(n: int, rng: np.random.Generator) -> int:
    """Shared uniformly random ``n``-bit key (returned to both parties)."""
    return int(rng.integers(1 << n)) if n < 63 else int.from_bytes(rng.bytes((n + 7) // 8), "big") >> (-n % 8)


def confidential_channel(state: SparseState, reg: str, rng: np.random.Generator) -> int:
    """Measure ``reg`` in the computational basis and deliver the value."""
    value, _, _ = qsim.measure_register(state, reg, rng)
    return value


class IdealTwoParty:
    """Trusted party for ``f`` holding the evaluator's input; answers one query."""

    def __init__(self, f: FunctionSpec, y: int):
        self.f = f
        self.y = y
        self.queries = 0

    def query(self, x: int | SparseState, rng: np.random.Generator | None = None,
              register: str | None = None) -> int:
        if self.queries:
            raise RuntimeError("the ideal functionality answers a single query")
        self.queries += 1
        if isinstance(x, SparseState):
            if rng is None:
                raise ValueError("measuring a quantum input needs an rng")
            x, _, _ = qsim.measure_register(x, register or x.layout.names[0], rng)
        return self.f(int(x), self.y)


# ---------------------------------------------------------------------------
# Classical modified protocol


def run_modified_yao_classical(
    f: FunctionSpec,
    x: int,
    y: int,
    spec: CipherSpec,
    rng: np.random.Generator,
    p: int | None = None,
) -> tuple[object, Transcript]:
    """Honest classical run; returns the garbler's output bit (or ABORT) and the transcript."""
    tr = Transcript()
    kz = int(rng.integers(2))
    inst = garble(f, spec, kz, rng, p)
    tr.add("garble", "garbler", outcome={"entries": len(inst.entries)})
    ekeys = []
    for j, b in enumerate(bits_of(y, f.n_y)):
        res = ideal_ot(inst.evaluator_keys[j], b, rng)
        if res.receiver is ABORT:
            tr.add("ot", "both", outcome=ABORT)
            tr.outputs = {"garbler": ABORT, "evaluator": ABORT}
            return ABORT, tr
        ekeys.append(res.receiver)
        tr.add("ot", "evaluator", [evaluator_key_reg(j)], outcome="key")
    tr.add("send", "garbler", outcome={"copies": 1 << f.n, "auxes": len(inst.auxes)})
    ev = evaluate_trace(inst, inst.keys_for_x(x), ekeys)
    for t in range(ev.attempts):
        accepted = t == ev.accepted_index
        tr.add("padding-check", "evaluator", [TABLE], outcome="match" if accepted else "no-match")
    if ev.output is ABORT:
        tr.outputs = {"garbler": ABORT, "evaluator": ABORT}
        return ABORT, tr
    out = ev.output ^ kz
    tr.add("unmask", "garbler", [OUT], outcome=out)
    tr.outputs = {"garbler": out}
    return out, tr


# ---------------------------------------------------------------------------
# Quantum embedding


@dataclass
class GarblerSetup:
    """Classical material the garbler commits to before sending copies.

    Attributes:
        ot_pairs: sender inputs for each evaluator-wire OT.
        auxes: aux values, garbler wires first.
        copies: number of key/table copies that will be sent.
    """

    ot_pairs: list[tuple[int, int]]
    auxes: tuple[int, ...]
    copies: int


class GarblerStrategy(Protocol):
    """Garbler behavior in the quantum-embedded protocol.

    ``send_copy`` returns a block holding the registers ``kG0 .. kG{n_x-1}``
    and ``table``; any other register is kept by the garbler.
    """

    def setup(self, f: FunctionSpec, spec: CipherSpec, p: int, rng: np.random.Generator) -> GarblerSetup: ...

    def send_copy(self, index: int) -> SparseState: ...

    def receive(self, index: int, state: SparseState) -> None: ...


@dataclass
class BlockBranch:
    """One outcome of the padding measurement on a copy block."""

    matched: bool
    probability: float
    state: SparseState


@dataclass
class QuantumRun:
    """Outcome of a quantum-embedded run.

    In sampled mode ``success``/``copy_index``/``returned`` describe the
    realized run. In exact mode ``copy_probabilities`` lists every copy's
    match probability and ``success_states`` holds ``(weight, state)`` for a
    first success at each copy; ``p_success`` is exact in both modes for
    strategies whose blocks are identically distributed.
    """

    transcript: Transcript
    success: bool
    copy_index: int | None
    returned: SparseState | None
    evaluator_state: SparseState
    copy_probabilities: list[float]
    p_success: float
    success_states: list[tuple[float, SparseState]] = field(default_factory=list)
    failed_blocks: list[SparseState] = field(default_factory=list)
    evaluator_output: object = None


class EvaluatorCore:
    """Honest evaluator's per-block unitary embedding.

    Persistent registers hold the evaluator's keys and the aux values as basis
    states. ``decrypt_order`` lists ``(key register, aux register)`` pairs in
    decryption order (garbler keys outermost).
    """

    def __init__(self, spec: CipherSpec, n_x: int, ekeys: Sequence[int], auxes: Sequence[int], p: int):
        if p != spec.n_m - 1:
            raise ValueError("the quantum embedding checks the full n_M - 1 padding bits")
        n_y = len(ekeys)
        if len(auxes) != n_x + n_y:
            raise ValueError(f"expected {n_x + n_y} aux values, got {len(auxes)}")
        self.spec, self.n_x, self.n_y, self.p = spec, n_x, n_y, p
        regs = [(evaluator_key_reg(j), spec.n_k) for j in range(n_y)]
        regs += [(aux_reg(i), spec.n_a) for i in range(n_x + n_y)]
        values = {evaluator_key_reg(j): k for j, k in enumerate(ekeys)}
        values.update({aux_reg(i): a for i, a in enumerate(auxes)})
        self.persistent_names = [r for r, _ in regs]
        self.persistent = SparseState.basis(RegisterLayout(tuple(regs)), values)
        enc_order = [(evaluator_key_reg(j), aux_reg(n_x + j)) for j in range(n_y)]
        enc_order += [(garbler_key_reg(i), aux_reg(i)) for i in range(n_x)]
        self.decrypt_order = list(reversed(enc_order))
        self.m_dec = cipher.minimal_oracle(spec, "dec")
        self.dk_inv = qsim.BasisPermutation(spec.n_k, lambda k: cipher.d_k_inv(spec, k),
                                            lambda k: cipher.d_k(spec, k), "d_K^-1")
        self.da_inv = qsim.BasisPermutation(spec.n_a, lambda a: cipher.d_a_inv(spec, a),
                                            lambda a: cipher.d_a(spec, a), "d_A^-1")

    def check_block(self, block: SparseState) -> None:
        layout = block.layout
        for i in range(self.n_x):
            if layout.width_of(garbler_key_reg(i)) != self.spec.n_k:
                raise qsim.StateError(f"garbler key register {i} has the wrong width")
        if layout.width_of(TABLE) != self.spec.n_m:
            raise qsim.StateError("table register has the wrong width")

    def decrypt(self, block: SparseState) -> SparseState:
        """Attach persistent registers, apply every M_Dec layer, split off out/pad."""
        self.check_block(block)
        state = qsim.tensor(block, self.persistent)
        for key, aux in self.decrypt_order:
            state = qsim.apply_basis_permutation(state, [key, aux, TABLE], self.m_dec)
        return qsim.partition_register(state, TABLE, [(OUT, 1), (PAD, self.p)])

    def branches(self, decrypted: SparseState) -> list[BlockBranch]:
        return [BlockBranch(m, pr, st) for m, pr, st in qsim.pattern_branches(decrypted, PAD, 0)]

    def after_failure(self, state: SparseState) -> SparseState:
        """Undo d_K/d_A on persistent registers and split them off (verified)."""
        for j in range(self.n_y):
            state = qsim.apply_basis_permutation(state, [evaluator_key_reg(j)], self.dk_inv)
        for i in range(self.n_x + self.n_y):
            state = qsim.apply_basis_permutation(state, [aux_reg(i)], self.da_inv)
        local, rest = qsim.factor_out(state, self.persistent_names)
        if not local.is_basis_state():
            raise qsim.EntanglementError("evaluator registers left a basis state")
        self.persistent = qsim.reorder(local, self.persistent_names)
        return rest

    def after_success(self, state: SparseState) -> SparseState:
        """Split off persistent registers and the zero padding; return the rest."""
        local, rest = qsim.factor_out(state, self.persistent_names)
        if not local.is_basis_state():
            raise qsim.EntanglementError("evaluator registers left a basis state")
        self.persistent = qsim.reorder(local, self.persistent_names)
        return qsim.discard_register(rest, PAD)


def _evaluator_keys(setup: GarblerSetup, y: int, n_y: int, rng, tr: Transcript) -> list[int] | None:
    if len(setup.ot_pairs) != n_y:
        raise ValueError(f"strategy offered {len(setup.ot_pairs)} OT pairs for {n_y} evaluator wires")
    ekeys = []
    for j, b in enumerate(bits_of(y, n_y)):
        res = ideal_ot(setup.ot_pairs[j], b, rng)
        tr.add("ot", "evaluator", [evaluator_key_reg(j)],
               outcome="abort" if res.receiver is ABORT else "key")
        if res.receiver is ABORT:
            return None
        ekeys.append(res.receiver)
    return ekeys


def _run_blocks(
    strategy: GarblerStrategy,
    core: EvaluatorCore,
    copies: int,
    rng: np.random.Generator,
    tr: Transcript,
    exact: bool,
    return_to_garbler: bool,
    post_success: Callable[[SparseState], SparseState] | None = None,
) -> QuantumRun:
    probs: list[float] = []
    success_states: list[tuple[float, SparseState]] = []
    failed: list[SparseState] = []
    reach = 1.0
    realized = None
    for i in range(copies):
        block = strategy.send_copy(i)
        tr.add("send-copy", "garbler", block.layout.names, outcome={"terms": len(block)})
        decrypted = core.decrypt(block)
        branches = {b.matched: b for b in core.branches(decrypted)}
        p_match = branches[True].probability if True in branches else 0.0
        probs.append(p_match)

        if exact:
            if True in branches:
                st = core.after_success(branches[True].state)
                if post_success:
                    st = post_success(st)
                success_states.append((reach * p_match, st))
            if False in branches:
                st = core.after_failure(branches[False].state)
            reach *= 1.0 - p_match
            tr.add("padding-check", "evaluator", [PAD], outcome="both", probability=p_match)
            continue

        matched = bool(rng.random() < p_match)
        tr.add("padding-check", "evaluator", [PAD], outcome="match" if matched else "no-match",
               probability=p_match if matched else 1.0 - p_match)
        if matched:
            st = core.after_success(branches[True].state)
            if post_success:
                st = post_success(st)
            realized = (i, st)
            break
        failed.append(core.after_failure(branches[False].state))

    p_success = 1.0 - math.prod(1.0 - q for q in probs) if exact else float("nan")
    if exact:
        return QuantumRun(tr, False, None, None, core.persistent, probs, p_success,
                          success_states, failed)
    if realized is None:
        tr.add("abort", "evaluator", outcome=ABORT)
        return QuantumRun(tr, False, None, None, core.persistent, probs, p_success, [], failed,
                          evaluator_output=ABORT)
    i, st = realized
    if return_to_garbler:
        tr.add("return", "evaluator", st.layout.names, outcome={"copy": i})
        strategy.receive(i, st)
        return QuantumRun(tr, True, i, st, core.persistent, probs, p_success, [], failed)
    out, _, st = qsim.measure_register(st, OUT, rng)
    tr.add("output", "evaluator", [OUT], outcome=out)
    return QuantumRun(tr, True, i, None, core.persistent, probs, p_success, [], failed,
                      evaluator_output=out)


def _copy_count(setup: GarblerSetup, n: int) -> int:
    if setup.copies != 1 << n:
        raise ValueError(f"strategy announced {setup.copies} copies, the protocol uses {1 << n}")
    return setup.copies


def run_modified_yao_quantum(
    f: FunctionSpec,
    strategy: GarblerStrategy,
    y: int,
    spec: CipherSpec,
    rng: np.random.Generator,
    exact: bool = False,
) -> QuantumRun:
    """Quantum-embedded modified protocol with an honest evaluator holding ``y``.

    With ``exact`` every copy is processed through both measurement branches
    and the run reports exact probabilities instead of sampling.
    """
    tr = Transcript()
    p = spec.n_m - 1
    setup = strategy.setup(f, spec, p, rng)
    copies = _copy_count(setup, f.n)
    ekeys = _evaluator_keys(setup, y, f.n_y, rng, tr)
    if ekeys is None:
        empty = SparseState.basis(RegisterLayout.of(("none", 1)))
        return QuantumRun(tr, False, None, None, empty, [], 0.0, evaluator_output=ABORT)
    core = EvaluatorCore(spec, f.n_x, ekeys, setup.auxes, p)
    return _run_blocks(strategy, core, copies, rng, tr, exact, return_to_garbler=True)


def run_freexor_ot_quantum(
    strategy: GarblerStrategy,
    x0: int,
    x1: int,
    spec: CipherSpec,
    rng: np.random.Generator,
    exact: bool = False,
) -> QuantumRun:
    """Bit OT built from a garbled AND gate and free-XOR, evaluator holding ``(x0, x1)``.

    The evaluator obtains keys for ``x0`` and ``x1`` from two string OTs,
    XORs them into the key for ``X = x0 ^ x1``, decrypts the AND table and
    finally applies a CNOT from its ``x0`` bit onto the output register.
    """
    tr = Transcript()
    p = spec.n_m - 1
    and_fn = FunctionSpec.builtin("and", 1, 1)
    setup = strategy.setup(and_fn, spec, p, rng)
    if len(setup.ot_pairs) != 2:
        raise ValueError("the OT instance needs sender pairs for x0 and x1")
    copies = _copy_count(setup, 2)
    keys = []
    for j, b in enumerate((x0, x1)):
        res = ideal_ot(setup.ot_pairs[j], b, rng)
        tr.add("ot", "evaluator", [f"kx{j}"], outcome="abort" if res.receiver is ABORT else "key")
        if res.receiver is ABORT:
            empty = SparseState.basis(RegisterLayout.of(("none", 1)))
            return QuantumRun(tr, False, None, None, empty, [], 0.0, evaluator_output=ABORT)
        keys.append(res.receiver)
    k_X = keys[0] ^ keys[1]
    tr.add("free-xor", "evaluator", ["kX"], outcome="key")
    core = EvaluatorCore(spec, 1, [k_X], setup.auxes, p)

    def xor_x0(state: SparseState) -> SparseState:
        state = qsim.extend(state, "x0", 1, x0)
        state = qsim.apply_cnot(state, "x0", OUT)
        tr.add("free-xor-output", "evaluator", ["x0", OUT])
        return qsim.discard_register(state, "x0")

    return _run_blocks(strategy, core, copies, rng, tr, exact, True, post_success=xor_x0)


# ---------------------------------------------------------------------------
# Honest garbler strategy


class HonestGarbler:
    """Honest garbler with input ``x``: basis-state keys and permuted table."""

    def __init__(self, x: int):
        self.x = x
        self.instance: GarbleInstance | None = None
        self.output = None

    def setup(self, f, spec, p, rng) -> GarblerSetup:
        self.rng = rng
        self.instance = garble(f, spec, int(rng.integers(2)), rng, p)
        self.layout = RegisterLayout(
            tuple((garbler_key_reg(i), spec.n_k) for i in range(f.n_x)) + ((TABLE, spec.n_m),)
        )
        self.output = ABORT
        return GarblerSetup(list(self.instance.evaluator_keys), self.instance.auxes,
                            len(self.instance.entries))

    def send_copy(self, index: int) -> SparseState:
        inst = self.instance
        values = {garbler_key_reg(i): k for i, k in enumerate(inst.keys_for_x(self.x))}
        values[TABLE] = inst.entries[index]
        return SparseState.basis(self.layout, values)

    def receive(self, index: int, state: SparseState) -> None:
        out, _, _ = qsim.measure_register(state, OUT, self.rng)
        self.output = out ^ self.instance.kz


def run_honest_quantum(f, x, y, spec, rng) -> tuple[object, QuantumRun]:
    """Honest garbler through the quantum runner; returns the garbler output and the run."""
    g = HonestGarbler(x)
    run = run_modified_yao_quantum(f, g, y, spec, rng)
    run.transcript.outputs = {"garbler": g.output}
    return g.output, run


# ---------------------------------------------------------------------------
# Superposition-resistant variant


@dataclass
class ResistantRun:
    """Result of the resistant protocol.

    ``view_distances`` maps an evaluator-side behavior to the largest trace
    distance, over copies, between the garbler's kept registers under that
    behavior and under an idle evaluator. ``conditioned_distances`` gives the
    same comparison when the garbler would learn the padding outcome, which
    the resistant protocol never reveals.
    """

    transcript: Transcript
    evaluator_output: object
    copy_probabilities: list[float]
    view_distances: dict[str, float]
    conditioned_distances: dict[str, float]
    garbler_events_after_send: int


def _kept(block: SparseState) -> list[str]:
    return [r for r in block.layout.names if r != TABLE and not r.startswith("kG")]


def run_superposition_resistant_yao(
    f: FunctionSpec,
    strategy: GarblerStrategy,
    y: int,
    spec: CipherSpec,
    rng: np.random.Generator,
    compute_views: bool = True,
) -> ResistantRun:
    """Resistant protocol: nothing flows back to the garbler after the copies are sent.

    The evaluator decrypts copies in order and stops at the first padding
    match, keeping the masked output; otherwise it outputs ``ABORT``. With
    ``compute_views`` the garbler's reduced state on its kept registers is
    compared across evaluator behaviors (idle, decrypt without measuring,
    decrypt and measure, abort branch, success branch).
    """
    tr = Transcript()
    p = spec.n_m - 1
    setup = strategy.setup(f, spec, p, rng)
    copies = _copy_count(setup, f.n)
    ekeys = _evaluator_keys(setup, y, f.n_y, rng, tr)
    if ekeys is None:
        return ResistantRun(tr, ABORT, [], {}, {}, 0)
    core = EvaluatorCore(spec, f.n_x, ekeys, setup.auxes, p)
    blocks = [strategy.send_copy(i) for i in range(copies)]
    for b in blocks:
        tr.add("send-copy", "garbler", b.layout.names, outcome={"terms": len(b)})
    sent_marker = len(tr.events)

    views = {"decrypt-only": 0.0, "decrypt-and-measure": 0.0, "run": 0.0}
    conditioned = {"match": 0.0, "no-match": 0.0}
    probs: list[float] = []
    output = ABORT
    done = False
    reach = 1.0
    for i, block in enumerate(blocks):
        decrypted = core.decrypt(block)
        branches = core.branches(decrypted)
        p_match = sum(b.probability for b in branches if b.matched)
        probs.append(p_match)
        kept = _kept(block)
        if compute_views and kept:
            idle = qsim.reduced_density_matrix(block, kept)
            after = qsim.reduced_density_matrix(decrypted, kept)
            measured = qsim.DensityMatrix.mixture(
                [(b.probability, qsim.reduced_density_matrix(b.state, kept)) for b in branches])
            run_view = qsim.DensityMatrix(
                idle.registers, reach * measured.matrix + (1 - reach) * idle.matrix)
            views["decrypt-only"] = max(views["decrypt-only"], qsim.trace_distance(idle, after))
            views["decrypt-and-measure"] = max(views["decrypt-and-measure"],
                                               qsim.trace_distance(idle, measured))
            views["run"] = max(views["run"], qsim.trace_distance(idle, run_view))
            for b in branches:
                key = "match" if b.matched else "no-match"
                d = qsim.trace_distance(idle, qsim.reduced_density_matrix(b.state, kept))
                conditioned[key] = max(conditioned[key], d)
        reach *= 1.0 - p_match
        if done:
            continue
        matched = bool(rng.random() < p_match)
        tr.add("padding-check", "evaluator", [PAD], outcome="match" if matched else "no-match",
               probability=p_match if matched else 1.0 - p_match)
        chosen = next(b for b in branches if b.matched == matched)
        if matched:
            st = core.after_success(chosen.state)
            output, _, _ = qsim.measure_register(st, OUT, rng)
            tr.add("output", "evaluator", [OUT], outcome=output)
            done = True
            if not compute_views:
                break
        else:
            core.after_failure(chosen.state)
    if output is ABORT:
        tr.add("abort", "evaluator", outcome=ABORT)
    garbler_after = sum(1 for e in tr.events[sent_marker:] if e.party == "garbler")
    tr.outputs = {"evaluator": output}
    return ResistantRun(tr, output, probs, views, conditioned, garbler_after)


# ---------------------------------------------------------------------------
# One-time pad over a key-distribution functionality


class Eavesdropper(Protocol):
    """Eavesdropper acting on the ciphertext register ``y``.

    ``registers()`` lists its private registers with their initial values.
    ``act(state)`` applies a unitary built from engine operations on ``y``,
    its private registers and the outgoing register ``yhat``.
    """

    def registers(self, n: int) -> list[tuple[str, int, int]]: ...

    def act(self, state: SparseState) -> SparseState: ...


class PassiveEavesdropper:
    """Forwards the ciphertext unchanged by copying it into ``yhat``."""

    def registers(self, n):
        return []

    def act(self, state):
        return qsim.apply_register_xor(state, "y", "yhat")


class FlipEavesdropper:
    """Forwards the ciphertext with one bit flipped."""

    def __init__(self, bit: int = 0):
        self.bit = bit

    def registers(self, n):
        return []

    def act(self, state):
        state = qsim.apply_register_xor(state, "y", "yhat")
        width = state.layout.width_of("yhat")
        return qsim.apply_x(state, "yhat", 1 << (width - 1 - self.bit))


class CircuitEavesdropper:
    """Random circuit of engine operations over ``y``, a private register ``e`` and ``yhat``.

    The gate list is drawn once from ``seed`` so the same strategy can be
    replayed in the real and ideal worlds.
    """

    GATES = ("h", "x", "cnot", "phase", "hl", "perm", "xor")

    def __init__(self, seed: int, depth: int = 12, private_width: int = 2):
        self.seed = seed
        self.depth = depth
        self.private_width = private_width
        self._ops = None

    def registers(self, n):
        return [("e", self.private_width, 0)] if self.private_width else []

    def _draw(self, layout: RegisterLayout):
        rng = np.random.default_rng(self.seed)
        regs = layout.names
        ops = []
        for _ in range(self.depth):
            kind = self.GATES[int(rng.integers(len(self.GATES)))]
            r = regs[int(rng.integers(len(regs)))]
            w = layout.width_of(r)
            if kind == "h":
                ops.append(("h", r, int(rng.integers(w))))
            elif kind == "x":
                ops.append(("x", r, int(rng.integers(1, 1 << w))))
            elif kind == "cnot":
                r2 = regs[int(rng.integers(len(regs)))]
                b1, b2 = int(rng.integers(w)), int(rng.integers(layout.width_of(r2)))
                if r2 == r and b1 == b2:
                    continue
                ops.append(("cnot", r, r2, b1, b2))
            elif kind == "phase":
                mask = int(rng.integers(1, 1 << w))
                ops.append(("phase", r, mask, complex(np.exp(2j * np.pi * rng.random()))))
            elif kind == "hl":
                ops.append(("hl", r))
            elif kind == "perm":
                perm = [int(v) for v in rng.permutation(1 << w)]
                ops.append(("perm", r, perm))
            else:
                ops.append(("xor", "y", "yhat"))
        return ops

    def act(self, state):
        if self._ops is None:
            self._ops = self._draw(state.layout)
        for op in self._ops:
            kind = op[0]
            if kind == "h":
                state = qsim.apply_hadamard(state, op[1], op[2])
            elif kind == "x":
                state = qsim.apply_x(state, op[1], op[2])
            elif kind == "cnot":
                state = qsim.apply_cnot(state, op[1], op[2], op[3], op[4])
            elif kind == "phase":
                mask = op[2]
                state = qsim.apply_phase(state, lambda v, m=mask: bin(v & m).count("1") % 2 == 1,
                                         op[3], [op[1]])
            elif kind == "hl":
                state = qsim.apply_logical_hadamard(state, op[1])
            elif kind == "perm":
                table = op[2]
                inv = [0] * len(table)
                for a, b in enumerate(table):
                    inv[b] = a
                width = state.layout.width_of(op[1])
                perm = qsim.BasisPermutation(width, table.__getitem__, inv.__getitem__, "random")
                state = qsim.apply_basis_permutation(state, [op[1]], perm)
            else:
                state = qsim.apply_register_xor(state, op[1], op[2])
        return state


@dataclass
class OTPRun:
    mode: str
    received: int | None
    view: qsim.DensityMatrix | None
    transcript: Transcript


def _eve_layout(n: int, eve: Eavesdropper) -> tuple[RegisterLayout, dict]:
    regs = [("y", n)] + [(name, w) for name, w, _ in eve.registers(n)] + [("yhat", n)]
    values = {name: v for name, _, v in eve.registers(n)}
    return RegisterLayout(tuple(regs)), values


def _view_regs(layout: RegisterLayout) -> list[str]:
    return [r for r in layout.names if r not in ("yhat", "m", "k", "k_r")]


def _otp_real_state(m: int, k: int, n: int, eve: Eavesdropper) -> SparseState:
    """Sender XORs the key into the message by CNOTs, eavesdropper acts, receiver XORs the key."""
    sender = SparseState.basis(RegisterLayout.of(("m", n), ("k", n)), {"m": m, "k": k})
    sender = qsim.apply_register_xor(sender, "k", "m")  # key is the control
    ciphertext, sender_rest = qsim.factor_out(sender, ["m"])
    cipher_reg = qsim.reorder(qsim.merge_registers(ciphertext, ["m"], "y"), ["y"])
    eve_layout, values = _eve_layout(n, eve)
    private = [(r, eve_layout.width_of(r)) for r in eve_layout.names if r not in ("y", "yhat")]
    state = cipher_reg
    for name, w in private:
        state = qsim.extend(state, name, w, values.get(name, 0))
    state = qsim.extend(state, "yhat", n, 0)
    state = eve.act(state)
    state = qsim.extend(state, "k_r", n, k)
    state = qsim.apply_register_xor(state, "k_r", "yhat")
    return state


def _otp_ideal_state(y_tilde: int, n: int, eve: Eavesdropper) -> SparseState:
    eve_layout, values = _eve_layout(n, eve)
    values = dict(values, y=y_tilde)
    return eve.act(SparseState.basis(eve_layout, values))


def _average_view(states) -> qsim.DensityMatrix:
    states = list(states)
    w = 1.0 / len(states)
    return qsim.mixed_reduced_density_matrix(
        [(w, st) for st in states], _view_regs(states[0].layout))


def run_otp(
    m: int,
    eve: Eavesdropper,
    n: int,
    rng: np.random.Generator,
    mode: str = "real",
    exact_view: bool = True,
) -> OTPRun:
    """One-time-pad channel against an eavesdropper, in the real or ideal world.

    Real mode draws a key from the key-distribution functionality, the
    receiver decrypts the eavesdropper's outgoing register and measures it.
    Ideal mode has the simulator send a uniformly random ``y~`` and the
    confidential-channel functionality measures the outgoing register.
    With ``exact_view`` the eavesdropper's reduced state is averaged over all
    keys (real) or all ``y~`` (ideal) rather than the sampled one.
    """
    if not 0 <= m < 1 << n:
        raise ValueError(f"message {m} does not fit {n} bits")
    tr = Transcript()
    if mode == "real":
        k = key_distribution(n, rng)
        tr.add("key-distribution", "both", ["k"], outcome="key")
        state = _otp_real_state(m, k, n, eve)
        tr.add("send", "sender", ["y"])
        received, _, _ = qsim.measure_register(state, "yhat", rng)
        tr.add("receive", "receiver", ["yhat"], outcome=received)
        view = None
        if exact_view:
            view = _average_view(_otp_real_state(m, kk, n, eve) for kk in range(1 << n))
    elif mode == "ideal":
        y_t = int(rng.integers(1 << n))
        tr.add("simulate", "simulator", ["y"])
        state = _otp_ideal_state(y_t, n, eve)
        received = confidential_channel(state, "yhat", rng)
        tr.add("channel", "functionality", ["yhat"], outcome=received)
        view = None
        if exact_view:
            view = _average_view(_otp_ideal_state(yy, n, eve) for yy in range(1 << n))
    else:
        raise ValueError(f"mode must be 'real' or 'ideal', not {mode!r}")
    tr.outputs = {"receiver": received}
    return OTPRun(mode, received, view, tr)


def otp_view_distance(m: int, eve: Eavesdropper, n: int, seed: int = 0) -> float:
    """Trace distance between the eavesdropper's exact real and ideal views."""
    real = run_otp(m, eve, n, np.random.default_rng(seed), "real")
    ideal = run_otp(m, eve, n, np.random.default_rng(seed), "ideal")
    return qsim.trace_distance(real.view, ideal.view)
