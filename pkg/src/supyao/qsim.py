"""Sparse computational-basis state vectors.

A state is a map from packed basis labels to complex amplitudes over a named
register layout. Only the operation classes needed to embed classical
protocols quantumly are supported: basis permutations (minimal oracles),
conditional phases, block Hadamards, projective pattern measurements,
verified register discard and reduced density matrices.

Labels are Python ints. The first register of a layout occupies the most
significant bits, so ``format(label, f"0{W}b")`` reads registers in layout
order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

PRUNE = 1e-12
NORM_TOL = 1e-9
DENSE_MAX_WIDTH = 12
DEFAULT_MAX_TERMS = 1 << 16

_SQRT_HALF = 1.0 / math.sqrt(2.0)


class StateError(ValueError):
    """Invalid operation on a sparse state."""


class EntanglementError(StateError):
    """A register expected to factor out of the state does not."""


class ZeroBranchError(StateError):
    """A measurement branch with zero probability was requested."""


class BudgetExceeded(RuntimeError):
    """The term count of a state grew past its budget."""


@dataclass(frozen=True)
class RegisterLayout:
    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [name for name, _ in self.registers]
        if len(set(names)) != len(names):
            raise StateError(f"duplicate register names in {names}")
        for name, width in self.registers:
            if width < 1:
                raise StateError(f"register {name!r} has width {width}")
        shifts = {}
        acc = 0
        for name, width in reversed(self.registers):
            shifts[name] = acc
            acc += width
        object.__setattr__(self, "_shifts", shifts)
        object.__setattr__(self, "_widths", dict(self.registers))
        object.__setattr__(self, "width", acc)

    @classmethod
    def of(cls, *registers: tuple[str, int]) -> "RegisterLayout":
        return cls(tuple((str(n), int(w)) for n, w in registers))

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.registers]

    def __contains__(self, name: str) -> bool:
        return name in self._widths

    def width_of(self, name: str) -> int:
        try:
            return self._widths[name]
        except KeyError:
            raise StateError(f"unknown register {name!r}") from None

    def shift_of(self, name: str) -> int:
        self.width_of(name)
        return self._shifts[name]

    def get(self, label: int, name: str) -> int:
        return (label >> self._shifts[name]) & ((1 << self._widths[name]) - 1)

    def values(self, label: int) -> dict[str, int]:
        return {name: self.get(label, name) for name in self.names}

    def pack(self, values: Mapping[str, int]) -> int:
        label = 0
        for name, width in self.registers:
            value = int(values.get(name, 0))
            if value < 0 or value >> width:
                raise StateError(f"value {value} does not fit register {name!r}")
            label |= value << self._shifts[name]
        return label

    def fields(self, regs: Sequence[str]) -> "_Fields":
        return _Fields(self, tuple(regs))

    def without(self, regs: Iterable[str]) -> "RegisterLayout":
        drop = set(regs)
        return RegisterLayout(tuple(r for r in self.registers if r[0] not in drop))

    def only(self, regs: Sequence[str]) -> "RegisterLayout":
        return RegisterLayout(tuple((r, self.width_of(r)) for r in regs))

    def bitstring(self, label: int, sep: str = "|") -> str:
        return sep.join(
            format(self.get(label, name), f"0{width}b") for name, width in self.registers
        )


class _Fields:
    """Read/write access to the concatenated sub-label of several registers."""

    def __init__(self, layout: RegisterLayout, regs: tuple[str, ...]):
        if len(set(regs)) != len(regs):
            raise StateError(f"register listed twice in {regs}")
        self.parts = []
        offset = 0
        for name in reversed(regs):
            width = layout.width_of(name)
            self.parts.append((layout.shift_of(name), width, offset))
            offset += width
        self.width = offset
        clear = 0
        for shift, width, _ in self.parts:
            clear |= ((1 << width) - 1) << shift
        self.clear = ~clear

    def get(self, label: int) -> int:
        sub = 0
        for shift, width, offset in self.parts:
            sub |= ((label >> shift) & ((1 << width) - 1)) << offset
        return sub

    def put(self, label: int, sub: int) -> int:
        label &= self.clear
        for shift, width, offset in self.parts:
            label |= ((sub >> offset) & ((1 << width) - 1)) << shift
        return label

    def rest(self, label: int) -> int:
        return label & self.clear


@dataclass(frozen=True)
class BasisPermutation:
    """A bijection on ``width``-bit labels with its inverse."""

    width: int
    forward: Callable[[int], int]
    backward: Callable[[int], int]
    name: str = "perm"

    def __call__(self, x: int) -> int:
        return self.forward(x)

    def inverse(self) -> "BasisPermutation":
        return BasisPermutation(self.width, self.backward, self.forward, f"{self.name}^-1")


def xor_permutation(width: int, mask: int, name: str = "X") -> BasisPermutation:
    flip = lambda v: v ^ mask
    return BasisPermutation(width, flip, flip, name)


class SparseState:
    """Immutable sparse pure state; every operation returns a new state."""

    __slots__ = ("layout", "terms", "max_terms")

    def __init__(
        self,
        layout: RegisterLayout,
        terms: Mapping[int, complex],
        max_terms: int = DEFAULT_MAX_TERMS,
    ):
        kept = {int(k): complex(a) for k, a in terms.items() if abs(a) >= PRUNE}
        if len(kept) > max_terms:
            raise BudgetExceeded(f"{len(kept)} terms exceeds budget of {max_terms}")
        limit = 1 << layout.width
        for k in kept:
            if k < 0 or k >= limit:
                raise StateError(f"label {k} outside {layout.width}-bit layout")
        self.layout = layout
        self.terms = kept
        self.max_terms = max_terms

    @classmethod
    def basis(
        cls, layout: RegisterLayout, values: Mapping[str, int] | None = None, **kw
    ) -> "SparseState":
        return cls(layout, {layout.pack(values or {}): 1.0}, **kw)

    @classmethod
    def from_registers(
        cls,
        layout: RegisterLayout,
        amplitudes: Iterable[tuple[Mapping[str, int], complex]],
        normalize: bool = False,
        **kw,
    ) -> "SparseState":
        terms: dict[int, complex] = {}
        for values, amp in amplitudes:
            label = layout.pack(values)
            terms[label] = terms.get(label, 0) + amp
        state = cls(layout, terms, **kw)
        return state.normalized() if normalize else state

    def _like(self, terms: Mapping[int, complex], layout: RegisterLayout | None = None):
        return SparseState(layout or self.layout, terms, self.max_terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"SparseState({self.layout.names}, {len(self.terms)} terms)"

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.terms.values()))

    def normalized(self) -> "SparseState":
        n = self.norm()
        if n < PRUNE:
            raise ZeroBranchError("cannot normalize a zero vector")
        return self._like({k: a / n for k, a in self.terms.items()})

    def is_normalized(self) -> bool:
        return abs(self.norm() ** 2 - 1.0) <= NORM_TOL

    def amplitude(self, values: Mapping[str, int]) -> complex:
        return self.terms.get(self.layout.pack(values), 0j)

    def register_values(self, reg: str) -> set[int]:
        return {self.layout.get(k, reg) for k in self.terms}

    def is_basis_state(self) -> bool:
        return len(self.terms) == 1

    def dump(self) -> str:
        """One line per term: ``<bitstring> <re> <im>``, registers split by ``|``."""
        lines = []
        for label in sorted(self.terms):
            amp = self.terms[label]
            lines.append(f"{self.layout.bitstring(label)} {amp.real:.12g} {amp.imag:.12g}")
        return "\n".join(lines)


def inner(a: SparseState, b: SparseState) -> complex:
    """<a|b>; layouts must agree."""
    if a.layout != b.layout:
        raise StateError("inner product of states with different layouts")
    small, big = (a, b) if len(a) <= len(b) else (b, a)
    total = sum(small.terms[k].conjugate() * big.terms[k] if small is a
                else big.terms[k].conjugate() * small.terms[k]
                for k in small.terms if k in big.terms)
    return complex(total)


def fidelity(a: SparseState, b: SparseState) -> float:
    """|<a|b>|^2 between normalized pure states."""
    return abs(inner(a.normalized(), b.normalized())) ** 2


def tensor(a: SparseState, b: SparseState) -> SparseState:
    layout = RegisterLayout(a.layout.registers + b.layout.registers)
    if len(a) * len(b) > min(a.max_terms, b.max_terms):
        raise BudgetExceeded(f"tensor product would hold {len(a) * len(b)} terms")
    shift = b.layout.width
    terms = {
        (ka << shift) | kb: va * vb for ka, va in a.terms.items() for kb, vb in b.terms.items()
    }
    return SparseState(layout, terms, min(a.max_terms, b.max_terms))


def extend(state: SparseState, name: str, width: int, value: int = 0) -> SparseState:
    """Append a fresh register prepared in the basis state ``|value>``."""
    fresh = SparseState.basis(RegisterLayout.of((name, width)), {name: value})
    return tensor(state, fresh)


def apply_basis_permutation(
    state: SparseState, regs: Sequence[str], perm: BasisPermutation
) -> SparseState:
    fields = state.layout.fields(regs)
    if perm.width != fields.width:
        raise StateError(
            f"permutation acts on {perm.width} bits but registers {list(regs)} "
            f"span {fields.width}"
        )
    get, put, forward = fields.get, fields.put, perm.forward
    out = {put(label, forward(get(label))): amp for label, amp in state.terms.items()}
    if len(out) != len(state.terms):
        raise StateError(f"{perm.name} is not injective on the state's support")
    return state._like(out)


def apply_phase(
    state: SparseState,
    predicate: Callable[..., bool],
    phase: complex,
    regs: Sequence[str] | None = None,
) -> SparseState:
    """Multiply by ``phase`` every term whose label satisfies ``predicate``.

    With ``regs`` given the predicate receives the values of those registers
    as positional ints; otherwise it receives the full label.
    """
    if abs(abs(phase) - 1.0) > NORM_TOL:
        raise StateError(f"phase {phase} is not a unit complex number")
    if regs is None:
        test = predicate
    else:
        layout = state.layout
        for r in regs:
            layout.width_of(r)
        test = lambda label: predicate(*(layout.get(label, r) for r in regs))
    return state._like({k: (a * phase if test(k) else a) for k, a in state.terms.items()})


def _block_hadamard(state: SparseState, shift: int, width: int) -> SparseState:
    mask = ((1 << width) - 1) << shift
    out: dict[int, complex] = {}
    for label, amp in state.terms.items():
        sub = label & mask
        if sub == 0:
            zero, one, sign = label, label | mask, 1.0
        elif sub == mask:
            zero, one, sign = label & ~mask, label, -1.0
        else:
            out[label] = out.get(label, 0) + amp
            continue
        out[zero] = out.get(zero, 0) + amp * _SQRT_HALF
        out[one] = out.get(one, 0) + sign * amp * _SQRT_HALF
    return state._like(out)


def apply_logical_hadamard(state: SparseState, reg: str) -> SparseState:
    """Hadamard on span{|0^L>, |1^L>} of ``reg``; identity elsewhere."""
    return _block_hadamard(state, state.layout.shift_of(reg), state.layout.width_of(reg))


def apply_hadamard(state: SparseState, reg: str, bit: int = 0) -> SparseState:
    """Single-qubit Hadamard on ``bit`` of ``reg`` (bit 0 is the most significant)."""
    width = state.layout.width_of(reg)
    if not 0 <= bit < width:
        raise StateError(f"bit {bit} outside register {reg!r}")
    return _block_hadamard(state, state.layout.shift_of(reg) + width - 1 - bit, 1)


def apply_x(state: SparseState, reg: str, mask: int | None = None) -> SparseState:
    """Bit flips on ``reg``; ``mask`` selects bits (default: all)."""
    width = state.layout.width_of(reg)
    mask = (1 << width) - 1 if mask is None else mask
    return apply_basis_permutation(state, [reg], xor_permutation(width, mask))


def apply_cnot(
    state: SparseState, control: str, target: str, control_bit: int = 0, target_bit: int = 0
) -> SparseState:
    layout = state.layout
    cw, tw = layout.width_of(control), layout.width_of(target)
    cmask = 1 << (layout.shift_of(control) + cw - 1 - control_bit)
    tmask = 1 << (layout.shift_of(target) + tw - 1 - target_bit)
    if cmask == tmask:
        raise StateError("CNOT control and target coincide")
    return state._like({(k ^ tmask if k & cmask else k): a for k, a in state.terms.items()})


def apply_register_xor(state: SparseState, control: str, target: str) -> SparseState:
    """Bitwise CNOT ladder: ``target ^= control`` for equal-width registers."""
    layout = state.layout
    if layout.width_of(control) != layout.width_of(target):
        raise StateError("register XOR needs equal widths")
    out = {}
    ts = layout.shift_of(target)
    for k, a in state.terms.items():
        out[k ^ (layout.get(k, control) << ts)] = a
    return state._like(out)


def pattern_probability(state: SparseState, reg: str, pattern: int) -> float:
    layout = state.layout
    if pattern < 0 or pattern >> layout.width_of(reg):
        raise StateError(f"pattern {pattern} wider than register {reg!r}")
    return sum(abs(a) ** 2 for k, a in state.terms.items() if layout.get(k, reg) == pattern)


def project_pattern(
    state: SparseState, reg: str, pattern: int, match: bool = True
) -> tuple[float, SparseState]:
    """Deterministic branch of the {|pattern><pattern|, 1 - ...} measurement.

    Returns the branch probability and the renormalized post-measurement state.
    """
    layout = state.layout
    if pattern < 0 or pattern >> layout.width_of(reg):
        raise StateError(f"pattern {pattern} wider than register {reg!r}")
    kept = {k: a for k, a in state.terms.items() if (layout.get(k, reg) == pattern) == match}
    prob = sum(abs(a) ** 2 for a in kept.values())
    if prob < PRUNE**2 or not kept:
        raise ZeroBranchError(f"{'match' if match else 'no-match'} branch has zero norm")
    scale = 1.0 / math.sqrt(prob)
    return prob, state._like({k: a * scale for k, a in kept.items()})


def pattern_branches(
    state: SparseState, reg: str, pattern: int
) -> list[tuple[bool, float, SparseState]]:
    """Both outcomes of a pattern measurement, dropping zero-probability ones."""
    out = []
    for match in (True, False):
        try:
            prob, post = project_pattern(state, reg, pattern, match)
        except ZeroBranchError:
            continue
        out.append((match, prob, post))
    return out


def measure_pattern(
    state: SparseState, reg: str, pattern: int, rng: np.random.Generator
) -> tuple[bool, float, SparseState]:
    """Sampled pattern measurement: (matched, probability of that outcome, state)."""
    p_match = pattern_probability(state, reg, pattern) / state.norm() ** 2
    matched = bool(rng.random() < p_match)
    prob, post = project_pattern(state, reg, pattern, matched)
    return matched, prob / state.norm() ** 2, post


def measure_register(
    state: SparseState, reg: str, rng: np.random.Generator
) -> tuple[int, float, SparseState]:
    """Computational-basis measurement of a whole register."""
    layout = state.layout
    weights: dict[int, float] = {}
    for k, a in state.terms.items():
        v = layout.get(k, reg)
        weights[v] = weights.get(v, 0.0) + abs(a) ** 2
    outcomes = sorted(weights)
    probs = np.array([weights[v] for v in outcomes])
    probs = probs / probs.sum()
    value = outcomes[int(rng.choice(len(outcomes), p=probs))]
    prob, post = project_pattern(state, reg, value, True)
    return value, float(probs[outcomes.index(value)]), post


def factor_out(
    state: SparseState, regs: Sequence[str], tol: float = NORM_TOL
) -> tuple[SparseState, SparseState]:
    """Split ``state`` as ``rest (x) local`` over ``regs``, verifying the product form.

    Returns ``(local, rest)``: ``local`` is normalized and lives on ``regs``,
    ``rest`` carries the remaining registers and the original norm.
    Raises EntanglementError when the amplitude matrix is not rank one.
    """
    layout = state.layout
    fields = layout.fields(regs)
    rest_layout = layout.without(regs)
    local_layout = layout.only(regs)
    rest_names = rest_layout.names

    rows: dict[int, dict[int, complex]] = {}
    for label, amp in state.terms.items():
        rows.setdefault(fields.rest(label), {})[fields.get(label)] = amp
    if not rows:
        raise StateError("cannot factor an empty state")

    ref_key = max(rows, key=lambda r: sum(abs(a) ** 2 for a in rows[r].values()))
    ref = rows[ref_key]
    ref_norm = math.sqrt(sum(abs(a) ** 2 for a in ref.values()))
    u = {v: a / ref_norm for v, a in ref.items()}

    rest_terms: dict[int, complex] = {}
    for rkey, row in rows.items():
        coeff = sum(u[v].conjugate() * a for v, a in row.items() if v in u)
        residual = sum(abs(a) ** 2 for a in row.values()) - abs(coeff) ** 2
        if residual > tol:
            raise EntanglementError(
                f"registers {list(regs)} are entangled with the rest "
                f"(residual {residual:.3e})"
            )
        rest_label = rest_layout.pack({n: layout.get(rkey, n) for n in rest_names})
        rest_terms[rest_label] = coeff

    # the concatenated sub-label already matches a layout made of ``regs`` in order
    local = SparseState(local_layout, u, state.max_terms)
    rest = SparseState(rest_layout, rest_terms, state.max_terms)
    return local, rest


def discard_register(
    state: SparseState, regs: str | Sequence[str], require_basis: bool = True
) -> SparseState:
    """Drop registers after checking they are unentangled from the rest.

    With ``require_basis`` (the default) the registers must also hold a single
    computational basis state, i.e. carry the same sub-label in every term.
    """
    regs = [regs] if isinstance(regs, str) else list(regs)
    if require_basis:
        fields = state.layout.fields(regs)
        seen = {fields.get(k) for k in state.terms}
        if len(seen) > 1:
            raise EntanglementError(
                f"registers {regs} are not in a single basis state ({len(seen)} values)"
            )
    local, rest = factor_out(state, regs)
    if require_basis and not local.is_basis_state():
        raise EntanglementError(f"registers {regs} are not in a basis state")
    # fold the local factor's phase back into the remaining amplitudes
    if local.is_basis_state():
        (phase,) = local.terms.values()
        rest = rest._like({k: a * phase for k, a in rest.terms.items()})
    return rest


def partition_register(
    state: SparseState, reg: str, parts: Sequence[tuple[str, int]]
) -> SparseState:
    """Relabel one register as consecutive sub-registers (most significant first)."""
    width = state.layout.width_of(reg)
    if sum(w for _, w in parts) != width:
        raise StateError(f"parts {parts} do not cover the {width} bits of {reg!r}")
    new_regs = []
    for name, w in state.layout.registers:
        new_regs.extend(parts if name == reg else [(name, w)])
    return state._like(state.terms, RegisterLayout(tuple(new_regs)))


def merge_registers(state: SparseState, regs: Sequence[str], name: str) -> SparseState:
    """Concatenate ``regs`` (in the given order) into a single register ``name``.

    The merged register is placed where the first of ``regs`` was.
    """
    layout = state.layout
    if len(regs) == 0:
        raise StateError("nothing to merge")
    fields = layout.fields(regs)
    new_regs = []
    for r, w in layout.registers:
        if r == regs[0]:
            new_regs.append((name, fields.width))
        elif r not in regs:
            new_regs.append((r, w))
    new_layout = RegisterLayout(tuple(new_regs))
    others = [r for r, _ in new_layout.registers if r != name]
    out = {}
    for k, a in state.terms.items():
        values = {r: layout.get(k, r) for r in others}
        values[name] = fields.get(k)
        out[new_layout.pack(values)] = a
    return state._like(out, new_layout)


def reorder(state: SparseState, names: Sequence[str]) -> SparseState:
    """Same state with registers listed in a different order."""
    layout = state.layout
    if sorted(names) != sorted(layout.names):
        raise StateError(f"{list(names)} is not a permutation of {layout.names}")
    new_layout = layout.only(names)
    return state._like(
        {new_layout.pack(layout.values(k)): a for k, a in state.terms.items()}, new_layout
    )


@dataclass
class DensityMatrix:
    """Dense density operator on a subset of registers."""

    registers: tuple[tuple[str, int], ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = 1 << sum(w for _, w in self.registers)
        if self.matrix.shape != (d, d):
            raise StateError(f"matrix shape {self.matrix.shape} does not match dimension {d}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def check(self, tol: float = NORM_TOL) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
            raise StateError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > tol:
            raise StateError(f"density matrix has trace {np.trace(m)}")
        if np.linalg.eigvalsh(m).min() < -tol:
            raise StateError("density matrix has a negative eigenvalue")

    def kron(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(self.registers + other.registers, np.kron(self.matrix, other.matrix))

    @classmethod
    def mixture(cls, parts: Iterable[tuple[float, "DensityMatrix"]]) -> "DensityMatrix":
        """Weighted sum; ``parts`` may be a generator so only one term is held at a time."""
        regs, total = None, None
        for p, dm in parts:
            if total is None:
                regs, total = dm.registers, p * dm.matrix
            else:
                total += p * dm.matrix
        if total is None:
            raise StateError("mixture of no states")
        return cls(regs, total)


def reduced_density_matrix(state: SparseState, regs: Sequence[str]) -> DensityMatrix:
    """Partial trace over every register not in ``regs`` (normalizes the state)."""
    return mixed_reduced_density_matrix([(1.0, state)], regs)


def mixed_reduced_density_matrix(
    weighted: Iterable[tuple[float, SparseState]], regs: Sequence[str]
) -> DensityMatrix:
    """``sum_i w_i Tr_rest |s_i><s_i|`` with each state normalized first.

    Every (state, traced-out label) pair is one column of a sparse matrix
    ``M`` and the result is ``M M^dagger``, so only the kept block is ever dense.
    """
    rows, cols, vals = [], [], []
    col_base = 0
    registers = None
    d = 0
    for w, state in weighted:
        fields = state.layout.fields(regs)
        if fields.width > DENSE_MAX_WIDTH:
            raise StateError(
                f"reduced width {fields.width} exceeds the dense limit {DENSE_MAX_WIDTH}"
            )
        if registers is None:
            registers = state.layout.only(regs).registers
            d = 1 << fields.width
        norm2 = state.norm() ** 2
        if norm2 < PRUNE:
            raise ZeroBranchError("reduced density matrix of a zero vector")
        scale = math.sqrt(w / norm2)
        rest_index: dict[int, int] = {}
        for k, a in state.terms.items():
            c = rest_index.setdefault(fields.rest(k), len(rest_index))
            rows.append(fields.get(k))
            cols.append(col_base + c)
            vals.append(a * scale)
        col_base += len(rest_index)
    if registers is None:
        raise StateError("mixture of no states")
    m = sparse.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(d, col_base))
    rho = (m @ m.conj().T).toarray()
    return DensityMatrix(registers, rho)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Half the trace norm of ``a - b``."""
    if a.matrix.shape != b.matrix.shape:
        raise StateError("trace distance between matrices of different dimension")
    eig = np.linalg.eigvalsh(a.matrix - b.matrix)
    return float(min(1.0, max(0.0, 0.5 * np.abs(eig).sum())))
