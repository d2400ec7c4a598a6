"""Dense state-vector reference used to cross-check the sparse engine.

Written independently of :mod:`supyao.qsim`: a state is a numpy array of
shape ``[2] * W`` whose axis ``a`` is qubit ``a`` counted from the most
significant bit of the packed label. Gates are applied as explicit matrices
with ``tensordot``.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

H2 = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
X2 = np.array([[0, 1], [1, 0]], dtype=complex)


class DenseState:
    def __init__(self, registers: Sequence[tuple[str, int]], vector: np.ndarray | None = None):
        self.registers = [(str(n), int(w)) for n, w in registers]
        self.width = sum(w for _, w in self.registers)
        self.axes = {}
        pos = 0
        for name, w in self.registers:
            self.axes[name] = list(range(pos, pos + w))
            pos += w
        if vector is None:
            vector = np.zeros(1 << self.width, dtype=complex)
            vector[0] = 1
        self.psi = np.asarray(vector, dtype=complex).reshape([2] * self.width)

    @classmethod
    def from_terms(cls, registers, terms: dict[int, complex]) -> "DenseState":
        width = sum(w for _, w in registers)
        vec = np.zeros(1 << width, dtype=complex)
        for label, amp in terms.items():
            vec[label] += amp
        return cls(registers, vec)

    def vector(self) -> np.ndarray:
        return self.psi.reshape(-1).copy()

    def copy(self) -> "DenseState":
        return DenseState(self.registers, self.vector())

    # -- helpers -------------------------------------------------------------

    def _apply_matrix(self, matrix: np.ndarray, axes: list[int]) -> None:
        k = len(axes)
        moved = np.moveaxis(self.psi, axes, list(range(k)))
        shape = moved.shape
        flat = matrix @ moved.reshape(1 << k, -1)
        self.psi = np.moveaxis(flat.reshape(shape), list(range(k)), axes)

    def _index_bits(self) -> np.ndarray:
        """Array of shape (2^W, W): bit a of each basis index (axis order)."""
        idx = np.arange(1 << self.width)
        return (idx[:, None] >> (self.width - 1 - np.arange(self.width))[None, :]) & 1

    def _values(self, regs: Sequence[str]) -> np.ndarray:
        bits = self._index_bits()
        axes = [a for r in regs for a in self.axes[r]]
        val = np.zeros(1 << self.width, dtype=np.int64)
        for a in axes:
            val = (val << 1) | bits[:, a]
        return val

    # -- operations ----------------------------------------------------------

    def permute(self, regs: Sequence[str], perm: Callable[[int], int]) -> None:
        axes = [a for r in regs for a in self.axes[r]]
        bits = self._index_bits()
        sub = self._values(regs)
        new_index = np.arange(1 << self.width)
        w = len(axes)
        for i in range(1 << self.width):
            image = perm(int(sub[i]))
            b = bits[i].copy()
            for t, a in enumerate(axes):
                b[a] = (image >> (w - 1 - t)) & 1
            new_index[i] = int("".join(map(str, b)), 2) if self.width else 0
        vec = self.vector()
        out = np.zeros_like(vec)
        out[new_index] = vec
        self.psi = out.reshape([2] * self.width)

    def phase(self, regs: Sequence[str], predicate: Callable[..., bool], phase: complex) -> None:
        cols = [self._values([r]) for r in regs]
        mask = np.array([bool(predicate(*(int(c[i]) for c in cols))) for i in range(1 << self.width)])
        vec = self.vector()
        vec[mask] *= phase
        self.psi = vec.reshape([2] * self.width)

    def hadamard(self, reg: str, bit: int) -> None:
        self._apply_matrix(H2, [self.axes[reg][bit]])

    def logical_hadamard(self, reg: str) -> None:
        L = len(self.axes[reg])
        d = 1 << L
        m = np.eye(d, dtype=complex)
        if d == 2:
            m = H2.copy()
        else:
            m[0, 0], m[0, d - 1], m[d - 1, 0], m[d - 1, d - 1] = H2[0, 0], H2[0, 1], H2[1, 0], H2[1, 1]
        self._apply_matrix(m, self.axes[reg])

    def x(self, reg: str, bit: int) -> None:
        self._apply_matrix(X2, [self.axes[reg][bit]])

    def cnot(self, control: str, cbit: int, target: str, tbit: int) -> None:
        cx = np.eye(4, dtype=complex)
        cx[2:, 2:] = X2
        self._apply_matrix(cx, [self.axes[control][cbit], self.axes[target][tbit]])

    def project(self, reg: str, pattern: int, match: bool) -> float:
        vals = self._values([reg])
        vec = self.vector()
        keep = (vals == pattern) if match else (vals != pattern)
        vec[~keep] = 0
        prob = float(np.vdot(vec, vec).real)
        if prob > 0:
            vec /= np.sqrt(prob)
        self.psi = vec.reshape([2] * self.width)
        return prob

    def reduced(self, regs: Sequence[str]) -> np.ndarray:
        axes = [a for r in regs for a in self.axes[r]]
        k = len(axes)
        moved = np.moveaxis(self.psi, axes, list(range(k))).reshape(1 << k, -1)
        rho = moved @ moved.conj().T
        return rho / np.trace(rho).real
