import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from supyao import qsim
from supyao.acceptance import equivalence_trial, random_sparse
from supyao.qsim import RegisterLayout, SparseState
from supyao.reference import DenseState

AB = RegisterLayout.of(("a", 2), ("b", 3))


def bell() -> SparseState:
    s = 1 / math.sqrt(2)
    return SparseState(RegisterLayout.of(("a", 1), ("b", 1)), {0b00: s, 0b11: s})


def test_layout_packs_first_register_high():
    assert AB.pack({"a": 0b10, "b": 0b011}) == 0b10011
    assert AB.get(0b10011, "a") == 0b10
    assert AB.bitstring(0b10011) == "10|011"


def test_layout_rejects_bad_values():
    with pytest.raises(qsim.StateError):
        AB.pack({"a": 4})
    with pytest.raises(qsim.StateError):
        RegisterLayout.of(("a", 1), ("a", 2))
    with pytest.raises(qsim.StateError):
        RegisterLayout.of(("a", 0))


def test_fields_get_put_roundtrip():
    f = AB.fields(["b", "a"])
    label = AB.pack({"a": 1, "b": 5})
    assert f.get(label) == (5 << 2) | 1
    assert f.put(0, f.get(label)) == label


def test_prunes_tiny_amplitudes_and_budget():
    s = SparseState(AB, {0: 1.0, 1: 1e-14})
    assert len(s) == 1
    with pytest.raises(qsim.BudgetExceeded):
        SparseState(AB, {i: 0.1 for i in range(5)}, max_terms=4)


def test_permutation_applies_and_checks_width():
    s = SparseState.basis(AB, {"a": 1, "b": 2})
    perm = qsim.xor_permutation(3, 0b101)
    out = qsim.apply_basis_permutation(s, ["b"], perm)
    assert out.register_values("b") == {0b111}
    with pytest.raises(qsim.StateError):
        qsim.apply_basis_permutation(s, ["a"], perm)


def test_non_injective_map_is_rejected():
    s = SparseState(AB, {0: 0.6, 1: 0.8})
    bad = qsim.BasisPermutation(3, lambda v: 0, lambda v: 0, "const")
    with pytest.raises(qsim.StateError):
        qsim.apply_basis_permutation(s, ["b"], bad)


def test_logical_hadamard_only_mixes_all_zero_and_all_one():
    s = SparseState.basis(RegisterLayout.of(("r", 3)), {"r": 0})
    h = qsim.apply_logical_hadamard(s, "r")
    assert set(h.terms) == {0, 7}
    assert h.terms[7] == pytest.approx(1 / math.sqrt(2))
    mid = SparseState.basis(RegisterLayout.of(("r", 3)), {"r": 2})
    assert qsim.apply_logical_hadamard(mid, "r").terms == mid.terms


def test_phase_requires_unit_modulus():
    s = SparseState.basis(AB)
    with pytest.raises(qsim.StateError):
        qsim.apply_phase(s, lambda v: True, 2.0)


def test_factor_out_product_and_entangled():
    plus = SparseState(RegisterLayout.of(("a", 1), ("b", 1)), {0b00: 0.5, 0b01: 0.5, 0b10: 0.5, 0b11: 0.5})
    local, rest = qsim.factor_out(plus, ["b"])
    assert local.terms == pytest.approx({0: 1 / math.sqrt(2), 1: 1 / math.sqrt(2)})
    assert rest.norm() == pytest.approx(1.0)
    with pytest.raises(qsim.EntanglementError):
        qsim.factor_out(bell(), ["b"])


def test_discard_requires_basis_state():
    s = SparseState.basis(AB, {"a": 3, "b": 1})
    assert qsim.discard_register(s, "a").layout.names == ["b"]
    with pytest.raises(qsim.EntanglementError):
        qsim.discard_register(bell(), "a")


def test_discard_keeps_global_phase():
    s = SparseState(RegisterLayout.of(("a", 1), ("b", 1)), {0b10: 1j})
    out = qsim.discard_register(s, "a")
    assert out.terms == {0: 1j}


def test_partition_merge_reorder_are_relabelings():
    s = random_sparse(np.random.default_rng(1), [("a", 2), ("b", 3)])
    parts = qsim.partition_register(s, "b", [("b0", 1), ("b1", 2)])
    assert parts.layout.names == ["a", "b0", "b1"]
    merged = qsim.merge_registers(parts, ["b0", "b1"], "b")
    assert merged.terms == s.terms
    swapped = qsim.reorder(s, ["b", "a"])
    back = qsim.reorder(swapped, ["a", "b"])
    assert back.terms == pytest.approx(s.terms)


def test_measure_register_collapses():
    rng = np.random.default_rng(0)
    v, p, post = qsim.measure_register(bell(), "a", rng)
    assert p == pytest.approx(0.5)
    assert post.register_values("b") == {v}


def test_zero_branch_raises():
    s = SparseState.basis(AB, {"a": 1})
    with pytest.raises(qsim.ZeroBranchError):
        qsim.project_pattern(s, "a", 2, True)
    assert len(qsim.pattern_branches(s, "a", 1)) == 1


def test_reduced_density_matrix_of_bell_is_mixed():
    rho = qsim.reduced_density_matrix(bell(), ["a"])
    rho.check()
    assert np.allclose(rho.matrix, np.eye(2) / 2)


def test_reduced_density_matrix_width_limit():
    wide = SparseState.basis(RegisterLayout.of(("w", qsim.DENSE_MAX_WIDTH + 1)))
    with pytest.raises(qsim.StateError):
        qsim.reduced_density_matrix(wide, ["w"])


def test_mixture_matches_weighted_sum():
    rng = np.random.default_rng(3)
    regs = [("a", 2), ("b", 2)]
    s1, s2 = random_sparse(rng, regs), random_sparse(rng, regs)
    mixed = qsim.mixed_reduced_density_matrix([(0.3, s1), (0.7, s2)], ["a"])
    direct = 0.3 * qsim.reduced_density_matrix(s1, ["a"]).matrix + \
        0.7 * qsim.reduced_density_matrix(s2, ["a"]).matrix
    assert np.allclose(mixed.matrix, direct)


def test_trace_distance_extremes():
    a = qsim.reduced_density_matrix(SparseState.basis(AB, {"a": 0}), ["a"])
    b = qsim.reduced_density_matrix(SparseState.basis(AB, {"a": 1}), ["a"])
    assert qsim.trace_distance(a, a) == pytest.approx(0.0)
    assert qsim.trace_distance(a, b) == pytest.approx(1.0)


@given(st.integers(0, 2**32 - 1))
def test_engine_matches_dense_reference(seed):
    assert equivalence_trial(np.random.default_rng(seed)) < 1e-9


@given(st.integers(0, 2**32 - 1))
def test_permutations_preserve_norm_and_invert(seed):
    rng = np.random.default_rng(seed)
    s = random_sparse(rng, [("a", 3), ("b", 2)])
    table = [int(v) for v in rng.permutation(32)]
    inv = [0] * 32
    for i, v in enumerate(table):
        inv[v] = i
    perm = qsim.BasisPermutation(5, table.__getitem__, inv.__getitem__)
    out = qsim.apply_basis_permutation(s, ["a", "b"], perm)
    assert out.norm() == pytest.approx(1.0)
    back = qsim.apply_basis_permutation(out, ["a", "b"], perm.inverse())
    assert back.terms == pytest.approx(s.terms)


@given(st.integers(0, 2**32 - 1), st.sampled_from(["a", "b"]))
def test_hadamard_is_involution(seed, reg):
    s = random_sparse(np.random.default_rng(seed), [("a", 2), ("b", 3)])
    twice = qsim.apply_logical_hadamard(qsim.apply_logical_hadamard(s, reg), reg)
    assert qsim.fidelity(twice, s) == pytest.approx(1.0)


@given(st.integers(0, 2**32 - 1))
def test_measurement_probabilities_sum_to_one(seed):
    s = random_sparse(np.random.default_rng(seed), [("a", 2), ("b", 2)])
    total = sum(p for _, p, _ in qsim.pattern_branches(s, "a", 1))
    assert total == pytest.approx(1.0)


@given(st.integers(0, 2**32 - 1))
def test_product_states_factor_exactly(seed):
    rng = np.random.default_rng(seed)
    left = random_sparse(rng, [("a", 2)])
    right = random_sparse(rng, [("b", 2)])
    local, rest = qsim.factor_out(qsim.tensor(left, right), ["b"])
    assert qsim.fidelity(local, right) == pytest.approx(1.0)
    assert qsim.fidelity(rest.normalized(), left) == pytest.approx(1.0)


def test_dense_reference_reduced_matches_engine():
    rng = np.random.default_rng(7)
    regs = [("a", 2), ("b", 3)]
    s = random_sparse(rng, regs)
    d = DenseState.from_terms(regs, s.terms)
    assert np.allclose(d.reduced(["b"]), qsim.reduced_density_matrix(s, ["b"]).matrix)
