import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from supyao import cipher, garbling
from supyao.cipher import CipherSpec
from supyao.garbling import ABORT, FunctionSpec, GarbleInstance

SPEC = CipherSpec()


@st.composite
def functions(draw, max_n=4):
    n = draw(st.integers(1, max_n))
    n_x = draw(st.integers(0, n))
    table = draw(st.lists(st.integers(0, 1), min_size=1 << n, max_size=1 << n))
    return FunctionSpec(n_x, n - n_x, tuple(table))


def test_abort_is_falsy_singleton():
    assert not ABORT
    assert repr(ABORT) == "ABORT"
    assert garbling._Abort() is ABORT


def test_bits_msb_first():
    assert garbling.bits_of(0b110, 3) == [1, 1, 0]
    assert garbling.from_bits([1, 1, 0]) == 6


def test_builtins():
    f = FunctionSpec.builtin("and", 1, 1)
    assert [f(x, y) for x in (0, 1) for y in (0, 1)] == [0, 0, 0, 1]
    assert FunctionSpec.builtin("or", 1, 1).table == (0, 1, 1, 1)
    assert FunctionSpec.builtin("xor", 2, 1).table == (0, 1, 1, 0, 1, 0, 0, 1)
    ot = FunctionSpec.builtin("ot")
    assert [ot(b, 0b10) for b in (0, 1)] == [1, 0]
    with pytest.raises(ValueError):
        FunctionSpec.builtin("nand")


def test_function_validation():
    with pytest.raises(ValueError):
        FunctionSpec(1, 1, (0, 1, 0))
    with pytest.raises(ValueError):
        FunctionSpec(0, 0, (0,))
    with pytest.raises(ValueError):
        FunctionSpec(1, 1, (0, 1, 2, 0))
    with pytest.raises(ValueError):
        FunctionSpec.builtin("and")(2, 0)


def test_truth_table_parse_and_roundtrip(tmp_path):
    text = "# and\n0 0 0\n0 1 0\n1 0 0\n1 1 1\n"
    f = FunctionSpec.parse_truth_table(text)
    assert f.table == (0, 0, 0, 1)
    path = tmp_path / "f.txt"
    path.write_text(FunctionSpec.builtin("xor", 2, 1).to_truth_table())
    assert FunctionSpec.load(path).table == FunctionSpec.builtin("xor", 2, 1).table
    unary = FunctionSpec.parse_truth_table("0 1\n1 0\n")
    assert (unary.n_x, unary.n_y) == (1, 0)


@pytest.mark.parametrize("bad", ["0 0 0\n0 1 0\n1 0 0\n", "0 0 2\n0 1 0\n1 0 0\n1 1 1\n",
                                 "0 0 0\n0 0 1\n1 0 0\n1 1 1\n", "0 0\n01 1 1\n", "x y z\n"])
def test_malformed_truth_tables(bad):
    with pytest.raises(ValueError):
        FunctionSpec.parse_truth_table(bad)


def test_nontrivial_pairs():
    f = FunctionSpec.builtin("and", 1, 1)
    assert f.nontrivial_pairs() == [(0, 1), (1, 0)]
    assert FunctionSpec.builtin("xor", 1, 1).nontrivial_pairs() == []
    assert not FunctionSpec.builtin("or", 1, 1).is_nontrivial(0, 0)


def test_sampled_keys_are_distinct():
    rng = np.random.default_rng(0)
    small = CipherSpec(1, 1, 4)
    for _ in range(50):
        k0, k1 = garbling.sample_key_pair(small, rng)
        assert k0 != k1


@given(functions(), st.integers(0, 1), st.integers(0, 2**32 - 1))
def test_roundtrip(f, kz, seed):
    inst = garbling.garble(f, SPEC, kz, np.random.default_rng(seed))
    for x in range(1 << f.n_x):
        for y in range(1 << f.n_y):
            assert garbling.evaluate(inst, inst.keys_for_x(x), inst.keys_for_y(y)) == f(x, y) ^ kz


@given(functions(3), st.integers(0, 2**32 - 1))
def test_permutation_does_not_change_output(f, seed):
    rng = np.random.default_rng(seed)
    keys = garbling.sample_wire_keys(f, SPEC, rng)
    plain = garbling.garble(f, SPEC, 1, rng, permute=False, keys=keys)
    shuffled = garbling.garble(f, SPEC, 1, rng, permute=True, keys=keys)
    assert sorted(plain.entries) == sorted(shuffled.entries)
    assert plain.initial_entries() == shuffled.initial_entries()
    for x in range(1 << f.n_x):
        for y in range(1 << f.n_y):
            args = (plain.keys_for_x(x), plain.keys_for_y(y))
            assert garbling.evaluate(plain, *args) == garbling.evaluate(shuffled, *args)


def test_entries_decrypt_to_padded_plaintext():
    f = FunctionSpec.builtin("and", 1, 1)
    inst = garbling.garble(f, SPEC, 1, np.random.default_rng(2))
    for x in (0, 1):
        for y in (0, 1):
            ks, auxes = inst.key_sequence(inst.keys_for_x(x), inst.keys_for_y(y))
            m = cipher.seq_dec(SPEC, ks, auxes, inst.entry_for(x, y))
            assert m == garbling.plaintext(SPEC, f(x, y) ^ 1)


def test_foreign_keys_abort_at_full_padding():
    f = FunctionSpec.builtin("and", 1, 1)
    rng = np.random.default_rng(3)
    aborts = 0
    for _ in range(300):
        a = garbling.garble(f, SPEC, 0, rng)
        b = garbling.garble(f, SPEC, 0, rng)
        aborts += garbling.evaluate(a, b.keys_for_x(1), b.keys_for_y(1)) is ABORT
    assert aborts == 300


def test_false_accept_rate_with_tiny_padding():
    # with foreign keys every entry passes a 2-bit check with probability 1/4
    f = FunctionSpec.builtin("and", 1, 1)
    rng = np.random.default_rng(4)
    trials, accepts = 4000, 0
    for _ in range(trials):
        a = garbling.garble(f, SPEC, 0, rng, p=2)
        b = garbling.garble(f, SPEC, 0, rng, p=2)
        accepts += garbling.evaluate(a, b.keys_for_x(0), b.keys_for_y(0)) is not ABORT
    expected = 1 - 0.75 ** 4
    sigma = (expected * (1 - expected) / trials) ** 0.5
    assert abs(accepts / trials - expected) <= 3 * sigma


def test_evaluate_trace_reports_attempts():
    f = FunctionSpec.builtin("or", 1, 1)
    inst = garbling.garble(f, SPEC, 0, np.random.default_rng(5), permute=False)
    tr = garbling.evaluate_trace(inst, inst.keys_for_x(1), inst.keys_for_y(1))
    assert tr.accepted_index == 3 and tr.attempts == 4 and tr.output == 1


def test_instance_json_roundtrip_and_validation():
    f = FunctionSpec.builtin("xor", 2, 1)
    inst = garbling.garble(f, SPEC, 1, np.random.default_rng(6), p=12)
    back = GarbleInstance.from_json(inst.to_json())
    assert back == inst
    with pytest.raises(ValueError):
        garbling.garble(f, SPEC, 1, np.random.default_rng(6), p=SPEC.n_m)
    with pytest.raises(ValueError):
        garbling.garble(f, SPEC, 1, np.random.default_rng(6), p=0)


def test_both_masks_share_keys():
    f = FunctionSpec.builtin("and", 1, 1)
    t0, t1 = garbling.garble_both_masks(f, SPEC, np.random.default_rng(7))
    assert t0.garbler_keys == t1.garbler_keys and t0.auxes == t1.auxes
    assert (t0.kz, t1.kz) == (0, 1)
    assert t0.perm == tuple(range(4))


@given(st.integers(0, 2**32 - 1))
def test_free_xor_offset_holds(seed):
    ot = garbling.freexor_ot_garble(SPEC, np.random.default_rng(seed))
    K = ot.keys.offset
    for wire in ("x0", "x1", "X"):
        k0, k1 = ot.keys.pair(wire)
        assert k0 ^ k1 == K
    for a in (0, 1):
        for b in (0, 1):
            ka, kb = ot.keys.key("x0", a), ot.keys.key("x1", b)
            assert garbling.evaluate_free_xor(ka, kb) == ot.keys.key("X", a ^ b)


@given(st.integers(0, 2**32 - 1))
def test_free_xor_ot_is_correct(seed):
    ot = garbling.freexor_ot_garble(SPEC, np.random.default_rng(seed))
    g = ot.and_table
    for b in (0, 1):
        for x0 in (0, 1):
            for x1 in (0, 1):
                out = ot.evaluate(g.keys_for_x(b)[0], ot.keys.key("x0", x0), ot.keys.key("x1", x1), x0)
                assert out ^ ot.kz == (x1 if b else x0)
