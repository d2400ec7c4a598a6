import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from supyao import protocols, qsim
from supyao.cipher import CipherSpec
from supyao.garbling import ABORT, FunctionSpec
from supyao.protocols import GarblerSetup, HonestGarbler
from supyao.qsim import RegisterLayout, SparseState

SPEC = CipherSpec()
AND = FunctionSpec.builtin("and", 1, 1)


def rng(seed=0):
    return np.random.default_rng(seed)


def test_ideal_ot_classical_and_abort():
    assert protocols.ideal_ot((5, 9), 1, rng()).receiver == 9
    assert protocols.ideal_ot((5, 9), 2, rng()).receiver is ABORT
    assert protocols.ideal_ot(ABORT, 0, rng()).sender is ABORT
    assert protocols.ideal_ot((5,), 0, rng()).receiver is ABORT


def test_ideal_ot_measures_quantum_choice():
    s = 1 / math.sqrt(2)
    choice = SparseState(RegisterLayout.of(("b", 1)), {0: s, 1: s})
    seen = {protocols.ideal_ot((5, 9), choice, rng(i)).receiver for i in range(20)}
    assert seen == {5, 9}
    wide = SparseState.basis(RegisterLayout.of(("b", 2)))
    assert protocols.ideal_ot((5, 9), wide, rng()).receiver is ABORT


def test_ideal_functionality_answers_once():
    ideal = protocols.IdealTwoParty(AND, 1)
    assert ideal.query(1) == 1
    with pytest.raises(RuntimeError):
        ideal.query(0)


def test_ideal_functionality_measures_superposed_input():
    s = 1 / math.sqrt(2)
    x = SparseState(RegisterLayout.of(("x", 1)), {0: s, 1: s})
    outs = {protocols.IdealTwoParty(AND, 1).query(x, rng(i)) for i in range(20)}
    assert outs == {0, 1}


@pytest.mark.parametrize("name", ["and", "or", "xor"])
def test_classical_protocol_is_correct(name):
    f = FunctionSpec.builtin(name, 1, 1)
    for x in (0, 1):
        for y in (0, 1):
            out, tr = protocols.run_modified_yao_classical(f, x, y, SPEC, rng(x * 2 + y))
            assert out == f(x, y)
            assert tr.steps()[0] == "garble" and tr.steps()[-1] == "unmask"


def test_classical_transcript_is_deterministic():
    a = protocols.run_modified_yao_classical(AND, 1, 1, SPEC, rng(5))[1]
    b = protocols.run_modified_yao_classical(AND, 1, 1, SPEC, rng(5))[1]
    assert a.to_json() == b.to_json()


@given(st.integers(0, 1), st.integers(0, 1), st.integers(0, 2**32 - 1))
def test_quantum_honest_matches_function(x, y, seed):
    out, run = protocols.run_honest_quantum(AND, x, y, SPEC, rng(seed))
    assert out == AND(x, y)
    assert run.success and run.returned is not None


def test_honest_exact_run_always_succeeds():
    run = protocols.run_modified_yao_quantum(AND, HonestGarbler(1), 1, SPEC, rng(), exact=True)
    assert run.p_success == pytest.approx(1.0)
    assert sorted(run.copy_probabilities) == [0.0, 0.0, 0.0, 1.0]


def test_persistent_registers_stay_classical():
    run = protocols.run_modified_yao_quantum(AND, HonestGarbler(0), 1, SPEC, rng(3))
    assert run.evaluator_state.is_basis_state()


class BadOTGarbler(HonestGarbler):
    def setup(self, f, spec, p, r):
        s = super().setup(f, spec, p, r)
        return GarblerSetup([ABORT] * f.n_y, s.auxes, s.copies)


class WrongCopiesGarbler(HonestGarbler):
    def setup(self, f, spec, p, r):
        s = super().setup(f, spec, p, r)
        return GarblerSetup(s.ot_pairs, s.auxes, s.copies + 1)


def test_malformed_ot_input_aborts():
    run = protocols.run_modified_yao_quantum(AND, BadOTGarbler(1), 1, SPEC, rng())
    assert run.evaluator_output is ABORT and not run.success
    res = protocols.run_superposition_resistant_yao(AND, BadOTGarbler(1), 1, SPEC, rng())
    assert res.evaluator_output is ABORT


def test_copy_count_is_enforced():
    with pytest.raises(ValueError):
        protocols.run_modified_yao_quantum(AND, WrongCopiesGarbler(1), 1, SPEC, rng())


def test_quantum_embedding_requires_full_padding():
    with pytest.raises(ValueError):
        protocols.EvaluatorCore(SPEC, 1, [3], [1, 2], p=10)


def test_block_width_is_checked():
    core = protocols.EvaluatorCore(SPEC, 1, [3], [1, 2], SPEC.n_m - 1)
    bad = SparseState.basis(RegisterLayout.of(("kG0", SPEC.n_k), ("table", SPEC.n_m - 1)))
    with pytest.raises(qsim.StateError):
        core.decrypt(bad)


@given(st.integers(0, 1), st.integers(0, 1), st.integers(0, 2**32 - 1))
def test_resistant_honest_output_is_masked_value(x, y, seed):
    g = HonestGarbler(x)
    res = protocols.run_superposition_resistant_yao(AND, g, y, SPEC, rng(seed), compute_views=False)
    assert res.evaluator_output ^ g.instance.kz == AND(x, y)
    assert res.garbler_events_after_send == 0


def test_otp_passive_and_flip_delivery():
    for m in range(16):
        run = protocols.run_otp(m, protocols.PassiveEavesdropper(), 4, rng(m), exact_view=False)
        assert run.received == m
        flip = protocols.run_otp(m, protocols.FlipEavesdropper(1), 4, rng(m), exact_view=False)
        assert flip.received == m ^ 0b0100


def test_otp_ideal_mode_delivers_channel_outcome():
    run = protocols.run_otp(3, protocols.PassiveEavesdropper(), 4, rng(1), mode="ideal")
    assert "channel" in run.transcript.steps()
    with pytest.raises(ValueError):
        protocols.run_otp(3, protocols.PassiveEavesdropper(), 4, rng(), mode="other")
    with pytest.raises(ValueError):
        protocols.run_otp(16, protocols.PassiveEavesdropper(), 4, rng())


@given(st.integers(0, 15), st.integers(0, 10_000))
def test_otp_views_match(m, eve_seed):
    eve = protocols.CircuitEavesdropper(eve_seed)
    assert protocols.otp_view_distance(m, eve, 4, 0) < 1e-9


def test_otp_view_is_a_density_matrix():
    run = protocols.run_otp(5, protocols.CircuitEavesdropper(2), 3, rng())
    run.view.check()


def test_otp_view_independent_of_message():
    eve = protocols.CircuitEavesdropper(9)
    a = protocols.run_otp(0, eve, 3, rng()).view
    b = protocols.run_otp(7, eve, 3, rng()).view
    assert qsim.trace_distance(a, b) < 1e-9


def test_unencrypted_channel_would_leak():
    # negative control: without the pad the eavesdropper's copy reveals the message
    eve = protocols.PassiveEavesdropper()
    a = protocols._otp_ideal_state(0, 3, eve)
    b = protocols._otp_ideal_state(5, 3, eve)
    ra = qsim.reduced_density_matrix(a, ["y"])
    rb = qsim.reduced_density_matrix(b, ["y"])
    assert qsim.trace_distance(ra, rb) == pytest.approx(1.0)


def test_transcript_serializes_abort():
    tr = protocols.Transcript(seed=1)
    tr.add("x", "evaluator", outcome=ABORT)
    tr.outputs = {"evaluator": ABORT}
    d = tr.to_dict()
    assert d["events"][0]["outcome"] == "abort" and d["outputs"]["evaluator"] == "abort"
