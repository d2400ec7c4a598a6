import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from supyao import attacks, harness, protocols, qsim
from supyao.attacks import AttackConfig
from supyao.cipher import CipherSpec
from supyao.garbling import FunctionSpec

AND = FunctionSpec.builtin("and", 1, 1)


def generated(config, start=0, limit=200):
    """First successful generation, scanning seeds from ``start``."""
    for seed in range(start, start + limit):
        out = attacks.generalized_superposition(config, np.random.default_rng(seed))
        if out.generated:
            return out
    raise AssertionError("no successful generation")


def test_config_validation():
    with pytest.raises(ValueError):
        AttackConfig(AND, 0, 0, 1)
    with pytest.raises(ValueError):
        AttackConfig(AND, 0, 2, 1)
    with pytest.raises(ValueError):
        AttackConfig(FunctionSpec.builtin("xor", 1, 1), 0, 1, 1)
    with pytest.raises(ValueError):
        AttackConfig(AND, 0, 1, 1, psi={0: 1.0, 1: 1.0})
    with pytest.raises(ValueError):
        AttackConfig(AND, 0, 1, 1, phi=(1.0, 1.0))
    assert AttackConfig(FunctionSpec.builtin("xor", 1, 1), 0, 1, 1, allow_trivial=True).target == 1


@pytest.mark.parametrize("y,bit", [(1, 1), (0, 0)])
def test_and_extraction(y, bit):
    cfg = AttackConfig(AND, 0, 1, y)
    hits = 0
    for seed in range(60):
        out = attacks.attack2_full(cfg, np.random.default_rng(seed))
        if out.generated:
            hits += 1
            assert out.extracted_bit == bit and out.prediction == bit
            assert not out.guessed
        else:
            assert out.guessed and out.prediction in (0, 1)
    assert hits > 20


@settings(max_examples=25)
@given(st.sampled_from(["and", "or", "xor"]), st.integers(1, 2), st.integers(1, 2),
       st.integers(0, 2**32 - 1))
def test_extraction_is_deterministic_on_success(name, n_x, n_y, seed):
    f = FunctionSpec.builtin(name, n_x, n_y)
    rng = np.random.default_rng(seed)
    pairs = f.nontrivial_pairs() or [(0, 1)]
    x0, x1 = pairs[int(rng.integers(len(pairs)))]
    y = int(rng.integers(1 << n_y))
    cfg = AttackConfig(f, x0, x1, y, allow_trivial=not f.nontrivial_pairs())
    out = attacks.attack2_full(cfg, rng)
    if out.generated:
        assert out.extracted_bit == cfg.target
        assert out.out_minus_fidelity == pytest.approx(1.0, abs=1e-9)
        assert out.fidelity == pytest.approx(1.0, abs=1e-9)


def test_cleanup_never_touches_output():
    out = generated(AttackConfig(FunctionSpec.builtin("or", 2, 1), 0, 1, 0))
    assert out.ops
    assert all(protocols.OUT not in regs for _, regs in out.ops if _ != "factor-out")


def test_l_prime_counts_key_differences():
    out = generated(AttackConfig(AND, 0, 1, 1))
    assert len(out.l_prime) == 1 and 1 <= out.l_prime[0] <= 8
    assert out.logical_length == out.l_prime[0]


def test_generated_state_matches_target():
    cfg = AttackConfig(AND, 0, 1, 1)
    out = generated(cfg)
    target = attacks.encoded_target_state(cfg, out.l_prime)
    assert qsim.fidelity(qsim.reorder(out.state, target.layout.names), target) == pytest.approx(1.0)


def test_phi_zero_gives_function_value():
    cfg = AttackConfig(AND, 0, 1, 1, psi={0: 1 / math.sqrt(2), 1: 1 / math.sqrt(2)}, phi=(1.0, 0.0))
    out = generated(cfg)
    state = qsim.reorder(out.state, ["w0", protocols.OUT])
    l = out.l_prime[0]
    assert state.amplitude({"w0": 0, protocols.OUT: 0}) == pytest.approx(1 / math.sqrt(2), abs=1e-9)
    assert state.amplitude({"w0": (1 << l) - 1, protocols.OUT: 1}) == pytest.approx(1 / math.sqrt(2), abs=1e-9)
    assert len(state) == 2


def test_weighted_psi_amplitudes():
    a, b = math.sqrt(1 / 3), math.sqrt(2 / 3)
    cfg = AttackConfig(AND, 0, 1, 1, psi={0: a, 1: b})
    out = generated(cfg)
    state = qsim.reorder(out.state, ["w0", protocols.OUT])
    l = out.l_prime[0]
    s = 1 / math.sqrt(2)
    expect = {(0, 0): a * s, (0, 1): -a * s, ((1 << l) - 1, 1): b * s, ((1 << l) - 1, 0): -b * s}
    for (w, o), amp in expect.items():
        assert abs(state.amplitude({"w0": w, protocols.OUT: o}) - amp) < 1e-9


def test_attack1_rejects_custom_weights():
    with pytest.raises(ValueError):
        attacks.attack1_generate(AttackConfig(AND, 0, 1, 1, phi=(1.0, 0.0)), np.random.default_rng())


@pytest.mark.parametrize("f,x0,x1,y", [
    (FunctionSpec.builtin("and", 1, 0), 0, 1, 0),
    (AND, 0, 1, 1),
    (FunctionSpec.builtin("and", 2, 1), 2, 3, 1),
    (FunctionSpec.builtin("and", 3, 1), 6, 7, 1),
    (FunctionSpec.builtin("or", 2, 2), 0, 1, 0),
])
def test_exact_generation_probability(f, x0, x1, y):
    cfg = AttackConfig(f, x0, x1, y, allow_trivial=not f.is_nontrivial(x0, x1))
    run = attacks.exact_generation(cfg, np.random.default_rng(0))
    n = f.n
    assert run.p_success == pytest.approx(harness.exact_generation_probability(n), abs=1e-9)
    assert all(p == pytest.approx(2.0 ** -n) for p in run.copy_probabilities)
    assert sum(w for w, _ in run.success_states) == pytest.approx(run.p_success)


def test_sampled_generation_within_three_sigma():
    cfg = AttackConfig(AND, 0, 1, 1)
    n = 2000
    hits = sum(attacks.attack1_generate(cfg, np.random.default_rng(s)).generated for s in range(n))
    p = 175 / 256
    assert abs(hits / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_success_index_is_geometric():
    # copies are identical, so the first success index is geometric with ratio 3/4
    cfg = AttackConfig(AND, 0, 1, 1)
    run = attacks.exact_generation(cfg, np.random.default_rng(0))
    weights = [w for w, _ in run.success_states]
    assert weights == pytest.approx([0.25 * 0.75 ** i for i in range(4)])


def test_qppt_sends_only_basis_states_and_matches_simulator():
    rep = harness.run_experiment(harness.ExperimentConfig("yao-qppt", trials=3000, seed=9))
    t = 3000
    a = round(rep.estimate("adversary_accuracy").value * t)
    s = round(rep.estimate("simulator_accuracy").value * t)
    pval = stats.chi2_contingency([[a, t - a], [s, t - s]])[1]
    assert pval > 0.01


def test_resistant_attack_learns_nothing():
    cfg = AttackConfig(AND, 0, 1, 1)
    for seed in range(20):
        out = attacks.resistant_attack(cfg, np.random.default_rng(seed))
        assert not out.generated and out.guessed


def test_resistant_views_are_branch_invariant():
    cfg = AttackConfig(AND, 0, 1, 1)
    g = attacks.SuperpositionGarbler(cfg, keep_reference=True)
    res = protocols.run_superposition_resistant_yao(AND, g, 1, cfg.spec, np.random.default_rng(1))
    assert max(res.view_distances.values()) < 1e-9
    # control: conditioning on the padding outcome would be visible to the garbler
    assert max(res.conditioned_distances.values()) > 1e-3


@pytest.mark.parametrize("x0,x1", [(0, 0), (0, 1), (1, 0), (1, 1)])
def test_ot_attack_extracts_xor(x0, x1):
    spec = CipherSpec()
    hits = 0
    for seed in range(30):
        out = attacks.ot_freexor_attack(spec, x0, x1, np.random.default_rng(seed))
        if out.generated:
            hits += 1
            assert out.extracted_bit == x0 ^ x1
    assert hits > 10


def test_ot_exact_generation():
    run = attacks.ot_freexor_attack(CipherSpec(), 0, 1, np.random.default_rng(0), exact=True)
    assert run.p_success == pytest.approx(175 / 256)


def test_biased_simulator_against_counter_environment():
    q = 0.8
    y = attacks.counter_environment(AND, 0, 1, q)
    cfg = AttackConfig(AND, 0, 1, y)
    rng = np.random.default_rng(0)
    n = 4000
    wins = sum(attacks.simulator_baseline(cfg, protocols.IdealTwoParty(AND, y), rng, q) == cfg.target
               for _ in range(n))
    assert wins / n <= 0.2 + 3 * math.sqrt(0.16 / n)


def test_simulator_uses_single_query():
    cfg = AttackConfig(AND, 0, 1, 1)
    ideal = protocols.IdealTwoParty(AND, 1)
    attacks.simulator_baseline(cfg, ideal, np.random.default_rng())
    with pytest.raises(RuntimeError):
        attacks.simulator_baseline(cfg, ideal, np.random.default_rng())


def test_outcome_json():
    out = generated(AttackConfig(AND, 0, 1, 1))
    assert '"generated": true' in out.to_json()
