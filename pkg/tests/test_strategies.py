"""Sequential strategies: update rule, guess rules, closed forms, records."""

import math

import numpy as np
import pytest

from qchange.qubit import computational_basis, helstrom_measurement
from qchange.strategies import (
    ImpossibleOutcomeError,
    PriorVector,
    SourceConfig,
    apply_outcome_noise,
    bi_hypothesis_weights,
    bi_likelihood,
    bi_replay,
    bi_run,
    bi_update,
    bl_guess,
    bl_run,
    bl_success_closed_form,
    guess_from_prior,
    srm_conditional_probabilities,
    srm_optimal_probability,
)


def test_source_config_validation_and_states():
    cfg = SourceConfig(n=5, k=3, c_squared=0.25)
    assert cfg.state_at(1).amp_v == 0.0
    assert cfg.state_at(2).amp_v == 0.0
    assert cfg.state_at(3).amp_h == pytest.approx(0.5)
    assert cfg.state_at(5).amp_h == pytest.approx(0.5)
    for bad in (dict(n=0, k=1, c_squared=0.5), dict(n=5, k=6, c_squared=0.5),
                dict(n=5, k=0, c_squared=0.5), dict(n=5, k=2, c_squared=1.5)):
        with pytest.raises(ValueError):
            SourceConfig(**bad)
    with pytest.raises(ValueError):
        cfg.state_at(6)


def test_prior_vector_validation():
    PriorVector.uniform(4)
    PriorVector(np.array([0.0, 1.0]), 3)  # zero entries allowed
    with pytest.raises(ValueError):
        PriorVector(np.array([0.5, 0.6]), 1)
    with pytest.raises(ValueError):
        PriorVector(np.array([-0.1, 1.1]), 1)
    with pytest.raises(ValueError):
        PriorVector(np.array([0.5, 0.5]), 4)  # step beyond n + 1


def test_hypothesis_weights_use_per_side_maxima():
    prior = PriorVector(np.array([0.1, 0.3, 0.15, 0.25, 0.2]), 2)
    p_h, p_phi = bi_hypothesis_weights(prior)
    assert p_phi == pytest.approx(0.3)   # max over positions 1..2
    assert p_h == pytest.approx(0.25)    # max over positions 3..5
    # after the final photon no hypothesis keeps |H>
    last = PriorVector(np.array([0.1, 0.3, 0.15, 0.25, 0.2]), 5)
    p_h, p_phi = bi_hypothesis_weights(last)
    assert p_h == 0.0
    assert p_phi == pytest.approx(0.3)
    with pytest.raises(ValueError):
        bi_hypothesis_weights(PriorVector(np.full(4, 0.25), 5))


def test_guess_from_prior_tie_break():
    assert guess_from_prior(PriorVector(np.array([0.1, 0.7, 0.2]), 1)) == 2
    assert guess_from_prior(PriorVector(np.array([0.4, 0.4, 0.2]), 1)) == 1
    assert guess_from_prior(PriorVector.uniform(6)) == 1


# Frozen: one full Bayes step at n=3, uniform prior, step 1, c^2=0.5,
# outcome 0 (eigh route, hand-verified: eta_1' = (2-sqrt(2))/(6+sqrt(2)) etc).
FROZEN_POSTERIOR = (0.07900857355927171, 0.46049571322036414, 0.46049571322036414)
FROZEN_LIKELIHOODS = (0.14644660940672613, 0.8535533905932737, 0.8535533905932737)


def test_bi_update_frozen_one_step():
    prior = PriorVector.uniform(3)
    p_h, p_phi = bi_hypothesis_weights(prior)
    assert (p_h, p_phi) == (pytest.approx(1 / 3), pytest.approx(1 / 3))
    meas = helstrom_measurement(p_h, p_phi, 0.5)
    for k, want in zip((1, 2, 3), FROZEN_LIKELIHOODS):
        assert bi_likelihood(k, 1, 0, meas, 0.5) == pytest.approx(want, abs=1e-12)
    post = bi_update(prior, 0, meas, 0.5)
    assert post.step == 2
    assert post.eta == pytest.approx(np.array(FROZEN_POSTERIOR), abs=1e-12)
    assert float(post.eta.sum()) == pytest.approx(1.0, abs=1e-12)


def test_bi_update_matches_bayes_rule_against_direct_computation():
    rng = np.random.default_rng(21)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        eta = rng.dirichlet(np.ones(n))
        s = int(rng.integers(1, n + 1))
        prior = PriorVector(eta, s)
        c2 = float(rng.uniform(0.05, 0.95))
        meas = helstrom_measurement(*bi_hypothesis_weights(prior), c2)
        lik = np.array([bi_likelihood(k, s, 1, meas, c2) for k in range(1, n + 1)])
        if float(lik @ eta) == 0.0:
            continue
        post = bi_update(prior, 1, meas, c2)
        assert post.eta == pytest.approx(lik * eta / (lik @ eta), abs=1e-12)


def test_bi_update_impossible_outcome():
    # At c^2 = 1 the rotated state equals |H>, so both hypotheses predict
    # the same state and the orthogonal port (outcome 0) can never fire.
    prior = PriorVector(np.array([1.0, 0.0]), 2)
    meas = helstrom_measurement(0.0, 1.0, 1.0)
    with pytest.raises(ImpossibleOutcomeError):
        bi_update(prior, 0, meas, 1.0)


def test_bi_run_record_structure_and_replayability():
    cfg = SourceConfig(n=8, k=5, c_squared=0.604)
    rec = bi_run(cfg, np.random.default_rng(99), seed=99)
    assert rec.strategy == "BI"
    assert len(rec.outcomes) == 8
    assert len(rec.bases) == 8
    assert len(rec.prior_history) == 9
    assert rec.prior_history[0].step == 1
    assert rec.prior_history[-1].step == 9
    assert rec.success == (rec.guess == cfg.k)
    # replaying from the recorded seed reproduces everything
    again = bi_run(cfg, np.random.default_rng(rec.seed), seed=rec.seed)
    assert again.outcomes == rec.outcomes
    assert again.guess == rec.guess
    # replaying the outcome string through the strict path agrees too
    strict = bi_replay(cfg, rec.outcomes)
    assert strict.guess == rec.guess
    assert strict.prior_history[-1].eta == pytest.approx(
        rec.prior_history[-1].eta, abs=1e-12
    )


def test_bi_replay_rejects_impossible_strings():
    # c^2 = 1: the rotated state equals |H>, so a "1" can never be produced
    cfg = SourceConfig(n=3, k=1, c_squared=1.0)
    with pytest.raises(ImpossibleOutcomeError):
        bi_replay(cfg, (0, 1, 0))
    with pytest.raises(ValueError):
        bi_replay(cfg, (0, 0))  # wrong length


def test_bl_guess_rule():
    assert bl_guess((0, 0, 1, 0, 1), 5) == 3
    assert bl_guess((1, 0, 0), 3) == 1
    assert bl_guess((0, 0, 0), 3) == 3  # no click: only position n fits


def test_bl_run_degenerate_overlaps():
    # c^2 = 0: the rotated state always clicks, so the guess is exact
    cfg = SourceConfig(n=6, k=4, c_squared=0.0)
    rng = np.random.default_rng(1)
    for _ in range(50):
        assert bl_run(cfg, rng).guess == 4
    # c^2 = 1: nothing ever clicks, the guess is always n
    cfg = SourceConfig(n=6, k=4, c_squared=1.0)
    for _ in range(50):
        rec = bl_run(cfg, rng)
        assert rec.outcomes == (0,) * 6
        assert rec.guess == 6


def test_bl_closed_form_values():
    assert bl_success_closed_form(20, 0.010) == pytest.approx(0.9905, abs=1e-12)
    assert bl_success_closed_form(5, 0.0) == 1.0
    assert bl_success_closed_form(5, 1.0) == pytest.approx(0.2, abs=1e-15)


def test_apply_outcome_noise():
    assert apply_outcome_noise(0.8, 0.2, 0.0) == (0.8, 0.2)
    p0, p1 = apply_outcome_noise(1.0, 0.0, 0.1)
    assert (p0, p1) == (pytest.approx(0.9), pytest.approx(0.1))
    assert p0 + p1 == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        apply_outcome_noise(0.5, 0.5, 0.6)


def test_noise_affects_sampling_but_not_update():
    # with epsilon = 0.5 the data are pure coin flips, but every recorded
    # prior must still be a normalized distribution driven by ideal
    # likelihoods
    cfg = SourceConfig(n=6, k=3, c_squared=0.4)
    rec = bi_run(cfg, np.random.default_rng(5), epsilon=0.5, seed=5)
    for prior in rec.prior_history:
        assert float(prior.eta.sum()) == pytest.approx(1.0, abs=1e-12)
        assert np.all(prior.eta >= 0.0)


# Frozen: optimal global averages, eigh route.
FROZEN_SRM = {
    (20, 0.604): 0.6332202363916883,
    (20, 0.010): 0.9952352390095875,
    (20, 0.2): 0.8984590366358619,
    (20, 0.9): 0.31191985830863383,
}


def test_srm_frozen_values():
    for (n, c2), want in FROZEN_SRM.items():
        assert srm_optimal_probability(n, c2) == pytest.approx(want, abs=1e-12)


def test_srm_conditionals_symmetric_and_consistent():
    cond = srm_conditional_probabilities(20, 0.604)
    assert cond.shape == (20,)
    assert cond == pytest.approx(cond[::-1], abs=1e-10)  # mirror symmetry
    assert float(cond.mean()) == pytest.approx(srm_optimal_probability(20, 0.604), abs=1e-15)
    # end positions are easier than the bulk
    assert cond[0] > cond.mean() and cond[-1] > cond.mean()


def test_srm_two_state_closed_form():
    for c2 in (0.0, 0.25, 0.5, 0.9, 1.0):
        want = (1.0 + math.sqrt(1.0 - c2)) / 2.0
        assert srm_optimal_probability(2, c2) == pytest.approx(want, abs=1e-10)
