"""Change-point detection strategies for a stream of polarized photons.

The source emits ``n`` photons; the first ``k - 1`` are |H> and the rest are
the rotated state |phi> = c|H> + s|V>.  Three detection strategies live here:

* ``bl_run`` -- the basic local strategy: measure every photon in the fixed
  {|H>, |V>} basis and guess the position of the first "1" click (or ``n``
  when nothing clicks).
* ``bi_run`` -- the adaptive strategy: a Bayesian agent keeps a prior over
  the change position, measures each photon in the minimum-error basis for
  "still |H>" vs "already rotated" (weighted by the most likely hypothesis
  on each side), and updates the prior with the ideal outcome likelihoods.
* ``srm_optimal_probability`` -- the average success of the optimal global
  (square-root) measurement on the whole block, for reference.

Optional symmetric readout noise flips each recorded outcome with
probability ``epsilon``.  Noise affects only the sampled data: the adaptive
agent always updates with ideal likelihoods, mirroring an experimenter who
trusts an imperfect apparatus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qubit import (
    BinaryMeasurement,
    QubitState,
    H_STATE,
    computational_basis,
    helstrom_measurement,
    make_mutated_state,
    outcome_probabilities,
)

PRIOR_SUM_ATOL = 1e-9


class ImpossibleOutcomeError(ValueError):
    """An observed outcome has zero probability under every hypothesis.

    This cannot happen for noiseless simulated data, but recorded streams
    (or noisy samples hitting a degenerate measurement port) can contradict
    the ideal model.
    """


@dataclass(frozen=True)
class SourceConfig:
    """Photon-block description: length, change position, squared overlap."""

    n: int
    k: int
    c_squared: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"k must lie in [1, {self.n}], got {self.k}")
        if not 0.0 <= self.c_squared <= 1.0:
            raise ValueError(f"c_squared must lie in [0, 1], got {self.c_squared}")

    def mutated_state(self) -> QubitState:
        return make_mutated_state(self.c_squared)

    def state_at(self, s: int) -> QubitState:
        """True state of photon ``s`` (1-based): |H> before the change."""
        if not 1 <= s <= self.n:
            raise ValueError(f"photon index must lie in [1, {self.n}], got {s}")
        return H_STATE if s < self.k else self.mutated_state()


@dataclass(frozen=True)
class PriorVector:
    """Hypothesis weights over change positions, tagged with the step index.

    ``step`` is the photon about to be measured (1-based); ``n + 1`` marks
    the final posterior after the last measurement.
    """

    eta: np.ndarray
    step: int

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        object.__setattr__(self, "eta", eta)
        if eta.ndim != 1 or eta.size < 1:
            raise ValueError("eta must be a non-empty 1-D vector")
        if not 1 <= self.step <= eta.size + 1:
            raise ValueError(f"step must lie in [1, {eta.size + 1}], got {self.step}")
        if np.any(eta < 0.0) or not np.all(np.isfinite(eta)):
            raise ValueError("prior entries must be finite and non-negative")
        if abs(float(eta.sum()) - 1.0) > PRIOR_SUM_ATOL:
            raise ValueError(f"prior must sum to 1, got {float(eta.sum())!r}")

    @property
    def n(self) -> int:
        return int(self.eta.size)

    @classmethod
    def uniform(cls, n: int) -> "PriorVector":
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        return cls(np.full(n, 1.0 / n), 1)


@dataclass(frozen=True)
class TrialRecord:
    """Everything needed to audit one simulated detection run."""

    config: SourceConfig
    strategy: str
    outcomes: tuple
    bases: tuple
    prior_history: tuple
    guess: int
    success: bool
    seed: int


def bi_hypothesis_weights(prior: PriorVector):
    """Weights ``(p_h, p_phi)`` for the step recorded in the prior.

    ``p_h`` is the largest prior weight among hypotheses whose photon at
    this step is still |H> (positions after the step), ``p_phi`` the largest
    among those already rotated (positions up to and including the step).
    After the last photon no hypothesis predicts |H>, so ``p_h`` is 0.
    """
    s = prior.step
    n = prior.n
    if not 1 <= s <= n:
        raise ValueError(f"weights are defined for steps 1..{n}, got {s}")
    p_phi = float(prior.eta[:s].max())
    p_h = float(prior.eta[s:].max()) if s < n else 0.0
    return p_h, p_phi


def bi_likelihood(
    k: int, s: int, outcome: int, measurement: BinaryMeasurement, c_squared: float
) -> float:
    """Probability of ``outcome`` at step ``s`` if the change is at ``k``."""
    state = H_STATE if s < k else make_mutated_state(c_squared)
    p0, p1 = outcome_probabilities(state, measurement)
    if outcome == 0:
        return p0
    if outcome == 1:
        return p1
    raise ValueError(f"outcome must be 0 or 1, got {outcome}")


def _step_likelihoods(measurement: BinaryMeasurement, outcome: int, c_squared: float):
    """Ideal likelihoods ``(l_h, l_phi)`` of an outcome for the two branches.

    Hypotheses with the photon still |H> share ``l_h``; hypotheses already
    rotated share ``l_phi``.  Matches ``bi_likelihood`` evaluated at any
    representative ``k`` on each side.
    """
    phi = make_mutated_state(c_squared)
    ph0, ph1 = outcome_probabilities(H_STATE, measurement)
    pp0, pp1 = outcome_probabilities(phi, measurement)
    if outcome == 0:
        return ph0, pp0
    return ph1, pp1


def _bayes_products(eta: np.ndarray, s: int, l_h: float, l_phi: float):
    """Unnormalized posterior after step ``s`` and its normalizer.

    Kept as a shared helper so the scalar runners and the vectorized Monte
    Carlo engine perform the identical sequence of float operations.
    """
    post = eta.copy()
    post[:s] *= l_phi
    post[s:] *= l_h
    denom = float(post.sum())
    return post, denom


def bi_update(
    prior: PriorVector,
    outcome: int,
    measurement: BinaryMeasurement,
    c_squared: float,
) -> PriorVector:
    """Bayes update of the prior given one measured outcome.

    Raises :class:`ImpossibleOutcomeError` when the outcome has zero
    probability under every hypothesis, which can occur on recorded data
    that the ideal model cannot produce.
    """
    s = prior.step
    if not 1 <= s <= prior.n:
        raise ValueError(f"cannot update a prior at step {s}")
    if outcome not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {outcome}")
    l_h, l_phi = _step_likelihoods(measurement, outcome, c_squared)
    post, denom = _bayes_products(prior.eta, s, l_h, l_phi)
    if not (denom > 0.0 and math.isfinite(denom)):
        raise ImpossibleOutcomeError(
            f"outcome {outcome} at step {s} has zero probability under all hypotheses"
        )
    return PriorVector(post / denom, s + 1)


def guess_from_prior(prior: PriorVector) -> int:
    """Most probable change position; ties break to the smallest index."""
    return int(np.argmax(prior.eta)) + 1


def apply_outcome_noise(p0: float, p1: float, epsilon: float):
    """Symmetric readout flip: each recorded outcome is swapped w.p. epsilon."""
    if not 0.0 <= epsilon <= 0.5:
        raise ValueError(f"epsilon must lie in [0, 0.5], got {epsilon}")
    return (1.0 - epsilon) * p0 + epsilon * p1, (1.0 - epsilon) * p1 + epsilon * p0


def bi_run(
    config: SourceConfig,
    rng: np.random.Generator,
    epsilon: float = 0.0,
    seed: int = 0,
) -> TrialRecord:
    """One adaptive-strategy trial against a sampled photon block.

    Draws one uniform variate per photon from ``rng``.  ``seed`` is recorded
    verbatim in the result so the trial can be replayed with a fresh
    generator.  If a noisy sample lands on a measurement port the ideal
    model rules out, the prior is left unchanged for that step (the agent
    discards a reading it cannot explain) instead of raising.
    """
    n = config.n
    eta = np.full(n, 1.0 / n)
    history = [PriorVector(eta.copy(), 1)]
    outcomes = []
    bases = []
    for step in range(1, n + 1):
        p_phi = float(eta[:step].max())
        p_h = float(eta[step:].max()) if step < n else 0.0
        meas = helstrom_measurement(p_h, p_phi, config.c_squared)
        bases.append(meas)
        p0, p1 = outcome_probabilities(config.state_at(step), meas)
        p0_noisy, _ = apply_outcome_noise(p0, p1, epsilon)
        outcome = 0 if rng.random() < p0_noisy else 1
        outcomes.append(outcome)
        l_h, l_phi = _step_likelihoods(meas, outcome, config.c_squared)
        post, denom = _bayes_products(eta, step, l_h, l_phi)
        if denom > 0.0 and math.isfinite(denom):
            eta = post / denom
        history.append(PriorVector(eta.copy(), step + 1))
    guess = int(np.argmax(eta)) + 1
    return TrialRecord(
        config=config,
        strategy="BI",
        outcomes=tuple(outcomes),
        bases=tuple(bases),
        prior_history=tuple(history),
        guess=guess,
        success=guess == config.k,
        seed=seed,
    )


def bi_replay(config: SourceConfig, outcomes) -> TrialRecord:
    """Run the adaptive agent against a fixed recorded outcome string.

    Unlike :func:`bi_run` this is strict: outcomes the ideal model cannot
    produce raise :class:`ImpossibleOutcomeError`.
    """
    outcomes = tuple(int(o) for o in outcomes)
    if len(outcomes) != config.n:
        raise ValueError(f"expected {config.n} outcomes, got {len(outcomes)}")
    prior = PriorVector.uniform(config.n)
    history = [prior]
    bases = []
    for step, outcome in enumerate(outcomes, start=1):
        p_h, p_phi = bi_hypothesis_weights(prior)
        meas = helstrom_measurement(p_h, p_phi, config.c_squared)
        bases.append(meas)
        prior = bi_update(prior, outcome, meas, config.c_squared)
        history.append(prior)
    guess = guess_from_prior(prior)
    return TrialRecord(
        config=config,
        strategy="BI",
        outcomes=outcomes,
        bases=tuple(bases),
        prior_history=tuple(history),
        guess=guess,
        success=guess == config.k,
        seed=-1,
    )


def bl_guess(outcomes, n: int) -> int:
    """Basic-local guess rule: position of the first "1", or ``n``.

    The no-click fallback is ``n``: a change at the last position can
    produce an all-"0" record, and ``n`` is the only position every such
    record is consistent with under every overlap.
    """
    for step, outcome in enumerate(outcomes, start=1):
        if outcome == 1:
            return step
    return n


def bl_run(
    config: SourceConfig,
    rng: np.random.Generator,
    epsilon: float = 0.0,
    seed: int = 0,
) -> TrialRecord:
    """One basic-local trial: fixed-basis clicks, guess the first "1".

    All ``n`` photons are measured even after a click; the guess rule only
    looks at the click pattern afterwards.
    """
    n = config.n
    meas = computational_basis()
    outcomes = []
    for step in range(1, n + 1):
        p0, p1 = outcome_probabilities(config.state_at(step), meas)
        p0_noisy, _ = apply_outcome_noise(p0, p1, epsilon)
        outcomes.append(0 if rng.random() < p0_noisy else 1)
    guess = bl_guess(outcomes, n)
    return TrialRecord(
        config=config,
        strategy="BL",
        outcomes=tuple(outcomes),
        bases=tuple([meas] * n),
        prior_history=(),
        guess=guess,
        success=guess == config.k,
        seed=seed,
    )


def bl_success_closed_form(n: int, c_squared: float) -> float:
    """Average success of the basic local strategy: 1 - c^2 + c^2/n."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= c_squared <= 1.0:
        raise ValueError(f"c_squared must lie in [0, 1], got {c_squared}")
    return 1.0 - c_squared + c_squared / n


def srm_conditional_probabilities(n: int, c_squared: float) -> np.ndarray:
    """Per-position success of the optimal global measurement.

    The ``n`` candidate source states have Gram matrix ``G[k, l] =
    c^|k - l|``; the square-root measurement attains the optimal average for
    this ensemble, and identifies position ``k`` with probability
    ``sqrt(G)[k, k]^2``.  Eigenvalues below ``1e-12`` of the largest are
    treated as exact zeros so that rank-deficient Gram matrices (c^2 of 0
    or 1) do not leak rounding noise through the square root.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= c_squared <= 1.0:
        raise ValueError(f"c_squared must lie in [0, 1], got {c_squared}")
    c = math.sqrt(c_squared)
    idx = np.arange(n)
    gram = c ** np.abs(idx[:, None] - idx[None, :])
    w, v = np.linalg.eigh(gram)
    w_max = max(float(w.max()), 0.0)
    w = np.where(w < 1e-12 * w_max, 0.0, w)
    sqrt_gram = (v * np.sqrt(w)) @ v.T
    return np.diag(sqrt_gram) ** 2


def srm_optimal_probability(n: int, c_squared: float) -> float:
    """Average success of the optimal global measurement on the block."""
    return float(np.sum(srm_conditional_probabilities(n, c_squared)) / n)
