"""Monte Carlo harness, exhaustive oracles, and parameter sweeps.

Reproducibility scheme
----------------------
Every batch is driven by one ``master_seed``.  Trial ``i`` gets the ``i``-th
64-bit word of ``numpy.random.SeedSequence(master_seed)`` and runs on its own
``default_rng`` seeded with that word, so any single trial can be replayed in
isolation from the word recorded in its result.  The word stream does not
depend on how a batch is chunked, and chunk success counts combine by integer
addition, so results are bitwise identical for any worker count.

Per-trial draw order is fixed: one ``integers(1, n + 1)`` draw for the change
position when averaging over positions (no draw when the position is pinned),
then one ``random()`` variate per photon.

The vectorized engines below replicate the scalar runners in
:mod:`qchange.strategies` operation-for-operation (same formula helpers, same
clamp and update order), so scalar replay of any trial reproduces the
batch verdict exactly, not just statistically.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .qubit import (
    born_form,
    clip01,
    helstrom_measurement,
    outcome_probabilities,
    split_projector_entries,
)
from .strategies import (
    PriorVector,
    SourceConfig,
    bi_hypothesis_weights,
    bi_update,
    bl_success_closed_form,
    guess_from_prior,
    srm_conditional_probabilities,
    srm_optimal_probability,
)

# Stable identifiers used to derive independent seed streams per strategy
# inside a sweep; changing them silently would break recorded manifests.
STRATEGY_IDS = {"BL": 0, "BI": 1}

# Squared-overlap grid used by the overlap sweeps: a near-orthogonal start
# (an ideal 0 is not reachable by a real polarization rotator), steps of
# 0.05, and a near-parallel end.
DEFAULT_OVERLAP_GRID = tuple(
    [0.01] + [round(0.05 * i, 2) for i in range(1, 20)] + [0.99]
)

EXACT_ENUMERATION_MAX_N = 16

SWEEP_CSV_HEADER = "axis,strategy,mean,std_error,trials,epsilon,seed"


@dataclass(frozen=True)
class EstimateWithError:
    """A Monte Carlo success estimate with its binomial standard error."""

    mean: float
    std_error: float
    trials: int


@dataclass(frozen=True)
class SweepRow:
    """One (axis point, strategy) cell of a sweep table."""

    axis: float
    strategy: str
    mean: float
    std_error: float
    trials: int


@dataclass(frozen=True)
class SweepTable:
    """A long-format sweep result: one row per (axis point, strategy)."""

    axis_name: str
    rows: tuple
    epsilon: float
    master_seed: int


def trial_seed_words(master_seed: int, start: int, stop: int) -> np.ndarray:
    """Seed words ``start..stop-1`` of the master stream, as uint64.

    The full prefix is regenerated on every call; ``SeedSequence`` word
    streams are prefix-stable, so the slice is independent of chunking.
    """
    if not 0 <= start <= stop:
        raise ValueError(f"bad word range [{start}, {stop})")
    if stop == 0:
        return np.empty(0, dtype=np.uint64)
    return np.random.SeedSequence(master_seed).generate_state(stop, np.uint64)[start:]


def _draw_inputs(seed_words: np.ndarray, n: int, k_fixed):
    """Per-trial change positions and uniform variates for a batch."""
    trials = len(seed_words)
    ks = np.empty(trials, dtype=np.int64)
    u = np.empty((trials, n))
    for i, word in enumerate(seed_words):
        rng = np.random.default_rng(int(word))
        ks[i] = int(rng.integers(1, n + 1)) if k_fixed is None else k_fixed
        u[i] = rng.random(n)
    return ks, u


def _bi_guesses(n: int, c_squared: float, ks: np.ndarray, u: np.ndarray, epsilon: float):
    """Vectorized adaptive-strategy runs; mirrors ``strategies.bi_run``."""
    trials = ks.shape[0]
    c = math.sqrt(c_squared)
    s_amp = math.sqrt(1.0 - c_squared)
    eta = np.full((trials, n), 1.0 / n)
    for step in range(1, n + 1):
        p_phi = eta[:, :step].max(axis=1)
        p_h = eta[:, step:].max(axis=1) if step < n else np.zeros(trials)
        e = split_projector_entries(p_h, p_phi, c, s_amp)
        is_h = step < ks
        amp_h = np.where(is_h, 1.0, c)
        amp_v = np.where(is_h, 0.0, s_amp)
        p0 = clip01(born_form(e[0], e[1], e[2], amp_h, amp_v))
        p1 = clip01(born_form(e[3], e[4], e[5], amp_h, amp_v))
        p0_noisy = (1.0 - epsilon) * p0 + epsilon * p1
        out1 = u[:, step - 1] >= p0_noisy
        l_h0 = clip01(born_form(e[0], e[1], e[2], 1.0, 0.0))
        l_phi0 = clip01(born_form(e[0], e[1], e[2], c, s_amp))
        l_h1 = clip01(born_form(e[3], e[4], e[5], 1.0, 0.0))
        l_phi1 = clip01(born_form(e[3], e[4], e[5], c, s_amp))
        l_h = np.where(out1, l_h1, l_h0)
        l_phi = np.where(out1, l_phi1, l_phi0)
        post = eta.copy()
        post[:, :step] *= l_phi[:, None]
        post[:, step:] *= l_h[:, None]
        denom = post.sum(axis=1)
        # A noisy sample can land on a port the ideal model rules out
        # (zero normalizer); the agent then keeps its prior for the step.
        safe = (denom > 0.0) & np.isfinite(denom)
        denom_div = np.where(safe, denom, 1.0)
        eta = np.where(safe[:, None], post / denom_div[:, None], eta)
    return eta.argmax(axis=1) + 1


def _bl_guesses(n: int, c_squared: float, ks: np.ndarray, u: np.ndarray, epsilon: float):
    """Vectorized basic-local runs; mirrors ``strategies.bl_run``."""
    c = math.sqrt(c_squared)
    s_amp = math.sqrt(1.0 - c_squared)
    steps = np.arange(1, n + 1)
    is_h = steps[None, :] < ks[:, None]
    amp_h = np.where(is_h, 1.0, c)
    amp_v = np.where(is_h, 0.0, s_amp)
    p0 = clip01(amp_h * amp_h)
    p1 = clip01(amp_v * amp_v)
    p0_noisy = (1.0 - epsilon) * p0 + epsilon * p1
    clicks = u >= p0_noisy
    clicked = clicks.any(axis=1)
    first = clicks.argmax(axis=1) + 1
    return np.where(clicked, first, n)


_ENGINES = {"BI": _bi_guesses, "BL": _bl_guesses}


def _run_chunk(strategy, n, c_squared, k, epsilon, master_seed, start, stop) -> int:
    words = trial_seed_words(master_seed, start, stop)
    ks, u = _draw_inputs(words, n, k)
    guesses = _ENGINES[strategy](n, c_squared, ks, u, epsilon)
    return int(np.count_nonzero(guesses == ks))


def simulate_success(
    strategy: str,
    n: int,
    c_squared: float,
    k=None,
    trials: int = 10000,
    epsilon: float = 0.0,
    master_seed: int = 0,
    threads: int = 1,
) -> EstimateWithError:
    """Monte Carlo success probability of a sequential strategy.

    Parameters
    ----------
    strategy:
        ``"BL"`` or ``"BI"``.
    k:
        Change position; ``None`` averages over a uniformly drawn position
        per trial.
    threads:
        Worker count.  Results are bitwise independent of this value; it
        only controls how the batch is chunked.
    """
    if strategy not in _ENGINES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {sorted(_ENGINES)}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= c_squared <= 1.0:
        raise ValueError(f"c_squared must lie in [0, 1], got {c_squared}")
    if k is not None and not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not 0.0 <= epsilon <= 0.5:
        raise ValueError(f"epsilon must lie in [0, 0.5], got {epsilon}")
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")

    workers = min(threads, trials)
    if workers == 1:
        successes = _run_chunk(strategy, n, c_squared, k, epsilon, master_seed, 0, trials)
    else:
        bounds = np.linspace(0, trials, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = pool.map(
                lambda se: _run_chunk(strategy, n, c_squared, k, epsilon, master_seed, *se),
                zip(bounds[:-1], bounds[1:]),
            )
            successes = sum(counts)
    mean = successes / trials
    std_error = math.sqrt(mean * (1.0 - mean) / trials)
    return EstimateWithError(mean, std_error, trials)


def exact_bl_success(n: int, c_squared: float, k: int) -> float:
    """Exact per-position success of the basic local strategy (no noise).

    Before the last position the guess is right iff the first rotated
    photon clicks immediately (probability ``1 - c^2``); at the last
    position both the click and the no-click record point to ``n``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if not 0.0 <= c_squared <= 1.0:
        raise ValueError(f"c_squared must lie in [0, 1], got {c_squared}")
    return 1.0 if k == n else 1.0 - c_squared


def exact_bi_success(n: int, c_squared: float, k: int) -> float:
    """Exact per-position success of the adaptive strategy (no noise).

    Walks every outcome string the adaptive agent can observe, carrying the
    exact path probability under the true change position, and accumulates
    the probability mass of the strings whose final guess is correct.  The
    tree has ``2^n`` leaves; ``n`` is capped to keep this affordable.
    """
    if n > EXACT_ENUMERATION_MAX_N:
        raise ValueError(
            f"exact enumeration needs 2^n paths; n={n} exceeds the cap of "
            f"{EXACT_ENUMERATION_MAX_N}"
        )
    config = SourceConfig(n=n, k=k, c_squared=c_squared)

    def walk(prior: PriorVector, prob: float) -> float:
        step = prior.step
        if step > n:
            return prob if guess_from_prior(prior) == k else 0.0
        p_h, p_phi = bi_hypothesis_weights(prior)
        meas = helstrom_measurement(p_h, p_phi, c_squared)
        p0, p1 = outcome_probabilities(config.state_at(step), meas)
        total = 0.0
        for outcome, p_out in ((0, p0), (1, p1)):
            if p_out > 0.0:
                total += walk(bi_update(prior, outcome, meas, c_squared), prob * p_out)
        return total

    return walk(PriorVector.uniform(n), 1.0)


def _sub_seed(master_seed: int, strategy_id: int, axis_index: int) -> int:
    """Independent child seed for one (strategy, axis point) cell."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(strategy_id, axis_index))
    return int(seq.generate_state(1, np.uint64)[0])


def _mc_rows(axis_value, strategies, n, c_squared, k, trials, epsilon, master_seed, axis_index, threads):
    rows = []
    estimates = {}
    for strategy in strategies:
        est = simulate_success(
            strategy,
            n,
            c_squared,
            k=k,
            trials=trials,
            epsilon=epsilon,
            master_seed=_sub_seed(master_seed, STRATEGY_IDS[strategy], axis_index),
            threads=threads,
        )
        estimates[strategy] = est
        rows.append(SweepRow(axis_value, strategy, est.mean, est.std_error, est.trials))
    return rows, estimates


def sweep_k(
    n: int,
    c_squared: float,
    trials_per_k: int = 20000,
    epsilon: float = 0.0,
    master_seed: int = 0,
    threads: int = 1,
    strategies=("BL", "BI"),
) -> SweepTable:
    """Success vs change position, with the optimal global reference.

    Emits one Monte Carlo row per (position, strategy) plus an ``SRM`` row
    per position carrying the exact per-position success of the optimal
    global measurement (zero standard error, zero trials).
    """
    rows = []
    srm_cond = srm_conditional_probabilities(n, c_squared)
    for k in range(1, n + 1):
        mc, _ = _mc_rows(
            float(k), strategies, n, c_squared, k, trials_per_k, epsilon,
            master_seed, k - 1, threads,
        )
        rows.extend(mc)
        rows.append(SweepRow(float(k), "SRM", float(srm_cond[k - 1]), 0.0, 0))
    return SweepTable("k", tuple(rows), epsilon, master_seed)


def sweep_overlap(
    n: int,
    grid=None,
    trials: int = 20000,
    epsilon: float = 0.0,
    master_seed: int = 0,
    threads: int = 1,
) -> SweepTable:
    """Position-averaged success vs squared overlap for all strategies.

    Monte Carlo rows for ``BL`` and ``BI`` are joined by two exact
    references per grid point: ``BL_theory`` (closed form) and ``SRM``
    (optimal global average).
    """
    grid = DEFAULT_OVERLAP_GRID if grid is None else tuple(grid)
    rows = []
    for i, c_squared in enumerate(grid):
        mc, _ = _mc_rows(
            float(c_squared), ("BL", "BI"), n, c_squared, None, trials,
            epsilon, master_seed, i, threads,
        )
        rows.extend(mc)
        rows.append(
            SweepRow(float(c_squared), "BL_theory", bl_success_closed_form(n, c_squared), 0.0, 0)
        )
        rows.append(
            SweepRow(float(c_squared), "SRM", srm_optimal_probability(n, c_squared), 0.0, 0)
        )
    return SweepTable("c_squared", tuple(rows), epsilon, master_seed)


def sweep_n(
    n_values,
    c_squared: float,
    trials: int = 20000,
    epsilon: float = 0.0,
    master_seed: int = 0,
    threads: int = 1,
) -> SweepTable:
    """Position-averaged success vs sequence length, with the BI-BL gap.

    For each length emits ``BL`` and ``BI`` Monte Carlo rows plus a
    ``BI_minus_BL`` row whose error combines both standard errors in
    quadrature.
    """
    rows = []
    for i, n in enumerate(n_values):
        mc, est = _mc_rows(
            float(n), ("BL", "BI"), int(n), c_squared, None, trials,
            epsilon, master_seed, i, threads,
        )
        rows.extend(mc)
        gap = est["BI"].mean - est["BL"].mean
        gap_se = math.hypot(est["BI"].std_error, est["BL"].std_error)
        rows.append(SweepRow(float(n), "BI_minus_BL", gap, gap_se, trials))
    return SweepTable("n", tuple(rows), epsilon, master_seed)


def distance_table(
    n: int,
    grid=None,
    trials: int = 20000,
    epsilon: float = 0.0,
    master_seed: int = 0,
    threads: int = 1,
) -> SweepTable:
    """Strategy separations vs squared overlap.

    Per grid point emits the ``BL``/``BI`` Monte Carlo rows, the exact
    ``SRM`` average, and two derived rows: ``BI_minus_BL`` (combined
    standard error) and ``SRM_minus_BI`` (the BI standard error, the SRM
    term being exact).
    """
    grid = DEFAULT_OVERLAP_GRID if grid is None else tuple(grid)
    rows = []
    for i, c_squared in enumerate(grid):
        mc, est = _mc_rows(
            float(c_squared), ("BL", "BI"), n, c_squared, None, trials,
            epsilon, master_seed, i, threads,
        )
        rows.extend(mc)
        srm = srm_optimal_probability(n, c_squared)
        rows.append(SweepRow(float(c_squared), "SRM", srm, 0.0, 0))
        gap = est["BI"].mean - est["BL"].mean
        gap_se = math.hypot(est["BI"].std_error, est["BL"].std_error)
        rows.append(SweepRow(float(c_squared), "BI_minus_BL", gap, gap_se, trials))
        rows.append(
            SweepRow(float(c_squared), "SRM_minus_BI", srm - est["BI"].mean, est["BI"].std_error, trials)
        )
    return SweepTable("c_squared", tuple(rows), epsilon, master_seed)


def write_sweep_csv(table: SweepTable, path) -> None:
    """Write a sweep as flat CSV with shortest round-trip float formatting."""
    lines = [SWEEP_CSV_HEADER]
    for row in table.rows:
        lines.append(
            ",".join(
                [
                    repr(float(row.axis)),
                    row.strategy,
                    repr(float(row.mean)),
                    repr(float(row.std_error)),
                    str(int(row.trials)),
                    repr(float(table.epsilon)),
                    str(int(table.master_seed)),
                ]
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sweep_csv(path) -> SweepTable:
    """Parse a sweep CSV written by :func:`write_sweep_csv`.

    Raises ``ValueError`` naming the offending line on malformed input.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != SWEEP_CSV_HEADER:
        raise ValueError(f"{path}: line 1: expected header {SWEEP_CSV_HEADER!r}")
    rows = []
    epsilon = 0.0
    seed = 0
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 7:
            raise ValueError(f"{path}: line {lineno}: expected 7 fields, got {len(parts)}")
        try:
            axis = float(parts[0])
            mean = float(parts[2])
            std_error = float(parts[3])
            trials = int(parts[4])
            epsilon = float(parts[5])
            seed = int(parts[6])
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: {exc}") from None
        rows.append(SweepRow(axis, parts[1], mean, std_error, trials))
    return SweepTable("axis", tuple(rows), epsilon, seed)


def sweep_to_json_dict(table: SweepTable) -> dict:
    """JSON-ready representation of a sweep table."""
    return {
        "axis_name": table.axis_name,
        "epsilon": table.epsilon,
        "seed": table.master_seed,
        "rows": [
            {
                "axis": row.axis,
                "strategy": row.strategy,
                "mean": row.mean,
                "std_error": row.std_error,
                "trials": row.trials,
            }
            for row in table.rows
        ],
    }
