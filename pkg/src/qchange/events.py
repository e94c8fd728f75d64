"""Timestamped detection events and coincidence postselection.

A heralded-pair source drives the photon stream: each emitted pair puts one
photon on the idler channel and its partner through the measurement optics
onto one of two signal channels (H for outcome 0, V for outcome 1).  A
trigger pulse marks the start of each run; a chopper divides the run into
equal time bins, one per photon of the block.

This module can synthesize such event records (including uniform background
singles on the detector channels), write and parse them as CSV, and reduce
them to per-bin binary outcomes with the same strict-window coincidence
logic used on real counting hardware.  All timestamps are integer
nanoseconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .qubit import BinaryMeasurement, computational_basis, helstrom_measurement, outcome_probabilities
from .strategies import (
    ImpossibleOutcomeError,
    PriorVector,
    SourceConfig,
    TrialRecord,
    bi_update,
    bl_guess,
)


class Channel(str, Enum):
    """Detector channels as they appear in event CSV files."""

    TRIGGER = "TRIG"
    IDLER = "IDLER"
    SIGNAL_H = "H"
    SIGNAL_V = "V"


# Fixed tie-break order for events sharing a timestamp.
_CHANNEL_RANK = {
    Channel.TRIGGER: 0,
    Channel.IDLER: 1,
    Channel.SIGNAL_H: 2,
    Channel.SIGNAL_V: 3,
}

EVENTS_CSV_HEADER = "channel,timestamp_ns"


class StreamFormatError(ValueError):
    """Malformed event CSV; carries the 1-based offending line number."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}: line {line}: {message}")
        self.path = path
        self.line = line


class InvalidTrialError(RuntimeError):
    """A time bin contained no effective event, voiding the whole trial."""

    def __init__(self, bin_index: int):
        super().__init__(f"bin {bin_index} has no effective event")
        self.bin_index = bin_index


@dataclass(frozen=True)
class DetectionEvent:
    channel: Channel
    timestamp_ns: int

    def __post_init__(self):
        object.__setattr__(self, "timestamp_ns", int(self.timestamp_ns))
        if self.timestamp_ns < 0:
            raise ValueError(f"timestamp must be >= 0, got {self.timestamp_ns}")
        if not isinstance(self.channel, Channel):
            object.__setattr__(self, "channel", Channel(self.channel))


@dataclass(frozen=True)
class TimingConfig:
    """Clock layout of one run, in integer nanoseconds.

    Defaults describe the reference apparatus: a 100 ms trigger period, a
    5 ms chopper period per photon slot, a 2.5 ms acceptance bin inside each
    slot, a 3 ns coincidence window, and 20 slots.
    """

    trigger_interval_ns: int = 100_000_000
    chopper_period_ns: int = 5_000_000
    bin_width_ns: int = 2_500_000
    coincidence_window_ns: int = 3
    n_bins: int = 20

    def __post_init__(self):
        for name in (
            "trigger_interval_ns",
            "chopper_period_ns",
            "bin_width_ns",
            "coincidence_window_ns",
            "n_bins",
        ):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ValueError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
        if self.bin_width_ns > self.chopper_period_ns:
            raise ValueError("bin_width_ns cannot exceed chopper_period_ns")
        if self.n_bins * self.chopper_period_ns > self.trigger_interval_ns:
            raise ValueError("bins do not fit inside the trigger interval")

    def bin_bounds(self, trigger_ns: int, bin_index: int):
        """Acceptance window of a bin as ``(lo, hi]`` absolute times."""
        if not 1 <= bin_index <= self.n_bins:
            raise ValueError(f"bin_index must lie in [1, {self.n_bins}], got {bin_index}")
        lo = trigger_ns + (bin_index - 1) * self.chopper_period_ns
        return lo, lo + self.bin_width_ns


@dataclass(frozen=True)
class BinOutcome:
    """Postselected result of one time bin.

    ``outcome`` is 0/1 for an effective detection and ``None`` for an empty
    bin; ``timestamp_ns`` is the selected signal event's time, present
    exactly when the outcome is.
    """

    bin_index: int
    outcome: "int | None"
    timestamp_ns: "int | None"

    def __post_init__(self):
        if self.bin_index < 1:
            raise ValueError(f"bin_index must be >= 1, got {self.bin_index}")
        if self.outcome not in (0, 1, None):
            raise ValueError(f"outcome must be 0, 1 or None, got {self.outcome!r}")
        if (self.outcome is None) != (self.timestamp_ns is None):
            raise ValueError("timestamp must be present exactly when the outcome is")


class Classification(Enum):
    """Verdict on an idler event's signal-side partners."""

    OUTCOME_ZERO = 0
    OUTCOME_ONE = 1
    NOT_EFFECTIVE = 2


def coincident(t_a: int, t_b: int, window_ns: int) -> bool:
    """Strict-window coincidence: |t_a - t_b| < window, never ==."""
    return abs(int(t_a) - int(t_b)) < window_ns


def _any_within(sorted_times: np.ndarray, t: int, window_ns: int) -> bool:
    # Integer times: |x - t| < w  <=>  x in [t - w + 1, t + w - 1].
    lo = np.searchsorted(sorted_times, t - window_ns + 1, side="left")
    hi = np.searchsorted(sorted_times, t + window_ns - 1, side="right")
    return hi > lo


def classify_effective(idler_ns: int, h_times, v_times, window_ns: int) -> Classification:
    """Classify one idler event against sorted H and V signal times.

    An idler heralds outcome 0 when it is coincident with an H event and
    with no V event, outcome 1 in the mirrored case.  Coincidence with both
    (or neither) is not an effective event: the pairing is ambiguous or
    absent.
    """
    h_times = np.asarray(h_times)
    v_times = np.asarray(v_times)
    near_h = _any_within(h_times, int(idler_ns), window_ns)
    near_v = _any_within(v_times, int(idler_ns), window_ns)
    if near_h and not near_v:
        return Classification.OUTCOME_ZERO
    if near_v and not near_h:
        return Classification.OUTCOME_ONE
    return Classification.NOT_EFFECTIVE


def _split_channels(events):
    """Sorted per-channel timestamp arrays from an event sequence."""
    by_channel = {ch: [] for ch in Channel}
    for ev in events:
        by_channel[ev.channel].append(ev.timestamp_ns)
    return {ch: np.sort(np.asarray(ts, dtype=np.int64)) for ch, ts in by_channel.items()}


def _first_effective(candidates, idler_times, h_times, v_times, window_ns):
    """First effective (outcome, timestamp) among in-bin signal candidates.

    ``candidates`` is an iterable of signal timestamps in time order.  A
    candidate is effective when some coincident idler classifies as a
    definite outcome; the classification verdict supplies the outcome bit.
    """
    for t in candidates:
        lo = np.searchsorted(idler_times, t - window_ns + 1, side="left")
        hi = np.searchsorted(idler_times, t + window_ns - 1, side="right")
        for idler_t in idler_times[lo:hi]:
            verdict = classify_effective(int(idler_t), h_times, v_times, window_ns)
            if verdict is not Classification.NOT_EFFECTIVE:
                return verdict.value, int(t)
    return None


def postselect_bins(events, config: TimingConfig):
    """Reduce an event record to per-bin outcomes, one list per trigger.

    For each trigger and each bin, signal events inside the acceptance
    window ``(T, T + bin_width]`` are examined in time order and the first
    effective one fixes the bin outcome; a bin with none yields an empty
    :class:`BinOutcome`.  Events may be passed in any order; channels are
    sorted internally.
    """
    split = _split_channels(events)
    idler = split[Channel.IDLER]
    h_times = split[Channel.SIGNAL_H]
    v_times = split[Channel.SIGNAL_V]
    signal = np.concatenate([h_times, v_times])
    signal.sort(kind="stable")
    w = config.coincidence_window_ns
    per_trigger = []
    for trigger_ns in split[Channel.TRIGGER]:
        bins = []
        for bin_index in range(1, config.n_bins + 1):
            lo, hi = config.bin_bounds(int(trigger_ns), bin_index)
            a = np.searchsorted(signal, lo, side="right")  # t > lo
            b = np.searchsorted(signal, hi, side="right")  # t <= hi
            hit = _first_effective(signal[a:b], idler, h_times, v_times, w)
            if hit is None:
                bins.append(BinOutcome(bin_index, None, None))
            else:
                bins.append(BinOutcome(bin_index, hit[0], hit[1]))
        per_trigger.append(bins)
    return per_trigger


def _emit_bin(rng, timing: TimingConfig, basis: BinaryMeasurement, state,
              trigger_ns: int, bin_index: int, pairs_per_bin: float,
              background_per_ms: float):
    """Raw (timestamp, channel) list for one bin: pairs, then background.

    Pair placement keeps a full coincidence window of headroom inside the
    acceptance window, so every generated signal stays in its bin even at
    the extreme jitter values.  Background singles cover the bin's whole
    chopper slot on the idler and both signal channels.
    """
    w = timing.coincidence_window_ns
    lo, hi = timing.bin_bounds(trigger_ns, bin_index)
    if hi - lo < 2 * w + 1:
        raise ValueError(
            f"bin width {timing.bin_width_ns} too small for coincidence window {w}"
        )
    raw = []
    base = int(math.floor(pairs_per_bin))
    frac = pairs_per_bin - base
    n_pairs = base + (1 if frac > 0.0 and rng.random() < frac else 0)
    p0, _ = outcome_probabilities(state, basis)
    for _ in range(n_pairs):
        idler_t = int(rng.integers(lo + 1 + w, hi - w + 1))
        jitter = int(rng.integers(1 - w, w))
        channel = Channel.SIGNAL_H if rng.random() < p0 else Channel.SIGNAL_V
        raw.append((idler_t, Channel.IDLER))
        raw.append((idler_t + jitter, channel))
    if background_per_ms > 0.0:
        slot_lo = trigger_ns + (bin_index - 1) * timing.chopper_period_ns
        slot_hi = slot_lo + timing.chopper_period_ns
        mean = background_per_ms * (slot_hi - slot_lo) / 1e6
        for channel in (Channel.IDLER, Channel.SIGNAL_H, Channel.SIGNAL_V):
            count = int(rng.poisson(mean))
            for t in rng.integers(slot_lo, slot_hi, size=count):
                raw.append((int(t), channel))
    return raw


def _normalize_bases(bases, n_bins: int):
    if bases is None:
        return [computational_basis()] * n_bins
    if isinstance(bases, BinaryMeasurement):
        return [bases] * n_bins
    bases = list(bases)
    if len(bases) != n_bins:
        raise ValueError(f"expected {n_bins} bases, got {len(bases)}")
    return bases


def generate_stream(
    timing: TimingConfig,
    source: SourceConfig,
    rng: np.random.Generator,
    bases=None,
    pairs_per_bin: float = 1.0,
    background_per_ms: float = 0.0,
    n_triggers: int = 1,
):
    """Synthesize a time-sorted event record for fixed measurement bases.

    ``bases`` may be ``None`` (fixed {|H>,|V>} everywhere), one measurement
    for all bins, or a per-bin sequence.  ``pairs_per_bin`` may be
    fractional: the integer part is emitted always, the remainder as a
    Bernoulli extra pair.  Each trigger spans ``source.n`` bins, one per
    photon of the block.  Adaptive strategies cannot be generated this way;
    use :func:`run_strategy_on_stream`, which interleaves generation and
    measurement choice.
    """
    if timing.n_bins != source.n:
        raise ValueError(
            f"timing has {timing.n_bins} bins but the source block has {source.n} photons"
        )
    if pairs_per_bin < 0.0 or background_per_ms < 0.0:
        raise ValueError("rates must be non-negative")
    if n_triggers < 1:
        raise ValueError(f"n_triggers must be >= 1, got {n_triggers}")
    bases = _normalize_bases(bases, timing.n_bins)
    raw = []
    for m in range(n_triggers):
        trigger_ns = m * timing.trigger_interval_ns
        raw.append((trigger_ns, Channel.TRIGGER))
        for bin_index in range(1, timing.n_bins + 1):
            raw.extend(
                _emit_bin(
                    rng, timing, bases[bin_index - 1], source.state_at(bin_index),
                    trigger_ns, bin_index, pairs_per_bin, background_per_ms,
                )
            )
    raw.sort(key=lambda tc: (tc[0], _CHANNEL_RANK[tc[1]]))
    return [DetectionEvent(channel, t) for t, channel in raw]


def run_strategy_on_stream(
    strategy: str,
    timing: TimingConfig,
    source: SourceConfig,
    rng: np.random.Generator,
    pairs_per_bin: float = 1.0,
    background_per_ms: float = 0.0,
    strict: bool = False,
    seed: int = 0,
) -> TrialRecord:
    """One full trial driven through the event pipeline, bin by bin.

    Generation and measurement are interleaved so adaptive strategies see
    each bin's outcome before choosing the next basis.  A bin without an
    effective event raises :class:`InvalidTrialError` (the trial is void,
    not wrong).  With ``strict`` the adaptive update raises
    :class:`~qchange.strategies.ImpossibleOutcomeError` on outcomes the
    ideal model rules out (background can produce them); otherwise such
    steps leave the prior unchanged, as in direct simulation.
    """
    if strategy not in ("BL", "BI"):
        raise ValueError(f"unknown strategy {strategy!r}; expected 'BL' or 'BI'")
    if timing.n_bins != source.n:
        raise ValueError(
            f"timing has {timing.n_bins} bins but the source block has {source.n} photons"
        )
    n = source.n
    w = timing.coincidence_window_ns
    trigger_ns = 0
    eta = np.full(n, 1.0 / n)
    history = [PriorVector(eta.copy(), 1)]
    outcomes = []
    bases = []
    for bin_index in range(1, n + 1):
        if strategy == "BI":
            p_phi = float(eta[:bin_index].max())
            p_h = float(eta[bin_index:].max()) if bin_index < n else 0.0
            basis = helstrom_measurement(p_h, p_phi, source.c_squared)
        else:
            basis = computational_basis()
        bases.append(basis)
        raw = _emit_bin(
            rng, timing, basis, source.state_at(bin_index), trigger_ns,
            bin_index, pairs_per_bin, background_per_ms,
        )
        raw.sort(key=lambda tc: (tc[0], _CHANNEL_RANK[tc[1]]))
        lo, hi = timing.bin_bounds(trigger_ns, bin_index)
        idler = np.sort(np.asarray(
            [t for t, ch in raw if ch is Channel.IDLER], dtype=np.int64))
        h_times = np.sort(np.asarray(
            [t for t, ch in raw if ch is Channel.SIGNAL_H], dtype=np.int64))
        v_times = np.sort(np.asarray(
            [t for t, ch in raw if ch is Channel.SIGNAL_V], dtype=np.int64))
        candidates = [t for t, ch in raw
                      if ch in (Channel.SIGNAL_H, Channel.SIGNAL_V) and lo < t <= hi]
        hit = _first_effective(sorted(candidates), idler, h_times, v_times, w)
        if hit is None:
            raise InvalidTrialError(bin_index)
        outcome = hit[0]
        outcomes.append(outcome)
        if strategy == "BI":
            try:
                eta = bi_update(
                    PriorVector(eta.copy(), bin_index), outcome, basis, source.c_squared
                ).eta
            except ImpossibleOutcomeError:
                if strict:
                    raise
                # Background flipped the record onto a port the ideal model
                # rules out; discard the reading and keep the prior.
            history.append(PriorVector(eta.copy(), bin_index + 1))
    if strategy == "BI":
        guess = int(np.argmax(eta)) + 1
        prior_history = tuple(history)
    else:
        guess = bl_guess(outcomes, n)
        prior_history = ()
    return TrialRecord(
        config=source,
        strategy=strategy,
        outcomes=tuple(outcomes),
        bases=tuple(bases),
        prior_history=prior_history,
        guess=guess,
        success=guess == source.k,
        seed=seed,
    )


def write_events_csv(events, path) -> None:
    """Write events as ``channel,timestamp_ns`` rows in the given order."""
    lines = [EVENTS_CSV_HEADER]
    for ev in events:
        lines.append(f"{ev.channel.value},{ev.timestamp_ns}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_events_csv(path):
    """Parse an event CSV, enforcing the on-disk contract.

    The header must match exactly; channels must be known; timestamps must
    be non-negative integers in non-decreasing order.  Violations raise
    :class:`StreamFormatError` naming the offending line.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != EVENTS_CSV_HEADER:
        raise StreamFormatError(path, 1, f"expected header {EVENTS_CSV_HEADER!r}")
    events = []
    last_t = -1
    valid = {ch.value for ch in Channel}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise StreamFormatError(path, lineno, f"expected 2 fields, got {len(parts)}")
        channel_code, t_text = parts
        if channel_code not in valid:
            raise StreamFormatError(path, lineno, f"unknown channel {channel_code!r}")
        try:
            t = int(t_text)
        except ValueError:
            raise StreamFormatError(path, lineno, f"bad timestamp {t_text!r}") from None
        if t < 0:
            raise StreamFormatError(path, lineno, f"negative timestamp {t}")
        if t < last_t:
            raise StreamFormatError(
                path, lineno, f"timestamps must be non-decreasing ({t} after {last_t})"
            )
        last_t = t
        events.append(DetectionEvent(Channel(channel_code), t))
    return events


def write_bin_outcomes_csv(per_trigger, path) -> None:
    """Write postselected bins as ``trigger_index,bin_index,outcome,timestamp_ns``.

    Empty bins leave the outcome and timestamp fields blank.
    """
    lines = ["trigger_index,bin_index,outcome,timestamp_ns"]
    for trigger_index, bins in enumerate(per_trigger):
        for bo in bins:
            if bo.outcome is None:
                lines.append(f"{trigger_index},{bo.bin_index},,")
            else:
                lines.append(f"{trigger_index},{bo.bin_index},{bo.outcome},{bo.timestamp_ns}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
