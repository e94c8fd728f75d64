"""Exact two-level state and measurement primitives.

Everything in this problem lives in the real span of the horizontal and
vertical polarization states, so states are real unit vectors, operators are
real symmetric 2x2 matrices, and measurements are pairs of orthogonal
projectors.  All arithmetic is plain float64; the module-level formula
helpers (`born_form`, `split_projector_entries`) are written so that scalar
and broadcast (array) evaluation produce bit-identical results, which the
Monte Carlo engine relies on for replayability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Absolute tolerance for structural checks (normalization, completeness,
# idempotence).  Values entering through public constructors are validated
# against this; internal constructions stay far below it.
ATOL = 1e-12


def born_form(m00, m01, m11, amp_h, amp_v):
    """Quadratic form <psi|M|psi> for a real symmetric M and real |psi>.

    Broadcastable: every argument may be a float or an ndarray.  The
    expression order is fixed; do not "simplify" it, replay depends on the
    exact sequence of roundings.
    """
    return m00 * amp_h * amp_h + 2.0 * m01 * amp_h * amp_v + m11 * amp_v * amp_v


def clip01(x):
    """Clamp a probability against rounding, scalar or array."""
    if isinstance(x, np.ndarray):
        return np.minimum(np.maximum(x, 0.0), 1.0)
    return min(max(x, 0.0), 1.0)


@dataclass(frozen=True)
class QubitState:
    """Real unit vector amp_h * |H> + amp_v * |V>."""

    amp_h: float
    amp_v: float

    def __post_init__(self):
        norm_sq = self.amp_h * self.amp_h + self.amp_v * self.amp_v
        if not math.isfinite(norm_sq) or abs(norm_sq - 1.0) > ATOL:
            raise ValueError(f"state ({self.amp_h}, {self.amp_v}) is not normalized")

    def as_array(self) -> np.ndarray:
        return np.array([self.amp_h, self.amp_v])

    def projector(self) -> "Operator2":
        return Operator2(
            self.amp_h * self.amp_h,
            self.amp_h * self.amp_v,
            self.amp_v * self.amp_v,
        )


H_STATE = QubitState(1.0, 0.0)
V_STATE = QubitState(0.0, 1.0)


def make_mutated_state(c_squared: float) -> QubitState:
    """The rotated state sqrt(c^2)|H> + sqrt(1-c^2)|V>.

    ``c_squared`` is the squared overlap with |H>; both amplitudes are taken
    real and non-negative.
    """
    if not 0.0 <= c_squared <= 1.0:
        raise ValueError(f"c_squared must lie in [0, 1], got {c_squared}")
    return QubitState(math.sqrt(c_squared), math.sqrt(1.0 - c_squared))


@dataclass(frozen=True)
class Operator2:
    """Real symmetric 2x2 operator, stored as the upper triangle."""

    m00: float
    m01: float
    m11: float

    @classmethod
    def identity(cls) -> "Operator2":
        return cls(1.0, 0.0, 1.0)

    @classmethod
    def zero(cls) -> "Operator2":
        return cls(0.0, 0.0, 0.0)

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.m00, self.m01], [self.m01, self.m11]])

    def trace(self) -> float:
        return self.m00 + self.m11

    def expectation(self, state: QubitState) -> float:
        """<state|self|state>, not clamped."""
        return born_form(self.m00, self.m01, self.m11, state.amp_h, state.amp_v)

    def __add__(self, other: "Operator2") -> "Operator2":
        return Operator2(self.m00 + other.m00, self.m01 + other.m01, self.m11 + other.m11)

    def __sub__(self, other: "Operator2") -> "Operator2":
        return Operator2(self.m00 - other.m00, self.m01 - other.m01, self.m11 - other.m11)


def _is_projector(op: Operator2) -> bool:
    # P is a projector iff P^2 == P entrywise (within ATOL).
    sq00 = op.m00 * op.m00 + op.m01 * op.m01
    sq01 = op.m01 * (op.m00 + op.m11)
    sq11 = op.m01 * op.m01 + op.m11 * op.m11
    return (
        abs(sq00 - op.m00) <= ATOL
        and abs(sq01 - op.m01) <= ATOL
        and abs(sq11 - op.m11) <= ATOL
    )


@dataclass(frozen=True)
class BinaryMeasurement:
    """Two-outcome projective measurement {pi_0, pi_1}.

    Constructor enforces that both elements are projectors and that they sum
    to the identity.  Rank-0 and rank-2 elements are allowed, so degenerate
    measurements like {I, 0} are representable.
    """

    pi_0: Operator2
    pi_1: Operator2

    def __post_init__(self):
        total = self.pi_0 + self.pi_1
        if (
            abs(total.m00 - 1.0) > ATOL
            or abs(total.m01) > ATOL
            or abs(total.m11 - 1.0) > ATOL
        ):
            raise ValueError("measurement elements do not sum to the identity")
        if not _is_projector(self.pi_0) or not _is_projector(self.pi_1):
            raise ValueError("measurement elements must be projectors")

    def element(self, outcome: int) -> Operator2:
        if outcome == 0:
            return self.pi_0
        if outcome == 1:
            return self.pi_1
        raise ValueError(f"outcome must be 0 or 1, got {outcome}")


def computational_basis() -> BinaryMeasurement:
    """The fixed {|H><H|, |V><V|} measurement."""
    return BinaryMeasurement(H_STATE.projector(), V_STATE.projector())


def eig2(m00, m01, m11):
    """Closed-form eigensystem of a real symmetric 2x2 matrix, broadcastable.

    Returns ``(lam1, lam2, a, b)`` with ``lam1 >= lam2`` and ``(a, b)`` the
    unit eigenvector of ``lam1``, sign-fixed so its first nonzero component
    is positive.  The second eigenvector is the quarter-turn ``(-b, a)``.
    """
    mid = 0.5 * (m00 + m11)
    half = 0.5 * (m00 - m11)
    disc = np.sqrt(half * half + m01 * m01)
    lam1 = mid + disc
    lam2 = mid - disc
    # Eigenvector of lam1.  The diagonal branch avoids 0/0; in the general
    # branch both candidate vectors have norm >= |m01| > 0.
    diag = m01 == 0.0
    upper = m00 >= m11
    vx = np.where(diag, np.where(upper, 1.0, 0.0), np.where(upper, lam1 - m11, m01))
    vy = np.where(diag, np.where(upper, 0.0, 1.0), np.where(upper, m01, lam1 - m00))
    norm = np.sqrt(vx * vx + vy * vy)
    a = vx / norm
    b = vy / norm
    flip = (a < 0.0) | ((a == 0.0) & (b < 0.0))
    sign = np.where(flip, -1.0, 1.0)
    return lam1, lam2, a * sign, b * sign


def eigen_sym2(op: Operator2):
    """Eigendecomposition of an Operator2.

    Returns two ``(eigenvalue, (vx, vy))`` pairs in descending eigenvalue
    order.  Both eigenvectors are unit length with their first nonzero
    component positive, so the output is fully deterministic.
    """
    lam1, lam2, a, b = eig2(op.m00, op.m01, op.m11)
    v2x, v2y = -float(b), float(a)
    if v2x < 0.0 or (v2x == 0.0 and v2y < 0.0):
        v2x, v2y = -v2x, -v2y
    return (
        (float(lam1), (float(a), float(b))),
        (float(lam2), (v2x, v2y)),
    )


def split_projector_entries(p_h, p_phi, c, s):
    """Entries of the two-outcome discrimination measurement, broadcastable.

    For weights ``p_h`` and ``p_phi``, the decision operator is

        Gamma = p_h |H><H| - p_phi |phi><phi|,   |phi> = c|H> + s|V>.

    Outcome 0 collects the eigenvectors with non-negative eigenvalue, outcome
    1 the rest.  "Non-negative" uses a relative threshold ``-1e-12 * (p_h +
    p_phi)`` so that an eigenvalue that is zero up to rounding lands in
    outcome 0 regardless of its sign bit.  Returns the six projector entries
    ``(pi0_00, pi0_01, pi0_11, pi1_00, pi1_01, pi1_11)``.
    """
    g00 = p_h - p_phi * (c * c)
    g01 = -(p_phi * (c * s))
    g11 = -(p_phi * (s * s))
    lam1, lam2, a, b = eig2(g00, g01, g11)
    thresh = -1e-12 * (p_h + p_phi)
    keep1 = lam1 >= thresh
    keep2 = lam2 >= thresh
    aa = a * a
    ab = a * b
    bb = b * b
    pi0_00 = np.where(keep1, aa, 0.0) + np.where(keep2, bb, 0.0)
    pi0_01 = np.where(keep1, ab, 0.0) + np.where(keep2, -ab, 0.0)
    pi0_11 = np.where(keep1, bb, 0.0) + np.where(keep2, aa, 0.0)
    pi1_00 = np.where(keep1, 0.0, aa) + np.where(keep2, 0.0, bb)
    pi1_01 = np.where(keep1, 0.0, ab) + np.where(keep2, 0.0, -ab)
    pi1_11 = np.where(keep1, 0.0, bb) + np.where(keep2, 0.0, aa)
    return pi0_00, pi0_01, pi0_11, pi1_00, pi1_01, pi1_11


def helstrom_measurement(p_h: float, p_phi: float, c_squared: float) -> BinaryMeasurement:
    """Minimum-error measurement for |H> vs the rotated state.

    ``p_h`` and ``p_phi`` are non-negative hypothesis weights (they need not
    sum to one); at least one must be positive.  Outcome 0 is the "still
    |H>" port, outcome 1 the "already rotated" port.  When one weight is
    zero the decision operator is semidefinite and one port degenerates to
    the zero projector.
    """
    if not (p_h >= 0.0 and p_phi >= 0.0):
        raise ValueError(f"weights must be non-negative, got ({p_h}, {p_phi})")
    if p_h + p_phi <= 0.0:
        raise ValueError("at least one hypothesis weight must be positive")
    if not 0.0 <= c_squared <= 1.0:
        raise ValueError(f"c_squared must lie in [0, 1], got {c_squared}")
    c = math.sqrt(c_squared)
    s = math.sqrt(1.0 - c_squared)
    e = split_projector_entries(p_h, p_phi, c, s)
    pi_0 = Operator2(float(e[0]), float(e[1]), float(e[2]))
    pi_1 = Operator2(float(e[3]), float(e[4]), float(e[5]))
    return BinaryMeasurement(pi_0, pi_1)


def outcome_probabilities(state: QubitState, measurement: BinaryMeasurement):
    """Born probabilities ``(p0, p1)`` of a measurement on a state.

    Each probability is evaluated from its own projector (p1 is not derived
    as 1 - p0) and clamped to [0, 1] against rounding.
    """
    p0 = clip01(measurement.pi_0.expectation(state))
    p1 = clip01(measurement.pi_1.expectation(state))
    return p0, p1
