"""Closed-form state evaluation for the two-particle collapse dynamics.

The entangled isospin pair is tracked in the eigenbasis of the two chosen
measurement directions (n1, n2), with slots ordered (++, +-, -+, --).
The collapse evolution multiplies each slot by exponential factors
exp(+-lam*xi - lam^2*omega), which overflow double precision long before
the state has fully reduced (lam^2*omega of a few hundred is routine), so
amplitude magnitudes are stored as logarithms (-inf meaning an exactly
zero amplitude) and every quadratic form is evaluated with the
max-log-subtraction idiom.

Slot phases are fixed by the singlet decomposition in the rotated basis
and never change: the evolution generators are real and diagonal here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "BASIS_LABELS",
    "SPIN_EIGENVALUES",
    "SPIN_PRODUCTS",
    "SINGLET_PHASES",
    "MeasurementFrame",
    "VolumePair",
    "StateAmplitudes",
    "singlet_initial",
    "closed_form_state",
    "log_norm_sq",
    "norm_sq",
    "spin_expectation",
    "projector_expectation",
    "joint_spin_expectation",
]

#: Slot order used everywhere in this package.
BASIS_LABELS = ("++", "+-", "-+", "--")

#: Row a-1 holds the n_a.S_a eigenvalue of each slot (a = 1, 2).
SPIN_EIGENVALUES = np.array(
    [
        [+0.5, +0.5, -0.5, -0.5],
        [+0.5, -0.5, +0.5, -0.5],
    ]
)
SPIN_EIGENVALUES.setflags(write=False)

#: Per-slot eigenvalue of the product (n1.S1)(n2.S2): +-1/4.
SPIN_PRODUCTS = SPIN_EIGENVALUES[0] * SPIN_EIGENVALUES[1]
SPIN_PRODUCTS.setflags(write=False)

#: Unit phases of the rotated singlet, slot order (++, +-, -+, --).
SINGLET_PHASES = np.array([-1j, 1.0, -1.0, 1j], dtype=np.complex128)
SINGLET_PHASES.setflags(write=False)


def _logsumexp(values: np.ndarray) -> float:
    """log(sum(exp(values))) with max subtraction; tolerates -inf entries."""
    m = values.max()
    if not np.isfinite(m):
        # all -inf: the sum is zero
        return -math.inf
    return float(m + np.log(np.exp(values - m).sum()))


@dataclass(frozen=True)
class MeasurementFrame:
    """Measurement geometry and coupling: theta is the angle between the
    two isospin measurement directions (n1.n2 = cos theta), coupling is the
    collapse strength lam.  Spacetime volumes carry units of 1/lam^2, so
    lam^2*omega is the dimensionless clock throughout."""

    theta: float
    coupling: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not self.coupling > 0.0:
            raise ValueError(f"coupling must be positive, got {self.coupling}")


@dataclass(frozen=True)
class VolumePair:
    """Spacetime 4-volumes swept inside the two interaction regions."""

    omega1: float
    omega2: float

    def __post_init__(self):
        if self.omega1 < 0.0 or self.omega2 < 0.0:
            raise ValueError(f"volumes must be nonnegative, got {self}")


@dataclass(frozen=True, eq=False)
class StateAmplitudes:
    """Unnormalized two-particle state in log-magnitude + fixed-phase form.

    log_mag holds log|amplitude| per slot (-inf allowed, +inf and nan are
    not); phase holds the four unit phase constants, which the dynamics
    never touches.
    """

    log_mag: np.ndarray
    phase: np.ndarray = field(default=SINGLET_PHASES)

    def __post_init__(self):
        lm = np.asarray(self.log_mag, dtype=np.float64)
        if lm.shape != (4,):
            raise ValueError(f"log_mag must have shape (4,), got {lm.shape}")
        if np.isnan(lm).any() or (lm == math.inf).any():
            raise ValueError("log_mag entries must be real or -inf")
        if not np.isfinite(lm).any():
            raise ValueError("state must have at least one finite log-magnitude")
        lm = lm.copy()
        lm.setflags(write=False)
        ph = np.asarray(self.phase, dtype=np.complex128)
        if ph.shape != (4,):
            raise ValueError(f"phase must have shape (4,), got {ph.shape}")
        ph = ph.copy()
        ph.setflags(write=False)
        object.__setattr__(self, "log_mag", lm)
        object.__setattr__(self, "phase", ph)

    def amplitudes(self) -> np.ndarray:
        """Linear-domain complex amplitudes (may overflow to inf)."""
        with np.errstate(over="ignore"):
            return np.exp(self.log_mag) * self.phase


@lru_cache(maxsize=128)
def _singlet_log_mag(theta: float) -> np.ndarray:
    half = 0.5 * theta
    mag = np.array(
        [math.sin(half), math.cos(half), math.cos(half), math.sin(half)]
    ) / math.sqrt(2.0)
    with np.errstate(divide="ignore"):
        lm = np.log(mag)
    lm.setflags(write=False)
    return lm


def singlet_initial(frame: MeasurementFrame) -> StateAmplitudes:
    """Isospin singlet expressed in the (n1, n2) eigenbasis.

    Amplitudes are (-i sin(t/2), cos(t/2), -cos(t/2), +i sin(t/2)) / sqrt(2)
    with t = frame.theta; the squared norm is 1.
    """
    return StateAmplitudes(log_mag=_singlet_log_mag(frame.theta))


def closed_form_state(
    frame: MeasurementFrame, xi1: float, xi2: float, vol: VolumePair
) -> StateAmplitudes:
    """Exact unnormalized state after accumulating (xi1, xi2) over vol.

    Each slot of the initial singlet is multiplied by
    exp(2*lam*e1*xi1 - lam^2*omega1) * exp(2*lam*e2*xi2 - lam^2*omega2)
    where e_a = +-1/2 is the slot's n_a.S_a eigenvalue.  Phases are
    untouched.
    """
    lam = frame.coupling
    shift = (
        2.0 * lam * (SPIN_EIGENVALUES[0] * xi1 + SPIN_EIGENVALUES[1] * xi2)
        - lam * lam * (vol.omega1 + vol.omega2)
    )
    return StateAmplitudes(log_mag=_singlet_log_mag(frame.theta) + shift)


def log_norm_sq(state: StateAmplitudes) -> float:
    """log of the squared norm, computed as logsumexp over 2*log_mag."""
    return _logsumexp(2.0 * state.log_mag)


def norm_sq(state: StateAmplitudes) -> float:
    """Squared norm in linear domain (inf when not representable)."""
    with np.errstate(over="ignore"):
        return float(np.exp(log_norm_sq(state)))


def _slot_weights(state: StateAmplitudes) -> np.ndarray:
    """Relative slot probabilities exp(2*(log_mag - max)); sum is O(1)."""
    two_lm = 2.0 * state.log_mag
    m = two_lm.max()
    if not np.isfinite(m):
        raise ValueError("degenerate state: all amplitudes are zero")
    return np.exp(two_lm - m)


def spin_expectation(state: StateAmplitudes, particle: int) -> float:
    """Normalized expectation of n_a.S_a for particle a in {1, 2}."""
    if particle not in (1, 2):
        raise ValueError(f"particle must be 1 or 2, got {particle}")
    w = _slot_weights(state)
    return float((SPIN_EIGENVALUES[particle - 1] * w).sum() / w.sum())


def projector_expectation(state: StateAmplitudes, particle: int, sign: int) -> float:
    """Normalized expectation of the +-1/2 projector for one particle.

    Satisfies <P+> + <P-> = 1 and <S> = (<P+> - <P->)/2.
    """
    if particle not in (1, 2):
        raise ValueError(f"particle must be 1 or 2, got {particle}")
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    w = _slot_weights(state)
    mask = SPIN_EIGENVALUES[particle - 1] == 0.5 * sign
    return float(w[mask].sum() / w.sum())


def joint_spin_expectation(state: StateAmplitudes) -> float:
    """Normalized expectation of the product (n1.S1)(n2.S2) in [-1/4, 1/4]."""
    w = _slot_weights(state)
    return float((SPIN_PRODUCTS * w).sum() / w.sum())
