"""Physical-measure sampling of outcomes and information processes.

Under the physical measure the accessible signal at each wing is
xi_a = 4*lam*s_a*omega_a + B_a: a hidden outcome variable s_a = +-1/2
scaled by the volume clock, obscured by an independent Brownian noise B_a
running on the same clock.  The joint law of (s1, s2) depends only on the
angle theta between the measurement directions:

    P(s1=+1/2, s2=-1/2) = P(s1=-1/2, s2=+1/2) = cos^2(theta/2) / 2
    P(s1=+1/2, s2=+1/2) = P(s1=-1/2, s2=-1/2) = sin^2(theta/2) / 2

Cells are indexed in the same (++, +-, -+, --) order as the state slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TextIO

import numpy as np

from .foliation import FoliationSchedule
from .state import MeasurementFrame, VolumePair

__all__ = [
    "CELLS",
    "HiddenOutcome",
    "InformationPath",
    "joint_distribution",
    "sample_outcome",
    "sample_outcome_by_marginal",
    "marginal_of_s1",
    "conditional_s2_given_s1",
    "cell_index",
    "sample_information_path",
]

#: (s1, s2) per cell, same order as the state slots (++, +-, -+, --).
CELLS = ((+0.5, +0.5), (+0.5, -0.5), (-0.5, +0.5), (-0.5, -0.5))


@dataclass(frozen=True)
class HiddenOutcome:
    """The pair of hidden outcome variables; not directly observable."""

    s1: float
    s2: float

    def __post_init__(self):
        if self.s1 not in (0.5, -0.5) or self.s2 not in (0.5, -0.5):
            raise ValueError(f"outcomes must be +-1/2, got {self}")


def cell_index(outcome: HiddenOutcome) -> int:
    """Slot index of an outcome in the canonical cell order."""
    return CELLS.index((outcome.s1, outcome.s2))


@lru_cache(maxsize=128)
def _joint_and_cdf(theta: float) -> tuple[np.ndarray, np.ndarray]:
    s2h = math.sin(0.5 * theta) ** 2
    c2h = math.cos(0.5 * theta) ** 2
    probs = 0.5 * np.array([s2h, c2h, c2h, s2h])
    cdf = np.cumsum(probs)
    probs.setflags(write=False)
    cdf.setflags(write=False)
    return probs, cdf


def joint_distribution(frame: MeasurementFrame) -> np.ndarray:
    """The four cell probabilities, in slot order."""
    return _joint_and_cdf(frame.theta)[0]


def sample_outcome(frame: MeasurementFrame, rng: np.random.Generator) -> HiddenOutcome:
    """Draw (s1, s2) jointly from the theta table (one uniform)."""
    u = rng.random()
    idx = int(np.searchsorted(_joint_and_cdf(frame.theta)[1], u, side="right"))
    idx = min(idx, 3)
    return HiddenOutcome(*CELLS[idx])


def marginal_of_s1(frame: MeasurementFrame) -> float:
    """P(s1 = +1/2); equal to 1/2 for every theta (no signalling)."""
    probs = joint_distribution(frame)
    return float(probs[0] + probs[1])


def conditional_s2_given_s1(frame: MeasurementFrame, s1: float) -> dict[float, float]:
    """Distribution of s2 given s1, as {+0.5: p, -0.5: 1-p}."""
    if s1 not in (0.5, -0.5):
        raise ValueError(f"s1 must be +-1/2, got {s1}")
    s2h = math.sin(0.5 * frame.theta) ** 2
    p_same_sign = s2h  # P(s2 = s1 | s1)
    if s1 == 0.5:
        return {+0.5: p_same_sign, -0.5: 1.0 - p_same_sign}
    return {+0.5: 1.0 - p_same_sign, -0.5: p_same_sign}


def sample_outcome_by_marginal(
    frame: MeasurementFrame, rng: np.random.Generator, first: int = 1
) -> HiddenOutcome:
    """Draw s_first from its marginal, then the other from its conditional.

    This is the bookkeeping used when one wing's measurement completes
    before the other experimenter has even chosen a direction; the joint
    law is the same as sample_outcome, which the tests verify.
    """
    if first not in (1, 2):
        raise ValueError(f"first must be 1 or 2, got {first}")
    s_first = 0.5 if rng.random() < 0.5 else -0.5
    # conditional table is symmetric under swapping the particle labels
    cond = conditional_s2_given_s1(frame, s_first)
    s_second = 0.5 if rng.random() < cond[0.5] else -0.5
    if first == 1:
        return HiddenOutcome(s1=s_first, s2=s_second)
    return HiddenOutcome(s1=s_second, s2=s_first)


@dataclass(frozen=True, eq=False)
class InformationPath:
    """Realized (B, xi) trajectories along a schedule, plus the hidden
    outcome that generated them.  Arrays have length len(schedule)+1 and
    start at zero; entry k is the value on the surface after k steps."""

    schedule: FoliationSchedule
    b1: np.ndarray
    b2: np.ndarray
    xi1: np.ndarray
    xi2: np.ndarray
    hidden: HiddenOutcome | None = None

    def __post_init__(self):
        n = len(self.schedule) + 1
        for name in ("b1", "b2", "xi1", "xi2"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def volumes_at(self, k: int) -> VolumePair:
        return self.schedule.volumes_after(k)

    def write_csv(self, fh: TextIO) -> None:
        """Debug dump: step 0 is the initial surface (region column 0)."""
        fh.write("step,region,omega1,omega2,B1,B2,xi1,xi2\n")
        regions = self.schedule.regions
        for k in range(len(self.b1)):
            region = 0 if k == 0 else int(regions[k - 1])
            vol = self.schedule.volumes_after(k)
            fh.write(
                f"{k},{region},{vol.omega1!r},{vol.omega2!r},"
                f"{self.b1[k]!r},{self.b2[k]!r},{self.xi1[k]!r},{self.xi2[k]!r}\n"
            )


def sample_information_path(
    frame: MeasurementFrame,
    outcome: HiddenOutcome,
    schedule: FoliationSchedule,
    rng: np.random.Generator,
) -> InformationPath:
    """Sample Brownian noise along the schedule and form xi = 4*lam*s*omega + B.

    Exactly one region's noise moves per step, with increment variance
    d_omega; the draw sequence (one normal per step, in schedule order) is
    fixed so a given generator state reproduces the path exactly.
    """
    n = len(schedule)
    noise = rng.normal(size=n) * np.sqrt(schedule.increments)
    in_r1 = schedule.regions == 1
    b1 = np.zeros(n + 1)
    b2 = np.zeros(n + 1)
    np.cumsum(np.where(in_r1, noise, 0.0), out=b1[1:])
    np.cumsum(np.where(in_r1, 0.0, noise), out=b2[1:])
    lam = frame.coupling
    xi1 = 4.0 * lam * outcome.s1 * schedule.cumulative1 + b1
    xi2 = 4.0 * lam * outcome.s2 * schedule.cumulative2 + b2
    return InformationPath(
        schedule=schedule, b1=b1, b2=b2, xi1=xi1, xi2=xi2, hidden=outcome
    )
