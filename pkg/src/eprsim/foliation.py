"""Foliations as schedules of spacetime-volume increments.

A foliation enters the dynamics only through the order in which it sweeps
4-volume inside the two interaction regions, so a schedule is just an
ordered list of (region, d_omega) steps.  Reordering steps changes the
narrative of the evolution but never the per-region totals, which is what
the covariance checks exercise.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from .state import VolumePair

__all__ = [
    "Ordering",
    "FoliationStep",
    "FoliationSchedule",
    "uniform_schedule",
    "schedule_from_text",
]


class Ordering(str, enum.Enum):
    """How region-1 and region-2 steps are merged into one sequence."""

    REGION1_FIRST = "region1-first"
    REGION2_FIRST = "region2-first"
    INTERLEAVED = "interleaved"
    SEEDED_RANDOM = "seeded-random"


@dataclass(frozen=True)
class FoliationStep:
    """One advance of the surface: d_omega of 4-volume inside one region."""

    region: int
    d_omega: float

    def __post_init__(self):
        if self.region not in (1, 2):
            raise ValueError(f"region must be 1 or 2, got {self.region}")
        if not self.d_omega > 0.0:
            raise ValueError(f"d_omega must be positive, got {self.d_omega}")


@dataclass(frozen=True, eq=False)
class FoliationSchedule:
    """Ordered volume increments plus cached per-region partial sums."""

    steps: tuple[FoliationStep, ...]

    def __post_init__(self):
        steps = tuple(self.steps)
        regions = np.array([s.region for s in steps], dtype=np.int64)
        incr = np.array([s.d_omega for s in steps], dtype=np.float64)
        cum1 = np.zeros(len(steps) + 1)
        cum2 = np.zeros(len(steps) + 1)
        np.cumsum(np.where(regions == 1, incr, 0.0), out=cum1[1:])
        np.cumsum(np.where(regions == 2, incr, 0.0), out=cum2[1:])
        for arr in (regions, incr, cum1, cum2):
            arr.setflags(write=False)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "increments", incr)
        object.__setattr__(self, "_cum1", cum1)
        object.__setattr__(self, "_cum2", cum2)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def total1(self) -> float:
        return float(self._cum1[-1])

    @property
    def total2(self) -> float:
        return float(self._cum2[-1])

    @property
    def cumulative1(self) -> np.ndarray:
        """Region-1 partial sums, length len(steps)+1, starting at 0."""
        return self._cum1

    @property
    def cumulative2(self) -> np.ndarray:
        return self._cum2

    def volumes_after(self, k: int) -> VolumePair:
        """Per-region volume swept by the first k steps (0 <= k <= len)."""
        if not 0 <= k <= len(self.steps):
            raise IndexError(f"step index {k} out of range 0..{len(self.steps)}")
        return VolumePair(float(self._cum1[k]), float(self._cum2[k]))

    def final_volumes(self) -> VolumePair:
        return self.volumes_after(len(self.steps))

    def to_text(self) -> str:
        """Line-oriented `region d_omega` form, float round-trip safe."""
        return "".join(f"{s.region} {s.d_omega!r}\n" for s in self.steps)

    def write_text(self, fh: TextIO) -> None:
        fh.write(self.to_text())


def schedule_from_text(text: str) -> FoliationSchedule:
    """Parse the `region d_omega` line format produced by to_text()."""
    steps = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'region d_omega', got {line!r}")
        steps.append(FoliationStep(region=int(parts[0]), d_omega=float(parts[1])))
    return FoliationSchedule(steps=tuple(steps))


def _merge_evenly(n1: int, n2: int) -> list[int]:
    """Region sequence interleaving n1 ones and n2 twos as evenly as possible."""
    order = []
    i = j = 0
    while i < n1 or j < n2:
        if j >= n2 or (i < n1 and (i + 1) * n2 <= (j + 1) * n1):
            order.append(1)
            i += 1
        else:
            order.append(2)
            j += 1
    return order


def uniform_schedule(
    total1: float,
    total2: float,
    step_count: int,
    ordering: Ordering,
    seed: int | None = None,
) -> FoliationSchedule:
    """Schedule of equal-size steps reaching exactly (total1, total2).

    step_count is split between the regions in proportion to their totals;
    a region with zero total gets zero steps, and any region with positive
    total gets at least one (so the realized count can exceed step_count
    by one).  SEEDED_RANDOM shuffles the merged sequence and requires a
    seed.
    """
    if total1 < 0.0 or total2 < 0.0:
        raise ValueError("totals must be nonnegative")
    if step_count < 1:
        raise ValueError("step_count must be >= 1")

    if total1 == 0.0 and total2 == 0.0:
        return FoliationSchedule(steps=())
    if total1 == 0.0:
        n1, n2 = 0, step_count
    elif total2 == 0.0:
        n1, n2 = step_count, 0
    else:
        n1 = max(1, round(step_count * total1 / (total1 + total2)))
        n2 = max(1, step_count - n1)

    if ordering is Ordering.REGION1_FIRST:
        order = [1] * n1 + [2] * n2
    elif ordering is Ordering.REGION2_FIRST:
        order = [2] * n2 + [1] * n1
    elif ordering is Ordering.INTERLEAVED:
        order = _merge_evenly(n1, n2)
    elif ordering is Ordering.SEEDED_RANDOM:
        if seed is None:
            raise ValueError("seeded-random ordering requires a seed")
        order = [1] * n1 + [2] * n2
        np.random.default_rng(seed).shuffle(order)
    else:
        raise ValueError(f"unknown ordering {ordering!r}")

    d1 = total1 / n1 if n1 else 0.0
    d2 = total2 / n2 if n2 else 0.0
    steps = tuple(
        FoliationStep(region=r, d_omega=d1 if r == 1 else d2) for r in order
    )
    return FoliationSchedule(steps=steps)
