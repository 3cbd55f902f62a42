"""Collapse dynamics under the Q-measure and the state-norm measure change.

The unnormalized state obeys a linear diagonal SDE: while the surface
advances through region a, every slot amplitude picks up
d(amp) = (2*lam*e_slot*d_xi - lam^2/2 * d_omega) * amp, with e_slot the
slot's n_a.S_a eigenvalue and d_xi a Q-Brownian increment of variance
d_omega.  Two integrators are provided:

* sde_step / integrate_q - the Euler-Maruyama form, kept to demonstrate
  the differential equation directly and to measure strong convergence;
* exact_step / exact_q_evolve - per-step multiplication by
  exp(2*lam*e*d_xi - lam^2*d_omega), which solves the SDE exactly for any
  step size because the generators commute.

The squared state norm is a positive Q-martingale and acts as the
Radon-Nikodym weight re-expressing physical expectations as weighted
Q-averages (importance_average).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np

from .foliation import FoliationSchedule
from .state import (
    SPIN_EIGENVALUES,
    MeasurementFrame,
    StateAmplitudes,
    singlet_initial,
)

__all__ = [
    "StepSizeError",
    "SdeTrajectory",
    "sde_step",
    "exact_step",
    "integrate_q",
    "exact_q_evolve",
    "importance_average",
]


class StepSizeError(RuntimeError):
    """An Euler-Maruyama step produced a nonpositive magnitude multiplier.

    This happens with probability ~exp(-1/(2*lam^2*d_omega)) per step when
    |d_xi| is several standard deviations; the documented recovery is for
    the caller to halve d_omega and retry with a refined noise path.
    Clamping instead would silently bias the measure change.
    """


@dataclass(frozen=True, eq=False)
class SdeTrajectory:
    """State history along a schedule: log-magnitudes, norms and the
    cumulative driving processes, one row per surface (len(schedule)+1)."""

    schedule: FoliationSchedule
    log_mags: np.ndarray  # (n+1, 4)
    log_norms: np.ndarray  # (n+1,)
    xi1: np.ndarray  # (n+1,)
    xi2: np.ndarray  # (n+1,)

    def __post_init__(self):
        n = len(self.schedule) + 1
        lm = np.asarray(self.log_mags, dtype=np.float64)
        if lm.shape != (n, 4):
            raise ValueError(f"log_mags must have shape ({n}, 4), got {lm.shape}")
        lm = lm.copy()
        lm.setflags(write=False)
        object.__setattr__(self, "log_mags", lm)
        for name in ("log_norms", "xi1", "xi2"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.schedule)

    def state_at(self, k: int) -> StateAmplitudes:
        return StateAmplitudes(log_mag=self.log_mags[k])

    def norm_sq_at(self, k: int) -> float:
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_norms[k]))

    @property
    def log_weight(self) -> float:
        """Log of the importance weight (the final squared norm)."""
        return float(self.log_norms[-1])

    @property
    def weight(self) -> float:
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_norms[-1]))

    def write_csv(self, fh: TextIO) -> None:
        """Same layout as InformationPath.write_csv plus a norm_sq column;
        B columns are left empty (no hidden decomposition in Q-sampling)."""
        fh.write("step,region,omega1,omega2,B1,B2,xi1,xi2,norm_sq\n")
        regions = self.schedule.regions
        for k in range(len(self.log_norms)):
            region = 0 if k == 0 else int(regions[k - 1])
            vol = self.schedule.volumes_after(k)
            fh.write(
                f"{k},{region},{vol.omega1!r},{vol.omega2!r},,,"
                f"{self.xi1[k]!r},{self.xi2[k]!r},{self.norm_sq_at(k)!r}\n"
            )


def _log_norms_from(log_mags: np.ndarray) -> np.ndarray:
    """Row-wise logsumexp of 2*log_mags with max subtraction."""
    two = 2.0 * log_mags
    m = two.max(axis=1)
    with np.errstate(invalid="ignore"):
        return m + np.log(np.exp(two - m[:, None]).sum(axis=1))


def sde_step(
    state: StateAmplitudes,
    frame: MeasurementFrame,
    region: int,
    d_omega: float,
    d_xi: float,
) -> StateAmplitudes:
    """One Euler-Maruyama step while the surface crosses `region`.

    Every slot is scaled by 1 + 2*lam*e*d_xi - lam^2/2*d_omega, with e the
    slot's eigenvalue for the active region's particle.  Raises
    StepSizeError if a finite slot would be scaled by a nonpositive
    factor.
    """
    if region not in (1, 2):
        raise ValueError(f"region must be 1 or 2, got {region}")
    if not d_omega > 0.0:
        raise ValueError(f"d_omega must be positive, got {d_omega}")
    lam = frame.coupling
    mult = 1.0 + 2.0 * lam * SPIN_EIGENVALUES[region - 1] * d_xi - 0.5 * lam * lam * d_omega
    finite = np.isfinite(state.log_mag)
    if np.any(mult[finite] <= 0.0):
        raise StepSizeError(
            f"nonpositive multiplier {mult.min():g} for d_xi={d_xi:g}, "
            f"d_omega={d_omega:g}; halve the step size and retry"
        )
    new_log = state.log_mag.copy()
    new_log[finite] += np.log(mult[finite])
    return StateAmplitudes(log_mag=new_log, phase=state.phase)


def exact_step(
    state: StateAmplitudes,
    frame: MeasurementFrame,
    region: int,
    d_omega: float,
    d_xi: float,
) -> StateAmplitudes:
    """One exact step: multiply slots by exp(2*lam*e*d_xi - lam^2*d_omega)."""
    if region not in (1, 2):
        raise ValueError(f"region must be 1 or 2, got {region}")
    if not d_omega > 0.0:
        raise ValueError(f"d_omega must be positive, got {d_omega}")
    lam = frame.coupling
    shift = 2.0 * lam * SPIN_EIGENVALUES[region - 1] * d_xi - lam * lam * d_omega
    return StateAmplitudes(log_mag=state.log_mag + shift, phase=state.phase)


def _draw_increments(
    schedule: FoliationSchedule, rng: np.random.Generator
) -> np.ndarray:
    """Q-Brownian increments d_xi ~ N(0, d_omega), one per step."""
    return rng.normal(size=len(schedule)) * np.sqrt(schedule.increments)


def _cumulate_xi(schedule: FoliationSchedule, d_xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = len(schedule)
    in_r1 = schedule.regions == 1
    xi1 = np.zeros(n + 1)
    xi2 = np.zeros(n + 1)
    np.cumsum(np.where(in_r1, d_xi, 0.0), out=xi1[1:])
    np.cumsum(np.where(in_r1, 0.0, d_xi), out=xi2[1:])
    return xi1, xi2


def _trajectory_from_log_steps(
    frame: MeasurementFrame,
    schedule: FoliationSchedule,
    d_xi: np.ndarray,
    per_step_log: np.ndarray,
) -> SdeTrajectory:
    base = singlet_initial(frame).log_mag
    n = len(schedule)
    log_mags = np.empty((n + 1, 4))
    log_mags[0] = base
    np.cumsum(per_step_log, axis=0, out=log_mags[1:])
    log_mags[1:] += base
    # exactly-zero slots stay exactly zero, whatever the per-step factors
    dead = ~np.isfinite(base)
    if dead.any():
        log_mags[:, dead] = -np.inf
    xi1, xi2 = _cumulate_xi(schedule, d_xi)
    return SdeTrajectory(
        schedule=schedule,
        log_mags=log_mags,
        log_norms=_log_norms_from(log_mags),
        xi1=xi1,
        xi2=xi2,
    )


def integrate_q(
    frame: MeasurementFrame,
    schedule: FoliationSchedule,
    rng: np.random.Generator,
    d_xi: np.ndarray | None = None,
) -> SdeTrajectory:
    """Euler-Maruyama trajectory with freshly drawn (or given) increments.

    Pass d_xi explicitly to integrate a shared noise path, e.g. for strong
    convergence measurements against the exact integrator.
    """
    d_xi = _draw_increments(schedule, rng) if d_xi is None else np.asarray(d_xi, dtype=np.float64)
    if d_xi.shape != (len(schedule),):
        raise ValueError(f"d_xi must have shape ({len(schedule)},), got {d_xi.shape}")
    lam = frame.coupling
    e_step = SPIN_EIGENVALUES[schedule.regions - 1]  # (n, 4)
    mult = 1.0 + 2.0 * lam * e_step * d_xi[:, None] - 0.5 * lam * lam * schedule.increments[:, None]
    live = np.isfinite(singlet_initial(frame).log_mag)
    bad = (mult <= 0.0) & live[None, :]
    if bad.any():
        k = int(np.argwhere(bad.any(axis=1))[0][0])
        raise StepSizeError(
            f"nonpositive multiplier at step {k} (d_xi={d_xi[k]:g}, "
            f"d_omega={schedule.increments[k]:g}); halve the step size and retry"
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        per_step_log = np.log(mult)
    return _trajectory_from_log_steps(frame, schedule, d_xi, per_step_log)


def exact_q_evolve(
    frame: MeasurementFrame,
    schedule: FoliationSchedule,
    rng: np.random.Generator,
    d_xi: np.ndarray | None = None,
) -> SdeTrajectory:
    """Exact trajectory: valid for any step size, the workhorse integrator."""
    d_xi = _draw_increments(schedule, rng) if d_xi is None else np.asarray(d_xi, dtype=np.float64)
    if d_xi.shape != (len(schedule),):
        raise ValueError(f"d_xi must have shape ({len(schedule)},), got {d_xi.shape}")
    lam = frame.coupling
    e_step = SPIN_EIGENVALUES[schedule.regions - 1]
    shift = 2.0 * lam * e_step * d_xi[:, None] - lam * lam * schedule.increments[:, None]
    return _trajectory_from_log_steps(frame, schedule, d_xi, shift)


def importance_average(
    trajectories: Sequence[SdeTrajectory],
    functional: Callable[[SdeTrajectory], float],
) -> float:
    """Physical expectation of a path functional from Q-samples.

    Returns sum(w_i * f_i) / sum(w_i) with w_i the final squared norm;
    weights are combined through their logs so large volumes cannot
    overflow the ratio.
    """
    if not trajectories:
        raise ValueError("importance_average needs a nonempty ensemble")
    log_w = np.array([t.log_weight for t in trajectories])
    values = np.array([functional(t) for t in trajectories], dtype=np.float64)
    w = np.exp(log_w - log_w.max())
    return float((w * values).sum() / w.sum())
