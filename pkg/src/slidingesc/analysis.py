"""Trajectory verdicts: sliding detection, convergence metrics, the
residual bound, and the finite-difference gain oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .plant import CascadePlant, central_difference
from .sim import Trajectory

DEFAULT_TRAILING_FRACTION = 0.1
DEFAULT_C_BOUND = 2.5


@dataclass
class SlidingSegment:
    t_start: float
    t_end: float
    band_index: int

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass
class Metrics:
    """Convergence diagnostics of one run.

    t_reach_delta is the first time the output of the linear block
    enters the delta-vicinity of the maximizer, or None if it never
    does.  Residuals are taken over the trailing window of the run.
    """

    t_reach_delta: Optional[float]
    residual_amp: float
    mean_residual: float
    sliding_segments: list[SlidingSegment] = field(default_factory=list)
    bounded: bool = True

    def to_flat_dict(self) -> dict:
        return {
            "t_reach_delta": self.t_reach_delta,
            "residual_amp": self.residual_amp,
            "mean_residual": self.mean_residual,
            "sliding_segments": [[s.t_start, s.t_end, s.band_index]
                                 for s in self.sliding_segments],
            "bounded": self.bounded,
        }


def detect_sliding(t: np.ndarray, s: np.ndarray, epsilon_sw: float,
                   band_tol: Optional[float] = None,
                   min_duration: Optional[float] = None) -> list[SlidingSegment]:
    """Maximal intervals where s sits on one switching band.

    A sample belongs to band k = round(s/epsilon) when
    |s - k*epsilon| <= band_tol (default epsilon/4).  Runs of samples on
    the same band lasting at least min_duration (default 50 sample
    periods) are reported.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if t.size == 0:
        return []
    if band_tol is None:
        band_tol = 0.25 * epsilon_sw
    if min_duration is None:
        spacing = float(np.median(np.diff(t))) if t.size > 1 else 0.0
        min_duration = 50.0 * spacing

    band = np.round(s / epsilon_sw)
    inside = np.abs(s - band * epsilon_sw) <= band_tol

    segments: list[SlidingSegment] = []
    start = None
    for i in range(t.size):
        if inside[i] and (start is None or band[i] == band[start]):
            if start is None:
                start = i
            continue
        if start is not None and t[i - 1] - t[start] >= min_duration:
            segments.append(SlidingSegment(t[start], t[i - 1], int(band[start])))
        start = i if inside[i] else None
    if start is not None and t[-1] - t[start] >= min_duration:
        segments.append(SlidingSegment(t[start], t[-1], int(band[start])))
    return segments


def convergence_metrics(traj: Trajectory, z_star, y_star: float, *,
                        epsilon_sw: float, delta: Optional[float] = None,
                        trailing_fraction: float = DEFAULT_TRAILING_FRACTION,
                        band_tol: Optional[float] = None,
                        min_duration: Optional[float] = None) -> Metrics:
    """Compute all Metrics fields for one trajectory.

    delta defaults to sqrt(epsilon_sw), the only quantitative vicinity
    radius the theory offers.
    """
    if len(traj) == 0:
        raise ValueError("trajectory is empty")
    if not (0.0 < trailing_fraction <= 1.0):
        raise ValueError(f"trailing_fraction must be in (0, 1], got "
                         f"{trailing_fraction}")
    if delta is None:
        delta = math.sqrt(epsilon_sw)

    z_star = np.asarray(z_star, dtype=float)
    dist = np.linalg.norm(traj.z - z_star, axis=1)
    hits = np.nonzero(dist < delta)[0]
    t_reach = float(traj.t[hits[0]]) if hits.size else None

    n_tail = max(1, int(round(trailing_fraction * len(traj))))
    tail_dev = np.abs(traj.y[-n_tail:] - y_star)
    segments = detect_sliding(traj.t, traj.s, epsilon_sw,
                              band_tol=band_tol, min_duration=min_duration)
    return Metrics(
        t_reach_delta=t_reach,
        residual_amp=float(tail_dev.max()),
        mean_residual=float(tail_dev.mean()),
        sliding_segments=segments,
        bounded=traj.all_finite,
    )


@dataclass
class ResidualBoundResult:
    passed: bool
    residual_amp: float
    bound: float
    implied_constant: float
    reason: str = ""


def residual_bound_check(metrics: Metrics, eta: float, epsilon_sw: float,
                         c_bound: float = DEFAULT_C_BOUND) -> ResidualBoundResult:
    """Check residual_amp <= c_bound * (sqrt(eta) + epsilon_sw).

    The theory's constant is unknowable, so the caller supplies c_bound
    and the result reports the implied constant
    residual_amp / (sqrt(eta) + epsilon_sw) for cross-run comparison.
    Fails outright when the run never reached the vicinity.
    """
    scale = math.sqrt(eta) + epsilon_sw
    implied = metrics.residual_amp / scale
    if metrics.t_reach_delta is None:
        return ResidualBoundResult(False, metrics.residual_amp,
                                   c_bound * scale, implied,
                                   "run never reached the delta-vicinity")
    passed = metrics.residual_amp <= c_bound * scale
    return ResidualBoundResult(passed, metrics.residual_amp,
                               c_bound * scale, implied)


def fd_gradient_oracle(plant: CascadePlant, v, fd_step: float = 1e-5) -> np.ndarray:
    """Brute-force check value for the analytic input gain.

    Central finite differences of v -> h(steady_state_output(v)); by the
    chain rule this equals the gain k_p at z = steady_state_output(v),
    independently of the analytic gradient path.
    """
    v = np.asarray(v, dtype=float)

    def through_channel(point: np.ndarray) -> float:
        return plant.map.eval(plant.lti.steady_state_output(point))

    return central_difference(through_channel, v, fd_step)
