"""Decay-rate extraction and energy-retention metrics for population traces."""

import math
from dataclasses import dataclass

import numpy as np

from .traces import PopulationTrace


class FitError(ValueError):
    """Base class for fit failures."""


class InsufficientPointsError(FitError):
    """Fewer than the minimum number of usable points above the floor."""


class NonDecayingTraceError(FitError):
    """The trace does not decay; an exponential decay fit is meaningless."""


MIN_POINTS = 10
FLOOR_FRACTION = 1e-4


@dataclass(frozen=True)
class DecayFit:
    """Log-linear fit result.  gamma_eff in 1/us; t1 is always derived."""

    gamma_eff: float
    rms_residual: float
    n_points_used: int

    @property
    def t1(self) -> float:
        return 1.0 / self.gamma_eff


def _loglinear_slope(t: np.ndarray, logy: np.ndarray):
    slope, intercept = np.polyfit(t, logy, 1)
    resid = logy - (slope * t + intercept)
    return slope, float(np.sqrt(np.mean(resid ** 2)))


def fit_exponential(trace: PopulationTrace, floor_fraction: float = FLOOR_FRACTION) -> DecayFit:
    """Fit P_e(t) = P_e(0) exp(-gamma t) by least squares on log P_e.

    Samples below floor_fraction * P_e(0) are excluded so the fit never
    chases noise near zero.  Raises InsufficientPointsError with fewer than
    MIN_POINTS usable samples and NonDecayingTraceError when the fitted
    slope is not negative.
    """
    pe0 = trace.pe[0]
    if pe0 <= 0.0:
        raise FitError("initial population must be positive for a decay fit")
    mask = trace.pe > floor_fraction * pe0
    n = int(mask.sum())
    if n < MIN_POINTS:
        raise InsufficientPointsError(
            f"only {n} usable points above the floor, need {MIN_POINTS}"
        )
    slope, rms = _loglinear_slope(trace.times[mask], np.log(trace.pe[mask]))
    if slope >= 0.0:
        raise NonDecayingTraceError(f"fitted slope {slope:.3e} is not negative")
    return DecayFit(gamma_eff=-slope, rms_residual=rms, n_points_used=n)


def fit_exponential_offset(trace: PopulationTrace,
                           floor_fraction: float = FLOOR_FRACTION) -> DecayFit:
    """Fit P_e(t) = A exp(-gamma t) + B without knowing the plateau B.

    On a uniform grid the successive differences P_e(t_k) - P_e(t_k + h)
    equal A (1 - e^{-gamma h}) e^{-gamma t_k}, so the offset drops out and
    the same log-linear machinery applies to the differences.  Intended for
    deterministic traces that relax to a non-zero steady population.
    """
    h = np.diff(trace.times)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0.0):
        raise FitError("offset fit requires a uniform time grid")
    d = trace.pe[:-1] - trace.pe[1:]
    top = d.max()
    if top <= 0.0:
        raise NonDecayingTraceError("population never decreases; nothing to fit")
    mask = d > floor_fraction * top
    n = int(mask.sum())
    if n < MIN_POINTS:
        raise InsufficientPointsError(
            f"only {n} usable differences above the floor, need {MIN_POINTS}"
        )
    slope, rms = _loglinear_slope(trace.times[:-1][mask], np.log(d[mask]))
    if slope >= 0.0:
        raise NonDecayingTraceError(f"fitted slope {slope:.3e} is not negative")
    return DecayFit(gamma_eff=-slope, rms_residual=rms, n_points_used=n)


def energy_retention(trace: PopulationTrace, t_upper: float) -> float:
    """Integral of P_e from 0 to t_upper by the trapezoid rule.

    For a pure exponential this saturates at T1 as t_upper grows, which is
    what makes it a scheme-independent figure of merit.  t_upper must lie
    within the trace (linear interpolation covers a t_upper between grid
    points); the trace must start at t = 0.
    """
    if abs(trace.times[0]) > 1e-12:
        raise ValueError("energy retention is defined from t = 0")
    if not (0.0 < t_upper <= trace.times[-1] + 1e-12):
        raise ValueError(
            f"t_upper={t_upper} outside the trace span (0, {trace.times[-1]}]"
        )
    cut = int(np.searchsorted(trace.times, t_upper, side="right"))
    t = trace.times[:cut]
    y = trace.pe[:cut]
    total = float(np.trapezoid(y, t)) if t.shape[0] > 1 else 0.0
    if t[-1] < t_upper:  # partial trapezoid up to the interpolated endpoint
        y_end = trace.pe_at(t_upper)
        total += 0.5 * (y[-1] + y_end) * (t_upper - t[-1])
    return total
