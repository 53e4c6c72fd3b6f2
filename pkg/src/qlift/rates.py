"""Closed-form effective decay rates for the four control schemes.

Every scheme relaxes (in its model curve) as P_e(t) = P_e(0) exp(-Gamma t)
with a scheme-specific Gamma.  Rates are the primary objects here; lifetimes
are always derived as 1/Gamma and never stored independently.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .traces import PopulationTrace

logger = logging.getLogger(__name__)


def _check_rate(value: float, name: str) -> float:
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return float(value)


def _check_efficiency(eta: float) -> float:
    if not (math.isfinite(eta) and 0.0 < eta <= 1.0):
        raise ValueError(f"detection efficiency must lie in (0, 1], got {eta!r}")
    return float(eta)


def gamma_wm(gamma: float, eta: float, lam: float) -> float:
    """Decay rate under homodyne-mediated feedback at gain lam:

        Gamma(lam) = gamma - 2 sqrt(eta gamma) lam + 2 lam^2
    """
    gamma = _check_rate(gamma, "gamma")
    eta = _check_efficiency(eta)
    if not math.isfinite(lam) or lam < 0:
        raise ValueError(f"feedback gain must be >= 0, got {lam!r}")
    return gamma - 2.0 * math.sqrt(eta * gamma) * lam + 2.0 * lam * lam


def optimal_lambda(gamma: float, eta: float) -> float:
    """Gain minimizing gamma_wm: lam* = sqrt(eta gamma) / 2, giving
    Gamma(lam*) = gamma (1 - eta/2)."""
    gamma = _check_rate(gamma, "gamma")
    eta = _check_efficiency(eta)
    return 0.5 * math.sqrt(eta * gamma)


def cooperativity(g: float, kappa: float, gamma: float) -> float:
    """C = 4 g^2 / (kappa gamma) for coupling g and ancilla linewidth kappa."""
    g = _check_rate(g, "g")
    kappa = _check_rate(kappa, "kappa")
    gamma = _check_rate(gamma, "gamma")
    return 4.0 * g * g / (kappa * gamma)


def gamma_ancilla(gamma: float, c: float) -> float:
    """Ancilla-assisted rate Gamma = gamma / (1 + C)."""
    gamma = _check_rate(gamma, "gamma")
    if not (math.isfinite(c) and c >= 0):
        raise ValueError(f"cooperativity must be >= 0, got {c!r}")
    return gamma / (1.0 + c)


def gamma_ml(gamma: float, c: float, r: float) -> float:
    """Predictor-assisted rate Gamma = [gamma / (1 + C)] (1 - r^2).

    r is the predictor's correlation score.  Values outside [0, 1] are clamped
    here, with a warning; this is the only place that boundary is enforced.
    """
    base = gamma_ancilla(gamma, c)
    if not math.isfinite(r):
        raise ValueError(f"correlation must be finite, got {r!r}")
    if r < 0.0 or r > 1.0:
        logger.warning("correlation r=%g outside [0, 1]; clamping", r)
        r = min(max(r, 0.0), 1.0)
    return base * (1.0 - r * r)


def population_curve(gamma_eff: float, times: np.ndarray, pe0: float = 1.0) -> PopulationTrace:
    """Model decay curve P_e(t) = pe0 exp(-gamma_eff t) on the given grid."""
    gamma_eff = _check_rate(gamma_eff, "gamma_eff")
    if not (0.0 < pe0 <= 1.0):
        raise ValueError(f"pe0 must lie in (0, 1], got {pe0!r}")
    times = np.asarray(times, dtype=float)
    return PopulationTrace(times=times, pe=pe0 * np.exp(-gamma_eff * times))


@dataclass(frozen=True)
class RateResult:
    """One scheme's effective rate.  The lifetime is derived, never stored."""

    scheme: str
    gamma_eff: float

    def __post_init__(self):
        _check_rate(self.gamma_eff, "gamma_eff")

    @property
    def t1(self) -> float:
        return 1.0 / self.gamma_eff


def rate_table(gamma: float, etas=(0.5, 1.0), c: float = 1.84, r: float = 0.54):
    """Closed-form rate summary across all schemes.

    Returns a list of RateResult rows: bare decay, homodyne feedback at the
    optimal gain for each efficiency in ``etas``, the ancilla-assisted scheme
    at cooperativity ``c``, and the ancilla scheme with predictor correlation
    ``r``.
    """
    rows = [RateResult("no_feedback", _check_rate(gamma, "gamma"))]
    for eta in etas:
        lam = optimal_lambda(gamma, eta)
        rows.append(RateResult(f"wm_eta_{eta:g}", gamma_wm(gamma, eta, lam)))
    rows.append(RateResult("ancilla", gamma_ancilla(gamma, c)))
    rows.append(RateResult("ancilla_ml", gamma_ml(gamma, c, r)))
    return rows
