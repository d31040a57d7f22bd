"""Dynamic zero-concentrated differential privacy for transmitted models.

Each client perturbs its transmitted model with Gaussian noise whose variance
shrinks geometrically over iterations (ratio ``zeta``), so the per-iteration
zCDP leakage ``phi`` grows geometrically. The cumulative budget after n
transmissions converts to an (epsilon, delta)-DP statement in closed form.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "PrivacyState",
    "advance",
    "epsilon_from_phi",
    "noise_variance",
    "phi_of",
    "record_transmission",
    "sample_noise",
    "sensitivity",
    "total_privacy_loss",
]


def sensitivity(clip_bound: float, rho: float, num_samples: int) -> float:
    """L2 sensitivity of a client's prox update to one replaced sample.

    With per-sample gradients clipped to norm ``clip_bound`` and proximal
    weight ``rho``, swapping one of ``num_samples`` samples moves the
    minimizer by at most 2*C / (rho * D).
    """
    if clip_bound <= 0 or rho <= 0 or num_samples <= 0:
        raise ConfigurationError("sensitivity requires positive C, rho, D")
    return 2.0 * clip_bound / (rho * num_samples)


def noise_variance(sens: float, phi: float) -> float:
    """Gaussian variance achieving per-iteration leakage ``phi``: delta^2 = Delta^2/(2 phi)."""
    if sens < 0:
        raise ConfigurationError("sensitivity must be nonnegative")
    if sens == 0.0:
        return 0.0
    if phi <= 0:
        raise ConfigurationError("phi must be positive")
    return sens * sens / (2.0 * phi)


def phi_of(sens: float, delta_sq: float) -> float:
    """Per-iteration leakage implied by variance ``delta_sq`` (inverse of noise_variance)."""
    if sens == 0.0:
        return 0.0
    if delta_sq <= 0:
        raise ConfigurationError("delta_sq must be positive for nonzero sensitivity")
    return sens * sens / (2.0 * delta_sq)


def sample_noise(delta_sq: float, d: int, rng: np.random.Generator) -> np.ndarray:
    """Draw the perturbation xi ~ N(0, delta_sq * I_d)."""
    if delta_sq < 0:
        raise ConfigurationError("delta_sq must be nonnegative")
    if delta_sq == 0.0:
        return np.zeros(d)
    return rng.normal(0.0, math.sqrt(delta_sq), size=d)


@dataclasses.dataclass
class PrivacyState:
    """Per-client noise schedule and spent-budget tracker.

    ``phi0`` is the leakage implied by the initial variance (iteration 0,
    before any advance); the first transmitted perturbation already uses the
    advanced variance zeta * delta_sq0, i.e. leakage phi0 / zeta. ``phi_spent``
    accumulates the actual leakage of every recorded transmission, which
    matches the closed-form accountant when no iterations are skipped.
    """

    phi0: float
    zeta: float
    delta_sq: float
    sensitivity: float
    iteration: int = 0
    phi_spent: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.zeta < 1.0:
            raise ConfigurationError("zeta must lie in (0, 1)")
        if self.phi0 <= 0:
            raise ConfigurationError("phi0 must be positive")
        if self.sensitivity <= 0:
            raise ConfigurationError("sensitivity must be positive")
        if self.delta_sq <= 0:
            raise ConfigurationError("delta_sq must be positive")

    @classmethod
    def from_phi(cls, phi0: float, zeta: float, sens: float) -> "PrivacyState":
        return cls(
            phi0=phi0,
            zeta=zeta,
            delta_sq=noise_variance(sens, phi0),
            sensitivity=sens,
        )

    @classmethod
    def from_delta_sq(cls, delta_sq0: float, zeta: float, sens: float) -> "PrivacyState":
        return cls(
            phi0=phi_of(sens, delta_sq0),
            zeta=zeta,
            delta_sq=delta_sq0,
            sensitivity=sens,
        )

    def current_phi(self) -> float:
        return phi_of(self.sensitivity, self.delta_sq)

    def epsilon(self, dp_delta: float) -> float:
        """(epsilon, dp_delta)-DP loss of everything recorded so far."""
        return epsilon_from_phi(self.phi_spent, dp_delta)


def advance(state: PrivacyState) -> PrivacyState:
    """Shrink the variance one rung: delta_sq *= zeta. Returns a new state."""
    return dataclasses.replace(
        state,
        delta_sq=state.delta_sq * state.zeta,
        iteration=state.iteration + 1,
    )


def record_transmission(state: PrivacyState) -> PrivacyState:
    """Charge the current iteration's leakage to the spent budget."""
    return dataclasses.replace(
        state, phi_spent=state.phi_spent + state.current_phi()
    )


def epsilon_from_phi(phi_total: float, dp_delta: float) -> float:
    """Convert cumulative zCDP budget to (epsilon, dp_delta)-DP."""
    if not 0.0 < dp_delta < 1.0:
        raise ConfigurationError("dp_delta must lie in (0, 1)")
    if phi_total < 0:
        raise ConfigurationError("phi_total must be nonnegative")
    return phi_total + 2.0 * math.sqrt(phi_total * math.log(1.0 / dp_delta))


def total_privacy_loss(phi1: float, zeta: float, n: int, dp_delta: float) -> float:
    """Accountant for n consecutive transmissions starting at leakage ``phi1``.

    The per-iteration leakages phi1 / zeta^(i-1), i = 1..n, sum to
    phi1 * (1 - zeta^n) / (zeta^(n-1) - zeta^n).
    """
    if not 0.0 < zeta < 1.0:
        raise ConfigurationError("zeta must lie in (0, 1)")
    if phi1 <= 0:
        raise ConfigurationError("phi1 must be positive")
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    phi_total = phi1 * (1.0 - zeta**n) / (zeta ** (n - 1) - zeta**n)
    return epsilon_from_phi(phi_total, dp_delta)
