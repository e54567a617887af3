"""Adoption probability as a function of the number of adopting neighbors.

Each variant exposes a vectorized :meth:`probability` taking the count of
active infected neighbors ``x``, the count ``x_allowed`` reached through edge
labels that admit sub-threshold adoption, and the node degree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr

from .errors import InvalidParameterError


def _check_prob(name, value):
    if not 0.0 <= value <= 1.0:
        raise InvalidParameterError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class Simple:
    """Independent transmission along each edge: ``1 - (1 - beta)**x``."""

    beta: float

    kind = "simple"
    spontaneous = False

    def __post_init__(self):
        _check_prob("beta", self.beta)

    @property
    def deterministic(self) -> bool:
        return self.beta in (0.0, 1.0)

    def probability(self, x, x_allowed=None, degree=None):
        x = np.asarray(x, dtype=np.float64)
        return -np.expm1(x * np.log1p(-self.beta)) if self.beta < 1 else (x > 0).astype(float)


@dataclass(frozen=True)
class NoisyThreshold:
    """Threshold ``theta`` reached: adopt w.p. ``rho``; at least one allowed adopter: ``q``."""

    theta: int
    q: float = 0.0
    rho: float = 1.0

    kind = "noisy_threshold"
    spontaneous = False

    def __post_init__(self):
        if int(self.theta) != self.theta or self.theta < 1:
            raise InvalidParameterError("theta must be an integer >= 1")
        _check_prob("q", self.q)
        _check_prob("rho", self.rho)
        if self.q > self.rho:
            raise InvalidParameterError("q must not exceed rho (activation must be non-decreasing)")

    @property
    def deterministic(self) -> bool:
        return self.q in (0.0, 1.0) and self.rho in (0.0, 1.0)

    def probability(self, x, x_allowed=None, degree=None):
        x = np.asarray(x)
        xa = x if x_allowed is None else np.asarray(x_allowed)
        return np.where(x >= self.theta, self.rho, np.where(xa >= 1, self.q, 0.0))


@dataclass(frozen=True)
class FractionalThreshold:
    """Relative threshold: ``x >= theta_frac * degree`` gives ``rho``, fewer adopters give ``q``."""

    theta_frac: float
    q: float = 0.0
    rho: float = 1.0

    kind = "fractional"
    spontaneous = False

    def __post_init__(self):
        if not 0.0 < self.theta_frac <= 1.0:
            raise InvalidParameterError("theta_frac must lie in (0, 1]")
        _check_prob("q", self.q)
        _check_prob("rho", self.rho)
        if self.q > self.rho:
            raise InvalidParameterError("q must not exceed rho (activation must be non-decreasing)")

    @property
    def deterministic(self) -> bool:
        return self.q in (0.0, 1.0) and self.rho in (0.0, 1.0)

    def probability(self, x, x_allowed=None, degree=None):
        x = np.asarray(x)
        if degree is None:
            raise InvalidParameterError("fractional threshold needs node degrees")
        xa = x if x_allowed is None else np.asarray(x_allowed)
        above = (x > 0) & (x >= self.theta_frac * np.asarray(degree))
        return np.where(above, self.rho, np.where(xa >= 1, self.q, 0.0))


@dataclass(frozen=True)
class Probit:
    """Normal CDF with mean ``theta`` and standard deviation ``sigma``; positive at ``x = 0``."""

    theta: float
    sigma: float

    kind = "probit"
    spontaneous = True
    deterministic = False

    def __post_init__(self):
        if self.theta < 1:
            raise InvalidParameterError("theta must be >= 1")
        if not self.sigma > 0:
            raise InvalidParameterError("sigma must be positive")

    def probability(self, x, x_allowed=None, degree=None):
        return ndtr((np.asarray(x, dtype=np.float64) - self.theta) / self.sigma)


@dataclass(frozen=True)
class Logit:
    """Logistic ``1 / (1 + exp((theta - x) / sigma))``; positive at ``x = 0``."""

    theta: float
    sigma: float

    kind = "logit"
    spontaneous = True
    deterministic = False

    def __post_init__(self):
        if self.theta < 1:
            raise InvalidParameterError("theta must be >= 1")
        if not self.sigma > 0:
            raise InvalidParameterError("sigma must be positive")

    def probability(self, x, x_allowed=None, degree=None):
        return expit((np.asarray(x, dtype=np.float64) - self.theta) / self.sigma)


ActivationSpec = Simple | NoisyThreshold | FractionalThreshold | Probit | Logit

VARIANTS = {cls.kind: cls for cls in (Simple, NoisyThreshold, FractionalThreshold, Probit, Logit)}


def make_activation(kind: str, **params) -> ActivationSpec:
    """Build a variant by name, e.g. ``make_activation("noisy_threshold", theta=2, q=0.05)``."""
    try:
        cls = VARIANTS[kind]
    except KeyError:
        raise InvalidParameterError(
            f"unknown activation {kind!r}; expected one of {sorted(VARIANTS)}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise InvalidParameterError(f"{kind}: {exc}") from None


def activation_probability(spec: ActivationSpec, x: int, degree: int) -> float:
    """Adoption probability of a node with ``x`` adopting neighbors out of ``degree``.

    All neighbors are treated as admitting sub-threshold adoption.
    """
    if x < 0 or x > degree:
        raise InvalidParameterError(f"need 0 <= x <= degree, got x={x}, degree={degree}")
    return float(spec.probability(np.array([x]), None, np.array([degree]))[0])
