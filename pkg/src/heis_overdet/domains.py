"""Reduced-coordinate domains for the quadrature and solver modules.

In the (sigma, t) half-plane the gauge ball of radius R is
sigma^2 + t^2 < R^4 with sigma >= 0; the perturbed family flattens the t
direction: sigma^2 + (1+eps)t^2 < R^4.  Both are star-shaped about the
reduced origin and parametrizable in closed form, which keeps all the
boundary geometry exact."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class ReducedDomain:
    kind: str = "gauge_ball"
    R: float = 1.0
    epsilon: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gauge_ball", "perturbed"):
            raise InvalidInputError(f"unknown domain kind {self.kind!r}")
        if not self.R > 0.0:
            raise InvalidInputError("R must be positive")
        if not 1.0 + self.epsilon > 0.0:
            raise InvalidInputError("1 + epsilon must be positive")
        if self.kind == "gauge_ball" and self.epsilon != 0.0:
            raise InvalidInputError("gauge_ball has epsilon = 0")

    @property
    def t_axis_max(self) -> float:
        """|t| extent of the domain on the sigma = 0 axis."""
        return self.R**2 / np.sqrt(1.0 + self.epsilon)

    @property
    def sigma_max(self) -> float:
        return self.R**2

    def contains(self, sigma, t):
        return (np.asarray(sigma) >= 0.0) & (
            np.asarray(sigma) ** 2 + (1.0 + self.epsilon) * np.asarray(t) ** 2
            < self.R**4
        )

    def boundary_sigma(self, t):
        """sigma of the boundary curve at height t."""
        return np.sqrt(self.R**4 - (1.0 + self.epsilon) * np.asarray(t) ** 2)

    def boundary_t(self, sigma):
        """positive t of the boundary curve at abscissa sigma."""
        return np.sqrt((self.R**4 - np.asarray(sigma) ** 2) / (1.0 + self.epsilon))

    def boundary_point(self, phi):
        """Elliptic parametrization, phi in (-pi/2, pi/2)."""
        return (
            self.R**2 * np.cos(phi),
            self.R**2 / np.sqrt(1.0 + self.epsilon) * np.sin(phi),
        )

    def gauge_radius(self, psi):
        """Radial extent in gauge-polar coordinates (r^2 = rho^2 cos psi,
        t = rho^2 sin psi): rho < R (1 + eps sin^2 psi)^(-1/4)."""
        return self.R * (1.0 + self.epsilon * np.sin(psi) ** 2) ** -0.25
