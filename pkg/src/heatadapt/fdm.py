"""Explicit finite differences for 1-D heat equations with flux boundary data.

The stepper advances u_t = u_xx + source one forward-Euler step with
second-order central differences.  Boundary nodes use ghost values

    u_{-1} = u_1 - 2 dx left_flux,      u_n = u_{n-2} + 2 dx right_flux,

so callers impose Neumann or Robin conditions by evaluating the flux
from the current boundary values (e.g. left_flux = -q u(0)) and passing
the numbers here.  Quadrature is composite trapezoid, matching the
stepper's O(dx^2) spatial accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import ConfigError, GridFunction

__all__ = ["FluxBC", "NonFiniteState", "step_heat", "quad", "l2_norm", "grad_values"]


class NonFiniteState(ArithmeticError):
    """A step produced NaN or Inf, i.e. the discrete solution blew up."""


@dataclass(frozen=True)
class FluxBC:
    """Prescribed values of u_x at x = 0 and x = 1 for one step."""

    left_flux: float
    right_flux: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.left_flux) and math.isfinite(self.right_flux)):
            raise ConfigError("boundary fluxes must be finite")


def step_heat(
    state: GridFunction,
    bc: FluxBC,
    dt: float,
    source: GridFunction | None = None,
) -> GridFunction:
    """Advance the state by one explicit step of u_t = u_xx + source.

    The input is never modified.  Raises :class:`NonFiniteState` when the
    output contains NaN/Inf, which is the expected end of an open-loop
    unstable run once the state overflows.
    """
    u = state.values
    dx = state.grid.dx
    r = dt / (dx * dx)
    out = np.empty_like(u)
    out[1:-1] = u[1:-1] + r * (u[2:] - 2.0 * u[1:-1] + u[:-2])
    out[0] = u[0] + 2.0 * r * (u[1] - u[0] - dx * bc.left_flux)
    out[-1] = u[-1] + 2.0 * r * (u[-2] - u[-1] + dx * bc.right_flux)
    if source is not None:
        if source.grid != state.grid:
            raise ConfigError("source must live on the same grid as the state")
        out += dt * source.values
    if not np.isfinite(out).all():
        raise NonFiniteState("heat step produced non-finite values")
    return GridFunction._wrap(state.grid, out)


def _trapz(values: np.ndarray, dx: float) -> float:
    return dx * (values.sum() - 0.5 * (values[0] + values[-1]))


def quad(f: GridFunction) -> float:
    """Composite trapezoid value of the integral of f over [0, 1]."""
    return _trapz(f.values, f.grid.dx)


def l2_norm(f: GridFunction) -> float:
    """L2(0,1) norm of f under trapezoid quadrature."""
    v = f.values
    return math.sqrt(max(_trapz(v * v, f.grid.dx), 0.0))


def grad_values(values: np.ndarray, dx: float) -> np.ndarray:
    """Second-order finite-difference derivative of a nodal profile."""
    return np.gradient(values, dx, edge_order=2)
