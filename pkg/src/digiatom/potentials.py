"""Spin-independent potentials U(x, t) with analytic gradients and declared time breakpoints.

All models evaluate vectorised over numpy arrays of positions and times.

Note on ``GaussianBeamAxial``: ``U0`` is left as a free scale. For an axial
trap frequency omega_ax the on-axis lattice depth is roughly
``m * omega_ax**2 / (2 k**2)`` with ``k = 2 pi / lambda``, but only the slope
of the divergence term over the atoms' region matters here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class PotentialModel:
    def value(self, x, t=0.0):
        raise NotImplementedError

    def gradient(self, x, t=0.0):
        raise NotImplementedError

    def breakpoints(self) -> tuple[float, ...]:
        """Times at which the potential changes non-smoothly."""
        return ()

    def __add__(self, other: "PotentialModel") -> "Sum":
        return Sum((self, other))


@dataclass(frozen=True)
class Zero(PotentialModel):
    def value(self, x, t=0.0):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(t)).shape)

    def gradient(self, x, t=0.0):
        return self.value(x, t)


@dataclass(frozen=True)
class LinearGradient(PotentialModel):
    gradU: float  # J/m

    def value(self, x, t=0.0):
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        return self.gradU * x

    def gradient(self, x, t=0.0):
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        return np.full(x.shape, float(self.gradU))


@dataclass(frozen=True)
class GaussianBeamAxial(PotentialModel):
    """On-axis light shift of a focused beam: ``U = -U0 / (1 + ((x - x_focus) / z_R)**2)``."""

    U0: float
    x_focus: float
    z_R: float

    def __post_init__(self):
        if not self.z_R > 0:
            raise ValueError("z_R must be positive")

    def value(self, x, t=0.0):
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        u = (x - self.x_focus) / self.z_R
        return -self.U0 / (1.0 + u * u)

    def gradient(self, x, t=0.0):
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        u = (x - self.x_focus) / self.z_R
        return self.U0 * 2.0 * u / self.z_R / (1.0 + u * u) ** 2

    @classmethod
    def with_gradient_at(cls, x: float, gradU: float, x_focus: float, z_R: float) -> "GaussianBeamAxial":
        """Choose ``U0`` so that the gradient at ``x`` equals ``gradU``."""
        u = (x - x_focus) / z_R
        unit = 2.0 * u / z_R / (1.0 + u * u) ** 2
        if unit == 0:
            raise ValueError("gradient vanishes at the focus; cannot scale to a non-zero slope")
        return cls(gradU / unit, x_focus, z_R)


@dataclass(frozen=True)
class InertialWindow(PotentialModel):
    """Lattice-frame pseudo-potential ``+mass * accel * x`` while ``t_on <= t < t_off``.

    ``accel`` is the lattice acceleration; the sign makes a window of
    acceleration ``a`` equivalent to a linear gradient ``mass * a``.
    """

    accel: float
    t_on: float
    t_off: float
    mass: float

    def __post_init__(self):
        if not self.t_on < self.t_off:
            raise ValueError("need t_on < t_off")
        if not self.mass > 0:
            raise ValueError("mass must be positive")

    def _active(self, t):
        return (t >= self.t_on) & (t < self.t_off)

    def value(self, x, t=0.0):
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        return np.where(self._active(t), self.mass * self.accel * x, 0.0)

    def gradient(self, x, t=0.0):
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        return np.where(self._active(t), self.mass * self.accel, 0.0)

    def breakpoints(self):
        return (self.t_on, self.t_off)


@dataclass(frozen=True)
class Sum(PotentialModel):
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ValueError("Sum needs at least one part")

    def value(self, x, t=0.0):
        return sum(p.value(x, t) for p in self.parts)

    def gradient(self, x, t=0.0):
        return sum(p.gradient(x, t) for p in self.parts)

    def breakpoints(self):
        return tuple(sorted({b for p in self.parts for b in p.breakpoints()}))


def potential_value(pot: PotentialModel, x, t=0.0):
    return pot.value(x, t)


def potential_gradient(pot: PotentialModel, x, t=0.0):
    return pot.gradient(x, t)


def linearize_gaussian_axial(pot: GaussianBeamAxial, x0: float, window: float, points: int = 1001):
    """Least-squares straight line through U over ``x0 +- window/2``.

    Returns ``(LinearGradient(slope), max_abs_residual)``.
    """
    if not isinstance(pot, GaussianBeamAxial):
        raise TypeError(f"expected GaussianBeamAxial, got {type(pot).__name__}")
    if not window > 0:
        raise ValueError("window must be positive")
    # centred abscissa keeps the normal equations well conditioned for tiny windows
    u = np.linspace(-window / 2, window / 2, points)
    y = pot.value(x0 + u)
    slope, intercept = np.polyfit(u, y, 1)
    resid = y - (slope * u + intercept)
    return LinearGradient(float(slope)), float(np.max(np.abs(resid)))
