"""Physical constants and the lattice / timing configuration shared by all modules."""

from __future__ import annotations

from dataclasses import dataclass, field

import scipy.constants as sc

HBAR = sc.hbar
G0 = sc.g
ATOMIC_MASS = sc.atomic_mass
M_CS133 = 132.905451958 * ATOMIC_MASS  # kg

# Landau-Zener guard on lattice acceleration (m/s^2)
A_CRIT = 5.0e4

# Bare, single-echo and echo-series coherence times (s). Documentation only,
# none of them enters the contrast model directly.
COHERENCE_TIMES = {"T2": 200e-6, "T2_echo": 600e-6, "T2_echo_series": 2.3e-3}


@dataclass(frozen=True)
class TimingParams:
    """Block durations in seconds. The pi/2 duration is fixed at half a pi pulse."""

    tau_S: float = 18e-6
    tau_pi: float = 12e-6

    def __post_init__(self):
        if not (self.tau_S > 0 and self.tau_pi > 0):
            raise ValueError("tau_S and tau_pi must be positive")

    @property
    def tau_pi2(self) -> float:
        return self.tau_pi / 2


@dataclass(frozen=True)
class LatticeConfig:
    lam: float = 866e-9  # lattice laser wavelength (m)
    rayleigh: float = 2.3e-3  # m
    mass: float = M_CS133
    g0: float = G0
    d: float = field(init=False)

    def __post_init__(self):
        if min(self.lam, self.rayleigh, self.mass, self.g0) <= 0:
            raise ValueError("lattice parameters must be positive")
        object.__setattr__(self, "d", self.lam / 2)


def gradient_from_frequency(freq_hz: float, d: float) -> float:
    """Potential gradient 2*pi*hbar*f/d (J/m) for a per-site energy step quoted as a frequency."""
    return 2 * sc.pi * HBAR * freq_hz / d
