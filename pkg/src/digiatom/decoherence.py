"""Phenomenological contrast model: a fixed loss per shift plus Gaussian decay over hold time."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .sequence import AccelWindow, Idle, Sequence, Shift


@dataclass(frozen=True)
class DecoherenceParams:
    kappa_idle: float = 0.006  # fractional contrast loss per step without transport
    f_shift: float = 0.99  # per-arm success probability of one shift
    kappa_extra: float = 0.017  # residual per-shift loss (polarisation jitter, motional excitation)
    # Gaussian hold-time constant. Not a measured value: picked so contrast halves
    # after ~1 ms of hold, below the 2.3 ms echo-series coherence time.
    T_hold_gauss: float = 1.2e-3
    gamma_loss: float = 0.05
    C0: float = 1.0

    def __post_init__(self):
        for name in ("kappa_idle", "kappa_extra", "gamma_loss", "C0"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        if not 0.0 < self.f_shift <= 1.0:
            raise ValueError(f"f_shift must lie in (0, 1], got {self.f_shift!r}")
        if not self.T_hold_gauss > 0:
            raise ValueError("T_hold_gauss must be positive")

    @property
    def per_shift_factor(self) -> float:
        return (1 - self.kappa_idle) * self.f_shift**2 * (1 - self.kappa_extra)


def echo_time(seq: Sequence) -> float:
    """Total idle time, acceleration windows included (they add no loss of their own)."""
    return sum(b.duration for b in seq.blocks if isinstance(b, (Idle, AccelWindow)))


def hold_echo_contrast(C_in: float, t_echo: float, T: float) -> float:
    if t_echo < 0:
        raise ValueError("t_echo must be non-negative")
    return C_in * math.exp(-((t_echo / T) ** 2))


def contrast_for(n_shifts: int, t_echo: float, p: DecoherenceParams) -> float:
    C = p.C0 * p.per_shift_factor**n_shifts
    return hold_echo_contrast(C, t_echo, p.T_hold_gauss)


def predict_contrast(seq: Sequence, p: DecoherenceParams) -> float:
    n = sum(isinstance(b, Shift) for b in seq.blocks)
    return contrast_for(n, echo_time(seq), p)
