"""Arm trajectories of a block sequence, their spacetime area and interferometric phase.

The phase is ``(1/hbar) * integral of [U(x_L, t) - U(x_R, t)] dt``. The left
arm starts spin-up and is the one pushed to positive x by the first ``S+``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .constants import A_CRIT, HBAR, LatticeConfig, TimingParams
from .potentials import InertialWindow, PotentialModel, Sum, Zero
from .sequence import AccelWindow, Sequence, arm_positions, require_valid

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class Segment:
    t0: float
    t1: float
    xL0: float
    xL1: float
    xR0: float
    xR1: float
    spinL: int  # +1 up, -1 down; the right arm always carries -spinL
    block_index: int

    @property
    def spinR(self) -> int:
        return -self.spinL

    @property
    def duration(self) -> float:
        return self.t1 - self.t0


@dataclass(frozen=True)
class PathPair:
    segments: tuple
    total_duration: float
    half_steps: tuple  # exact (xL, xR) in units of d/2 at every block boundary

    def max_separation(self) -> float:
        return max(max(abs(s.xL0 - s.xR0), abs(s.xL1 - s.xR1)) for s in self.segments)

    def to_csv(self) -> str:
        """Boundary samples ``t,xL,xR,spinL`` for plotting (spinL is ``up``/``down``)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "xL", "xR", "spinL"])
        for s in self.segments:
            spin = "up" if s.spinL > 0 else "down"
            w.writerow([f"{s.t0:.12g}", f"{s.xL0:.12g}", f"{s.xR0:.12g}", spin])
        last = self.segments[-1]
        w.writerow(
            [f"{last.t1:.12g}", f"{last.xL1:.12g}", f"{last.xR1:.12g}", "up" if last.spinL > 0 else "down"]
        )
        return buf.getvalue()


def compute_paths(seq: Sequence, lat: LatticeConfig | None = None, x0: float = 0.0) -> PathPair:
    """Piecewise-linear arm trajectories. ``x0`` is the atom's starting lattice position (m)."""
    lat = lat or LatticeConfig()
    require_valid(seq)
    half = lat.d / 2
    states = arm_positions(seq)
    segments = []
    for i, (t0, dt) in enumerate(zip(seq.start_times(), seq.durations())):
        (l0, r0, spin), (l1, r1, _) = states[i], states[i + 1]
        segments.append(
            Segment(t0, t0 + dt, x0 + l0 * half, x0 + l1 * half, x0 + r0 * half, x0 + r1 * half, spin, i)
        )
    total = segments[-1].t1 if segments else 0.0
    return PathPair(tuple(segments), total, tuple((l, r) for l, r, _ in states))


def spacetime_area(paths: PathPair) -> float:
    """Exact integral of ``|x_L - x_R|`` (m*s).

    Separation is linear on each segment; a sign change inside a segment is
    handled by splitting at the zero crossing.
    """
    total = 0.0
    for s in paths.segments:
        a, b = s.xL0 - s.xR0, s.xL1 - s.xR1
        dt = s.duration
        if a * b >= 0:
            total += 0.5 * (abs(a) + abs(b)) * dt
        else:
            total += 0.5 * (a * a + b * b) / (abs(a) + abs(b)) * dt
    return total


def signed_area(paths: PathPair) -> float:
    return sum(0.5 * ((s.xL0 - s.xR0) + (s.xL1 - s.xR1)) * s.duration for s in paths.segments)


def _quadrature_nodes(paths: PathPair, breakpoints) -> tuple[np.ndarray, ...]:
    ts, xl, xr, w = [], [], [], []
    bps = np.asarray(sorted(breakpoints), float)
    for s in paths.segments:
        if s.duration <= 0:
            continue
        inner = bps[(bps > s.t0) & (bps < s.t1)]
        edges = np.concatenate(([s.t0], inner, [s.t1]))
        for a, b in zip(edges[:-1], edges[1:]):
            half_w = 0.5 * (b - a)
            t = 0.5 * (a + b) + half_w * _GL_NODES
            frac = (t - s.t0) / s.duration
            ts.append(t)
            xl.append(s.xL0 + (s.xL1 - s.xL0) * frac)
            xr.append(s.xR0 + (s.xR1 - s.xR0) * frac)
            w.append(half_w * _GL_WEIGHTS)
    if not ts:
        empty = np.zeros(0)
        return empty, empty, empty, empty
    return tuple(np.concatenate(v) for v in (ts, xl, xr, w))


def phase_integral(paths: PathPair, pot: PotentialModel) -> float:
    """Differential phase (rad) by 16-point Gauss-Legendre on every breakpoint-split segment."""
    t, xl, xr, w = _quadrature_nodes(paths, pot.breakpoints())
    du = np.asarray(pot.value(xl, t) - pot.value(xr, t), float)
    if not np.all(np.isfinite(du)):
        raise FloatingPointError("potential evaluation returned non-finite values")
    return float(np.dot(w, du) / HBAR)


def inertial_potential(seq: Sequence, mass: float) -> PotentialModel:
    """Inertial pseudo-potential for every acceleration window in ``seq``."""
    parts = []
    for t0, dt, b in zip(seq.start_times(), seq.durations(), seq.blocks):
        if isinstance(b, AccelWindow) and b.accel != 0:
            parts.append(InertialWindow(b.accel, t0, t0 + dt, mass))
    return Sum(tuple(parts)) if parts else Zero()


def sequence_phase(seq: Sequence, pot: PotentialModel, lat: LatticeConfig | None = None, x0: float = 0.0) -> float:
    """Phase of ``seq`` under ``pot`` plus the inertial term of its acceleration windows."""
    lat = lat or LatticeConfig()
    total = Sum((pot, inertial_potential(seq, lat.mass)))
    return phase_integral(compute_paths(seq, lat, x0), total)


# ---------------------------------------------------------------------------
# Closed forms


def _check_n(n: int):
    if int(n) != n or n < 2 or n % 2:
        raise ValueError(f"n must be an even integer >= 2, got {n!r}")


def diamond_area_factor(n: int, timing: TimingParams) -> float:
    """``(n/2)^2 (tau_S + tau_pi) - (n/2) tau_pi`` in seconds."""
    _check_n(n)
    m = n / 2
    return m * m * (timing.tau_S + timing.tau_pi) - m * timing.tau_pi


def closed_form_diamond_phase(n: int, gradU: float, timing: TimingParams, d: float) -> float:
    return gradU / HBAR * d * diamond_area_factor(n, timing)


def closed_form_hold_phase(n: int, gradU: float, t_hold: float, d: float) -> float:
    _check_n(n)
    if t_hold < 0:
        raise ValueError("t_hold must be non-negative")
    return gradU * (n / 2) * d * t_hold / HBAR


def closed_form_acceleration_phase(n: int, mass: float, a: float, t_acc: float, d: float) -> float:
    _check_n(n)
    if not abs(a) < A_CRIT:
        raise ValueError(f"acceleration {a:g} m/s^2 exceeds Landau-Zener guard {A_CRIT:g} m/s^2")
    return mass * a * (n / 2) * d * t_acc / HBAR


def gradient_equivalent_acceleration(gradU: float, mass: float, g0: float) -> float:
    """Acceleration ``gradU / mass`` in units of ``g0``."""
    if not mass > 0:
        raise ValueError("mass must be positive")
    return gradU / mass / g0
