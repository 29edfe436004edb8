"""Seeded Monte Carlo of single-atom Ramsey detection records.

Every fringe point draws from its own Philox stream keyed by
``(seed, stream_id, point_index)``; shot ``k`` of a point is the ``k``-th
counter value of that stream. Results therefore do not depend on how points
are scheduled across threads.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .constants import LatticeConfig
from .decoherence import DecoherenceParams, predict_contrast
from .paths import compute_paths, sequence_phase, spacetime_area
from .potentials import PotentialModel
from .sequence import Sequence, require_valid

SEED_MASK = (1 << 64) - 1


class RngStream:
    """Counter-based stream for one (seed, stream_id, point_index) key."""

    def __init__(self, seed: int, *key: int):
        if not 0 <= seed <= SEED_MASK:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.key = (int(seed), *map(int, key))
        ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def uniform(self, size=None):
        return self._gen.random(size)


def bernoulli_outcome(p: float, stream: RngStream) -> int:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p!r}")
    return int(stream.uniform() < p)


@dataclass(frozen=True)
class FringeModel:
    Phi: float
    C: float
    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.C <= 1.0:
            raise ValueError(f"contrast must lie in [0, 1], got {self.C!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma!r}")

    def probability(self, phi):
        p = (1 - self.gamma) / 2 * (1 + self.C * np.cos(self.Phi + np.asarray(phi, float)))
        return np.clip(p, 0.0, 1.0)


def uniform_phase_grid(points: int = 12) -> np.ndarray:
    return 2 * np.pi * np.arange(points) / points


@dataclass(frozen=True)
class FringeData:
    phi_grid: np.ndarray
    successes: np.ndarray
    shots: np.ndarray
    seed: int = 0

    def __post_init__(self):
        phi = np.asarray(self.phi_grid, float)
        s = np.asarray(self.successes)
        n = np.asarray(self.shots)
        if not (phi.shape == s.shape == n.shape) or phi.ndim != 1:
            raise ValueError("phi_grid, successes and shots must be 1-d and of equal length")
        if np.any(n <= 0) or np.any(s < 0) or np.any(s > n):
            raise ValueError("need 0 <= successes <= shots and shots > 0")
        object.__setattr__(self, "phi_grid", phi)
        object.__setattr__(self, "successes", s)
        object.__setattr__(self, "shots", n)

    @property
    def fractions(self) -> np.ndarray:
        return self.successes / self.shots

    @property
    def total_shots(self) -> int:
        return int(np.sum(self.shots))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phi_rad", "successes", "shots"])
        for phi, s, n in zip(self.phi_grid, self.successes, self.shots):
            w.writerow([f"{phi:.12g}", f"{s:.12g}", f"{n:.12g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, seed: int = 0) -> "FringeData":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls(
            np.array([float(r["phi_rad"]) for r in rows]),
            np.array([int(r["successes"]) for r in rows]),
            np.array([int(r["shots"]) for r in rows]),
            seed,
        )


def simulate_records(
    model: FringeModel, phi_grid, shots_per_point, seed: int, stream_id: int = 0, threads: int = 1
) -> list[np.ndarray]:
    """Binary detection record (one bool per atom) for every phase point."""
    phi_grid = np.asarray(phi_grid, float)
    shots = np.broadcast_to(np.asarray(shots_per_point, int), phi_grid.shape)
    probs = model.probability(phi_grid)

    def one(i):
        stream = RngStream(seed, stream_id, i)
        return stream.uniform(int(shots[i])) < probs[i]

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, range(len(phi_grid))))
    return [one(i) for i in range(len(phi_grid))]


def simulate_fringe(
    model: FringeModel, phi_grid, shots_per_point, seed: int, stream_id: int = 0, threads: int = 1
) -> FringeData:
    phi_grid = np.asarray(phi_grid, float)
    records = simulate_records(model, phi_grid, shots_per_point, seed, stream_id, threads)
    successes = np.array([int(r.sum()) for r in records], dtype=np.int64)
    shots = np.array([r.size for r in records], dtype=np.int64)
    return FringeData(phi_grid, successes, shots, seed)


@dataclass(frozen=True)
class MeasurementPlan:
    phi_grid: np.ndarray = field(default_factory=uniform_phase_grid)
    shots: object = 160  # per point: int or one int per grid point
    seed: int = 0
    stream_id: int = 0


@dataclass(frozen=True)
class TruthRecord:
    Phi: float
    C: float
    gamma: float
    n_shifts: int
    area: float  # m*s

    def as_dict(self) -> dict:
        return {"Phi_rad": self.Phi, "C": self.C, "gamma": self.gamma, "n_shifts": self.n_shifts, "area_m_s": self.area}


def run_experiment(
    seq: Sequence,
    pot: PotentialModel,
    dec: DecoherenceParams,
    plan: MeasurementPlan,
    lat: LatticeConfig | None = None,
    threads: int = 1,
) -> tuple[FringeData, TruthRecord]:
    lat = lat or LatticeConfig()
    require_valid(seq)
    paths = compute_paths(seq, lat)
    Phi = sequence_phase(seq, pot, lat)
    C = predict_contrast(seq, dec)
    truth = TruthRecord(Phi, C, dec.gamma_loss, seq.n_shifts, spacetime_area(paths))
    data = simulate_fringe(
        FringeModel(Phi, C, dec.gamma_loss), plan.phi_grid, plan.shots, plan.seed, plan.stream_id, threads
    )
    return data, truth
