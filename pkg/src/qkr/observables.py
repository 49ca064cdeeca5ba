"""Moments and diagnostics of a momentum-space state.

All reductions go through :func:`math.fsum`, which is correctly rounded and
therefore independent of summation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import WaveState, norm


def probability(state: WaveState) -> np.ndarray:
    """P_l = |a_l|^2, indexed like the lattice."""
    a = state.amplitudes
    return a.real * a.real + a.imag * a.imag


def moment1(state: WaveState) -> float:
    """M_1 = sum_l l |a_l|^2."""
    return math.fsum(state.indices * probability(state))


def moment2(state: WaveState) -> float:
    """M_2 = sum_l l^2 |a_l|^2."""
    l = state.indices.astype(float)
    return math.fsum(l * l * probability(state))


def variance(state: WaveState) -> float:
    return moment2(state) - moment1(state) ** 2


def angular_momentum(state: WaveState, hbar_scale: float = 1.0) -> float:
    return hbar_scale * moment1(state)


def energy(state: WaveState, epsilon_scale: float = 1.0) -> float:
    return epsilon_scale * moment2(state)


def tail_mass(state: WaveState, margin: int) -> float:
    """Probability within ``margin`` sites of either edge of the lattice."""
    size = state.lattice.size
    if not 0 <= margin < size / 2:
        raise ValueError(f"margin must satisfy 0 <= margin < {size / 2:g}, got {margin}")
    if margin == 0:
        return 0.0
    p = probability(state)
    return math.fsum(np.concatenate([p[:margin], p[-margin:]]))


class MomentEntry(NamedTuple):
    n: int
    m1: float
    m2: float
    variance: float
    norm: float
    tail_mass: float


VARIANCE_FLOOR = -1e-9


@dataclass
class MomentSeries:
    """Moments recorded at increasing times."""

    entries: list[MomentEntry] = field(default_factory=list)
    tail_margin: int = 10

    def record(self, n: int, state: WaveState) -> MomentEntry:
        m1, m2 = moment1(state), moment2(state)
        margin = min(self.tail_margin, (state.lattice.size - 1) // 2)
        entry = MomentEntry(n, m1, m2, m2 - m1 * m1, norm(state), tail_mass(state, margin))
        self.append(entry)
        return entry

    def append(self, entry: MomentEntry):
        if self.entries and entry.n <= self.entries[-1].n:
            raise ValueError(f"time {entry.n} does not follow {self.entries[-1].n}")
        if entry.variance < VARIANCE_FLOOR:
            raise ValueError(f"negative variance {entry.variance} at n = {entry.n}")
        self.entries.append(entry)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i) -> MomentEntry:
        return self.entries[i]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(e, name) for e in self.entries])

    @property
    def n(self) -> np.ndarray:
        return self.column("n")

    @property
    def m1(self) -> np.ndarray:
        return self.column("m1")

    @property
    def m2(self) -> np.ndarray:
        return self.column("m2")

    @property
    def variance(self) -> np.ndarray:
        return self.column("variance")
