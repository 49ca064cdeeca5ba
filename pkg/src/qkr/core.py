"""Lattice, wavefunction and parameter types for the resonant kicked rotor.

States live in the angular-momentum representation on a finite, contiguous
window of integer momenta ``l_min..l_max``.  Amplitudes are stored densely.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

#: probability mass an initial envelope may leave outside the lattice
ENVELOPE_TAIL_TOL = 1e-12


@dataclass(frozen=True)
class Lattice:
    """Inclusive integer momentum window ``[l_min, l_max]``."""

    l_min: int
    l_max: int

    def __post_init__(self):
        if self.l_max - self.l_min + 1 < 3:
            raise ValueError(
                f"lattice needs at least 3 sites, got [{self.l_min}, {self.l_max}]")

    @classmethod
    def symmetric(cls, half_width: int) -> "Lattice":
        return make_lattice(-int(half_width), int(half_width))

    @property
    def size(self) -> int:
        return self.l_max - self.l_min + 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.l_min, self.l_max + 1, dtype=np.int64)

    def position(self, l: int) -> int:
        """Array position of momentum ``l``."""
        if not self.l_min <= l <= self.l_max:
            raise IndexError(f"momentum {l} outside lattice [{self.l_min}, {self.l_max}]")
        return l - self.l_min


def make_lattice(l_min: int, l_max: int, allow_offset: bool = False) -> Lattice:
    """Build a lattice; the origin must be interior unless ``allow_offset``."""
    l_min, l_max = int(l_min), int(l_max)
    if l_min >= l_max:
        raise ValueError(f"l_min must be < l_max, got ({l_min}, {l_max})")
    if not allow_offset and not l_min < 0 < l_max:
        raise ValueError(f"origin must be interior to [{l_min}, {l_max}]")
    return Lattice(l_min, l_max)


@dataclass(frozen=True, eq=False)
class WaveState:
    """Amplitudes ``a_l`` with ``amplitudes[i] = a_{l_min + i}``."""

    lattice: Lattice
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.lattice.size,):
            raise ValueError(
                f"expected {self.lattice.size} amplitudes, got shape {amps.shape}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def indices(self) -> np.ndarray:
        return self.lattice.indices

    def amplitude(self, l: int) -> complex:
        return complex(self.amplitudes[self.lattice.position(l)])

    def normalized(self) -> "WaveState":
        total = norm(self)
        if total == 0.0:
            raise ValueError("cannot normalize the zero state")
        return WaveState(self.lattice, self.amplitudes / math.sqrt(total))

    def shifted(self, k: int) -> "WaveState":
        """Translate the state by ``k`` sites, dropping what falls off the edge."""
        out = np.zeros_like(self.amplitudes)
        if k >= 0:
            out[k:] = self.amplitudes[:self.lattice.size - k]
        else:
            out[:k] = self.amplitudes[-k:]
        return WaveState(self.lattice, out)


@dataclass(frozen=True)
class ResonanceParams:
    """Resonance ``tau = 2 pi p/q`` together with the kick strength ``kappa``."""

    p: int
    q: int
    kappa: float

    def __post_init__(self):
        if int(self.p) != self.p or int(self.q) != self.q:
            raise ValueError("p and q must be integers")
        if self.p < 1 or self.q < 1:
            raise ValueError(f"p and q must be positive, got {self.p}/{self.q}")
        if math.gcd(int(self.p), int(self.q)) != 1:
            raise ValueError(f"p/q = {self.p}/{self.q} is not in lowest terms")
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise ValueError(f"kappa must be finite and nonnegative, got {self.kappa}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def tau(self) -> float:
        return 2.0 * math.pi * self.p / self.q

    @property
    def is_primary(self) -> bool:
        return self.q == 1

    @property
    def label(self) -> str:
        return f"{self.p}/{self.q}"


@dataclass(frozen=True)
class GaussianSpec:
    sigma0: float
    theta0: float = 0.0
    l_center: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.sigma0) and self.sigma0 > 0):
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if not math.isfinite(self.theta0):
            raise ValueError(f"theta0 must be finite, got {self.theta0}")
        object.__setattr__(self, "sigma0", float(self.sigma0))
        object.__setattr__(self, "theta0", float(self.theta0))
        object.__setattr__(self, "l_center", int(self.l_center))


def _gaussian_weights(offsets: np.ndarray, sigma0: float) -> np.ndarray:
    return np.exp(-(offsets.astype(float) ** 2) / (2.0 * sigma0 ** 2))


def envelope_tail_mass(sigma0: float, margin: int) -> float:
    """Fraction of the discrete Gaussian probability lying beyond ``margin`` sites
    on one side of the center, counted on both sides."""
    extra = int(math.ceil(12 * sigma0)) + 12
    k = np.arange(margin + 1, margin + 1 + extra)
    inside = np.arange(-margin, margin + 1)
    outside = 2.0 * math.fsum(_gaussian_weights(k, sigma0))
    return outside / (outside + math.fsum(_gaussian_weights(inside, sigma0)))


def gaussian_margin(sigma0: float) -> int:
    """Smallest half-width around the center that holds a Gaussian of width
    ``sigma0`` with at least a 6 sigma0 margin and tail mass under 1e-12."""
    margin = int(math.ceil(6 * sigma0))
    while envelope_tail_mass(sigma0, margin) > ENVELOPE_TAIL_TOL:
        margin += 1
    return margin


def gaussian_state(lattice: Lattice, spec: GaussianSpec) -> WaveState:
    """Phase-modulated Gaussian ``exp(-(l-c)^2 / 4 sigma0^2) exp(i theta0 l)``,
    normalized exactly on the lattice."""
    c = spec.l_center
    room = min(c - lattice.l_min, lattice.l_max - c)
    if room < 6 * spec.sigma0:
        raise ValueError(
            f"Gaussian envelope truncated: only {room} sites around center {c}, "
            f"need >= 6*sigma0 = {6 * spec.sigma0:g}")
    # one-sided tails are each below the symmetric estimate for the narrower side
    tail = envelope_tail_mass(spec.sigma0, room)
    if tail > ENVELOPE_TAIL_TOL:
        raise ValueError(
            f"Gaussian envelope truncated: tail mass {tail:.3g} outside lattice "
            f"exceeds {ENVELOPE_TAIL_TOL:g}; widen to >= {gaussian_margin(spec.sigma0)} "
            f"sites around the center")
    l = lattice.indices
    envelope = np.sqrt(_gaussian_weights(l - c, spec.sigma0))
    return _normalized(lattice, envelope * np.exp(1j * spec.theta0 * l))


def modulated_state(lattice: Lattice, envelope: Callable[[np.ndarray], np.ndarray],
                    theta0: float = 0.0) -> WaveState:
    """State ``f(l) exp(i theta0 l)`` for a nonnegative envelope ``f``.

    ``envelope`` is called once with the integer index array of the lattice.
    """
    l = lattice.indices
    f = np.asarray(envelope(l), dtype=float)
    if f.shape != l.shape:
        f = np.broadcast_to(f, l.shape)
    if np.any(f < 0) or not np.all(np.isfinite(f)):
        raise ValueError("envelope must be finite and nonnegative")
    if not np.any(f > 0):
        raise ValueError("envelope is identically zero on the lattice")
    return _normalized(lattice, f * np.exp(1j * theta0 * l))


def delta_state(lattice: Lattice, l: int = 0) -> WaveState:
    amps = np.zeros(lattice.size, dtype=complex)
    amps[lattice.position(l)] = 1.0
    return WaveState(lattice, amps)


def random_state(lattice: Lattice, rng: np.random.Generator,
                 support: tuple[int, int] | None = None) -> WaveState:
    """Normalized state with Gaussian-random amplitudes on ``support`` (inclusive)."""
    lo, hi = support if support is not None else (lattice.l_min, lattice.l_max)
    i0, i1 = lattice.position(lo), lattice.position(hi)
    amps = np.zeros(lattice.size, dtype=complex)
    n = i1 - i0 + 1
    amps[i0:i1 + 1] = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return _normalized(lattice, amps)


def _normalized(lattice: Lattice, amps: np.ndarray) -> WaveState:
    total = math.fsum(np.abs(amps) ** 2)
    return WaveState(lattice, amps / math.sqrt(total))


def norm(state: WaveState) -> float:
    """Total probability ``sum |a_l|^2`` (correctly rounded)."""
    a = state.amplitudes
    return math.fsum(a.real * a.real + a.imag * a.imag)
