"""One-period propagators for the resonant kicked rotor.

Three routes to the same unitary:

* :func:`step` applies the banded momentum-space matrix
  ``U_lj = i^{-(j-l)} exp(-i tau j^2) J_{j-l}(kappa)``;
* :func:`closed_form_primary` jumps straight to step ``n`` at p/q = 1, where
  n kicks collapse into one band of J_m(n kappa);
* :func:`spectral_step` multiplies by ``exp(-i kappa cos theta)`` on the angle
  grid between discrete Fourier transforms.

They agree to roundoff while the state stays away from the lattice edge, and
the tests use each as an oracle for the others.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .core import Lattice, ResonanceParams, WaveState
from .special import bessel_band, decay_width

#: i^{-m} indexed by m mod 4
PHASE_TABLE = np.array([1.0, -1.0j, -1.0, 1.0j])

EDGE_WARN = 1e-8


class AliasingWarning(RuntimeWarning):
    """Spectral step ran with probability near the lattice edge."""


@dataclass
class Diagnostics:
    """Mutable accumulator for boundary losses during an evolution."""

    steps: int = 0
    leaked_mass: float = 0.0
    max_edge_occupation: float = 0.0
    edge_warnings: int = 0


@dataclass(frozen=True, eq=False)
class StepOperator:
    """Precomputed one-period map on a fixed lattice.

    ``band[m + band_width] = J_m(kappa)``; ``kick`` holds the same band with
    the ``i^{-m}`` factor folded in.  ``free_phase[i]`` is
    ``exp(-2 pi i (p/q) l^2)`` at ``l = l_min + i``.
    """

    lattice: Lattice
    params: ResonanceParams
    band: np.ndarray
    band_width: int
    free_phase: np.ndarray
    kick: np.ndarray = field(repr=False)
    angle_kick: np.ndarray = field(repr=False)


def band_width_for(x: float) -> int:
    return decay_width(x)


def kick_band(x: float) -> tuple[int, np.ndarray, np.ndarray]:
    """Band width, J_m(x) and i^{-m} J_m(x) for |m| <= width."""
    width = band_width_for(x)
    band = bessel_band(x, width)
    m = np.arange(-width, width + 1)
    return width, band, PHASE_TABLE[m % 4] * band


def _residue_phases(p: int, q: int) -> np.ndarray:
    # exp(-2 pi i r/q) for r = 0..q-1, exact at quarter turns
    exact = {0: 1.0, 1: -1.0j, 2: -1.0, 3: 1.0j}
    out = np.empty(q, dtype=complex)
    for r in range(q):
        if (4 * r) % q == 0:
            out[r] = exact[(4 * r) // q]
        else:
            out[r] = complex(math.cos(2 * math.pi * r / q), -math.sin(2 * math.pi * r / q))
    return out


def free_phases(lattice: Lattice, p: int, q: int) -> np.ndarray:
    """exp(-2 pi i (p/q) l^2) for every lattice site, via (p l^2) mod q."""
    l = lattice.indices
    residue = ((p % q) * ((l % q) ** 2)) % q
    return _residue_phases(p, q)[residue]


def build_step_operator(lattice: Lattice, params: ResonanceParams) -> StepOperator:
    width, band, kick = kick_band(params.kappa)
    theta = 2.0 * math.pi * np.arange(lattice.size) / lattice.size
    return StepOperator(
        lattice=lattice,
        params=params,
        band=band,
        band_width=width,
        free_phase=free_phases(lattice, params.p, params.q),
        kick=kick,
        angle_kick=np.exp(-1j * params.kappa * np.cos(theta)),
    )


def _apply_band(amps: np.ndarray, coeffs: np.ndarray, width: int) -> tuple[np.ndarray, float]:
    """out[l] = sum_m coeffs[m] amps[l + m]; returns the in-lattice part and the
    probability that fell outside."""
    # out = (c reversed) * amps as a full convolution over l_min-width .. l_max+width
    full = np.convolve(amps, coeffs[::-1])
    inside = full[width:width + len(amps)]
    spill = np.concatenate([full[:width], full[width + len(amps):]])
    leaked = math.fsum(spill.real ** 2 + spill.imag ** 2)
    return inside, leaked


def _check_lattice(state: WaveState, op: StepOperator):
    if state.lattice != op.lattice:
        raise ValueError(f"state lattice {state.lattice} does not match operator "
                         f"lattice {op.lattice}")


def step(state: WaveState, op: StepOperator,
         diagnostics: Optional[Diagnostics] = None) -> WaveState:
    """One kick period with the banded matrix.

    Amplitude pushed past either lattice edge is dropped and its probability
    added to ``diagnostics.leaked_mass``.
    """
    _check_lattice(state, op)
    out, leaked = _apply_band(op.free_phase * state.amplitudes, op.kick, op.band_width)
    if diagnostics is not None:
        diagnostics.steps += 1
        diagnostics.leaked_mass += leaked
    return WaveState(state.lattice, out)


def edge_occupation(state: WaveState, width: int) -> float:
    """Probability within ``width`` sites of either lattice edge."""
    a = state.amplitudes
    w = max(0, min(width, state.lattice.size // 2))
    if w == 0:
        return 0.0
    edge = np.concatenate([a[:w], a[-w:]])
    return math.fsum(edge.real ** 2 + edge.imag ** 2)


def spectral_step(state: WaveState, op: Union[StepOperator, ResonanceParams],
                  diagnostics: Optional[Diagnostics] = None) -> WaveState:
    """One kick period via the angle representation.

    The angle grid has one point per lattice site, so momentum wraps around
    modulo the lattice size.  Results match :func:`step` only while the edge
    occupation stays negligible; it is measured on every call and recorded in
    ``diagnostics`` (an :class:`AliasingWarning` is raised above 1e-8).
    """
    if isinstance(op, ResonanceParams):
        op = build_step_operator(state.lattice, op)
    _check_lattice(state, op)
    edge = edge_occupation(state, max(op.band_width, 1))
    if diagnostics is not None:
        diagnostics.steps += 1
        diagnostics.max_edge_occupation = max(diagnostics.max_edge_occupation, edge)
    if edge > EDGE_WARN:
        if diagnostics is not None:
            diagnostics.edge_warnings += 1
        warnings.warn(f"edge occupation {edge:.3g} exceeds {EDGE_WARN:g}; spectral "
                      "step is aliasing", AliasingWarning, stacklevel=2)
    # psi(theta_k) = sum_l a_l exp(i l theta_k) is N * ifft(a) up to a phase
    # that cancels on the way back
    psi = np.fft.ifft(op.free_phase * state.amplitudes)
    out = np.fft.fft(psi * op.angle_kick)
    return WaveState(state.lattice, out)


Recorder = Callable[[int, WaveState], None]


def evolve(state: WaveState, params: ResonanceParams, n: int,
           recorder: Optional[Recorder] = None, method: str = "banded",
           diagnostics: Optional[Diagnostics] = None) -> WaveState:
    """Apply ``n`` kick periods; ``recorder(k, state)`` is called after step k."""
    if n < 0:
        raise ValueError(f"number of steps must be >= 0, got {n}")
    if method == "banded":
        advance = step
    elif method == "spectral":
        advance = spectral_step
    else:
        raise ValueError(f"unknown method {method!r}; use 'banded' or 'spectral'")
    op = build_step_operator(state.lattice, params)
    for k in range(1, n + 1):
        state = advance(state, op, diagnostics)
        if recorder is not None:
            recorder(k, state)
    return state


def closed_form_primary(state0: WaveState, kappa: Union[float, ResonanceParams], n: int,
                        diagnostics: Optional[Diagnostics] = None) -> WaveState:
    """State after ``n`` kicks at p/q = 1 in a single banded convolution:
    ``a_l(n) = sum_j (-i)^{l-j} a_j(0) J_{l-j}(n kappa)``.
    """
    if isinstance(kappa, ResonanceParams):
        if not kappa.is_primary:
            raise ValueError(f"closed form holds only at primary resonance, got p/q = "
                             f"{kappa.label}")
        kappa = kappa.kappa
    if n < 0:
        raise ValueError(f"number of steps must be >= 0, got {n}")
    if not (math.isfinite(kappa) and kappa >= 0):
        raise ValueError(f"kappa must be finite and nonnegative, got {kappa}")
    width, _, coeffs = kick_band(n * kappa)
    out, leaked = _apply_band(state0.amplitudes, coeffs, width)
    if diagnostics is not None:
        diagnostics.leaked_mass += leaked
    return WaveState(state0.lattice, out)
