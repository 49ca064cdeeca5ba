"""Analytic predictions at primary resonance (p/q = 1).

``predict_m1``/``predict_m2`` evaluate the exact moment identities as finite
sums over the initial amplitudes and are the reference for the simulator.
The Gaussian closed forms are available with the exponents as originally
printed (``1/(8 sigma0)`` ...) or with the squared width that the Gaussian
sums actually produce (``1/(8 sigma0^2)`` ...); the two coincide at
sigma0 = 1.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import GaussianSpec, WaveState, gaussian_margin, gaussian_state, make_lattice, norm
from .observables import moment1, moment2, variance


class ExponentMode(str, enum.Enum):
    PAPER_PRINTED = "paper_printed"
    DERIVED_SQUARED = "derived_squared"


def dispersion(theta: float, kappa: float) -> float:
    """Quasi-energy per kick of the plane wave with angle ``theta``."""
    return kappa * math.cos(theta)


def group_velocity_plane(theta: float, kappa: float) -> float:
    """d(omega)/d(theta) = -kappa sin(theta)."""
    return -kappa * math.sin(theta)


def _neighbour_overlaps(a: np.ndarray, shift: int) -> np.ndarray:
    """a_j conj(a_{j+shift}) for every j with both sites on the lattice."""
    return a[:-shift] * np.conj(a[shift:])


def drift_rate(init: WaveState) -> float:
    """-sum_j Im[a_j conj(a_{j-1})]; the exact slope dM_1/dn per unit kappa."""
    # a_j conj(a_{j-1}) over pairs (j-1, j) is the conjugate of a_{j-1} conj(a_j)
    pairs = _neighbour_overlaps(init.amplitudes, 1)
    return math.fsum(pairs.imag)


def predict_m1(init: WaveState, kappa: float, n: int) -> float:
    """M_1(n) = -kappa n sum_j Im[a_j conj(a_{j-1})] + M_1(0)."""
    return kappa * n * drift_rate(init) + moment1(init)


def predict_m2(init: WaveState, kappa: float, n: int) -> float:
    """M_2(n) = (kappa n)^2/2 (N - sum Re[a_j conj(a_{j+2})])
    + kappa n sum (2j+1) Im[a_j conj(a_{j+1})] + M_2(0), with N the norm (1 for
    normalized input)."""
    a = init.amplitudes
    l = init.indices[:-1].astype(float)
    second = math.fsum(_neighbour_overlaps(a, 2).real)
    first = math.fsum((2.0 * l + 1.0) * _neighbour_overlaps(a, 1).imag)
    x = kappa * n
    return 0.5 * x * x * (norm(init) - second) + x * first + moment2(init)


def predict_variance(init: WaveState, kappa: float, n: int) -> float:
    return predict_m2(init, kappa, n) - predict_m1(init, kappa, n) ** 2


def _width_term(sigma0: float, mode: ExponentMode | str) -> float:
    mode = ExponentMode(mode)
    return sigma0 if mode is ExponentMode.PAPER_PRINTED else sigma0 * sigma0


def variance_coefficient(sigma0: float, theta0: float,
                         mode: ExponentMode | str = ExponentMode.DERIVED_SQUARED) -> float:
    """2 (sigma^2(n) - sigma^2(0)) / (kappa n)^2 for the Gaussian initial state."""
    s = _width_term(sigma0, mode)
    return (1.0 - math.cos(2 * theta0) * math.exp(-1.0 / (2 * s))
            - 2.0 * math.sin(theta0) ** 2 * math.exp(-1.0 / (4 * s)))


def gaussian_velocity(sigma0: float, theta0: float, kappa: float,
                      mode: ExponentMode | str = ExponentMode.DERIVED_SQUARED) -> float:
    return -kappa * math.sin(theta0) * math.exp(-1.0 / (8 * _width_term(sigma0, mode)))


@dataclass(frozen=True)
class GaussianMomentPrediction:
    m1: float
    m2: float
    variance: float
    vg: float
    exponent_mode: ExponentMode


def discrete_gaussian(spec: GaussianSpec) -> WaveState:
    """The Gaussian initial state on the smallest lattice that holds it."""
    half = gaussian_margin(spec.sigma0) + 1
    c = spec.l_center
    return gaussian_state(make_lattice(c - half, c + half, allow_offset=True), spec)


def gaussian_moments(spec: GaussianSpec, kappa: float, n: int,
                     mode: ExponentMode | str = ExponentMode.DERIVED_SQUARED
                     ) -> GaussianMomentPrediction:
    """Closed-form moments of the evolved Gaussian.

    Initial moments come from the discrete initial state, not from the
    continuum values.
    """
    mode = ExponentMode(mode)
    init = discrete_gaussian(spec)
    m1_0, m2_0, var_0 = moment1(init), moment2(init), variance(init)
    s = _width_term(spec.sigma0, mode)
    x = kappa * n
    vg = gaussian_velocity(spec.sigma0, spec.theta0, kappa, mode)
    drift = vg * n
    # the (2j+1) Im[..] sum is 2 * l_center * drift/(kappa n) for a symmetric envelope
    m2 = (0.5 * x * x * (1.0 - math.cos(2 * spec.theta0) * math.exp(-1.0 / (2 * s)))
          + 2.0 * spec.l_center * drift + m2_0)
    m1 = m1_0 + drift
    var = 0.5 * x * x * variance_coefficient(spec.sigma0, spec.theta0, mode) + var_0
    return GaussianMomentPrediction(m1=m1, m2=m2, variance=var, vg=vg, exponent_mode=mode)
