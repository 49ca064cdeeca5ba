"""Self-checks run by ``qkr verify``: the evolvers against each other and
against the exact moment sums.  Every check is deterministic."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import GaussianSpec, Lattice, ResonanceParams, delta_state, gaussian_state, random_state
from .evolvers import closed_form_primary, evolve
from .experiments import run_moment_series
from .observables import norm
from .special import bessel_row
from .theory import ExponentMode, predict_m1, predict_m2, variance_coefficient

KAPPA = 0.25


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tolerance)


def _max_diff(a, b) -> float:
    return float(np.max(np.abs(a.amplitudes - b.amplitudes)))


def _series_j(n: int, x: float, terms: int = 30) -> float:
    half = x / 2
    return math.fsum((-1) ** k * half ** (2 * k + n) / (math.factorial(k) * math.factorial(k + n))
                     for k in range(terms))


def check_bessel_series() -> Check:
    worst = 0.0
    for x in (0.1, 0.25, 0.5, 1.0, 1.5, 2.0):
        row = bessel_row(x, 12)
        worst = max(worst, max(abs(row.values[n] - _series_j(n, x)) for n in range(13)))
    return Check("bessel vs power series, x <= 2", worst, 1e-12)


def check_bessel_sum_rule() -> Check:
    worst = 0.0
    for x in (125.0, 500.0):
        v = bessel_row(x, int(x) + 120).values
        worst = max(worst, abs(v[0] ** 2 + 2 * math.fsum(v[1:] ** 2) - 1.0))
    return Check("bessel Neumann sum rule, x in {125, 500}", worst, 1e-12)


def check_closed_form() -> Check:
    lat = Lattice.symmetric(120)
    params = ResonanceParams(1, 1, KAPPA)
    worst = 0.0
    for s0 in (delta_state(lat), gaussian_state(lat, GaussianSpec(1.0, math.pi / 2))):
        worst = max(worst, _max_diff(evolve(s0, params, 100), closed_form_primary(s0, KAPPA, 100)))
    return Check("closed form vs banded, n = 100", worst, 1e-10)


def check_spectral() -> Check:
    lat = Lattice.symmetric(128)
    worst = 0.0
    for p, q in ((1, 1), (1, 3)):
        params = ResonanceParams(p, q, KAPPA)
        for s0 in (delta_state(lat), gaussian_state(lat, GaussianSpec(1.0, math.pi / 2))):
            worst = max(worst, _max_diff(evolve(s0, params, 100),
                                         evolve(s0, params, 100, method="spectral")))
    return Check("spectral vs banded, p/q in {1, 1/3}, n = 100", worst, 1e-10)


def check_revival() -> Check:
    lat = Lattice.symmetric(150)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for kappa in (0.25, 1.0, 3.0):
        s0 = random_state(lat, rng, (-40, 40))
        worst = max(worst, _max_diff(evolve(s0, ResonanceParams(1, 2, kappa), 2), s0))
    return Check("antiresonance revival p/q = 1/2", worst, 1e-12)


def check_moment_identity() -> Check:
    worst = 0.0
    for theta0 in (0.0, math.pi / 4, math.pi / 2):
        spec = GaussianSpec(1.0, theta0)
        series = run_moment_series(spec, ResonanceParams(1, 1, KAPPA), 500, record_every=50)
        init = gaussian_state(Lattice.symmetric(60), spec)
        for e in series:
            for got, want in ((e.m1, predict_m1(init, KAPPA, e.n)),
                              (e.m2, predict_m2(init, KAPPA, e.n))):
                worst = max(worst, abs(got - want) / max(abs(want), 1.0))
    return Check("simulated moments vs exact sums, n <= 500", worst, 1e-6)


def check_traveling_packet() -> Check:
    series = run_moment_series(GaussianSpec(1.0, math.pi / 2), ResonanceParams(1, 1, KAPPA),
                               500, record_every=500)
    target = -KAPPA * 500 * math.exp(-1 / 8)
    return Check("M1(500) vs -kappa n exp(-1/8), relative", abs(series[-1].m1 / target - 1), 0.01)


def check_figure1() -> Check:
    want = 1 + math.exp(-0.5) - 2 * math.exp(-0.25)
    got = variance_coefficient(1.0, math.pi / 2, ExponentMode.DERIVED_SQUARED)
    return Check("variance coefficient at sigma0 = 1, theta0 = pi/2", abs(got - want), 1e-12)


def check_unitarity() -> Check:
    lat = Lattice.symmetric(200)
    s0 = gaussian_state(lat, GaussianSpec(1.0, 0.3))
    worst = 0.0
    for p, q in ((1, 1), (1, 3), (2, 5)):
        worst = max(worst, abs(norm(evolve(s0, ResonanceParams(p, q, KAPPA), 200)) - 1))
    return Check("norm drift after 200 steps", worst, 200 * 1e-13)


CHECKS: list[Callable[[], Check]] = [
    check_bessel_series,
    check_bessel_sum_rule,
    check_closed_form,
    check_spectral,
    check_revival,
    check_moment_identity,
    check_traveling_packet,
    check_figure1,
    check_unitarity,
]


def run_checks() -> list[Check]:
    return [check() for check in CHECKS]

