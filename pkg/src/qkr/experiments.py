"""Numerical experiments: moment series, group-velocity fits and sweeps."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import stats

from .core import GaussianSpec, Lattice, ResonanceParams, gaussian_margin, gaussian_state
from .evolvers import Diagnostics, build_step_operator, spectral_step, step
from .observables import MomentSeries, probability
from .special import decay_width
from .theory import ExponentMode, variance_coefficient

MAX_SITES = 1 << 20
DEFAULT_SWEEP_STEPS = 600
MIN_FIT_POINTS = 10


class ResourceError(RuntimeError):
    """Requested lattice exceeds the configured size cap."""


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    stderr_slope: float
    window: tuple[int, int]
    residual_rms: float


def default_window(n_steps: int) -> tuple[int, int]:
    """Skip the first fifth of the run, where secondary resonances are transient."""
    return n_steps // 5, n_steps


def fit_group_velocity(series: MomentSeries,
                       window: Optional[tuple[int, int]] = None) -> LinearFit:
    """Least-squares line through M_1(n) over ``window`` (inclusive, clamped to
    the recorded times)."""
    n = series.n
    if len(n) == 0:
        raise ValueError("empty moment series")
    lo, hi = window if window is not None else default_window(int(n[-1]))
    lo, hi = max(lo, int(n[0])), min(hi, int(n[-1]))
    sel = (n >= lo) & (n <= hi)
    if sel.sum() < MIN_FIT_POINTS:
        raise ValueError(f"fit window [{lo}, {hi}] holds {int(sel.sum())} points, "
                         f"need >= {MIN_FIT_POINTS}")
    t = n[sel].astype(float)
    y = series.m1[sel]
    if np.ptp(t) == 0:
        raise ValueError("degenerate fit: all times identical")
    res = stats.linregress(t, y)
    resid = y - (res.intercept + res.slope * t)
    return LinearFit(slope=float(res.slope), intercept=float(res.intercept),
                     stderr_slope=float(res.stderr), window=(lo, hi),
                     residual_rms=float(np.sqrt(np.mean(resid ** 2))))


def auto_half_width(spec: GaussianSpec, kappa: float, n_steps: int) -> int:
    """Half-width that holds the initial envelope plus everything the kicks can
    reach in ``n_steps`` periods."""
    x = n_steps * kappa
    reach = max(decay_width(x) + 10, math.ceil(x) + 50)
    return abs(spec.l_center) + gaussian_margin(spec.sigma0) + reach


def _lattice_for(spec: GaussianSpec, kappa: float, n_steps: int,
                 half_width: Optional[int], max_sites: int) -> Lattice:
    hw = auto_half_width(spec, kappa, n_steps) if half_width is None else int(half_width)
    if 2 * hw + 1 > max_sites:
        raise ResourceError(f"lattice of {2 * hw + 1} sites exceeds cap of {max_sites}")
    return Lattice.symmetric(hw)


def run_moment_series(spec: GaussianSpec, params: ResonanceParams, n_steps: int,
                      record_every: int = 1, half_width: Optional[int] = None,
                      method: str = "banded", max_sites: int = MAX_SITES,
                      diagnostics: Optional[Diagnostics] = None) -> MomentSeries:
    """Evolve the Gaussian and record moments at n = 0, record_every, ...
    and at the final step."""
    if n_steps < 0:
        raise ValueError(f"n_steps must be >= 0, got {n_steps}")
    if record_every < 1:
        raise ValueError(f"record_every must be >= 1, got {record_every}")
    lattice = _lattice_for(spec, params.kappa, n_steps, half_width, max_sites)
    state = gaussian_state(lattice, spec)
    op = build_step_operator(lattice, params)
    advance = {"banded": step, "spectral": spectral_step}[method]
    series = MomentSeries(tail_margin=max(op.band_width, 1))
    series.record(0, state)
    for k in range(1, n_steps + 1):
        state = advance(state, op, diagnostics)
        if k % record_every == 0 or k == n_steps:
            series.record(k, state)
    return series


@dataclass(frozen=True)
class SweepRecord:
    """One point of a sweep, with everything needed to regenerate it."""

    variable: str
    value: float
    vg: float
    stderr: float
    residual_rms: float
    window: tuple[int, int]
    p: int
    q: int
    kappa: float
    sigma0: float
    theta0: float
    half_width: int
    n_steps: int
    record_every: int = 1
    method: str = "banded"

    def rerun(self) -> "SweepRecord":
        return _sweep_point(self.variable, self.value, self.p, self.q, self.kappa,
                            self.sigma0, self.theta0, self.n_steps, self.window,
                            self.half_width, self.record_every, self.method)

    def to_dict(self) -> dict:
        return asdict(self)


def _sweep_point(variable, value, p, q, kappa, sigma0, theta0, n_steps, window,
                 half_width, record_every, method) -> SweepRecord:
    spec = GaussianSpec(sigma0, theta0)
    params = ResonanceParams(p, q, kappa)
    if half_width is None:
        half_width = auto_half_width(spec, kappa, n_steps)
    series = run_moment_series(spec, params, n_steps, record_every=record_every,
                               half_width=half_width, method=method)
    fit = fit_group_velocity(series, window)
    return SweepRecord(variable=variable, value=float(value), vg=fit.slope,
                       stderr=fit.stderr_slope, residual_rms=fit.residual_rms,
                       window=fit.window, p=p, q=q, kappa=float(kappa),
                       sigma0=float(sigma0), theta0=float(theta0),
                       half_width=int(half_width), n_steps=n_steps,
                       record_every=record_every, method=method)


def _run_points(points: list[tuple], workers: int) -> list[SweepRecord]:
    if workers <= 1 or len(points) <= 1:
        return [_sweep_point(*pt) for pt in points]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves input order regardless of completion order
        return list(pool.map(_sweep_point, *zip(*points)))


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("sweep grid must be a nonempty 1-d sequence")
    return grid


def sweep_theta(params: ResonanceParams, sigma0: float, theta_grid: Sequence[float],
                n_steps: int = DEFAULT_SWEEP_STEPS, window: Optional[tuple[int, int]] = None,
                record_every: int = 1, method: str = "banded",
                workers: int = 1) -> list[SweepRecord]:
    """Fitted group velocity for each initial angle."""
    grid = _check_grid(theta_grid)
    window = window or default_window(n_steps)
    points = [("theta0", th, params.p, params.q, params.kappa, sigma0, th, n_steps,
               window, None, record_every, method) for th in grid]
    return _run_points(points, workers)


def sweep_kappa(p: int, q: int, sigma0: float, theta0: float, kappa_grid: Sequence[float],
                n_steps: int = DEFAULT_SWEEP_STEPS, window: Optional[tuple[int, int]] = None,
                record_every: int = 1, method: str = "banded",
                workers: int = 1) -> list[SweepRecord]:
    """Fitted group velocity for each kick strength."""
    grid = _check_grid(kappa_grid)
    ResonanceParams(p, q, 0.0)  # validates p/q up front
    window = window or default_window(n_steps)
    points = [("kappa", k, p, q, k, sigma0, theta0, n_steps, window, None,
               record_every, method) for k in grid]
    return _run_points(points, workers)


class Figure1Row(NamedTuple):
    sigma0: float
    theta0: float
    coefficient: float


def figure1_data(sigma0_list: Sequence[float], theta_grid: Sequence[float],
                 mode: ExponentMode | str = ExponentMode.DERIVED_SQUARED) -> list[Figure1Row]:
    """Variance growth coefficient 2(sigma^2 - sigma0^2)/(kappa n)^2 on a grid."""
    return [Figure1Row(float(s), float(th), variance_coefficient(s, th, mode))
            for s in sigma0_list for th in theta_grid]


class Snapshot(NamedTuple):
    time: int
    l: np.ndarray
    p: np.ndarray


def snapshot_distributions(spec: GaussianSpec, params: ResonanceParams,
                           times: Sequence[int], half_width: Optional[int] = None,
                           max_sites: int = MAX_SITES) -> list[Snapshot]:
    """Momentum distributions at the requested (strictly increasing) times,
    from a single evolution."""
    times = [int(t) for t in times]
    if not times:
        raise ValueError("no snapshot times given")
    if times[0] < 0 or any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError(f"snapshot times must be nonnegative and strictly increasing, "
                         f"got {times}")
    lattice = _lattice_for(spec, params.kappa, times[-1], half_width, max_sites)
    state = gaussian_state(lattice, spec)
    op = build_step_operator(lattice, params)
    out = []
    pending = iter(times)
    target = next(pending)
    for k in range(times[-1] + 1):
        if k > 0:
            state = step(state, op)
        if k == target:
            out.append(Snapshot(k, lattice.indices, probability(state)))
            target = next(pending, None)
    return out


def nonlinearity(kappas: np.ndarray, vgs: np.ndarray) -> float:
    """max |residual| of the best line through the origin, over max |vg|."""
    kappas, vgs = np.asarray(kappas, float), np.asarray(vgs, float)
    slope = float(kappas @ vgs) / float(kappas @ kappas)
    return float(np.max(np.abs(vgs - slope * kappas)) / np.max(np.abs(vgs)))


def period_pi_mismatch(theta_grid: Sequence[float], vgs: Sequence[float]) -> float:
    """max |vg(theta) - vg(theta + pi)| over grid points whose partner theta + pi
    is also on the grid, relative to the peak-to-peak swing of vg."""
    theta = np.asarray(theta_grid, float)
    vgs = np.asarray(vgs, float)
    worst, pairs = 0.0, 0
    for i, th in enumerate(theta):
        match = np.flatnonzero(np.abs(theta - (th + math.pi)) < 1e-9)
        if match.size:
            worst = max(worst, abs(vgs[i] - vgs[match[0]]))
            pairs += 1
    if pairs == 0:
        raise ValueError("no grid point has its theta + pi partner on the grid")
    return float(worst / np.ptp(vgs))
