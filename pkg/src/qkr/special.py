"""Integer-order Bessel functions of the first kind, J_n(x) for x >= 0.

Values come from Miller's backward recurrence

    J_{k-1}(x) = (2k/x) J_k(x) - J_{k+1}(x)

started far above both the requested order and the argument, where the
minimal solution J_k is negligible.  The unnormalized sequence is scaled by
the Neumann sum rule J_0^2 + 2 sum_{k>=1} J_k^2 = 1; the sign comes from the
companion identity J_0 + 2 sum_{k>=1} J_{2k} = 1.  Forward recurrence is
never used, it is unstable once k exceeds x.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNDERFLOW = 1e-300
_RESCALE_AT = 1e100
_SMALL_X = 1e-8


def miller_start(x: float, n_max: int) -> int:
    """Starting order of the backward recurrence."""
    return max(n_max, math.ceil(x)) + 40 + math.ceil(10.0 * x ** (1.0 / 3.0))


def decay_width(x: float) -> int:
    """Order beyond which |J_n(x)| is negligible (squares sum below 1e-28)."""
    if x == 0.0:
        return 0
    return math.ceil(x) + 40 + math.ceil(10.0 * x ** (1.0 / 3.0))


@dataclass(frozen=True, eq=False)
class BesselRow:
    """J_0(x) .. J_{n_max}(x) for a single argument."""

    x: float
    values: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, n: int) -> float:
        """Signed order lookup, ``row[-n] = (-1)^n row[n]``."""
        v = float(self.values[abs(n)])
        return -v if n < 0 and n % 2 else v

    def symmetric(self) -> np.ndarray:
        """J_m(x) for m = -n_max .. n_max."""
        pos = self.values
        neg = pos[:0:-1].copy()
        neg[(np.arange(len(neg), 0, -1) % 2) == 1] *= -1.0
        return np.concatenate([neg, pos])


def _check_arg(x: float) -> float:
    x = float(x)
    if not math.isfinite(x) or x < 0:
        raise ValueError(f"Bessel argument must be finite and >= 0, got {x}")
    return x


def _series_row(x: float, n_max: int) -> np.ndarray:
    # leading two terms of the power series; exact to double precision for x < 1e-8
    half = 0.5 * x
    out = np.zeros(n_max + 1)
    term = 1.0
    for n in range(n_max + 1):
        if term < UNDERFLOW:
            break
        out[n] = term * (1.0 - half * half / (n + 1))
        term *= half / (n + 1)
    return out


def bessel_row(x: float, n_max: int) -> BesselRow:
    """Return J_0(x) .. J_{n_max}(x)."""
    x = _check_arg(x)
    n_max = int(n_max)
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    if x == 0.0:
        values = np.zeros(n_max + 1)
        values[0] = 1.0
        return BesselRow(x, values)
    if x < _SMALL_X:
        return BesselRow(x, _series_row(x, n_max))

    start = miller_start(x, n_max)
    vals = [0.0] * (start + 1)
    upper, current = 0.0, 1.0   # J_{k+1}, J_k up to a common scale
    vals[start] = current
    for k in range(start, 0, -1):
        lower = (2.0 * k / x) * current - upper
        if abs(lower) > _RESCALE_AT:
            scale = 1.0 / _RESCALE_AT
            for i in range(k, start + 1):
                vals[i] *= scale
            current *= scale
            lower *= scale
        vals[k - 1] = lower
        upper, current = current, lower

    arr = np.array(vals)
    sum_sq = arr[0] * arr[0] + 2.0 * math.fsum(arr[1:] * arr[1:])
    sum_even = arr[0] + 2.0 * math.fsum(arr[2::2])
    scale = math.copysign(1.0 / math.sqrt(sum_sq), sum_even)
    values = arr[:n_max + 1] * scale
    values[np.abs(values) < UNDERFLOW] = 0.0
    return BesselRow(x, values)


def bessel_j(n: int, x: float) -> float:
    """J_n(x) for any integer order ``n``."""
    n = int(n)
    return bessel_row(x, abs(n))[n]


def bessel_band(x: float, width: int | None = None) -> np.ndarray:
    """J_m(x) for m = -width .. width; ``width`` defaults to :func:`decay_width`."""
    if width is None:
        width = decay_width(_check_arg(x))
    return bessel_row(x, width).symmetric()
