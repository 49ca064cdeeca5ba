"""Resonant quantum kicked rotor: exact maps, moment theory and experiments."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .core import (GaussianSpec, Lattice, ResonanceParams, WaveState, delta_state,
                   gaussian_state, make_lattice, modulated_state, norm, random_state)
from .evolvers import (Diagnostics, StepOperator, build_step_operator, closed_form_primary,
                       evolve, spectral_step, step)
from .observables import (MomentSeries, angular_momentum, energy, moment1, moment2,
                          probability, tail_mass, variance)
from .special import BesselRow, bessel_j, bessel_row
from .theory import (ExponentMode, GaussianMomentPrediction, dispersion, gaussian_moments,
                     group_velocity_plane, predict_m1, predict_m2)
