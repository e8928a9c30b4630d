"""Seeded synthetic cities with known ground truth.

Random numbers come from numpy's Philox4x64 counter-based generator keyed by
``SyntheticSpec.seed``, drawn in a fixed order:

1. eight predictor innovations series (n each, predictor order), then
2. the shared latent innovations (n), then
3. water noise (n) and electricity noise (n).

Predictor latents are stationary AR(1) with unit variance,
``z[t] = phi * z[t-1] + sqrt(1 - phi^2) * e[t]``, ``phi = 0.5`` for weather
variables and ``0.9`` for the ENSO index; the shared latent uses
``phi = 0.5``. Weather variables add an annual climatology
``c(t) = cos(2*pi*(month - 7) / 12)`` (peak in July) and are mapped into
their physical ranges (see ``_predictors``).

A response is ``intercept + sum_j coef_j * zscore(X[:, j])
+ amplitude * cos(2*pi*(month - 7) / period) + coupling * latent
+ noise_sd * noise``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .dataset import PREDICTOR_NAMES, MonthStamp, NexusDataset
from .errors import ConfigurationError

WEATHER_AR = 0.5
ENSO_AR = 0.9
LATENT_AR = 0.5
VALID_PERIODS = (None, 6, 12)


@dataclass(frozen=True)
class ResponseRecipe:
    intercept: float = 100.0
    coefficients: dict = field(default_factory=dict)  # predictor name -> effect per std dev
    seasonal_amplitude: float = 0.0
    seasonal_period: int | None = None
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.seasonal_period not in VALID_PERIODS:
            raise ConfigurationError(f"seasonal_period must be one of {VALID_PERIODS}")
        unknown = set(self.coefficients) - set(PREDICTOR_NAMES)
        if unknown:
            raise ConfigurationError(f"unknown predictors in recipe: {sorted(unknown)}")
        if self.noise_sd < 0:
            raise ConfigurationError("noise_sd must be non-negative")


@dataclass(frozen=True)
class SyntheticSpec:
    n_months: int = 120
    seed: int = 0
    water: ResponseRecipe = field(default_factory=lambda: ResponseRecipe(
        intercept=100.0,
        coefficients={"max_dry_bulb_temp": 4.0, "avg_relative_humidity": -2.0, "enso_index": 3.0},
        seasonal_amplitude=6.0,
        seasonal_period=12,
        noise_sd=2.0,
    ))
    electricity: ResponseRecipe = field(default_factory=lambda: ResponseRecipe(
        intercept=50.0,
        coefficients={"max_dry_bulb_temp": 2.0, "dew_point_temp": 1.5, "enso_index": 1.5},
        seasonal_amplitude=4.0,
        seasonal_period=6,
        noise_sd=1.5,
    ))
    coupling: float = 0.5
    city_id: str = "synthetic"
    start: tuple = (2007, 1)
    customers: tuple = (1000.0, 1500.0)

    def __post_init__(self):
        if self.n_months < 24:
            raise ConfigurationError("n_months must be at least 24")
        if min(self.customers) <= 0:
            raise ConfigurationError("customer counts must be positive")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class GroundTruth:
    spec: SyntheticSpec
    seasonal: np.ndarray  # n x 2, the explicit seasonal terms
    latent: np.ndarray
    active_predictors: tuple  # per response, sorted predictor indices

    @property
    def active_union(self) -> tuple:
        return tuple(sorted(set().union(*self.active_predictors)))


def _ar1(innovations, phi):
    z = np.empty_like(innovations)
    z[0] = innovations[0]
    scale = np.sqrt(1.0 - phi * phi)
    for t in range(1, z.size):
        z[t] = phi * z[t - 1] + scale * innovations[t]
    return z


def _predictors(z, months):
    c = np.cos(2 * np.pi * (months - 7) / 12)
    max_temp = 58.0 + 22.0 * c + 4.0 * z[0]
    dew = np.minimum(40.0 + 20.0 * c + 4.0 * z[1], max_temp - 0.5)
    max_rh = 100.0 / (1.0 + np.exp(-(1.8 + 0.3 * c + 0.5 * z[2])))
    avg_rh = 100.0 / (1.0 + np.exp(-(0.6 + 0.2 * c + 0.5 * z[3])))
    max_wind = np.exp(np.log(20.0) - 0.15 * c + 0.2 * z[4])
    avg_wind = np.exp(np.log(9.0) - 0.15 * c + 0.2 * z[5])
    precip = np.exp(np.log(3.0) + 0.2 * c + 0.5 * z[6])
    enso = z[7]
    return np.column_stack([max_temp, dew, max_rh, avg_rh, max_wind, avg_wind, precip, enso])


def _seasonal_term(recipe, months):
    if recipe.seasonal_period is None or recipe.seasonal_amplitude == 0:
        return np.zeros(months.size)
    return recipe.seasonal_amplitude * np.cos(2 * np.pi * (months - 7) / recipe.seasonal_period)


def generate(spec: SyntheticSpec = SyntheticSpec()):
    """Return ``(NexusDataset, GroundTruth)`` for ``spec``; equal specs give equal bits."""
    n = spec.n_months
    rng = np.random.Generator(np.random.Philox(spec.seed))
    innovations = rng.standard_normal((len(PREDICTOR_NAMES), n))
    latent = _ar1(rng.standard_normal(n), LATENT_AR)
    noise = rng.standard_normal((2, n))

    first = MonthStamp(*spec.start).ordinal
    timeline = [MonthStamp.from_ordinal(first + t) for t in range(n)]
    months = np.array([s.month for s in timeline], dtype=float)
    z = [_ar1(innovations[j], ENSO_AR if name == "enso_index" else WEATHER_AR)
         for j, name in enumerate(PREDICTOR_NAMES)]
    X = _predictors(z, months)
    Xz = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)

    Y = np.empty((n, 2))
    seasonal = np.empty((n, 2))
    active = []
    for k, recipe in enumerate((spec.water, spec.electricity)):
        linear = np.zeros(n)
        for name, coef in recipe.coefficients.items():
            linear += coef * Xz[:, PREDICTOR_NAMES.index(name)]
        seasonal[:, k] = _seasonal_term(recipe, months)
        Y[:, k] = (recipe.intercept + linear + seasonal[:, k] + spec.coupling * latent
                   + recipe.noise_sd * noise[k])
        active.append(tuple(sorted(PREDICTOR_NAMES.index(name)
                                   for name, coef in recipe.coefficients.items() if coef != 0)))
    if (Y < 0).any():
        raise ConfigurationError("recipe produces negative usage; raise the intercepts")
    ds = NexusDataset(
        city_id=spec.city_id,
        timeline=timeline,
        X=X,
        Y=Y,
        customers=np.tile(np.asarray(spec.customers, dtype=float), (n, 1)),
        provenance={"synthetic_seed": spec.seed},
    )
    return ds, GroundTruth(spec, seasonal, latent, tuple(active))
