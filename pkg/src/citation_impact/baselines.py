"""Competing growth-curve models and the preferential-attachment threshold.

All curves are cumulative citation counts with ``c(0) = 0``. Logistic and
Gompertz are anchored by subtracting their value at ``t = 0`` and rescaling
so the asymptote stays at the saturation ``S``. Times are in days.

Each model is a small stateless object exposing ``curve`` and ``grad``
(derivative of the count with respect to the natural parameters) plus the
bounds and start grid used by the multi-start fitter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np
from scipy import optimize, special

from .core import DEFAULT_M, GlobalConstants, normal_pdf, phi, ultimate_impact

TIME_SCALES = (90.0, 365.0, 1095.0, 3650.0)
MU_BOUNDS = (math.log(1.0), math.log(200 * 365.25))
SIGMA_BOUNDS = (0.05, 10.0)
MU_GRID = tuple(math.log(s) for s in TIME_SCALES)
SIGMA_GRID = (0.5, 1.0, 2.0)

# fitness below which preferential attachment has little effect
DORMANT_ATTACHMENT_LAMBDA = 0.25


class CurveModel:
    kind: str = ""
    param_names: tuple = ()

    def curve(self, theta, t, m):
        raise NotImplementedError

    def grad(self, theta, t, m):
        raise NotImplementedError

    def log_value(self, theta, t, m):
        """``ln(1 + c/m)``, the space the fitter works in."""
        return np.log1p(self.curve(theta, t, m) / m)

    def log_grad(self, theta, t, m):
        f = self.curve(theta, t, m)
        return self.grad(theta, t, m) / (m + f)[:, None]

    def bounds(self, m):
        raise NotImplementedError

    def starts(self, t, c, m, time_scales=TIME_SCALES, **grids):
        raise NotImplementedError

    def tie_key(self, theta):
        return tuple(theta)

    def saturation(self, theta, m):
        raise NotImplementedError


def _safe_x_pdf(x):
    # x * pdf(x) -> 0 at x = -inf (age 0)
    with np.errstate(invalid="ignore"):
        out = x * normal_pdf(x)
    return np.where(np.isfinite(x), out, 0.0)


def _log_time(t):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(t, dtype=float))


class Lognormal(CurveModel):
    """Aging without preferential attachment: ``m * lam * Phi(x)``."""

    kind = "lognormal"
    param_names = ("lam", "mu", "sigma")

    def curve(self, theta, t, m):
        lam, mu, sigma = theta
        return m * lam * phi((_log_time(t) - mu) / sigma)

    def grad(self, theta, t, m):
        lam, mu, sigma = theta
        x = (_log_time(t) - mu) / sigma
        n = normal_pdf(x)
        return np.column_stack(
            [m * phi(x), -m * lam * n / sigma, -m * lam * _safe_x_pdf(x) / sigma]
        )

    def bounds(self, m):
        return (np.array([1e-9, MU_BOUNDS[0], SIGMA_BOUNDS[0]]),
                np.array([1e6, MU_BOUNDS[1], SIGMA_BOUNDS[1]]))

    def starts(self, t, c, m, time_scales=TIME_SCALES, mu_grid=MU_GRID, sigma_grid=SIGMA_GRID):
        lam0 = max(c[-1], 1.0) / m
        return [np.array([lam0, mu, s]) for mu in mu_grid for s in sigma_grid]

    def tie_key(self, theta):
        return (theta[0], theta[2], theta[1])

    def saturation(self, theta, m):
        return m * theta[0]


class Logistic(CurveModel):
    """Anchored logistic: ``S * (L(t) - L(0)) / (1 - L(0))``."""

    kind = "logistic"
    param_names = ("S", "k", "t0")

    def _parts(self, theta, t):
        S, k, t0 = theta
        t = np.asarray(t, dtype=float)
        z = k * (t - t0)
        L, oneL = special.expit(z), special.expit(-z)
        L0, oneL0 = special.expit(-k * t0), special.expit(k * t0)
        return S, k, t0, t, L, oneL, L0, oneL0

    def curve(self, theta, t, m=None):
        S, k, t0, t, L, oneL, L0, oneL0 = self._parts(theta, t)
        return S * (L - L0) / oneL0

    def grad(self, theta, t, m=None):
        S, k, t0, t, L, oneL, L0, oneL0 = self._parts(theta, t)
        g = (L - L0) / oneL0
        dL_dk, dL_dt0 = L * oneL * (t - t0), -k * L * oneL
        dL0_dk, dL0_dt0 = -L0 * oneL0 * t0, -k * L0 * oneL0
        dg_dk = (dL_dk * oneL0 - dL0_dk * oneL) / oneL0**2
        dg_dt0 = (dL_dt0 * oneL0 - dL0_dt0 * oneL) / oneL0**2
        return np.column_stack([g, S * dg_dk, S * dg_dt0])

    def bounds(self, m):
        return (np.array([1e-6, 1e-6, -36525.0]), np.array([1e8, 1.0, 73050.0]))

    def starts(self, t, c, m, time_scales=TIME_SCALES, steepness=(1.0, 2.0, 5.0), **_):
        S0 = max(c[-1], 1.0)
        return [np.array([S0, s / tau, tau]) for tau in time_scales for s in steepness]

    def saturation(self, theta, m):
        return theta[0]


class Bass(CurveModel):
    """Bass diffusion: ``S * (1 - e^{-(p+q)t}) / (1 + (q/p) e^{-(p+q)t})``."""

    kind = "bass"
    param_names = ("S", "p", "q")

    def curve(self, theta, t, m=None):
        S, p, q = theta
        t = np.asarray(t, dtype=float)
        E = np.exp(-(p + q) * t)
        return S * -np.expm1(-(p + q) * t) / (1.0 + (q / p) * E)

    def grad(self, theta, t, m=None):
        S, p, q = theta
        t = np.asarray(t, dtype=float)
        E = np.exp(-(p + q) * t)
        oneE = -np.expm1(-(p + q) * t)
        r = q / p
        D = 1.0 + r * E
        g = oneE / D
        dE = -t * E
        cols = [g]
        for dr in (-q / p**2, 1.0 / p):
            dD = dr * E + r * dE
            cols.append(S * (-dE * D - oneE * dD) / D**2)
        return np.column_stack(cols)

    def bounds(self, m):
        return (np.array([1e-6, 1e-8, 1e-8]), np.array([1e8, 1.0, 1.0]))

    def starts(self, t, c, m, time_scales=TIME_SCALES, ratios=(0.1, 1.0, 10.0), **_):
        S0 = max(c[-1], 1.0)
        out = []
        for tau in time_scales:
            a = 1.0 / tau
            for r in ratios:
                out.append(np.array([S0, a / (1 + r), a * r / (1 + r)]))
        return out

    def saturation(self, theta, m):
        return theta[0]


class Gompertz(CurveModel):
    """Anchored Gompertz: ``S * (G(t) - G(0)) / (1 - G(0))``, ``G = exp(-b e^{-kt})``."""

    kind = "gompertz"
    param_names = ("S", "b", "k")

    def _parts(self, theta, t):
        S, b, k = theta
        t = np.asarray(t, dtype=float)
        E = np.exp(-k * t)
        G, oneG = np.exp(-b * E), -np.expm1(-b * E)
        G0, oneG0 = math.exp(-b), -math.expm1(-b)
        return S, b, k, t, E, G, oneG, G0, oneG0

    def curve(self, theta, t, m=None):
        S, b, k, t, E, G, oneG, G0, oneG0 = self._parts(theta, t)
        return S * (G - G0) / oneG0

    def grad(self, theta, t, m=None):
        S, b, k, t, E, G, oneG, G0, oneG0 = self._parts(theta, t)
        g = (G - G0) / oneG0
        dG_db, dG_dk = -E * G, b * t * E * G
        dg_db = (dG_db * oneG0 + G0 * oneG) / oneG0**2
        dg_dk = dG_dk / oneG0
        return np.column_stack([g, S * dg_db, S * dg_dk])

    def bounds(self, m):
        return (np.array([1e-6, 1e-6, 1e-6]), np.array([1e8, 1e4, 1.0]))

    def starts(self, t, c, m, time_scales=TIME_SCALES, displacements=(0.5, 2.0, 8.0), **_):
        S0 = max(c[-1], 1.0)
        return [np.array([S0, b, 1.0 / tau]) for tau in time_scales for b in displacements]

    def saturation(self, theta, m):
        return theta[0]


BASELINE_MODELS: Dict[str, CurveModel] = {
    mdl.kind: mdl for mdl in (Lognormal(), Logistic(), Bass(), Gompertz())
}


@dataclass(frozen=True)
class BaselineParams:
    """Saturation plus model-specific shape parameters.

    For ``lognormal`` the shape holds ``lam``, ``mu``, ``sigma`` and the
    saturation is ``m * lam``.
    """

    kind: str
    saturation: float
    shape: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BASELINE_MODELS:
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        names = BASELINE_MODELS[self.kind].param_names
        expected = set(names) if self.kind == "lognormal" else set(names[1:])
        if set(self.shape) != expected:
            raise ValueError(f"{self.kind} shape needs {sorted(expected)}, got {sorted(self.shape)}")
        if not (self.saturation > 0 and math.isfinite(self.saturation)):
            raise ValueError("saturation must be positive")
        rates = {"logistic": ("k",), "bass": ("p", "q"), "gompertz": ("b", "k"),
                 "lognormal": ("lam", "sigma")}[self.kind]
        for name in rates:
            if not self.shape[name] > 0:
                raise ValueError(f"{name} must be positive")

    def theta(self) -> np.ndarray:
        names = BASELINE_MODELS[self.kind].param_names
        if self.kind == "lognormal":
            return np.array([self.shape[n] for n in names], dtype=float)
        return np.array([self.saturation] + [self.shape[n] for n in names[1:]], dtype=float)

    @classmethod
    def from_theta(cls, kind, theta, m=DEFAULT_M) -> "BaselineParams":
        names = BASELINE_MODELS[kind].param_names
        theta = [float(v) for v in theta]
        if kind == "lognormal":
            return cls(kind, m * theta[0], dict(zip(names, theta)))
        return cls(kind, theta[0], dict(zip(names[1:], theta[1:])))


def baseline_curve(p: BaselineParams, t, g: GlobalConstants = GlobalConstants()):
    """Expected cumulative citations at age ``t`` under a baseline model."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise ValueError("times must be non-negative")
    if p.kind == "lognormal" and not math.isclose(p.saturation, g.m * p.shape["lam"]):
        raise ValueError("lognormal saturation must equal m * lam")
    out = BASELINE_MODELS[p.kind].curve(p.theta(), t, g.m)
    return out if out.ndim else float(out)


def linearisation_gap(lam):
    """Worst relative gap between ``e^{lam u} - 1`` and ``lam u`` over ``u`` in (0, 1].

    ``1 - y / (e^y - 1)`` increases with ``y = lam * u``, so the supremum is
    reached at ``u = 1``.
    """
    lam = np.asarray(lam, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 1.0 - lam / np.expm1(lam)
    out = np.where(lam > 0, out, 0.0)
    return out if out.ndim else float(out)


def lognormal_equivalence_lambda(tolerance: float, g: GlobalConstants = GlobalConstants()) -> float:
    """Largest fitness for which the full model stays within ``tolerance`` of the lognormal one.

    The criterion is the worst-case relative deviation of the cumulative
    share over the whole life of the paper. It does not depend on ``m``;
    ``g`` is accepted for interface symmetry.
    """
    if not 0 < tolerance < 1:
        raise ValueError("tolerance must lie in (0, 1)")
    # gap is increasing and tends to 1, so doubling terminates
    hi = 1.0
    while linearisation_gap(hi) < tolerance:
        hi *= 2.0
    return float(optimize.brentq(lambda x: linearisation_gap(x) - tolerance, 0.0, hi,
                                 xtol=1e-14, rtol=1e-14))


def dormant_threshold_summary(m: float = DEFAULT_M) -> dict:
    """Dormant-attachment threshold fitness with its implied lifetime citations."""
    lam = DORMANT_ATTACHMENT_LAMBDA
    return {
        "lambda": lam,
        "c_infinity": ultimate_impact(lam, m),
        "relative_gap": float(linearisation_gap(lam)),
    }
