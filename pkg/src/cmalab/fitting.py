"""Least-squares fits on log-transformed ladders.

Constants are never asserted, only fitted: each inequality check fits the
smallest admissible constant on its scan and verifies one-sidedness of the
residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class PowerFit:
    exponent: float
    log_c: float
    residual: float           # rms of log residuals
    npoints: int

    @property
    def c(self) -> float:
        return math.exp(self.log_c)

    def predict(self, x):
        return np.exp(self.log_c) * np.asarray(x, float) ** self.exponent


@dataclass
class ExpFit:
    rate: float               # y ~ C * exp(-rate * s)
    log_c: float
    residual: float
    npoints: int

    @property
    def c(self) -> float:
        return math.exp(self.log_c)

    def predict(self, s):
        return np.exp(self.log_c - self.rate * np.asarray(s, float))


def _linfit(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    rms = float(np.sqrt(np.mean(resid ** 2))) if len(x) > 2 else 0.0
    return float(coef[0]), float(coef[1]), rms


def fit_power(x, y) -> PowerFit:
    """y ~ C x^p by least squares on logs; requires positive data."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        raise ValueError("need at least two positive points for a power fit")
    p, logc, rms = _linfit(np.log(x[keep]), np.log(y[keep]))
    return PowerFit(p, logc, rms, int(keep.sum()))


def fit_exponential(s, y) -> ExpFit:
    """y ~ C exp(-tau s) by least squares on (s, log y)."""
    s = np.asarray(s, float)
    y = np.asarray(y, float)
    keep = y > 0
    if keep.sum() < 2:
        raise ValueError("need at least two positive points for an exponential fit")
    slope, logc, rms = _linfit(s[keep], np.log(y[keep]))
    return ExpFit(-slope, logc, rms, int(keep.sum()))


def one_sided_constant(y, model):
    """Smallest C with y <= C * model point-wise (the fitted-bound constant)."""
    y = np.asarray(y, float)
    model = np.asarray(model, float)
    keep = model > 0
    if not keep.any():
        return 0.0
    return float(np.max(y[keep] / model[keep]))


def clamp_unit_exponent(p: float) -> float:
    """Exponents the estimates are stated for live in (0, 1]; a steeper
    measured decay supports the unit exponent a fortiori on the scan range."""
    return min(max(p, 0.0), 1.0)
