"""Bedford-Taylor capacity via relative extremal functions.

cap(K) is realized as the Monge-Ampere total of the relative extremal
function h_K: the largest nonpositive discretely-PSH field that is <= -1 on
K, computed by projected red-black sweeps.  A definition-based oracle bounds
the same quantity from below by scanning admissible competitors.

The classical identification h_K = h_K^* off a pluripolar set has no grid
analogue (pluripolar sets carry no cells at any resolution); the grid object
stands for both.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .calculus import GridFunction, GridMeasure, ma_measure
from .geometry import GridDomain, RegionMask
from .relax import SweepInfo, Workspace
from .settings import DEFAULTS, Settings


class CapacityError(ValueError):
    pass


class ConvergenceError(CapacityError):
    def __init__(self, msg, best: GridFunction, info: SweepInfo):
        super().__init__(msg)
        self.best = best
        self.info = info


@dataclass
class CapacityResult:
    compact: RegionMask
    extremal: GridFunction
    value: float
    residual: float
    converged: bool
    obstacle_ok: bool            # h = -1 on K held discretely
    sweeps: int = 0
    measure: GridMeasure = field(default=None, repr=False)


def _check_compactly_inside(K: RegionMask, domain: GridDomain):
    if K.domain is not domain:
        raise CapacityError("compact set lives on a different domain")
    if not K.mask.any():
        raise CapacityError("compact set is empty")
    touch = ndimage.binary_dilation(K.mask, np.ones((3,) * domain.dim, bool))
    if (touch & domain.ghost).any():
        raise CapacityError("compact set touches the boundary")


def _relative_extremal(K: RegionMask, domain: GridDomain,
                       settings: Settings, workspace: Workspace | None):
    _check_compactly_inside(K, domain)
    ws = workspace or Workspace(domain)
    upper = np.where(K.mask, -1.0, 0.0)
    U = np.zeros(domain.grid_shape)
    U[K.mask] = -1.0
    info = ws.iterate(U, g_det=None, upper=upper,
                      tol=settings.extremal_tol, settings=settings)
    fn = GridFunction(domain, U, f"extremal({K.kind})")
    return fn, info


def relative_extremal(K: RegionMask, domain: GridDomain,
                      settings: Settings = DEFAULTS,
                      workspace: Workspace | None = None) -> GridFunction:
    """Largest discretely-PSH field <= 0 with <= -1 on K, zero trace."""
    fn, info = _relative_extremal(K, domain, settings, workspace)
    if not info.converged:
        raise ConvergenceError(
            f"extremal sweep stalled after {info.sweeps} sweeps "
            f"(sup change {info.sup_change:.3e})", fn, info)
    return fn


def capacity(K: RegionMask, domain: GridDomain, settings: Settings = DEFAULTS,
             workspace: Workspace | None = None) -> CapacityResult:
    """cap(K) = total Monge-Ampere mass of the relative extremal function."""
    fn, info = _relative_extremal(K, domain, settings, workspace)
    mu = ma_measure(fn, check_psh=False, settings=settings)
    on_K = fn.values[K.mask]
    obstacle_ok = bool(np.abs(on_K + 1.0).max() <= 1e3 * settings.extremal_tol)
    return CapacityResult(K, fn, mu.total(), info.sup_change, info.converged,
                          obstacle_ok, info.sweeps, mu)


def _admissible_candidates(K: RegionMask, domain: GridDomain,
                           settings: Settings, workspace):
    """Deterministic family of PSH competitors valued in [0, 1].

    Rescaled extremals and rescaled rho attain or approach the supremum;
    the quadratic max-mixtures probe it from below.
    """
    rho = domain.rho_values
    rho_min = float(rho[domain.interior].min())

    fn, _ = _relative_extremal(K, domain, settings, workspace)
    yield GridFunction(domain, fn.values + 1.0, "extremal+1")

    rho_rescaled = (rho - rho_min) / abs(rho_min)
    yield GridFunction(domain, rho_rescaled, "rho-rescaled")

    center = K.positions().mean(axis=0)
    d2 = ((domain.positions - center) ** 2).sum(axis=-1)
    top = float(d2[domain.closure].max())
    for frac in (0.0, 0.25, 0.5, 0.75):
        s = frac * float(d2[domain.ghost].max())
        # max((d2 - s)/(top - s), 0): max of PSH, valued in [0, 1]
        w = np.maximum((d2 - s) / max(top - s, 1e-12), 0.0)
        yield GridFunction(domain, w, f"quad-shift({frac:g})")
        yield GridFunction(domain, np.maximum(w, rho_rescaled),
                           f"max-mixture({frac:g})")


def capacity_sup_oracle(K: RegionMask, domain: GridDomain, budget: int = 8,
                        settings: Settings = DEFAULTS,
                        workspace: Workspace | None = None) -> float:
    """Definition-based lower bound: max over admissible w of the mass on K."""
    if budget < 1:
        raise CapacityError("budget must be at least 1")
    best = 0.0
    for i, w in enumerate(_admissible_candidates(K, domain, settings, workspace)):
        if i >= budget:
            break
        mu = ma_measure(w, check_psh=False, settings=settings)
        best = max(best, mu.total(K))
    return best
