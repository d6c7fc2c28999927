"""Red-black relaxation engine for pointwise Monge-Ampere updates.

Each interior node is driven toward the largest center value that keeps the
complex Hessian (against frozen neighbors) positive semidefinite with
determinant equal to the prescribed cell density:

    n = 1:  target = mean(4 axis neighbors) - h^2 g
    n = 2:  target = h^2 * (m - sqrt(d^2 + g)),  m, d from the neighbor-only
            Hessian eigenvalues (lam = m -/+ d)

With g = 0 this is the obstacle/envelope update (raise to PSD-degeneracy);
with an upper bound array it becomes projected over-relaxation.  Nodes of
one color are updated simultaneously from the frozen previous state, so the
result is deterministic regardless of how the vector ops are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GridDomain
from .settings import DEFAULTS, Settings


@dataclass
class SweepInfo:
    converged: bool
    sweeps: int
    sup_change: float
    diverged: bool = False


class Workspace:
    """Precomputed flat-index tables for one domain (reusable across runs)."""

    def __init__(self, domain: GridDomain):
        self.domain = domain
        shape = domain.grid_shape
        strides = np.array([int(np.prod(shape[a + 1:])) for a in range(domain.dim)])
        coords = np.argwhere(domain.interior)
        flat = np.ravel_multi_index(coords.T, shape)
        parity = coords.sum(axis=1) & 1
        self.colors = []
        for c in (0, 1):
            idx = flat[parity == c]
            tables = {"center": idx}
            for ax in range(domain.dim):
                tables[("ax", ax, +1)] = idx + strides[ax]
                tables[("ax", ax, -1)] = idx - strides[ax]
            if domain.n == 2:
                for (a, b) in ((0, 2), (1, 3), (0, 3), (1, 2)):
                    for sa in (+1, -1):
                        for sb in (+1, -1):
                            tables[("diag", a, b, sa, sb)] = (
                                idx + sa * strides[a] + sb * strides[b])
            self.colors.append(tables)

    # -- one color update ----------------------------------------------------

    def _target(self, flatU, tables, g, h):
        n = self.domain.n
        if n == 1:
            s = (flatU[tables[("ax", 0, 1)]] + flatU[tables[("ax", 0, -1)]]
                 + flatU[tables[("ax", 1, 1)]] + flatU[tables[("ax", 1, -1)]])
            return 0.25 * s - h * h * g
        inv4h2 = 1.0 / (4.0 * h * h)
        h11 = (flatU[tables[("ax", 0, 1)]] + flatU[tables[("ax", 0, -1)]]
               + flatU[tables[("ax", 1, 1)]] + flatU[tables[("ax", 1, -1)]]) * inv4h2
        h22 = (flatU[tables[("ax", 2, 1)]] + flatU[tables[("ax", 2, -1)]]
               + flatU[tables[("ax", 3, 1)]] + flatU[tables[("ax", 3, -1)]]) * inv4h2

        def cross(a, b):
            return (flatU[tables[("diag", a, b, 1, 1)]]
                    - flatU[tables[("diag", a, b, 1, -1)]]
                    - flatU[tables[("diag", a, b, -1, 1)]]
                    + flatU[tables[("diag", a, b, -1, -1)]]) * inv4h2

        h12r = 0.25 * (cross(0, 2) + cross(1, 3))
        h12i = 0.25 * (cross(0, 3) - cross(1, 2))
        m = 0.5 * (h11 + h22)
        d2 = 0.25 * (h11 - h22) ** 2 + h12r * h12r + h12i * h12i
        return h * h * (m - np.sqrt(d2 + g))

    def relax(self, U: np.ndarray, g_det: np.ndarray | None,
              upper: np.ndarray | None, omega: float) -> float:
        """One full red-black sweep in place; returns the sup change."""
        flatU = U.reshape(-1)
        flat_g = None if g_det is None else g_det.reshape(-1)
        flat_up = None if upper is None else upper.reshape(-1)
        h = self.domain.h
        change = 0.0
        for tables in self.colors:
            idx = tables["center"]
            g = 0.0 if flat_g is None else flat_g[idx]
            target = self._target(flatU, tables, g, h)
            cur = flatU[idx]
            new = cur + omega * (target - cur)
            if flat_up is not None:
                np.minimum(new, flat_up[idx], out=new)
            delta = np.abs(new - cur)
            if delta.size:
                change = max(change, float(delta.max()))
            flatU[idx] = new
        return change

    # -- full iteration --------------------------------------------------------

    def iterate(self, U: np.ndarray, g_det=None, upper=None, omega=None,
                tol: float = 1e-8, max_sweeps: int | None = None,
                settings: Settings = DEFAULTS) -> SweepInfo:
        dom = self.domain
        if omega is None:
            omega = settings.omega
        if omega is None:
            omega = default_omega(dom)
        if max_sweeps is None:
            max_sweeps = settings.max_sweeps_per_axis * dom.m
        guard = 10.0 * (float(np.abs(U[dom.closure]).max()) + 1.0)
        change = math.inf
        sweeps = 0
        while sweeps < max_sweeps:
            change = self.relax(U, g_det, upper, omega)
            sweeps += 1
            if not math.isfinite(change) or change > 1e6 * guard:
                return SweepInfo(False, sweeps, change, diverged=True)
            if change < tol:
                return SweepInfo(True, sweeps, change)
            if sweeps % 256 == 0:
                if float(np.abs(U[dom.interior]).max()) > guard:
                    return SweepInfo(False, sweeps, change, diverged=True)
        return SweepInfo(False, sweeps, change)


def default_omega(domain: GridDomain) -> float:
    """SOR-style over-relaxation heuristic.

    Near-optimal for the linear n = 1 updates; conservative for the
    nonlinear n = 2 root updates.
    """
    if domain.n == 1:
        return min(1.98, 2.0 / (1.0 + math.sin(math.pi / (domain.m - 1))))
    return 1.5
