"""Discretized strictly pseudoconvex domains and region masks.

A domain is the sublevel set {rho < 0} of a quadratic defining function
rho = sum_j a_j |z_j|^2 - R^2 with a_j >= 1, sampled on a regular lattice
over a bounding box.  Quadratic rho keeps the complex Hessian constant, so
the strict pseudoconvexity check dd^c rho >= beta is exact up to rounding
and the geometry layer adds no discretization noise of its own.

Boundary bookkeeping: "ghost" nodes are the exterior nodes within one
Chebyshev step of the interior (everything a Hessian stencil can reach),
and boundary crossings are the exact zero-crossings of rho along lattice
edges.  Distances to the boundary are distances to the crossing cloud.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .settings import DEFAULTS, Settings
from .stencils import complex_hessian, gradient_magnitude

log = logging.getLogger(__name__)


class DomainError(ValueError):
    pass


class PSDViolationError(DomainError):
    """dd^c rho >= beta failed at some node (bad catalog entry or too-coarse grid)."""


class EmptyInteriorError(DomainError):
    pass


@dataclass(frozen=True)
class QuadraticShape:
    """Defining function rho = sum_j a_j |z_j|^2 - radius^2 with a_j >= 1."""

    n: int
    a: tuple
    radius: float = 1.0
    name: str = "shape"

    def __post_init__(self):
        if self.n not in (1, 2):
            raise DomainError("complex dimension must be 1 or 2")
        if len(self.a) != self.n:
            raise DomainError("need one coefficient per complex coordinate")
        if min(self.a) <= 0:
            raise DomainError("coefficients must be positive")

    @property
    def axis_coeffs(self) -> np.ndarray:
        """Quadratic coefficient per real axis (a_j repeated for x_j, y_j)."""
        return np.repeat(np.asarray(self.a, dtype=float), 2)

    def rho(self, points: np.ndarray) -> np.ndarray:
        """Evaluate rho at points of shape (..., 2n)."""
        c = self.axis_coeffs
        return np.tensordot(points * points, c, axes=([-1], [0])) - self.radius ** 2

    def max_semiaxis(self) -> float:
        return self.radius / math.sqrt(min(self.a))

    def edge_crossing(self, p0: np.ndarray, direction: np.ndarray, rho0: np.ndarray):
        """Exact root of rho along p0 + t*direction for t in (0, 1].

        rho is quadratic along any segment, so the crossing is closed form.
        """
        c = self.axis_coeffs
        qa = np.tensordot(direction * direction, c, axes=([-1], [0]))
        qb = 2.0 * np.tensordot(p0 * direction, c, axes=([-1], [0]))
        disc = np.sqrt(np.maximum(qb * qb - 4.0 * qa * rho0, 0.0))
        t = (-qb + disc) / (2.0 * qa)
        return np.clip(t, 0.0, 1.0)


def shape_from_spec(spec) -> QuadraticShape:
    """Resolve a catalog entry: disc, ball, or ellipsoid(a=...), radius=..."""
    if isinstance(spec, QuadraticShape):
        return spec
    kind = spec.get("shape", "disc")
    radius = float(spec.get("radius", 1.0))
    if kind == "disc":
        return QuadraticShape(1, (1.0,), radius, "disc")
    if kind == "ball":
        return QuadraticShape(2, (1.0, 1.0), radius, "ball")
    if kind == "ellipsoid":
        a = tuple(float(x) for x in spec["a"])
        if min(a) < 1.0:
            raise PSDViolationError(
                "ellipsoid coefficients must be >= 1 so that dd^c rho >= beta")
        return QuadraticShape(len(a), a, radius, "ellipsoid")
    raise DomainError(f"unknown domain shape {kind!r}")


@dataclass
class RegionMask:
    """Node set inside a domain with the rule that produced it."""

    domain: "GridDomain"
    mask: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def volume(self) -> float:
        return self.count * self.domain.cell_volume

    def positions(self) -> np.ndarray:
        return self.domain.positions[self.mask]

    def is_subset_of(self, other: "RegionMask") -> bool:
        return bool(np.all(~self.mask | other.mask))

    def __and__(self, other: "RegionMask") -> "RegionMask":
        return RegionMask(self.domain, self.mask & other.mask, "intersection")

    def difference(self, other: "RegionMask") -> "RegionMask":
        return RegionMask(self.domain, self.mask & ~other.mask, "difference")


class GridDomain:
    """Lattice discretization of {rho < 0} with boundary bookkeeping.

    Immutable after construction; distance fields and the Hopf constant are
    cached lazily.  Build with :func:`build_domain`.
    """

    def __init__(self, shape: QuadraticShape, resolution: int, settings: Settings,
                 box_halfwidth: float | None = None):
        self.shape = shape
        self.n = shape.n
        self.dim = 2 * shape.n
        # resolution counts cells per axis; the node lattice has one more
        # column, so the box center is always a node
        self.resolution = int(resolution)
        self.m = self.resolution + 1
        self.settings = settings

        s_max = shape.max_semiaxis()
        if box_halfwidth is not None:
            L = float(box_halfwidth)
            h = 2.0 * L / (self.m - 1)
            if L - s_max < 2.0 * h:
                raise DomainError("prescribed bounding box leaves no collar")
        else:
            L = s_max * (1.0 + settings.margin_frac)
            h = 2.0 * L / (self.m - 1)
            if L - s_max < 2.0 * h:
                # keep a 2-cell collar (ghost ring + stencil reach) inside the box
                if self.m <= 5:
                    raise DomainError("resolution too small for a usable collar")
                L = s_max * (self.m - 1) / (self.m - 5)
                h = 2.0 * L / (self.m - 1)
        self.box_halfwidth = L
        self.h = h
        self.cell_volume = h ** self.dim
        axis = np.linspace(-L, L, self.m)
        grids = np.meshgrid(*([axis] * self.dim), indexing="ij")
        self.positions = np.stack(grids, axis=-1)
        self.grid_shape = (self.m,) * self.dim

        self.rho_values = shape.rho(self.positions)
        self.interior = self.rho_values < 0.0
        if not self.interior.any():
            raise EmptyInteriorError("rho < 0 holds at no lattice node")
        reach = ndimage.binary_dilation(self.interior, np.ones((3,) * self.dim, bool))
        self.ghost = reach & ~self.interior
        self.closure = self.interior | self.ghost

        # interior nodes whose full stencil stays interior; the remaining
        # one-ring of boundary cells behaves like kink cells for any field
        # that is merely Hoelder up to the boundary
        self.stencil_core = self.interior & ~ndimage.binary_dilation(
            self.ghost, np.ones((3,) * self.dim, bool))

        self.crossings = self._find_crossings()
        self._check_psd()
        self.gradient_floor = self._collar_gradient_floor()

        self._distance = None
        self._hopf = None
        self._tree = None

    # -- construction internals -------------------------------------------

    def _find_crossings(self) -> np.ndarray:
        pts = []
        for ax in range(self.dim):
            for sign in (1, -1):
                nbr_exterior = np.roll(self.interior, -sign, axis=ax)
                edge = self.interior & ~nbr_exterior
                if not edge.any():
                    continue
                p0 = self.positions[edge]
                direction = np.zeros(self.dim)
                direction[ax] = sign * self.h
                t = self.shape.edge_crossing(p0, direction, self.rho_values[edge])
                pts.append(p0 + t[:, None] * direction[None, :])
        if not pts:
            raise EmptyInteriorError("no boundary crossings found")
        return np.concatenate(pts, axis=0)

    def _check_psd(self):
        H = complex_hessian(self.rho_values, self.n, self.h)
        lo, _ = H.eigenvalues()
        margin = lo[self.interior] - 1.0  # beta-normalized: dd^c rho >= beta
        self.psd_margin = float(margin.min())
        # second differences amplify rounding by 1/h^2; keep the check at
        # exact-arithmetic grade rather than failing on cancellation noise
        scale = float(np.abs(self.rho_values[self.closure]).max())
        tol = self.settings.psd_tol + 1024.0 * np.finfo(float).eps * scale / self.h ** 2
        if self.psd_margin < -tol:
            idx = np.argwhere(self.interior)[int(np.argmin(margin))]
            raise PSDViolationError(
                f"dd^c rho >= beta fails by {self.psd_margin:.3e} at node {tuple(idx)}")

    def _collar_gradient_floor(self) -> float:
        grad = gradient_magnitude(self.rho_values, self.h)
        near = self.interior & ndimage.binary_dilation(
            self.ghost, np.ones((3,) * self.dim, bool))
        if not near.any():
            return float(grad[self.interior].min())
        floor = float(grad[near].min())
        if floor <= 1e-6:
            raise DomainError("defining function has vanishing gradient on the collar")
        return floor

    # -- queries ------------------------------------------------------------

    def rho(self, points: np.ndarray) -> np.ndarray:
        return self.shape.rho(points)

    @property
    def boundary_distance(self) -> np.ndarray:
        """Distance from each interior node to the interpolated boundary; inf outside."""
        if self._distance is None:
            self._tree = cKDTree(self.crossings)
            d = np.full(self.grid_shape, np.inf)
            pts = self.positions[self.interior]
            d[self.interior], _ = self._tree.query(pts, k=1, workers=1)
            self._distance = d
        return self._distance

    @property
    def inradius(self) -> float:
        return float(self.boundary_distance[self.interior].max())

    def interior_mask(self) -> RegionMask:
        return RegionMask(self, self.interior.copy(), "interior")

    def describe(self) -> dict:
        return {
            "shape": self.shape.name,
            "n": self.n,
            "resolution": self.resolution,
            "h": self.h,
            "box_halfwidth": self.box_halfwidth,
            "interior_nodes": int(self.interior.sum()),
            "psd_margin": self.psd_margin,
        }


def build_domain(spec, resolution: int, settings: Settings = DEFAULTS,
                 box_halfwidth: float | None = None) -> GridDomain:
    """Construct a catalog domain with `resolution` cells per axis."""
    if resolution + 1 < 16:
        raise DomainError("need at least 16 nodes per axis")
    return GridDomain(shape_from_spec(spec), resolution, settings, box_halfwidth)


def shrink(domain: GridDomain, delta: float) -> RegionMask:
    """Nodes at distance > delta from the boundary (Omega_delta)."""
    if delta < 0:
        raise DomainError("delta must be nonnegative")
    if delta == 0:
        return RegionMask(domain, domain.interior.copy(), "interior-shrink", {"delta": 0.0})
    mask = domain.interior & (domain.boundary_distance > delta)
    if not mask.any():
        warnings.warn(f"shrink(delta={delta:g}) is empty", stacklevel=2)
    return RegionMask(domain, mask, "interior-shrink", {"delta": float(delta)})


def rho_sublevel(domain: GridDomain, eps: float) -> RegionMask:
    """Nodes with rho < -eps (the sublevel domain used near the boundary)."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    mask = domain.rho_values < -eps
    if not mask.any():
        warnings.warn(f"rho_sublevel(eps={eps:g}) is empty", stacklevel=2)
    return RegionMask(domain, mask, "rho-sublevel", {"eps": float(eps)})


def hopf_constant(domain: GridDomain) -> float:
    """Largest c0 in (0, 1] with |rho| >= c0 * dist(z, boundary) at every node."""
    d = domain.boundary_distance[domain.interior]
    rho = -domain.rho_values[domain.interior]
    keep = d > 0  # nodes landing on a crossing contribute the gradient limit
    c0 = float(min(1.0, (rho[keep] / d[keep]).min()))
    if c0 < 1e-3:
        log.warning("suspiciously small Hopf constant c0=%.3e", c0)
    return c0
