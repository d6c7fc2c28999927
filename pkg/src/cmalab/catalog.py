"""Named subsolutions, boundary data, densities, measures and compact-set
families, addressable from scenario JSON.

Subsolutions come with a closed-form extension to the whole bounding box so
mollification collars are always available:

  quad            rho itself (smooth, exponent 1)
  holder(a)       -(max(-rho, 0))^a, the Hoelder cusp with infinite
                  Monge-Ampere total mass near the boundary for a < 1
  cone(center,a)  |z - center|^(2a) minus its boundary max
  log_atoms(...)  normalized superposition of clamped logarithmic atoms
  max / sum       recursive mixtures
"""

from __future__ import annotations

import math

import numpy as np

from .calculus import BoundaryData, GridFunction, GridMeasure, ma_measure
from .geometry import GridDomain, RegionMask, rho_sublevel, shrink
from .settings import DEFAULTS, Settings


class CatalogError(ValueError):
    pass


def _norm2(points, center):
    d = points - np.asarray(center, float)
    return (d * d).sum(axis=-1)


# ---------------------------------------------------------------------------
# subsolutions (PSH fields vanishing on the boundary, extended to the box)


def subsolution(domain: GridDomain, spec) -> GridFunction:
    """Build a catalog subsolution; the result carries .holder_alpha."""
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec["name"]
    if name == "quad":
        f = GridFunction(domain, domain.rho_values.copy(), "quad")
        f.holder_alpha = 1.0
        return f
    if name == "holder":
        a = float(spec.get("alpha", 0.5))
        if not (0 < a <= 1):
            raise CatalogError("holder exponent must lie in (0, 1]")
        # zero continuation: globally alpha-Hoelder and trace-consistent with
        # vanishing boundary data; the cusp's stencil noise stays confined to
        # the boundary kink ring
        vals = -np.maximum(-domain.rho_values, 0.0) ** a
        f = GridFunction(domain, vals, f"holder({a:g})")
        f.holder_alpha = a
        return f
    if name == "cone":
        a = float(spec.get("alpha", 0.5))
        center = spec.get("center", (0.0,) * domain.dim)
        r2 = _norm2(domain.positions, center)
        cap = float(np.max(r2[domain.ghost]) ** a)
        vals = r2 ** a - cap
        f = GridFunction(domain, vals, f"cone({a:g})")
        f.holder_alpha = min(2 * a, 1.0)
        return f
    if name == "log_atoms":
        # Smoothed Green-function atoms for the disc:
        #   (w/4pi) log(|z-c|^2 + a^2) - (w/2pi) log(|R^2 - conj(c) z| / R)
        # shifted by a constant so the field stays nonpositive.  The core
        # radius a is floored at two lattice steps: a sampled log pole
        # steeper than that is not discretely subharmonic near its core.
        if domain.n != 1:
            raise CatalogError("log_atoms are only cataloged on discs")
        atoms = spec.get("atoms")
        if not atoms:
            raise CatalogError("log_atoms needs an atom list")
        R = domain.shape.radius / math.sqrt(domain.shape.a[0])
        x = domain.positions[..., 0]
        y = domain.positions[..., 1]
        vals = np.zeros(domain.grid_shape)
        for atom in atoms:
            c = atom.get("center", (0.0, 0.0))
            w = float(atom.get("weight", 1.0))
            depth = float(atom.get("depth", 1.0))
            core = max(math.exp(-depth), 2.0 * domain.h)
            r2 = _norm2(domain.positions, c)
            pole = 0.5 * np.log(r2 + core * core)
            hx = R * R - (c[0] * x + c[1] * y)
            hy = c[1] * x - c[0] * y
            comp = 0.5 * np.log(hx * hx + hy * hy) - math.log(R)
            d_c = float(np.sqrt(_norm2(domain.crossings, c)).min())
            shift = 0.5 * math.log1p(core * core / (d_c * d_c))
            vals += (w / (2.0 * math.pi)) * (pole - comp - shift)
        f = GridFunction(domain, vals, "log_atoms")
        f.holder_alpha = float(spec.get("alpha", 0.5))
        return f
    if name in ("max", "sum"):
        parts = [subsolution(domain, s) for s in spec["of"]]
        stack = np.stack([p.values for p in parts])
        vals = stack.max(axis=0) if name == "max" else stack.sum(axis=0)
        f = GridFunction(domain, vals, f"{name}({','.join(p.name for p in parts)})")
        f.holder_alpha = min(p.holder_alpha for p in parts)
        return f
    raise CatalogError(f"unknown subsolution {name!r}")


# ---------------------------------------------------------------------------
# boundary data


def boundary_data(domain: GridDomain, spec) -> BoundaryData:
    """Boundary data with a global extension formula; carries .holder_alpha."""
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec["name"]
    scale = float(spec.get("scale", 1.0))
    if name == "zero":
        bd = BoundaryData.zero()
        bd.holder_alpha = 1.0
        return bd
    if name == "re_z1":
        bd = BoundaryData.from_callable(lambda p: scale * p[..., 0], "re_z1")
        bd.holder_alpha = 1.0
        return bd
    if name == "re_z1_sq":
        # Re(z_1^2) = x_1^2 - y_1^2; restricts to cos(2 theta) on the unit circle
        bd = BoundaryData.from_callable(
            lambda p: scale * (p[..., 0] ** 2 - p[..., 1] ** 2), "re_z1_sq")
        bd.holder_alpha = 1.0
        return bd
    if name == "cusp":
        a = float(spec.get("alpha", 0.5))
        center = spec.get("center", None)
        if center is None:
            center = (domain.shape.max_semiaxis(),) + (0.0,) * (domain.dim - 1)
        bd = BoundaryData.from_callable(
            lambda p: scale * _norm2(p, center) ** a, f"cusp({a:g})")
        bd.holder_alpha = min(2 * a, 1.0)
        return bd
    raise CatalogError(f"unknown boundary data {name!r}")


# ---------------------------------------------------------------------------
# densities (the nonnegative factor f of the L^p corollary pipeline)


def density_field(domain: GridDomain, spec) -> GridFunction:
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec["name"]
    if name == "one":
        return GridFunction.constant(domain, 1.0, "one")
    if name == "rho_inv_pow":
        q = float(spec.get("q", 0.25))
        vals = np.where(domain.interior,
                        np.maximum(-domain.rho_values, 1e-300) ** (-q), 0.0)
        return GridFunction(domain, vals, f"rho_inv_pow({q:g})")
    if name == "half_plane":
        vals = (domain.positions[..., 0] > 0).astype(float)
        return GridFunction(domain, vals, "half_plane")
    raise CatalogError(f"unknown density {name!r}")


# ---------------------------------------------------------------------------
# measures


def measure(domain: GridDomain, spec, settings: Settings = DEFAULTS) -> GridMeasure:
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return GridMeasure.zero(domain)
    if kind == "ma":
        phi = subsolution(domain, spec.get("of", "quad"))
        mu = ma_measure(phi, settings=settings)
        if spec.get("core_only", False):
            # keep only cells whose stencil is interior: still dominated by
            # the subsolution, and boundary-ring stencil noise cannot leak
            # into the right-hand side
            mu = GridMeasure(domain,
                             np.where(domain.stencil_core, mu.weights, 0.0),
                             mu.name + "|core")
        return mu
    if kind == "lebesgue":
        return GridMeasure.from_density(domain, float(spec.get("density", 1.0)),
                                        "lebesgue")
    if kind == "scaled":
        return measure(domain, spec["base"], settings).scaled(float(spec["factor"]))
    if kind == "density_times":
        base = measure(domain, spec["base"], settings)
        f = density_field(domain, spec["f"])
        return GridMeasure(domain, base.weights * f.values,
                           f"{f.name}*{base.name}")
    if kind == "cells":
        arr = np.asarray(spec["weights"], dtype=float)
        if arr.shape != domain.grid_shape:
            raise CatalogError("cell weight array does not match the lattice")
        return GridMeasure(domain, np.where(domain.interior, arr, 0.0), "cells")
    if kind == "cells_csv":
        flat = np.loadtxt(spec["path"], delimiter=",").reshape(-1)
        if flat.size != int(np.prod(domain.grid_shape)):
            raise CatalogError(
                f"csv holds {flat.size} weights, lattice has "
                f"{int(np.prod(domain.grid_shape))} nodes")
        arr = flat.reshape(domain.grid_shape)
        return GridMeasure(domain, np.where(domain.interior, arr, 0.0),
                           "cells_csv")
    raise CatalogError(f"unknown measure kind {kind!r}")


# ---------------------------------------------------------------------------
# compact-set families


def compact_set(domain: GridDomain, spec) -> RegionMask:
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec["kind"]
    if kind == "ball":
        r = float(spec["r"])
        center = spec.get("center", (0.0,) * domain.dim)
        mask = domain.interior & (_norm2(domain.positions, center) <= r * r)
        return RegionMask(domain, mask, "compact-K", {"r": r})
    if kind == "sublevel":
        f = subsolution(domain, spec["of"])
        level = float(spec["level"])
        mask = domain.interior & (f.values < level)
        return RegionMask(domain, mask, "sublevel-of-function",
                          {"level": level, "of": f.name})
    if kind == "shrink":
        return shrink(domain, float(spec["delta"]))
    if kind == "rho_sublevel":
        return rho_sublevel(domain, float(spec["eps"]))
    if kind == "nodes":
        mask = np.zeros(domain.grid_shape, bool)
        for node in spec["list"]:
            mask[tuple(int(i) for i in node)] = True
        mask &= domain.interior
        return RegionMask(domain, mask, "compact-K", {"nodes": len(spec["list"])})
    raise CatalogError(f"unknown compact set kind {kind!r}")


def kfamily(domain: GridDomain, spec) -> list:
    """A list of nested compact sets, e.g. balls over a radius ladder."""
    if spec is None:
        spec = {"kind": "ball", "r": [0.1, 0.2, 0.3, 0.4, 0.5]}
    if spec.get("kind") == "ball" and isinstance(spec.get("r"), (list, tuple)):
        return [compact_set(domain, {"kind": "ball", "r": r,
                                     "center": spec.get("center",
                                                        (0.0,) * domain.dim)})
                for r in spec["r"]]
    return [compact_set(domain, s) for s in spec["members"]]
