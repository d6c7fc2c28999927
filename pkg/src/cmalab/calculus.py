"""Discrete plurisubharmonic calculus on grid domains.

Grid functions carry values on the full bounding-box lattice.  Catalog
functions are evaluated everywhere (so collar extensions are free); solver
outputs are extended outside the interior by their boundary data.  Only the
interior and the one-ring ghost collar are contractual; anything beyond is
best-effort extension used by convolutions.

Monge-Ampere convention: dd^c = 2i d dbar, so (dd^c |z|^2)^n has density
4^n n! per unit 2n-volume.  Cell weights are det-of-PSD-projected-Hessian
times the cell volume, which keeps measures nonnegative by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal

from .geometry import GridDomain, RegionMask
from .settings import DEFAULTS, Settings
from .stencils import Hessian, complex_hessian, convention_factor, mixed_det


class CalculusError(ValueError):
    pass


class NonPSHError(CalculusError):
    def __init__(self, msg, node=None, eig=None):
        super().__init__(msg)
        self.node = node
        self.eig = eig


class CollarError(CalculusError):
    pass


# ---------------------------------------------------------------------------
# boundary data


class BoundaryData:
    """Boundary values, evaluable at every lattice node (extension included)."""

    def __init__(self, node_values_fn, name=""):
        self._fn = node_values_fn
        self.name = name

    def node_values(self, domain: GridDomain) -> np.ndarray:
        return np.asarray(self._fn(domain), dtype=float)

    @classmethod
    def from_callable(cls, fn, name=""):
        return cls(lambda dom: fn(dom.positions), name)

    @classmethod
    def zero(cls):
        return cls(lambda dom: np.zeros(dom.grid_shape), "zero")

    @classmethod
    def from_grid(cls, values: np.ndarray, name="grid"):
        arr = np.array(values, dtype=float)
        return cls(lambda dom: arr, name)


# ---------------------------------------------------------------------------
# grid functions and measures


@dataclass
class GridFunction:
    """Real scalar field on a grid domain (full-lattice storage)."""

    domain: GridDomain
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.values.shape != self.domain.grid_shape:
            raise CalculusError("value array does not match the domain lattice")
        if not np.isfinite(self.values[self.domain.closure]).all():
            raise CalculusError("non-finite values on the domain closure")

    @classmethod
    def from_callable(cls, domain, fn, name=""):
        return cls(domain, np.asarray(fn(domain.positions), dtype=float), name)

    @classmethod
    def from_interior(cls, domain, interior_values: np.ndarray, boundary: BoundaryData,
                      name=""):
        """Interior field extended by its boundary data outside the interior."""
        V = boundary.node_values(domain).copy()
        V[domain.interior] = interior_values[domain.interior]
        return cls(domain, V, name)

    @classmethod
    def constant(cls, domain, c, name=""):
        return cls(domain, np.full(domain.grid_shape, float(c)), name)

    # -- basic queries ------------------------------------------------------

    def interior_values(self) -> np.ndarray:
        return self.values[self.domain.interior]

    def trace(self) -> np.ndarray:
        """Values on the ghost ring (the discrete boundary trace)."""
        return self.values[self.domain.ghost]

    def sup_abs(self) -> float:
        return float(np.abs(self.values[self.domain.closure]).max())

    def osc(self) -> float:
        v = self.values[self.domain.closure]
        return float(v.max() - v.min())

    def with_values(self, values, name=None) -> "GridFunction":
        return GridFunction(self.domain, values, self.name if name is None else name)

    def hessian(self) -> Hessian:
        return complex_hessian(self.values, self.domain.n, self.domain.h)


@dataclass
class GridMeasure:
    """Nonnegative cell weights; cells are identified with interior nodes."""

    domain: GridDomain
    weights: np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.weights.shape != self.domain.grid_shape:
            raise CalculusError("weight array does not match the domain lattice")

    @classmethod
    def from_density(cls, domain, density, name=""):
        """density: scalar or callable on positions, mass per unit 2n-volume."""
        if callable(density):
            d = np.asarray(density(domain.positions), dtype=float)
        else:
            d = np.full(domain.grid_shape, float(density))
        w = np.where(domain.interior, d * domain.cell_volume, 0.0)
        return cls(domain, w, name)

    @classmethod
    def zero(cls, domain):
        return cls(domain, np.zeros(domain.grid_shape), "zero")

    def total(self, region: RegionMask | None = None) -> float:
        if region is None:
            return float(self.weights.sum())
        return float(self.weights[region.mask].sum())

    def restrict(self, region: RegionMask) -> "GridMeasure":
        return GridMeasure(self.domain, np.where(region.mask, self.weights, 0.0),
                           f"{self.name}|restricted")

    def scaled(self, factor: float) -> "GridMeasure":
        return GridMeasure(self.domain, self.weights * float(factor), self.name)

    def weighted_sum(self, node_values: np.ndarray,
                     region: RegionMask | None = None) -> float:
        """Integral of a node field against this measure."""
        w = self.weights if region is None else np.where(region.mask, self.weights, 0.0)
        return float((w * node_values).sum())


# ---------------------------------------------------------------------------
# PSH checks


@dataclass
class PshReport:
    ok: bool
    min_eig: float
    worst_node: tuple
    tol: float


def is_discretely_psh(f: GridFunction, tol: float | None = None,
                      settings: Settings = DEFAULTS) -> PshReport:
    """Smallest complex-Hessian eigenvalue >= -tol on the stencil core.

    Max-type fields (regularized subsolutions, extremal functions, glued
    competitors) fail exact PSD only at kink cells at O(h); the default
    tolerance 10 h absorbs that.  The one-ring of boundary cells is excluded:
    stencils there straddle the boundary, so for fields that are merely
    Hoelder up to the boundary the node Hessian is not a consistent interior
    approximation (the cell weights clip its negative part to zero anyway).
    """
    if tol is None:
        tol = settings.psh_tol_factor * f.domain.h
    core = f.domain.stencil_core
    if not core.any():
        core = f.domain.interior
    lo, _ = f.hessian().eigenvalues()
    vals = lo[core]
    k = int(np.argmin(vals))
    worst = tuple(np.argwhere(core)[k])
    return PshReport(bool(vals[k] >= -tol), float(vals[k]), worst, tol)


def _require_psh(f: GridFunction, settings: Settings):
    rep = is_discretely_psh(f, settings=settings)
    if not rep.ok:
        raise NonPSHError(
            f"{f.name or 'field'} is not discretely PSH: eigenvalue "
            f"{rep.min_eig:.3e} < -{rep.tol:.3e} at node {rep.worst_node}",
            node=rep.worst_node, eig=rep.min_eig)


# ---------------------------------------------------------------------------
# Monge-Ampere measures


def ma_measure(f: GridFunction, check_psh: bool = True,
               settings: Settings = DEFAULTS) -> GridMeasure:
    """Discrete Monge-Ampere measure (dd^c f)^n as cell weights."""
    if check_psh:
        _require_psh(f, settings)
    dom = f.domain
    det = f.hessian().det_psd()
    w = np.where(dom.interior, convention_factor(dom.n) * det * dom.cell_volume, 0.0)
    return GridMeasure(dom, w, f"ma({f.name})")


def mixed_measure(fns: list, check_psh: bool = True,
                  settings: Settings = DEFAULTS) -> GridMeasure:
    """dd^c f_1 ^ ... ^ dd^c f_k ^ beta^(n-k) as cell weights.

    Each Hessian is PSD-projected before polarization, so the mixed
    discriminant is nonnegative and the k = n, equal-arguments case
    reproduces ma_measure exactly.
    """
    if not fns:
        raise CalculusError("need at least one field")
    dom = fns[0].domain
    if any(f.domain is not dom for f in fns):
        raise CalculusError("all fields must share one domain")
    if len(fns) > dom.n:
        raise CalculusError("more factors than the complex dimension")
    for f in fns:
        if check_psh:
            _require_psh(f, settings)
    hs = [f.hessian().psd_projected() for f in fns]
    det = np.maximum(mixed_det(hs, dom.n), 0.0)
    w = np.where(dom.interior, convention_factor(dom.n) * det * dom.cell_volume, 0.0)
    return GridMeasure(dom, w, "mixed(" + ",".join(f.name for f in fns) + ")")


def mixed_mass(fns: list, region: RegionMask | None = None,
               check_psh: bool = True, settings: Settings = DEFAULTS) -> float:
    return mixed_measure(fns, check_psh, settings).total(region)


@dataclass
class DominationReport:
    ok: bool
    worst_cell: tuple
    worst_excess: float
    tolerance: float

    def __bool__(self):
        return self.ok


def dominated_by(mu: GridMeasure, f: GridFunction, eps_dom: float | None = None,
                 settings: Settings = DEFAULTS) -> DominationReport:
    """Per-cell check mu <= (dd^c f)^n (strictly stronger than Borel domination)."""
    if mu.domain is not f.domain:
        raise CalculusError("measure and field live on different domains")
    ref = ma_measure(f, settings=settings)
    if eps_dom is None:
        scale = max(ref.weights.max(), mu.weights.max(), 1e-300)
        eps_dom = settings.dom_rel_tol * scale
    excess = mu.weights - ref.weights
    k = int(np.argmax(excess))
    worst = float(excess.flat[k])
    return DominationReport(worst <= eps_dom,
                            tuple(np.unravel_index(k, mu.weights.shape)),
                            worst, float(eps_dom))


# ---------------------------------------------------------------------------
# lattice-ball offsets


def _ball_radius_cells(domain: GridDomain, delta: float) -> int:
    r = int(math.floor(delta / domain.h + 1e-12))
    if r < 1:
        raise CalculusError(f"delta={delta:g} is below one lattice step h={domain.h:g}")
    return r


def _ball_kernel(dim: int, r_cells: int, radius_cells: float) -> np.ndarray:
    axes = np.arange(-r_cells, r_cells + 1)
    grids = np.meshgrid(*([axes] * dim), indexing="ij")
    rr = sum(g * g for g in grids)
    return (rr <= radius_cells ** 2 + 1e-12).astype(float)


def sup_convolution(u: GridFunction, delta: float) -> GridFunction:
    """sup of u over the lattice ball of radius delta; valid on shrink(delta).

    Preserves discrete PSH-ness (pointwise max of translates) and dominates
    the ball average node-wise on the shrunken domain.
    """
    dom = u.domain
    if delta > dom.inradius:
        raise CalculusError("delta exceeds the inradius")
    R = _ball_radius_cells(dom, delta)
    rad = delta / dom.h
    V = u.values
    out = None
    if dom.dim == 2:
        for o0 in range(-R, R + 1):
            w = int(math.floor(math.sqrt(max(rad * rad - o0 * o0, 0.0)) + 1e-12))
            f = ndimage.maximum_filter1d(V, size=2 * w + 1, axis=1, mode="nearest")
            f = np.roll(f, -o0, axis=0)
            out = f if out is None else np.maximum(out, f)
    else:
        for o1 in range(-R, R + 1):
            for o2 in range(-R, R + 1):
                for o3 in range(-R, R + 1):
                    rem = rad * rad - (o1 * o1 + o2 * o2 + o3 * o3)
                    if rem < 0:
                        continue
                    w = int(math.floor(math.sqrt(rem) + 1e-12))
                    f = ndimage.maximum_filter1d(V, size=2 * w + 1, axis=0,
                                                 mode="nearest")
                    f = np.roll(f, (-o1, -o2, -o3), axis=(1, 2, 3))
                    out = f if out is None else np.maximum(out, f)
    return u.with_values(out, f"supconv({u.name},{delta:g})")


def ball_average(u: GridFunction, delta: float) -> GridFunction:
    """Mean of u over the lattice ball of radius delta; valid on shrink(delta)."""
    dom = u.domain
    if delta > dom.inradius:
        raise CalculusError("delta exceeds the inradius")
    R = _ball_radius_cells(dom, delta)
    kern = _ball_kernel(dom.dim, R, delta / dom.h)
    kern /= kern.sum()
    out = signal.fftconvolve(u.values, kern, mode="same")
    return u.with_values(out, f"ballavg({u.name},{delta:g})")


def ball_second_moment(domain: GridDomain, delta: float) -> float:
    """Mean of |zeta|^2 over the lattice ball (oracle for quadratic averages)."""
    R = _ball_radius_cells(domain, delta)
    axes = np.arange(-R, R + 1) * domain.h
    grids = np.meshgrid(*([axes] * domain.dim), indexing="ij")
    rr = sum(g * g for g in grids)
    inside = rr <= delta ** 2 + 1e-12
    return float(rr[inside].mean())


def mollify(phi: GridFunction, t: float, settings: Settings = DEFAULTS) -> GridFunction:
    """Convolution with the standard radial bump kernel scaled to radius t.

    Requires the field to carry a trusted extension on a collar of width t
    beyond the closure; catalog subsolutions do.
    """
    dom = phi.domain
    margin = dom.box_halfwidth - dom.shape.max_semiaxis()
    if t > margin - dom.h:
        raise CollarError(
            f"collar of width {margin:g} cannot support mollification radius {t:g}")
    R = _ball_radius_cells(dom, t)
    axes = np.arange(-R, R + 1) / (t / dom.h)
    grids = np.meshgrid(*([axes] * dom.dim), indexing="ij")
    s2 = sum(g * g for g in grids)
    if settings.kernel == "bump":
        with np.errstate(divide="ignore", over="ignore"):
            w = np.where(s2 < 1.0, np.exp(-1.0 / np.maximum(1.0 - s2, 1e-300)), 0.0)
    elif settings.kernel == "poly":
        w = np.where(s2 < 1.0, (1.0 - s2) ** 3, 0.0)
    else:
        raise CalculusError(f"unknown kernel {settings.kernel!r}")
    w /= w.sum()
    out = signal.fftconvolve(phi.values, w, mode="same")
    return phi.with_values(out, f"mollify({phi.name},{t:g})")


def kernel_second_moment(domain: GridDomain, t: float,
                         settings: Settings = DEFAULTS) -> float:
    """sum w(zeta) |zeta|^2 for the discrete mollifier (quadratic-shift oracle)."""
    R = _ball_radius_cells(domain, t)
    axes = np.arange(-R, R + 1) / (t / domain.h)
    grids = np.meshgrid(*([axes] * domain.dim), indexing="ij")
    s2 = sum(g * g for g in grids)
    if settings.kernel == "bump":
        with np.errstate(divide="ignore", over="ignore"):
            w = np.where(s2 < 1.0, np.exp(-1.0 / np.maximum(1.0 - s2, 1e-300)), 0.0)
    else:
        w = np.where(s2 < 1.0, (1.0 - s2) ** 3, 0.0)
    w /= w.sum()
    return float((w * s2).sum() * t * t)


def regularize_subsolution(phi: GridFunction, domain: GridDomain, eps: float,
                           trace_tol: float | None = None) -> GridFunction:
    """max(phi - eps, A rho / eps) with A = 1 + sup|phi|.

    Equals phi - eps exactly on the sublevel {rho < -eps} and A rho / eps
    near the boundary; PSH as a max of PSH fields.
    """
    if phi.domain is not domain:
        raise CalculusError("field and domain mismatch")
    if eps <= 0:
        raise CalculusError("eps must be positive")
    if trace_tol is None:
        trace_tol = 3.0 * math.sqrt(domain.h)
    if float(np.abs(phi.trace()).max()) > trace_tol:
        raise CalculusError("subsolution does not vanish on the boundary")
    A = 1.0 + phi.sup_abs()
    vals = np.maximum(phi.values - eps, A * domain.rho_values / eps)
    out = phi.with_values(vals, f"reg({phi.name},{eps:g})")
    out.reg_bound = A
    return out


# ---------------------------------------------------------------------------
# Hoelder seminorm


@dataclass
class HolderSeminormResult:
    alpha: float
    value: float
    witness: tuple
    pairs_scanned: int

    def __float__(self):
        return self.value


def holder_seminorm(f: GridFunction, alpha: float,
                    settings: Settings = DEFAULTS,
                    offset_budget: int = 4096) -> HolderSeminormResult:
    """max |f(x)-f(y)| / |x-y|^alpha over a deterministic pair sample.

    Exact over all pair offsets up to the budgeted radius (antipodes
    deduplicated), then deterministic directional shells out to
    seminorm_near_frac * diam, then a dyadic far-pair sample out to the
    diameter.  Short pairs dominate the seminorm for the catalog fields, so
    the budget caps cost on fine grids without touching the fine-scale
    pairs.  Pairs range over interior and ghost nodes.
    """
    if not (0 < alpha <= 1):
        raise CalculusError("alpha must lie in (0, 1]")
    dom = f.domain
    diam = 2.0 * dom.shape.max_semiaxis()
    r_near = settings.seminorm_near_frac * diam
    if dom.dim == 2:
        r_budget = math.sqrt(2.0 * offset_budget / math.pi)
    else:
        r_budget = (4.0 * offset_budget / math.pi ** 2) ** 0.25
    R = max(1, int(math.floor(min(r_near / dom.h, r_budget) + 1e-12)))

    mask = dom.closure
    V = f.values
    best = -1.0
    best_pair = (None, None)
    scanned = 0

    def offsets_near():
        rngs = [range(0, R + 1)] + [range(-R, R + 1)] * (dom.dim - 1)
        grids = np.meshgrid(*rngs, indexing="ij")
        offs = np.stack([g.ravel() for g in grids], axis=1)
        norm2 = (offs * offs).sum(1)
        keep = (norm2 > 0) & (norm2 <= min(r_near / dom.h, R) ** 2 + 1e-12)
        # half-space dedupe: first nonzero component positive
        lead = np.zeros(len(offs), dtype=bool)
        seen = np.zeros(len(offs), dtype=bool)
        for col in range(dom.dim):
            pos = (offs[:, col] > 0) & ~seen
            lead |= pos
            seen |= offs[:, col] != 0
        return offs[keep & lead]

    def _directions():
        if dom.dim == 2:
            return [np.array([math.cos(k * math.pi / 8),
                              math.sin(k * math.pi / 8)]) for k in range(8)]
        dirs = []
        for ax in range(dom.dim):
            e = np.zeros(dom.dim)
            e[ax] = 1.0
            dirs.append(e)
        dirs.append(np.ones(dom.dim) / math.sqrt(dom.dim))
        return dirs

    def offsets_shells(r_from, r_to, factor):
        out = []
        r = r_from
        while r <= r_to:
            for d in _directions():
                step = np.asarray(np.round(r / dom.h * d), int)
                if np.any(step):
                    out.append(step)
            r *= factor
        return out

    all_offsets = list(offsets_near())
    all_offsets += offsets_shells(R * dom.h * 1.25, r_near, 1.25)
    all_offsets += offsets_shells(2.0 * r_near, diam, 2.0)
    for off in all_offsets:
        dist = float(np.linalg.norm(off)) * dom.h
        shifted = np.roll(V, tuple(-int(o) for o in off),
                          axis=tuple(range(dom.dim)))
        valid = mask & np.roll(mask, tuple(-int(o) for o in off),
                               axis=tuple(range(dom.dim)))
        if not valid.any():
            continue
        diff = np.abs(shifted - V)
        diff[~valid] = -1.0
        k = int(np.argmax(diff))
        val = diff.flat[k] / dist ** alpha
        scanned += int(valid.sum())
        if val > best:
            best = val
            idx = np.unravel_index(k, V.shape)
            p = dom.positions[idx]
            q = p + np.asarray(off, float) * dom.h
            best_pair = (tuple(p), tuple(q))
    return HolderSeminormResult(alpha, max(best, 0.0), best_pair, scanned)


# ---------------------------------------------------------------------------
# Cegrell-class membership


@dataclass
class MembershipReport:
    is_member: bool
    clauses: dict
    mass: float

    def __bool__(self):
        return self.is_member


def is_in_E0_prime(v: GridFunction, eps_mass: float | None = None,
                   settings: Settings = DEFAULTS) -> MembershipReport:
    """PSH, nonpositive, zero boundary trace, Monge-Ampere total at most 1."""
    if eps_mass is None:
        eps_mass = settings.e0_mass_tol
    dom = v.domain
    psh = is_discretely_psh(v, settings=settings)
    nonpos = float(v.interior_values().max()) <= 1e-9 * max(1.0, v.sup_abs())
    trace_tol = 10.0 * math.sqrt(dom.h) * max(1.0, v.osc())
    trace_ok = float(np.abs(v.trace()).max()) <= trace_tol
    mass = ma_measure(v, check_psh=False, settings=settings).total() if psh.ok else math.inf
    mass_ok = mass <= 1.0 + eps_mass
    clauses = {"psh": psh.ok, "nonpositive": nonpos,
               "zero_trace": trace_ok, "mass_le_1": mass_ok}
    return MembershipReport(all(clauses.values()), clauses, float(mass))


def is_in_E0(v: GridFunction, settings: Settings = DEFAULTS) -> MembershipReport:
    """Like E0' but only finite total mass is required."""
    rep = is_in_E0_prime(v, eps_mass=math.inf, settings=settings)
    clauses = dict(rep.clauses)
    clauses["mass_le_1"] = math.isfinite(rep.mass)
    return MembershipReport(all(clauses.values()), clauses, rep.mass)
