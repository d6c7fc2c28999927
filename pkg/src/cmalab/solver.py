"""Dirichlet solver for (dd^c u)^n = mu and the boundary-data envelope.

The envelope is the discrete Perron-Bremermann construction (largest
discretely-PSH field below the boundary data); the inhomogeneous solve runs
damped pointwise root updates on the cell equation det(Hessian) = density.
When a subsolution is declared the iterate starts from envelope + subsolution,
the discrete form of the boundary sandwich used throughout:

    envelope + subsolution <= u <= envelope.

All stopping criteria are per-cell; no global mass bound is assumed (grid
totals of the right-hand side may grow without bound under refinement near
the boundary, and do for the cusped catalog subsolutions).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg

from .calculus import (BoundaryData, GridFunction, GridMeasure, ma_measure)
from .geometry import GridDomain
from .relax import Workspace, default_omega
from .settings import DEFAULTS, Settings
from .stencils import convention_factor


class SolverError(ValueError):
    pass


class NonConvergenceError(SolverError):
    def __init__(self, msg, report):
        super().__init__(msg)
        self.report = report


@dataclass
class DirichletProblem:
    domain: GridDomain
    mu: GridMeasure
    psi: BoundaryData
    subsolution: GridFunction | None = None

    def __post_init__(self):
        if self.mu.domain is not self.domain:
            raise SolverError("measure lives on a different domain")
        if float(self.mu.weights.min()) < 0:
            raise SolverError("measure must be nonnegative")
        if self.subsolution is not None:
            from .calculus import dominated_by
            slack = 10.0 * self.domain.h * max(float(self.mu.weights.max()),
                                               1e-300)
            rep = dominated_by(self.mu, self.subsolution, eps_dom=slack)
            if not rep.ok:
                raise SolverError(
                    "declared subsolution does not dominate the measure "
                    f"(excess {rep.worst_excess:.3e} at cell {rep.worst_cell})")


@dataclass
class SolveReport:
    u: GridFunction
    envelope: GridFunction
    residual_cells: np.ndarray = field(repr=False)
    residual_total: float = 0.0
    residual_max: float = 0.0
    iterations: int = 0
    converged: bool = True
    infeasible: bool = False
    sandwich_ok: bool | None = None
    sandwich_slack: float | None = None
    tol_ma: float = 0.0

    @property
    def residual_ok(self) -> bool:
        return self.residual_max <= self.tol_ma


def _det_targets(mu: GridMeasure) -> np.ndarray:
    """Per-node determinant targets: weight / (4^n n! h^{2n})."""
    dom = mu.domain
    return mu.weights / (convention_factor(dom.n) * dom.cell_volume)


def _linear_presolve(dom: GridDomain, g_det: np.ndarray, U: np.ndarray):
    """For n = 1 the cell equation is the discrete Poisson problem
    Laplacian(u) = 4 g; jump to its solution by conjugate gradients so the
    certifying sweeps start at the fixed point instead of relaxing there."""
    shape = dom.grid_shape
    interior_flat = np.flatnonzero(dom.interior.ravel())
    N = interior_flat.size
    local = -np.ones(dom.m * dom.m, dtype=np.int64)
    local[interior_flat] = np.arange(N)
    strides = (dom.m, 1)
    rows, cols, vals = [np.arange(N)], [np.arange(N)], [np.full(N, 4.0)]
    flatU = U.ravel()
    rhs = -4.0 * g_det.ravel()[interior_flat] * dom.h * dom.h
    for ax in (0, 1):
        for sgn in (1, -1):
            nbr = interior_flat + sgn * strides[ax]
            nbr_local = local[nbr]
            inside = nbr_local >= 0
            rows.append(np.arange(N)[inside])
            cols.append(nbr_local[inside])
            vals.append(np.full(int(inside.sum()), -1.0))
            rhs[~inside] += flatU[nbr[~inside]]  # ghost values enter the rhs
    A = sparse.csr_matrix((np.concatenate(vals),
                           (np.concatenate(rows), np.concatenate(cols))),
                          shape=(N, N))
    x0 = flatU[interior_flat]
    scale = max(float(np.abs(rhs).max()), 1e-30)
    x, info = cg(A, rhs, x0=x0, rtol=1e-13, atol=1e-13 * scale,
                 maxiter=40 * dom.m)
    if info == 0:
        out = U.copy()
        out.ravel()[interior_flat] = x
        return out
    return U


def maximal_envelope(psi: BoundaryData, domain: GridDomain,
                     settings: Settings = DEFAULTS,
                     workspace: Workspace | None = None) -> GridFunction:
    """Largest discretely-PSH field with boundary trace below psi.

    Solves the homogeneous equation: at interior nodes the smallest Hessian
    eigenvalue is driven to zero, so the Monge-Ampere residual vanishes.
    """
    ws = workspace or Workspace(domain)
    V = psi.node_values(domain).astype(float).copy()
    lo = float(V[domain.ghost].min())
    V[domain.interior] = lo
    if domain.n == 1:
        V = _linear_presolve(domain, np.zeros(domain.grid_shape), V)
    info = ws.iterate(V, g_det=None, upper=None,
                      tol=settings.solver_tol, settings=settings)
    if not info.converged:
        raise NonConvergenceError(
            f"envelope sweep stalled (sup change {info.sup_change:.3e})", None)
    env = GridFunction(domain, V, f"env({psi.name})")
    env.sweeps = info.sweeps
    return env


def solve_dirichlet(prob: DirichletProblem, settings: Settings = DEFAULTS,
                    workspace: Workspace | None = None,
                    initial: GridFunction | None = None,
                    envelope: GridFunction | None = None) -> SolveReport:
    dom = prob.domain
    ws = workspace or Workspace(dom)
    env = envelope or maximal_envelope(prob.psi, dom, settings, ws)
    g = _det_targets(prob.mu)

    if initial is not None:
        U = initial.values.copy()
        U[~dom.interior] = env.values[~dom.interior]
    elif prob.subsolution is not None:
        U = env.values + prob.subsolution.values
        U[~dom.interior] = env.values[~dom.interior]
    else:
        # scale rho so its Monge-Ampere density dominates mu everywhere
        rho = dom.rho_values
        depth = abs(float(rho[dom.interior].min()))
        A = depth * float(np.max(g)) ** (1.0 / dom.n)
        U = env.values + np.where(dom.interior, A * rho / depth, 0.0)

    if dom.n == 1:
        U = _linear_presolve(dom, g, U)
    omega = settings.omega or default_omega(dom)
    info = ws.iterate(U, g_det=g, upper=None, omega=omega,
                      tol=settings.solver_tol, settings=settings)
    if info.diverged and omega > 1.0:
        # nonlinear over-relaxation can overshoot; retry conservatively
        U = env.values + (prob.subsolution.values if prob.subsolution is not None
                          else np.zeros(dom.grid_shape))
        U[~dom.interior] = env.values[~dom.interior]
        info = ws.iterate(U, g_det=g, upper=None, omega=1.0,
                          tol=settings.solver_tol, settings=settings)

    u = GridFunction.from_interior(dom, U, prob.psi, "dirichlet-solution")
    u.values[~dom.interior] = env.values[~dom.interior]

    ma = ma_measure(u, check_psh=False, settings=settings)
    resid = np.abs(ma.weights - prob.mu.weights)
    resid[~dom.interior] = 0.0
    n_cells = max(int(dom.interior.sum()), 1)
    tol_ma = settings.tol_ma_factor * max(prob.mu.total() / n_cells, 1e-300)

    report = SolveReport(
        u=u, envelope=env, residual_cells=resid,
        residual_total=float(resid.sum()), residual_max=float(resid.max()),
        iterations=info.sweeps, converged=info.converged,
        infeasible=info.diverged, tol_ma=tol_ma)

    if prob.subsolution is not None:
        tol = 10.0 * dom.h
        low = env.values + prob.subsolution.values - u.values
        high = u.values - env.values
        worst = max(float(low[dom.interior].max()), float(high[dom.interior].max()))
        report.sandwich_ok = worst <= tol
        report.sandwich_slack = worst

    if info.diverged:
        raise NonConvergenceError("iterates escaped the feasibility bracket "
                                  "(right-hand side likely infeasible)", report)
    if not info.converged:
        raise NonConvergenceError(
            f"solver stalled after {info.sweeps} sweeps "
            f"(sup change {info.sup_change:.3e})", report)
    return report


@dataclass
class ComparisonReport:
    hypotheses_ok: bool
    mass_gap: float        # most negative cell of ma(u) - ma(v)
    trace_gap: float       # max of (u - v) on the ghost ring
    violation: float       # max of (u - v)+ in the interior
    tolerance: float

    @property
    def ok(self) -> bool:
        return (not self.hypotheses_ok) or self.violation <= self.tolerance


def comparison_check(u: GridFunction, v: GridFunction,
                     settings: Settings = DEFAULTS) -> ComparisonReport:
    """Discrete comparison principle: larger mass + smaller boundary values
    force a smaller function; reports the worst interior violation."""
    dom = u.domain
    mau = ma_measure(u, check_psh=False, settings=settings)
    mav = ma_measure(v, check_psh=False, settings=settings)
    mass_gap = float((mau.weights - mav.weights)[dom.interior].min())
    trace_gap = float((u.values - v.values)[dom.ghost].max())
    scale = max(mau.weights.max(), 1e-300)
    hyp = mass_gap >= -settings.dom_rel_tol * scale and trace_gap <= 10.0 * dom.h
    violation = float(np.maximum(u.values - v.values, 0.0)[dom.interior].max())
    tol = 10.0 * dom.h * max(v.osc(), 1.0)
    return ComparisonReport(hyp, mass_gap, trace_gap, violation, tol)
