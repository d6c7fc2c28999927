import numpy as np
import pytest

from cmalab import (BoundaryData, DirichletProblem, GridFunction, GridMeasure,
                    build_domain, comparison_check, ma_measure,
                    maximal_envelope, solve_dirichlet)
from cmalab.catalog import boundary_data, measure, subsolution
from cmalab.relax import Workspace
from cmalab.solver import NonConvergenceError
from cmalab.settings import DEFAULTS

from conftest import radius


def test_envelope_zero(disc64):
    env = maximal_envelope(BoundaryData.zero(), disc64)
    assert np.abs(env.values[disc64.interior]).max() == 0.0


def test_envelope_pluriharmonic_data(disc64):
    env = maximal_envelope(boundary_data(disc64, "re_z1"), disc64)
    err = np.abs(env.values - disc64.positions[..., 0])
    assert err[disc64.interior].max() < 1e-7


def test_envelope_poisson_oracle(disc128):
    # cos(2 theta) on the circle extends harmonically to r^2 cos(2 theta)
    env = maximal_envelope(boundary_data(disc128, "re_z1_sq"), disc128)
    oracle = disc128.positions[..., 0] ** 2 - disc128.positions[..., 1] ** 2
    assert np.abs(env.values - oracle)[disc128.interior].max() < 1e-7


def test_envelope_residual_vanishes(disc64):
    env = maximal_envelope(boundary_data(disc64, "re_z1_sq"), disc64)
    res = ma_measure(env, check_psh=False).total()
    assert res < 1e-8


def test_solve_subsolution_is_solution(disc128):
    phi = subsolution(disc128, "quad")
    mu = ma_measure(phi)
    rep = solve_dirichlet(DirichletProblem(disc128, mu, BoundaryData.zero(),
                                           subsolution=phi))
    err = np.abs(rep.u.values - phi.values)[disc128.interior].max()
    assert err <= 10 * disc128.h
    assert rep.sandwich_ok


def test_solve_constant_density_oracle(disc128):
    mu = GridMeasure.from_density(disc128, 4.0)
    rep = solve_dirichlet(DirichletProblem(disc128, mu, BoundaryData.zero()))
    oracle = radius(disc128) ** 2 - 1.0
    assert np.abs(rep.u.values - oracle)[disc128.interior].max() <= 10 * disc128.h
    assert rep.residual_ok


def test_solve_zero_measure_reduces_to_envelope(disc64):
    psi = boundary_data(disc64, "re_z1_sq")
    rep = solve_dirichlet(DirichletProblem(disc64, GridMeasure.zero(disc64), psi))
    env = maximal_envelope(psi, disc64)
    assert np.abs(rep.u.values - env.values)[disc64.interior].max() < 1e-6


def test_solve_n2_quadratic(ball16):
    phi = subsolution(ball16, "quad")
    mu = ma_measure(phi)
    rep = solve_dirichlet(DirichletProblem(ball16, mu, BoundaryData.zero(),
                                           subsolution=phi))
    err = np.abs(rep.u.values - phi.values)[ball16.interior].max()
    assert err <= 10 * ball16.h
    assert rep.sandwich_ok


def test_solve_idempotent(disc64):
    phi = subsolution(disc64, "quad")
    rep = solve_dirichlet(DirichletProblem(disc64, ma_measure(phi),
                                           BoundaryData.zero(), subsolution=phi))
    mu2 = ma_measure(rep.u, check_psh=False)
    rep2 = solve_dirichlet(DirichletProblem(disc64, mu2,
                                            BoundaryData.from_grid(rep.u.values)))
    assert np.abs(rep2.u.values - rep.u.values)[disc64.interior].max() < 1e-6


def test_solve_initialization_independent(disc64):
    phi = subsolution(disc64, "quad")
    mu = ma_measure(phi)
    prob = DirichletProblem(disc64, mu, BoundaryData.zero(), subsolution=phi)
    a = solve_dirichlet(prob)
    shifted = GridFunction(disc64, phi.values - 0.5, "low-start")
    b = solve_dirichlet(prob, initial=shifted)
    tol = 10 * DEFAULTS.solver_tol + 1e-8
    assert np.abs(a.u.values - b.u.values)[disc64.interior].max() <= 1e-6


def test_solve_grid_convergence_monotone():
    errs = []
    for res in (32, 64, 128):
        dom = build_domain({"shape": "disc"}, res)
        mu = GridMeasure.from_density(dom, 4.0)
        rep = solve_dirichlet(DirichletProblem(dom, mu, BoundaryData.zero()))
        oracle = radius(dom) ** 2 - 1.0
        errs.append(np.abs(rep.u.values - oracle)[dom.interior].max())
    assert errs[0] > errs[1] > errs[2]


def test_solve_nonconvergence_reported(ball16):
    phi = subsolution(ball16, "quad")
    mu = ma_measure(phi)
    env = maximal_envelope(BoundaryData.zero(), ball16)
    tight = DEFAULTS.with_overrides(max_sweeps_per_axis=0)
    with pytest.raises(NonConvergenceError) as err:
        solve_dirichlet(DirichletProblem(ball16, mu, BoundaryData.zero(),
                                         subsolution=phi), settings=tight,
                        envelope=env)
    assert err.value.report is not None
    assert err.value.report.residual_cells is not None


def test_solve_rejects_negative_measure(disc64):
    w = np.zeros(disc64.grid_shape)
    w[tuple(np.argwhere(disc64.interior)[0])] = -1.0
    with pytest.raises(Exception):
        DirichletProblem(disc64, GridMeasure(disc64, w), BoundaryData.zero())


def test_comparison_identical(disc64):
    phi = subsolution(disc64, "quad")
    rep = comparison_check(phi, phi)
    assert rep.hypotheses_ok and rep.violation == 0.0


def test_comparison_rho_vs_half(disc64):
    phi = subsolution(disc64, "quad")
    half = GridFunction(disc64, 0.5 * phi.values, "half")
    rep = comparison_check(phi, half)
    assert rep.hypotheses_ok
    assert rep.ok


def test_comparison_randomized_solver_pairs(disc64):
    rng = np.random.default_rng(23)
    ws = Workspace(disc64)
    phi = subsolution(disc64, "quad")
    base = ma_measure(phi)
    for _ in range(10):
        c = rng.uniform(1.1, 3.0)
        stronger = base.scaled(c)
        u = solve_dirichlet(DirichletProblem(disc64, stronger,
                                             BoundaryData.zero()),
                            workspace=ws).u
        v = solve_dirichlet(DirichletProblem(disc64, base, BoundaryData.zero()),
                            workspace=ws).u
        rep = comparison_check(u, v)
        assert rep.ok, rep


def test_sandwich_infinite_mass_case(disc128):
    phi = subsolution(disc128, {"name": "holder", "alpha": 0.5})
    full = ma_measure(phi)
    mu = GridMeasure(disc128, np.where(disc128.stencil_core, full.weights, 0.0))
    rep = solve_dirichlet(DirichletProblem(disc128, mu, BoundaryData.zero(),
                                           subsolution=phi))
    assert rep.sandwich_ok
