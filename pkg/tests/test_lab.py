import math

import numpy as np
import pytest

from cmalab import (BoundaryData, DirichletProblem, GridFunction, GridMeasure,
                    build_domain, ma_measure, solve_dirichlet)
from cmalab.catalog import boundary_data, compact_set, kfamily, subsolution
from cmalab.lab import (blocki_suite, capacity_growth_check, cegrell_suite,
                        corollary_c_pipeline, default_sublevel_grid,
                        effective_alpha, l1_l1_probe, mass_est_scan,
                        normalize_to_unit_mass, parallel_map, random_e0_member,
                        run_verify, stability_probe, sublevel_decay_scan,
                        theorem_b_pipeline, verify_blocki, verify_cegrell,
                        volume_capacity_scan)
from cmalab.solver import maximal_envelope


def test_parallel_map_order_preserved():
    out = parallel_map(lambda x: x * x, range(7), threads=3)
    assert out == [x * x for x in range(7)]


# -- product inequalities -----------------------------------------------------

def test_blocki_trivial_equal_pair(disc64):
    phi = subsolution(disc64, "quad")
    rep = verify_blocki([phi], phi, phi, 1)
    assert rep.passed and rep.lhs[0] == 0.0


def test_blocki_closed_form_quadratics(disc64):
    # v = rho, h = rho/2, v1 = rho: lhs -> pi, rhs -> 4 pi
    phi = subsolution(disc64, "quad")
    half = GridFunction(disc64, 0.5 * phi.values, "half")
    rep = verify_blocki([phi], phi, half, 1)
    assert rep.hypotheses_ok
    assert rep.lhs[0] == pytest.approx(math.pi, rel=0.05)
    assert rep.fitted["rhs_raw"] == pytest.approx(4 * math.pi, rel=0.05)
    assert rep.passed


def test_blocki_suite_n1(disc64):
    rep = blocki_suite(disc64, trials=25, seed=3)
    assert rep.passed and rep.hypotheses_ok


def test_blocki_suite_n2(ball16):
    rep = blocki_suite(ball16, trials=15, seed=4)
    assert rep.passed


def test_cegrell_equality_for_equal_arguments(disc64):
    phi = subsolution(disc64, "quad")
    rep = verify_cegrell([phi])
    assert rep.passed
    assert rep.lhs[0] == pytest.approx(rep.fitted["rhs_raw"], rel=1e-9)


def test_cegrell_strict_for_distinct(ball16):
    v1 = subsolution(ball16, "quad")
    bump = subsolution(ball16, {"name": "cone", "alpha": 1.0,
                                "center": (0.2, 0.0, 0.0, 0.0)})
    v2 = GridFunction(ball16, 0.5 * v1.values + 0.3 * bump.values, "mix")
    rep = verify_cegrell([v1, v2])
    assert rep.passed and rep.worst_slack > 0


def test_cegrell_suite_n2(ball16):
    rep = cegrell_suite(ball16, trials=15, seed=5)
    assert rep.passed


# -- sublevel decay -----------------------------------------------------------

def test_sublevel_trivial_empty(disc64):
    phi = subsolution(disc64, "quad")
    v = normalize_to_unit_mass(phi)
    rep = sublevel_decay_scan(v, phi, s_grid=[2.0, 3.0])
    assert rep.parameters == [] or all(m == 0 for m in rep.lhs)


def test_sublevel_polynomial_exponent(disc128):
    phi = subsolution(disc128, "quad")
    v = normalize_to_unit_mass(phi)
    rep = sublevel_decay_scan(v, phi)
    assert rep.hypotheses_ok
    assert rep.fitted["poly_exponent"] <= -1 + 0.3
    assert rep.extras["poly_pass"]


def test_sublevel_exponential_regime_vacuous(disc128):
    # unit-mass fields cannot reach depth 2 on desk grids: a single cell
    # already has capacity ~ 2 pi / |log h|, which caps the depth
    phi = subsolution(disc128, {"name": "holder", "alpha": 0.5})
    v = normalize_to_unit_mass(subsolution(disc128, "quad"))
    rep = sublevel_decay_scan(v, phi, s_grid=list(
        default_sublevel_grid(v)) + [2.0, 3.0])
    assert rep.extras["exp_pass"] is None
    assert any("vacuous" in n for n in rep.notes)


def graded_log_atoms(dom):
    h = dom.h
    return {"name": "log_atoms", "atoms": [
        {"center": (0.0, 0.0), "weight": 0.25, "depth": 9.0},
        {"center": (16 * h, 0.0), "weight": 0.25, "depth": 3.2},
        {"center": (-20 * h, 8 * h), "weight": 0.25, "depth": 2.2},
        {"center": (12 * h, -24 * h), "weight": 0.25, "depth": 1.4}]}


def test_sublevel_log_atom_pair(disc128):
    v = normalize_to_unit_mass(subsolution(disc128, graded_log_atoms(disc128)))
    phi = subsolution(disc128, {"name": "holder", "alpha": 0.5})
    rep = sublevel_decay_scan(v, phi)
    assert rep.hypotheses_ok
    assert rep.fitted["poly_exponent"] <= -1 + 0.3


# -- volume-capacity ----------------------------------------------------------

def test_volume_capacity_headline_scan(disc128):
    phi = subsolution(disc128, {"name": "holder", "alpha": 0.5})
    mu = ma_measure(phi)
    fam = kfamily(disc128, {"kind": "ball", "r": [0.1, 0.2, 0.3, 0.4, 0.5]})
    rep = volume_capacity_scan(mu, fam)
    assert rep.passed
    assert rep.fitted["alpha0"] > 0
    assert min(rep.slack) >= -1e-9 * max(rep.lhs)


def test_volume_capacity_zero_measure(disc64):
    rep = volume_capacity_scan(GridMeasure.zero(disc64),
                               kfamily(disc64, None))
    assert rep.passed


def test_volume_capacity_power_form(disc128):
    phi = subsolution(disc128, {"name": "holder", "alpha": 0.5})
    mu = ma_measure(phi)
    fam = kfamily(disc128, {"kind": "ball", "r": [0.2, 0.3, 0.4, 0.5]})
    rep = volume_capacity_scan(mu, fam, tau=1.0)
    c_tau = rep.fitted["c_tau"]
    for m, rhs in zip(rep.lhs, rep.extras["power_rhs"]):
        assert m <= rhs + 1e-9 * max(rep.lhs)
    assert c_tau > 0


def test_volume_capacity_degenerate_family(disc64):
    phi = subsolution(disc64, "quad")
    mu = ma_measure(phi)
    fam = [compact_set(disc64, {"kind": "ball", "r": 0.3})] * 3
    with pytest.raises(ValueError):
        volume_capacity_scan(mu, fam)


# -- collar mass growth --------------------------------------------------------

def test_mass_est_slope_bounded(disc128):
    v = subsolution(disc128, {"name": "holder", "alpha": 0.5})
    rep = mass_est_scan(v, k=1)
    assert rep.passed
    assert rep.fitted["slope"] >= -1.1


def test_mass_est_n2_k2(ball16):
    v = subsolution(ball16, "quad")
    rep = mass_est_scan(v, k=2, eps_ladder=[0.2, 0.3, 0.4])
    assert rep.passed


# -- stability / L1 probes ----------------------------------------------------

@pytest.fixture(scope="module")
def solved_quad(request):
    dom = build_domain({"shape": "disc"}, 128)
    phi = subsolution(dom, "quad")
    mu = ma_measure(phi)
    rep = solve_dirichlet(DirichletProblem(dom, mu, BoundaryData.zero(),
                                           subsolution=phi))
    return dom, phi, mu, rep


def test_stability_trivial_for_u(solved_quad):
    dom, phi, mu, rep = solved_quad
    probe = stability_probe(rep.u, mu, 0.1, perturbations=[rep.u])
    assert probe.lhs[0] == 0.0 and probe.rhs[0] == 0.0


def test_stability_ladder_exponent(solved_quad):
    dom, phi, mu, rep = solved_quad
    probe = stability_probe(rep.u, mu, 0.1, ceiling=rep.envelope)
    assert 0 < probe.fitted["alpha2"] <= 1
    assert probe.passed


def test_stability_rejects_bad_support(solved_quad):
    dom, phi, mu, rep = solved_quad
    bad = GridFunction(dom, rep.u.values + 0.1, "bad")
    with pytest.raises(ValueError):
        stability_probe(rep.u, mu, 0.1, perturbations=[bad])


def test_capacity_growth_chain(solved_quad):
    dom, phi, mu, rep = solved_quad
    probe = stability_probe(rep.u, mu, 0.1, ceiling=rep.envelope)
    # rebuild the largest perturbation for the chain check
    from cmalab.lab import _auto_perturbations
    from cmalab.settings import DEFAULTS
    perts, _ = _auto_perturbations(rep.u, 0.1, 6, DEFAULTS, rep.envelope)
    chain = capacity_growth_check(rep.u, perts[0], phi, mu, 0.1, tau=1.0)
    assert chain.passed, chain.extras


def test_l1_l1_trivial_for_u(solved_quad):
    dom, phi, mu, rep = solved_quad
    probe = l1_l1_probe(rep.u, mu, 0.1, perturbations=[rep.u])
    assert probe.lhs[0] == 0.0 and probe.rhs[0] == 0.0


def test_l1_l1_ladder(solved_quad):
    dom, phi, mu, rep = solved_quad
    probe = l1_l1_probe(rep.u, mu, 0.1, phi=phi, alpha=0.5,
                        ceiling=rep.envelope)
    assert 0 < probe.fitted["alpha3"] <= 1
    assert probe.passed
    inst = probe.extras["instrument"]
    assert inst, "instrument log should not be empty"
    i1 = [rec["levels"][0]["I1"] for rec in inst]
    l1s = [rec["l1"] for rec in inst]
    order = np.argsort(l1s)
    sorted_i1 = np.asarray(i1)[order]
    assert (np.diff(sorted_i1) >= -0.1 * sorted_i1[1:]).all()


# -- pipelines ----------------------------------------------------------------

def test_theorem_b_quadratic_case(disc128):
    phi = subsolution(disc128, "quad")
    mu = ma_measure(phi)
    rep = theorem_b_pipeline(disc128, phi, boundary_data(disc128, "zero"), mu,
                             delta_grid=[0.1, 0.05])
    assert rep.alpha == 0.5  # capped working exponent
    assert rep.alpha4 == pytest.approx(
        rep.alpha * rep.alpha2 * rep.alpha3 / (2 * 1 + 1 + rep.alpha))
    assert rep.passed
    assert rep.empirical_alpha >= rep.alpha4
    for d, e in zip(rep.deltas, rep.eps):
        assert d <= e < rep.delta0 * (1 + 1e-12)


def test_theorem_b_envelope_case(disc64):
    # zero measure: the solution is the boundary envelope
    psi = boundary_data(disc64, "re_z1_sq")
    phi = subsolution(disc64, "quad")
    mu = GridMeasure.zero(disc64)
    rep = theorem_b_pipeline(disc64, phi, psi, mu, delta_grid=[0.1, 0.05])
    assert rep.flags["solver_converged"]
    assert rep.flags["glue_psh"]


def test_gap_ladder_recovers_cusp_exponent(disc256_like):
    # the ball-average gap of the exact half-power cusp scales like
    # delta^(1/2) on the shrunken domains, independently of any solver
    dom = disc256_like
    u = subsolution(dom, {"name": "holder", "alpha": 0.5})
    from cmalab import ball_average
    from cmalab.geometry import shrink
    deltas = [0.025, 0.05, 0.1]
    gaps = []
    for d in deltas:
        gap = ball_average(u, d).values - u.values
        gaps.append(float(gap[shrink(dom, d).mask].max()))
    slope = np.polyfit(np.log(deltas), np.log(gaps), 1)[0]
    assert 0.35 <= slope <= 0.8


def test_volume_capacity_scan_thread_invariant(disc64, monkeypatch):
    phi = subsolution(disc64, {"name": "holder", "alpha": 0.5})
    mu = ma_measure(phi)
    fam = kfamily(disc64, {"kind": "ball", "r": [0.2, 0.3, 0.4, 0.5]})
    monkeypatch.setenv("MA_LAB_THREADS", "1")
    a = volume_capacity_scan(mu, fam)
    monkeypatch.setenv("MA_LAB_THREADS", "4")
    b = volume_capacity_scan(mu, fam)
    assert a.parameters == b.parameters
    assert a.lhs == b.lhs and a.rhs == b.rhs
    assert a.fitted["alpha0"] == b.fitted["alpha0"]


def test_ma_mass_of_fixed_set_converges():
    # flux through |z| = r for the half-power cusp: 2 pi r^2 / sqrt(1 - r^2)
    from cmalab.catalog import compact_set
    exact = 2 * math.pi * 0.25 / math.sqrt(0.75)
    errs = []
    for res in (48, 96, 192):
        dom = build_domain({"shape": "disc"}, res)
        phi = subsolution(dom, {"name": "holder", "alpha": 0.5})
        K = compact_set(dom, {"kind": "ball", "r": 0.5})
        errs.append((abs(ma_measure(phi).total(K) - exact), dom.h))
    for err, h in errs:
        assert err <= max(2 * h, 0.03)
    assert errs[-1][0] <= 0.005


def test_theorem_b_runs_in_n2():
    dom = build_domain({"shape": "ball"}, 24)
    phi = subsolution(dom, "quad")
    rep = theorem_b_pipeline(dom, phi, boundary_data(dom, "zero"),
                             ma_measure(phi))
    assert rep.flags["solver_converged"] and rep.flags["sandwich"]
    assert rep.flags["glue_psh"] and rep.flags["coupling"]
    assert rep.alpha4 == pytest.approx(
        rep.alpha * rep.alpha2 * rep.alpha3 / (2 * 2 + 1 + rep.alpha))


def test_theorem_b_rejects_undominated(disc64):
    phi = subsolution(disc64, "quad")
    mu = ma_measure(phi).scaled(3.0)
    with pytest.raises(ValueError):
        theorem_b_pipeline(disc64, phi, boundary_data(disc64, "zero"), mu)


def test_effective_alpha_caps():
    assert effective_alpha(1.0, None) == 0.5
    assert effective_alpha(0.3, None) == 0.3
    assert effective_alpha(1.0, 0.4) == 0.2


def test_corollary_c_unit_density_matches_theorem_b():
    rep = corollary_c_pipeline({"shape": "disc"}, 96, "one", 2.0)
    assert rep.scan.passed
    assert rep.sandwich_ok
    assert rep.dominated_ok
    assert rep.holder.flags["solver_converged"]


def test_corollary_c_singular_density():
    rep = corollary_c_pipeline({"shape": "disc"}, 96,
                               {"name": "rho_inv_pow", "q": 0.25}, 2.0)
    assert rep.scan.passed
    assert rep.fp_integral > 0 and math.isfinite(rep.fp_integral)
    assert rep.sandwich_ok
    assert rep.holder.empirical_alpha > 0


def test_corollary_c_masked_density():
    rep = corollary_c_pipeline({"shape": "disc"}, 96, "half_plane", 2.0)
    assert rep.scan.passed
    assert rep.scan.fitted["c_tau"] > 0


def test_corollary_c_rejects_bad_exponent():
    with pytest.raises(ValueError):
        corollary_c_pipeline({"shape": "disc"}, 96, "one", 1.0)


# -- verify dispatch ----------------------------------------------------------

@pytest.mark.parametrize("ineq", ["blocki", "cegrell", "sublevel-decay",
                                  "volume-capacity", "mass-est", "stability",
                                  "l1-l1", "dominated"])
def test_run_verify_ids(disc64, ineq):
    rep = run_verify(disc64, ineq, {"trials": 4}, seed=9)
    assert rep.inequality_id in (ineq,)
    if ineq != "sublevel-decay":
        assert rep.passed


def test_run_verify_unknown_id(disc64):
    with pytest.raises(ValueError):
        run_verify(disc64, "no-such-inequality")
