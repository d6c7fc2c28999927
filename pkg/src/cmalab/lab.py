"""Empirical verification of the named inequalities and the exponent
pipelines.

Every check follows the same discipline: scan a ladder, fit the unspecified
constant (and exponent, where one is claimed) by least squares on logs,
then verify that the fitted bound dominates the data one-sidedly.  Pass
flags are pure functions of the scanned data, so reruns with fixed seeds
and grids are bit-identical.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import catalog
from .calculus import (GridFunction, GridMeasure, ball_average, dominated_by,
                       holder_seminorm, is_discretely_psh, is_in_E0,
                       is_in_E0_prime, ma_measure, mixed_measure, mollify,
                       regularize_subsolution, sup_convolution)
from .capacity import capacity
from .fitting import (clamp_unit_exponent, fit_exponential, fit_power,
                      one_sided_constant)
from .geometry import GridDomain, RegionMask, hopf_constant, shrink
from .relax import Workspace
from .settings import DEFAULTS, Settings, thread_count
from .solver import (DirichletProblem, SolveReport, maximal_envelope,
                     solve_dirichlet)

log = logging.getLogger(__name__)


def parallel_map(fn, items, threads: int | None = None):
    """Order-preserving map; MA_LAB_THREADS caps the worker count."""
    items = list(items)
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# report types


@dataclass
class InequalityReport:
    inequality_id: str
    parameter_name: str
    parameters: list
    lhs: list
    rhs: list
    passed: bool
    worst_slack: float
    fitted: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    hypotheses_ok: bool = True
    extras: dict = field(default_factory=dict)

    @property
    def slack(self):
        return [r - l for l, r in zip(self.lhs, self.rhs)]

    def rows(self):
        return [(p, l, r, r - l)
                for p, l, r in zip(self.parameters, self.lhs, self.rhs)]

    def header(self):
        return (self.parameter_name, "lhs", "rhs", "slack")


@dataclass
class HolderReport:
    deltas: list
    eps: list
    sup_gaps: list
    l1_gaps: list
    alpha: float
    alpha2: float
    alpha3: float
    alpha4: float
    coupling_exponent: float
    delta0: float
    fit_exponent_raw: float
    empirical_alpha: float
    fit_residual: float
    lapest_slope: float
    glue_constants: list
    lemma41_constants: list
    flags: dict
    stability: dict = field(default_factory=dict)
    l1: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def rows(self):
        pred = _safe_power_predict(self.deltas, self.fit_exponent_raw,
                                   self.sup_gaps)
        return [(d, e, g, f) for d, e, g, f in
                zip(self.deltas, self.eps, self.sup_gaps, pred)]

    def header(self):
        return ("delta", "eps", "sup_gap", "fit")


def _safe_power_predict(x, p, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    pos = (x > 0) & (y > 0)
    if pos.sum() < 2:
        return list(y)
    logc = float(np.mean(np.log(y[pos]) - p * np.log(x[pos])))
    return list(np.exp(logc) * x ** p)


# ---------------------------------------------------------------------------
# randomized admissible families (for the Monte-Carlo suites)


def _rho_hat(domain: GridDomain) -> GridFunction:
    depth = abs(float(domain.rho_values[domain.interior].min()))
    return GridFunction(domain, domain.rho_values / depth, "rho-hat")


def random_e0_member(domain: GridDomain, rng: np.random.Generator) -> GridFunction:
    """Random bounded PSH field with zero boundary trace and finite mass."""
    rho_hat = _rho_hat(domain).values
    lam = rng.uniform(0.3, 1.0)
    kind = rng.integers(0, 3)
    if kind == 0:
        vals = lam * rho_hat
    else:
        a = rng.uniform(-0.4, 0.4, size=domain.dim)
        d2 = ((domain.positions - a) ** 2).sum(axis=-1)
        cap = float(d2[domain.ghost].max())
        q = rng.uniform(0.5, 2.0) * (d2 - cap) / cap
        if kind == 1:
            vals = lam * np.maximum(rho_hat, q)
        else:
            vals = lam * (0.5 * rho_hat + 0.5 * np.maximum(rho_hat, q))
    return GridFunction(domain, vals, f"e0-sample({kind})")


# ---------------------------------------------------------------------------
# pairwise product inequalities


def verify_blocki(v_list, v, h, k, settings: Settings = DEFAULTS) -> InequalityReport:
    """One instance of the k-fold product estimate

        int (h-v)^k dd^c v_1 ^...^ dd^c v_n
            <= k! ||v_1||..||v_k|| int (dd^c v)^k ^ dd^c v_{k+1} ^...^ dd^c v_n.
    """
    dom = v.domain
    n = dom.n
    if len(v_list) != n or not (1 <= k <= n):
        raise ValueError("need n factor fields and 1 <= k <= n")
    hyp = (all(float(f.interior_values().max()) <= 1e-9 * max(1.0, f.sup_abs())
               for f in v_list)
           and float((v.values - h.values)[dom.interior].max()) <= 10.0 * dom.h
           and float(np.abs((h.values - v.values)[dom.ghost]).max())
               <= 10.0 * math.sqrt(dom.h) * max(1.0, h.osc() + v.osc()))
    gap = np.maximum(h.values - v.values, 0.0)
    w_all = mixed_measure(v_list, check_psh=False, settings=settings)
    lhs = float((gap ** k * w_all.weights).sum())
    rhs_measure = mixed_measure([v] * k + list(v_list[k:]), check_psh=False,
                                settings=settings)
    norms = math.prod(f.sup_abs() for f in v_list[:k])
    rhs = math.factorial(k) * norms * rhs_measure.total()
    tol = 10.0 * dom.h * max(abs(lhs), abs(rhs), 1.0)
    return InequalityReport(
        "blocki", "k", [k], [lhs], [rhs + tol],
        passed=lhs <= rhs + tol, worst_slack=rhs + tol - lhs,
        fitted={"tolerance": tol, "rhs_raw": rhs}, hypotheses_ok=hyp)


def blocki_suite(domain: GridDomain, trials: int, seed: int,
                 k: int | None = None,
                 settings: Settings = DEFAULTS) -> InequalityReport:
    rng = np.random.default_rng(seed)
    n = domain.n
    lhs, rhs, notes = [], [], []
    ok = True
    hyp_ok = True
    for t in range(trials):
        kk = k if k is not None else int(rng.integers(1, n + 1))
        v_list = [random_e0_member(domain, rng) for _ in range(n)]
        hfun = random_e0_member(domain, rng)
        w = random_e0_member(domain, rng)
        v = GridFunction(domain, hfun.values + w.values, "h+w")
        rep = verify_blocki(v_list, v, hfun, kk, settings)
        lhs.append(rep.lhs[0])
        rhs.append(rep.rhs[0])
        ok &= rep.passed
        hyp_ok &= rep.hypotheses_ok
    slack = [r - l for l, r in zip(lhs, rhs)]
    return InequalityReport(
        "blocki", "trial", list(range(trials)), lhs, rhs, passed=ok,
        worst_slack=min(slack) if slack else 0.0,
        fitted={"trials": trials, "seed": seed}, notes=notes,
        hypotheses_ok=hyp_ok)


def verify_cegrell(v_list, settings: Settings = DEFAULTS) -> InequalityReport:
    """Mixed mass bounded by the geometric mean of the pure masses."""
    dom = v_list[0].domain
    n = dom.n
    if len(v_list) != n:
        raise ValueError("need exactly n fields")
    members = [is_in_E0(f, settings=settings) for f in v_list]
    hyp = all(m.is_member for m in members)
    lhs = mixed_measure(v_list, check_psh=False, settings=settings).total()
    totals = [ma_measure(f, check_psh=False, settings=settings).total()
              for f in v_list]
    rhs = math.prod(t ** (1.0 / n) for t in totals)
    tol = 10.0 * dom.h * max(abs(lhs), abs(rhs), 1.0)
    return InequalityReport(
        "cegrell", "instance", [0], [lhs], [rhs + tol],
        passed=lhs <= rhs + tol, worst_slack=rhs + tol - lhs,
        fitted={"tolerance": tol, "totals": totals, "rhs_raw": rhs},
        hypotheses_ok=hyp)


def cegrell_suite(domain: GridDomain, trials: int, seed: int,
                  settings: Settings = DEFAULTS) -> InequalityReport:
    rng = np.random.default_rng(seed)
    lhs, rhs = [], []
    ok = True
    hyp_ok = True
    for t in range(trials):
        v_list = [random_e0_member(domain, rng) for _ in range(domain.n)]
        rep = verify_cegrell(v_list, settings)
        lhs.append(rep.lhs[0])
        rhs.append(rep.rhs[0])
        ok &= rep.passed
        hyp_ok &= rep.hypotheses_ok
    slack = [r - l for l, r in zip(lhs, rhs)]
    return InequalityReport(
        "cegrell", "trial", list(range(trials)), lhs, rhs, passed=ok,
        worst_slack=min(slack) if slack else 0.0,
        fitted={"trials": trials, "seed": seed}, hypotheses_ok=hyp_ok)


# ---------------------------------------------------------------------------
# sublevel decay


def default_sublevel_grid(v: GridFunction, points: int = 5) -> list:
    """Dyadic ladder in residual depth: s_j = s_max (1 - 2^-j)."""
    s_max = abs(float(v.interior_values().min()))
    return [s_max * (1.0 - 0.5 ** j) for j in range(1, points + 1)]


def sublevel_decay_scan(v: GridFunction, phi: GridFunction, s_grid=None,
                        settings: Settings = DEFAULTS) -> InequalityReport:
    """Mass of (dd^c phi)^n on {v < -s}: polynomial bound C/s^n over the whole
    ladder, exponential bound C e^(-tau s) on s >= 2.

    On desk grids the unit-mass normalization keeps sublevels at s >= 2
    empty (one cell already has capacity ~ (2 pi / |log h|)^n, which caps the
    depth of any admissible v), so the exponential regime is typically
    reported as vacuous rather than fitted.
    """
    dom = v.domain
    n = dom.n
    membership = is_in_E0_prime(v, settings=settings)
    if s_grid is None:
        s_grid = default_sublevel_grid(v, settings.ladder_points)
    mu = ma_measure(phi, check_psh=False, settings=settings)
    s_vals, masses = [], []
    for s in sorted(s_grid):
        mask = dom.interior & (v.values < -s)
        if not mask.any():
            break  # truncate the scan at the first empty sublevel
        s_vals.append(float(s))
        masses.append(float(mu.weights[mask].sum()))

    fitted = {"membership": membership.clauses, "mass_of_v": membership.mass}
    notes = []
    poly_pass = False
    if sum(m > 0 for m in masses) >= 2:
        pf = fit_power(s_vals, masses)
        c_poly = one_sided_constant(masses, [s ** (-n) for s in s_vals])
        rhs = [c_poly / s ** n for s in s_vals]
        fitted.update(poly_exponent=pf.exponent, poly_residual=pf.residual,
                      poly_constant=c_poly)
        poly_pass = pf.exponent <= -n + 0.3
    else:
        rhs = [m for m in masses]
        notes.append("too few positive masses for a polynomial fit")

    exp_pts = [(s, m) for s, m in zip(s_vals, masses) if s >= 2.0 and m > 0]
    if len(exp_pts) >= 2:
        ef = fit_exponential([p[0] for p in exp_pts], [p[1] for p in exp_pts])
        fitted.update(exp_tau=ef.rate, exp_residual=ef.residual,
                      exp_constant=ef.c, alpha1=ef.rate / 2.0)
        exp_pass = ef.rate > 0
    else:
        fitted.update(exp_tau=None, alpha1=None)
        notes.append("exponential regime vacuous: no resolvable sublevels at s >= 2")
        exp_pass = None

    if fitted.get("alpha1"):
        a1 = fitted["alpha1"]
        c_sharp = one_sided_constant(
            masses, [math.exp(-a1 * s) / s ** n for s in s_vals])
        fitted["sharp_constant"] = c_sharp

    passed = poly_pass and (exp_pass is not False)
    slack = [r - l for l, r in zip(masses, rhs)]
    return InequalityReport(
        "sublevel-decay", "s", s_vals, masses, rhs, passed=passed,
        worst_slack=min(slack) if slack else 0.0, fitted=fitted, notes=notes,
        hypotheses_ok=membership.is_member,
        extras={"exp_pass": exp_pass, "poly_pass": poly_pass})


# ---------------------------------------------------------------------------
# volume-capacity


def volume_capacity_scan(mu: GridMeasure, K_family, tau: float = 1.0,
                         settings: Settings = DEFAULTS,
                         workspace: Workspace | None = None) -> InequalityReport:
    """Scatter of (cap K, mu(K)) against C cap(K) exp(-alpha0 cap^{-1/n})."""
    dom = mu.domain
    n = dom.n
    ws = workspace or Workspace(dom)
    # embarrassingly parallel over the family; merged by index
    caps = parallel_map(lambda K: capacity(K, dom, settings, ws).value,
                        K_family)
    masses = [mu.total(K) for K in K_family]

    if mu.total() == 0.0:
        return InequalityReport(
            "volume-capacity", "cap", caps, masses, [0.0] * len(caps),
            passed=True, worst_slack=0.0,
            fitted={"alpha0": None, "tau": tau, "c_tau": 0.0},
            notes=["zero measure: bound holds with any constants"])

    if len(set(round(c, 12) for c in caps)) < 3:
        raise ValueError("degenerate fit: need at least 3 distinct capacities")

    x = np.array(caps) ** (-1.0 / n)
    y = np.log(np.maximum(np.array(masses), 1e-300) / np.array(caps))
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    alpha0 = -float(coef[0])
    # raise C so the fitted curve dominates every scanned point
    c_dom = one_sided_constant(
        masses, [c * math.exp(-alpha0 * xi) for c, xi in zip(caps, x)])
    rhs = [c_dom * c * math.exp(-alpha0 * xi) for c, xi in zip(caps, x)]
    c_tau = one_sided_constant(masses, [c ** (1.0 + tau) for c in caps])
    slack = [r - l for l, r in zip(masses, rhs)]
    return InequalityReport(
        "volume-capacity", "cap", caps, masses, rhs,
        passed=alpha0 > 0 and min(slack) >= -1e-9 * max(masses),
        worst_slack=min(slack),
        fitted={"alpha0": alpha0, "constant": c_dom, "tau": tau,
                "c_tau": c_tau,
                "fit_range": [float(min(caps)), float(max(caps))]},
        extras={"power_rhs": [c_tau * c ** (1.0 + tau) for c in caps]})


# ---------------------------------------------------------------------------
# collar mass growth (the mixed-mass estimate on shrinking collars)


def mass_est_scan(v: GridFunction, k: int, eps_ladder=None,
                  settings: Settings = DEFAULTS) -> InequalityReport:
    """Mixed mass of order k on Omega_eps against C ||v||^k / eps^k."""
    dom = v.domain
    n = dom.n
    if not (1 <= k <= n):
        raise ValueError("need 1 <= k <= n")
    if eps_ladder is None:
        # plain mass scans tolerate a thinner collar than the regularized
        # ladders, so the floor here is two cells
        d0 = settings.delta0_frac * dom.inradius
        eps_ladder = [d0 / 2 ** j for j in range(settings.ladder_points)
                      if d0 / 2 ** j >= 2.0 * dom.h]
        if len(eps_ladder) < 2:
            eps_ladder = [2.0 * d0, d0]
    w = mixed_measure([v] * k, check_psh=False, settings=settings)
    eps_vals = sorted(float(e) for e in eps_ladder)
    masses = [w.total(shrink(dom, e)) for e in eps_vals]
    pf = fit_power(eps_vals, masses)
    norm = v.sup_abs() ** k
    c_dom = one_sided_constant(masses, [norm / e ** k for e in eps_vals])
    rhs = [c_dom * norm / e ** k for e in eps_vals]
    slack = [r - l for l, r in zip(masses, rhs)]
    return InequalityReport(
        "mass-est", "eps", eps_vals, masses, rhs,
        passed=pf.exponent >= -k - 0.1, worst_slack=min(slack),
        fitted={"slope": pf.exponent, "constant": c_dom, "k": k,
                "residual": pf.residual})


# ---------------------------------------------------------------------------
# glued competitors and the stability / L1 probes


def glue_competitor(u: GridFunction, capfn: GridFunction, drop: float,
                    region: RegionMask, name="glued") -> GridFunction:
    """max(capfn - drop, u) on the region, u outside (exactly)."""
    vals = u.values.copy()
    m = region.mask
    vals[m] = np.maximum(capfn.values[m] - drop, u.values[m])
    return u.with_values(vals, name)


def _auto_perturbations(u: GridFunction, eps: float, points: int,
                        settings: Settings, ceiling: GridFunction | None = None):
    """Dilation ladder: PSH competitors equal to u outside shrink(eps).

    A plain additive bump cannot be PSH and vanish on the seam (maximum
    principle), so the ladder rides the gap to the maximal envelope:
    v = max(u, (1-theta) u + theta ceiling - theta offset), with the offset
    chosen so the second branch loses outside the shrunken domain.
    """
    dom = u.domain
    if ceiling is None:
        ceiling = u.with_values(np.zeros(dom.grid_shape), "zero-ceiling")
    region = shrink(dom, eps)
    d = ceiling.values - u.values
    outside = dom.closure & ~region.mask
    d_out = float(d[outside].max()) if outside.any() else 0.0
    top = float(d[region.mask].max()) if region.mask.any() else 0.0
    span = top - d_out
    if span <= 0:
        return [], {"degenerate": True, "offset": d_out, "top": top}
    perts = []
    ladder = []
    for j in range(points):
        # shrink amplitude and support together so the fit sees a ladder of
        # genuinely different perturbations, not one rescaled profile
        theta = 0.5 * 0.5 ** j
        drop = d_out * (1.0 + 1e-12) + span * 0.75 * (1.0 - 0.5 ** j)
        cand = (1.0 - theta) * u.values + theta * ceiling.values - theta * drop
        vals = u.values.copy()
        vals[region.mask] = np.maximum(cand[region.mask], u.values[region.mask])
        perts.append(u.with_values(vals, f"dilate[{j}]"))
        ladder.append({"theta": theta, "drop": drop})
    return perts, {"degenerate": False, "offset": d_out, "top": top,
                   "ladder": ladder}


def _check_support(u, v, eps):
    outside = ~shrink(u.domain, eps).mask & u.domain.interior
    if outside.any() and float(np.abs((v.values - u.values)[outside]).max()) > 0:
        raise ValueError("perturbation is not supported in the shrunken domain")


def stability_probe(u: GridFunction, mu: GridMeasure, eps: float,
                    perturbations=None, settings: Settings = DEFAULTS,
                    points: int | None = None,
                    ceiling: GridFunction | None = None) -> InequalityReport:
    """Fit alpha2 in sup(v-u) <= (C/eps^n) (int max(v-u,0) dmu)^alpha2."""
    dom = u.domain
    n = dom.n
    info = {}
    if perturbations is None:
        perturbations, info = _auto_perturbations(
            u, eps, points or settings.probe_points, settings, ceiling)
    for v in perturbations:
        _check_support(u, v, eps)
    xs, ys = [], []
    for v in perturbations:
        diff = np.maximum(v.values - u.values, 0.0)
        xs.append(mu.weighted_sum(diff))
        ys.append(float(diff[dom.interior].max()))
    pairs = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0]
    fitted = dict(info)
    if len(pairs) >= 2:
        pf = fit_power([p[0] for p in pairs], [p[1] for p in pairs])
        alpha2 = clamp_unit_exponent(pf.exponent)
        fitted.update(alpha2=alpha2, raw_slope=pf.exponent,
                      residual=pf.residual)
    else:
        alpha2 = 1.0
        fitted.update(alpha2=alpha2, raw_slope=None)
    c_dom = one_sided_constant(ys, [x ** alpha2 / eps ** n for x in xs])
    rhs = [c_dom * x ** alpha2 / eps ** n for x in xs]
    slack = [r - l for l, r in zip(ys, rhs)]
    fitted.update(constant=c_dom, eps=eps)
    return InequalityReport(
        "stability", "mu_integral", xs, ys, rhs,
        passed=0 < alpha2 <= 1 and (min(slack) if slack else 0.0) >= -1e-9,
        worst_slack=min(slack) if slack else 0.0, fitted=fitted)


def capacity_growth_check(u: GridFunction, v: GridFunction, phi: GridFunction,
                          mu: GridMeasure, eps: float, tau: float = 1.0,
                          settings: Settings = DEFAULTS) -> InequalityReport:
    """t^n cap(U(s)) <= (C(tau)/eps^n) cap(U(s+t))^(1+tau) at s = t = |s0|/4,
    verified link by link through mu and the regularized subsolution."""
    dom = u.domain
    n = dom.n
    ws = Workspace(dom)
    s0 = -float(np.maximum(v.values - u.values, 0.0)[dom.interior].max())
    if s0 >= 0:
        return InequalityReport("capacity-growth", "s", [], [], [], True, 0.0,
                                notes=["trivial: v <= u"])
    s = t = abs(s0) / 4.0
    U_s = RegionMask(dom, dom.interior & (u.values < v.values + s0 + s), "U(s)")
    U_st = RegionMask(dom, dom.interior & (u.values < v.values + s0 + s + t),
                      "U(s+t)")
    cap_s = capacity(U_s, dom, settings, ws).value
    cap_st = capacity(U_st, dom, settings, ws).value
    lhs = t ** n * cap_s
    mu_st = mu.total(U_st)

    c0 = hopf_constant(dom)
    phi_eps = regularize_subsolution(phi, dom, c0 * eps)
    reg_mass = ma_measure(phi_eps, check_psh=False, settings=settings)
    reg_on_U = reg_mass.total(U_st)

    # fit C(tau) on a nested-ball family, then test it on the sublevel masks
    fam = catalog.kfamily(dom, {"kind": "ball", "r": [0.2, 0.3, 0.4, 0.5]})
    fam_caps = [capacity(K, dom, settings, ws).value for K in fam]
    fam_mass = [reg_mass.total(K) for K in fam]
    c_tau = one_sided_constant(fam_mass, [c ** (1 + tau) for c in fam_caps])
    rhs = (c_tau / eps ** n) * cap_st ** (1 + tau)

    tol = 10.0 * dom.h * max(lhs, mu_st, 1.0)
    links = {
        "comparison": lhs <= mu_st + tol,
        "domination": mu_st <= reg_on_U + tol,
        "vol_cap_form": reg_on_U <= rhs + tol,
    }
    return InequalityReport(
        "capacity-growth", "stage", ["t^n cap(U(s))", "mu(U(s+t))",
                                     "reg-mass(U(s+t))"],
        [lhs, mu_st, reg_on_U], [mu_st + tol, reg_on_U + tol, rhs + tol],
        passed=all(links.values()), worst_slack=rhs + tol - lhs,
        fitted={"c_tau": c_tau, "tau": tau, "s": s, "t": t,
                "cap_Us": cap_s, "cap_Ust": cap_st}, extras={"links": links})


def l1_l1_probe(u: GridFunction, mu: GridMeasure, eps: float,
                perturbations=None, phi: GridFunction | None = None,
                alpha: float | None = None, settings: Settings = DEFAULTS,
                points: int | None = None,
                ceiling: GridFunction | None = None) -> InequalityReport:
    """Fit alpha3 in int |v-u| dmu <= (C/eps^{n+1}) (int |v-u| dV)^alpha3.

    When a subsolution is supplied the proof's mollifier split is
    instrumented: I1 (smoothed-Hessian term) and I2 (commutator term) are
    evaluated at t = ||v-u||_1^{tau_k/3} for each induction level k.
    """
    dom = u.domain
    n = dom.n
    info = {}
    if perturbations is None:
        perturbations, info = _auto_perturbations(
            u, eps, points or settings.probe_points, settings, ceiling)
    for v in perturbations:
        _check_support(u, v, eps)
    xs, ys = [], []
    for v in perturbations:
        diff = np.abs(v.values - u.values)
        diff[~dom.interior] = 0.0
        xs.append(float(diff.sum()) * dom.cell_volume)
        ys.append(mu.weighted_sum(diff))
    pairs = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0]
    fitted = dict(info)
    if len(pairs) >= 2:
        pf = fit_power([p[0] for p in pairs], [p[1] for p in pairs])
        alpha3 = clamp_unit_exponent(pf.exponent)
        fitted.update(alpha3=alpha3, raw_slope=pf.exponent, residual=pf.residual)
    else:
        alpha3 = 1.0
        fitted.update(alpha3=alpha3, raw_slope=None)
    c_dom = one_sided_constant(ys, [x ** alpha3 / eps ** (n + 1) for x in xs])
    rhs = [c_dom * x ** alpha3 / eps ** (n + 1) for x in xs]
    slack = [r - l for l, r in zip(ys, rhs)]
    fitted.update(constant=c_dom, eps=eps)

    instrument = []
    max_t = dom.box_halfwidth - dom.shape.max_semiaxis() - 2.0 * dom.h
    if phi is not None and alpha is not None and max_t >= dom.h:
        phi_eps = regularize_subsolution(phi, dom, eps)
        for v, x1 in zip(perturbations, xs):
            if x1 <= 0:
                continue
            tau_k = 1.0
            levels = []
            for k in range(n):
                t = min(max(x1 ** (tau_k / 3.0), dom.h), max_t)
                smoothed = mollify(phi_eps, t, settings)
                w_moll = mixed_measure([smoothed] + [phi_eps] * k,
                                       check_psh=False, settings=settings)
                w_plain = mixed_measure([phi_eps] * (k + 1),
                                        check_psh=False, settings=settings)
                diff = np.abs(v.values - u.values)
                diff[~dom.interior] = 0.0
                i1 = abs(float((diff * w_moll.weights).sum()))
                i2 = abs(float((diff * (w_moll.weights - w_plain.weights)).sum()))
                levels.append({"k": k, "t": t, "I1": i1, "I2": i2,
                               "tau_k": tau_k})
                tau_k = alpha * tau_k / 3.0
            instrument.append({"l1": x1, "levels": levels})
    return InequalityReport(
        "l1-l1", "l1_volume", xs, ys, rhs,
        passed=0 < alpha3 <= 1 and (min(slack) if slack else 0.0) >= -1e-9,
        worst_slack=min(slack) if slack else 0.0, fitted=fitted,
        extras={"instrument": instrument})


# ---------------------------------------------------------------------------
# the Theorem-B exponent pipeline


def effective_alpha(phi_alpha: float, psi_alpha: float | None) -> float:
    """Working exponent: at most 1/2, at most the subsolution exponent, and
    at most half the boundary-data exponent."""
    a = min(phi_alpha, 0.5)
    if psi_alpha is not None:
        a = min(a, psi_alpha / 2.0)
    return a


def theorem_b_pipeline(domain: GridDomain, phi: GridFunction, psi,
                       mu: GridMeasure, delta_grid=None,
                       settings: Settings = DEFAULTS,
                       presolved: SolveReport | None = None,
                       workspace: Workspace | None = None) -> HolderReport:
    """Solve, probe the stability and L1 exponents, then scan the dyadic
    delta-ladder: regularization gaps, boundary estimate, gluing, and the
    final exponent comparison."""
    dom = domain
    n = dom.n
    ws = workspace or Workspace(dom)
    dom_rep = dominated_by(mu, phi, settings=settings)
    if not dom_rep.ok:
        raise ValueError(
            f"measure is not dominated by the subsolution "
            f"(excess {dom_rep.worst_excess:.3e} at {dom_rep.worst_cell})")

    if presolved is None:
        prob = DirichletProblem(dom, mu, psi, subsolution=phi)
        solve = solve_dirichlet(prob, settings, ws)
    else:
        solve = presolved
    u, env = solve.u, solve.envelope

    alpha = effective_alpha(getattr(phi, "holder_alpha", 0.5),
                            getattr(psi, "holder_alpha", None))
    c1 = holder_seminorm(env, alpha, settings).value
    c2 = holder_seminorm(phi, alpha, settings).value

    delta0 = settings.delta0_frac * dom.inradius
    ladder_notes = []
    if delta_grid is None:
        floor = settings.min_delta_cells * dom.h * (1.0 - 1e-9)
        delta_grid = [delta0 / 2 ** j for j in range(1, settings.ladder_points + 1)
                      if delta0 / 2 ** j >= floor]
        if len(delta_grid) < 2:
            # the dyadic ladder collapsed against the resolution floor
            delta_grid = sorted({min(max(floor, delta0 / 4), 0.9 * delta0),
                                 min(1.5 * floor, 0.9 * delta0)})
            ladder_notes.append("coarse grid: fallback two-point ladder")
    deltas = sorted(float(d) for d in delta_grid)

    eps_ref = delta0 / 2.0
    stab = stability_probe(u, mu, eps_ref, settings=settings, ceiling=env)
    l1rep = l1_l1_probe(u, mu, eps_ref, phi=phi, alpha=alpha,
                        settings=settings, ceiling=env)
    alpha2 = stab.fitted["alpha2"]
    alpha3 = l1rep.fitted["alpha3"]
    alpha4 = alpha * alpha2 * alpha3 / (2 * n + 1 + alpha)
    p = alpha2 * alpha3 / (2 * n + 1 + alpha)

    sup_gaps, l1_gaps, eps_list = [], [], []
    glue_constants, lemma41_constants = [], []
    glue_ok = True
    lemma41_ok = True
    notes = list(ladder_notes)
    for d in deltas:
        # coupling: eps = delta0^(1-p) delta^p keeps delta <= eps < delta0
        # while preserving the prescribed exponent in delta
        eps = delta0 ** (1.0 - p) * d ** p
        eps_list.append(eps)
        omega_d = shrink(dom, d)
        omega_e = shrink(dom, eps)
        avg = ball_average(u, d)
        gap = avg.values - u.values
        sup_gaps.append(float(gap[omega_d.mask].max()))
        l1_gaps.append(float(np.abs(gap[omega_d.mask]).sum()) * dom.cell_volume)

        supc = sup_convolution(u, d)
        ring = omega_d.mask & ~omega_e.mask
        if ring.any():
            ring_gap = float((supc.values - u.values)[ring].max())
            c_ring = ring_gap / eps ** alpha
            lemma41_constants.append(c_ring)
            lemma41_ok &= bool(ring_gap
                               <= (c1 + c2) * eps ** alpha + 10.0 * dom.h)
        else:
            lemma41_constants.append(0.0)

        c_glue = max(c1, c2, lemma41_constants[-1])
        glued = None
        for _ in range(8):
            glued = glue_competitor(u, avg, c_glue * eps ** alpha, omega_e)
            rep = is_discretely_psh(glued, settings=settings)
            if rep.ok:
                break
            c_glue *= 1.5
        else:
            glue_ok = False
            notes.append(f"gluing stayed non-PSH at delta={d:g}")
        glue_constants.append(c_glue)
        # the literal gluing identities
        outside = dom.interior & ~omega_e.mask
        if outside.any() and float(np.abs((glued.values - u.values)[outside]).max()) > 0:
            glue_ok = False
            notes.append("glued competitor differs from u outside the shrink")
        if float((u.values - glued.values)[dom.interior].max()) > 0:
            glue_ok = False
            notes.append("glued competitor dips below u")

    coupling_ok = all(d <= e < delta0 * (1 + 1e-12)
                      for d, e in zip(deltas, eps_list))

    pos = [(d, g) for d, g in zip(deltas, sup_gaps) if g > 0]
    if len(pos) >= 2:
        pf = fit_power([p_[0] for p_ in pos], [p_[1] for p_ in pos])
        raw = pf.exponent
        resid = pf.residual
    else:
        raw = 1.0
        resid = 0.0
        notes.append("flat gap ladder; exponent defaulted to 1")
    empirical = clamp_unit_exponent(raw) if raw > 0 else raw

    if len([g for g in l1_gaps if g > 0]) >= 2:
        lap = fit_power(deltas, l1_gaps).exponent
    else:
        lap = 1.0
        notes.append("flat L1 ladder; lap-est slope defaulted to 1")

    flags = {
        "solver_converged": solve.converged,
        "sandwich": bool(solve.sandwich_ok),
        "coupling": coupling_ok,
        "lemma41": lemma41_ok,
        "glue_psh": glue_ok,
        "lapest": lap >= 0.9,
        "alpha4_identity": abs(alpha4 - alpha * alpha2 * alpha3
                               / (2 * n + 1 + alpha)) == 0.0,
        "exponent_above_alpha4": empirical >= alpha4 - 0.05,
    }
    return HolderReport(
        deltas=deltas, eps=eps_list, sup_gaps=sup_gaps, l1_gaps=l1_gaps,
        alpha=alpha, alpha2=alpha2, alpha3=alpha3, alpha4=alpha4,
        coupling_exponent=p, delta0=delta0, fit_exponent_raw=raw,
        empirical_alpha=empirical, fit_residual=resid, lapest_slope=lap,
        glue_constants=glue_constants, lemma41_constants=lemma41_constants,
        flags=flags, stability=stab.fitted, l1=l1rep.fitted, notes=notes)


# ---------------------------------------------------------------------------
# the L^p right-hand-side pipeline


@dataclass
class CorollaryCReport:
    scan: InequalityReport
    holder: HolderReport
    sandwich_ok: bool
    dominated_ok: bool
    fp_integral: float
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return (self.scan.passed and self.holder.passed and self.sandwich_ok
                and self.dominated_ok)


def corollary_c_pipeline(shape_spec, resolution: int, f_spec, p: float,
                         mu_spec=None, subsolution_spec="quad",
                         enlarge: float = 1.15,
                         settings: Settings = DEFAULTS) -> CorollaryCReport:
    """Scale the domain, solve with the density-weighted measure, build the
    pluriharmonic-style correction from the outer solution's inner trace,
    check the sandwich, then run the exponent machinery for f mu."""
    from .geometry import shape_from_spec
    shape = shape_from_spec(shape_spec if isinstance(shape_spec, dict)
                            else {"shape": shape_spec})
    big_shape = type(shape)(shape.n, shape.a, shape.radius * enlarge, shape.name)
    big = GridDomain(big_shape, resolution, settings)
    # share one lattice so traces transfer node-for-node
    base = GridDomain(shape, resolution, settings,
                      box_halfwidth=big.box_halfwidth)

    phi = catalog.subsolution(base, subsolution_spec)
    mu = catalog.measure(base, mu_spec or {"kind": "ma", "of": subsolution_spec},
                         settings)
    f = catalog.density_field(base, f_spec)
    if p <= 1:
        raise ValueError("the exponent p must exceed 1")
    fp_integral = mu.weighted_sum(f.values ** p)
    if not math.isfinite(fp_integral):
        raise ValueError("density is not p-integrable on the grid")
    fmu = GridMeasure(base, mu.weights * f.values, f"{f.name}*{mu.name}")

    scan = volume_capacity_scan(fmu, catalog.kfamily(base, None), tau=1.0,
                                settings=settings)

    from .calculus import BoundaryData
    outer_prob = DirichletProblem(big, GridMeasure(big, fmu.weights.copy()),
                                  BoundaryData.zero())
    outer = solve_dirichlet(outer_prob, settings)
    v = outer.u

    corr = maximal_envelope(BoundaryData.from_grid(-v.values, "inner-trace"),
                            base, settings)
    tilde_phi = GridFunction(base, v.values + corr.values, "outer+correction")
    tilde_phi.holder_alpha = getattr(phi, "holder_alpha", 0.5)
    dom_rep = dominated_by(fmu, tilde_phi,
                           eps_dom=10.0 * base.h * max(fmu.weights.max(), 1.0),
                           settings=settings)

    psi = catalog.boundary_data(base, "zero")
    prob = DirichletProblem(base, fmu, psi, subsolution=tilde_phi)
    solve = solve_dirichlet(prob, settings)
    u = solve.u
    low = (tilde_phi.values - u.values)[base.interior].max()
    high = u.values[base.interior].max()
    sandwich_ok = bool(low <= 10.0 * base.h and high <= 10.0 * base.h)

    holder = theorem_b_pipeline(base, tilde_phi, psi, fmu, settings=settings,
                                presolved=solve)
    holder.notes.append(
        "L^p pipeline: the final exponent carries the degraded L1 factor")
    return CorollaryCReport(scan, holder, sandwich_ok, dom_rep.ok, fp_integral)


# ---------------------------------------------------------------------------
# verify dispatch (scenario-driven)


def normalize_to_unit_mass(v: GridFunction,
                           settings: Settings = DEFAULTS) -> GridFunction:
    """Scale so the grid Monge-Ampere total is exactly one."""
    total = ma_measure(v, check_psh=False, settings=settings).total()
    if total <= 0:
        raise ValueError("cannot normalize a massless field")
    out = v.with_values(v.values / total ** (1.0 / v.domain.n),
                        f"unit-mass({v.name})")
    out.holder_alpha = getattr(v, "holder_alpha", 0.5)
    return out


def run_verify(domain: GridDomain, inequality_id: str, options=None,
               seed: int = 0, settings: Settings = DEFAULTS) -> InequalityReport:
    """Run one named inequality suite with scenario options."""
    opt = dict(options or {})
    trials = int(opt.get("trials", 20))
    if inequality_id == "blocki":
        return blocki_suite(domain, trials, seed, opt.get("k"), settings)
    if inequality_id == "cegrell":
        return cegrell_suite(domain, trials, seed, settings)
    if inequality_id == "sublevel-decay":
        v = normalize_to_unit_mass(
            catalog.subsolution(domain, opt.get("v", "quad")), settings)
        phi = catalog.subsolution(domain, opt.get("phi", "quad"))
        return sublevel_decay_scan(v, phi, opt.get("s_grid"), settings)
    if inequality_id == "volume-capacity":
        phi = catalog.subsolution(domain,
                                  opt.get("phi", {"name": "holder", "alpha": 0.5}))
        mu = ma_measure(phi, settings=settings)
        fam = catalog.kfamily(domain, opt.get("k_family"))
        return volume_capacity_scan(mu, fam, float(opt.get("tau", 1.0)), settings)
    if inequality_id == "mass-est":
        v = catalog.subsolution(domain,
                                opt.get("v", {"name": "holder", "alpha": 0.5}))
        return mass_est_scan(v, int(opt.get("k", 1)), opt.get("eps_ladder"),
                             settings)
    if inequality_id in ("stability", "l1-l1"):
        phi = catalog.subsolution(domain, opt.get("phi", "quad"))
        psi = catalog.boundary_data(domain, opt.get("psi", "zero"))
        mu = catalog.measure(domain, opt.get("mu", {"kind": "ma", "of":
                                                    opt.get("phi", "quad")}),
                             settings)
        rep = solve_dirichlet(DirichletProblem(domain, mu, psi, phi), settings)
        eps = float(opt.get("eps", settings.delta0_frac * domain.inradius / 2))
        if inequality_id == "stability":
            return stability_probe(rep.u, mu, eps, settings=settings,
                                   ceiling=rep.envelope)
        alpha = effective_alpha(getattr(phi, "holder_alpha", 0.5), None)
        return l1_l1_probe(rep.u, mu, eps, phi=phi, alpha=alpha,
                           settings=settings, ceiling=rep.envelope)
    if inequality_id == "dominated":
        phi = catalog.subsolution(domain, opt.get("phi", "quad"))
        mu = catalog.measure(domain, opt.get("mu", {"kind": "ma",
                                                    "of": opt.get("phi", "quad")}),
                             settings)
        rep = dominated_by(mu, phi, settings=settings)
        excess = max(rep.worst_excess, 0.0)
        return InequalityReport(
            "dominated", "cell", [str(rep.worst_cell)], [excess],
            [rep.tolerance], passed=rep.ok,
            worst_slack=rep.tolerance - excess,
            fitted={"worst_excess": rep.worst_excess})
    raise ValueError(f"unknown inequality id {inequality_id!r}")


VERIFY_IDS = ("blocki", "cegrell", "sublevel-decay", "volume-capacity",
              "mass-est", "stability", "l1-l1", "dominated")
