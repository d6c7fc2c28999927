"""Batch front-end: scenario configs in, reports and plots out.

Verbs: solve, capacity, verify <id>, theorem-b, corollary-c, regress.
Exit codes: 0 all selected checks passed, 2 config error, 3 solver
non-convergence, 4 inequality/check failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

from . import catalog, lab, reporting
from .capacity import capacity as compute_capacity
from .geometry import DomainError, build_domain
from .lab import VERIFY_IDS
from .settings import DEFAULTS, Settings
from .solver import DirichletProblem, NonConvergenceError, solve_dirichlet

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_FAILED = 4


class ConfigError(ValueError):
    pass


@dataclass
class Scenario:
    name: str
    pipeline: str
    domain: dict = field(default_factory=lambda: {"shape": "disc"})
    resolution: int = 64
    subsolution: object = "quad"
    boundary: object = "zero"
    measure: dict | None = None
    density: object = "one"
    p: float = 2.0
    inequality: str | None = None
    options: dict = field(default_factory=dict)
    compact: dict | None = None
    seed: int = 0
    overrides: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        pipeline = raw.get("pipeline")
        if pipeline is None:
            raise ConfigError("scenario needs a pipeline")
        scn = cls(name=raw.get("name", "scenario"), pipeline=pipeline)
        for key, val in raw.items():
            setattr(scn, key, val)
        if scn.pipeline.startswith("verify:"):
            scn.inequality = scn.pipeline.split(":", 1)[1]
            scn.pipeline = "verify"
        if scn.pipeline == "verify" and scn.inequality not in VERIFY_IDS:
            raise ConfigError(f"unknown inequality id {scn.inequality!r}; "
                              f"known: {', '.join(VERIFY_IDS)}")
        if scn.pipeline not in ("solve", "capacity", "verify", "theorem-b",
                                "corollary-c"):
            raise ConfigError(f"unknown pipeline {scn.pipeline!r}")
        return scn

    def settings(self) -> Settings:
        try:
            return DEFAULTS.with_overrides(**self.overrides)
        except TypeError as exc:
            raise ConfigError(f"bad settings override: {exc}") from None


def load_scenario(path: str) -> Scenario:
    with open(path) as f:
        text = f.read()
    raw = json.loads(text)  # JSONDecodeError carries line/column
    return Scenario.from_dict(raw)


def _summary_base(scn: Scenario, settings: Settings) -> dict:
    return {
        "scenario": {
            "name": scn.name, "pipeline": scn.pipeline,
            "domain": scn.domain, "resolution": scn.resolution,
            "subsolution": scn.subsolution, "boundary": scn.boundary,
            "measure": scn.measure, "seed": scn.seed,
            "inequality": scn.inequality, "options": scn.options,
        },
        "defaults": settings.as_dict(),
    }


def run_scenario(scn: Scenario, outdir: str, formats=("csv", "svg", "json")) -> int:
    settings = scn.settings()
    outdir = os.path.join(outdir, scn.name)
    os.makedirs(outdir, exist_ok=True)
    summary = _summary_base(scn, settings)

    domain = build_domain(scn.domain, scn.resolution, settings)
    summary["domain"] = domain.describe()
    code = EXIT_OK

    if scn.pipeline == "solve":
        phi = catalog.subsolution(domain, scn.subsolution)
        psi = catalog.boundary_data(domain, scn.boundary)
        mu = catalog.measure(domain, scn.measure or
                             {"kind": "ma", "of": scn.subsolution}, settings)
        try:
            rep = solve_dirichlet(DirichletProblem(domain, mu, psi, phi),
                                  settings)
        except NonConvergenceError as exc:
            summary["error"] = str(exc)
            reporting.write_json(os.path.join(outdir, "summary.json"), summary)
            return EXIT_SOLVER
        reporting.write_solution_dump(os.path.join(outdir, "solution"), rep.u)
        summary["results"] = {
            "iterations": rep.iterations,
            "residual_total": rep.residual_total,
            "residual_max": rep.residual_max,
            "residual_ok": rep.residual_ok,
            "sandwich_ok": rep.sandwich_ok,
            "sandwich_slack": rep.sandwich_slack,
        }
        if rep.sandwich_ok is False:
            code = EXIT_FAILED

    elif scn.pipeline == "capacity":
        spec = scn.compact or {"kind": "ball", "r": [0.2, 0.3, 0.4, 0.5]}
        fam = catalog.kfamily(domain, spec)
        rows = []
        values = {}
        for K in fam:
            res = compute_capacity(K, domain, settings)
            if not res.converged:
                summary["error"] = "capacity sweep did not converge"
                reporting.write_json(os.path.join(outdir, "summary.json"),
                                     summary)
                return EXIT_SOLVER
            label = K.params.get("r", K.kind)
            rows.append((label, res.value, res.residual,
                         1.0 if res.obstacle_ok else 0.0))
            values[str(label)] = res.value
        reporting.write_csv(os.path.join(outdir, "capacity.csv"),
                            ("parameter", "capacity", "residual",
                             "obstacle_ok"), rows)
        summary["results"] = {"capacities": values}

    elif scn.pipeline == "verify":
        rep = lab.run_verify(domain, scn.inequality, scn.options, scn.seed,
                             settings)
        reporting.emit_report(rep, outdir, scn.inequality, formats)
        summary["results"] = reporting._report_payload(rep)
        if not rep.passed:
            code = EXIT_FAILED

    elif scn.pipeline == "theorem-b":
        phi = catalog.subsolution(domain, scn.subsolution)
        psi = catalog.boundary_data(domain, scn.boundary)
        mu = catalog.measure(domain, scn.measure or
                             {"kind": "ma", "of": scn.subsolution}, settings)
        try:
            rep = lab.theorem_b_pipeline(domain, phi, psi, mu,
                                         settings=settings)
        except NonConvergenceError as exc:
            summary["error"] = str(exc)
            reporting.write_json(os.path.join(outdir, "summary.json"), summary)
            return EXIT_SOLVER
        reporting.emit_report(rep, outdir, "holder", formats)
        summary["results"] = reporting._report_payload(rep)
        if not rep.passed:
            code = EXIT_FAILED

    elif scn.pipeline == "corollary-c":
        try:
            rep = lab.corollary_c_pipeline(
                scn.domain, scn.resolution, scn.density, scn.p,
                mu_spec=scn.measure, subsolution_spec=scn.subsolution,
                settings=settings)
        except NonConvergenceError as exc:
            summary["error"] = str(exc)
            reporting.write_json(os.path.join(outdir, "summary.json"), summary)
            return EXIT_SOLVER
        reporting.emit_report(rep.scan, outdir, "volume-capacity", formats)
        reporting.emit_report(rep.holder, outdir, "holder", formats)
        summary["results"] = {
            "scan": reporting._report_payload(rep.scan),
            "holder": reporting._report_payload(rep.holder),
            "sandwich_ok": rep.sandwich_ok,
            "dominated_ok": rep.dominated_ok,
            "fp_integral": rep.fp_integral,
            "passed": rep.passed,
        }
        if not rep.passed:
            code = EXIT_FAILED

    summary["exit_code"] = code
    reporting.write_json(os.path.join(outdir, "summary.json"), summary)
    return code


# ---------------------------------------------------------------------------
# golden regression suite


GOLDEN_SUITE = [
    {"name": "golden-solve-disc", "pipeline": "solve", "resolution": 48,
     "domain": {"shape": "disc"}, "subsolution": "quad", "boundary": "zero",
     "seed": 11},
    {"name": "golden-capacity-disc", "pipeline": "capacity", "resolution": 48,
     "domain": {"shape": "disc"},
     "compact": {"kind": "ball", "r": [0.3, 0.5]}, "seed": 11},
    {"name": "golden-blocki", "pipeline": "verify:blocki", "resolution": 32,
     "domain": {"shape": "disc"}, "options": {"trials": 8}, "seed": 11},
    {"name": "golden-cegrell-ball", "pipeline": "verify:cegrell",
     "resolution": 16, "domain": {"shape": "ball"},
     "options": {"trials": 6}, "seed": 11},
    {"name": "golden-masses", "pipeline": "verify:mass-est", "resolution": 64,
     "domain": {"shape": "disc"},
     "options": {"v": {"name": "holder", "alpha": 0.5}}, "seed": 11},
]


def run_regress(outdir: str, check_manifest: str | None = None,
                formats=("csv", "json")) -> int:
    worst = EXIT_OK
    files = {}
    for raw in GOLDEN_SUITE:
        scn = Scenario.from_dict(dict(raw))
        code = run_scenario(scn, outdir, formats)
        worst = max(worst, code)
    for root, _dirs, names in os.walk(outdir):
        for name in sorted(names):
            if name.endswith((".csv", ".json")) and name != "manifest.json":
                path = os.path.join(root, name)
                rel = os.path.relpath(path, outdir)
                files[rel] = reporting.sha256_file(path)
    manifest = os.path.join(outdir, "manifest.json")
    reporting.write_json(manifest, {"files": files})
    if check_manifest:
        with open(check_manifest) as f:
            golden = json.load(f)["files"]
        if golden != json.load(open(manifest))["files"]:
            print("regress: manifest mismatch against golden data",
                  file=sys.stderr)
            return EXIT_FAILED
    return worst


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p):
    p.add_argument("--config", help="scenario JSON path")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--resolution", type=int, help="override nodes per axis")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--format", default="csv,svg,json",
                   help="comma-separated subset of csv,svg,json")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="cmalab",
        description="Discrete Monge-Ampere laboratory: solve, measure "
                    "capacities, and verify the regularity estimates.")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("solve", "capacity", "theorem-b", "corollary-c"):
        _add_common(sub.add_parser(verb))
    vp = sub.add_parser("verify")
    vp.add_argument("inequality", choices=list(VERIFY_IDS))
    _add_common(vp)
    rp = sub.add_parser("regress", help="run the golden suite")
    rp.add_argument("--out", default="out-regress")
    rp.add_argument("--check", help="golden manifest to compare against")
    return ap


def _scenario_from_args(args) -> Scenario:
    if args.config:
        scn = load_scenario(args.config)
        if args.verb == "verify":
            if scn.pipeline != "verify" or scn.inequality != args.inequality:
                raise ConfigError("config pipeline does not match the verb")
        elif scn.pipeline != args.verb:
            raise ConfigError(f"config pipeline {scn.pipeline!r} does not "
                              f"match the verb {args.verb!r}")
    else:
        raw = {"name": f"{args.verb}-default", "pipeline": args.verb}
        if args.verb == "verify":
            raw["pipeline"] = f"verify:{args.inequality}"
        scn = Scenario.from_dict(raw)
    if args.resolution:
        scn.resolution = args.resolution
    if args.seed is not None:
        scn.seed = args.seed
    return scn


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "regress":
        return run_regress(args.out, args.check)
    try:
        scn = _scenario_from_args(args)
    except json.JSONDecodeError as exc:
        print(f"config parse error: {exc.msg} at line {exc.lineno} "
              f"column {exc.colno}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, FileNotFoundError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    formats = tuple(s for s in args.format.split(",") if s)
    try:
        return run_scenario(scn, args.out, formats)
    except NonConvergenceError as exc:
        print(f"solver failed to converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, DomainError, catalog.CatalogError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
