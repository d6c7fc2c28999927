"""Numeric defaults shared across the package.

Every report echoes the settings block it ran under, so fitted constants
can be reproduced from the output files alone.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, replace


@dataclass(frozen=True)
class Settings:
    version: str = "1"
    # geometry
    psd_tol: float = 1e-10            # slack for the dd^c rho >= beta check
    margin_frac: float = 0.1          # bounding-box margin relative to the largest semiaxis
    # discrete PSH tolerance: smallest Hessian eigenvalue >= -psh_tol_factor * h
    psh_tol_factor: float = 10.0
    # measure comparison slack (relative to the largest cell weight)
    dom_rel_tol: float = 1e-8
    # E0' membership
    e0_mass_tol: float = 1e-6
    # relaxation engine
    extremal_tol: float = 1e-8        # sup-change stop for obstacle sweeps
    solver_tol: float = 1e-9          # sup-change stop for Dirichlet sweeps
    max_sweeps_per_axis: int = 100_000
    omega: float | None = None        # None -> per-problem heuristic
    tol_ma_factor: float = 1e-6       # residual acceptance: factor * mean cell mass
    # lab ladders
    delta0_frac: float = 0.2          # delta0 = delta0_frac * inradius
    ladder_points: int = 5
    min_delta_cells: float = 4.0      # keep delta >= min_delta_cells * h
    probe_points: int = 6
    # Hoelder seminorm sampling
    seminorm_near_frac: float = 0.25  # exact pairs up to this fraction of the diameter
    # mollifier
    kernel: str = "bump"

    def as_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **kw) -> "Settings":
        return replace(self, **kw)


DEFAULTS = Settings()


def thread_count() -> int:
    """Parallelism cap from MA_LAB_THREADS (defaults to 1)."""
    raw = os.environ.get("MA_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
