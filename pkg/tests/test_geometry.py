import numpy as np
import pytest

from cmalab import build_domain, hopf_constant, rho_sublevel, shrink
from cmalab.geometry import (DomainError, EmptyInteriorError,
                             PSDViolationError, shape_from_spec)

from conftest import radius


def test_disc_interior_count_matches_area(disc64):
    # interior ~ pi / h^2 nodes
    assert abs(disc64.interior.sum() * disc64.h ** 2 - np.pi) < 0.2


def test_disc_collar_gradient_detected(disc64):
    assert disc64.gradient_floor > 1.0


def test_ball_psd_margin_exact(ball16):
    assert abs(ball16.psd_margin) < 1e-9


def test_ellipsoid_hessian_eigenvalues():
    dom = build_domain({"shape": "ellipsoid", "a": [1.0, 2.0]}, 16)
    from cmalab.stencils import complex_hessian
    lo, hi = complex_hessian(dom.rho_values, 2, dom.h).eigenvalues()
    assert np.allclose(lo[dom.interior], 1.0, atol=1e-8)
    assert np.allclose(hi[dom.interior], 2.0, atol=1e-8)
    assert abs(dom.psd_margin) < 1e-8


def test_bad_catalog_entry_rejected():
    with pytest.raises(PSDViolationError):
        build_domain({"shape": "ellipsoid", "a": [0.5, 1.0]}, 16)


def test_tiny_domain_has_empty_interior():
    # a sub-cell domain inside a prescribed box catches no nodes
    with pytest.raises((EmptyInteriorError, DomainError)):
        build_domain({"shape": "disc", "radius": 1e-4}, 16, box_halfwidth=1.1)


def test_resolution_floor():
    with pytest.raises(DomainError):
        build_domain({"shape": "disc"}, 8)


def test_shrink_disc_closed_form(disc64):
    mask = shrink(disc64, 0.25)
    r = radius(disc64)
    inside = disc64.interior & (r < 0.75 - disc64.h)
    outside = disc64.interior & (r > 0.75 + disc64.h)
    assert mask.mask[inside].all()
    assert not mask.mask[outside].any()


def test_shrink_zero_is_identity(disc64):
    assert shrink(disc64, 0.0).count == int(disc64.interior.sum())


def test_shrink_monotone(disc64):
    small, big = shrink(disc64, 0.3), shrink(disc64, 0.1)
    assert small.is_subset_of(big)
    assert small.count < big.count


def test_shrink_ball_volume_ratio(ball20):
    frac = shrink(ball20, 0.1).count / ball20.interior.sum()
    assert abs(frac - 0.9 ** 4) < 0.08


def test_shrink_empty_warns(disc64):
    with pytest.warns(UserWarning):
        shrink(disc64, 1.5)


def test_rho_sublevel_closed_form(disc64):
    mask = rho_sublevel(disc64, 0.19)
    r = radius(disc64)
    assert mask.mask[disc64.interior & (r < 0.9 - disc64.h)].all()
    assert not mask.mask[r > 0.9 + disc64.h].any()


def test_rho_sublevel_vacuous(disc64):
    with pytest.warns(UserWarning):
        assert rho_sublevel(disc64, 2.0).count == 0


def test_rho_sublevel_monotone(disc64):
    assert rho_sublevel(disc64, 0.3).is_subset_of(rho_sublevel(disc64, 0.1))


def test_hopf_constant_disc(disc64):
    # (1 - |z|^2) / (1 - |z|) = 1 + |z| >= 1
    assert abs(hopf_constant(disc64) - 1.0) < 5e-3


def test_hopf_constant_ellipsoid():
    dom = build_domain({"shape": "ellipsoid", "a": [1.0, 1.5]}, 16)
    c0 = hopf_constant(dom)
    assert 0 < c0 <= 1.0


def test_hopf_scaling_caps_at_one():
    dom = build_domain({"shape": "disc"}, 48)
    c0 = hopf_constant(dom)
    ratio = -2.0 * dom.rho_values[dom.interior]
    dist = dom.boundary_distance[dom.interior]
    keep = dist > 0
    scaled = min(1.0, float((ratio[keep] / dist[keep]).min()))
    assert scaled == 1.0  # doubling rho doubles the ratio, capped at 1
    assert c0 <= 1.0


def test_inclusion_shrink_inside_sublevel(disc64):
    # dist > eps forces rho < -c0 eps, as a mask inclusion
    c0 = hopf_constant(disc64)
    for eps in (0.05, 0.1, 0.2):
        assert shrink(disc64, eps).is_subset_of(rho_sublevel(disc64, c0 * eps))


def test_inclusion_on_ellipsoid():
    dom = build_domain({"shape": "ellipsoid", "a": [1.0, 2.0]}, 16)
    c0 = hopf_constant(dom)
    assert shrink(dom, 0.1).is_subset_of(rho_sublevel(dom, c0 * 0.1))


def test_shape_catalog_roundtrip():
    s = shape_from_spec({"shape": "ellipsoid", "a": [1.0, 3.0], "radius": 2.0})
    assert s.n == 2 and s.max_semiaxis() == 2.0


def test_crossings_lie_on_boundary(disc64):
    r = np.sqrt((disc64.crossings ** 2).sum(axis=1))
    assert np.abs(r - 1.0).max() < 1e-10  # quadratic roots are exact
