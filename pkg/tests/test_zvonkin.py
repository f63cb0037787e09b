import math

import numpy as np
import pytest

from emlab.drifts import builtin
from emlab.zvonkin import (build_scale_table, crude_bound, transformed_driftlessness_check, verify_lipschitz_bounds,
                           verify_ode_residual)

ROUGH = [("sign", {}), ("step_grid", {}), ("holder", {"alpha": 0.25}), ("dini_log", {}), ("sin", {})]


@pytest.mark.parametrize("c", [1.0, -0.5, 0.25])
def test_constant_drift_closed_form(c):
    # z = 0, |x| <= 2: phi(x) = (1 - exp(-2 c x)) / (2 c)
    t = build_scale_table(builtin("constant", c=c))
    win = np.abs(t.grid) <= 2
    exact = (1 - np.exp(-2 * c * t.grid[win])) / (2 * c)
    assert np.max(np.abs(t.phi[win] - exact)) < 1e-10
    np.testing.assert_allclose(t.phi_prime[win], np.exp(-2 * c * t.grid[win]), rtol=1e-11)


def test_zero_drift_is_identity():
    t = build_scale_table(builtin("zero"), z=0.7)
    np.testing.assert_allclose(t.phi, t.grid, atol=1e-12)
    assert np.all(t.phi_prime == 1.0)


def test_base_point_is_zero():
    for z in (0.0, 1.3, -2.5):
        t = build_scale_table(builtin("sign"), z=z, R=3.0)
        assert abs(t.phi_at(np.array(0.0))) < 1e-12


@pytest.mark.parametrize("name, params", ROUGH)
def test_inverse_identity(name, params):
    t = build_scale_table(builtin(name, **params), z=0.3)
    assert np.max(np.abs(t.psi_at(t.phi) - t.grid)) <= 1e-10
    assert np.max(np.abs(t.phi_at(t.psi) - t.y_grid)) <= 1e-10


@pytest.mark.parametrize("name, params", ROUGH + [("constant", {"c": 1.0})])
def test_ode_residual_and_bounds(name, params):
    b = builtin(name, **params)
    t = build_scale_table(b)
    # b'' blows up at the cusp of the Hoelder and Dini drifts, and both kink at |x| = 1,
    # so the h^2 tolerance is checked at distance 0.1 from those points
    cusps = {"holder": [-1.0, 0.0, 1.0], "dini_log": [-1.0, 0.0, 1.0]}
    res = verify_ode_residual(t, b, discontinuities=cusps.get(name), radius=0.1 if name in cusps else None)
    assert res.passed and res.checked_points > 3000
    if name in cusps:
        near = verify_ode_residual(t, b, discontinuities=cusps[name])
        assert not near.passed
    assert res.tolerance == pytest.approx(10 * 1e-6 * (1 + b.sup_bound) ** 3)
    bounds = verify_lipschitz_bounds(t, b)
    assert bounds.passed
    assert max(bounds.suprema()) <= crude_bound(b.sup_bound)


def test_sharp_window_constants():
    # b = 1: phi' = exp(-2 clip(x, -2, 2)) peaks at e^4; sign drift gives psi' up to e^4
    t = build_scale_table(builtin("constant", c=1.0))
    assert verify_lipschitz_bounds(t, builtin("constant", c=1.0)).sup_phi_prime == pytest.approx(math.e**4)
    ts = build_scale_table(builtin("sign"))
    assert verify_lipschitz_bounds(ts, builtin("sign")).sup_psi_prime == pytest.approx(math.e**4, rel=1e-9)


def test_jump_points_are_excluded():
    b = builtin("sign")
    t = build_scale_table(b)
    rep = verify_ode_residual(t, b)
    assert rep.excluded_points >= 2
    forced = verify_ode_residual(t, b, discontinuities=[])
    assert forced.max_residual > rep.max_residual


def test_driftlessness_and_negative_control():
    b = builtin("sign")
    ok = transformed_driftlessness_check(b, n=1024, M=20_000, z=0.2)
    assert ok.passed and ok.path_count == 20_000
    # the identity scale function does not remove a constant drift
    wrong = transformed_driftlessness_check(builtin("constant", c=1.0), n=1024, M=20_000,
                                            table=build_scale_table(builtin("zero")))
    assert not wrong.passed and wrong.z_score > 20


def test_rejects_multidimensional_drift_and_writes_csv(tmp_path):
    with pytest.raises(ValueError):
        build_scale_table(builtin("sin", 2))
    t = build_scale_table(builtin("sin"), R=1.0, h=1e-2)
    t.write_csv(tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "x,phi,phi_prime,psi" and len(rows) == 202
