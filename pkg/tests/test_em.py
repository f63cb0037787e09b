import numpy as np
import pytest

from emlab.drifts import builtin
from emlab.em import (EXACT_CONSTANT, EXACT_ZERO, FINE_EM, ReferenceError, checkpoint_indices, continuous_values,
                      default_checkpoints, em_batch, perturbed_initial, reference_kind_for, simulate_em,
                      simulate_reference, write_path_csv)
from emlab.rng_paths import GridError, PathSeed, generate_batch, generate_tableau


def test_sign_recursion_unrolled_n4():
    tab = generate_tableau(PathSeed(5, 0), 1, 64, 1.0)
    W = tab.path[::16, 0]
    x0 = 0.3
    sgn = lambda v: float(v > 0) - float(v < 0)
    s, xs = 0, [x0 + 0.0 + W[0]]
    for k in range(4):
        s += sgn(xs[-1])
        xs.append((x0 + s / 4) + W[k + 1])
    path = simulate_em(builtin("sign"), tab, 4, x0)
    assert np.array_equal(path.states[:, 0], xs)


def test_matches_incremental_form_for_lipschitz_drift():
    tab = generate_tableau(PathSeed(0, 9), 2, 1024, 1.0)
    b = builtin("sin", 2)
    n = 128
    W = tab.path[::8]
    x = np.array([0.1, -0.4])
    for k in range(n):
        x = x + np.sin(x) / n + (W[k + 1] - W[k])
    path = simulate_em(b, tab, n, [0.1, -0.4])
    np.testing.assert_allclose(path.states[-1], x, atol=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_zero_and_constant_drift_are_exact(d):
    tab = generate_tableau(PathSeed(1, d), d, 256, 1.0)
    x0 = np.arange(d) * 0.7 - 0.2
    for drift in (builtin("zero", d), builtin("constant", d, c=[0.3, -1.7, 2.5][:d])):
        ref = simulate_reference(drift, tab, 256, x0)
        for n in (4, 32, 256):
            path = simulate_em(drift, tab, n, x0)
            assert np.array_equal(path.states, ref.states[:: 256 // n])


def test_continuous_extension_hits_grid_values():
    tab = generate_tableau(PathSeed(3, 3), 1, 256, 1.0)
    b = builtin("sign")
    path = simulate_em(b, tab, 16, 0.0)
    ext = continuous_values(b, path, tab)
    np.testing.assert_allclose(ext[::16], path.states, atol=1e-15)
    # linear drift part between grid points
    k = 5
    t = np.arange(16) / 256
    expect = path.states[k] + b(path.states[k][None])[0] * t[:, None] + (tab.path[80:96] - tab.path[80])
    np.testing.assert_allclose(ext[80:96], expect, atol=1e-14)


def test_zero_drift_extension_is_brownian():
    tab = generate_tableau(PathSeed(3, 4), 1, 64, 1.0)
    b = builtin("zero")
    path = simulate_em(b, tab, 8, 1.5)
    assert np.array_equal(continuous_values(b, path, tab), 1.5 + 0.0 + tab.path)


def test_reference_kinds():
    assert reference_kind_for(builtin("zero")) == EXACT_ZERO
    assert reference_kind_for(builtin("constant")) == EXACT_CONSTANT
    assert reference_kind_for(builtin("sign")) == FINE_EM
    tab = generate_tableau(PathSeed(0, 0), 1, 256, 1.0)
    with pytest.raises(ReferenceError):
        simulate_reference(builtin("sign"), tab, 256, 0.0, max_tested_n=32)
    with pytest.raises(ReferenceError):
        simulate_reference(builtin("sign"), tab, 256, 0.0, kind=EXACT_ZERO)
    ref = simulate_reference(builtin("sign"), tab, 256, 0.0, max_tested_n=16)
    assert ref.kind == FINE_EM and ref.level == 256


def test_fine_reference_self_convergence_for_sin():
    # strong order one for additive noise: halving the step quarters the mean-square gap
    W = generate_batch(4, range(2000), 1, 2048, 1.0)
    b = builtin("sin")
    X = {n: em_batch(b, W, 2048, n, 0.5)[-1, :, 0] for n in (32, 64, 128, 2048)}
    e = [np.mean((X[n] - X[2048]) ** 2) for n in (32, 64, 128)]
    assert 3.0 < e[0] / e[1] < 5.0
    assert 3.0 < e[1] / e[2] < 5.5


def test_checkpoints():
    cps = default_checkpoints(1.0)
    assert cps[0] == 0.0 and cps[-1] == 1.0 and len(cps) == 9
    assert np.array_equal(checkpoint_indices(cps, 16, 1.0), np.arange(9) * 2)
    with pytest.raises(GridError):
        checkpoint_indices(cps, 4, 1.0)


def test_perturbed_initial():
    x = perturbed_initial([1.0, 2.0], 64, 0.2)
    assert x[1] == 2.0
    assert (x[0] - 1.0) ** 2 == pytest.approx(64.0 ** (-0.8))


def test_level_must_divide(tmp_path):
    tab = generate_tableau(PathSeed(0, 0), 1, 64, 1.0)
    with pytest.raises(GridError):
        simulate_em(builtin("sin"), tab, 48, 0.0)
    path = simulate_em(builtin("sin"), tab, 8, 0.0)
    write_path_csv(path, tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "t,X1" and len(lines) == 10
