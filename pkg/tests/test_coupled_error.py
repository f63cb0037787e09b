import numpy as np
import pytest

from emlab.coupled_error import MAX_OF_MEANS, MEAN_OF_MAX, ConfigError, estimate_error_curve
from emlab.drifts import builtin

SMALL = dict(levels=[8, 16, 32], M=200, n_ref=512)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_exact_drifts_give_zero_error(d):
    for drift in (builtin("zero", d), builtin("constant", d, c=[0.3, -1.7, 2.5][:d])):
        curve = estimate_error_curve(drift, x0=[0.1] * d, **SMALL)
        assert curve.exact
        assert curve.mse == [0.0] * 3 and curve.mse_max_of_means == [0.0] * 3
        assert curve.reference_kind.startswith("exact")


def test_initial_offset_oracle():
    # zero drift: X^n - X = x0n - x0 on every path, so the error is n^(-1 + eps)
    curve = estimate_error_curve(builtin("zero"), epsilon_offset=0.2, **SMALL)
    for n, v in zip(curve.levels, curve.mse):
        assert v == pytest.approx(n ** -0.8, rel=1e-12)
    assert not curve.exact


def test_validation_lists_every_problem():
    with pytest.raises(ConfigError) as exc:
        estimate_error_curve(builtin("sign", 2), [32, 16, 48], M=10, n_ref=1000)
    msg = str(exc.value)
    for part in ("M = 10", "not strictly increasing", "power of two", "dimension 1"):
        assert part in msg
    with pytest.raises(ConfigError, match="16 x largest level"):
        estimate_error_curve(builtin("sign"), [8, 16, 64], M=100, n_ref=512)


def test_estimator_ordering_and_worker_invariance():
    kw = dict(drift=builtin("sign"), levels=[8, 16, 32], M=300, n_ref=512, batch_size=64, seed=3)
    a = estimate_error_curve(workers=1, **kw)
    b = estimate_error_curve(workers=3, **kw)
    assert a.to_dict() == b.to_dict()
    for mom, mxm in zip(a.mse, a.mse_max_of_means):
        assert mom >= mxm * (1 - 1e-12)
    assert len(a.mse_per_checkpoint) == 3 and len(a.mse_per_checkpoint[0]) == 9
    assert a.mse_per_checkpoint[0][0] == 0.0


def test_lipschitz_refinement_halves_rms_error():
    curve = estimate_error_curve(builtin("sin"), [16, 32, 64], M=2000, n_ref=1024, x0=0.3)
    rms = np.sqrt(curve.mse)
    assert 1.6 < rms[0] / rms[1] < 2.5
    assert 1.6 < rms[1] / rms[2] < 2.5


def test_independent_seeds_agree_within_ci():
    kw = dict(drift=builtin("sign"), levels=[16, 32], M=2000, n_ref=512)
    a = estimate_error_curve(seed=10, **kw)
    b = estimate_error_curve(seed=11, **kw)
    for va, vb, ca, cb in zip(a.mse, b.mse, a.ci_half_width, b.ci_half_width):
        assert abs(va - vb) <= 2.5 * np.hypot(ca, cb)


def test_csv(tmp_path):
    curve = estimate_error_curve(builtin("sign"), [8, 16, 32], M=100, n_ref=512)
    curve.write_csv(tmp_path / "e.csv")
    rows = (tmp_path / "e.csv").read_text().splitlines()
    assert rows[0] == "n,mse,ci,estimator_variant"
    assert len(rows) == 7
    assert rows[1].endswith(MEAN_OF_MAX) and rows[-1].endswith(MAX_OF_MEANS)
    assert float(rows[1].split(",")[1]) == curve.mse[0]
