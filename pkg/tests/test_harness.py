import json

import pytest

from emlab import __version__, harness
from emlab.cli import main


def write(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def strip_clock(text):
    return "\n".join(l for l in text.splitlines() if harness.WALL_CLOCK_KEY not in l)


SIGN = {"kind": "error_curve", "drift": "sign", "levels": [8, 16, 32, 64], "M": 300, "n_ref": 1024,
        "batch_size": 100}


def test_zero_drift_run(tmp_path):
    cfg = write(tmp_path, "z.json", {"kind": "error_curve", "drift": "zero", "levels": [8, 16, 32], "M": 100,
                                     "n_ref": 256})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "out")]) == 0
    res = json.loads((tmp_path / "out" / "results.json").read_text())
    assert res["results"]["curve"]["exact"] is True
    assert res["results"]["curve"]["mse"] == [0.0, 0.0, 0.0]
    assert res["results"]["fit"] is None
    assert res["schema_version"] == harness.SCHEMA_VERSION and res["package_version"] == __version__
    # every default is echoed
    assert set(harness.DEFAULTS["error_curve"]) <= set(res["config"])
    assert res["config"]["checkpoints"] == [j / 8 for j in range(9)]
    assert (tmp_path / "out" / "error_curve.csv").exists()


def test_reruns_and_worker_counts_are_byte_identical(tmp_path):
    cfg = write(tmp_path, "s.json", SIGN)
    texts = []
    for i, w in enumerate([1, 1, 3]):
        out = tmp_path / f"o{i}"
        assert main(["run", "--config", cfg, "--out", str(out), "--workers", str(w)]) == 0
        texts.append(strip_clock((out / "results.json").read_text()))
    assert texts[0] == texts[1] == texts[2]
    assert '"fit": {' in texts[0]


def test_seed_override(tmp_path):
    cfg = write(tmp_path, "s.json", SIGN)
    main(["run", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "0xffffffffffffffff"])
    a = json.loads((tmp_path / "a" / "results.json").read_text())
    b = json.loads((tmp_path / "b" / "results.json").read_text())
    assert b["config"]["seed"] == 2**64 - 1 and b["seed_ledger"]["experiment_seed"] == 2**64 - 1
    assert a["results"]["curve"]["mse"] != b["results"]["curve"]["mse"]


def test_validation_reports_everything(tmp_path, capsys):
    cfg = write(tmp_path, "bad.json", {"kind": "error_curve", "drift": "nope", "M": 5, "levels": [3, 8],
                                       "n_ref": 100, "bogus": 1})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "x")]) == harness.EXIT_VALIDATION
    err = capsys.readouterr().err
    for part in ("bogus", "unknown drift", "M = 5", "power of two"):
        assert part in err
    assert not (tmp_path / "x").exists()
    cfg = write(tmp_path, "kind.json", {"kind": "weather"})
    assert main(["run", "--config", cfg]) == harness.EXIT_VALIDATION
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == harness.EXIT_VALIDATION


def test_numerical_assertion_exit_code(tmp_path):
    cfg = write(tmp_path, "s.json", {**SIGN, "assert_slope": [5.0, 6.0]})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == harness.EXIT_ASSERTION
    res = json.loads((tmp_path / "o" / "results.json").read_text())
    assert res["checks"] == {"slope_in_bracket": False}
    cfg = write(tmp_path, "pde.json", {"kind": "pde", "drift": "constant", "drift_params": {"c": 5.0},
                                       "N": 256, "L": 12.0, "K": 8, "T0": 1.0})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "p")]) == harness.EXIT_ASSERTION


def test_reproduce(tmp_path, capsys):
    cfg = write(tmp_path, "s.json", SIGN)
    out = tmp_path / "o"
    main(["run", "--config", cfg, "--out", str(out)])
    path = out / "results.json"
    assert harness.reproduce(path) == {"verdict": "identical", "mismatches": []}
    assert main(["reproduce", str(path), "--workers", "2"]) == 0

    data = json.loads(path.read_text())
    data["results"]["curve"]["mse"][2] *= 1 + 1e-12
    path.write_text(json.dumps(data))
    verdict = harness.reproduce(path)
    assert verdict["verdict"] == "mismatch" and verdict["mismatches"] == ["results.curve.mse[2]"]

    data["package_version"] = "0.0.0"
    path.write_text(json.dumps(data))
    verdict = harness.reproduce(path)
    assert verdict["verdict"] == "version_mismatch" and "0.0.0" in verdict["detail"]
    assert main(["reproduce", str(path)]) == harness.EXIT_ASSERTION


@pytest.mark.parametrize("cfg, tables", [
    ({"kind": "quadrature_w", "M": 200, "levels": [4, 8, 16, 32]}, ["quadrature.csv"]),
    ({"kind": "quadrature_em", "M": 200, "levels": [4, 8, 16, 32]}, ["quadrature.csv"]),
    ({"kind": "zvonkin", "martingale_M": 2000, "martingale_n": 256}, ["scale_table.csv"]),
    ({"kind": "kernel_blowup", "N": 1024}, ["kernel_blowup.csv"]),
    ({"kind": "pde", "N": 512, "K": 16, "T0": 0.5}, ["gradient_scaling.csv", "pde_field.csv"]),
])
def test_other_kinds(tmp_path, cfg, tables):
    out = tmp_path / "o"
    outcome = harness.run(harness.ExperimentConfig.from_dict(cfg, out=str(out)))
    assert outcome.exit_code == 0, outcome.errors
    for name in tables:
        assert (out / name).read_text().count("\n") > 2
    res = json.loads((out / "results.json").read_text())
    assert all(res["checks"].values())


def test_listings(capsys):
    assert main(["list-drifts"]) == 0
    out = capsys.readouterr().out
    assert "sign" in out and "dini_log" in out
    assert main(["list-functionals"]) == 0
    assert "sign_sin" in capsys.readouterr().out
