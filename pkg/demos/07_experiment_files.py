"""Experiments as files: run a config, inspect results.json, replay it.

The same flow is available from the shell:

    emlab run --config configs/a3_sign.json --out results/a3 --workers 4
    emlab reproduce results/a3/results.json
"""
import json
import tempfile
from pathlib import Path

from emlab import harness

out = Path(tempfile.mkdtemp(prefix="emlab-demo-"))
cfg = harness.ExperimentConfig.from_dict(
    {"kind": "error_curve", "drift": "step_grid", "levels": [16, 32, 64, 128], "M": 1000, "n_ref": 4096},
    seed=99, out=str(out))
outcome = harness.run(cfg)
print("exit code", outcome.exit_code, "->", sorted(p.name for p in out.iterdir()))

res = json.loads((out / "results.json").read_text())
print("echoed config keys:", ", ".join(sorted(res["config"])))
print("seed ledger:", res["seed_ledger"])
print("slope:", res["results"]["fit"]["slope"])
print((out / "error_curve.csv").read_text())

print("replay:", harness.reproduce(out / "results.json", workers=2))

# Validation collects every problem before anything runs
bad = harness.ExperimentConfig.from_dict({"kind": "error_curve", "drift": "sign", "dimension": 2,
                                          "levels": [10, 20], "M": 50, "n_ref": 1000})
for line in harness.run(bad).errors:
    print("  error:", line)
