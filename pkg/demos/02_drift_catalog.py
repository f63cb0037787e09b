"""The builtin drifts, their regularity class and their moduli."""
import numpy as np

from emlab.drifts import builtin, builtin_names, dini_integral, dini_seminorm_estimate

for name, desc in builtin_names().items():
    print(f"{name:10s} {desc}")
print()

x = np.linspace(-1.5, 1.5, 7)[:, None]
for name, params in [("sin", {}), ("holder", {"alpha": 0.25}), ("dini_log", {}), ("sign", {}), ("step_grid", {})]:
    b = builtin(name, **params)
    print(f"{name:10s}", np.array2string(b(x)[:, 0], precision=3, suppress_small=True))
print()

# The log modulus is Dini (finite integral of theta(r)/r) yet beats every power r^alpha near 0
dl = builtin("dini_log")
print("Dini integral of the log modulus:", dini_integral(dl), "(exactly 1/3)")
for r in (1e-2, 1e-8, 1e-32):
    print(f"  theta({r:.0e}) = {dl.dini_modulus(np.array([r]))[0]:.4e}   r^0.1 = {r ** 0.1:.4e}")

# Random pairs give a lower bound on sup|b| + [b]_theta
for name, params in [("sin", {}), ("holder", {"alpha": 0.5}), ("dini_log", {})]:
    est = dini_seminorm_estimate(builtin(name, **params), 100_000)
    print(f"estimated norm of {name:9s} {est:.3f}")
