"""Smoke test for the extension module.

Build it with `maturin develop -m crates/python/Cargo.toml` (or copy
`target/release/libthermopinn_py.so` to `thermopinn_py.so` on the path) and
run `python python/smoke_test.py`.
"""

import math

import thermopinn_py as tp

arch = tp.Architecture("2-8-8-4")
assert arch.parameter_count == 2 * 8 + 8 + 8 * 8 + 8 + 8 * 4 + 4

params = tp.init_parameters(arch, 0)
assert len(params) == arch.parameter_count
assert params == tp.init_parameters(arch, 0)

u, v, p, theta = tp.forward(arch, params, 0.3, -0.2)
jet = tp.evaluate_jet(arch, params, 0.3, -0.2)
assert len(jet) == 4 and all(len(f) == 6 for f in jet)
assert math.isclose(jet[0][0], u, rel_tol=0, abs_tol=1e-14)

h = 1e-6
up = tp.forward(arch, params, 0.3 + h, -0.2)[0]
um = tp.forward(arch, params, 0.3 - h, -0.2)[0]
assert abs((up - um) / (2 * h) - jet[0][1]) < 1e-6

sets = tp.datasets(3, 0)
assert [len(s["domain"]) + len(s["boundary"]) for s in sets] == [12, 24, 48]

ex = tp.exact_solution(0.1, 0.2)
(fx, fy), f = tp.forcing(0.1, 0.2, nu=0.5)
assert all(math.isfinite(c) for c in (*ex, fx, fy, f))

run = tp.train(arch, 0, 1, 1e-1, max_epochs=200)
assert run["status"] in ("Converged", "MaxEpochsReached")
assert len(run["total"]) == len(run["domain"]) == len(run["boundary"])

report = tp.error_report(arch, run["parameters"], grid_points=20)
assert set(report) == {"u", "v", "p", "theta"}
assert all(report[k]["w0"] <= report[k]["w1"] <= report[k]["w2"] for k in report)

try:
    tp.Architecture("3-4")
except ValueError:
    pass
else:
    raise AssertionError("bad architecture accepted")

print(f"ok: {run['status']} after {run['epochs']} epochs, u W0 {report['u']['w0']:.3e}")
