#!/usr/bin/env python3
"""Smoke test for the msm_py extension module.

Builds nothing itself: run `cargo build --release -p msm-python` first, then
`python3 python/smoke_test.py`. The script locates the compiled cdylib in the
workspace target directory, links it under the importable name, and exercises
the main types end to end at a tiny budget.
"""

import json
import math
import pathlib
import re
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def locate_extension():
    candidates = []
    for profile in ("release", "debug"):
        base = ROOT / "target" / profile
        candidates += [base / "libmsm_py.so", base / "libmsm_py.dylib", base / "msm_py.dll"]
    for c in candidates:
        if c.exists():
            return c
    sys.exit(
        "msm_py extension not found; build it with: cargo build --release -p msm-python"
    )


def import_msm_py():
    lib = locate_extension()
    stage = pathlib.Path(tempfile.mkdtemp(prefix="msm_py_"))
    suffix = ".pyd" if lib.suffix == ".dll" else ".so"
    shutil.copy2(lib, stage / f"msm_py{suffix}")
    sys.path.insert(0, str(stage))
    import msm_py

    return msm_py


def check(name, ok, detail=""):
    status = "pass" if ok else "FAIL"
    print(f"[{status}] {name}{': ' + detail if detail else ''}")
    if not ok:
        sys.exit(1)


def main():
    msm = import_msm_py()

    check("problems listed", set(msm.list_problems()) == {
        "allen_cahn", "rotation", "burgers", "fokker_planck", "advection6d"
    })

    # Network determinism and exact derivatives vs finite differences.
    net_a = msm.DenseNetwork([2, 16, 16, 1], seed=7)
    net_b = msm.DenseNetwork([2, 16, 16, 1], seed=7)
    check("seeded init deterministic", net_a.params() == net_b.params())
    x = [0.31, -0.42]
    value, grad, hess = net_a.input_jet(x)
    check("jet value matches forward", value == net_a.forward(x))
    h = 1e-5
    fd0 = (net_a.forward([x[0] + h, x[1]]) - net_a.forward([x[0] - h, x[1]])) / (2 * h)
    check(
        "jet gradient matches finite differences",
        abs(grad[0] - fd0) < 1e-6 * (1 + abs(fd0)),
        f"{grad[0]:.8f} vs {fd0:.8f}",
    )
    check("hessian symmetric", abs(hess[0][1] - hess[1][0]) < 1e-12)

    # Exact solutions annihilate residuals.
    rotation = msm.PdeProblem("rotation")
    worst = max(
        abs(rotation.exact_residual([0.3 + 0.05 * i, 0.2 + 0.03 * i], 0.1 * i))
        for i in range(10)
    )
    check("rotation exact residual ~ 0", worst < 1e-6, f"worst |r| = {worst:.2e}")
    peak = rotation.exact([math.cos(0.5), math.sin(0.5)], 0.5)
    check("rotation peak value 1", abs(peak - 1.0) < 1e-12)

    # Density-proportional sampling concentrates where it should.
    pts = msm.sample_initial_positions(rotation, "prop_u0", 2000, seed=3)
    mx = sum(p[0] for p in pts) / len(pts)
    my = sum(p[1] for p in pts) / len(pts)
    check(
        "initial sampling concentrates at (1, 0)",
        abs(mx - 1.0) < 0.02 and abs(my) < 0.02,
        f"mean = ({mx:.3f}, {my:.3f})",
    )

    # Transport under a zero potential keeps samples in place.
    zero_net = msm.DenseNetwork([3, 8, 1], seed=0)
    zero_net.set_params([0.0] * zero_net.param_count())
    pot = msm.VelocityPotential(zero_net)
    check("zero potential has zero velocity", pot.velocity_at([0.4, 0.2], 0.3) == [0.0, 0.0])
    times, positions, logdet, alive = pot.evolve(rotation, [[0.5, 0.5]], 5, 2)
    check(
        "zero-velocity trajectories are constant",
        positions[0][0] == positions[0][-1] and logdet[0][-1] == 0.0 and all(alive[0]),
    )

    # Verification suite through the bindings.
    passed, _report = msm.verify_suite("flow")
    check("flow verification suite", passed)

    # A miniature end-to-end run (desk config shrunk to smoke scale).
    toml = msm.default_config_toml("rotation", "desk")
    toml = re.sub(r"epochs_u = \d+", "epochs_u = 12", toml)
    toml = re.sub(r"epochs_v = \d+", "epochs_v = 8", toml)
    toml = re.sub(r"epochs_final = \d+", "epochs_final = 12", toml)
    toml = re.sub(r"outer_iterations = \d+", "outer_iterations = 1", toml)
    toml = re.sub(r"n_pde = \d+", "n_pde = 24", toml)
    toml = re.sub(r"n_initial = \d+", "n_initial = 16", toml)
    toml = re.sub(r"n_boundary = \d+", "n_boundary = 16", toml)
    toml = re.sub(r"n_new = \[[^\]]*\]", "n_new = [16]", toml)
    toml = re.sub(r"hidden = \[[^\]]*\]", "hidden = [8, 8]", toml)
    summary = msm.run_experiment(toml, method="msm", seed=1)
    check(
        "miniature msm run completes",
        summary.rel_l2 > 0 and math.isfinite(summary.rel_l2),
        f"rel_l2 = {summary.rel_l2:.3e}, l_inf = {summary.l_inf:.3e}",
    )
    metrics = json.loads(summary.metrics_json)
    check("run grew the training set", metrics["iterations"][0]["n_added"] > 0)
    trained = summary.u_network()
    check("trained network round-trips", trained.param_count() > 0)
    vel_pot = summary.potential()
    check("potential available for msm runs", vel_pot is not None)

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
