#!/usr/bin/env python3
"""Smoke test for the inspect_cp extension module.

Build the module first, then run this script:

    cargo build --release -p inspect-py
    python3 python/smoke_test.py

The script copies the built cdylib next to itself under the importable name
and exercises the main entry points end to end.
"""

import math
import pathlib
import shutil
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
BUILD_DIR = pathlib.Path(__file__).resolve().parent / "_build"


def locate_extension():
    candidates = [
        ROOT / "target" / "release" / "libinspect_cp.so",
        ROOT / "target" / "debug" / "libinspect_cp.so",
        ROOT / "target" / "release" / "libinspect_cp.dylib",
        ROOT / "target" / "debug" / "libinspect_cp.dylib",
    ]
    for cand in candidates:
        if cand.exists():
            return cand
    sys.exit("build the extension first: cargo build --release -p inspect-py")


def import_module():
    src = locate_extension()
    BUILD_DIR.mkdir(exist_ok=True)
    dst = BUILD_DIR / "inspect_cp.so"
    if not dst.exists() or src.stat().st_mtime > dst.stat().st_mtime:
        shutil.copy2(src, dst)
    sys.path.insert(0, str(BUILD_DIR))
    import inspect_cp

    return inspect_cp


checks = 0


def check(name, cond):
    global checks
    checks += 1
    status = "ok" if cond else "FAIL"
    print(f"  [{status}] {name}")
    if not cond:
        sys.exit(1)


def main():
    m = import_module()
    print("inspect_cp smoke test")

    # CUSUM transformation and the single-change profile
    t = m.cusum_transform([[0.0, 0.0, 3.0]])
    c = math.sqrt(2.0 / 3.0)
    check("cusum hand value", abs(t[0][0] - 1.5 * c) < 1e-12 and abs(t[0][1] - 3.0 * c) < 1e-12)
    g = m.gamma_vector(4, 2)
    check("gamma profile", abs(g[1] - 1.0) < 1e-12 and abs(g[0] - 1 / math.sqrt(3)) < 1e-12)

    # projections
    check("soft threshold", m.soft_threshold([[3.0, -0.5]], 1.0) == [[2.0, 0.0]])
    check("simplex projection", m.project_simplex([2.0, 1.0, 0.0]) == [1.0, 0.0, 0.0])
    nb = m.project_nuclear_ball([[3.0, 0.0], [0.0, 1.0]])
    check("nuclear projection", abs(nb[0][0] - 1.0) < 1e-9 and abs(nb[1][1]) < 1e-9)

    # solvers agree with the duality certificate
    t = m.cusum_transform([[0.0, 0.0, 4.0, 4.0], [1.0, 1.0, 1.0, 1.0]])
    s2 = m.closed_form_s2(t, 0.5)
    s1 = m.admm_solve(t, 0.5)
    check("duality sandwich", s1["objective"] <= s2["objective"] + 1e-6 <= s2["certificate"] + 2e-6)
    check(
        "brute force matches dense direction at k=p",
        abs(
            sum(
                a * b
                for a, b in zip(m.brute_force_sparse_svd(t, 2), m.leading_left_singular_vector(t))
            )
        )
        > 1 - 1e-9,
    )

    # simulate -> detect round trip on noiseless data
    sim = m.simulate(n=120, p=8, k=3, z=[40, 80], vartheta=[2.0, 2.0], overlap="none", sigma2=0.0, seed=4)
    wbs = m.inspect_wbs(sim["x"], xi=1e-9, lambda_=0.3, q=300, seed=1)
    check("noiseless wbs recovery", wbs["changepoints"] == [40, 80])

    sim = m.simulate(n=64, p=4, k=2, z=[32], vartheta=[4.0], sigma2=0.0, seed=9)
    single = m.inspect_single(sim["x"], lambda_=0.5)
    check("noiseless single recovery", single["z_hat"] == 32)
    split = m.inspect_single_split(sim["x"], lambda_=0.5)
    check("split output is even", split["z_hat"] % 2 == 0 and split["z_hat"] == 32)

    # noisy single changepoint with auto lambda and MAD normalisation
    sim = m.simulate(n=500, p=40, k=5, z=[200], vartheta=[3.0], sigma2=1.0, seed=11)
    xn, skipped = m.normalize(sim["x"])
    check("normalisation touches every row", skipped == [])
    det = m.inspect_single(xn)
    check("noisy single detection is close", abs(det["z_hat"] - 200) <= 10)

    # spatial variant runs and reports a fitted parameter
    sim = m.simulate(n=400, p=30, k=4, z=[160], vartheta=[3.0], noise="cs-local", rho=0.5, seed=3)
    sp = m.inspect_single_spatial(sim["x"], "local", 0.3, lambda_=1.0)
    check("spatial detector fits rho", sp["rho_hat"] is not None and not sp["fallback_identity"])

    # calibration determinism
    x1 = m.calibrate_threshold(60, 4, nulls=20, seed=7)
    x2 = m.calibrate_threshold(60, 4, nulls=20, seed=7)
    check("calibration deterministic", x1 == x2 and x1 > 0)

    # metrics
    check("hausdorff", m.hausdorff([1.0, 5.0], [2.0]) == 3.0)
    check("wasserstein", m.wasserstein1([(0.0, 0.5), (10.0, 0.5)], [(5.0, 1.0)]) == 5.0)
    check("ari identical", m.adjusted_rand_index(10, [3, 7], [3, 7]) == 1.0)
    check("ari example", m.adjusted_rand_index(4, [2], [1]) == 0.0)

    print(f"all {checks} checks passed")


if __name__ == "__main__":
    main()
