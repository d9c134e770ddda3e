#!/usr/bin/env python3
"""Monte Carlo ensemble error vs. trajectory count.

Compares wave-function ensembles of increasing size against direct
integration on the protected shared-bath point and prints the expected
1/sqrt(N) trend.
"""

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from cobath import JCParams, basis_ket, build_jc, integrate, jc_initial, jc_space, mcwf_unravel
from cobath.runner import write_csv

OUT = Path(__file__).resolve().parents[1] / "out"


def main():
    OUT.mkdir(exist_ok=True)
    p = JCParams(omega0=1.0, eps=0.1, g11=0.01, g22=0.01, g12=0.01)
    me = build_jc(p)
    grid = np.linspace(0.0, 1000.0, 101)
    direct = np.array([s.matrix for s in integrate(me, jc_initial(p), grid)])

    t0 = time.time()
    res = mcwf_unravel(
        me,
        basis_ket(jc_space(p), (0, 0)),
        grid,
        n_traj=10_000,
        seed=20240817,
        snapshot_counts=(100, 1000),
    )
    devs = [float(np.max(np.abs(avg - direct))) for avg in res.averages]
    for n, dev in zip(res.counts, devs):
        print(f"n_traj = {n:>6}: max entrywise deviation = {dev:.4f}")
    print(f"({time.time() - t0:.1f}s; deviations should shrink like 1/sqrt(n))")

    write_csv(
        OUT / "ensemble_convergence.csv",
        np.array(res.counts, dtype=float),
        [("max_deviation", np.array(devs))],
    )
    print(f"artifacts in {OUT}")


if __name__ == "__main__":
    main()
