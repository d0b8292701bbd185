"""Wall time of simulate + match + did + permutations on the default 24 x 29 panel."""

import argparse
import time

from riskshare.channels import did_decomposition
from riskshare.dgp import DgpConfig, simulate_panel
from riskshare.inference import permutation_test
from riskshare.scm import ScmConfig, build_counterfactual_panel


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--perms", type=int, default=200)
    ap.add_argument("--jobs", type=int, nargs="+", default=[1])
    args = ap.parse_args()

    t0 = time.perf_counter()
    cfg = DgpConfig(seed=12, treatment_effect=(0, 0, 0, -0.2, 0.2))
    actual, _ = simulate_panel(cfg)
    treated = list(cfg.treated_units)
    syn = build_counterfactual_panel(actual, ScmConfig(), treated)
    did_decomposition(actual.subset(treated), syn, cfg.treatment_year)
    print(f"simulate+match+did: {time.perf_counter() - t0:.2f}s")
    base = None
    for jobs in args.jobs:
        t = time.perf_counter()
        permutation_test(actual, None, args.perms, cfg.treatment_year, seed=0, treated=treated, jobs=jobs)
        dt = time.perf_counter() - t
        base = base or dt
        print(f"permutations={args.perms} jobs={jobs}: {dt:.2f}s (speedup {base / dt:.2f}x)")


if __name__ == "__main__":
    main()
