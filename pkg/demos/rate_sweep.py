"""Monte-Carlo loss of sample CCA against sample size.

Runs a small sweep on a standard-form model, prints the mean Frobenius
loss next to the constant-free principal term, and fits the log-log slope.

    python3 demos/rate_sweep.py
"""

import numpy as np

from cca_subspace import CanonicalSpec, ExperimentConfig, fit_rate_slope, run_sweep


def main() -> None:
    lam = np.array([0.9, 0.8, 0.3, 0.1, 0, 0, 0, 0, 0, 0])
    eye = np.eye(10)
    spec = CanonicalSpec(eye, eye, lam, eye, eye, k=2)
    cfg = ExperimentConfig(spec, (1000, 2000, 4000, 8000), replicates=100, master_seed=1)
    results = run_sweep(cfg, threads=2)
    print(f"{'n':>6} {'mean fro loss':>14} {'std err':>10} {'principal':>10} {'loss/principal':>15}")
    for r in results:
        fro, se = r.mean_loss["fro"], r.std_err["fro"]
        principal = r.rate_refs["fro"]["principal"]
        print(f"{r.params['n']:>6} {fro:>14.4e} {se:>10.2e} {principal:>10.3e} {fro / principal:>15.3f}")
    slope, se = fit_rate_slope(results, "fro")
    print(f"log-log slope {slope:.3f} +/- {se:.3f}")


if __name__ == "__main__":
    main()
