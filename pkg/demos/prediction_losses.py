"""Principal angles as prediction losses.

For two reductions of ``x`` the worst-case excess squared error of a
linear predictor is governed by the largest principal angle, while the
average over random regression directions uses all of them.

    python3 demos/prediction_losses.py
"""

import numpy as np

from cca_subspace import bayes_excess, principal_angles, worst_case_excess
from cca_subspace.population import random_covariance


def main() -> None:
    rng = np.random.default_rng(3)
    p, k = 6, 3
    sigma_x = random_covariance(p, 50.0, rng)
    u_star = rng.standard_normal((p, k))
    r2, sigma_z = 0.8, 1.0
    print(f"{'noise':>6} {'angles (deg)':>26} {'l1':>8} {'l2':>8} {'worst':>8} {'bayes':>8} {'bayes MC':>16}")
    for noise in (0.05, 0.3, 1.0):
        u = u_star + noise * rng.standard_normal((p, k))
        d = principal_angles(u, u_star, sigma_x)
        worst = worst_case_excess(r2, sigma_z, u, u_star, sigma_x)
        bayes = bayes_excess(r2, sigma_z, u, u_star, sigma_x, mc_trials=50_000, seed=4)
        angles = " ".join(f"{np.degrees(a):6.2f}" for a in d.angles)
        print(
            f"{noise:>6} {angles:>26} {d.l1:>8.4f} {d.l2:>8.4f} {worst:>8.4f} {bayes.analytic:>8.4f} "
            f"{bayes.monte_carlo:>8.4f}+/-{bayes.std_err:.4f}"
        )


if __name__ == "__main__":
    main()
