"""Time averages of the intensity versus their stationary limits.

Run:  python demos/ergodic_limit.py      (about a minute)
"""
import numpy as np

from hawkes_nsk import MCOptions, ergodic_limit, ergodicity_report, reference_model, simulate_hawkes, time_average

model = reference_model(1)                       # generalised Pareto kernel, long memory
print("identity functional: the limit is int nu / (1 - eta) = 35/6 =", round(35 / 6, 4))
pi, rows = ergodicity_report(model, "identity", n_list=(100, 400, 1600), replicates=30, seed=1)
for r in rows:
    print(f"  n={r.n:6.0f}  mean time average {r.mean_average:.4f}  mean |deviation| {r.mean_abs_dev:.4f}")

lim = ergodic_limit(model, "identity", nodes=8, mc=MCOptions(horizon=500.0, replicates=10, seed=2))
print(f"Monte-Carlo limit from stationary paths: {lim.pi:.4f} +- {lim.pi_se:.4f}")

# the matrix functional (d lambda)(d lambda)^T / lambda: its limit is the asymptotic information
m3 = reference_model(3)
gam = ergodic_limit(m3, "gamma", nodes=6, mc=MCOptions(horizon=300.0, replicates=3, seed=3))
ta = time_average(m3, simulate_hawkes(m3, 800.0, 4), "gamma")
print("Gamma(theta*) eigenvalues:", np.round(np.linalg.eigvalsh(gam.pi), 4))
print(f"relative Frobenius gap to a single n=800 time average: "
      f"{np.linalg.norm(ta - gam.pi) / np.linalg.norm(gam.pi):.3f}")
