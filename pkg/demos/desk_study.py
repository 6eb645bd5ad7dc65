"""A small replication study: simulate, fit and summarise, then write the report files.

Run:  python demos/desk_study.py [output_dir]      (a few minutes on one core)
The same study from the command line:
    hawkes-nsk study --config study.json --out desk_study
with study.json = {"model": 3, "n_list": [100, 400], "replicates": 40, "master_seed": 7}
"""
import sys

from hawkes_nsk import FitOptions, StudyConfig, reference_model, run_study

out = sys.argv[1] if len(sys.argv) > 1 else "desk_study"
cfg = StudyConfig(model=reference_model(3), n_list=(100, 400), replicates=40, master_seed=7,
                  fit=FitOptions(starts=2), output_dir=out)
report = run_study(cfg, progress=lambda n, res: print(f"  n={n:g}: {len(res)} replicates done"))
print(f"{'n':>6} {'param':>9} {'true':>6} {'mean':>8} {'emp SE':>8} {'plug-in':>8} {'KS p':>6} used")
for r in report.rows:
    print(f"{r.n:6g} {r.param:>9} {r.true:6.3f} {r.mean_est:8.4f} {r.emp_se:8.4f} {r.median_plugin_se:8.4f} "
          f"{r.ks_p:6.3f} {r.used}/{r.used + r.failed}")
print(f"report.csv, estimates_<n>.csv and QQ plots written to {out}/")
