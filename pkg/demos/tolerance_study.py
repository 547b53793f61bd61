"""Run a bundled scenario at two solver tolerances and compare the fitted orders.

Run with ``python3 demos/tolerance_study.py`` (about half a minute).
"""
# %%
# Everything goes through the same code path as ``kirchlab run``; the two
# runs land in a temporary directory.
import tempfile

from kirchlab import experiments as ex

cfg = ex.load_config(ex.scenario_dir() / "critical_p1.json")

with tempfile.TemporaryDirectory() as tmp:
    base = ex.run_config(cfg, tmp, threads=4)
    tight = ex.run_config(ex.apply_overrides(cfg, rel_tol=5e-11), tmp, threads=4)

    # %%
    # Orders in eps for each error quantity, and how little they move.
    orders = base.report["checks"]["error_orders"]["orders"]
    for name, value in orders.items():
        print(f"{name:16s} {value:7.3f}")
    diff = ex.compare_runs(base.out_dir, tight.out_dir)
    print(f"largest change at rel_tol/2: {diff['max_order_diff']:.2e}")
