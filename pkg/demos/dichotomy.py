"""Decay under critical damping versus persistence under integrable damping.

Run with ``python3 demos/dichotomy.py`` (about a minute).
"""
# %%
# One linear mode, eps = 0.1.  With b(t) = (1+t)^-1 the energy decays like a
# power of t.  With b(t) = (1+t)^-2 the total damping is finite and the energy
# can never fall below H(0) exp(-2/eps).
import numpy as np

from kirchlab import DissipationSpec, NonlinearitySpec, OperatorSpec, ProblemSetup, SolverConfig
from kirchlab.analysis import energy_floor, tail_energy
from kirchlab.hyperbolic import hamiltonian_series, solve_hyperbolic

op = OperatorSpec(np.array([1.0]))
m = NonlinearitySpec.constant(1.0)
cfg = SolverConfig(T=1000.0)

# %%
print(f"{'p':>3} {'H(10)':>11} {'H(100)':>11} {'H(1000)':>11} {'floor':>11} {'tail inf':>11}")
for p in (1.0, 2.0):
    setup = ProblemSetup(0.1, op, m, DissipationSpec(p), np.array([1.0]), np.array([0.5]))
    traj = solve_hyperbolic(setup, cfg)
    H = hamiltonian_series(setup, traj)
    at = [H[np.searchsorted(traj.times, t)] for t in (10.0, 100.0, 1000.0)]
    floor = energy_floor(setup, np.array([1000.0]))[0]
    print(f"{p:3.0f} " + " ".join(f"{h:11.3e}" for h in at)
          + f" {floor:11.3e} {tail_energy(setup, traj):11.3e}")
