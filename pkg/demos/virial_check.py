"""The localized virial identity along a trajectory: d/dt J_R against the
momentum term, and d^2/dt^2 J_R against F_R, both by centered differences.

Run: python3 demos/virial_check.py
"""

from deltanls import experiments as ex
from deltanls.evolution import EvolutionConfig, evolve
from deltanls.grid import GridSpec
from deltanls.params import Params
from deltanls.virial import virial_identity_residual

pr = Params(7.0, -4.0)
spec = GridSpec.from_spacing(20.0, 5e-3)
data = ex.threshold_data(ex.ThresholdFamily("two_bump", y0=1.5), -1, pr, spec)
cfg = EvolutionConfig(dt0=1e-3, t_end=0.15, record_every=0.005, virial_R=3.0, boundary_tol=1e-3)
traj = evolve(data.sample(spec), cfg, pr)
print(f"run ended: {traj.termination.kind} at t = {traj.termination.t:.4f}")
res = virial_identity_residual(traj)
print(f"normalized residuals: first order {res.max_first_order:.1e}, second order {res.max_second_order:.1e} "
      f"over {res.samples} samples")
print(f"{'t':>6} {'J_R':>10} {'dJ/dt':>10} {'F_R':>10}")
for s in traj.virial[:: max(1, len(traj.virial) // 8)]:
    print(f"{s.t:6.3f} {s.J_R:10.4f} {s.dJR_dt:10.4f} {s.F_R:10.4f}")
print("F_R goes negative and J_R bends downward: the blow-up mechanism on the K < 0 side")
