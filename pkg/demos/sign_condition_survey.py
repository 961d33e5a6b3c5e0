"""On the threshold, the sign of K agrees with the sign of a scale-invariant
gradient gap.  Survey a few shapes and couplings, and show why the grid must
be fine: the gap is resolved to O(h^2) while it is compared with exact Q norms.

Run: python3 demos/sign_condition_survey.py
"""
from deltanls import experiments as ex
from deltanls import functionals as fn
from deltanls.grid import GridSpec
from deltanls.params import Params

spec = GridSpec.from_spacing(20.0, 2.5e-3)
print(f"{'gamma':>6} {'family':>16} {'y0':>4} {'branch':>6} {'K':>10} {'gap':>10}")
for g in (-2.0, -3.0, -4.0):
    pr = Params(7.0, g)
    for kind, y0, b in (("two_bump", 1.5, 0.0), ("dilated_bump", 1.5, 0.0), ("phase_modulated", 1.5, 0.2)):
        for k in (1, -1):
            f = ex.threshold_data(ex.ThresholdFamily(kind, y0=y0, b=b), k, pr, spec).sample(spec)
            sc = fn.sign_condition(f, pr)
            print(f"{g:6.1f} {kind:>16} {y0:4.1f} {'K>0' if k > 0 else 'K<0':>6} {sc.K:10.3e} {sc.norm_gap:10.3e}")

print("\nthe closest case: two_bump y0 = 2.5 at gamma = -2 on the K<0 branch")
pr = Params(7.0, -2.0)
for h in (1e-2, 5e-3, 2.5e-3):
    s = GridSpec.from_spacing(20.0, h)
    f = ex.threshold_data(ex.ThresholdFamily("two_bump", y0=2.5), -1, pr, s).sample(s)
    sc = fn.sign_condition(f, pr)
    print(f"  h = {h:.1e}: K {sc.K:+.4e}, gap {sc.norm_gap:+.3e}, agree {sc.agree}")
