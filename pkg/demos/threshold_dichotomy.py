"""Build data exactly at the threshold (mass 2M(Q), energy 2E(Q)) on both sides
of K = 0, then classify each with a cut-down resolution.

The K < 0 side should blow up near t = 0.18 at gamma = -4.  With the coarse
settings below the K > 0 run is short, so it may come back Undetermined; the
CLI's `classify --resolution desk` runs the full-length check.

Run: python3 demos/threshold_dichotomy.py   (about a minute)
"""
from deltanls import experiments as ex
from deltanls import functionals as fn
from deltanls.params import Params

pr = Params(7.0, -4.0)
cfg = ex.ClassifyConfig(blowup_h=8e-3, blowup_dt=2e-3, blowup_t_end=2.0, scatter_half_width=100.0,
                        scatter_h=0.05, scatter_dt=2.5e-3, t_end=20.0)
fam = ex.ThresholdFamily("two_bump", y0=1.5)
for k in (-1, 1):
    data = ex.threshold_data(fam, k, pr, cfg.grid("A", 0))
    f = data.sample(cfg.grid("A", 0))
    r = fn.report(f, pr)
    print(f"K{'<' if k < 0 else '>'}0 datum: mass {r.mass:.6f}, energy {r.energy_gamma:.6f}, K {r.virial_K:+.4f}")
    res = ex.classify(data, pr, cfg)
    ev = res.evidence()
    print(f"  label {res.label}; t* {ev['t_star']:.4f}; final local mass fraction "
          f"{ev['final_local_mass_fraction']:.3f}; refinements agree {ev['refinement_agree']}")
    for note in res.notes:
        print("  note:", note)
