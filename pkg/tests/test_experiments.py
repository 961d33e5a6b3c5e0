import math
from dataclasses import replace

import numpy as np
import pytest

from deltanls import experiments as ex
from deltanls import functionals as fn
from deltanls import groundstate as gs
from deltanls import modulation as md
from deltanls.errors import NoBranch, PreconditionError
from deltanls.grid import GridSpec
from deltanls.params import Params

P = Params(7.0, -4.0)
SPEC = GridSpec.from_spacing(20.0, 1e-2)
QUICK = ex.ClassifyConfig(blowup_h=1e-2, blowup_dt=2e-3, blowup_t_end=1.0, scatter_half_width=40.0,
                          scatter_h=0.05, scatter_dt=5e-3, t_end=1.0)


@pytest.mark.parametrize("kind", ex.KINDS)
@pytest.mark.parametrize("k", [1, -1])
def test_threshold_data_hits_mass_and_energy(kind, k):
    fam = ex.ThresholdFamily(kind, y0=1.5, b=0.3)
    f = ex.threshold_data(fam, k, P, SPEC).sample(SPEC)
    dm, de = fn.me_residual(f, P)
    assert dm < 1e-12 and de < 1e-10
    r = fn.report(f, P)
    assert np.sign(r.virial_K) == k
    assert f.is_even(1e-12)


def test_branch_roots_bracket_energy_peak():
    fam = ex.ThresholdFamily("two_bump", y0=1.5)
    _, _, lam_pos = ex.threshold_data(fam, 1, P, SPEC).with_lambda(SPEC)
    _, _, lam_neg = ex.threshold_data(fam, -1, P, SPEC).with_lambda(SPEC)
    assert lam_pos < lam_neg


def test_unreachable_energy_raises_no_branch():
    fam = ex.ThresholdFamily("dilated_bump")
    n = gs.norms_Q(P)
    with pytest.raises(NoBranch):
        ex.threshold_data(fam, 1, P, SPEC, mass=2 * n.mass, energy=100.0, failover=False)


def test_failover_shrinks_separation():
    # at y0 = 8 the orbit cannot reach the threshold energy on this grid; the builder retreats in y0
    data = ex.threshold_data(ex.ThresholdFamily("two_bump", y0=8.0), 1, P, GridSpec.from_spacing(30.0, 1e-2))
    assert data.family.y0 < 8.0


def test_unknown_family_rejected():
    with pytest.raises(PreconditionError):
        ex.ThresholdFamily("triangle")


def test_builder_rejects_nondegenerate_range():
    with pytest.raises(PreconditionError):
        ex.build_threshold_data(ex.ThresholdFamily(), 1, Params(7.0, -1.0))


def test_quick_classification_blowup_branch():
    data = ex.threshold_data(ex.ThresholdFamily("two_bump", y0=1.5), -1, P, QUICK.grid("A", 0))
    res = ex.classify(data, P, QUICK)
    assert res.label == "BlowUp" and res.refinement_agree
    assert res.t_star == pytest.approx(0.184, abs=0.01)
    assert res.to_dict()["label"] == "BlowUp"


def test_short_runs_stay_undetermined():
    data = ex.threshold_data(ex.ThresholdFamily("two_bump", y0=1.5), 1, P, QUICK.grid("A", 0))
    res = ex.classify(data, P, replace(QUICK, refine=False))
    assert res.label == "Undetermined"
    assert res.notes


def test_classify_refuses_off_threshold_data():
    f = ex.ThresholdFamily("dilated_bump").member(QUICK.grid("A", 0), 1.0, 1.0, P)
    with pytest.raises(PreconditionError):
        ex.classify(f, P, QUICK)


def test_estimate_chain_on_synthetic_motion():
    # states planted along y(t) = 6 + 0.2 t, theta~ = t + 0.1, rho = 1e-3 (1 + t)
    spec = GridSpec.from_spacing(25.0, 5e-3)
    ts = np.linspace(0.0, 0.5, 6)
    states = [md.plant(spec, t + 0.1, 6.0 + 0.2 * t, 1e-3 * (1 + t), 1.0, P)[0] for t in ts]
    chain = md.estimate_chain_states(ts, states, P, R=1.0)
    assert all(r.in_regime for r in chain.rows)
    for r in chain.rows:
        assert r.ydot == pytest.approx(0.2, abs=1e-8)
        assert r.phase_drift == pytest.approx(0.0, abs=1e-8)
        assert r.rhodot == pytest.approx(1e-3, abs=1e-8)
    assert chain.bounded()


def test_sweep_orders_rows_and_marks_low_mass():
    n = gs.norms_Q(P)
    masses = [0.5 * fn.mass_cutoff(P), 2 * n.mass]
    rows = ex.sweep_plane(masses, [2 * n.energy], P, replace(QUICK, refine=False, t_end=0.2, blowup_t_end=0.2))
    assert [r["index"] for r in rows] == [(0, 0), (1, 0)]
    assert ex.atlas_band(rows[0], P) == "low_mass"
    assert ex.atlas_band(rows[1], P) == "threshold"
    assert math.isnan(rows[0]["omega"]) or rows[0]["omega"] > 0
