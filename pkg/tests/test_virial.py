import numpy as np
import pytest

from deltanls import groundstate as gs
from deltanls.errors import InsufficientSamples, PreconditionError
from deltanls.evolution import EvolutionConfig, evolve
from deltanls.grid import GridSpec, sample
from deltanls.params import Params
from deltanls.virial import phi, virial_identity_residual, virial_quantities, weighted_momentum_check

P = Params(7.0, -4.0)


def test_cutoff_profile_pieces():
    assert phi(0.5) == pytest.approx(0.25)
    assert phi(-0.9, 1) == pytest.approx(-1.8)
    assert phi(2.5) == 0.0 and phi(-3.0, 2) == 0.0


@pytest.mark.parametrize("order", range(5))
def test_cutoff_derivatives_continuous_at_joins(order):
    e = 1e-9
    for j in (1.0, 2.0):
        assert phi(j - e, order) == pytest.approx(phi(j + e, order), abs=1e-6)


@pytest.mark.parametrize("order", range(1, 5))
def test_cutoff_derivatives_match_finite_differences(order):
    x = np.linspace(0.05, 2.4, 200)
    d = 1e-5
    fd = (phi(x + d, order - 1) - phi(x - d, order - 1)) / (2 * d)
    np.testing.assert_allclose(phi(x, order), fd, atol=1e-4 * 10**order)


def test_cutoff_bounded_by_parabola():
    x = np.linspace(0.0, 2.5, 2501)
    assert np.all(phi(x) >= 0) and np.all(phi(x) <= x * x + 1e-15)


def test_remainder_vanishes_on_rotated_shifted_bump():
    spec = GridSpec.from_spacing(20.0, 5e-3)
    u = sample(lambda x: np.exp(0.7j) * gs.eval_Q(np.abs(x) - 3.0, P), spec)
    v = virial_quantities(u, 1.0, P)
    assert abs(v.A_R) < 1e-6


def test_linear_virial_second_derivative():
    # for the free linear flow d^2 J / dt^2 = 8 ||u'||^2 exactly, so J is a quadratic in t
    pr = P.with_(gamma=0.0)
    spec = GridSpec.from_spacing(30.0, 0.01)
    u0 = sample(lambda x: np.exp(-x * x) * (1 + 0.3j * x) + 0j, spec)
    cfg = EvolutionConfig(dt0=1e-3, t_end=0.4, record_every=0.02, linear_only=True, virial_R=6.0)
    traj = evolve(u0, cfg, pr)
    t = np.array([s.t for s in traj.virial])
    J = np.array([s.J for s in traj.virial])
    kin0 = traj.virial[0].K_gamma
    j1 = traj.virial[0].dJ_dt
    np.testing.assert_allclose(J, J[0] + j1 * t + 4 * kin0 * t * t, rtol=1e-3)
    assert virial_identity_residual(traj).max_second_order < 1e-2


def test_identity_residual_on_nonlinear_run():
    spec = GridSpec.from_spacing(20.0, 5e-3)
    u0 = sample(lambda x: 0.3 * np.exp(2 * np.abs(x) - x * x) + 0j, spec)
    cfg = EvolutionConfig(dt0=1e-3, t_end=0.5, record_every=0.01, virial_R=3.0, boundary_tol=1e-3)
    res = virial_identity_residual(evolve(u0, cfg, P))
    assert res.max_first_order < 1e-2 and res.max_second_order < 1e-2


def test_identity_residual_needs_samples():
    with pytest.raises(InsufficientSamples):
        virial_identity_residual([])


def test_weighted_momentum_needs_threshold_data():
    spec = GridSpec.from_spacing(20.0, 1e-2)
    u = sample(lambda x: gs.eval_Q(np.abs(x) - 2.0, P) + 0j, spec)
    with pytest.raises(PreconditionError):
        weighted_momentum_check(u, lambda x: phi(x / 4, 1) * 4, P)


def test_weighted_momentum_on_threshold_data():
    from deltanls import experiments as ex

    spec = GridSpec.from_spacing(20.0, 1e-2)
    data = ex.threshold_data(ex.ThresholdFamily("phase_modulated", y0=1.5, b=0.2), 1, P, spec)
    chk = weighted_momentum_check(data.sample(spec), lambda x: 4 * phi(x / 4, 1), P)
    assert chk.lhs > 0 and np.isfinite(chk.ratio_sq)
    # Cauchy-Schwarz: lhs^2 <= ||phi' u||^2 ||u'||^2 holds regardless
    assert chk.lhs**2 <= chk.rhs_scale / chk.mu_gamma**2 * 2 * gs.norms_Q(P).kinetic * 10
