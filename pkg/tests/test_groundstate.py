import math

import numpy as np
import pytest
from scipy.special import beta

from deltanls import groundstate as gs
from deltanls.errors import DomainError, SpecMismatch
from deltanls.params import Params


P7 = Params(7.0, -4.0)


def closed_form_norms(p):
    # Q = A sech^{2/(p-1)}(a x), A = ((p+1)/2)^{1/(p-1)}; integral sech^s = B(s/2, 1/2)
    A = ((p + 1) / 2) ** (1 / (p - 1))
    a = (p - 1) / 2
    mass = A**2 / a * beta(2 / (p - 1), 0.5)
    lp1 = A ** (p + 1) / a * beta((p + 1) / (p - 1), 0.5)
    return mass, lp1


@pytest.mark.parametrize("p", [6.0, 7.0, 9.0])
def test_norms_match_beta_function_values(p):
    mass, lp1 = closed_form_norms(p)
    n = gs.norms_Q(Params(p, -3.0))
    assert n.mass == pytest.approx(mass, rel=1e-12)
    assert n.lp1 == pytest.approx(lp1, rel=1e-12)
    # Pohozaev fixes the kinetic term from the L^{p+1} norm
    assert n.kinetic == pytest.approx((p - 1) / (2 * (p + 1)) * lp1, rel=1e-12)


def test_p7_reference_values():
    n = gs.norms_Q(P7)
    assert n.mass == pytest.approx(2.2258253490446105, rel=1e-13)
    assert n.energy == pytest.approx(0.5 * n.kinetic - n.lp1 / 8, rel=1e-14)
    assert n.action == pytest.approx(n.energy + n.mass / 2, rel=1e-14)
    assert abs(n.pohozaev_residual()) < 1e-10
    assert abs(n.nehari_residual()) < 1e-10


def test_profile_solves_ode_pointwise():
    x = np.linspace(-6, 6, 241)
    q, q2 = gs.eval_Q(x, P7), gs.eval_Q_second(x, P7)
    np.testing.assert_allclose(-q2 + q - q**7, 0.0, atol=1e-12)
    # derivative against a centered difference
    d = 1e-5
    fd = (gs.eval_Q(x + d, P7) - gs.eval_Q(x - d, P7)) / (2 * d)
    np.testing.assert_allclose(gs.eval_Q_prime(x, P7), fd, atol=1e-9)


def test_peak_value():
    assert gs.Q_at_zero(P7) == pytest.approx(4 ** (1 / 6), rel=1e-14)


def test_attained_profile_jump_condition():
    pr = Params(7.0, -4.0, 5.0)
    q0 = gs.eval_Q_omega_gamma(0.0, pr)
    dq = gs.eval_Q_omega_gamma_prime(1e-12, pr)
    # u'(0+) - u'(0-) = -gamma u(0) for even u
    assert 2 * dq == pytest.approx(-pr.gamma * q0, rel=1e-8)
    interior, jump = gs.attained_residuals(pr, h=1e-3)
    assert interior < 1e-8 and jump < 1e-8


def test_attained_profile_needs_high_frequency():
    with pytest.raises(DomainError):
        gs.attained_shift(Params(7.0, -4.0, 4.0))


def test_subcritical_power_rejected_by_expansions():
    with pytest.raises(SpecMismatch):
        gs.lemma_terms(6.0, Params(5.0, -4.0))


def test_interaction_potential_closed_form_matches_quadrature():
    for g in (-2.0, -4.0, -6.0):
        pr = Params(7.0, g)
        for y in (0.5, 2.0, 5.0):
            a, b = gs.script_Q(y, pr), gs.script_Q_quadrature(y, pr)
            # the quadrature sums pieces of size e^{-2y} that cancel at gamma = -2
            assert abs(a - b) <= 1e-9 * pr.c_p**2 * math.exp(-2 * y)


@pytest.mark.parametrize("gamma", [-2.0, -4.0])
def test_expansion_terms(gamma):
    pr = Params(7.0, gamma)
    for y, tol in ((6.0, 1e-2), (8.0, 1e-3)):
        for name, chk in gs.lemma_terms(y, pr).items():
            assert chk.rel_error < tol, (name, y, chk)


def test_degenerate_coupling_kills_leading_order():
    pr = Params(7.0, -2.0)
    assert abs(gs.script_Q(8.0, pr)) * math.exp(16.0) < 1e-2
    # and for gamma < -2 the e^{-2y} coefficient is (1 - 2/|gamma|) c_p^2
    pr4 = Params(7.0, -4.0)
    assert gs.script_Q(8.0, pr4) * math.exp(16.0) == pytest.approx(0.5 * pr4.c_p**2, rel=1e-6)


def test_stationary_coupling_of_shifted_bump():
    # Q(|x|-y) satisfies the jump condition with coupling -2Q'(-y)/Q(-y)
    for y in (0.3, 1.0, 4.0):
        d = 1e-6
        slope = (gs.eval_Q(-y + d, P7) - gs.eval_Q(-y - d, P7)) / (2 * d)
        assert gs.gamma_of_y(y, P7) == pytest.approx(-2 * slope / gs.eval_Q(-y, P7), rel=1e-7)


def test_size_function_branches():
    assert gs.e_gamma(3.0, Params(7.0, -2.0)) == pytest.approx(math.exp(-24.0))
    assert gs.e_gamma(3.0, Params(7.0, -3.0)) == pytest.approx(math.exp(-6.0))


def test_asymptotic_report_row():
    rep = gs.script_Q_asymptotic(6.0, P7)
    assert len(rep.row()) == len(gs.AsymptoticReport.HEADER)
    assert rep.rel_error_two_term < rep.rel_error_leading or rep.rel_error_leading == 0.0
