import math

import numpy as np
import pytest

from deltanls import groundstate as gs
from deltanls import modulation as md
from deltanls.errors import DomainViolation, PreconditionError
from deltanls.grid import GridFunction, GridSpec, sample
from deltanls.params import Params

P = Params(7.0, -4.0)
SPEC = GridSpec.from_spacing(20.0, 5e-3)


def test_cutoff_plateaus_and_smoothness():
    assert md.chi(0.3) == 0.0 and md.chi(1.2) == 1.0 and md.chi(0.75) == pytest.approx(0.5)
    x = np.linspace(0.4, 1.1, 300)
    d = 1e-6
    fd = (md.chi(x + d) - md.chi(x - d)) / (2 * d)
    np.testing.assert_allclose(md.chi(x, 1), fd, atol=1e-6)
    fd2 = (md.chi(x + d, 1) - md.chi(x - d, 1)) / (2 * d)
    np.testing.assert_allclose(md.chi(x, 2), fd2, atol=1e-5)
    assert md.chi_R_plus(-3.0, 2.0) == 0.0 and md.chi_R_plus(3.0, 2.0) == 1.0


def test_proximity_finds_phase_and_shift():
    f = sample(lambda x: np.exp(1.3j) * md.bump(x, 5.0, P), SPEC)
    prox = md.proximity(f, P)
    assert prox.dist < 1e-6
    assert prox.theta0 == pytest.approx(1.3, abs=1e-8) and prox.y0 == pytest.approx(5.0, abs=1e-6)


def test_proximity_of_centered_ground_state():
    # Q = Q(|.| - 0) lies in the family; away from y = 0 the distance is order one
    q = sample(lambda x: gs.eval_Q(x, P) + 0j, SPEC)
    assert md.proximity(q, P).dist < 1e-6
    assert md.proximity(q, P, y_min=4.0).dist > 0.1


def test_proximity_needs_even_data():
    with pytest.raises(PreconditionError):
        md.proximity(sample(lambda x: np.exp(-(x - 1) ** 2) + 0j, SPEC), P)


def test_planted_decomposition_is_recovered():
    rng = np.random.default_rng(0)
    x = SPEC.x
    extra = GridFunction(SPEC, 1e-2 * ((rng.normal() + 1j * rng.normal()) * np.exp(-(np.abs(x) - 5) ** 2)
                                       + 0.3j * np.exp(-(np.abs(x) - 7) ** 2 / 2)), even_hint=True)
    theta, y, rho, R = 0.7, 6.0, 3e-3, 1.0
    f, h_true = md.plant(SPEC, theta, y, rho, R, P, extra)
    st = md.solve_modulation(f, R, md.proximity(f, P), P)
    assert abs(st.theta_tilde - theta) < 1e-8
    assert abs(st.y - y) < 1e-8
    assert abs(st.rho - rho) < 1e-6
    assert md.h1_norm(st.h - h_true) < 1e-6
    assert max(abs(o) for o in st.ortho_residuals) < 1e-8
    assert np.max(np.abs(st.reconstruct(P).values - f.values)) < 1e-12


def test_modulation_requires_separation():
    f = sample(lambda x: md.bump(x, 3.0, P) + 0j, SPEC)
    with pytest.raises(DomainViolation):
        md.solve_modulation(f, 2.0, (0.0, 3.0), P)


def test_jacobian_approaches_bump_norms():
    n = gs.norms_Q(P)
    spec = GridSpec.from_spacing(45.0, 1e-2)
    errs = []
    for R in (2.0, 4.0, 8.0):
        y = 3 * R
        f = sample(lambda x: md.bump(x, y, P) + 0j, spec)
        jac = md.solve_modulation(f, R, (0.0, y), P).jacobian
        errs.append(max(abs(jac[0][0] + n.mass), abs(jac[1][1] - n.kinetic)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-6


def test_mass_bookkeeping_on_threshold_mass():
    # scale a planted state to mass 2M(Q); both sides of the mass identity then agree
    f, _ = md.plant(SPEC, 0.2, 6.0, 2e-3, 1.0, P)
    f = f.scaled(math.sqrt(2 * gs.norms_Q(P).mass / float(np.sum(np.abs(f.values) ** 2) * SPEC.h)))
    st = md.solve_modulation(f, 1.0, md.proximity(f, P), P)
    lhs, rhs = md.mass_identity(st, P)
    assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-9)


def test_linearized_form_kernel():
    spec = GridSpec.from_spacing(20.0, 1e-3)
    q = sample(lambda x: gs.eval_Q(x, P) + 0j, spec)
    qp = sample(lambda x: gs.eval_Q_prime(x, P) + 0j, spec)
    assert abs(md.phi_form(q.scaled(1j), q.scaled(1j), P)) < 1e-9
    assert abs(md.phi_form(qp, qp, P)) < 1e-8
    # Q itself is a negative direction
    assert md.phi_form(q, q, P) < 0


def test_half_line_form_matches_full_line_for_far_bump():
    # the half-line holds the whole right bump, so the form equals the full-line form of the unshifted profile
    spec = GridSpec.from_spacing(30.0, 2e-3)
    y = 12.0
    f = sample(lambda x: np.exp(-(np.abs(x) - y) ** 2) * (1 + 0.5j), spec)
    b = md.b_form(y, f, f, P)
    g = sample(lambda x: np.exp(-x * x) * (1 + 0.5j), spec)
    assert b == pytest.approx(md.phi_form(g, g, P), rel=1e-6)


def test_coercivity_probe_positive():
    probe = md.coercivity_probe(GridSpec.from_spacing(15.0, 1e-2), P, n=50, seed=3)
    assert probe.c_min > 0
    again = md.coercivity_probe(GridSpec.from_spacing(15.0, 1e-2), P, n=50, seed=3)
    assert again == probe
