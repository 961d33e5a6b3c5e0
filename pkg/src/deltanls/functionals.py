"""Scalar functionals on grid functions, sharp constants, thresholds and scalings.

Everything here is evaluated with the grid's trapezoid rule and the discrete
delta form, so identities between functionals hold to rounding error on a
fixed grid.  Reference values for Q (mass, energy, ...) come from the
continuum quadratures in :mod:`groundstate`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from . import groundstate as gs
from .errors import MassTooSmall, PreconditionError
from .grid import GridFunction, GridSpec, dirichlet_gamma_form, kinetic, quadrature
from .params import Params, sign

ME_TOL = 1e-6


@dataclass(frozen=True)
class FunctionalReport:
    mass: float
    kinetic: float
    delta_point: float  # |f(0)|^2
    lp1_norm_p1: float
    energy_gamma: float
    action: float
    virial_K: float
    nehari_I: float
    mu_gamma: float
    h1_omega_gamma_sq: float
    hdot1_gamma_sq: float

    FIELDS = ("mass", "kinetic", "delta_point", "lp1_norm_p1", "energy_gamma", "action",
              "virial_K", "nehari_I", "mu_gamma", "h1_omega_gamma_sq", "hdot1_gamma_sq")

    def as_dict(self) -> dict:
        return asdict(self)


def _pieces(f: GridFunction, params: Params) -> tuple[float, float, float, float]:
    return quadrature(f, 2), kinetic(f), abs(f.at_zero) ** 2, quadrature(f, params.p + 1)


def report(f: GridFunction, params: Params) -> FunctionalReport:
    """All functionals of f at coupling params.gamma and frequency params.omega."""
    p, g, w = params.p, params.gamma, params.omega
    m, kin, d0, lp = _pieces(f, params)
    hdot = kin - g * d0
    return FunctionalReport(
        mass=m,
        kinetic=kin,
        delta_point=d0,
        lp1_norm_p1=lp,
        energy_gamma=0.5 * kin - g / 2 * d0 - lp / (p + 1),
        action=0.5 * kin - g / 2 * d0 - lp / (p + 1) + w / 2 * m,
        virial_K=kin - g / 2 * d0 - (p - 1) / (2 * (p + 1)) * lp,
        nehari_I=kin - g * d0 + w * m - lp,
        mu_gamma=2 * gs.norms_Q(params).kinetic - hdot,
        h1_omega_gamma_sq=hdot + w * m,
        hdot1_gamma_sq=hdot,
    )


def k_alpha_beta(f: GridFunction, alpha: float, beta: float, params: Params) -> float:
    """Derivative of the action along f -> e^{alpha s} f(e^{beta s} x) at s = 0."""
    p, g, w = params.p, params.gamma, params.omega
    m, kin, d0, lp = _pieces(f, params)
    return ((2 * alpha + beta) / 2 * kin - alpha * g * d0 + w * (2 * alpha - beta) / 2 * m
            - ((p + 1) * alpha - beta) / (p + 1) * lp)


def me_residual(f: GridFunction, params: Params) -> tuple[float, float]:
    """Relative distance of (M, E_gamma) from the threshold (2M(Q), 2E(Q))."""
    n = gs.norms_Q(params)
    r = report(f, params)
    return abs(r.mass / (2 * n.mass) - 1), abs(r.energy_gamma / (2 * n.energy) - 1)


def on_threshold(f: GridFunction, params: Params, tol: float = ME_TOL) -> bool:
    return max(me_residual(f, params)) <= tol


def _require_threshold(f: GridFunction, params: Params, tol: float):
    dm, de = me_residual(f, params)
    if max(dm, de) > tol:
        raise PreconditionError(f"not on the mass-energy threshold (rel. residuals {dm:.2e}, {de:.2e})")


def threshold_identity(f: GridFunction, alpha: float, beta: float, params: Params,
                       tol: float = ME_TOL) -> tuple[float, float]:
    """K^{alpha,beta} directly and via its threshold formula in terms of ||f'||^2, |f(0)|^2.

    On (M, E) = (2M(Q), 2E(Q)) with omega = 1 the nonlinear term can be
    eliminated, giving c 2||Q'||^2 - (c ||f'||^2 + ((p-1)alpha - beta)/2 |gamma||f(0)|^2)
    with c = ((p-1)alpha - 2beta)/2.
    """
    _require_threshold(f, params, tol)
    p = params.p
    kq = gs.norms_Q(params).kinetic
    kin, d0 = kinetic(f), abs(f.at_zero) ** 2
    c = ((p - 1) * alpha - 2 * beta) / 2
    via = c * 2 * kq - (c * kin + ((p - 1) * alpha - beta) / 2 * abs(params.gamma) * d0)
    return k_alpha_beta(f, alpha, beta, params.with_(omega=1.0)), via


def virial_minus_mu(f: GridFunction, c: float, params: Params, tol: float = ME_TOL) -> tuple[float, float]:
    """(K_gamma - c mu_gamma, K^{1/2 - 2c/(p-1), 1}) which coincide on the threshold."""
    _require_threshold(f, params, tol)
    pr = params.with_(omega=1.0)
    r = report(f, pr)
    return r.virial_K - c * r.mu_gamma, k_alpha_beta(f, 0.5 - 2 * c / (params.p - 1), 1.0, pr)


# --- sharp constants and thresholds -------------------------------------------

@dataclass(frozen=True)
class GNConstants:
    c_omega0_inv: float  # ||Q_{omega,0}||^{p-1}_{p+1}
    delta_best_inv: float  # 2^{(p-1)/(p+1)} c_omega0_inv

    @property
    def c_omega0(self) -> float:
        return 1 / self.c_omega0_inv

    @property
    def delta_best(self) -> float:
        return 1 / self.delta_best_inv


def gn_constants(params: Params) -> GNConstants:
    """Best constants of ||f||^2_{p+1} <= C ||f||^2_{H^1_omega}, free and for even f with the delta."""
    p, w = params.p, params.omega
    lp1 = gs.norms_Q(params).lp1 * w ** ((p + 1) / (p - 1) - 0.5)  # ||Q_{omega,0}||^{p+1}_{p+1}
    inv = lp1 ** ((p - 1) / (p + 1))
    return GNConstants(inv, 2 ** ((p - 1) / (p + 1)) * inv)


def gn_ratio(f: GridFunction, params: Params, delta: bool = True) -> float:
    """||f||^2_{p+1} / (C ||f||^2_{H^1_{omega,gamma}}); at most 1 when the inequality holds."""
    r = report(f, params)
    c = gn_constants(params)
    const = c.delta_best if delta else c.c_omega0
    denom = const * r.h1_omega_gamma_sq
    return r.lp1_norm_p1 ** (2 / (params.p + 1)) / denom if denom > 0 else 0.0


def n_omega0(omega: float, params: Params) -> float:
    """Minimal free action omega^{1-s_c} S_{1,0}(Q)."""
    return omega ** (1 - params.s_c) * gs.norms_Q(params).action


def attained_action(params: Params) -> float:
    """S_{omega,gamma}(Q_{omega,gamma}) by quadrature of the closed-form profile (omega > gamma^2/4)."""
    pr = params
    p, w, g = pr.p, pr.omega, pr.gamma
    xi = gs.attained_shift(pr)
    peak = max(-xi / math.sqrt(w), 0.0)
    pts = [peak] if peak > 0 else None

    def quad(fn):
        a, _ = integrate.quad(fn, 0, peak + 10, points=pts, epsabs=1e-15, epsrel=1e-13, limit=400)
        b, _ = integrate.quad(fn, peak + 10, np.inf, epsabs=1e-15, epsrel=1e-13, limit=200)
        return 2 * (a + b)

    m = quad(lambda x: gs.eval_Q_omega_gamma(x, pr) ** 2)
    kin = quad(lambda x: gs.eval_Q_omega_gamma_prime(x, pr) ** 2)
    lp = quad(lambda x: gs.eval_Q_omega_gamma(x, pr) ** (p + 1))
    q0 = gs.eval_Q_omega_gamma(0.0, pr)
    return 0.5 * kin - g / 2 * q0**2 - lp / (p + 1) + w / 2 * m


@dataclass(frozen=True)
class Thresholds:
    n_omega0: float
    r_omega_gamma: float
    attained: bool


def thresholds(params: Params) -> Thresholds:
    n = n_omega0(params.omega, params)
    if params.omega <= params.low_frequency_cutoff:
        return Thresholds(n, 2 * n, False)
    return Thresholds(n, attained_action(params), True)


def mass_cutoff(params: Params) -> float:
    """2 M(Q_{gamma^2/4, 0}): the smallest mass in the low-frequency regime."""
    return 2 * params.low_frequency_cutoff ** (-params.s_c) * gs.norms_Q(params).mass


def omega_for_mass(m: float, params: Params) -> float:
    """The omega in (0, gamma^2/4] with m = 2 M(Q_{omega,0})."""
    if m < mass_cutoff(params) * (1 - 1e-12):
        raise MassTooSmall(f"M(f)={m:.6g} below 2M(Q_(gamma^2/4,0))={mass_cutoff(params):.6g}")
    return (2 * gs.norms_Q(params).mass / m) ** (1 / params.s_c)


def resolve_omega(f: GridFunction, params: Params) -> float:
    """The omega in (0, gamma^2/4] with M(f) = 2 M(Q_{omega,0})."""
    return omega_for_mass(quadrature(f, 2), params)


def scaled_energy_level(mass: float, energy: float, params: Params) -> tuple[float, float]:
    """(E M^{(1-s_c)/s_c}, its threshold value 2^{1/s_c} E(Q) M(Q)^{(1-s_c)/s_c})."""
    s = params.s_c
    n = gs.norms_Q(params)
    return energy * mass ** ((1 - s) / s), 2 ** (1 / s) * n.energy * n.mass ** ((1 - s) / s)


@dataclass(frozen=True)
class SignCondition:
    k_sign: int
    norm_sign: int
    K: float
    norm_gap: float

    @property
    def agree(self) -> bool:
        return self.k_sign == self.norm_sign


def sign_condition(f: GridFunction, params: Params, tol: float = ME_TOL) -> SignCondition:
    """Sign of K_gamma next to the sign of the scale-invariant gradient gap."""
    s = params.s_c
    r = report(f, params)
    lev, top = scaled_energy_level(r.mass, r.energy_gamma, params)
    if lev > top * (1 + tol):
        raise PreconditionError("energy above the scale-invariant threshold")
    if r.mass < mass_cutoff(params) * (1 - tol):
        raise PreconditionError("mass below the low-frequency cutoff")
    n = gs.norms_Q(params)
    lhs = math.sqrt(2) * n.mass ** ((1 - s) / 2) * n.kinetic ** (s / 2)
    rhs = r.mass ** ((1 - s) / 2) * r.hdot1_gamma_sq ** (s / 2)
    scale_k = r.kinetic + r.lp1_norm_p1
    ks, ns = sign(r.virial_K, scale_k), sign(lhs - rhs, lhs)
    if ks == 0 or ns == 0:
        warnings.warn("sign in the zero band: insufficient resolution", RuntimeWarning, stacklevel=2)
    return SignCondition(ks, ns, r.virial_K, lhs - rhs)


def rescale(f: GridFunction, omega: float, params: Params) -> tuple[GridFunction, Params]:
    """f_s(x) = omega^{-1/(p-1)} f(omega^{-1/2} x) and gamma -> omega^{-1/2} gamma.

    The grid is stretched by sqrt(omega), so samples carry over exactly; a
    frequency-omega threshold state maps to the frequency-1 threshold.
    """
    if not omega > 0:
        raise PreconditionError("omega must be positive")
    spec = GridSpec(f.spec.half_width * math.sqrt(omega), f.spec.n_half)
    vals = omega ** (-1 / (params.p - 1)) * np.asarray(f.values)
    return GridFunction(spec, vals, f.even_hint), params.with_(gamma=params.gamma / math.sqrt(omega), omega=1.0)
