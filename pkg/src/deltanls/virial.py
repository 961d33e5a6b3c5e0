"""Virial and localized virial quantities.

The localized weight is R^2 phi(x/R) with phi(x) = x^2 on |x| <= 1, 0 on |x| >= 2,
and on 1 <= |x| <= 2 the blend x^2 S(2 - |x|) with S the order-8 smoothstep.
It matches both sides up to the eighth derivative, so phi'''' is C^4 across the
joins and the trapezoid rule stays high order on the band integrals.  The
blend is evaluated in factored form, which makes the matching at the joins
exact instead of relying on large monomial coefficients cancelling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import functionals as fn
from .errors import InsufficientSamples, PreconditionError
from .grid import GridFunction, derivative, integrate_values
from .params import Params


_ORDER = 8  # smoothstep order m


def _smoothstep(t: np.ndarray, n: int) -> np.ndarray:
    """n-th derivative of S(t) = t^{m+1} sum_k C(m+k, k)(1-t)^k, S' = c t^m (1-t)^m."""
    m = _ORDER
    if n == 0:
        return t ** (m + 1) * sum(math.comb(m + k, k) * (1 - t) ** k for k in range(m + 1))
    c = math.factorial(2 * m + 1) / math.factorial(m) ** 2
    j = n - 1  # Leibniz on t^m (1-t)^m, each factor evaluated as a power
    out = np.zeros_like(t)
    for i in range(min(j, m) + 1):
        if j - i > m:
            continue
        a = math.perm(m, i) * t ** (m - i)
        b = (-1) ** (j - i) * math.perm(m, j - i) * (1 - t) ** (m - j + i)
        out = out + math.comb(j, i) * a * b
    return c * out


def _blend(s: np.ndarray, n: int) -> np.ndarray:
    """n-th derivative of P(s) = (1+s)^2 S(1-s) on 0 <= s <= 1."""
    g = [(1 + s) ** 2, 2 * (1 + s), 2 * np.ones_like(s)]
    out = np.zeros_like(s)
    for k in range(min(n, 2) + 1):
        out = out + math.comb(n, k) * g[k] * (-1) ** (n - k) * _smoothstep(1 - s, n - k)
    return out


def phi(x, order: int = 0):
    """order-th derivative of the even cutoff profile phi (order 0..4)."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    sgn = np.where(x < 0, -1.0, 1.0) if order % 2 else 1.0
    inner = [ax**2, 2 * ax, 2 * np.ones_like(ax), np.zeros_like(ax), np.zeros_like(ax)][order]
    blend = _blend(np.clip(ax - 1.0, 0.0, 1.0), order)
    out = np.where(ax <= 1, inner, np.where(ax < 2, blend, 0.0)) * sgn
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class VirialSample:
    t: float
    J: float
    J_R: float
    dJ_dt: float
    dJR_dt: float
    K_gamma: float
    A_R: float
    F_R: float
    R: float
    K_scale: float  # sum of the absolute sizes of the three pieces of K_gamma

    FIELDS = ("J", "J_R", "dJ_dt", "dJR_dt", "K_gamma", "A_R", "F_R")


def virial_quantities(u: GridFunction, R: float, params: Params, t: float = float("nan"),
                      linear: bool = False) -> VirialSample:
    """J, J_R, their time derivatives from the momentum formulas, K_gamma and the remainder A_R.

    With ``linear`` the L^{p+1} contributions are dropped, which is the identity
    for the linear flow.
    """
    if not R > 0:
        raise PreconditionError("R must be positive")
    spec = u.spec
    x, h = spec.x, spec.h
    v = np.asarray(u.values)
    dens = v.real**2 + v.imag**2
    du = derivative(v, h)
    mom = np.imag(du * np.conj(v))
    s = x / R
    J = float(integrate_values(x**2 * dens, spec))
    J_R = float(integrate_values(R**2 * phi(s) * dens, spec))
    dJ = float(4 * integrate_values(x * mom, spec))
    dJR = float(2 * R * integrate_values(phi(s, 1) * mom, spec))
    p = params.p
    nl = 0.0 if linear else (p - 1) / (2 * (p + 1))
    r = fn.report(u, params)
    K = r.kinetic - params.gamma / 2 * r.delta_point - nl * r.lp1_norm_p1
    K_scale = r.kinetic + abs(params.gamma) / 2 * r.delta_point + nl * r.lp1_norm_p1
    outer = np.abs(x) > R
    band = (np.abs(x) > R) & (np.abs(x) < 2 * R)
    grad2 = du.real**2 + du.imag**2
    w = (2 - phi(s, 2)) * (grad2 - nl * dens ** ((p + 1) / 2))
    A = float(-4 * integrate_values(np.where(outer, w, 0.0), spec)
              - integrate_values(np.where(band, phi(s, 4) * dens, 0.0), spec) / R**2)
    return VirialSample(t, J, J_R, dJ, dJR, K, A, 8 * K + A, R, K_scale)


@dataclass(frozen=True)
class IdentityResidual:
    max_first_order: float
    max_second_order: float
    samples: int


def virial_identity_residual(samples, R: float | None = None, t_max: float | None = None) -> IdentityResidual:
    """Centered differences of J_R and dJR/dt against dJR/dt and F_R.

    ``samples`` is a list of VirialSample (or a Trajectory carrying them).  The
    first-order residual is normalized by max|dJR/dt| + max|J_R|/T over the
    window, the second-order one by max|F_R| + 8 max(size of the pieces of K_gamma),
    so that near-stationary runs (F_R ~ 0) are not divided by zero.
    """
    seq = getattr(samples, "virial", samples)
    if R is not None:
        seq = [s for s in seq if s.R == R]
    if t_max is not None:
        seq = [s for s in seq if abs(s.t) <= abs(t_max)]
    if len(seq) < 5:
        raise InsufficientSamples(f"need at least 5 samples, got {len(seq)}")
    t = np.array([s.t for s in seq])
    jr = np.array([s.J_R for s in seq])
    d1 = np.array([s.dJR_dt for s in seq])
    F = np.array([s.F_R for s in seq])
    ks = np.array([s.K_scale for s in seq])
    span = abs(t[-1] - t[0])
    fd1 = (jr[2:] - jr[:-2]) / (t[2:] - t[:-2])
    fd2 = (d1[2:] - d1[:-2]) / (t[2:] - t[:-2])
    s1 = np.max(np.abs(d1)) + np.max(np.abs(jr)) / span
    s2 = np.max(np.abs(F)) + 8 * np.max(ks)
    r1 = float(np.max(np.abs(fd1 - d1[1:-1])) / s1)
    r2 = float(np.max(np.abs(fd2 - F[1:-1])) / s2)
    return IdentityResidual(r1, r2, len(seq))


@dataclass(frozen=True)
class MomentumCheck:
    lhs: float
    rhs_scale: float
    ratio: float
    ratio_sq: float
    mu_gamma: float


def weighted_momentum_check(u: GridFunction, phi_prime, params: Params, tol: float = 1e-4) -> MomentumCheck:
    """|Im integral phi' u' conj(u)| against mu_gamma^2 integral |phi'|^2 |u|^2.

    ``ratio`` is lhs / (mu^2 W) as literally stated; ``ratio_sq`` is lhs^2 / (mu^2 W),
    the form that the Cauchy-Schwarz argument controls.
    """
    if not u.is_even(1e-9):
        raise PreconditionError("weighted momentum check needs even data")
    dm, de = fn.me_residual(u, params)
    if max(dm, de) > tol:
        raise PreconditionError(f"not on the threshold (rel. residuals {dm:.2e}, {de:.2e})")
    spec = u.spec
    v = np.asarray(u.values)
    wp = np.asarray(phi_prime(spec.x), dtype=float)
    du = derivative(v, spec.h)
    lhs = abs(float(integrate_values(wp * np.imag(du * np.conj(v)), spec)))
    W = float(integrate_values(wp**2 * np.abs(v) ** 2, spec))
    mu = fn.report(u, params).mu_gamma
    rhs = mu**2 * W
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    ratio_sq = lhs**2 / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return MomentumCheck(lhs, rhs, ratio, ratio_sq, mu)
