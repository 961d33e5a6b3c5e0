"""Ground states, their norms, and the soliton-delta interaction potential.

The free ground state is the explicit profile
``Q(x) = c_p (e^{ax} + e^{-ax})^{-1/a}`` with ``a = (p-1)/2``; it solves
``-Q'' + Q = Q^p``.  With the delta potential, the frequency-omega ground state
is a translated, reflected and rescaled copy of Q, defined only when
``omega > gamma^2/4``.

For large separations y, the potential ``script_Q(y)`` (interaction between a
bump at distance y and the repulsive delta) is computed in two independent ways:

* term by term by adaptive quadrature (:func:`lemma_terms`), and
* in closed form (:func:`script_Q`).  Q's first integral ``Q'^2 = Q^2 - 2Q^{p+1}/(p+1)``
  and ``(QQ')' = Q'^2 + Q^2 - Q^{p+1}`` reduce the two tail integrals to a
  boundary term plus the Q^{p+1} tail, which is summed as a series in e^{-(p-1)y}.
  The closed form avoids the catastrophic cancellation of the degenerate
  coupling gamma = -2, where all retained expansion terms vanish.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import DomainError
from .params import Params

QUAD_TOL = 1e-13


def _tanh_sech2(z):
    t = np.tanh(z)
    return t, 1.0 - t * t


def eval_Q(x, params: Params):
    """Free ground state, in the overflow-safe form c_p e^{-|x|} (1+e^{-2a|x|})^{-1/a}."""
    a = params.alpha
    ax = np.abs(np.asarray(x, dtype=float))
    out = params.c_p * np.exp(-ax) * (1.0 + np.exp(-2 * a * ax)) ** (-1.0 / a)
    return out if out.ndim else float(out)


def eval_Q_prime(x, params: Params):
    """Q'(x) = -tanh(a x) Q(x)."""
    x = np.asarray(x, dtype=float)
    out = -np.tanh(params.alpha * x) * eval_Q(x, params)
    return out if out.ndim else float(out)


def eval_Q_second(x, params: Params):
    """Q''(x) = (tanh^2(a x) - a sech^2(a x)) Q(x)."""
    x = np.asarray(x, dtype=float)
    t, s2 = _tanh_sech2(params.alpha * x)
    out = (t * t - params.alpha * s2) * eval_Q(x, params)
    return out if out.ndim else float(out)


def Q_at_zero(params: Params) -> float:
    return ((params.p + 1) / 2) ** (1 / (params.p - 1))


def attained_shift(params: Params) -> float:
    """Argument offset (2/(p-1)) artanh(gamma/(2 sqrt(omega))) of the attained ground state."""
    w, g = params.omega, params.gamma
    if not w > g * g / 4:
        raise DomainError(
            f"no even ground state: omega={w} <= gamma^2/4={g * g / 4}; the minimal action is not attained"
        )
    return math.atanh(g / (2 * math.sqrt(w))) / params.alpha


def eval_Q_omega_gamma(x, params: Params):
    """omega^{1/(p-1)} Q(sqrt(omega)|x| + shift); DomainError when omega <= gamma^2/4."""
    xi = attained_shift(params)
    w = params.omega
    arg = math.sqrt(w) * np.abs(np.asarray(x, dtype=float)) + xi
    out = w ** (1 / (params.p - 1)) * eval_Q(arg, params)
    return out if np.ndim(out) else float(out)


def eval_Q_omega_gamma_prime(x, params: Params):
    """Derivative away from the origin (one-sided limits at 0 via sign(0)=0 are not used)."""
    xi = attained_shift(params)
    w = params.omega
    x = np.asarray(x, dtype=float)
    arg = math.sqrt(w) * np.abs(x) + xi
    out = w ** (1 / (params.p - 1)) * math.sqrt(w) * np.sign(x) * eval_Q_prime(arg, params)
    return out if out.ndim else float(out)


def eval_Q_omega_gamma_second(x, params: Params):
    xi = attained_shift(params)
    w = params.omega
    arg = math.sqrt(w) * np.abs(np.asarray(x, dtype=float)) + xi
    out = w ** (1 / (params.p - 1)) * w * eval_Q_second(arg, params)
    return out if np.ndim(out) else float(out)


def attained_residuals(params: Params, h: float = 1e-3, half_width: float = 20.0) -> tuple[float, float]:
    """Pointwise residuals of the stationary equation for the attained ground state.

    Returns (max over grid nodes x != 0 of |-f'' + omega f - f^p|,
    |f'(0+) - f'(0-) + gamma f(0)|), both from analytic derivatives.
    """
    n = int(round(half_width / h))
    x = np.arange(1, n + 1) * h
    f = eval_Q_omega_gamma(x, params)
    f2 = eval_Q_omega_gamma_second(x, params)
    interior = float(np.max(np.abs(-f2 + params.omega * f - f ** params.p)))
    w = params.omega
    xi = attained_shift(params)
    right = w ** (1 / (params.p - 1)) * math.sqrt(w) * eval_Q_prime(xi, params)
    jump = abs(2 * right + params.gamma * eval_Q_omega_gamma(0.0, params))
    return interior, jump


@dataclass(frozen=True)
class QNorms:
    mass: float
    kinetic: float
    lp1: float
    p: float

    @property
    def energy(self) -> float:
        """E(Q) = ||Q'||^2/2 - ||Q||_{p+1}^{p+1}/(p+1)."""
        return 0.5 * self.kinetic - self.lp1 / (self.p + 1)

    @property
    def action(self) -> float:
        """S_{1,0}(Q) = E(Q) + M(Q)/2."""
        return self.energy + 0.5 * self.mass

    def pohozaev_residual(self) -> float:
        return self.kinetic - (self.p - 1) / (2 * (self.p + 1)) * self.lp1

    def nehari_residual(self) -> float:
        return self.kinetic + self.mass - self.lp1


def _half_line(fn) -> float:
    # Q decays like e^{-x}; split so QUADPACK sees the peak and the tail separately
    a, _ = integrate.quad(fn, 0.0, 5.0, epsabs=1e-15, epsrel=QUAD_TOL, limit=200)
    b, _ = integrate.quad(fn, 5.0, np.inf, epsabs=1e-15, epsrel=QUAD_TOL, limit=200)
    return a + b


@lru_cache(maxsize=32)
def _norms_cached(p: float) -> QNorms:
    pr = Params(p=p, gamma=0.0)
    mass = 2 * _half_line(lambda x: eval_Q(x, pr) ** 2)
    kin = 2 * _half_line(lambda x: eval_Q_prime(x, pr) ** 2)
    lp1 = 2 * _half_line(lambda x: eval_Q(x, pr) ** (p + 1))
    return QNorms(mass=mass, kinetic=kin, lp1=lp1, p=p)


def norms_Q(params: Params) -> QNorms:
    """||Q||^2, ||Q'||^2 and ||Q||^{p+1}_{p+1} by adaptive quadrature."""
    return _norms_cached(float(params.p))


def gamma_of_y(y, params: Params):
    """Coupling -2Q'(-y)/Q(-y) = -2 tanh(a y) for which Q(|x|-y) is stationary."""
    out = -2.0 * np.tanh(params.alpha * np.asarray(y, dtype=float))
    return out if np.ndim(out) else float(out)


def e_gamma(y, params: Params):
    """Size function of the modulation estimates: e^{-2y} (gamma<-2) or e^{-(p+1)y} (gamma=-2)."""
    y = np.asarray(y, dtype=float)
    out = np.exp(-(params.p + 1) * y) if is_degenerate(params) else np.exp(-2 * y)
    return out if out.ndim else float(out)


def is_degenerate(params: Params) -> bool:
    return math.isclose(params.gamma, -2.0, rel_tol=0, abs_tol=1e-12)


# --- tails for large separation ------------------------------------------------

def _scaled_tail(fn_scaled, y: float) -> float:
    """integral_0^inf fn_scaled(s) ds where fn_scaled is O(1) (the e^{-ky} factor removed)."""
    return _half_line(fn_scaled)


def _Q_shift_scaled(s, y, params: Params):
    # e^{y} Q(y+s), finite for any y >= 0
    a = params.alpha
    return params.c_p * np.exp(-s) * (1.0 + np.exp(-2 * a * (y + s))) ** (-1.0 / a)


def kinetic_tail(y: float, params: Params) -> float:
    """-integral_{-inf}^0 |Q'(x-y)|^2 dx."""
    a = params.alpha
    v = _scaled_tail(lambda s: (np.tanh(a * (y + s)) * _Q_shift_scaled(s, y, params)) ** 2, y)
    return -v * math.exp(-2 * y)


def mass_tail(y: float, params: Params) -> float:
    """-integral_{-inf}^0 Q(x-y)^2 dx."""
    v = _scaled_tail(lambda s: _Q_shift_scaled(s, y, params) ** 2, y)
    return -v * math.exp(-2 * y)


def delta_point_term(y: float, params: Params) -> float:
    """(|gamma|/2) Q(-y)^2."""
    return abs(params.gamma) / 2 * eval_Q(y, params) ** 2


def jump_square_term(y: float, params: Params) -> float:
    """-(1/(2|gamma|)) (|gamma| Q(-y) - 2 Q'(-y))^2, using Q'(-y) = tanh(a y) Q(y)."""
    g = abs(params.gamma)
    t = math.tanh(params.alpha * y)
    return -(eval_Q(y, params) ** 2) * (g - 2 * t) ** 2 / (2 * g)


def tail_term(y: float, params: Params) -> float:
    """(2/(p+1)) integral_{-inf}^0 Q(x-y)^{p+1} dx."""
    p = params.p
    v = _scaled_tail(lambda s: _Q_shift_scaled(s, y, params) ** (p + 1), y)
    return 2 / (p + 1) * v * math.exp(-(p + 1) * y)


def script_Q_quadrature(y: float, params: Params) -> float:
    """Sum of the four quadratures defining the interaction potential."""
    return (kinetic_tail(y, params) + mass_tail(y, params)
            + delta_point_term(y, params) + jump_square_term(y, params))


def _binomial_series(params: Params, q: float):
    """S0 = (1+q)^{-s} and D = sum_{k>=1} b_k q^k 2ak/(p+1+2ak), b_k = binom(-s, k), s=(p+1)/a."""
    p, a = params.p, params.alpha
    s = (p + 1) / a
    s0 = (1.0 + q) ** (-s)
    b, qk, d = 1.0, 1.0, 0.0
    for k in range(1, 400):
        b *= (-s - k + 1) / k
        qk *= q
        term = b * qk * 2 * a * k / (p + 1 + 2 * a * k)
        d += term
        if abs(term) <= 1e-18 * abs(d):
            break
    return s0, d


def script_Q(y: float, params: Params) -> float:
    """Interaction potential script_Q(y) for the repulsive coupling gamma < 0.

    Exact reduction: script_Q = T Q(y)^2 (1 - 2T/|gamma|) - integral_y^inf Q^{p+1},
    with T = tanh(a y).  For q = e^{-(p-1)y} < 1/2 this equals
    c_p^2 e^{-2y} [A(1-q)^2 S0 + 2q D - 2q^2 S0] with A = 1 - 2/|gamma|, and every
    term is evaluated without cancellation; otherwise the reduced form is used directly.
    """
    if not y > 0:
        raise DomainError("script_Q needs y > 0")
    if not params.gamma < 0:
        raise DomainError("script_Q needs gamma < 0")
    p, a, c = params.p, params.alpha, params.c_p
    g = abs(params.gamma)
    q = math.exp(-2 * a * y)
    if q < 0.5:
        s0, d = _binomial_series(params, q)
        A = 1 - 2 / g
        return c * c * math.exp(-2 * y) * (A * (1 - q) ** 2 * s0 + 2 * q * d - 2 * q * q * s0)
    t = math.tanh(a * y)
    return t * eval_Q(y, params) ** 2 * (1 - 2 * t / g) - (p + 1) / 2 * tail_term(y, params)


# --- expansions ---------------------------------------------------------------

def script_Q_leading(y: float, params: Params) -> float:
    return (1 - 2 / abs(params.gamma)) * params.c_p**2 * math.exp(-2 * y)


def script_Q_two_term(y: float, params: Params) -> float:
    p, g = params.p, abs(params.gamma)
    second = 4 * p * (g - 2) / (g * (p - 1)) * params.c_p**2 * math.exp(-(p + 1) * y)
    return script_Q_leading(y, params) - second


def _expansions(y: float, params: Params) -> dict[str, float]:
    p, a, c2, g = params.p, params.alpha, params.c_p**2, abs(params.gamma)
    e2, ep = math.exp(-2 * y), math.exp(-(p + 1) * y)
    return {
        "kinetic_tail": -c2 / 2 * e2 + 2 * p * c2 / (a * (p + 1)) * ep,
        "mass_tail": -c2 / 2 * e2 + 2 * c2 / (a * (p + 1)) * ep,
        "delta_point": g / 2 * c2 * e2 - g * c2 / a * ep,
        "jump_square": -(g - 2) ** 2 / (2 * g) * c2 * e2 - (g - 2) / g * (2 * p - g) / a * c2 * ep,
        "tail": 4 * c2 / (p + 1) * ep,
        "script_Q": script_Q_two_term(y, params),
    }


@dataclass(frozen=True)
class TermCheck:
    """Quadrature value of one expansion term next to its two-term formula.

    ``rel_error`` divides by max(|exact|, c_p^2 e^{-(p+1)y}): the expansions claim
    an error o(e^{-(p+1)y}), so this is the meaningful scale even when both
    retained coefficients vanish (gamma = -2).
    """

    name: str
    exact: float
    formula: float
    rel_error: float


def lemma_terms(y: float, params: Params) -> dict[str, TermCheck]:
    """The four pieces of script_Q, the L^{p+1} tail, and script_Q itself, checked against formulas."""
    params.require_supercritical()
    exact = {
        "kinetic_tail": kinetic_tail(y, params),
        "mass_tail": mass_tail(y, params),
        "delta_point": delta_point_term(y, params),
        "jump_square": jump_square_term(y, params),
        "tail": tail_term(y, params),
        "script_Q": script_Q(y, params),
    }
    scale = params.c_p**2 * math.exp(-(params.p + 1) * y)
    out = {}
    for name, f in _expansions(y, params).items():
        e = exact[name]
        out[name] = TermCheck(name, e, f, abs(e - f) / max(abs(e), scale))
    return out


@dataclass(frozen=True)
class AsymptoticReport:
    y: float
    exact: float
    leading: float
    two_term: float
    rel_error_leading: float
    rel_error_two_term: float

    HEADER = ("y", "exact", "leading", "two_term", "rel_error_leading", "rel_error_two_term")

    def row(self) -> tuple[float, ...]:
        return tuple(getattr(self, k) for k in self.HEADER)


def script_Q_asymptotic(y: float, params: Params) -> AsymptoticReport:
    exact = script_Q(y, params)
    lead = script_Q_leading(y, params)
    two = script_Q_two_term(y, params)
    if exact != 0:
        r1, r2 = abs(exact - lead) / abs(exact), abs(exact - two) / abs(exact)
    else:
        r1 = r2 = float("nan")
    return AsymptoticReport(y, exact, lead, two, r1, r2)
