"""Modulation near the two-bump profile Q(|x| - y).

An even state close to the family e^{i theta} Q(|x| - y) is written as

    f = e^{i theta} (Q(|x| - y) + g),    g = rho G_{R,y} Q + h,

where (theta, y) are fixed by two orthogonality conditions against the right
bump cut off by chi_R^+, rho is the projection onto chi_R^+ (T_y Q)^p, and h
is the remainder.  G_{R,y}Q = chi_R Q(|x| - y) is the cut-off two-bump profile.
All pairings are trapezoid integrals on the grid; bump profiles and their
derivatives are sampled analytically.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import functionals as fn
from . import groundstate as gs
from .errors import DomainViolation, NoConvergence, PreconditionError, SpecMismatch
from .grid import GridFunction, GridSpec, derivative, half_line_derivative, integrate_values, kinetic
from .params import Params

REGIME_DIST = 0.1  # proximity below which the state counts as near the two-bump family
RATIO_CEILING = 1e3


# --- cutoffs ------------------------------------------------------------------

def chi(x, order: int = 0):
    """Quintic smoothstep cutoff: 0 for |x| <= 1/2, 1 for |x| >= 1 (order 0, 1 or 2)."""
    x = np.asarray(x, dtype=float)
    t = np.clip(2 * np.abs(x) - 1, 0.0, 1.0)
    if order == 0:
        out = t**3 * (10 - 15 * t + 6 * t * t)
    elif order == 1:
        out = 30 * t * t * (1 - t) ** 2 * 2 * np.sign(x)
    elif order == 2:
        out = 60 * t * (1 - t) * (1 - 2 * t) * 4
    else:
        raise ValueError("order must be 0, 1 or 2")
    return out if out.ndim else float(out)


def chi_R(x, R: float, order: int = 0):
    return chi(np.asarray(x) / R, order) / R**order


def chi_R_plus(x, R: float, order: int = 0):
    """chi_R restricted to x > 0 (smooth, since chi_R vanishes near the origin)."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, chi_R(x, R, order), 0.0)


def bump(x, y: float, params: Params, order: int = 0):
    """Q(|x| - y) and its derivatives away from x = 0."""
    x = np.asarray(x, dtype=float)
    s = np.abs(x) - y
    if order == 0:
        return gs.eval_Q(s, params)
    if order == 1:
        return np.sign(x) * gs.eval_Q_prime(s, params)
    return gs.eval_Q_second(s, params)


def right_bump(x, y: float, params: Params, order: int = 0):
    """T_y Q = Q(x - y) and its derivatives."""
    s = np.asarray(x, dtype=float) - y
    return [gs.eval_Q, gs.eval_Q_prime, gs.eval_Q_second][order](s, params)


def cut_bump(spec: GridSpec, R: float, y: float, params: Params) -> GridFunction:
    """G_{R,y} Q = chi_R Q(|x| - y)."""
    x = spec.x
    return GridFunction(spec, chi_R(x, R) * bump(x, y, params), even_hint=True)


def h1_inner(f: GridFunction, g: GridFunction) -> float:
    """Real H^1 inner product with forward differences (matches the functionals' kinetic term)."""
    h = f.spec.h
    df, dg = np.diff(f.values), np.diff(g.values)
    kin = np.sum(df.real * dg.real + df.imag * dg.imag) / h
    return float(kin + integrate_values(f.values.real * g.values.real + f.values.imag * g.values.imag, f.spec))


def h1_norm(f: GridFunction) -> float:
    return math.sqrt(max(kinetic(f) + fn.quadrature(f, 2), 0.0))


# --- proximity to the two-bump family -------------------------------------------

@dataclass(frozen=True)
class Proximity:
    dist: float
    theta0: float
    y0: float


def _profile_pairing(f: GridFunction, y: float, params: Params) -> tuple[complex, float]:
    """(<f, Q(|.|-y)>_{H^1} as a complex number, ||Q(|.|-y)||^2_{H^1})."""
    spec = f.spec
    q = bump(spec.x, y, params)
    dq = np.diff(q)
    df = np.diff(f.values)
    c = np.sum(df * dq) / spec.h + integrate_values(f.values * q, spec)
    nq = np.sum(dq * dq) / spec.h + integrate_values(q * q, spec)
    return complex(c), float(nq)


def proximity(f: GridFunction, params: Params, y_max: float | None = None, y_min: float = 0.0) -> Proximity:
    """min over (theta, y) of ||f - e^{i theta} Q(|.|-y)||_{H^1}.

    For fixed y the optimal phase is arg <f, Q(|.|-y)> in closed form, so only y
    is searched: a scan with step 10h over [y_min, L/2] followed by a bounded
    Brent refinement around the best scan point.  With y_min = 0 the family
    contains Q itself (y = 0); pass y_min = 2R for the distance to the
    modulation regime.
    """
    if not f.is_even(1e-9):
        raise PreconditionError("proximity needs even data")
    spec = f.spec
    nf = h1_norm(f) ** 2
    y_max = spec.half_width / 2 if y_max is None else y_max

    def d2(y: float) -> float:
        c, nq = _profile_pairing(f, y, params)
        return nf + nq - 2 * abs(c)

    step = 10 * spec.h
    ys = np.arange(y_min, y_max + step / 2, step)
    vals = np.array([d2(y) for y in ys])
    k = int(np.argmin(vals))
    lo, hi = ys[max(k - 1, 0)], ys[min(k + 1, ys.size - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(d2, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12, "maxiter": 200})
        y_best, v_best = (float(res.x), float(res.fun)) if res.fun < vals[k] else (float(ys[k]), float(vals[k]))
    else:
        y_best, v_best = float(ys[k]), float(vals[k])
    c, _ = _profile_pairing(f, y_best, params)
    theta = float(np.angle(c)) % (2 * math.pi)
    return Proximity(math.sqrt(max(v_best, 0.0)), theta, y_best)


# --- modulation decomposition -------------------------------------------------

@dataclass(frozen=True)
class ModulationState:
    theta_tilde: float
    y: float
    rho: float
    R: float
    g_norm_h1: float
    h_norm_h1: float
    ortho_residuals: tuple[float, float, float]
    mu_gamma: float
    e_gamma_y: float
    iterations: int = 0
    jacobian: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 0.0), (0.0, 0.0))
    g: GridFunction | None = field(default=None, repr=False, compare=False)
    h: GridFunction | None = field(default=None, repr=False, compare=False)

    CSV_FIELDS = ("theta_tilde", "y", "rho", "R", "g_norm_h1", "h_norm_h1",
                  "ortho_1", "ortho_2", "ortho_3", "mu_gamma", "e_gamma_y")

    def csv_row(self) -> list[float]:
        return [self.theta_tilde, self.y, self.rho, self.R, self.g_norm_h1, self.h_norm_h1,
                *self.ortho_residuals, self.mu_gamma, self.e_gamma_y]

    def reconstruct(self, params: Params) -> GridFunction:
        """e^{i theta~}(Q(|.|-y) + rho G_{R,y}Q + h); equals the decomposed state."""
        spec = self.h.spec
        core = bump(spec.x, self.y, params) + self.rho * cut_bump(spec, self.R, self.y, params).values
        return GridFunction(spec, np.exp(1j * self.theta_tilde) * (core + self.h.values))


class _Directions:
    """The cut-off right bump w = chi_R^+ T_y Q, v = w', the nonlinear direction and their y-derivatives."""

    def __init__(self, spec: GridSpec, R: float, y: float, params: Params):
        x = spec.x
        c0, c1 = (chi_R_plus(x, R, k) for k in range(2))
        q0, q1, q2 = (right_bump(x, y, params, k) for k in range(3))
        self.w = c0 * q0
        self.v = c1 * q0 + c0 * q1
        self.w_y = -c0 * q1
        self.v_y = -(c1 * q1 + c0 * q2)
        self.nl = c0 * q0**params.p
        self.norm_nl = c0 * c0 * q0 ** (params.p + 1)
        self.q_abs = bump(x, y, params)
        self.q_abs_y = -gs.eval_Q_prime(np.abs(x) - y, params)


def orthogonality(h: GridFunction, R: float, y: float, params: Params) -> tuple[float, float, float]:
    """The three pairings Im<h, chi_R^+ T_yQ>, Re<h, (chi_R^+ T_yQ)'>, Re<h, chi_R^+ (T_yQ)^p>."""
    d = _Directions(h.spec, R, y, params)
    v = h.values
    return (float(integrate_values(v.imag * d.w, h.spec)),
            float(integrate_values(v.real * d.v, h.spec)),
            float(integrate_values(v.real * d.nl, h.spec)))


def _equations(f: GridFunction, theta: float, y: float, R: float, params: Params):
    spec = f.spec
    d = _Directions(spec, R, y, params)
    rot = np.exp(-1j * theta) * f.values
    a_w = integrate_values(rot * d.w, spec)
    a_v = integrate_values(rot * d.v, spec)
    J = np.array([a_w.imag, a_v.real - integrate_values(d.q_abs * d.v, spec)])
    a_wy = integrate_values(rot * d.w_y, spec)
    a_vy = integrate_values(rot * d.v_y, spec)
    jac = np.array([
        [-a_w.real, a_wy.imag],
        [a_v.imag, a_vy.real - integrate_values(d.q_abs_y * d.v + d.q_abs * d.v_y, spec)],
    ])
    return J, jac, d, rot


def _require_regime(y: float, R: float):
    if not y > 2 * R:
        raise DomainViolation(f"translation y={y:.6g} left the domain y > 2R = {2 * R:.6g}")


def default_R(y0: float) -> float:
    return max(4.0, y0 / 4)


def solve_modulation(f: GridFunction, R: float, seed: Proximity | tuple[float, float], params: Params,
                     max_iter: int = 50, tol: float = 1e-13) -> ModulationState:
    """Newton iteration for (theta~, y), then rho, g and h.

    The Jacobian is the exact derivative of the discretized equations; at the
    unperturbed two-bump profile its diagonal is -int Q(|x|-y) chi_R^+ T_yQ and
    int Q'(|x|-y) (chi_R^+ T_yQ)', the entries the implicit-function argument uses.
    """
    theta, y = (seed.theta0, seed.y0) if isinstance(seed, Proximity) else seed
    theta, y = float(theta), float(y)
    _require_regime(y, R)
    spec = f.spec
    it = 0
    prev = math.inf
    while True:
        J, jac, d, rot = _equations(f, theta, y, R, params)
        try:
            delta = np.linalg.solve(jac, -J)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular modulation Jacobian at y={y:.6g}") from exc
        size = float(np.max(np.abs(delta)))
        if not math.isfinite(size) or (it > 3 and size > 10 * prev) or size > spec.half_width:
            raise NoConvergence(f"Newton step diverged (|step|={size:.3g}) at iteration {it}")
        theta += float(delta[0])
        y += float(delta[1])
        it += 1
        _require_regime(y, R)
        if size < tol * max(1.0, abs(y)):
            break
        if it >= max_iter:
            raise NoConvergence(f"no convergence in {max_iter} Newton iterations (last step {size:.3g})")
        prev = size
    J, jac, d, rot = _equations(f, theta, y, R, params)
    g_vals = rot - d.q_abs
    rho = float(integrate_values(g_vals.real * d.nl, spec) / integrate_values(d.norm_nl, spec))
    g = GridFunction(spec, g_vals, even_hint=f.even_hint)
    h = GridFunction(spec, g_vals - rho * cut_bump(spec, R, y, params).values, even_hint=f.even_hint)
    ortho = orthogonality(h, R, y, params)
    hn = h1_norm(h)
    if max(abs(o) for o in ortho) > 1e-8 * max(1.0, hn):
        warnings.warn(f"orthogonality residuals {ortho} above 1e-8", RuntimeWarning, stacklevel=2)
    mu = fn.report(f, params).mu_gamma
    return ModulationState(theta % (2 * math.pi), y, rho, R, h1_norm(g), hn, ortho, mu,
                           float(gs.e_gamma(y, params)), it,
                           ((float(jac[0, 0]), float(jac[0, 1])), (float(jac[1, 0]), float(jac[1, 1]))), g, h)


def modulate(f: GridFunction, params: Params, R: float | None = None) -> tuple[Proximity, ModulationState | None]:
    """Proximity, then the decomposition when the state is in the modulation regime."""
    prox = proximity(f, params)
    R = default_R(prox.y0) if R is None else R
    if prox.dist >= REGIME_DIST or prox.y0 <= 2 * R:
        return prox, None
    return prox, solve_modulation(f, R, prox, params)


def plant(spec: GridSpec, theta: float, y: float, rho: float, R: float, params: Params,
          extra: GridFunction | None = None) -> tuple[GridFunction, GridFunction]:
    """Forward construction e^{i theta}(Q(|.|-y) + rho G_{R,y}Q + h).

    ``extra`` is made orthogonal to the three modulation directions (Gram-Schmidt
    in the real L^2 pairing) before it is added; the returned h is that projection.
    """
    x = spec.x
    h = np.zeros(spec.size, dtype=complex) if extra is None else project_out(extra, R, y, params).values
    vals = bump(x, y, params) + rho * cut_bump(spec, R, y, params).values + h
    return GridFunction(spec, np.exp(1j * theta) * vals), GridFunction(spec, h)


def project_out(v: GridFunction, R: float, y: float, params: Params) -> GridFunction:
    """Remove the components along i w, v = w' and the nonlinear direction (real L^2 pairing)."""
    spec = v.spec
    d = _Directions(spec, R, y, params)
    basis = [1j * d.w, d.v.astype(complex), d.nl.astype(complex)]

    def pair(a, b):
        return float(integrate_values(a.real * b.real + a.imag * b.imag, spec))

    ortho: list[np.ndarray] = []
    for b in basis:
        e = b.copy()
        for o in ortho:
            e = e - pair(e, o) * o
        ortho.append(e / math.sqrt(pair(e, e)))
    out = np.array(v.values)
    for _ in range(2):  # second pass removes the rounding left by the first
        for o in ortho:
            out = out - pair(out, o) * o
    if v.even_hint:
        # the directions live on x > R/2, so mirroring the right half keeps the pairings
        c = spec.center
        out[:c] = out[c + 1:][::-1]
    return GridFunction(spec, out, v.even_hint)


def mass_identity(state: ModulationState, params: Params) -> tuple[float, float]:
    """Both sides of the mass bookkeeping of the decomposition.

    4 Re int_0^inf Q(x-y) h  versus  2 int_{-inf}^0 Q(x-y)^2 - 4 rho int_0^inf chi_R Q(x-y)^2 - ||g||^2,
    which agree when M(f) = 2M(Q).
    """
    spec = state.h.spec
    x = spec.x
    q = bump(x, state.y, params)
    # integrands are even, so half-line integrals are halves of full-line ones
    lhs = 2 * float(integrate_values(q * state.h.values.real, spec))
    tail = -gs.mass_tail(state.y, params)
    cut = 0.5 * float(integrate_values(chi_R(x, state.R) * q * q, spec))
    rhs = 2 * tail - 4 * state.rho * cut - fn.quadrature(state.g, 2)
    return lhs, rhs


# --- coercivity forms -------------------------------------------------------------

def _check_same(f: GridFunction, g: GridFunction):
    if f.spec != g.spec:
        raise SpecMismatch("forms need both functions on the same grid")


def phi_form(f: GridFunction, g: GridFunction, params: Params) -> float:
    """Re int f'g' + f g - Q^{p-1}(p f1 g1 + f2 g2) over the line (fourth-order derivatives)."""
    _check_same(f, g)
    spec = f.spec
    df, dg = derivative(f.values, spec.h), derivative(g.values, spec.h)
    w = gs.eval_Q(spec.x, params) ** (params.p - 1)
    a, b = f.values, g.values
    dens = (df.real * dg.real + df.imag * dg.imag + a.real * b.real + a.imag * b.imag
            - w * (params.p * a.real * b.real + a.imag * b.imag))
    return float(integrate_values(dens, spec))


def b_form(y: float, f: GridFunction, g: GridFunction, params: Params) -> float:
    """Same density with weight Q(x-y)^{p-1}, integrated over x > 0 (one-sided derivatives at 0)."""
    _check_same(f, g)
    spec = f.spec
    c = spec.center
    x = spec.x[c:]
    a, b = f.values[c:], g.values[c:]
    da, db = half_line_derivative(a, spec.h), half_line_derivative(b, spec.h)
    w = gs.eval_Q(x - y, params) ** (params.p - 1)
    dens = (da.real * db.real + da.imag * db.imag + a.real * b.real + a.imag * b.imag
            - w * (params.p * a.real * b.real + a.imag * b.imag))
    wts = np.full(x.size, spec.h)
    wts[0] = wts[-1] = spec.h / 2
    return float(np.sum(wts * dens))


@dataclass(frozen=True)
class CoercivityProbe:
    c_min: float
    c_median: float
    samples: int


def coercivity_probe(spec: GridSpec, params: Params, n: int = 100, seed: int = 0) -> CoercivityProbe:
    """Random smooth f projected off {iQ, Q', Q^p}; reports min Phi(f,f)/||f||^2_{H^1}.

    These three directions are mutually orthogonal in the real L^2 pairing
    (parity and real/imaginary splitting), so one projection pass suffices.
    """
    rng = np.random.default_rng(seed)
    x = spec.x
    q = gs.eval_Q(x, params)
    dirs = [1j * q, gs.eval_Q_prime(x, params) + 0j, q**params.p + 0j]

    def pair(a, b):
        return float(integrate_values(a.real * b.real + a.imag * b.imag, spec))

    ratios = []
    for _ in range(n):
        k = rng.integers(1, 5)
        vals = np.zeros(spec.size, dtype=complex)
        for _ in range(k):
            amp = rng.normal() + 1j * rng.normal()
            c = rng.uniform(-4, 4)
            s = rng.uniform(0.4, 2.5)
            vals += amp * np.exp(-((x - c) / s) ** 2)
        for d in dirs:
            vals = vals - pair(vals, d) / pair(d, d) * d
        f = GridFunction(spec, vals, even_hint=False)
        ratios.append(phi_form(f, f, params) / (h1_norm(f) ** 2))
    r = np.array(ratios)
    return CoercivityProbe(float(r.min()), float(np.median(r)), n)


# --- estimate chain along a trajectory -------------------------------------------

@dataclass(frozen=True)
class ChainRow:
    t: float
    in_regime: bool
    dist: float
    state: ModulationState | None
    theta_tilde: float
    phase_drift: float  # theta = theta~ - t; its derivative
    y: float
    rho: float
    mu_gamma: float
    rho_over_mu: float
    e_over_mu2: float
    h2_over_mu2: float
    ydot_over_mu: float
    rhodot_over_mu: float
    thetadot_over_mu: float
    ydot: float
    rhodot: float
    ortho_max: float

    HEADER = ("t", "in_regime", "dist", "theta_tilde", "theta_dot", "y", "rho", "mu_gamma",
              "rho_over_mu", "e_over_mu2", "h2_over_mu2", "ydot_over_mu", "rhodot_over_mu",
              "thetadot_over_mu", "ydot", "rhodot", "ortho_max")

    def csv_row(self) -> list:
        return [self.t, int(self.in_regime), self.dist, self.theta_tilde, self.phase_drift, self.y,
                self.rho, self.mu_gamma, self.rho_over_mu, self.e_over_mu2, self.h2_over_mu2,
                self.ydot_over_mu, self.rhodot_over_mu, self.thetadot_over_mu, self.ydot, self.rhodot,
                self.ortho_max]


@dataclass
class EstimateChain:
    rows: list[ChainRow]
    R: float

    RATIOS = ("rho_over_mu", "e_over_mu2", "h2_over_mu2", "ydot_over_mu", "rhodot_over_mu", "thetadot_over_mu")

    @property
    def regime_rows(self) -> list[ChainRow]:
        return [r for r in self.rows if r.in_regime]

    @property
    def regime_exits(self) -> int:
        flags = [r.in_regime for r in self.rows]
        return sum(1 for a, b in zip(flags, flags[1:]) if a and not b)

    def max_ratios(self) -> dict[str, float]:
        out = {}
        for name in self.RATIOS:
            vals = [getattr(r, name) for r in self.regime_rows if math.isfinite(getattr(r, name))]
            out[name] = float(max(vals)) if vals else math.nan
        return out

    def bounded(self, ceiling: float = RATIO_CEILING) -> bool:
        rows = self.regime_rows
        if not rows:
            return False
        for name in self.RATIOS:
            vals = [getattr(r, name) for r in rows]
            if not all(math.isfinite(v) or math.isnan(v) for v in vals):
                return False
            finite = [v for v in vals if math.isfinite(v)]
            if finite and max(finite) >= ceiling:
                return False
        return True


def _safe_ratio(a: float, b: float) -> float:
    return abs(a) / abs(b) if b != 0 else (0.0 if a == 0 else math.inf)


def estimate_chain_states(times, states, params: Params, R: float | None = None) -> EstimateChain:
    """Modulate each state (seeded by proximity) and tabulate the estimate-chain ratios.

    Time derivatives are centered differences over consecutive in-regime samples
    (one-sided at the ends of a regime window); the phase drift is that of
    theta = theta~ - t, with theta~ unwrapped.
    """
    mods: list[tuple[float, Proximity, ModulationState | None]] = []
    for t, f in zip(times, states):
        prox = proximity(f, params)
        r_use = default_R(prox.y0) if R is None else R
        st = None
        if prox.dist < REGIME_DIST and prox.y0 > 2 * r_use:
            try:
                st = solve_modulation(f, r_use, prox, params)
            except (NoConvergence, DomainViolation):
                st = None
        mods.append((float(t), prox, st))
    n = len(mods)
    ts = np.array([m[0] for m in mods])
    ydot = np.full(n, math.nan)
    rdot = np.full(n, math.nan)
    tdot = np.full(n, math.nan)
    k = 0
    while k < n:
        if mods[k][2] is None:
            k += 1
            continue
        j = k
        while j + 1 < n and mods[j + 1][2] is not None:
            j += 1
        if j > k:
            seg = slice(k, j + 1)
            tt = ts[seg]
            yy = np.array([mods[i][2].y for i in range(k, j + 1)])
            rr = np.array([mods[i][2].rho for i in range(k, j + 1)])
            th = np.unwrap(np.array([mods[i][2].theta_tilde for i in range(k, j + 1)]))
            ydot[seg] = np.gradient(yy, tt)
            rdot[seg] = np.gradient(rr, tt)
            tdot[seg] = np.gradient(th, tt) - 1.0
        k = j + 1
    rows = []
    for i, (t, prox, st) in enumerate(mods):
        if st is None:
            rows.append(ChainRow(t, False, prox.dist, None, math.nan, math.nan, prox.y0, math.nan, math.nan,
                                 math.nan, math.nan, math.nan, math.nan, math.nan, math.nan,
                                 math.nan, math.nan, math.nan))
            continue
        mu = st.mu_gamma
        rows.append(ChainRow(
            t, True, prox.dist, st, st.theta_tilde, float(tdot[i]), st.y, st.rho, mu,
            _safe_ratio(st.rho, mu), _safe_ratio(st.e_gamma_y, mu * mu), _safe_ratio(st.h_norm_h1**2, mu * mu),
            _safe_ratio(ydot[i], mu) if math.isfinite(ydot[i]) else math.nan,
            _safe_ratio(rdot[i], mu) if math.isfinite(rdot[i]) else math.nan,
            _safe_ratio(tdot[i], mu) if math.isfinite(tdot[i]) else math.nan,
            float(ydot[i]), float(rdot[i]), max(abs(o) for o in st.ortho_residuals)))
    r_report = R if R is not None else (rows[0].state.R if rows and rows[0].state else math.nan)
    return EstimateChain(rows, r_report)


def estimate_chain(traj, params: Params | None = None, R: float | None = None) -> EstimateChain:
    """Estimate chain over the stored states of a trajectory."""
    params = traj.params if params is None else params
    if len(traj.states) < 3:
        raise PreconditionError("estimate chain needs stored states; evolve with keep_states_every=1")
    times = [t for t, _ in traj.states]
    states = [s for _, s in traj.states]
    return estimate_chain_states(times, states, params, R)
