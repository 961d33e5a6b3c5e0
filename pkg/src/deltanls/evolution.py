"""Time stepping for i u_t + u_xx + gamma delta u + |u|^{p-1} u = 0.

One step is Strang splitting: half an exact nonlinear phase rotation, a
Crank-Nicolson solve with the discrete delta operator, another half rotation.
The Crank-Nicolson factor is a Cayley transform of a real symmetric matrix, so
the discrete L^2 norm is conserved up to the linear-solve rounding.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import lapack

from . import functionals as fn
from .errors import NonFinite, SolverFailure
from .grid import GridFunction, delta_operator_matrix, integrate_values, kinetic
from .params import Params


@dataclass(frozen=True)
class EvolutionConfig:
    dt0: float = 1e-3
    t_end: float = 1.0
    record_every: float = 0.01
    blowup_gradient_factor: float = 100.0
    blowup_sup_cap: float = 1e3
    adapt: bool = True
    linear_only: bool = False
    boundary_tol: float = 1e-8
    boundary_fraction: float = 0.1
    local_radius: float = 10.0
    keep_states_every: int = 0  # 0 keeps only the initial and final states
    virial_R: float | None = None
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not self.dt0 > 0:
            raise ValueError("dt0 must be positive")
        if self.t_end == 0:
            raise ValueError("t_end must be nonzero; its sign selects the time direction")
        if not (self.blowup_gradient_factor > 1 and self.blowup_sup_cap > 0):
            raise ValueError("blow-up thresholds must exceed 1")
        if not self.record_every > 0:
            raise ValueError("record_every must be positive")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Termination:
    kind: str  # completed | blowup | boundary | nonfinite
    t: float
    detail: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Record:
    t: float
    report: fn.FunctionalReport
    sup: float
    gradient_factor: float
    local_mass_fraction: float
    boundary_mass_fraction: float
    gn_ratio: float
    dt: float


@dataclass
class Trajectory:
    params: Params
    config: EvolutionConfig
    records: list[Record] = field(default_factory=list)
    states: list[tuple[float, GridFunction]] = field(default_factory=list)
    virial: list = field(default_factory=list)
    termination: Termination | None = None
    steps: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def reports(self) -> list[fn.FunctionalReport]:
        return [r.report for r in self.records]

    def column(self, name: str) -> np.ndarray:
        if name in fn.FunctionalReport.FIELDS:
            return np.array([getattr(r.report, name) for r in self.records])
        return np.array([getattr(r, name) for r in self.records])

    @property
    def final_state(self) -> GridFunction:
        return self.states[-1][1]


class Stepper:
    """Strang step on a fixed grid; caches the tridiagonal factorization per dt."""

    def __init__(self, spec, params: Params, linear_only: bool = False):
        self.spec = spec
        self.params = params
        self.linear_only = linear_only
        self.op = delta_operator_matrix(spec, params.gamma)
        self._cache: dict[float, tuple] = {}

    def _factor(self, dt: float):
        fac = self._cache.get(dt)
        if fac is None:
            if len(self._cache) > 8:
                self._cache.clear()
            c = 0.5j * dt
            n = self.op.diag.size
            off = np.full(n - 1, c * self.op.off, dtype=complex)
            dl, d, du, du2, ipiv, info = lapack.zgttrf(off, 1.0 + c * self.op.diag, off.copy())
            if info != 0:
                raise SolverFailure(f"tridiagonal factorization failed (info={info})")
            fac = (dl, d, du, du2, ipiv)
            self._cache[dt] = fac
        return fac

    def _rotate(self, u: np.ndarray, tau: float) -> np.ndarray:
        if self.linear_only:
            return u
        w = u.real * u.real + u.imag * u.imag
        return u * np.exp(1j * tau * w ** ((self.params.p - 1) / 2))

    def linear(self, u: np.ndarray, dt: float) -> np.ndarray:
        c = 0.5j * dt
        rhs = u - c * self.op.matvec(u)
        dl, d, du, du2, ipiv = self._factor(dt)
        out, info = lapack.zgttrs(dl, d, du, du2, ipiv, rhs)
        if info != 0:
            raise SolverFailure(f"tridiagonal solve failed (info={info})")
        # one refinement pass: the reused LU factors otherwise bias |u|^2 by ~1e-16 per step
        res = rhs - (out + c * self.op.matvec(out))
        corr, info = lapack.zgttrs(dl, d, du, du2, ipiv, res)
        if info != 0:
            raise SolverFailure(f"tridiagonal solve failed (info={info})")
        return out + corr

    def __call__(self, u: np.ndarray, dt: float) -> np.ndarray:
        u = self._rotate(u, dt / 2)
        u = self.linear(u, dt)
        return self._rotate(u, dt / 2)


def step(u: GridFunction, dt: float, params: Params, linear_only: bool = False) -> GridFunction:
    """One Strang step of size dt (negative dt integrates backwards)."""
    if dt == 0:
        raise ValueError("dt must be nonzero")
    out = Stepper(u.spec, params, linear_only)(np.array(u.values), dt)
    return GridFunction(u.spec, out, u.even_hint)


class _Monitor:
    def __init__(self, u0: GridFunction, params: Params, cfg: EvolutionConfig):
        spec = u0.spec
        self.spec, self.params, self.cfg = spec, params, cfg
        x = np.abs(spec.x)
        self.outer = x > (1 - cfg.boundary_fraction) * spec.half_width
        self.local = x <= cfg.local_radius
        self.m0 = fn.quadrature(u0, 2)
        self.grad0 = math.sqrt(kinetic(u0))
        self.sup0 = float(np.max(np.abs(u0.values)))
        self.gn = params.gamma <= -2  # the even delta GN bound at omega = 1 needs 1 <= gamma^2/4

    def fraction(self, u: np.ndarray, mask) -> float:
        a = u[mask]
        return float(np.sum(a.real**2 + a.imag**2) * self.spec.h / self.m0) if self.m0 > 0 else 0.0

    def gradient_factor(self, u: np.ndarray) -> float:
        return math.sqrt(float(np.sum(np.abs(np.diff(u)) ** 2) / self.spec.h)) / self.grad0 if self.grad0 > 0 else 0.0

    def record(self, t: float, u: np.ndarray, dt: float) -> Record:
        gf = GridFunction(self.spec, u, even_hint=False)
        rep = fn.report(gf, self.params)
        gn = fn.gn_ratio(gf, self.params.with_(omega=1.0)) if self.gn else float("nan")
        return Record(t, rep, float(np.max(np.abs(u))), self.gradient_factor(u),
                      self.fraction(u, self.local), self.fraction(u, self.outer), gn, dt)


def evolve(u0: GridFunction, cfg: EvolutionConfig, params: Params) -> Trajectory:
    """Integrate to cfg.t_end or until a detector fires; records every cfg.record_every."""
    from .virial import virial_quantities

    stepper = Stepper(u0.spec, params, cfg.linear_only)
    mon = _Monitor(u0, params, cfg)
    traj = Trajectory(params=params, config=cfg)
    direction = 1.0 if cfg.t_end > 0 else -1.0
    u = np.array(u0.values)
    t = 0.0
    np_exp = (params.p - 1)
    n_rec = int(math.floor(abs(cfg.t_end) / cfg.record_every + 1e-9))
    marks = [direction * k * cfg.record_every for k in range(1, n_rec + 1)]
    if not marks or abs(marks[-1]) < abs(cfg.t_end) - 1e-12:
        marks.append(cfg.t_end)

    def keep(idx: int, force: bool = False):
        state = GridFunction(u0.spec, u.copy(), even_hint=u0.even_hint)
        traj.records.append(mon.record(t, u, dt_last))
        if cfg.virial_R is not None:
            traj.virial.append(virial_quantities(state, cfg.virial_R, params, t=t, linear=cfg.linear_only))
        every = cfg.keep_states_every
        if force or idx == 0 or (every and idx % every == 0):
            traj.states.append((t, state))

    dt_last = cfg.dt0
    keep(0)
    steps = 0
    for k, mark in enumerate(marks, start=1):
        while True:
            remaining = abs(mark - t)
            if remaining <= 1e-13 * max(1.0, abs(mark)):
                t = mark
                break
            dt_a = cfg.dt0
            if cfg.adapt:
                ratio = float(np.max(np.abs(u))) / mon.sup0 if mon.sup0 > 0 else 1.0
                dt_a = cfg.dt0 / max(1.0, ratio**np_exp)
            nsub = max(1, math.ceil(remaining / dt_a - 1e-9))
            dt = remaining / nsub
            u = stepper(u, direction * dt)
            steps += 1
            dt_last = dt
            t = mark if nsub == 1 else t + direction * dt
            sup = float(np.max(np.abs(u)))
            if not math.isfinite(sup):
                traj.termination = Termination("nonfinite", t, "state became non-finite")
                traj.steps = steps
                return traj
            gfac = mon.gradient_factor(u)
            if gfac > cfg.blowup_gradient_factor or sup > cfg.blowup_sup_cap:
                keep(k, force=True)
                traj.termination = Termination("blowup", t, f"gradient factor {gfac:.3g}, sup {sup:.3g}")
                traj.steps = steps
                return traj
            if mon.fraction(u, mon.outer) > cfg.boundary_tol:
                keep(k, force=True)
                traj.termination = Termination("boundary", t, "mass reached the outer layer")
                traj.steps = steps
                return traj
            if steps >= cfg.max_steps:
                raise SolverFailure("step budget exhausted")
        keep(k, force=(k == len(marks)))
    traj.termination = Termination("completed", t)
    traj.steps = steps
    return traj


@dataclass(frozen=True)
class Audit:
    max_mass_drift: float
    max_energy_drift: float
    samples: int


def conservation_audit(traj: Trajectory) -> Audit:
    """Relative drifts of M and E_gamma over the recorded samples before any blow-up detection."""
    recs = traj.records
    if traj.termination is not None and traj.termination.kind == "blowup":
        recs = recs[:-1]
    m0 = recs[0].report.mass
    e0 = recs[0].report.energy_gamma
    dm = max(abs(r.report.mass - m0) for r in recs) / m0 if m0 else 0.0
    escale = abs(e0) if e0 != 0 else 1.0
    de = max(abs(r.report.energy_gamma - e0) for r in recs) / escale
    return Audit(dm, de, len(recs))


def soliton_benchmark(h: float, dt: float, params: Params, t_end: float = 1.0,
                      half_width: float = 20.0) -> tuple[float, Trajectory]:
    """Evolve the attained ground state; return the L^2 error of |u(t_end)| against the profile."""
    from . import groundstate as gs
    from .grid import GridSpec, quadrature, sample

    spec = GridSpec.from_spacing(half_width, h)
    u0 = sample(lambda x: gs.eval_Q_omega_gamma(x, params), spec)
    cfg = EvolutionConfig(dt0=dt, t_end=t_end, record_every=t_end / 10, adapt=False,
                          blowup_sup_cap=1e6)
    traj = evolve(u0, cfg, params)
    u1 = traj.final_state
    err = math.sqrt(quadrature(GridFunction(spec, np.abs(u1.values) - np.abs(u0.values)), 2))
    return err, traj
