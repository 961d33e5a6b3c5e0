"""Threshold data, the scattering / blow-up classifier and the (M, E) sweep.

Threshold data live on the mass-preserving dilation orbit of a shape G:

    f_lam(x) = a sqrt(lam) G(lam x),   a fixed by M(f_lam) = 2M(Q) on the grid.

Along the orbit dE/dlam = K_gamma(f_lam)/lam, so E is unimodal with its
maximum where K_gamma = 0.  If that maximum exceeds 2E(Q), the level set
E = 2E(Q) has two roots: the smaller lam has K > 0, the larger K < 0.  Each
root is found with a bracketing solver, on the grid the data will be evolved
on, so (M, E) sit on the threshold to rounding.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import optimize

from . import functionals as fn
from . import groundstate as gs
from .errors import MassTooSmall, NoBranch, PreconditionError
from .evolution import EvolutionConfig, Trajectory, conservation_audit, evolve
from .grid import GridFunction, GridSpec, quadrature, resample_even
from .params import Params, sign

KINDS = ("two_bump", "dilated_bump", "phase_modulated")
LAMBDA_RANGE = (0.05, 20.0)


@dataclass(frozen=True)
class ThresholdFamily:
    profile_kind: str = "two_bump"
    y0: float = 1.5  # separation of the bumps (two_bump, phase_modulated)
    b: float = 0.0  # quadratic phase coefficient (phase_modulated)
    a: float = 1.0  # amplitude; reset by the mass condition
    lam: float = 1.0  # dilation; reset by the energy condition

    def __post_init__(self):
        if self.profile_kind not in KINDS:
            raise PreconditionError(f"unknown profile kind {self.profile_kind!r}; expected one of {KINDS}")

    def shape(self, x: np.ndarray, params: Params) -> np.ndarray:
        """The undilated even profile G(x)."""
        ax = np.abs(x)
        if self.profile_kind == "dilated_bump":
            return gs.eval_Q(x, params) + 0j
        g = gs.eval_Q(ax - self.y0, params) + 0j
        if self.profile_kind == "phase_modulated":
            g = g * np.exp(1j * self.b * x * x)
        return g

    def member(self, spec: GridSpec, a: float, lam: float, params: Params) -> GridFunction:
        x = spec.x
        return GridFunction(spec, a * math.sqrt(lam) * self.shape(lam * x, params), even_hint=True)

    def to_dict(self) -> dict:
        return asdict(self)


def _orbit(fam: ThresholdFamily, spec: GridSpec, params: Params, mass: float):
    def at(lam: float) -> tuple[GridFunction, float]:
        base = fam.member(spec, 1.0, lam, params)
        a = math.sqrt(mass / quadrature(base, 2))
        return base.scaled(a), a

    def energy(lam: float) -> float:
        return fn.report(at(lam)[0], params).energy_gamma

    return at, energy


def _branch_root(energy, target: float, k_sign: int, lo: float, hi: float) -> float | None:
    """Root of energy(lam) = target on the increasing (k_sign > 0) or decreasing side of the peak."""
    res = optimize.minimize_scalar(lambda l: -energy(l), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    lam_peak, e_peak = float(res.x), -float(res.fun)
    if e_peak <= target:
        return None
    if k_sign > 0:
        a, b = lo, lam_peak
    else:
        a, b = lam_peak, hi
    fa, fb = energy(a) - target, energy(b) - target
    if fa * fb > 0:
        return None
    return float(optimize.brentq(lambda l: energy(l) - target, a, b, xtol=1e-14, rtol=1e-15, maxiter=200))


@dataclass(frozen=True)
class ThresholdData:
    """A reproducible recipe for data with prescribed (M, E) and K sign; sampled per grid."""

    family: ThresholdFamily
    k_sign: int
    params: Params
    mass: float
    energy: float

    def sample(self, spec: GridSpec) -> GridFunction:
        at, energy = _orbit(self.family, spec, self.params, self.mass)
        lam = _branch_root(energy, self.energy, self.k_sign, *LAMBDA_RANGE)
        if lam is None:
            raise NoBranch(f"branch K{'>' if self.k_sign > 0 else '<'}0 not reachable on grid "
                           f"L={spec.half_width}, h={spec.h:.3g}")
        return at(lam)[0]

    def with_lambda(self, spec: GridSpec) -> tuple[GridFunction, float, float]:
        at, energy = _orbit(self.family, spec, self.params, self.mass)
        lam = _branch_root(energy, self.energy, self.k_sign, *LAMBDA_RANGE)
        if lam is None:
            raise NoBranch("branch not reachable on this grid")
        f, a = at(lam)
        return f, a, lam

    def to_dict(self) -> dict:
        return {"family": self.family.to_dict(), "k_sign": self.k_sign, "params": self.params.to_dict(),
                "mass": self.mass, "energy": self.energy}


def threshold_data(fam: ThresholdFamily, k_sign_target: int, params: Params, spec: GridSpec,
                   mass: float | None = None, energy: float | None = None, failover: bool = True) -> ThresholdData:
    """Recipe on (M, E) = (2M(Q), 2E(Q)) (or the given level) with the requested K sign.

    If the shape cannot reach the level, the separation y0 is shrunk (two_bump,
    phase_modulated) or the phase b is raised (phase_modulated), up to eight times.
    """
    if k_sign_target not in (1, -1):
        raise PreconditionError("k_sign_target must be +1 or -1")
    n = gs.norms_Q(params)
    mass = 2 * n.mass if mass is None else mass
    energy = 2 * n.energy if energy is None else energy
    cand = fam
    for _ in range(9):
        data = ThresholdData(cand, k_sign_target, params, mass, energy)
        try:
            f = data.sample(spec)
        except NoBranch:
            f = None
        if f is not None:
            r = fn.report(f, params)
            if sign(r.virial_K, r.kinetic + r.lp1_norm_p1) == k_sign_target:
                return data
        if not failover or cand.profile_kind == "dilated_bump":
            break
        if cand.profile_kind == "phase_modulated":
            cand = replace(cand, b=cand.b + 0.05, y0=0.8 * cand.y0)
        else:
            cand = replace(cand, y0=0.8 * cand.y0)
    raise NoBranch(f"{fam.profile_kind} family cannot reach K sign {k_sign_target:+d} at this level")


def build_threshold_data(fam: ThresholdFamily, k_sign_target: int, params: Params,
                         spec: GridSpec | None = None) -> GridFunction:
    """Even data with M = 2M(Q), E_gamma = 2E(Q) and the requested sign of K_gamma."""
    if params.gamma > -2:
        raise PreconditionError("threshold construction assumes gamma <= -2 (after rescaling to omega = 1)")
    spec = GridSpec.from_spacing(20.0, 4e-3) if spec is None else spec
    return threshold_data(fam, k_sign_target, params, spec).sample(spec)


# --- classification -----------------------------------------------------------------

@dataclass(frozen=True)
class ClassifyConfig:
    """Two stages at two resolutions each.

    Stage A (small box, fine grid, short time) looks for blow-up.  Stage B (large
    box, coarse grid, long time) measures dispersion: local mass in |x| <= local_radius.
    """

    blowup_half_width: float = 20.0
    blowup_h: float = 4e-3
    blowup_dt: float = 1e-3
    blowup_t_end: float = 5.0
    blowup_boundary_tol: float = 1e-6
    scatter_half_width: float = 200.0
    scatter_h: float = 0.04
    scatter_dt: float = 2e-3
    t_end: float = 50.0
    scatter_boundary_tol: float = 1e-3
    record_every: float = 0.1
    local_radius: float = 10.0
    local_fraction: float = 0.1
    t_star_tol: float = 0.05
    gradient_factor: float = 100.0
    refine: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    def evolution(self, stage: str, level: int) -> EvolutionConfig:
        scale = 0.5**level
        if stage == "A":
            return EvolutionConfig(dt0=self.blowup_dt * scale, t_end=self.blowup_t_end,
                                   record_every=min(self.record_every, self.blowup_t_end / 10) / 2,
                                   blowup_gradient_factor=self.gradient_factor,
                                   boundary_tol=self.blowup_boundary_tol, local_radius=self.local_radius)
        return EvolutionConfig(dt0=self.scatter_dt * scale, t_end=self.t_end, record_every=self.record_every,
                               blowup_gradient_factor=self.gradient_factor,
                               boundary_tol=self.scatter_boundary_tol, local_radius=self.local_radius)

    def grid(self, stage: str, level: int) -> GridSpec:
        if stage == "A":
            return GridSpec.from_spacing(self.blowup_half_width, self.blowup_h).refined(2**level)
        return GridSpec.from_spacing(self.scatter_half_width, self.scatter_h).refined(2**level)


@dataclass
class ClassificationResult:
    label: str  # Scatter | BlowUp | Undetermined
    k_sign: int
    t_star: float
    t_stars: list[float]
    local_mass_fraction: float
    gradient_factor: float
    refinement_agree: bool
    k_positive_throughout: bool
    notes: list[str] = field(default_factory=list)
    runs: list[dict] = field(default_factory=list)
    trajectories: list[Trajectory] = field(default_factory=list, repr=False)

    def evidence(self) -> dict:
        return {"K_sign": self.k_sign, "t_star": self.t_star, "t_stars": self.t_stars,
                "final_local_mass_fraction": self.local_mass_fraction,
                "gradient_growth_factor": self.gradient_factor,
                "refinement_agree": self.refinement_agree,
                "K_positive_throughout": self.k_positive_throughout}

    def to_dict(self) -> dict:
        return {"label": self.label, "evidence": self.evidence(), "notes": list(self.notes), "runs": list(self.runs)}

    @property
    def trajectory(self) -> Trajectory | None:
        return self.trajectories[0] if self.trajectories else None


def _materialize(u0, spec: GridSpec) -> GridFunction:
    if isinstance(u0, ThresholdData):
        return u0.sample(spec)
    if isinstance(u0, GridFunction):
        if u0.spec == spec:
            return u0
        return resample_even(u0, spec)
    raise PreconditionError("classify needs a GridFunction or ThresholdData")


def _run_summary(stage: str, level: int, spec: GridSpec, traj: Trajectory) -> dict:
    audit = conservation_audit(traj)
    return {"stage": stage, "level": level, "half_width": spec.half_width, "h": spec.h,
            "dt0": traj.config.dt0, "termination": traj.termination.kind, "t_end": traj.termination.t,
            "steps": traj.steps, "final_local_mass_fraction": traj.records[-1].local_mass_fraction,
            "max_gradient_factor": float(max(r.gradient_factor for r in traj.records)),
            "mass_drift": audit.max_mass_drift, "energy_drift": audit.max_energy_drift}


def classify(u0, params: Params, cfg: ClassifyConfig | None = None, require_threshold: bool = True) -> ClassificationResult:
    """Scatter, BlowUp or Undetermined from finite-time runs at two resolutions.

    BlowUp: both stage-A runs detect blow-up with t* within cfg.t_star_tol.
    Scatter: both stage-B runs finish with local mass fraction below
    cfg.local_fraction and K_gamma > 0 at every record.  Anything else, including
    boundary contamination or disagreement between resolutions, is Undetermined.
    """
    cfg = ClassifyConfig() if cfg is None else cfg
    levels = (0, 1) if cfg.refine else (0,)
    notes: list[str] = []
    first = _materialize(u0, cfg.grid("A", 0))
    if not first.is_even(1e-9):
        raise PreconditionError("classify needs even data")
    if require_threshold and not fn.on_threshold(first, params):
        raise PreconditionError("data not on the (M, E) threshold")
    r0 = fn.report(first, params)
    k_sign = sign(r0.virial_K, r0.kinetic + r0.lp1_norm_p1)
    result = ClassificationResult("Undetermined", k_sign, math.nan, [], math.nan, math.nan, False, False, notes)

    # stage A: blow-up search
    kinds, t_stars = [], []
    for lvl in levels:
        spec = cfg.grid("A", lvl)
        u = first if lvl == 0 else _materialize(u0, spec)
        traj = evolve(u, cfg.evolution("A", lvl), params)
        result.trajectories.append(traj)
        result.runs.append(_run_summary("A", lvl, spec, traj))
        kinds.append(traj.termination.kind)
        if traj.termination.kind == "blowup":
            t_stars.append(traj.termination.t)
    result.gradient_factor = float(max(run["max_gradient_factor"] for run in result.runs))
    if all(k == "blowup" for k in kinds):
        result.t_stars = t_stars
        result.t_star = float(t_stars[-1])
        spread = (max(t_stars) - min(t_stars)) / max(t_stars)
        result.refinement_agree = spread <= cfg.t_star_tol
        result.label = "BlowUp" if result.refinement_agree else "Undetermined"
        if not result.refinement_agree:
            notes.append(f"blow-up times disagree across resolutions by {spread:.1%}")
        result.local_mass_fraction = result.trajectories[-1].records[-1].local_mass_fraction
        return result
    if any(k == "blowup" for k in kinds):
        notes.append("blow-up detected at only one resolution")
        result.t_stars = t_stars
        return result
    if any(k == "nonfinite" for k in kinds):
        notes.append("non-finite state in the blow-up search")
        return result

    # stage B: dispersion in a large box
    fracs, kpos, kinds = [], [], []
    for lvl in levels:
        spec = cfg.grid("B", lvl)
        u = _materialize(u0, spec)
        traj = evolve(u, cfg.evolution("B", lvl), params)
        result.trajectories.append(traj)
        result.runs.append(_run_summary("B", lvl, spec, traj))
        kinds.append(traj.termination.kind)
        fracs.append(traj.records[-1].local_mass_fraction)
        ks = traj.column("virial_K")
        scale = traj.column("kinetic") + traj.column("lp1_norm_p1")
        kpos.append(bool(all(sign(k, s) > 0 for k, s in zip(ks, scale))))
    result.local_mass_fraction = float(fracs[-1])
    result.k_positive_throughout = all(kpos)
    result.gradient_factor = float(max(run["max_gradient_factor"] for run in result.runs))
    if any(k == "blowup" for k in kinds):
        notes.append("blow-up detected in the long run only")
        return result
    if any(k == "boundary" for k in kinds):
        notes.append("mass reached the outer layer of the large box")
        return result
    below = [f < cfg.local_fraction for f in fracs]
    result.refinement_agree = len(set(below)) == 1
    if all(below) and result.k_positive_throughout:
        result.label = "Scatter"
    elif not result.refinement_agree:
        notes.append("local mass fractions disagree across resolutions")
    else:
        notes.append("local mass stayed above the dispersion threshold" if not all(below)
                     else "K_gamma changed sign")
    return result


# --- near-two-soliton run ----------------------------------------------------------

def near_two_soliton(params: Params, y0: float = 5.0, R: float = 2.0, t_end: float = 4.0,
                     h: float = 0.01, half_width: float = 30.0, dt: float = 1e-3,
                     record_every: float = 0.05, k_sign: int = 1):
    """Threshold data close to Q(|x| - y0), evolved with states kept for modulation.

    Returns (trajectory, estimate chain).
    """
    from .modulation import estimate_chain

    spec = GridSpec.from_spacing(half_width, h)
    data = threshold_data(ThresholdFamily("two_bump", y0=y0), k_sign, params, spec, failover=False)
    u0 = data.sample(spec)
    cfg = EvolutionConfig(dt0=dt, t_end=t_end, record_every=record_every, keep_states_every=1,
                          boundary_tol=1e-3, virial_R=R)
    traj = evolve(u0, cfg, params)
    return traj, estimate_chain(traj, params, R)


# --- (M, E) plane sweep ---------------------------------------------------------------

ATLAS_FIELDS = ("mass", "energy", "omega", "k_sign", "label", "t_star_or_tend", "local_mass_fraction",
                "gradient_factor", "refinement_agree", "manifest_path")


@dataclass(frozen=True)
class SweepPoint:
    i: int
    j: int
    mass: float
    energy: float


def _omega_for(mass: float, params: Params) -> float:
    try:
        return fn.omega_for_mass(mass, params)
    except MassTooSmall:
        return math.nan


def _sweep_one(args) -> dict:
    point, params, cfg, k_sign, manifest_path = args
    row = {"mass": point.mass, "energy": point.energy, "omega": math.nan, "k_sign": 0,
           "label": "Undetermined", "t_star_or_tend": math.nan, "local_mass_fraction": math.nan,
           "gradient_factor": math.nan, "refinement_agree": False, "manifest_path": manifest_path}
    spec = cfg.grid("A", 0)
    fam = ThresholdFamily("dilated_bump")
    data = None
    for ks in (k_sign, -k_sign):
        try:
            data = threshold_data(fam, ks, params, spec, mass=point.mass, energy=point.energy, failover=False)
            break
        except NoBranch:
            continue
    if data is None:
        return row
    row["omega"] = _omega_for(point.mass, params)
    try:
        res = classify(data, params, cfg, require_threshold=False)
    except Exception as exc:  # per-point failures become Undetermined rows
        row["label"] = "Undetermined"
        row["error"] = type(exc).__name__
        return row
    row.update(k_sign=res.k_sign, label=res.label,
               t_star_or_tend=res.t_star if res.label == "BlowUp" else res.trajectories[-1].termination.t,
               local_mass_fraction=res.local_mass_fraction, gradient_factor=res.gradient_factor,
               refinement_agree=res.refinement_agree)
    return row


def sweep_plane(mass_grid, energy_grid, params: Params, cfg: ClassifyConfig | None = None,
                jobs: int = 1, k_sign: int = 1, manifest_path: str = "") -> list[dict]:
    """Classify dilated-bump data at every (M, E) grid point.

    Points run as independent tasks; rows come back ordered by (mass index,
    energy index) whatever the completion order.
    """
    cfg = ClassifyConfig() if cfg is None else cfg
    masses = np.asarray(mass_grid, dtype=float)
    energies = np.asarray(energy_grid, dtype=float)
    if np.any(masses <= 0):
        raise PreconditionError("masses must be positive")
    points = [SweepPoint(i, j, float(m), float(e)) for i, m in enumerate(masses) for j, e in enumerate(energies)]
    tasks = [(pt, params, cfg, k_sign, manifest_path) for pt in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, os.cpu_count() or 1)) as ex:
            rows = list(ex.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]
    for pt, row in zip(points, rows):
        row.setdefault("error", "")
        row["index"] = (pt.i, pt.j)
    return rows


def atlas_band(row: dict, params: Params, band: float = 1e-6) -> str:
    """Where a point sits in the plane: 'below', 'threshold', 'above' (scale-invariant level) or 'low_mass'."""
    if row["mass"] < fn.mass_cutoff(params) * (1 - 1e-12):
        return "low_mass"
    lev, top = fn.scaled_energy_level(row["mass"], row["energy"], params)
    if abs(lev - top) <= band * abs(top):
        return "threshold"
    return "below" if lev < top else "above"
