"""Command-line front end: ``deltanls <command> [flags]``.

Every command writes its outputs and a ``<name>.manifest.json`` into the
output directory (``--out``, else $DELTA_NLS_OUT, else ./deltanls_out).
``deltanls replay <manifest>`` re-runs a manifest; CSV outputs are
byte-identical.

Exit codes: 0 success (an Undetermined label is a success), 2 domain or
precondition error, 3 construction failure, 4 solver failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import functionals as fn
from . import groundstate as gs
from . import io as dio
from .errors import (DeltaNLSError, DomainError, DomainViolation, MassTooSmall, NoBranch, NoConvergence,
                     NonFinite, PreconditionError, SolverFailure, SpecMismatch, InsufficientSamples)
from .params import Params

EXIT_OK, EXIT_DOMAIN, EXIT_CONSTRUCTION, EXIT_SOLVER = 0, 2, 3, 4
_EXIT = [((DomainError, DomainViolation, SpecMismatch, PreconditionError, MassTooSmall, InsufficientSamples),
          EXIT_DOMAIN), ((NoBranch, NoConvergence), EXIT_CONSTRUCTION), ((SolverFailure, NonFinite), EXIT_SOLVER)]

# flags that only select where outputs go; excluded from manifests
_NON_INPUT = {"out", "func", "command", "manifest"}


def _range(text: str) -> tuple[float, float, float | None]:
    parts = [float(s) for s in text.split(":")]
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError("expected lo:hi or lo:hi:step")
    return parts[0], parts[1], parts[2] if len(parts) == 3 else None


def _ksign(text: str) -> int:
    if text in ("+", "+1", "1", "pos"):
        return 1
    if text in ("-", "-1", "neg"):
        return -1
    raise argparse.ArgumentTypeError("ksign must be + or -")


def _params(args) -> Params:
    return Params(p=args.p, gamma=args.gamma, omega=getattr(args, "omega", 1.0) or 1.0)


def _manifest(args, params: Params, grid=None, config=None) -> dio.RunManifest:
    inputs = {k: v for k, v in sorted(vars(args).items()) if k not in _NON_INPUT}
    return dio.RunManifest(args.command, inputs, params.to_dict(), grid, config, started=dio.now())


def _finish(man: dio.RunManifest, out: Path, stem: str) -> Path:
    man.finished = dio.now()
    return man.write(out / f"{stem}.manifest.json")


def _steps(lo: float, hi: float, step: float | None, default_n: int = 13) -> np.ndarray:
    if step is None:
        return np.linspace(lo, hi, default_n)
    n = int(math.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(n + 1)


# --- commands -------------------------------------------------------------------

def cmd_groundstate(args, out: Path) -> int:
    params = _params(args)
    man = _manifest(args, params)
    stem = "groundstate"
    if args.attained:
        gs.attained_shift(params)  # DomainError when omega <= gamma^2/4
    n = gs.norms_Q(params)
    c = fn.gn_constants(params.with_(omega=1.0))
    norms = {"p": params.p, "gamma": params.gamma, "omega": params.omega, "c_p": params.c_p, "s_c": params.s_c,
             "Q0": gs.Q_at_zero(params), "mass": n.mass, "kinetic": n.kinetic, "lp1": n.lp1, "energy": n.energy,
             "action": n.action, "pohozaev_residual": n.pohozaev_residual(), "nehari_residual": n.nehari_residual(),
             "gn_c_omega0_inv": c.c_omega0_inv, "gn_delta_best_inv": c.delta_best_inv}
    if args.attained:
        interior, jump = gs.attained_residuals(params)
        norms.update(attained_interior_residual=interior, attained_jump_residual=jump,
                     attained_shift=gs.attained_shift(params), attained_action=fn.attained_action(params))
    man.outputs["norms"] = str(dio.write_text(out / f"{stem}_norms.json", dio.json_text(norms)).name)
    if args.norms or not (args.asym or args.table):
        print(f"M(Q) = {n.mass!r}\n||Q'||^2 = {n.kinetic!r}\n||Q||_(p+1)^(p+1) = {n.lp1!r}\nE(Q) = {n.energy!r}")
        print(f"pohozaev residual = {n.pohozaev_residual():.3e}\nnehari residual = {n.nehari_residual():.3e}")
        if args.attained:
            print(f"attained profile residuals: interior {norms['attained_interior_residual']:.3e}, "
                  f"jump {norms['attained_jump_residual']:.3e}")
    if args.asym:
        lo, hi, st = args.asym
        ys = _steps(lo, hi, st if st is not None else 0.5)
        rows = [gs.script_Q_asymptotic(float(y), params).row() for y in ys]
        text = dio.csv_text(gs.AsymptoticReport.HEADER, rows)
        man.outputs["asymptotics"] = str(dio.write_text(out / f"{stem}_asym.csv", text).name)
        sys.stdout.write(text)
    if args.table:
        lo, hi, st = args.table
        xs = _steps(lo, hi, st)
        cols = ["x", "Q", "Q_prime", "gamma_y"]
        rows = []
        for x in xs:
            row = [float(x), float(gs.eval_Q(x, params)), float(gs.eval_Q_prime(x, params)),
                   float(gs.gamma_of_y(abs(x), params))]
            if args.attained:
                row.append(float(gs.eval_Q_omega_gamma(x, params)))
            rows.append(row)
        if args.attained:
            cols.append("Q_omega_gamma")
        text = dio.csv_text(cols, rows)
        man.outputs["table"] = str(dio.write_text(out / f"{stem}_table.csv", text).name)
        sys.stdout.write(text)
    _finish(man, out, stem)
    return EXIT_OK


_PRESETS = {
    "desk": ex.ClassifyConfig(),
    "fast": ex.ClassifyConfig(blowup_h=8e-3, blowup_dt=2e-3, scatter_half_width=100.0, scatter_h=0.05,
                              scatter_dt=2.5e-3, t_end=20.0),
}


def _classify_config(args) -> ex.ClassifyConfig:
    from dataclasses import replace

    cfg = _PRESETS[args.resolution]
    if args.t_end is not None:
        cfg = replace(cfg, t_end=args.t_end)
    if args.no_refine:
        cfg = replace(cfg, refine=False)
    return cfg


def cmd_classify(args, out: Path) -> int:
    params = _params(args).require_supercritical()
    cfg = _classify_config(args)
    fam = ex.ThresholdFamily(args.family, y0=args.y0, b=args.b)
    spec = cfg.grid("A", 0)
    data = ex.threshold_data(fam, args.ksign, params, spec)
    stem = f"classify_{args.family}_{'pos' if args.ksign > 0 else 'neg'}_g{args.gamma:g}"
    man = _manifest(args, params, dio.grid_dict(spec), cfg.to_dict())
    res = ex.classify(data, params, cfg)
    from .modulation import proximity

    u0 = data.sample(spec)
    prox = proximity(u0, params)
    payload = res.to_dict()
    payload["data"] = data.to_dict()
    payload["initial_proximity"] = {"dist": prox.dist, "theta0": prox.theta0, "y0": prox.y0}
    payload["e_gamma_branch"] = "exp(-(p+1)y)" if gs.is_degenerate(params) else "exp(-2y)"
    man.outputs["result"] = dio.write_text(out / f"{stem}.json", dio.json_text(payload)).name
    for k, traj in enumerate(res.trajectories):
        run = res.runs[k]
        name = f"{stem}_traj_{run['stage']}{run['level']}.csv"
        man.outputs[f"trajectory_{run['stage']}{run['level']}"] = dio.write_text(out / name, dio.trajectory_csv(traj)).name
    _finish(man, out, stem)
    t = res.t_star if res.label == "BlowUp" else float("nan")
    print(f"label {res.label}" + (f" t* {t:.6g}" if res.label == "BlowUp" else "")
          + f" (K sign {res.k_sign:+d}, local mass fraction {res.local_mass_fraction:.3g})")
    for note in res.notes:
        print(f"note: {note}")
    return EXIT_OK


def cmd_sweep(args, out: Path) -> int:
    from dataclasses import replace

    params = _params(args).require_supercritical()
    n = gs.norms_Q(params)
    m_lo, m_hi, _ = args.mass_range or (fn.mass_cutoff(params), 4.0 * n.mass, None)
    e_lo, e_hi, _ = args.energy_range or (0.0, 4.0 * n.energy, None)
    masses = np.linspace(m_lo, m_hi, args.mass)
    energies = np.linspace(e_lo, e_hi, args.energy)
    cfg = replace(_PRESETS[args.resolution], t_end=args.t_end, refine=not args.no_refine)
    stem = f"sweep_g{args.gamma:g}"
    man = _manifest(args, params, None, cfg.to_dict())
    rows = ex.sweep_plane(masses, energies, params, cfg, jobs=args.jobs, k_sign=args.ksign,
                          manifest_path=f"{stem}.manifest.json")
    names = list(ex.ATLAS_FIELDS) + ["error"]
    text = dio.csv_text(names, [[r[k] for k in names] for r in rows])
    man.outputs["atlas"] = dio.write_text(out / f"{stem}.csv", text).name
    _finish(man, out, stem)
    determined = sum(r["label"] != "Undetermined" for r in rows)
    print(f"{len(rows)} points, {determined} determined")
    return EXIT_OK


def cmd_evolve(args, out: Path) -> int:
    from .evolution import EvolutionConfig, conservation_audit, evolve
    from .grid import GridSpec, sample

    params = _params(args)
    spec = GridSpec.from_spacing(args.L, args.h)
    if args.soliton:
        u0 = sample(lambda x: gs.eval_Q_omega_gamma(x, params), spec)
        kind = "soliton"
    elif args.family:
        data = ex.threshold_data(ex.ThresholdFamily(args.family, y0=args.y0, b=args.b), args.ksign,
                                 params.with_(omega=1.0), spec)
        u0 = data.sample(spec)
        kind = args.family
    else:
        u0 = sample(lambda x: args.amplitude * np.exp(-x * x), spec)
        kind = "gaussian"
    cfg = EvolutionConfig(dt0=args.dt, t_end=args.t_end, record_every=args.record_every, adapt=not args.no_adapt,
                          linear_only=args.linear, keep_states_every=1 if args.keep_states else 0,
                          virial_R=args.virial_R, boundary_tol=args.boundary_tol)
    stem = f"evolve_{kind}"
    man = _manifest(args, params, dio.grid_dict(spec), cfg.as_dict())
    traj = evolve(u0, cfg, params)
    man.outputs["trajectory"] = dio.write_text(out / f"{stem}.csv", dio.trajectory_csv(traj)).name
    audit = conservation_audit(traj)
    summary = {"termination": traj.termination.as_dict(), "steps": traj.steps,
               "max_mass_drift": audit.max_mass_drift, "max_energy_drift": audit.max_energy_drift,
               "audit_samples": audit.samples}
    man.outputs["audit"] = dio.write_text(out / f"{stem}_audit.json", dio.json_text(summary)).name
    if args.keep_states:
        man.outputs["states"] = dio.save_states(out / f"{stem}.states", traj.states).name
    _finish(man, out, stem)
    print(f"termination {traj.termination.kind} at t={traj.termination.t:.6g}; "
          f"mass drift {audit.max_mass_drift:.3e}, energy drift {audit.max_energy_drift:.3e}")
    return EXIT_OK


def _states_for(traj_path: Path) -> Path:
    stem = traj_path.name[:-len(".csv")] if traj_path.name.endswith(".csv") else traj_path.stem
    man_path = traj_path.with_name(f"{stem}.manifest.json")
    if man_path.exists():
        man = dio.RunManifest.read(man_path)
        if "states" in man.outputs:
            return traj_path.with_name(man.outputs["states"])
    cand = traj_path.with_name(f"{stem}.states")
    if cand.exists():
        return cand
    raise PreconditionError(f"no state snapshots next to {traj_path}; run evolve with --keep-states")


def cmd_modulate(args, out: Path) -> int:
    from .modulation import estimate_chain_states

    traj_path = Path(args.trajectory)
    states = dio.load_states(_states_for(traj_path))
    params = _params(args)
    chain = estimate_chain_states([t for t, _ in states], [f for _, f in states], params, args.R)
    stem = f"modulate_{traj_path.stem}"
    man = _manifest(args, params)
    man.outputs["chain"] = dio.write_text(out / f"{stem}.csv", dio.chain_csv(chain)).name
    _finish(man, out, stem)
    rows = chain.regime_rows
    worst = max((r.ortho_max for r in rows), default=float("nan"))
    print(f"{len(rows)}/{len(chain.rows)} samples in the modulation regime; max orthogonality residual {worst:.2e}")
    for k, v in chain.max_ratios().items():
        print(f"max {k} = {v:.4g}")
    return EXIT_OK


def cmd_probe(args, out: Path) -> int:
    from .grid import GridSpec, sample
    from .modulation import coercivity_probe

    params = _params(args).with_(omega=1.0)
    spec = GridSpec.from_spacing(args.L, args.h)
    probe = coercivity_probe(spec, params, n=args.n, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.n):
        k = int(rng.integers(1, 4))
        centers = rng.uniform(0, 6, k)
        widths = rng.uniform(0.3, 2.0, k)
        amps = rng.normal(size=k) + 1j * rng.normal(size=k)
        f = sample(lambda x: sum(a * np.exp(-((np.abs(x) - c) / w) ** 2) for a, c, w in zip(amps, centers, widths)),
                   spec)
        worst = max(worst, fn.gn_ratio(f, params.with_(gamma=min(params.gamma, -2.0))))
    result = {"seed": args.seed, "samples": args.n, "coercivity_c_min": probe.c_min,
              "coercivity_c_median": probe.c_median, "gn_max_ratio": worst}
    stem = f"probe_seed{args.seed}"
    man = _manifest(args, params, dio.grid_dict(spec))
    man.outputs["probe"] = dio.write_text(out / f"{stem}.json", dio.json_text(result)).name
    _finish(man, out, stem)
    print(dio.json_text(result), end="")
    return EXIT_OK


def cmd_replay(args, out: Path) -> int:
    man = dio.RunManifest.read(args.manifest)
    if man.command == "replay":
        raise PreconditionError("cannot replay a replay manifest")
    parser = build_parser()
    ns = parser.parse_args([man.command, *_defaults_only(parser, man.command)])
    for k, v in man.args.items():
        setattr(ns, k, tuple(v) if isinstance(v, list) else v)
    ns.command = man.command
    return ns.func(ns, out)


def _defaults_only(parser, command: str) -> list[str]:
    # required positionals get placeholders; the manifest overwrites them
    return ["placeholder"] if command == "modulate" else []


# --- parser ---------------------------------------------------------------------

def _common(p, gamma_default=-4.0):
    p.add_argument("--p", type=float, default=7.0, help="nonlinearity power")
    p.add_argument("--gamma", type=float, default=gamma_default, help="delta coupling (<= 0)")
    p.add_argument("--out", default=None, help="output directory (default $DELTA_NLS_OUT or ./deltanls_out)")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized probes")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deltanls", description="NLS with a repulsive delta potential")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("groundstate", help="ground-state norms, profiles and interaction asymptotics")
    _common(p)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--norms", action="store_true", help="print norms and Pohozaev/Nehari residuals")
    p.add_argument("--attained", action="store_true", help="use the attained ground state (needs omega > gamma^2/4)")
    p.add_argument("--asym", type=_range, default=None, metavar="LO:HI[:STEP]", help="asymptotic report over y")
    p.add_argument("--table", type=_range, default=None, metavar="LO:HI[:STEP]", help="profile table over x")
    p.set_defaults(func=cmd_groundstate)

    p = sub.add_parser("classify", help="threshold data and two-resolution scatter/blow-up classification")
    _common(p)
    p.add_argument("--family", choices=ex.KINDS, default="two_bump")
    p.add_argument("--ksign", type=_ksign, default=1, help="+ or -")
    p.add_argument("--y0", type=float, default=1.5)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--resolution", choices=sorted(_PRESETS), default="desk")
    p.add_argument("--no-refine", action="store_true", help="single resolution (labels then carry no agreement check)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", help="classify dilated-bump data over an (M, E) grid")
    _common(p)
    p.add_argument("--mass", type=int, default=5, help="number of mass values")
    p.add_argument("--energy", type=int, default=5, help="number of energy values")
    p.add_argument("--mass-range", type=_range, default=None)
    p.add_argument("--energy-range", type=_range, default=None)
    p.add_argument("--ksign", type=_ksign, default=1, help="preferred branch")
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--resolution", choices=sorted(_PRESETS), default="fast")
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evolve", help="evolve a soliton, threshold data or a Gaussian")
    _common(p)
    p.add_argument("--omega", type=float, default=1.0)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--soliton", action="store_true", help="attained ground state at (omega, gamma)")
    src.add_argument("--family", choices=ex.KINDS, default=None)
    p.add_argument("--ksign", type=_ksign, default=1)
    p.add_argument("--y0", type=float, default=1.5)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--amplitude", type=float, default=0.5, help="Gaussian amplitude")
    p.add_argument("--L", type=float, default=20.0, help="half-width of the box")
    p.add_argument("--h", type=float, default=5e-3)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--record-every", type=float, default=0.01)
    p.add_argument("--boundary-tol", type=float, default=1e-8)
    p.add_argument("--virial-R", type=float, default=None)
    p.add_argument("--linear", action="store_true", help="drop the nonlinearity")
    p.add_argument("--no-adapt", action="store_true")
    p.add_argument("--keep-states", action="store_true", help="store snapshots (needed by modulate)")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("modulate", help="estimate-chain table from a stored trajectory")
    _common(p)
    p.add_argument("trajectory", help="trajectory CSV written by evolve --keep-states")
    p.add_argument("--R", type=float, default=None)
    p.set_defaults(func=cmd_modulate)

    p = sub.add_parser("probe", help="randomized coercivity and Gagliardo-Nirenberg probes")
    _common(p)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--L", type=float, default=15.0)
    p.add_argument("--h", type=float, default=1e-2)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("replay", help="re-run a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_replay)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = dio.out_dir(args.out)
    try:
        return args.func(args, out)
    except DeltaNLSError as exc:
        for types, code in _EXIT:
            if isinstance(exc, types):
                print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
                return code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
