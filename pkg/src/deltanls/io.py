"""Run manifests and deterministic CSV / JSON writers.

CSV cells are written with ``repr`` of Python floats (shortest round-trip
form), rows in a fixed order, Unix newlines: identical inputs give identical
bytes.  Every header cell reads ``name (symbol) [unit]``.
"""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io as _io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import GridFunction, GridSpec

TOOL_VERSION = "0.1.0"
OUT_ENV = "DELTA_NLS_OUT"

# name -> (symbol, unit)
COLUMNS: dict[str, tuple[str, str]] = {
    "t": ("t", "time"),
    "mass": ("M", "mass"),
    "kinetic": ("||u'||^2", "1/length"),
    "delta_point": ("|u(0)|^2", "1"),
    "lp1_norm_p1": ("||u||_{p+1}^{p+1}", "1"),
    "energy_gamma": ("E_gamma", "energy"),
    "action": ("S_omega_gamma", "energy"),
    "virial_K": ("K_gamma", "energy"),
    "nehari_I": ("I_omega_gamma", "energy"),
    "mu_gamma": ("mu_gamma", "energy"),
    "h1_omega_gamma_sq": ("||u||_{H^1_omega_gamma}^2", "energy"),
    "hdot1_gamma_sq": ("||u||_{Hdot^1_gamma}^2", "energy"),
    "sup": ("max|u|", "1"),
    "gradient_factor": ("||u'||/||u0'||", "1"),
    "local_mass_fraction": ("M(|x|<=r)/M", "1"),
    "boundary_mass_fraction": ("M(outer layer)/M", "1"),
    "gn_ratio": ("||u||_{p+1}^2/(C||u||_H1^2)", "1"),
    "dt": ("dt", "time"),
    "J": ("J", "length^2"),
    "J_R": ("J_R", "length^2"),
    "dJ_dt": ("dJ/dt", "length^2/time"),
    "dJR_dt": ("dJ_R/dt", "length^2/time"),
    "K_gamma": ("K_gamma", "energy"),
    "A_R": ("A_R", "energy"),
    "F_R": ("F_R", "energy"),
    "R": ("R", "length"),
    "in_regime": ("regime", "bool"),
    "dist": ("dist_H1", "1"),
    "theta_tilde": ("theta~", "rad"),
    "theta_dot": ("d(theta~ - t)/dt", "rad/time"),
    "y": ("y", "length"),
    "rho": ("rho", "1"),
    "rho_over_mu": ("|rho|/|mu|", "1"),
    "e_over_mu2": ("e_gamma(y)/mu^2", "1"),
    "h2_over_mu2": ("||h||_H1^2/mu^2", "1"),
    "ydot_over_mu": ("|y'|/|mu|", "1"),
    "rhodot_over_mu": ("|rho'|/|mu|", "1"),
    "thetadot_over_mu": ("|theta'|/|mu|", "1"),
    "ydot": ("y'", "length/time"),
    "rhodot": ("rho'", "1/time"),
    "ortho_max": ("max|ortho|", "1"),
    "g_norm_h1": ("||g||_H1", "1"),
    "h_norm_h1": ("||h||_H1", "1"),
    "ortho_1": ("Im<h,chi+TyQ>", "1"),
    "ortho_2": ("Re<h,(chi+TyQ)'>", "1"),
    "ortho_3": ("Re<h,chi+(TyQ)^p>", "1"),
    "e_gamma_y": ("e_gamma(y)", "1"),
    "x": ("x", "length"),
    "Q": ("Q(x)", "1"),
    "Q_prime": ("Q'(x)", "1/length"),
    "Q_omega_gamma": ("Q_omega_gamma(x)", "1"),
    "gamma_y": ("gamma_y", "1/length"),
    "exact": ("script_Q(y)", "energy"),
    "leading": ("leading term", "energy"),
    "two_term": ("two-term expansion", "energy"),
    "rel_error_leading": ("rel. error leading", "1"),
    "rel_error_two_term": ("rel. error two-term", "1"),
    "energy": ("E_gamma", "energy"),
    "omega": ("omega", "1/time"),
    "k_sign": ("sign K_gamma", "1"),
    "label": ("label", "-"),
    "t_star_or_tend": ("t* or t_end", "time"),
    "refinement_agree": ("refinement agree", "bool"),
    "manifest_path": ("manifest", "path"),
    "error": ("error", "-"),
}


def header_cell(name: str) -> str:
    sym, unit = COLUMNS.get(name, (name, "-"))
    return f"{name} ({sym}) [{unit}]"


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def csv_text(names, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([header_cell(n) for n in names])
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header names (first word of each cell) and raw rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    names = [c.split(" ", 1)[0] for c in rows[0]]
    return names, rows[1:]


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def out_dir(explicit: str | None = None) -> Path:
    return Path(explicit or os.environ.get(OUT_ENV) or "deltanls_out")


# --- trajectory tables -------------------------------------------------------------

TRAJ_FIELDS = ("t", "mass", "energy_gamma", "virial_K", "mu_gamma", "kinetic", "delta_point", "lp1_norm_p1",
               "nehari_I", "sup", "gradient_factor", "local_mass_fraction", "boundary_mass_fraction",
               "gn_ratio", "dt")
VIRIAL_FIELDS = ("J", "J_R", "dJ_dt", "dJR_dt", "K_gamma", "A_R", "F_R")


def trajectory_csv(traj, chain=None) -> str:
    """One row per record: functionals, monitors, virial samples and (optionally) estimate-chain columns."""
    names = list(TRAJ_FIELDS)
    with_virial = bool(traj.virial) and len(traj.virial) == len(traj.records)
    if with_virial:
        names += list(VIRIAL_FIELDS)
    chain_by_t = {}
    if chain is not None:
        from .modulation import ChainRow
        extra = [n for n in ChainRow.HEADER if n != "t"]
        names += extra
        chain_by_t = {round(r.t, 12): r for r in chain.rows}
    rows = []
    for k, rec in enumerate(traj.records):
        rep = rec.report
        row = [rec.t, rep.mass, rep.energy_gamma, rep.virial_K, rep.mu_gamma, rep.kinetic, rep.delta_point,
               rep.lp1_norm_p1, rep.nehari_I, rec.sup, rec.gradient_factor, rec.local_mass_fraction,
               rec.boundary_mass_fraction, rec.gn_ratio, rec.dt]
        if with_virial:
            v = traj.virial[k]
            row += [v.J, v.J_R, v.dJ_dt, v.dJR_dt, v.K_gamma, v.A_R, v.F_R]
        if chain is not None:
            cr = chain_by_t.get(round(rec.t, 12))
            row += cr.csv_row()[1:] if cr is not None else [math.nan] * (len(names) - len(row))
        rows.append(row)
    return csv_text(names, rows)


def chain_csv(chain) -> str:
    from .modulation import ChainRow
    return csv_text(ChainRow.HEADER, [r.csv_row() for r in chain.rows])


def save_states(path: Path, states) -> Path:
    """Snapshots as raw little-endian records: count, then (t, GridFunction bytes) pairs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(np.array([len(states)], dtype="<i8").tobytes())
        for t, gf in states:
            blob = gf.to_bytes()
            fh.write(np.array([t], dtype="<f8").tobytes())
            fh.write(np.array([len(blob)], dtype="<i8").tobytes())
            fh.write(blob)
    return path


def load_states(path) -> list[tuple[float, GridFunction]]:
    data = Path(path).read_bytes()
    n = int(np.frombuffer(data[:8], dtype="<i8")[0])
    pos, out = 8, []
    for _ in range(n):
        t = float(np.frombuffer(data[pos:pos + 8], dtype="<f8")[0])
        size = int(np.frombuffer(data[pos + 8:pos + 16], dtype="<i8")[0])
        pos += 16
        out.append((t, GridFunction.from_bytes(data[pos:pos + size])))
        pos += size
    return out


# --- manifests -----------------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    args: dict
    params: dict
    grid: dict | None = None
    config: dict | None = None
    outputs: dict = field(default_factory=dict)
    tool_version: str = TOOL_VERSION
    started: str = ""
    finished: str = ""

    def input_hash(self) -> str:
        """sha256 over the canonical JSON of everything that determines the outputs."""
        payload = {"command": self.command, "args": self.args, "params": self.params, "grid": self.grid,
                   "config": self.config, "tool_version": self.tool_version}
        return hashlib.sha256(json.dumps(_jsonable(payload), sort_keys=True).encode()).hexdigest()

    def to_dict(self) -> dict:
        return {"command": self.command, "args": self.args, "params": self.params, "grid": self.grid,
                "config": self.config, "outputs": self.outputs, "tool_version": self.tool_version,
                "input_hash": self.input_hash(), "started": self.started, "finished": self.finished}

    def write(self, path: Path) -> Path:
        return write_text(path, json_text(self.to_dict()))

    @classmethod
    def read(cls, path) -> "RunManifest":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(d["command"], d["args"], d["params"], d.get("grid"), d.get("config"), d.get("outputs", {}),
                   d.get("tool_version", TOOL_VERSION), d.get("started", ""), d.get("finished", ""))


def now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def grid_dict(spec: GridSpec) -> dict:
    return spec.to_dict()
