"""Uniform symmetric grid, trapezoid quadrature and the discrete delta form.

Nodes are x_j = j h for j = -n..n, so x = 0 is always a node.  The discrete
quadratic form

    q_h(f, g) = sum_j (f_{j+1} - f_j) conj(g_{j+1} - g_j) / h  -  gamma f_0 conj(g_0)

is the lumped finite-element version of integral f' g' - gamma f(0) g(0).  Its
matrix, divided by h, is the tridiagonal operator used by the evolution; the
values beyond +-L are taken to be zero (Dirichlet).
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, SpecMismatch

EVEN_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    half_width: float
    n_half: int

    def __post_init__(self):
        if not (self.half_width > 0 and self.n_half > 0):
            raise SpecMismatch("grid needs L > 0 and n_half > 0")

    @classmethod
    def from_spacing(cls, half_width: float, h: float) -> "GridSpec":
        n = int(round(half_width / h))
        if abs(n * h - half_width) > 1e-9 * half_width:
            raise SpecMismatch(f"L={half_width} is not an integer multiple of h={h}")
        return cls(float(half_width), n)

    @property
    def h(self) -> float:
        return self.half_width / self.n_half

    @property
    def size(self) -> int:
        return 2 * self.n_half + 1

    @property
    def center(self) -> int:
        return self.n_half

    @property
    def x(self) -> np.ndarray:
        return np.arange(-self.n_half, self.n_half + 1) * self.h

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.half_width, self.n_half * factor)

    def to_dict(self) -> dict:
        return {"half_width": self.half_width, "n_half": self.n_half, "h": self.h}


class GridFunction:
    """Complex samples on a GridSpec.  Treated as immutable: operations return new objects."""

    __slots__ = ("spec", "values", "even_hint")

    def __init__(self, spec: GridSpec, values, even_hint: bool | None = None):
        values = np.asarray(values, dtype=complex)
        if values.shape != (spec.size,):
            raise SpecMismatch(f"expected {spec.size} values, got shape {values.shape}")
        values.setflags(write=False)
        self.spec = spec
        self.values = values
        self.even_hint = self.is_even() if even_hint is None else bool(even_hint)

    def is_even(self, tol: float = EVEN_TOL) -> bool:
        v = self.values
        scale = max(float(np.max(np.abs(v))), 1e-300)
        return bool(np.max(np.abs(v - v[::-1])) <= tol * scale)

    @property
    def x(self) -> np.ndarray:
        return self.spec.x

    @property
    def at_zero(self) -> complex:
        return complex(self.values[self.spec.center])

    def replace(self, values, even_hint: bool | None = None) -> "GridFunction":
        return GridFunction(self.spec, values, even_hint)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _same(self, other)
        return self.replace(self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _same(self, other)
        return self.replace(self.values - other.values)

    def scaled(self, c: complex) -> "GridFunction":
        return GridFunction(self.spec, c * self.values, self.even_hint)

    def conj(self) -> "GridFunction":
        return GridFunction(self.spec, np.conj(self.values), self.even_hint)

    # --- serialization ---
    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,re,im\n")
        for xj, v in zip(self.x, self.values):
            buf.write(f"{float(xj)!r},{float(v.real)!r},{float(v.imag)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridFunction":
        rows = [ln.split(",") for ln in text.strip().splitlines()[1:]]
        data = np.array(rows, dtype=float)
        x = data[:, 0]
        n_half = (len(x) - 1) // 2
        if len(x) != 2 * n_half + 1 or abs(x[n_half]) > 1e-12:
            raise SpecMismatch("CSV grid must be symmetric with a node at 0")
        spec = GridSpec(float(x[-1]), n_half)
        return cls(spec, data[:, 1] + 1j * data[:, 2])

    def to_bytes(self) -> bytes:
        head = struct.pack("<qd", self.spec.n_half, self.spec.h)
        inter = np.empty(2 * self.spec.size, dtype="<f8")
        inter[0::2] = self.values.real
        inter[1::2] = self.values.imag
        return head + inter.tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "GridFunction":
        n_half, h = struct.unpack("<qd", blob[:16])
        arr = np.frombuffer(blob[16:], dtype="<f8")
        spec = GridSpec(n_half * h, n_half)
        return cls(spec, arr[0::2] + 1j * arr[1::2])


def _same(f: GridFunction, g: GridFunction):
    if f.spec != g.spec:
        raise SpecMismatch("grid functions live on different grids")


def sample(fn, spec: GridSpec) -> GridFunction:
    """values[j] = fn(x_j); NonFinite if any sample is NaN or Inf."""
    vals = np.asarray(fn(spec.x), dtype=complex)
    if vals.shape == ():
        vals = np.full(spec.size, vals)
    if not np.all(np.isfinite(vals)):
        raise NonFinite("sampled function is not finite on the grid")
    return GridFunction(spec, vals)


def trapezoid_weights(spec: GridSpec) -> np.ndarray:
    """Trapezoid weights on [-L-h, L+h] with the Dirichlet zeros at the extra ends: h at every node.

    This is the discrete inner product the evolution conserves exactly.
    """
    return np.full(spec.size, spec.h)


def integrate_values(values: np.ndarray, spec: GridSpec) -> complex | float:
    """Trapezoid rule (zero-extended) of raw node values; numpy's pairwise summation keeps the order fixed."""
    return np.sum(trapezoid_weights(spec) * values)


def quadrature(f: GridFunction, weight_power: float = 2.0) -> float:
    """Trapezoid rule for integral |f|^q over [-L, L]."""
    if weight_power < 1:
        raise SpecMismatch("weight power must be >= 1")
    a = np.abs(f.values)
    return float(integrate_values(a**weight_power, f.spec))


def inner(f: GridFunction, g: GridFunction) -> complex:
    """integral f conj(g) by the trapezoid rule."""
    _same(f, g)
    return complex(integrate_values(f.values * np.conj(g.values), f.spec))


def dirichlet_gamma_form(f: GridFunction, g: GridFunction, gamma: float) -> complex:
    """Discrete q(f, g) = integral f' conj(g') - gamma f(0) conj(g(0))."""
    _same(f, g)
    h = f.spec.h
    df = np.diff(f.values)
    dg = np.diff(g.values)
    c = f.spec.center
    return complex(np.sum(df * np.conj(dg)) / h - gamma * f.values[c] * np.conj(g.values[c]))


def kinetic(f: GridFunction) -> float:
    """Discrete ||f'||^2 from forward differences."""
    return float(np.sum(np.abs(np.diff(f.values)) ** 2) / f.spec.h)


@dataclass(frozen=True)
class TridiagonalOperator:
    """Symmetric tridiagonal matrix stored as its diagonal and (constant) off-diagonal."""

    diag: np.ndarray
    off: float

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[1:] += self.off * v[:-1]
        out[:-1] += self.off * v[1:]
        return out

    def banded(self) -> np.ndarray:
        """(3, n) layout for scipy.linalg.solve_banded with (l, u) = (1, 1)."""
        n = self.diag.size
        ab = np.zeros((3, n))
        ab[0, 1:] = self.off
        ab[1] = self.diag
        ab[2, :-1] = self.off
        return ab

    def to_dense(self) -> np.ndarray:
        n = self.diag.size
        return np.diag(self.diag) + self.off * (np.eye(n, k=1) + np.eye(n, k=-1))


def delta_operator_matrix(spec: GridSpec, gamma: float) -> TridiagonalOperator:
    """A f = (2 f_j - f_{j-1} - f_{j+1})/h^2, plus (-gamma/h) f_0 on the centre row."""
    h = spec.h
    diag = np.full(spec.size, 2.0 / h**2)
    diag[spec.center] -= gamma / h
    return TridiagonalOperator(diag, -1.0 / h**2)


def derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central difference; second order in the two end cells.

    Meant for integrands supported away from a kink (across the origin the
    stencil sees the jump of f' and is only first-order accurate there).
    """
    v = np.asarray(values)
    d = np.empty_like(v)
    d[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
    d[1] = (v[2] - v[0]) / (2 * h)
    d[-2] = (v[-1] - v[-3]) / (2 * h)
    d[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    d[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    return d


def half_line_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order derivative using only samples on one side (values[0] sits at the origin)."""
    v = np.asarray(values)
    d = np.empty_like(v)
    d[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
    # one-sided fourth-order stencils at both ends
    d[0] = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * h)
    d[1] = (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / (12 * h)
    d[-1] = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / (12 * h)
    d[-2] = (3 * v[-1] + 10 * v[-2] - 18 * v[-3] + 6 * v[-4] - v[-5]) / (12 * h)
    return d


def resample_even(f: GridFunction, spec: GridSpec) -> GridFunction:
    """Interpolate an even grid function onto another grid (cubic spline on x >= 0, mirrored).

    Splining on the half-line keeps the kink at the origin out of the interpolant.
    """
    from scipy.interpolate import CubicSpline

    if not f.is_even(1e-9):
        raise SpecMismatch("resample_even needs an even function")
    c = f.spec.center
    xs = f.x[c:]
    re = CubicSpline(xs, f.values.real[c:])
    im = CubicSpline(xs, f.values.imag[c:])
    r = np.abs(spec.x)
    inside = r <= xs[-1]
    vals = np.zeros(spec.size, dtype=complex)
    vals[inside] = re(r[inside]) + 1j * im(r[inside])
    return GridFunction(spec, vals, even_hint=True)
