"""Mode reduction of the deformation operators on the tube.

A one-form on the tube decomposes per cross-section mode into radial profiles
against the lifted basis covectors; symmetric 2-tensors likewise.  On each
mode the relevant operators become systems of radial ODEs

    (O X)_i = -X_i'' - q(r) X_i' + sum_j V_ij(r) X_j,
    q(r) = 1/th(r) + (n-2) th(r),

with potentials V assembled from the nine registered radial coefficient
functions.  This module owns those systems: it applies them pointwise, forms
the first-order gradient/exterior-derivative displays for one-form blocks,
computes weighted tube norms by Gauss-Legendre quadrature, and produces the
standard singular deformation blocks (cone angle, locus metric, gluing).

One-form block kinds: A (scalar mode with gradient part: f, g, omega),
B (scalar mode, eigenvalue 0: f, g), C (co-closed mode: varpi).
Tensor block kinds: A (scalar mode, eigenvalue > 0: f, g, h, sigma, eta, k1
and k2 when the dimension admits it), B (scalar mode, eigenvalue 0: f, g, h,
k1), C (co-closed mode: sigma_bar, eta_bar and k3 when mu + n - 3 > 0),
D (trace-free transverse mode: k4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import roots_legendre

from conemodes.geometry import (
    ConeModel,
    DomainError,
    LaurentSeries,
    RADIAL_FUNCTIONS,
)
from conemodes.modes import (
    CoclosedMode,
    Mode,
    ScalarMode,
    TTMode,
    active_tensor_families,
)

__all__ = [
    "RadialExpr",
    "RadialProfile",
    "OneFormModeBlock",
    "TensorModeBlock",
    "ModeSystem",
    "oneform_system",
    "tensor_system",
    "apply_L_oneform",
    "apply_P_tensor",
    "grad_oneform",
    "ext_d_oneform",
    "trace_tensor_mode",
    "scalar_mode_operator",
    "l2_norm_tube",
    "QuadratureConvergenceError",
    "standard_deformation_block",
    "log_grid",
    "component_weights",
    "block_to_dict",
    "block_from_dict",
    "block_csv_rows",
]


# ---------------------------------------------------------------------------
# radial coefficient algebra


@dataclass(frozen=True)
class RadialExpr:
    """Linear combination of products of registered radial functions.

    terms[k] = (coefficient, tuple of function names); the empty tuple is the
    constant function 1.  A single representation serves both the float
    evaluators and the exact Laurent expansion, so the indicial data is
    generated from the same object that the pointwise operator uses.
    """

    terms: tuple

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        acc = np.zeros(r.shape, dtype=complex)
        for c, names in self.terms:
            if c == 0:
                continue
            part = np.ones(r.shape, dtype=float)
            for name in names:
                part = part * RADIAL_FUNCTIONS[name](r)
            acc = acc + c * part
        return acc if acc.shape else acc[()]

    def __add__(self, other: "RadialExpr") -> "RadialExpr":
        return RadialExpr(self.terms + other.terms)

    def __mul__(self, scalar) -> "RadialExpr":
        return RadialExpr(tuple((c * scalar, names) for c, names in self.terms))

    __rmul__ = __mul__

    def _term_value(self, r, names, orders):
        part = np.ones(np.shape(r))
        for name, k in zip(names, orders):
            fn = RADIAL_FUNCTIONS[name]
            part = part * (fn(r), fn.d1(r), fn.d2(r))[k]
        return part

    def eval_d1(self, r):
        r = np.asarray(r, dtype=float)
        acc = np.zeros(r.shape, dtype=complex)
        for c, names in self.terms:
            if c == 0:
                continue
            for i in range(len(names)):
                orders = [1 if j == i else 0 for j in range(len(names))]
                acc = acc + c * self._term_value(r, names, orders)
        return acc

    def eval_d2(self, r):
        r = np.asarray(r, dtype=float)
        acc = np.zeros(r.shape, dtype=complex)
        for c, names in self.terms:
            if c == 0:
                continue
            m = len(names)
            for i in range(m):
                orders = [2 if j == i else 0 for j in range(m)]
                acc = acc + c * self._term_value(r, names, orders)
            for i in range(m):
                for j in range(m):
                    if i != j:
                        orders = [1 if k in (i, j) else 0 for k in range(m)]
                        acc = acc + c * self._term_value(r, names, orders)
        return acc

    def laurent(self, order: int) -> LaurentSeries:
        """Exact Laurent series with `order` coefficients from the leading power."""
        lead = min((sum(RADIAL_FUNCTIONS[n].leading for n in names)
                    for _, names in self.terms), default=0)
        acc = None
        for c, names in self.terms:
            if c == 0:
                continue
            part = LaurentSeries(0, tuple([Fraction(1)] + [Fraction(0)] * (order + 8)))
            for name in names:
                part = part * RADIAL_FUNCTIONS[name].series(order + 8)
            part = c * part
            acc = part if acc is None else acc + part
        if acc is None:
            acc = LaurentSeries(lead, (0j,) * order)
        coeffs = [acc.coefficient(lead + k) for k in range(order)]
        return LaurentSeries(lead, tuple(complex(c) for c in coeffs))


def _ex(*names) -> RadialExpr:
    return RadialExpr(((1.0 + 0j, tuple(names)),))


def _const(c) -> RadialExpr:
    return RadialExpr(((complex(c), ()),))


_ZERO = RadialExpr(())
_IT2 = _ex("inv_th", "inv_th")
_TH2 = _ex("th", "th")
_S2 = _ex("inv_sh_sq")
_C2 = _ex("inv_ch_sq")
_STI = _ex("sh_th_inv")
_THC = _ex("th", "inv_ch")


# ---------------------------------------------------------------------------
# radial profiles


class RadialProfile:
    """Complex radial profile with two derivatives.

    Wraps (value, d1, d2) callables; analytic constructors are preferred so
    operator applications see exact derivatives.  Profiles form a complex
    vector space.
    """

    def __init__(self, val: Callable, d1: Callable, d2: Callable):
        self._val, self._d1, self._d2 = val, d1, d2

    def __call__(self, r):
        return np.asarray(self._val(np.asarray(r, dtype=float)), dtype=complex)

    def d1(self, r):
        return np.asarray(self._d1(np.asarray(r, dtype=float)), dtype=complex)

    def d2(self, r):
        return np.asarray(self._d2(np.asarray(r, dtype=float)), dtype=complex)

    def __add__(self, other: "RadialProfile") -> "RadialProfile":
        return RadialProfile(
            lambda r: self._val(r) + other._val(r),
            lambda r: self._d1(r) + other._d1(r),
            lambda r: self._d2(r) + other._d2(r),
        )

    def __mul__(self, c) -> "RadialProfile":
        return RadialProfile(
            lambda r: c * np.asarray(self._val(r), dtype=complex),
            lambda r: c * np.asarray(self._d1(r), dtype=complex),
            lambda r: c * np.asarray(self._d2(r), dtype=complex),
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def __sub__(self, other):
        return self + (-other)

    def times(self, other: "RadialProfile") -> "RadialProfile":
        return RadialProfile(
            lambda r: self._val(r) * other._val(r),
            lambda r: self._d1(r) * other._val(r) + self._val(r) * other._d1(r),
            lambda r: (
                self._d2(r) * other._val(r)
                + 2.0 * self._d1(r) * other._d1(r)
                + self._val(r) * other._d2(r)
            ),
        )

    @classmethod
    def zero(cls) -> "RadialProfile":
        z = lambda r: np.zeros(np.shape(r), dtype=complex)
        return cls(z, z, z)

    @classmethod
    def constant(cls, c) -> "RadialProfile":
        z = lambda r: np.zeros(np.shape(r), dtype=complex)
        return cls(lambda r: c * np.ones(np.shape(r), dtype=complex), z, z)

    @classmethod
    def monomial(cls, k: float, c=1.0) -> "RadialProfile":
        return cls(
            lambda r: c * r ** k,
            lambda r: c * k * r ** (k - 1) if k != 0 else np.zeros(np.shape(r)),
            lambda r: (c * k * (k - 1) * r ** (k - 2)
                       if k not in (0, 1) else np.zeros(np.shape(r))),
        )

    @classmethod
    def from_expr(cls, expr: RadialExpr) -> "RadialProfile":
        return cls(lambda r: expr(r), expr.eval_d1, expr.eval_d2)

    @classmethod
    def from_sympy(cls, expr_text: str) -> "RadialProfile":
        import sympy as sp

        r = sp.symbols("r", positive=True)
        e = sp.sympify(expr_text, locals={"r": r, "I": sp.I})
        fns = [sp.lambdify(r, sp.diff(e, r, k), modules="numpy") for k in range(3)]

        def wrap(fn):
            def call(x):
                x = np.asarray(x, dtype=float)
                out = np.asarray(fn(x), dtype=complex)
                return np.broadcast_to(out, x.shape).copy() if out.shape != x.shape else out
            return call

        return cls(*[wrap(f) for f in fns])

    @classmethod
    def from_grid(cls, r_grid, values, d1=None, d2=None) -> "RadialProfile":
        """Sampled profile on an increasing grid; derivatives optional.

        If d1 is supplied the profile is the cubic Hermite interpolant, which
        reproduces the given derivative arrays at the nodes.
        """
        r_grid = np.asarray(r_grid, dtype=float)
        values = np.asarray(values, dtype=complex)
        if d1 is None:
            d1 = np.gradient(values, r_grid)
        d1 = np.asarray(d1, dtype=complex)
        spline = CubicHermiteSpline(r_grid, values, d1)
        dsp = spline.derivative()
        d2sp = dsp.derivative()
        prof = cls(lambda r: spline(r), lambda r: dsp(r),
                   (lambda r: d2sp(r)) if d2 is None
                   else cls._grid_interp(r_grid, np.asarray(d2, dtype=complex)))
        prof.grid = r_grid
        prof.grid_values = values
        prof.grid_d1 = d1
        prof.grid_d2 = None if d2 is None else np.asarray(d2, dtype=complex)
        return prof

    @staticmethod
    def _grid_interp(r_grid, arr):
        def call(r):
            return (np.interp(r, r_grid, arr.real)
                    + 1j * np.interp(r, r_grid, arr.imag))
        return call

    def consistency_residual(self) -> float:
        """Max relative mismatch between the derivative array and a central
        difference of the value array on the stored grid (grid profiles only)."""
        if not hasattr(self, "grid"):
            raise ValueError("consistency check applies to grid-sampled profiles")
        r, v, d1 = self.grid, self.grid_values, self.grid_d1
        if len(r) < 3:
            return 0.0
        fd = (v[2:] - v[:-2]) / (r[2:] - r[:-2])
        scale = np.max(np.abs(d1)) or 1.0
        return float(np.max(np.abs(fd - d1[1:-1])) / scale)


def log_grid(model: ConeModel, num: int = 200, inner: float = 1e-6) -> np.ndarray:
    """Default radial sample grid: log-spaced from `inner` to the tube radius."""
    return np.geomspace(inner, model.tube_radius, num)


# ---------------------------------------------------------------------------
# mode blocks

_ONEFORM_COMPONENTS = {"A": ("f", "g", "omega"), "B": ("f", "g"), "C": ("varpi",)}
_TENSOR_COMPONENTS = {
    "A": ("f", "g", "h", "sigma", "eta", "k1", "k2"),
    "B": ("f", "g", "h", "k1"),
    "C": ("sigma_bar", "eta_bar", "k3"),
    "D": ("k4",),
}


def _check_kind_mode(family: str, kind: str, mode: Mode) -> None:
    table = _ONEFORM_COMPONENTS if family == "oneform" else _TENSOR_COMPONENTS
    if kind not in table:
        raise ValueError(f"unknown {family} block kind {kind!r}")
    if kind in ("A", "B"):
        if not isinstance(mode, ScalarMode):
            raise ValueError(f"kind {kind} blocks carry a scalar mode")
        if kind == "A" and not mode.lam > 0:
            raise ValueError("kind A needs a positive scalar eigenvalue")
        if kind == "B" and mode.lam != 0:
            raise ValueError("kind B is the zero-eigenvalue scalar block")
    elif kind == "C":
        if not isinstance(mode, CoclosedMode):
            raise ValueError("kind C blocks carry a co-closed mode")
    elif kind == "D":
        if not isinstance(mode, TTMode):
            raise ValueError("kind D blocks carry a trace-free transverse mode")


@dataclass(frozen=True)
class OneFormModeBlock:
    kind: str
    mode: Mode
    profiles: Mapping[str, RadialProfile] = field(default_factory=dict)

    def __post_init__(self):
        _check_kind_mode("oneform", self.kind, self.mode)
        extra = set(self.profiles) - set(_ONEFORM_COMPONENTS[self.kind])
        if extra:
            raise ValueError(f"components {sorted(extra)} not in kind {self.kind}")

    @property
    def family(self) -> str:
        return "oneform"

    def component(self, name: str) -> RadialProfile:
        return self.profiles.get(name, RadialProfile.zero())


@dataclass(frozen=True)
class TensorModeBlock:
    kind: str
    mode: Mode
    profiles: Mapping[str, RadialProfile] = field(default_factory=dict)

    def __post_init__(self):
        _check_kind_mode("tensor", self.kind, self.mode)
        extra = set(self.profiles) - set(_TENSOR_COMPONENTS[self.kind])
        if extra:
            raise ValueError(f"components {sorted(extra)} not in kind {self.kind}")

    @property
    def family(self) -> str:
        return "tensor"

    def component(self, name: str) -> RadialProfile:
        return self.profiles.get(name, RadialProfile.zero())


def component_weights(family: str, names) -> np.ndarray:
    """Pointwise norm weights of block components.

    Diagonal-slot components weigh 1; components multiplying a symmetrized
    product of two orthonormal covectors weigh 1/2.
    """
    half = {"h", "sigma", "eta", "sigma_bar", "eta_bar"}
    if family == "oneform":
        return np.ones(len(names))
    return np.array([0.5 if n in half else 1.0 for n in names])


# ---------------------------------------------------------------------------
# the reduced operator systems


@dataclass(frozen=True)
class ModeSystem:
    """One mode's radial ODE system for a deformation operator."""

    family: str
    kind: str
    mode: Mode
    n: int
    gamma: float
    names: tuple
    drift: RadialExpr
    potential: tuple  # tuple of tuples of RadialExpr, row-major

    @property
    def arity(self) -> int:
        return len(self.names)

    def drift_at(self, r):
        return np.real(self.drift(r))

    def drift_d1_at(self, r):
        return np.real(self.drift.eval_d1(r))

    def drift_d2_at(self, r):
        return np.real(self.drift.eval_d2(r))

    def potential_at(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros((self.arity, self.arity) + r.shape, dtype=complex)
        for i in range(self.arity):
            for j in range(self.arity):
                expr = self.potential[i][j]
                if expr.terms:
                    out[i, j] = expr(r)
        return out

    def potential_d1_at(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros((self.arity, self.arity) + r.shape, dtype=complex)
        for i in range(self.arity):
            for j in range(self.arity):
                expr = self.potential[i][j]
                if expr.terms:
                    out[i, j] = expr.eval_d1(r)
        return out

    def potential_d2_at(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros((self.arity, self.arity) + r.shape, dtype=complex)
        for i in range(self.arity):
            for j in range(self.arity):
                expr = self.potential[i][j]
                if expr.terms:
                    out[i, j] = expr.eval_d2(r)
        return out

    def apply(self, block, r):
        """Pointwise operator value on the block's profiles at radii r."""
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise DomainError("operator application needs r > 0")
        profs = [block.component(name) for name in self.names]
        q = self.drift_at(r)
        V = self.potential_at(r)
        vals = np.stack([p(r) for p in profs])
        out = {}
        for i, name in enumerate(self.names):
            acc = -profs[i].d2(r) - q * profs[i].d1(r)
            for j in range(self.arity):
                acc = acc + V[i, j] * vals[j]
            out[name] = acc
        return out

    def rhs_first_order(self, r, y, source=None):
        """First-order form for integrators: y = [X, X'] stacked, O X = src."""
        k = self.arity
        X, dX = y[:k], y[k:]
        q = self.drift_at(r)
        V = self.potential_at(r)
        src = np.zeros(k, dtype=complex) if source is None else source(r)
        ddX = -src - q * dX + V @ X
        # O X = -X'' - q X' + V X = src  =>  X'' = -q X' + V X - src
        return np.concatenate([dX, ddX])

    def laurent_drift(self, order: int) -> LaurentSeries:
        """Exact series of r * q(r) (leading coefficient 1, even powers)."""
        s = self.drift.laurent(order + 2)
        return LaurentSeries(s.leading + 1, s.coeffs[:order])

    def laurent_potential(self, order: int):
        """W_j matrices: r^2 V(r) = sum_j W_j r^j, j = 0..order-1, exact."""
        k = self.arity
        mats = [np.zeros((k, k), dtype=complex) for _ in range(order)]
        for i in range(k):
            for j in range(k):
                expr = self.potential[i][j]
                if not expr.terms:
                    continue
                s = expr.laurent(order + 3)
                for m in range(order):
                    mats[m][i, j] = complex(s.coefficient(m - 2))
        return mats


def _drift(n: int) -> RadialExpr:
    return _ex("inv_th") + float(n - 2) * _ex("th")


def _grid_table(k: int):
    return [[_ZERO for _ in range(k)] for _ in range(k)]


def oneform_system(model: ConeModel, mode: Mode, kind: str) -> ModeSystem:
    """Reduced system of the one-form operator (connection Laplacian + (n-1))."""
    _check_kind_mode("oneform", kind, mode)
    n, g = model.n, model.gamma
    pg = mode.p * g
    names = _ONEFORM_COMPONENTS[kind]
    k = len(names)
    V = _grid_table(k)
    if kind in ("A", "B"):
        lam = mode.lam
        rootl = math.sqrt(lam)
        V[0][0] = (_IT2 + float(n - 2) * _TH2 + (pg * pg) * _S2
                   + lam * _C2 + _const(n - 1))
        V[0][1] = (2j * pg) * _STI
        V[1][0] = (-2j * pg) * _STI
        V[1][1] = _IT2 + (pg * pg) * _S2 + lam * _C2 + _const(n - 1)
        if kind == "A":
            V[0][2] = (-2.0 * rootl) * _THC
            V[2][0] = (-2.0 * rootl) * _THC
            V[2][2] = (_TH2 + (pg * pg) * _S2 + (lam + n - 3) * _C2
                       + _const(n - 1))
    else:
        mu = mode.mu
        V[0][0] = _TH2 + (pg * pg) * _S2 + mu * _C2 + _const(n - 1)
    return ModeSystem("oneform", kind, mode, n, g, names, _drift(n),
                      tuple(tuple(row) for row in V))


def tensor_system(model: ConeModel, mode: Mode, kind: str) -> ModeSystem:
    """Reduced system of the trace-coupled tensor operator (connection
    Laplacian minus twice the curvature action)."""
    _check_kind_mode("tensor", kind, mode)
    n, g = model.n, model.gamma
    pg = mode.p * g
    fams = active_tensor_families(n, mode)
    if kind == "A":
        names = ("f", "g", "h", "sigma", "eta", "k1") + (("k2",) if "b" in fams else ())
    elif kind == "B":
        names = ("f", "g", "h", "k1")
    elif kind == "C":
        names = ("sigma_bar", "eta_bar") + (("k3",) if "c" in fams else ())
    else:
        names = ("k4",)
    idx = {nm: i for i, nm in enumerate(names)}
    k = len(names)
    V = _grid_table(k)
    G = (pg * pg) * _S2

    if kind in ("A", "B"):
        lam = mode.lam
        rootl = math.sqrt(lam)
        rn2 = math.sqrt(n - 2)
        lam_c2 = lam * _C2 if lam else _ZERO
        V[idx["f"]][idx["f"]] = 2.0 * _IT2 + (2.0 * (n - 2)) * _TH2 + G + lam_c2
        V[idx["f"]][idx["g"]] = _const(2.0) + (-2.0) * _IT2
        V[idx["f"]][idx["h"]] = (2j * pg) * _STI
        V[idx["f"]][idx["k1"]] = rn2 * (_const(2.0) + (-2.0) * _TH2)
        V[idx["g"]][idx["f"]] = _const(2.0) + (-2.0) * _IT2
        V[idx["g"]][idx["g"]] = 2.0 * _IT2 + G + lam_c2
        V[idx["g"]][idx["h"]] = (-2j * pg) * _STI
        V[idx["g"]][idx["k1"]] = _const(2.0 * rn2)
        V[idx["h"]][idx["f"]] = (-4j * pg) * _STI
        V[idx["h"]][idx["g"]] = (4j * pg) * _STI
        V[idx["h"]][idx["h"]] = (4.0 * _IT2 + float(n - 2) * _TH2 + G + lam_c2
                                 + _const(-2.0))
        V[idx["k1"]][idx["f"]] = (2.0 * rn2) * (_const(1.0) + (-1.0) * _TH2)
        V[idx["k1"]][idx["g"]] = _const(2.0 * rn2)
        V[idx["k1"]][idx["k1"]] = (2.0 * _TH2 + G + lam_c2
                                   + _const(-2.0 + 2.0 * (n - 2)))
        if kind == "A":
            blam = math.sqrt(lam / (n - 2))
            V[idx["f"]][idx["sigma"]] = (-2.0 * rootl) * _THC
            V[idx["h"]][idx["eta"]] = (-2.0 * rootl) * _THC
            V[idx["sigma"]][idx["sigma"]] = (_IT2 + float(n + 1) * _TH2 + G
                                             + (lam + n - 3) * _C2 + _const(-2.0))
            V[idx["sigma"]][idx["f"]] = (-4.0 * rootl) * _THC
            V[idx["sigma"]][idx["eta"]] = (2j * pg) * _STI
            V[idx["sigma"]][idx["k1"]] = (4.0 * blam) * _THC
            V[idx["eta"]][idx["eta"]] = (_IT2 + _TH2 + G + (lam + n - 3) * _C2
                                         + _const(-2.0))
            V[idx["eta"]][idx["h"]] = (-2.0 * rootl) * _THC
            V[idx["eta"]][idx["sigma"]] = (-2j * pg) * _STI
            V[idx["k1"]][idx["sigma"]] = (2.0 * blam) * _THC
            if "k2" in idx:
                cb = math.sqrt(n - 3) * math.sqrt(lam / (n - 2) + 1.0)
                V[idx["sigma"]][idx["k2"]] = (-4.0 * cb) * _THC
                V[idx["k2"]][idx["sigma"]] = (-2.0 * cb) * _THC
                V[idx["k2"]][idx["k2"]] = (2.0 * _TH2 + G
                                           + (lam + 2.0 * (n - 2)) * _C2
                                           + _const(-2.0))
    elif kind == "C":
        mu = mode.mu
        V[idx["sigma_bar"]][idx["sigma_bar"]] = (_IT2 + float(n + 1) * _TH2 + G
                                                 + mu * _C2 + _const(-2.0))
        V[idx["sigma_bar"]][idx["eta_bar"]] = (2j * pg) * _STI
        V[idx["eta_bar"]][idx["sigma_bar"]] = (-2j * pg) * _STI
        V[idx["eta_bar"]][idx["eta_bar"]] = (_IT2 + _TH2 + G + mu * _C2
                                             + _const(-2.0))
        if "k3" in idx:
            cc = math.sqrt((mu + n - 3) / 2.0)
            V[idx["sigma_bar"]][idx["k3"]] = (-4.0 * cc) * _THC
            V[idx["k3"]][idx["sigma_bar"]] = (-2.0 * cc) * _THC
            V[idx["k3"]][idx["k3"]] = (2.0 * _TH2 + G + (mu + n - 1) * _C2
                                       + _const(-2.0))
    else:
        nu = mode.nu
        V[idx["k4"]][idx["k4"]] = 2.0 * _TH2 + G + nu * _C2 + _const(-2.0)

    return ModeSystem("tensor", kind, mode, n, g, names, _drift(n),
                      tuple(tuple(row) for row in V))


def apply_L_oneform(model: ConeModel, block: OneFormModeBlock, r):
    """Pointwise value of the one-form operator on the block at radii r."""
    r = _check_radii(model, r)
    return oneform_system(model, block.mode, block.kind).apply(block, r)


def apply_P_tensor(model: ConeModel, block: TensorModeBlock, r):
    """Pointwise value of the tensor operator on the block at radii r."""
    r = _check_radii(model, r)
    return tensor_system(model, block.mode, block.kind).apply(block, r)


def _check_radii(model, r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("operator application needs r > 0")
    if np.any(r > model.tube_radius):
        raise DomainError("radius outside the tube")
    return r


# ---------------------------------------------------------------------------
# first-order displays on one-form blocks


def grad_oneform(model: ConeModel, block: OneFormModeBlock, r):
    """Frame components of the covariant derivative of a one-form block.

    Keys name the output slot: "er_eth" is the e^r (x) e^theta component's
    radial coefficient, "metric_trace" multiplies the lifted cross-section
    metric, "sym_grad_phi" multiplies the symmetrized cross-section gradient
    of the mode one-form, "nabla_varphi" the full cross-section derivative.
    """
    r = _check_radii(model, r)
    ish = 1.0 / np.sinh(r)
    ith = 1.0 / np.tanh(r)
    th = np.tanh(r)
    ipg = 1j * block.mode.p * model.gamma
    out = {}
    if block.kind in ("A", "B"):
        f, g = block.component("f"), block.component("g")
        fv, gv = f(r), g(r)
        out["er_er"] = f.d1(r)
        out["er_eth"] = g.d1(r)
        out["eth_er"] = ipg * ish * fv - ith * gv
        out["eth_eth"] = ith * fv + ipg * ish * gv
        out["metric_trace"] = th * fv
        if block.kind == "A":
            lam = block.mode.lam
            rl_ch = math.sqrt(lam) / np.cosh(r)
            w = block.component("omega")
            wv = w(r)
            out["er_phi"] = w.d1(r)
            out["eth_phi"] = ipg * ish * wv
            out["phi_er"] = rl_ch * fv - th * wv
            out["phi_eth"] = rl_ch * gv
            out["sym_grad_phi"] = wv
    else:
        vp = block.component("varpi")
        vv = vp(r)
        out["er_varphi"] = vp.d1(r)
        out["eth_varphi"] = ipg * ish * vv
        out["varphi_er"] = -th * vv
        out["nabla_varphi"] = vv
    return out


def ext_d_oneform(model: ConeModel, block: OneFormModeBlock, r):
    """Frame components of the exterior derivative of a one-form block."""
    r = _check_radii(model, r)
    ish = 1.0 / np.sinh(r)
    ith = 1.0 / np.tanh(r)
    th = np.tanh(r)
    ipg = 1j * block.mode.p * model.gamma
    out = {}
    if block.kind in ("A", "B"):
        f, g = block.component("f"), block.component("g")
        fv, gv = f(r), g(r)
        out["er_eth"] = g.d1(r) + ith * gv - ipg * ish * fv
        if block.kind == "A":
            lam = block.mode.lam
            rl_ch = math.sqrt(lam) / np.cosh(r)
            w = block.component("omega")
            wv = w(r)
            out["er_phi"] = w.d1(r) + th * wv - rl_ch * fv
            out["eth_phi"] = ipg * ish * wv - rl_ch * gv
    else:
        vp = block.component("varpi")
        vv = vp(r)
        out["er_varphi"] = vp.d1(r) + th * vv
        out["eth_varphi"] = ipg * ish * vv
        out["d_varphi"] = vv
    return out


# ---------------------------------------------------------------------------
# traces


def trace_tensor_mode(model: ConeModel, block: TensorModeBlock) -> RadialProfile:
    """Scalar mode profile of the metric trace of a tensor block."""
    if block.kind in ("C", "D"):
        return RadialProfile.zero()
    rn2 = math.sqrt(model.n - 2)
    return (block.component("f") + block.component("g")
            + rn2 * block.component("k1"))


def scalar_mode_operator(model: ConeModel, mode: ScalarMode,
                         profile: RadialProfile, r, shift: float):
    """Reduced scalar Laplace-type operator with zeroth-order shift.

    Value of -t'' - q t' + ((p*gamma)^2/sh^2 + lambda/ch^2) t + shift * t,
    the operator the trace of a tensor block must satisfy when the block is
    in the kernel of the deformation operator.
    """
    r = _check_radii(model, r)
    pg = mode.p * model.gamma
    q = np.real(_drift(model.n)(r))
    pot = (pg * pg) / np.sinh(r) ** 2 + mode.lam / np.cosh(r) ** 2
    return (-profile.d2(r) - q * profile.d1(r)
            + (pot + shift) * profile(r))


# ---------------------------------------------------------------------------
# weighted tube quadrature


class QuadratureConvergenceError(RuntimeError):
    """Gauss-Legendre refinement disagreed beyond tolerance."""

    def __init__(self, coarse, fine, rtol):
        super().__init__(
            f"tube quadrature did not settle: {coarse!r} vs {fine!r} at rtol {rtol}")
        self.coarse = coarse
        self.fine = fine


def _tube_weight(model: ConeModel, r):
    a = model.tube_radius
    return (np.sinh(r) / math.sinh(a)) * (np.cosh(r) / math.cosh(a)) ** (model.n - 2)


def l2_norm_tube(model: ConeModel, block_or_profiles, inner_cutoff: float = 0.0,
                 num_nodes: int = 200, rtol: float = 1e-9,
                 weights=None) -> float:
    """Weighted squared tube norm of block components by Gauss-Legendre.

    Integrates sum_i w_i |c_i(r)|^2 * (sh(r)/sh(a)) (ch(r)/ch(a))^(n-2)
    over [inner_cutoff, a].  Component weights default to 1; pass `weights`
    to use the symmetrized-slot convention.  Non-convergence between the
    requested node count and a finer rule raises, never returns silently.
    """
    if isinstance(block_or_profiles, (OneFormModeBlock, TensorModeBlock)):
        names = (_ONEFORM_COMPONENTS if block_or_profiles.family == "oneform"
                 else _TENSOR_COMPONENTS)[block_or_profiles.kind]
        profiles = [block_or_profiles.component(nm) for nm in names]
        if isinstance(weights, str):
            if weights != "symmetrized":
                raise ValueError(f"unknown weight convention {weights!r}")
            weights = component_weights(block_or_profiles.family, names)
    else:
        profiles = list(block_or_profiles)
        if isinstance(weights, str):
            raise ValueError("named weight conventions need a block, not raw profiles")
    if weights is None:
        weights = np.ones(len(profiles))
    a = model.tube_radius
    lo = float(inner_cutoff)
    if not (0.0 <= lo < a):
        raise ValueError("inner cutoff must lie in [0, tube radius)")

    def integrate(nn):
        x, w = roots_legendre(nn)
        r = 0.5 * (a - lo) * (x + 1.0) + lo
        scale = 0.5 * (a - lo)
        dens = np.zeros_like(r)
        for wt, p in zip(weights, profiles):
            dens = dens + wt * np.abs(p(r)) ** 2
        return float(np.sum(w * dens * _tube_weight(model, r)) * scale)

    coarse = integrate(num_nodes)
    fine = integrate(int(num_nodes * 1.6) + 8)
    tol = rtol * max(1.0, abs(fine))
    if abs(fine - coarse) > tol:
        raise QuadratureConvergenceError(coarse, fine, rtol)
    return fine


# ---------------------------------------------------------------------------
# standard singular deformations


def standard_deformation_block(model: ConeModel, kind: str):
    """Mode block of a standard deformation germ near the singular locus.

    "angle": the cone-angle change, the squared-sinh theta form (profile 1 on
    the theta-theta frame slot).  "locus_metric": a constant change of the
    cross-section metric (constant trace-slot profile).  "angle_gluing": the
    unit gluing form r^2 dtheta sym omega with omega the parallel co-closed
    one-form, profile r^2/(sh ch) on the theta-cross slot.
    """
    if kind == "angle":
        return TensorModeBlock("B", ScalarMode(0.0, 0),
                               {"g": RadialProfile.constant(1.0)})
    if kind == "locus_metric":
        return TensorModeBlock("B", ScalarMode(0.0, 0),
                               {"k1": RadialProfile.constant(1.0)})
    if kind == "angle_gluing":
        prof = RadialProfile.from_sympy("r**2/(sinh(r)*cosh(r))")
        return TensorModeBlock("C", CoclosedMode(0.0, 0), {"eta_bar": prof})
    raise ValueError(f"unknown standard deformation {kind!r}")


# ---------------------------------------------------------------------------
# block serialization


def block_to_dict(model: ConeModel, block, grid=None) -> dict:
    """Sampled JSON form of a block: mode, kind, per-component value arrays."""
    if grid is None:
        grid = log_grid(model)
    grid = np.asarray(grid, dtype=float)
    mode = block.mode
    if isinstance(mode, ScalarMode):
        mode_d = {"type": "scalar", "lambda": mode.lam, "p": mode.p}
    elif isinstance(mode, CoclosedMode):
        mode_d = {"type": "coclosed", "mu": mode.mu, "p": mode.p}
    else:
        mode_d = {"type": "tt", "nu": mode.nu, "p": mode.p}
    comps = {}
    for name in (_ONEFORM_COMPONENTS if block.family == "oneform"
                 else _TENSOR_COMPONENTS)[block.kind]:
        if name not in block.profiles:
            continue
        p = block.profiles[name]
        comps[name] = {
            "value_re": p(grid).real.tolist(),
            "value_im": p(grid).imag.tolist(),
            "d1_re": p.d1(grid).real.tolist(),
            "d1_im": p.d1(grid).imag.tolist(),
        }
    return {
        "family": block.family,
        "kind": block.kind,
        "mode": mode_d,
        "grid": grid.tolist(),
        "profiles": comps,
    }


def block_from_dict(d: dict):
    """Rebuild a block from its sampled JSON form (grid-interpolated)."""
    md = d["mode"]
    if md["type"] == "scalar":
        mode = ScalarMode(md["lambda"], md["p"])
    elif md["type"] == "coclosed":
        mode = CoclosedMode(md["mu"], md["p"])
    else:
        mode = TTMode(md["nu"], md["p"])
    grid = np.asarray(d["grid"], dtype=float)
    profiles = {}
    for name, c in d["profiles"].items():
        vals = np.asarray(c["value_re"]) + 1j * np.asarray(c["value_im"])
        d1 = np.asarray(c["d1_re"]) + 1j * np.asarray(c["d1_im"])
        profiles[name] = RadialProfile.from_grid(grid, vals, d1)
    cls = OneFormModeBlock if d["family"] == "oneform" else TensorModeBlock
    return cls(d["kind"], mode, profiles)


def block_csv_rows(model: ConeModel, block, grid=None):
    """Plot-ready rows: header then (r, comp_re, comp_im, ...) per radius."""
    if grid is None:
        grid = log_grid(model)
    grid = np.asarray(grid, dtype=float)
    names = [nm for nm in (_ONEFORM_COMPONENTS if block.family == "oneform"
                           else _TENSOR_COMPONENTS)[block.kind]
             if nm in block.profiles]
    header = ["r"]
    for nm in names:
        header += [f"{nm}_re", f"{nm}_im"]
    vals = [block.profiles[nm](grid) for nm in names]
    rows = []
    for i, r in enumerate(grid):
        row = [f"{r:.12g}"]
        for v in vals:
            row += [f"{v[i].real:.12g}", f"{v[i].imag:.12g}"]
        rows.append(row)
    return header, rows
