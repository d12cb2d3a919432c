"""Independent coordinate tensor calculus on the explicit three-dimensional tube.

Everything here lives in the chart (r, theta, s) with metric
diag(1, sinh^2 r, cosh^2 r): Christoffel symbols, curvature and all
operators are generated from that metric by the generic Levi-Civita
recipe, never from the mode-reduced radial systems. Agreement between
the two routes is established by the test suite, not assumed.

Fields keep the single-mode structure profile(r) * exp(i(p*gamma*theta + k*s)),
so angular derivatives are exact multiplications and only the radial
direction carries analytic derivative chains.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.special import roots_legendre

from conemodes.geometry import ConeModel, DomainError
from conemodes.modes import CoclosedMode, ScalarMode

__all__ = [
    "ChainProfile",
    "TubeChart",
    "OracleField",
    "christoffel_coords",
    "covariant_derivative",
    "adjoint_divergence",
    "rough_laplacian",
    "codifferential",
    "exterior_d",
    "delta_star",
    "trace",
    "bianchi_beta",
    "ricci_action",
    "d_nabla",
    "delta_nabla",
    "apply_L_coords",
    "apply_P_coords",
    "linearized_einstein",
    "metric_field",
    "scalar_field",
    "oneform_field",
    "tensor_field",
    "oneform_components",
    "tensor_components",
    "tube_inner_product",
    "tube_norm",
    "cross_section_normalizer",
    "bump_chain",
    "poly_chain",
    "fd_chain",
    "identity_suite",
]

_DIM = 3


def _zero_fn(r):
    return np.zeros_like(np.asarray(r, dtype=complex))


class ChainProfile:
    """Radial function carrying derivative closures down to a fixed depth."""

    __slots__ = ("fns", "is_zero")

    def __init__(self, *fns, is_zero: bool = False):
        if not fns:
            raise ValueError("need at least the value closure")
        self.fns = fns
        self.is_zero = is_zero

    def __call__(self, r):
        return self.fns[0](r)

    @property
    def depth(self) -> int:
        return len(self.fns) - 1

    def derivative(self) -> "ChainProfile":
        if self.is_zero:
            return self
        if self.depth == 0:
            raise ValueError("derivative chain exhausted")
        return ChainProfile(*self.fns[1:])

    @classmethod
    def zero(cls, depth: int = 8) -> "ChainProfile":
        return cls(*([_zero_fn] * (depth + 1)), is_zero=True)

    @classmethod
    def constant(cls, c: complex, depth: int = 8) -> "ChainProfile":
        if c == 0:
            return cls.zero(depth)
        return cls(lambda r, c=c: np.full_like(np.asarray(r, dtype=complex), c),
                   *([_zero_fn] * depth))

    @classmethod
    def from_radial_profile(cls, profile) -> "ChainProfile":
        return cls(lambda r: np.asarray(profile(r), dtype=complex),
                   lambda r: np.asarray(profile.d1(r), dtype=complex),
                   lambda r: np.asarray(profile.d2(r), dtype=complex))

    def __neg__(self):
        if self.is_zero:
            return self
        return ChainProfile(*[lambda r, f=f: -f(r) for f in self.fns])

    def __add__(self, other):
        if other.is_zero:
            return self
        if self.is_zero:
            return other
        k = min(self.depth, other.depth)
        return ChainProfile(*[lambda r, f=f, g=g: f(r) + g(r)
                              for f, g in zip(self.fns[:k + 1], other.fns[:k + 1])])

    def __sub__(self, other):
        return self + (-other)

    def __rmul__(self, c: complex):
        if self.is_zero or c == 0:
            return ChainProfile.zero(self.depth)
        if c == 1:
            return self
        return ChainProfile(*[lambda r, f=f, c=c: c * f(r) for f in self.fns])

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.__rmul__(other)
        if self.is_zero or other.is_zero:
            return ChainProfile.zero(min(self.depth, other.depth))
        k = min(self.depth, other.depth)

        def level(m):
            def call(r, m=m):
                out = np.zeros_like(np.asarray(r, dtype=complex))
                for j in range(m + 1):
                    out = out + math.comb(m, j) * self.fns[j](r) * other.fns[m - j](r)
                return out
            return call

        return ChainProfile(*[level(m) for m in range(k + 1)])


def _trig_chain(start: int, depth: int = 8) -> ChainProfile:
    # start 0 -> sinh, 1 -> cosh; the chain alternates
    fns = [(np.sinh if (start + k) % 2 == 0 else np.cosh) for k in range(depth + 1)]
    return ChainProfile(*[lambda r, f=f: f(np.asarray(r, dtype=float)).astype(complex)
                          for f in fns])


_SH = _trig_chain(0)
_CH = _trig_chain(1)


def poly_chain(coeffs, depth: int = 5) -> ChainProfile:
    """Polynomial radial profile from ascending coefficients."""
    c = np.asarray(coeffs, dtype=complex)
    fns = []
    for _ in range(depth + 1):
        fns.append(lambda r, c=c.copy(): npoly.polyval(np.asarray(r, dtype=float), c))
        c = npoly.polyder(c) if len(c) > 1 else np.zeros(1, dtype=complex)
    return ChainProfile(*fns)


def bump_chain(inner: float, outer: float, order: int = 4,
               amplitude: complex = 1.0, depth: int = 5) -> ChainProfile:
    """Compactly supported polynomial bump on (inner, outer), C^(order-1)."""
    if not 0 <= inner < outer:
        raise ValueError("need 0 <= inner < outer")
    x = npoly.polyfromroots([0.0] * order + [1.0] * order)  # x^k (x-1)^k
    c = x * amplitude * (-1) ** order * 4.0 ** order  # peak height |amplitude|
    scale = 1.0 / (outer - inner)
    fns = []
    for k in range(depth + 1):
        def call(r, c=c.copy(), k=k):
            r = np.asarray(r, dtype=float)
            u = (r - inner) * scale
            vals = npoly.polyval(u, c) * scale ** k
            return np.where((u > 0) & (u < 1), vals, 0.0).astype(complex)
        fns.append(call)
        c = npoly.polyder(c)
    return ChainProfile(*fns)


def fd_chain(fn: Callable, step: float, depth: int = 3) -> ChainProfile:
    """Derivative chain built by central differences of a value closure.

    The secondary verification path: all radial derivatives are O(step^2)
    finite differences, so identity residuals shrink at second order.
    """
    def d(k):
        def call(r, k=k):
            r = np.asarray(r, dtype=float)
            if k == 0:
                return np.asarray(fn(r), dtype=complex)
            h = step
            if k == 1:
                return (fn(r + h) - fn(r - h)) / (2 * h)
            if k == 2:
                return (fn(r + h) - 2 * fn(r) + fn(r - h)) / h ** 2
            if k == 3:
                return (fn(r + 2 * h) - 2 * fn(r + h) + 2 * fn(r - h)
                        - fn(r - 2 * h)) / (2 * h ** 3)
            raise ValueError("finite-difference chain supports depth <= 3")
        return call

    return ChainProfile(*[d(k) for k in range(depth + 1)])


# ---------------------------------------------------------------------------
# chart tables, generated symbolically from the metric once


def _wrap_sympy(expr, symbol):
    import sympy as sp

    fn = sp.lambdify(symbol, expr, modules="numpy")

    def call(r):
        r = np.asarray(r, dtype=float)
        out = np.asarray(fn(r), dtype=complex)
        if out.shape != r.shape:
            out = np.broadcast_to(out, r.shape).copy()
        return out

    return call


@functools.lru_cache(maxsize=1)
def _chart_tables():
    import sympy as sp

    r = sp.symbols("r", positive=True)
    g = [sp.Integer(1), sp.sinh(r) ** 2, sp.cosh(r) ** 2]
    ginv = [1 / e for e in g]

    def chain(expr, depth=4):
        expr = sp.simplify(expr)
        if expr == 0:
            return ChainProfile.zero(depth)
        fns = [_wrap_sympy(sp.diff(expr, r, k), r) for k in range(depth + 1)]
        return ChainProfile(*fns)

    gam_expr = {}
    for a, b, c in itertools.product(range(_DIM), repeat=3):
        # metric is diagonal and depends on r (index 0) only
        e = sp.S(0)
        if a == 0 and b == c:
            e = -sp.diff(g[b], r) / 2
        elif a == b and c == 0 and a != 0:
            e = sp.diff(g[a], r) / (2 * g[a])
        elif a == c and b == 0 and a != 0:
            e = sp.diff(g[a], r) / (2 * g[a])
        gam_expr[(a, b, c)] = sp.simplify(e)

    riem_expr = {}
    for a, b, c, d in itertools.product(range(_DIM), repeat=4):
        e = sp.S(0)
        if c == 0:
            e += sp.diff(gam_expr[(a, d, b)], r)
        if d == 0:
            e -= sp.diff(gam_expr[(a, c, b)], r)
        for k in range(_DIM):
            e += gam_expr[(a, c, k)] * gam_expr[(k, d, b)]
            e -= gam_expr[(a, d, k)] * gam_expr[(k, c, b)]
        riem_expr[(a, b, c, d)] = sp.simplify(e)

    riem_low = {key: sp.simplify(g[key[0]] * riem_expr[key]) for key in riem_expr}
    ricci = [sp.simplify(sum(riem_expr[(a, b, a, d)] for a in range(_DIM)))
             for b, d in zip(range(_DIM), range(_DIM))]

    tables = {
        "g": [chain(e) for e in g],
        "ginv": [chain(e) for e in ginv],
        "gam": {k: chain(e) for k, e in gam_expr.items() if e != 0},
        "riem_low": {k: chain(e) for k, e in riem_low.items() if e != 0},
        "ricci": [chain(e) for e in ricci],
    }
    return tables


@functools.lru_cache(maxsize=8)
def _fd_tables(step: float):
    base = _chart_tables()

    def wrap(ch):
        return ch if ch.is_zero else fd_chain(ch.fns[0], step)

    return {
        "g": [wrap(c) for c in base["g"]],
        "ginv": [wrap(c) for c in base["ginv"]],
        "gam": {k: wrap(c) for k, c in base["gam"].items()},
        "riem_low": {k: wrap(c) for k, c in base["riem_low"].items()},
        "ricci": [wrap(c) for c in base["ricci"]],
    }


@dataclass(frozen=True)
class TubeChart:
    """Coordinate chart (r, theta, s) on the tube of an n = 3 model.

    With `fd_step` set, every radial derivative of the chart tables is
    replaced by an O(step^2) central difference; mode fields built for
    such a chart should use `fd_chain` profiles so the whole pipeline
    sits on the finite-difference verification path.
    """

    model: ConeModel
    fd_step: Optional[float] = None

    def __post_init__(self):
        if self.model.n != 3:
            raise ValueError("the coordinate chart exists only at n = 3")
        cs = self.model.cross_section
        if cs is None or cs.kind != "circle":
            raise ValueError("the coordinate chart needs a circle cross-section")

    @property
    def gamma(self) -> float:
        return self.model.gamma

    @property
    def angle(self) -> float:
        return self.model.alpha

    @property
    def length(self) -> float:
        return self.model.cross_section.length

    def _check(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise DomainError("coordinate radius must be positive")
        return r

    def _table(self):
        return _chart_tables() if self.fd_step is None else _fd_tables(self.fd_step)

    def metric(self, r):
        r = self._check(r)
        tab = self._table()["g"]
        out = np.zeros((_DIM, _DIM) + r.shape, dtype=complex)
        for a in range(_DIM):
            out[a, a] = tab[a](r)
        return out

    def inverse_metric(self, r):
        r = self._check(r)
        tab = self._table()["ginv"]
        out = np.zeros((_DIM, _DIM) + r.shape, dtype=complex)
        for a in range(_DIM):
            out[a, a] = tab[a](r)
        return out

    def metric_profile(self, a: int) -> ChainProfile:
        return self._table()["g"][a]

    def gamma_profile(self, a: int, b: int, c: int) -> ChainProfile:
        return self._table()["gam"].get((a, b, c), ChainProfile.zero())

    def inverse_profile(self, a: int) -> ChainProfile:
        return self._table()["ginv"][a]

    def riemann_profile(self, a: int, b: int, c: int, d: int) -> ChainProfile:
        return self._table()["riem_low"].get((a, b, c, d), ChainProfile.zero())

    def ricci(self, r):
        r = self._check(r)
        tab = self._table()["ricci"]
        out = np.zeros((_DIM, _DIM) + r.shape, dtype=complex)
        for a in range(_DIM):
            out[a, a] = tab[a](r)
        return out


def christoffel_coords(chart: TubeChart, r):
    """All Christoffel symbols of the tube metric, shape (3, 3, 3) + r.shape."""
    r = chart._check(r)
    out = np.zeros((_DIM, _DIM, _DIM) + r.shape, dtype=complex)
    for key, prof in chart._table()["gam"].items():
        out[key] = prof(r)
    return out


# ---------------------------------------------------------------------------
# mode fields


@dataclass
class OracleField:
    """Single-mode tensor field: coordinate components times a fixed phase.

    Components map index tuples to radial chains; the phase
    exp(i(angular*theta + axial*s)) is common to every component, so theta
    and s derivatives are exact multiplications.
    """

    chart: TubeChart
    rank: int
    components: Mapping[tuple, ChainProfile] = field(default_factory=dict)
    angular: float = 0.0
    axial: float = 0.0

    def __post_init__(self):
        for idx in self.components:
            if len(idx) != self.rank or not all(0 <= i < _DIM for i in idx):
                raise ValueError(f"bad component index {idx} for rank {self.rank}")

    def component(self, idx: tuple) -> ChainProfile:
        return self.components.get(tuple(idx), ChainProfile.zero())

    def partial(self, a: int, idx: tuple) -> ChainProfile:
        comp = self.component(idx)
        if a == 0:
            return comp.derivative()
        if a == 1:
            return (1j * self.angular) * comp
        return (1j * self.axial) * comp

    def values(self, r):
        """Radial coefficient array, shape (3,)*rank + r.shape; phase excluded."""
        r = self.chart._check(np.atleast_1d(r))
        out = np.zeros((_DIM,) * self.rank + r.shape, dtype=complex)
        for idx, prof in self.components.items():
            if not prof.is_zero:
                out[idx] = prof(r)
        return out

    def evaluate(self, r, theta: float = 0.0, s: float = 0.0):
        phase = np.exp(1j * (self.angular * theta + self.axial * s))
        return self.values(r) * phase

    def _like(self, components, rank=None):
        return OracleField(self.chart, self.rank if rank is None else rank,
                           components, self.angular, self.axial)

    def __neg__(self):
        return self._like({k: -v for k, v in self.components.items()})

    def __rmul__(self, c: complex):
        return self._like({k: c * v for k, v in self.components.items()})

    def __add__(self, other: "OracleField"):
        if (self.rank != other.rank or self.angular != other.angular
                or self.axial != other.axial):
            raise ValueError("can only add fields of the same rank and mode")
        comps = dict(self.components)
        for k, v in other.components.items():
            comps[k] = comps[k] + v if k in comps else v
        return self._like(comps)

    def __sub__(self, other: "OracleField"):
        return self + (-other)

    def __mul__(self, other: "OracleField"):
        if self.rank != 0:
            raise ValueError("only rank-0 fields multiply other fields")
        comps = {k: self.component(()) * v for k, v in other.components.items()}
        return OracleField(self.chart, other.rank, comps,
                           self.angular + other.angular, self.axial + other.axial)


def scalar_field(chart: TubeChart, profile: ChainProfile,
                 angular: float = 0.0, axial: float = 0.0) -> OracleField:
    return OracleField(chart, 0, {(): profile}, angular, axial)


def metric_field(chart: TubeChart) -> OracleField:
    return OracleField(chart, 2,
                       {(a, a): chart.metric_profile(a) for a in range(_DIM)})


# ---------------------------------------------------------------------------
# operators


def covariant_derivative(fld: OracleField) -> OracleField:
    """Levi-Civita derivative; the new index comes first."""
    if fld.rank > 3:
        raise ValueError("covariant derivative supports rank <= 3 inputs")
    chart = fld.chart
    comps = {}
    for idx in _all_indices(fld.rank):
        base = fld.components.get(idx)
        for a in range(_DIM):
            entry = fld.partial(a, idx) if base is not None else ChainProfile.zero()
            for i in range(fld.rank):
                for c in range(_DIM):
                    src = fld.components.get(idx[:i] + (c,) + idx[i + 1:])
                    if src is None or src.is_zero:
                        continue
                    gam = chart.gamma_profile(c, a, idx[i])
                    if gam.is_zero:
                        continue
                    entry = entry - gam * src
            if not entry.is_zero:
                comps[(a,) + idx] = entry
    return OracleField(chart, fld.rank + 1, comps, fld.angular, fld.axial)


def _all_indices(rank):
    return itertools.product(range(_DIM), repeat=rank)


def adjoint_divergence(fld: OracleField) -> OracleField:
    """Formal adjoint of the gradient: contracts away the first index."""
    if fld.rank < 1:
        raise ValueError("needs at least one index")
    chart = fld.chart
    D = covariant_derivative(fld)
    comps = {}
    for idx in _all_indices(fld.rank - 1):
        entry = ChainProfile.zero()
        for a in range(_DIM):
            src = D.components.get((a, a) + idx)
            if src is None or src.is_zero:
                continue
            entry = entry - chart.inverse_profile(a) * src
        if not entry.is_zero:
            comps[idx] = entry
    return OracleField(chart, fld.rank - 1, comps, fld.angular, fld.axial)


def rough_laplacian(fld: OracleField) -> OracleField:
    return adjoint_divergence(covariant_derivative(fld))


def codifferential(fld: OracleField) -> OracleField:
    """Divergence-type codifferential on forms and symmetric tensors."""
    return adjoint_divergence(fld)


def exterior_d(fld: OracleField) -> OracleField:
    D = covariant_derivative(fld)
    if fld.rank == 0:
        return D
    comps = {}
    if fld.rank == 1:
        for a, b in _all_indices(2):
            entry = D.component((a, b)) - D.component((b, a))
            if not entry.is_zero:
                comps[(a, b)] = entry
    elif fld.rank == 2:
        for a, b, c in _all_indices(3):
            entry = (D.component((a, b, c)) + D.component((b, c, a))
                     + D.component((c, a, b)))
            if not entry.is_zero:
                comps[(a, b, c)] = entry
    else:
        raise ValueError("exterior derivative implemented for rank <= 2")
    return OracleField(fld.chart, fld.rank + 1, comps, fld.angular, fld.axial)


def delta_star(oneform: OracleField) -> OracleField:
    """Symmetrized gradient of a one-form."""
    if oneform.rank != 1:
        raise ValueError("needs a one-form")
    D = covariant_derivative(oneform)
    comps = {}
    for a, b in _all_indices(2):
        entry = 0.5 * (D.component((a, b)) + D.component((b, a)))
        if not entry.is_zero:
            comps[(a, b)] = entry
    return OracleField(oneform.chart, 2, comps, oneform.angular, oneform.axial)


def trace(fld: OracleField) -> OracleField:
    if fld.rank != 2:
        raise ValueError("trace is defined on rank-2 fields")
    entry = ChainProfile.zero()
    for a in range(_DIM):
        src = fld.components.get((a, a))
        if src is None or src.is_zero:
            continue
        entry = entry + fld.chart.inverse_profile(a) * src
    return OracleField(fld.chart, 0, {(): entry}, fld.angular, fld.axial)


def bianchi_beta(h: OracleField) -> OracleField:
    """Divergence plus half the gradient of the trace."""
    if h.rank != 2:
        raise ValueError("needs a symmetric 2-tensor")
    return codifferential(h) + 0.5 * exterior_d(trace(h))


def ricci_action(h: OracleField) -> OracleField:
    """Curvature action built from the lowered Riemann tensor."""
    if h.rank != 2:
        raise ValueError("needs a rank-2 field")
    chart = h.chart
    tab = chart._table()
    riem = tab["riem_low"]
    ginv = tab["ginv"]
    comps = {}
    for a, b in _all_indices(2):
        entry = ChainProfile.zero()
        for (c, d), src in h.components.items():
            key = (a, c, b, d)
            if key not in riem or src.is_zero:
                continue
            entry = entry + (riem[key] * ginv[c] * ginv[d]) * src
        if not entry.is_zero:
            comps[(a, b)] = entry
    return OracleField(chart, 2, comps, h.angular, h.axial)


def d_nabla(fld: OracleField) -> OracleField:
    """Exterior covariant derivative on cotangent-valued forms.

    Rank 1 is the zero-form case (plain gradient); rank 2 antisymmetrizes
    the derivative index against the first slot, keeping the last slot as
    the value index.
    """
    if fld.rank == 1:
        return covariant_derivative(fld)
    if fld.rank != 2:
        raise ValueError("d_nabla handles rank 1 and 2 inputs")
    D = covariant_derivative(fld)
    comps = {}
    for a, b, c in _all_indices(3):
        entry = D.component((a, b, c)) - D.component((b, a, c))
        if not entry.is_zero:
            comps[(a, b, c)] = entry
    return OracleField(fld.chart, 3, comps, fld.angular, fld.axial)


def delta_nabla(fld: OracleField) -> OracleField:
    """Adjoint of d_nabla: contracts the leading form index."""
    if fld.rank not in (2, 3):
        raise ValueError("delta_nabla handles rank 2 and 3 inputs")
    return adjoint_divergence(fld)


def apply_L_coords(oneform: OracleField) -> OracleField:
    """Rough Laplacian plus (n - 1) on one-forms, in coordinates."""
    return rough_laplacian(oneform) + float(_DIM - 1) * oneform


def apply_P_coords(h: OracleField) -> OracleField:
    """Rough Laplacian minus twice the curvature action, in coordinates."""
    return rough_laplacian(h) - 2.0 * ricci_action(h)


def linearized_einstein(h: OracleField) -> OracleField:
    """Second variation of the normalized Einstein functional."""
    return (rough_laplacian(h) - 2.0 * ricci_action(h)
            - 2.0 * delta_star(bianchi_beta(h)))


# ---------------------------------------------------------------------------
# frame block conversions

_I = 1j


def _axial_wavenumber(mode, sign: int) -> float:
    lam = getattr(mode, "lam", 0.0)
    return sign * math.sqrt(lam) if lam > 0 else 0.0


def _chain(profile) -> ChainProfile:
    if isinstance(profile, ChainProfile):
        return profile
    return ChainProfile.from_radial_profile(profile)


def oneform_field(chart: TubeChart, block, axial_sign: int = 1) -> OracleField:
    """Coordinate realization of a one-form mode block.

    Cross-section slots are the per-radius orthonormal ones, matching the
    radial systems: the scalar-gradient slot realizes as i*sign*cosh(r)*ds
    and the co-closed slot as cosh(r)*ds.
    """
    mode = block.mode
    angular = mode.p * chart.gamma
    comps = {}
    if block.kind in ("A", "B"):
        axial = _axial_wavenumber(mode, axial_sign)
        f = _chain(block.component("f"))
        g = _chain(block.component("g"))
        if not f.is_zero:
            comps[(0,)] = f
        if not g.is_zero:
            comps[(1,)] = _SH * g
        if block.kind == "A":
            w = _chain(block.component("omega"))
            if not w.is_zero:
                comps[(2,)] = (_I * axial_sign) * (_CH * w)
    else:
        axial = 0.0
        vp = _chain(block.component("varpi"))
        if not vp.is_zero:
            comps[(2,)] = _CH * vp
    return OracleField(chart, 1, comps, angular, axial)


def tensor_field(chart: TubeChart, block, axial_sign: int = 1) -> OracleField:
    """Coordinate realization of a symmetric 2-tensor mode block.

    Mixed components are coefficients of symmetrized products of the
    orthonormal slot covectors, hence the factor 1/2 on each index order.
    Slots whose cross-section normalizer vanishes on a one-dimensional
    cross-section (k2, k3) must be absent or zero; kind D has no
    realization at all.
    """
    mode = block.mode
    if block.kind == "D":
        raise ValueError("trace-free transverse blocks have no n = 3 realization")
    probe = chart.model.tube_radius * np.array([0.2, 0.5, 0.9])
    for dead in ("k2", "k3"):
        prof = block.profiles.get(dead)
        if prof is not None and np.max(np.abs(prof(probe))) > 0:
            raise ValueError(f"component {dead} has no realization on a circle")
    angular = mode.p * chart.gamma
    comps: dict = {}

    def put(idx, chain):
        if not chain.is_zero:
            comps[idx] = comps[idx] + chain if idx in comps else chain

    if block.kind in ("A", "B"):
        axial = _axial_wavenumber(mode, axial_sign)
        put((0, 0), _chain(block.component("f")))
        put((1, 1), _SH * _SH * _chain(block.component("g")))
        put((2, 2), _CH * _CH * _chain(block.component("k1")))
        h = 0.5 * (_SH * _chain(block.component("h")))
        put((0, 1), h)
        put((1, 0), h)
        if block.kind == "A":
            sig = (0.5j * axial_sign) * (_CH * _chain(block.component("sigma")))
            eta = (0.5j * axial_sign) * (_SH * _CH * _chain(block.component("eta")))
            put((0, 2), sig)
            put((2, 0), sig)
            put((1, 2), eta)
            put((2, 1), eta)
    else:
        axial = 0.0
        sig = 0.5 * (_CH * _chain(block.component("sigma_bar")))
        eta = 0.5 * (_SH * _CH * _chain(block.component("eta_bar")))
        put((0, 2), sig)
        put((2, 0), sig)
        put((1, 2), eta)
        put((2, 1), eta)
    return OracleField(chart, 2, comps, angular, axial)


def oneform_components(chart: TubeChart, fld: OracleField, kind: str, r,
                       axial_sign: int = 1):
    """Frame block components of a coordinate one-form, sampled at radii."""
    r = chart._check(np.atleast_1d(r))
    vals = fld.values(r)
    sh, ch = np.sinh(r), np.cosh(r)
    if kind in ("A", "B"):
        out = {"f": vals[0], "g": vals[1] / sh}
        if kind == "A":
            out["omega"] = vals[2] / (_I * axial_sign * ch)
        return out
    return {"varpi": vals[2] / ch}


def tensor_components(chart: TubeChart, fld: OracleField, kind: str, r,
                      axial_sign: int = 1):
    """Frame block components of a coordinate 2-tensor, sampled at radii."""
    r = chart._check(np.atleast_1d(r))
    vals = fld.values(r)
    sh, ch = np.sinh(r), np.cosh(r)
    if kind in ("A", "B"):
        out = {"f": vals[0, 0], "g": vals[1, 1] / sh ** 2,
               "h": 2.0 * vals[0, 1] / sh, "k1": vals[2, 2] / ch ** 2}
        if kind == "A":
            out["sigma"] = 2.0 * vals[0, 2] / (_I * axial_sign * ch)
            out["eta"] = 2.0 * vals[1, 2] / (_I * axial_sign * sh * ch)
        return out
    if kind == "C":
        return {"sigma_bar": 2.0 * vals[0, 2] / ch,
                "eta_bar": 2.0 * vals[1, 2] / (sh * ch)}
    raise ValueError("no n = 3 realization for this kind")


# ---------------------------------------------------------------------------
# quadrature


def tube_inner_product(u: OracleField, v: OracleField, inner: float = 0.0,
                       outer: Optional[float] = None, num: int = 160) -> complex:
    """Hermitian tube inner product of two single-mode fields.

    Distinct modes are orthogonal by the exact phase integrals; matching
    modes reduce to a radial Gauss-Legendre quadrature with the volume
    weight sinh(r)cosh(r) and transverse measure angle * length.
    """
    if u.rank != v.rank:
        raise ValueError("rank mismatch")
    if u.angular != v.angular or u.axial != v.axial:
        return 0.0
    chart = u.chart
    a = chart.model.tube_radius if outer is None else outer
    x, w = roots_legendre(num)
    r = 0.5 * (a + inner) + 0.5 * (a - inner) * x
    w = 0.5 * (a - inner) * w
    uv = u.values(r)
    vv = v.values(r)
    ginv = chart.inverse_metric(r)
    dens = np.zeros_like(r, dtype=complex)
    for idx in _all_indices(u.rank):
        fac = np.ones_like(r, dtype=complex)
        for i in idx:
            fac = fac * ginv[i, i]
        dens = dens + fac * uv[idx] * np.conj(vv[idx])
    dens = dens * np.sinh(r) * np.cosh(r)
    return complex(np.sum(w * dens) * chart.angle * chart.length)


def tube_norm(u: OracleField, inner: float = 0.0, outer: Optional[float] = None,
              num: int = 160) -> float:
    return math.sqrt(max(tube_inner_product(u, u, inner, outer, num).real, 0.0))


def cross_section_normalizer(model: ConeModel) -> float:
    """Scale giving the boundary cross-section mode phases unit L^2 norm."""
    a = model.tube_radius
    vol = math.sinh(a) * math.cosh(a) * model.alpha * model.cross_section.length
    return 1.0 / math.sqrt(vol)


# ---------------------------------------------------------------------------
# identity suite


def _rel_residual(x: OracleField, y: OracleField, r) -> float:
    dx = x.values(r) - y.values(r)
    scale = np.max(np.abs(x.values(r))) + np.max(np.abs(y.values(r)))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(dx)) / scale)


def _random_oneform(chart, rng, chains):
    return OracleField(chart, 1, {(a,): chains[a] for a in range(_DIM)},
                       angular=float(rng.integers(0, 4)) * chart.gamma,
                       axial=2 * math.pi * float(rng.integers(-2, 3)) / chart.length)


def _random_tensor(chart, rng, chains):
    comps = {}
    k = 0
    for a in range(_DIM):
        for b in range(a, _DIM):
            c = chains[k % len(chains)]
            comps[(a, b)] = c
            if a != b:
                comps[(b, a)] = c
            k += 1
    return OracleField(chart, 2, comps,
                       angular=float(rng.integers(0, 4)) * chart.gamma,
                       axial=2 * math.pi * float(rng.integers(-2, 3)) / chart.length)


def _random_twoform(chart, rng, chains):
    comps = {}
    for k, (a, b) in enumerate(((0, 1), (0, 2), (1, 2))):
        c = chains[k % len(chains)]
        comps[(a, b)] = c
        comps[(b, a)] = -c
    return OracleField(chart, 2, comps,
                       angular=float(rng.integers(0, 4)) * chart.gamma,
                       axial=2 * math.pi * float(rng.integers(-2, 3)) / chart.length)


def _suite_chains(rng, fd_step, count: int = 3):
    def one():
        coeffs = rng.normal(size=4) + 1j * rng.normal(size=4)
        if fd_step is None:
            return poly_chain(coeffs)
        p = poly_chain(coeffs)
        return fd_chain(p.fns[0], fd_step)
    return [one() for _ in range(count)]


def _bump_case(rng, model, fd_step, count: int = 3):
    # shared support per case keeps quadrature panels aligned with the
    # piecewise boundary, so Gauss-Legendre stays spectrally accurate
    a = model.tube_radius
    lo = rng.uniform(0.1, 0.35) * a
    hi = rng.uniform(0.6, 0.9) * a
    bump = bump_chain(lo, hi, order=4)
    chains = []
    for _ in range(count):
        coeffs = rng.normal(size=3) + 1j * rng.normal(size=3)
        c = bump * poly_chain(coeffs)
        chains.append(c if fd_step is None else fd_chain(c.fns[0], fd_step))
    return chains, lo, hi


def identity_suite(model: ConeModel, n_cases: int = 50, seed: int = 0,
                   tol: float = 1e-8, fd_step: Optional[float] = None) -> list:
    """Residual report for the operator identities of the hyperbolic tube.

    Differential identities are checked pointwise on random polynomial
    mode fields; integral identities use compact bump fields and the tube
    quadrature. Passing `fd_step` swaps every radial derivative for an
    O(step^2) central difference, the secondary verification path.
    """
    chart = TubeChart(model, fd_step=fd_step)
    rng = np.random.default_rng(seed)
    n = _DIM
    a = model.tube_radius
    r_grid = np.linspace(0.15 * a, 0.9 * a, 40)
    report = []

    def add(name, cases, residual):
        report.append({"identity": name, "n_cases": cases,
                       "max_rel_residual": float(residual),
                       "pass": bool(residual <= tol)})

    res = 0.0
    for _ in range(n_cases):
        h = _random_tensor(chart, rng, _suite_chains(rng, fd_step, 6))
        lhs = ricci_action(h)
        rhs = h - trace(h) * metric_field(chart)
        res = max(res, _rel_residual(lhs, rhs, r_grid))
    add("curvature_action_hyperbolic", n_cases, res)

    res = 0.0
    for _ in range(n_cases):
        w = _random_oneform(chart, rng, _suite_chains(rng, fd_step))
        lhs = exterior_d(codifferential(w)) + codifferential(exterior_d(w))
        rhs = rough_laplacian(w) - float(n - 1) * w
        res = max(res, _rel_residual(lhs, rhs, r_grid))
    add("weitzenboeck_oneform", n_cases, res)

    res = 0.0
    for _ in range(n_cases):
        w = _random_oneform(chart, rng, _suite_chains(rng, fd_step))
        lhs = 2.0 * bianchi_beta(delta_star(w))
        rhs = rough_laplacian(w) + float(n - 1) * w
        res = max(res, _rel_residual(lhs, rhs, r_grid))
    add("gauge_composition_oneform", n_cases, res)

    res = 0.0
    cases = max(4, n_cases // 10)
    for _ in range(cases):
        chains, lo, hi = _bump_case(rng, model, fd_step)
        w = _random_oneform(chart, rng, chains)
        # two-form norms here contract both index slots, so the
        # half-normalized form statement picks up another factor 1/2
        lhs = tube_norm(delta_star(w), lo, hi) ** 2
        rhs = (tube_norm(codifferential(w), lo, hi) ** 2
               + 0.25 * tube_norm(exterior_d(w), lo, hi) ** 2
               + (n - 1) * tube_norm(w, lo, hi) ** 2)
        res = max(res, abs(lhs - rhs) / (abs(lhs) + abs(rhs)))
    add("symmetrized_gradient_energy", cases, res)

    res = 0.0
    for _ in range(n_cases):
        w2 = _random_twoform(chart, rng, _suite_chains(rng, fd_step))
        lhs = rough_laplacian(w2)
        rhs = (exterior_d(codifferential(w2)) + codifferential(exterior_d(w2))
               + float(2 * (n - 2)) * w2)
        res = max(res, _rel_residual(lhs, rhs, r_grid))
    add("weitzenboeck_twoform", n_cases, res)

    res = 0.0
    for _ in range(n_cases):
        w = _random_oneform(chart, rng, _suite_chains(rng, fd_step))
        lhs = rough_laplacian(delta_star(w))
        rhs = (2.0 * delta_star(w)
               + 2.0 * (codifferential(w) * metric_field(chart))
               + delta_star(rough_laplacian(w) + float(n - 1) * w))
        res = max(res, _rel_residual(lhs, rhs, r_grid))
    add("laplacian_gauge_commutation", n_cases, res)

    res = 0.0
    for _ in range(n_cases):
        h = _random_tensor(chart, rng, _suite_chains(rng, fd_step, 6))
        lhs = rough_laplacian(h)
        rhs = (delta_nabla(d_nabla(h)) + d_nabla(delta_nabla(h))
               + float(n) * h - trace(h) * metric_field(chart))
        res = max(res, _rel_residual(lhs, rhs, r_grid))
    add("weitzenboeck_tensor_hyperbolic", n_cases, res)

    res = 0.0
    for _ in range(n_cases):
        h = _random_tensor(chart, rng, _suite_chains(rng, fd_step, 6))
        out = bianchi_beta(linearized_einstein(h))
        scale = np.max(np.abs(bianchi_beta(rough_laplacian(h)).values(r_grid)))
        res = max(res, float(np.max(np.abs(out.values(r_grid))) / scale))
    add("linearized_bianchi", n_cases, res)

    res = 0.0
    for _ in range(n_cases):
        w = _random_oneform(chart, rng, _suite_chains(rng, fd_step))
        lhs = trace(delta_star(w))
        rhs = -1.0 * codifferential(w)
        res = max(res, _rel_residual(lhs, rhs, r_grid))
    add("trace_intertwine", n_cases, res)

    res = 0.0
    for _ in range(cases):
        chains, lo, hi = _bump_case(rng, model, fd_step, 6)
        w = _random_oneform(chart, rng, chains[:3])
        v0 = OracleField(chart, 1, {(a,): c for a, c in enumerate(chains[3:])},
                         w.angular, w.axial)
        v = covariant_derivative(v0)
        lhs = tube_inner_product(w, adjoint_divergence(v), lo, hi)
        rhs = tube_inner_product(covariant_derivative(w), v, lo, hi)
        res = max(res, abs(lhs - rhs) / (abs(lhs) + abs(rhs)))
    add("adjoint_pairing", cases, res)

    res = 0.0
    worst = math.inf
    for _ in range(n_cases):
        chains, lo, hi = _bump_case(rng, model, fd_step, 6)
        h = _random_tensor(chart, rng, chains)
        num = tube_inner_product(apply_P_coords(h), h, lo, hi).real
        den = tube_norm(h, lo, hi) ** 2
        worst = min(worst, num / den)
    res = max(0.0, (n - 2) - worst) / (n - 2)
    report.append({"identity": "einstein_operator_positivity", "n_cases": n_cases,
                   "max_rel_residual": float(res), "pass": bool(res == 0.0)})

    return report
