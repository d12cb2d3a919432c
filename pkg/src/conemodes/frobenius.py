"""Series solutions, continuation, and boundary matching for mode ODEs.

The radial systems produced by :mod:`conemodes.reduction` have a regular
singular point at the cone axis.  This module constructs Frobenius series
(with logarithmic branches where the indicial structure forces them),
continues them outward with a high-order integrator, and solves Dirichlet
problems at the tube boundary within a prescribed solution class.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .geometry import ConeModel, DomainError
from .indicial import classify_exponent, indicial_report, system_for_mode
from .modes import Mode, ScalarMode
from .reduction import (
    ModeSystem,
    OneFormModeBlock,
    RadialExpr,
    RadialProfile,
    TensorModeBlock,
    component_weights,
    oneform_system,
    _ex,
)

__all__ = [
    "FrobeniusError",
    "FrobeniusSeries",
    "frobenius_series",
    "inhomogeneous_series",
    "series_block",
    "ContinuedSolution",
    "integrate_mode_ode",
    "ModeBVPResult",
    "solve_mode_bvp",
    "AngleDeformation",
    "angle_deformation_profile",
    "induced_singular_deformation",
]

# rank cut for detecting resonant orders, relative to the largest singular value
_RANK_TOL = 1e-8
# relative obstruction threshold deciding solvable resonance vs log branch
_SOLVE_TOL = 1e-9


class FrobeniusError(RuntimeError):
    """Series construction or continuation failed."""


# ---------------------------------------------------------------------------
# series container


@dataclass(frozen=True)
class FrobeniusSeries:
    """Truncated expansion sum_m v_m r^(kappa+m) (+ log r * companion).

    ``coefficients[m]`` is the vector v_m over ``names``.  When a logarithmic
    branch is present, ``log_coefficients[m]`` holds the companion vector u_m
    multiplying r^(kappa+m) log r.
    """

    kappa: float
    names: tuple
    coefficients: tuple
    log_coefficients: Optional[tuple] = None

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @property
    def arity(self) -> int:
        return len(self.names)

    @property
    def has_log(self) -> bool:
        return self.log_coefficients is not None

    def _arrays(self):
        V = np.asarray(self.coefficients, dtype=complex)
        U = None
        if self.log_coefficients is not None:
            U = np.asarray(self.log_coefficients, dtype=complex)
        return V, U

    def evaluate(self, r, derivative: int = 0):
        """Componentwise values of the d-th derivative, shape (arity,) + r.shape."""
        if derivative not in (0, 1, 2, 3):
            raise ValueError("derivative order must be 0..3")
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        rr = np.atleast_1d(r)
        if np.any(rr <= 0):
            raise DomainError("series evaluation needs r > 0")
        V, U = self._arrays()
        kap = self.kappa
        m = np.arange(V.shape[0])
        e = kap + m
        if derivative == 0:
            wv, wu_extra = np.ones_like(e), np.zeros_like(e)
        elif derivative == 1:
            wv, wu_extra = e, np.ones_like(e)
        elif derivative == 2:
            wv, wu_extra = e * (e - 1), 2 * e - 1
        else:
            wv, wu_extra = e * (e - 1) * (e - 2), 3 * e * (e - 1) - 3 * e + 2
        out = _power_sum(wv[:, None] * V, rr) * rr ** (kap - derivative)
        if U is not None:
            lg = np.log(rr)
            out = out + rr ** (kap - derivative) * (
                _power_sum(wu_extra[:, None] * U, rr)
                + lg * _power_sum(wv[:, None] * U, rr)
            )
        return out[:, 0] if scalar else out

    def profile(self, name: str) -> RadialProfile:
        i = self.names.index(name)
        return RadialProfile(
            lambda r: self.evaluate(r, 0)[i],
            lambda r: self.evaluate(r, 1)[i],
            lambda r: self.evaluate(r, 2)[i],
        )

    def profiles(self) -> dict:
        return {name: self.profile(name) for name in self.names}

    def to_dict(self) -> dict:
        def pack(mat):
            return [[[z.real, z.imag] for z in row] for row in mat]

        V, U = self._arrays()
        return {
            "kappa": self.kappa,
            "names": list(self.names),
            "coefficients": pack(V),
            "log_coefficients": None if U is None else pack(U),
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "FrobeniusSeries":
        def unpack(rows):
            return tuple(tuple(complex(re, im) for re, im in row) for row in rows)

        logs = payload.get("log_coefficients")
        return cls(
            kappa=float(payload["kappa"]),
            names=tuple(payload["names"]),
            coefficients=unpack(payload["coefficients"]),
            log_coefficients=None if logs is None else unpack(logs),
        )


def _power_sum(C, r):
    # Horner evaluation of sum_m C[m] r^m, C shape (M+1, k), result (k, len(r))
    acc = np.zeros((C.shape[1], r.size), dtype=complex)
    for row in C[::-1]:
        acc = acc * r + row[:, None]
    return acc


# ---------------------------------------------------------------------------
# recursion engine


@functools.lru_cache(maxsize=128)
def _coefficient_data(system: ModeSystem, order: int):
    drift = system.laurent_drift(order + 1)
    q = tuple(complex(drift.coefficient(j)) for j in range(order + 1))
    W = tuple(system.laurent_potential(order + 1))
    return q, W


def _series_engine(system, s0, order, seed=None, log_seed=None, source=None,
                   allow_log=True):
    """Run the coefficient recursion; returns (v, u) lists, u possibly None.

    Multiplying the system by r^2 gives coefficient equations
    M(s0+m) v_m = sum_{j>=1} [q_j (s0+m-j) I - W_j] v_{m-j} + source_m, with
    M(s) = W_0 - s^2 I.  At resonant orders obstructions are absorbed into a
    log-companion series, seeded inside the null space so that the shifted
    right-hand side lands in the range.
    """
    k = system.arity
    q, W = _coefficient_data(system, order)
    wdiag = np.asarray(component_weights(system.family, system.names), float)
    eye = np.eye(k)

    def convolve(seq, m):
        acc = np.zeros(k, dtype=complex)
        for j in range(1, m + 1):
            acc += q[j] * (s0 + m - j) * seq[m - j] - W[j] @ seq[m - j]
        return acc

    v, u = [], []
    log_active = log_seed is not None
    for m in range(order + 1):
        s = s0 + m
        A = W[0] - (s * s) * eye
        _, sv, vh = np.linalg.svd(A)
        rank = int(np.sum(sv > _RANK_TOL * max(sv[0], 1.0)))
        if log_active:
            if m == 0:
                u_m = np.asarray(log_seed, dtype=complex)
                if np.linalg.norm(A @ u_m) > 1e-8 * (np.linalg.norm(u_m) + 1.0):
                    raise FrobeniusError(
                        "log seed must lie in the indicial null space")
            else:
                rhs_u = convolve(u, m)
                u_m = _resonant_solve(A, rhs_u, rank, m, "log companion")
        else:
            u_m = np.zeros(k, dtype=complex)
        rhs = convolve(v, m)
        if source is not None:
            rhs = rhs + source(m)
        rhs = rhs + 2.0 * s * u_m
        for j in range(1, m + 1):
            rhs = rhs + q[j] * u[m - j]
        if m == 0 and seed is not None:
            v_m = np.asarray(seed, dtype=complex)
            if np.linalg.norm(A @ v_m - rhs) > 1e-8 * (
                    np.linalg.norm(v_m) + np.linalg.norm(rhs) + 1.0):
                raise FrobeniusError(
                    "seed vector does not satisfy the leading-order equation")
        elif rank == k:
            v_m = np.linalg.solve(A, rhs)
        else:
            null = vh[rank:].conj().T
            beta = (wdiag[:, None] * null).conj().T @ rhs
            if np.linalg.norm(beta) <= _SOLVE_TOL * (np.linalg.norm(rhs) + 1.0):
                v_m = _min_norm(A, rhs)
            else:
                if not allow_log:
                    raise FrobeniusError(
                        f"obstruction at order {m}: logarithmic branch required")
                if abs(s) < 1e-12:
                    raise FrobeniusError(
                        f"obstruction at order {m} with exponent 0: "
                        "iterated logarithm not supported")
                gram = (wdiag[:, None] * null).conj().T @ null
                shift = null @ np.linalg.solve(gram, -beta / (2.0 * s))
                u_m = u_m + shift
                rhs = rhs + 2.0 * s * shift
                v_m = _min_norm(A, rhs)
                log_active = True
        u.append(u_m)
        v.append(v_m)
    if not any(np.any(x) for x in u):
        u = None
    return v, u


def _min_norm(A, rhs):
    return np.linalg.lstsq(A, rhs, rcond=_RANK_TOL)[0]


def _resonant_solve(A, rhs, rank, m, what):
    if rank == A.shape[0]:
        return np.linalg.solve(A, rhs)
    x = _min_norm(A, rhs)
    if np.linalg.norm(A @ x - rhs) > _SOLVE_TOL * (np.linalg.norm(rhs) + 1.0):
        raise FrobeniusError(
            f"{what} recursion hits an unsolvable resonance at order {m}: "
            "iterated logarithm not supported")
    return x


def frobenius_series(system: ModeSystem, kappa: float, vector=None,
                     log_vector=None, order: int = 12) -> FrobeniusSeries:
    """Homogeneous series branch at the indicial exponent ``kappa``.

    ``vector`` seeds the power branch; ``log_vector`` seeds a logarithmic
    branch (exponent-zero roots).  With neither given the indicial null
    vector is used, which requires a one-dimensional null space.
    """
    if vector is None and log_vector is None:
        report = indicial_report(system)
        root = report.root(kappa)
        if root.nullity != 1:
            raise FrobeniusError(
                f"exponent {kappa} has null space of dimension {root.nullity}; "
                "pass an explicit seed vector")
        vector = root.vectors[0]
    v, u = _series_engine(system, float(kappa), order, seed=vector,
                          log_seed=log_vector)
    return FrobeniusSeries(
        kappa=float(kappa),
        names=system.names,
        coefficients=tuple(tuple(x) for x in v),
        log_coefficients=None if u is None else tuple(tuple(x) for x in u),
    )


def inhomogeneous_series(system: ModeSystem, source: Mapping[str, RadialExpr],
                         order: int = 12) -> FrobeniusSeries:
    """Particular series for O X = S with radial-expression source rows.

    The leading exponent is read off from the source; resonances against
    indicial roots are absorbed into a log companion, with the power part
    normalized to have no component along the homogeneous null directions.
    """
    unknown = set(source) - set(system.names)
    if unknown:
        raise ValueError(f"source names {sorted(unknown)} not in system")
    rows = {}
    leads = []
    for name, expr in source.items():
        ser = expr.laurent(order + 6)
        rows[system.names.index(name)] = ser
        leads.append(ser.leading)
    if not rows:
        raise ValueError("source must have at least one nonzero row")
    s0 = min(leads) + 2

    def term(m):
        vec = np.zeros(system.arity, dtype=complex)
        for i, ser in rows.items():
            vec[i] = complex(ser.coefficient(s0 - 2 + m))
        return vec

    v, u = _series_engine(system, float(s0), order, source=term)
    return FrobeniusSeries(
        kappa=float(s0),
        names=system.names,
        coefficients=tuple(tuple(x) for x in v),
        log_coefficients=None if u is None else tuple(tuple(x) for x in u),
    )


def series_block(system: ModeSystem, series: FrobeniusSeries):
    """Wrap series profiles as the matching mode block."""
    cls = OneFormModeBlock if system.family == "oneform" else TensorModeBlock
    return cls(system.kind, system.mode, series.profiles())


# ---------------------------------------------------------------------------
# outward continuation


@dataclass
class ContinuedSolution:
    """Grid solution on [handoff, r_end] with ODE-exact nodal derivatives."""

    system: ModeSystem
    grid: np.ndarray
    values: np.ndarray  # (arity, N)
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    d4: np.ndarray

    @property
    def endpoint(self):
        return self.values[:, -1]

    def profile(self, name: str, derivative: int = 0) -> RadialProfile:
        if derivative not in (0, 1):
            raise ValueError("derivative order must be 0 or 1")
        i = self.system.names.index(name)
        stack = (self.values, self.d1, self.d2, self.d3, self.d4)
        x0, x1, x2, x3 = (stack[derivative + j][i] for j in range(4))
        return _hermite_profile(self.grid, x0, x1, x2, x3)

    def profiles(self) -> dict:
        return {name: self.profile(name) for name in self.system.names}


def _hermite_profile(grid, x0, x1, x2, x3) -> RadialProfile:
    # separate interpolants so each derivative keeps quartic-order accuracy
    return RadialProfile(CubicHermiteSpline(grid, x0, x1),
                         CubicHermiteSpline(grid, x1, x2),
                         CubicHermiteSpline(grid, x2, x3))


def _auto_handoff(r_end: float) -> float:
    # inside the series' convergence disk, outside the steep indicial spread
    return min(0.1, 0.125 * r_end)


def integrate_mode_ode(system: ModeSystem, series: FrobeniusSeries,
                       handoff: float, r_end: float,
                       source_profiles: Optional[Mapping[str, RadialProfile]] = None,
                       num: int = 400, rtol: float = 1e-11, atol: float = 1e-13,
                       method: str = "DOP853") -> ContinuedSolution:
    """Continue a series solution from the handoff radius out to ``r_end``.

    Handing off deep inside the singular region loses accuracy: absolute
    integrator noise at radius r0 feeds the steepest homogeneous mode with
    weight ~ r0^(-spread).  Keep the handoff near 0.1 and raise the series
    order instead when more interior accuracy is needed.
    """
    if not 0 < handoff < r_end:
        raise DomainError("need 0 < handoff < r_end")
    if handoff < 1e-8:
        raise DomainError(
            "handoff radius below 1e-8 collapses integrator steps; "
            "evaluate the series directly there instead")
    k = system.arity
    src_rows = [None] * k
    if source_profiles:
        for name, prof in source_profiles.items():
            src_rows[system.names.index(name)] = prof
    src = None
    if any(p is not None for p in src_rows):
        def src(r):
            return np.array(
                [0j if p is None else complex(p(r)) for p in src_rows])

    y0 = np.concatenate([series.evaluate(handoff), series.evaluate(handoff, 1)])
    grid = np.geomspace(handoff, r_end, num)
    grid[0], grid[-1] = handoff, r_end
    sol = solve_ivp(lambda t, y: system.rhs_first_order(t, y, src),
                    (handoff, r_end), y0.astype(complex), method=method,
                    rtol=rtol, atol=atol, t_eval=grid)
    if not sol.success:
        raise FrobeniusError(
            f"continuation failed ({sol.message}); try a larger handoff radius")
    X, dX = sol.y[:k], sol.y[k:]
    q, qp, qpp = (f(grid) for f in
                  (system.drift_at, system.drift_d1_at, system.drift_d2_at))
    V, Vp, Vpp = (f(grid) for f in
                  (system.potential_at, system.potential_d1_at,
                   system.potential_d2_at))
    S = np.zeros((k, grid.size), dtype=complex)
    Sp = np.zeros_like(S)
    Spp = np.zeros_like(S)
    for i, prof in enumerate(src_rows):
        if prof is not None:
            S[i], Sp[i], Spp[i] = prof(grid), prof.d1(grid), prof.d2(grid)
    mat = lambda M, Y: np.einsum("ijr,jr->ir", M, Y)
    d2 = -q * dX + mat(V, X) - S
    d3 = -qp * dX - q * d2 + mat(Vp, X) + mat(V, dX) - Sp
    d4 = (-qpp * dX - 2 * qp * d2 - q * d3
          + mat(Vpp, X) + 2 * mat(Vp, dX) + mat(V, d2) - Spp)
    return ContinuedSolution(system, grid, X, dX, d2, d3, d4)


def _piecewise(inner: RadialProfile, outer: RadialProfile, cut: float) -> RadialProfile:
    def switch(f, g):
        def call(r):
            r = np.asarray(r, dtype=float)
            lo = f(np.minimum(r, cut))
            hi = g(np.maximum(r, cut))
            return np.where(r < cut, lo, hi)
        return call

    return RadialProfile(switch(inner, outer),
                         switch(inner.d1, outer.d1),
                         switch(inner.d2, outer.d2))


def _series_profile(series: FrobeniusSeries, name: str, shift: int = 0) -> RadialProfile:
    i = series.names.index(name)
    return RadialProfile(
        lambda r: series.evaluate(r, shift)[i],
        lambda r: series.evaluate(r, shift + 1)[i],
        lambda r: series.evaluate(r, shift + 2)[i],
    )


# ---------------------------------------------------------------------------
# boundary-value solving


@dataclass
class ModeBVPResult:
    """Dirichlet solve within a solution class; see ``status`` for solvability.

    ``branch_exponents`` lists the admissible branches as (kind, exponent)
    pairs in the order matching ``coefficients``.  ``axis_values`` holds the
    r -> 0 limits of the components (the exponent-zero branch content);
    ``axis_regular`` is False when an active branch diverges at the axis.
    """

    system: ModeSystem
    solution_class: str
    status: str
    branch_exponents: tuple
    coefficients: np.ndarray
    condition_number: float
    boundary_residual: float
    profiles: dict
    axis_values: dict
    axis_regular: bool
    null_combinations: tuple
    handoff: float

    def block(self):
        cls = OneFormModeBlock if self.system.family == "oneform" else TensorModeBlock
        return cls(self.system.kind, self.system.mode, dict(self.profiles))

    def summary(self) -> dict:
        return {
            "family": self.system.family,
            "kind": self.system.kind,
            "solution_class": self.solution_class,
            "status": self.status,
            "branches": [[kind, kap] for kind, kap in self.branch_exponents],
            "coefficients": [[z.real, z.imag] for z in self.coefficients],
            "condition_number": self.condition_number,
            "boundary_residual": self.boundary_residual,
            "axis_regular": self.axis_regular,
            "axis_values": {k: [v.real, v.imag] for k, v in self.axis_values.items()},
        }


def admissible_branches(system: ModeSystem, solution_class: str):
    """(kind, exponent, seed vector) triples admitted by the solution class."""
    report = indicial_report(system)
    out = []
    for root in report.roots:
        if classify_exponent(root.value, False)[solution_class]:
            for vec in root.vectors:
                out.append(("power", root.value, tuple(vec)))
        if root.log_required and classify_exponent(root.value, True)[solution_class]:
            for vec in root.vectors:
                out.append(("log", root.value, tuple(vec)))
    return out


def solve_mode_bvp(model: ConeModel, mode: Mode, family: str,
                   boundary: Mapping[str, complex],
                   solution_class: str = "strong",
                   source: Optional[Mapping[str, RadialExpr]] = None,
                   order: int = 14, handoff: Optional[float] = None,
                   num: int = 400, rtol: float = 1e-11,
                   atol: float = 1e-13) -> ModeBVPResult:
    """Match admissible interior branches to Dirichlet data at the tube edge.

    The boundary map sends branch coefficients to component values at
    r = tube_radius.  A square well-conditioned map gives status "unique";
    fewer branches than components reports "deficient" (residual shows
    whether this particular data is still attainable), more branches or a
    rank drop reports "non_unique" with the null combinations.
    """
    system = system_for_mode(model, mode, family)
    unknown = set(boundary) - set(system.names)
    if unknown:
        raise ValueError(f"boundary names {sorted(unknown)} not in system")
    a = model.tube_radius
    if handoff is None:
        handoff = _auto_handoff(a)
    k = system.arity
    branches = admissible_branches(system, solution_class)

    columns, branch_profiles, branch_axis = [], [], []
    for kind, kappa, vec in branches:
        if kind == "power":
            ser = frobenius_series(system, kappa, vector=vec, order=order)
        else:
            ser = frobenius_series(system, kappa, log_vector=vec, order=order)
        cont = integrate_mode_ode(system, ser, handoff, a, num=num,
                                  rtol=rtol, atol=atol)
        columns.append(cont.endpoint)
        branch_profiles.append({
            name: _piecewise(_series_profile(ser, name), cont.profile(name), handoff)
            for name in system.names})
        if kind == "power" and abs(kappa) < 1e-12:
            branch_axis.append(np.asarray(ser.coefficients[0], dtype=complex))
        else:
            branch_axis.append(None)

    part_profiles = None
    part_end = np.zeros(k, dtype=complex)
    part_axis = np.zeros(k, dtype=complex)
    part_regular = True
    if source:
        pser = inhomogeneous_series(system, source, order=order)
        sprofabs = {nm: RadialProfile.from_expr(ex) for nm, ex in source.items()}
        pcont = integrate_mode_ode(system, pser, handoff, a,
                                   source_profiles=sprofabs, num=num,
                                   rtol=rtol, atol=atol)
        part_profiles = {
            name: _piecewise(_series_profile(pser, name), pcont.profile(name), handoff)
            for name in system.names}
        part_end = pcont.endpoint
        if pser.kappa < -1e-12:
            part_regular = False
        elif abs(pser.kappa) < 1e-12:
            part_axis = np.asarray(pser.coefficients[0], dtype=complex)
            if pser.has_log and np.any(np.abs(pser.log_coefficients[0]) > 1e-14):
                part_regular = False

    bvec = np.array([complex(boundary.get(nm, 0.0)) for nm in system.names])
    target = bvec - part_end
    nb = len(branches)
    if nb:
        B = np.stack(columns, axis=1)
        _, sv, vh = np.linalg.svd(B)
        rank = int(np.sum(sv > 1e-10 * max(sv[0], 1.0)))
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
        coeffs = np.linalg.lstsq(B, target, rcond=1e-12)[0]
        residual = float(np.linalg.norm(B @ coeffs - target))
        nulls = tuple(tuple(row) for row in vh[rank:].conj())
    else:
        rank, cond, residual = 0, np.inf, float(np.linalg.norm(target))
        coeffs, nulls = np.zeros(0, dtype=complex), ()
    if rank == nb == k:
        status = "unique"
    elif rank == k:
        status = "non_unique"
    elif rank == nb:
        status = "deficient"
    else:
        status = "deficient_non_unique"

    profiles = {}
    for i, name in enumerate(system.names):
        prof = RadialProfile.zero() if part_profiles is None else part_profiles[name]
        for c, bp in zip(coeffs, branch_profiles):
            prof = prof + c * bp[name]
        profiles[name] = prof

    axis = part_axis.copy()
    regular = part_regular
    for c, (kind, kappa, _), v0 in zip(coeffs, branches, branch_axis):
        if v0 is not None:
            axis = axis + c * v0
        elif abs(c) > 1e-9 and (kappa < -1e-12 or
                                (abs(kappa) < 1e-12 and kind == "log")):
            regular = False
    axis_values = {name: complex(axis[i]) for i, name in enumerate(system.names)}

    return ModeBVPResult(
        system=system,
        solution_class=solution_class,
        status=status,
        branch_exponents=tuple((kind, kappa) for kind, kappa, _ in branches),
        coefficients=coeffs,
        condition_number=cond,
        boundary_residual=residual,
        profiles=profiles,
        axis_values=axis_values,
        axis_regular=regular,
        null_combinations=nulls,
        handoff=handoff,
    )


def induced_singular_deformation(model: ConeModel, boundary_data: Mapping,
                                 solution_class: str = "strong",
                                 order: int = 14, handoff: Optional[float] = None,
                                 num: int = 400) -> dict:
    """Per-mode Dirichlet solves extracting the axis limits of the components.

    ``boundary_data`` maps tensor modes to component values at the tube edge.
    The axis limits of the cross-section slots (the exponent-zero branch
    content) are what survives at the singular locus; only p = 0 modes can
    carry them when no indicial root sits at zero for p != 0.
    """
    results = {}
    for mode, bvals in boundary_data.items():
        results[mode] = solve_mode_bvp(
            model, mode, "tensor", bvals, solution_class=solution_class,
            order=order, handoff=handoff, num=num)
    return results


# ---------------------------------------------------------------------------
# cone-angle deformation


# septic smoothstep: C^3, so the cutoff keeps three exact derivatives
_SMOOTH = np.array([-20.0, 70.0, -84.0, 35.0, 0.0, 0.0, 0.0, 0.0])
_SMOOTH_DERIVS = [np.polyder(_SMOOTH, k) for k in (1, 2, 3)]


def _cutoff_derivatives(c0: float, c1: float):
    """chi and chi', chi'', chi''' closures; 1 below c0, 0 above c1."""
    if not 0 < c0 < c1:
        raise DomainError("cutoff needs 0 < c0 < c1")
    w = c1 - c0

    def value(r):
        r = np.asarray(r, dtype=float)
        x = np.clip((r - c0) / w, 0.0, 1.0)
        return 1.0 - np.polyval(_SMOOTH, x)

    def deriv(k):
        poly, scale = _SMOOTH_DERIVS[k - 1], w ** (-k)

        def call(r):
            r = np.asarray(r, dtype=float)
            x = (r - c0) / w
            inside = (x > 0.0) & (x < 1.0)
            return np.where(inside, -np.polyval(poly, np.clip(x, 0.0, 1.0)) * scale, 0.0)

        return call

    return value, deriv(1), deriv(2), deriv(3)


@dataclass
class AngleDeformation:
    """Radial data of the cone-angle deformation family near the axis.

    ``series`` expands the distinguished gauge potential f with
    f = -r log r + r^3 (c + c' log r) + ...; the potential solves
    O f = 2 / tanh r in the scalar p = 0 one-form system, normalized to carry
    no admissible homogeneous component at the leading orders.
    """

    model: ConeModel
    system: ModeSystem
    series: FrobeniusSeries
    continuation: ContinuedSolution
    handoff: float

    @property
    def f_profile(self) -> RadialProfile:
        return _piecewise(_series_profile(self.series, "f"),
                          self.continuation.profile("f"), self.handoff)

    @property
    def g_profile(self) -> RadialProfile:
        return _piecewise(_series_profile(self.series, "g"),
                          self.continuation.profile("g"), self.handoff)

    def _f_derivative_profile(self) -> RadialProfile:
        return _piecewise(_series_profile(self.series, "f", shift=1),
                          self.continuation.profile("f", derivative=1),
                          self.handoff)

    def residual(self, radii) -> np.ndarray:
        """Max componentwise defect of O X = (2/tanh r, 0) at the radii."""
        radii = np.asarray(radii, dtype=float)
        block = OneFormModeBlock(self.system.kind, self.system.mode,
                                 {"f": self.f_profile, "g": self.g_profile})
        out = self.system.apply(block, radii)
        res_f = np.abs(out["f"] - 2.0 / np.tanh(radii))
        res_g = np.abs(out["g"])
        return np.maximum(res_f, res_g)

    def correction_block(self, cutoff=None) -> TensorModeBlock:
        """Deformation tensor h0 - delta*(chi f e^r) in cross-section slots.

        ``cutoff=(c0, c1)`` multiplies the gauge potential by a C^2 bump that
        is 1 below c0 and 0 above c1; None keeps the raw potential.
        """
        n = self.model.n
        f = self.f_profile
        fd = self._f_derivative_profile()
        if cutoff is not None:
            c, c1, c2, c3 = _cutoff_derivatives(*cutoff)
            chi = RadialProfile(c, c1, c2)
            chi_d = RadialProfile(c1, c2, c3)
            fd = chi_d.times(f) + chi.times(fd)
            f = chi.times(f)
        th = RadialProfile.from_expr(_ex("th"))
        inv_th = RadialProfile.from_expr(_ex("inv_th"))
        profiles = {
            "f": -1.0 * fd,
            "g": RadialProfile.constant(1.0) - f.times(inv_th),
            "k1": -np.sqrt(n - 2) * f.times(th),
        }
        return TensorModeBlock("B", ScalarMode(0.0, 0), profiles)

    def boundary_values(self, cutoff=None) -> dict:
        """Component trace of the deformation tensor at the tube edge."""
        a = self.model.tube_radius
        if cutoff is None:
            cutoff = (0.25 * a, 0.5 * a)
        block = self.correction_block(cutoff=cutoff)
        return {name: complex(block.component(name)(a))
                for name in ("f", "g", "h", "k1")}


def angle_deformation_profile(model: ConeModel, order: int = 16,
                              handoff: Optional[float] = None,
                              num: int = 600) -> AngleDeformation:
    """Solve the gauge potential ODE for the cone-angle deformation."""
    system = oneform_system(model, ScalarMode(0.0, 0), "B")
    if handoff is None:
        handoff = _auto_handoff(model.tube_radius)
    source = {"f": 2.0 * _ex("inv_th")}
    series = inhomogeneous_series(system, source, order=order)
    cont = integrate_mode_ode(
        system, series, handoff, model.tube_radius,
        source_profiles={"f": RadialProfile.from_expr(source["f"])},
        num=num)
    return AngleDeformation(model=model, system=system, series=series,
                            continuation=cont, handoff=handoff)
