import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conemodes.geometry import ConeModel, CrossSection, DomainError
from conemodes.modes import CoclosedMode, ScalarMode, TTMode
from conemodes.reduction import (
    OneFormModeBlock,
    QuadratureConvergenceError,
    RadialExpr,
    RadialProfile,
    TensorModeBlock,
    apply_L_oneform,
    apply_P_tensor,
    block_csv_rows,
    block_from_dict,
    block_to_dict,
    component_weights,
    ext_d_oneform,
    grad_oneform,
    l2_norm_tube,
    log_grid,
    oneform_system,
    scalar_mode_operator,
    standard_deformation_block,
    tensor_system,
    trace_tensor_mode,
)

MODEL3 = ConeModel(n=3, alpha=math.pi / 2, tube_radius=1.0)
MODEL4 = ConeModel(n=4, alpha=math.pi / 2, tube_radius=1.0)

TANH1 = 0.7615941559557649
SINH1 = 1.1752011936438014
COTH1 = 1.3130352854993313


def expr_profile(*terms):
    return RadialProfile.from_expr(RadialExpr(tuple(terms)))


# ---------------------------------------------------------------------------
# profiles


def test_profile_monomial_derivatives():
    p = RadialProfile.monomial(6, 2j)
    r = np.array([0.3, 0.9])
    assert np.allclose(p(r), 2j * r**6)
    assert np.allclose(p.d1(r), 12j * r**5)
    assert np.allclose(p.d2(r), 60j * r**4)


def test_profile_algebra():
    p = RadialProfile.monomial(2) + 3.0 * RadialProfile.constant(1.0)
    r = np.array([0.5, 1.0])
    assert np.allclose(p(r), r**2 + 3.0)
    assert np.allclose(p.d2(r), 2.0)
    q = p - RadialProfile.monomial(2)
    assert np.allclose(q(r), 3.0)


def test_from_expr_derivatives_match_fd():
    p = expr_profile((1.5, ("sh", "ch")), (2j, ("th", "th", "inv_ch")))
    r = np.linspace(0.2, 1.0, 7)
    h = 1e-5
    fd1 = (p(r + h) - p(r - h)) / (2 * h)
    fd2 = (p.d1(r + h) - p.d1(r - h)) / (2 * h)
    assert np.max(np.abs(p.d1(r) - fd1)) < 1e-8
    assert np.max(np.abs(p.d2(r) - fd2)) < 1e-8


def test_from_sympy_profile():
    p = RadialProfile.from_sympy("r**2/(sinh(r)*cosh(r))")
    assert p(1.0) == pytest.approx(1.0 / (SINH1 * math.cosh(1.0)), rel=1e-12)
    h = 1e-5
    fd = (p(1.0 + h) - p(1.0 - h)) / (2 * h)
    assert p.d1(1.0) == pytest.approx(complex(fd), rel=1e-8)


def test_grid_profile_consistency():
    r = np.linspace(0.1, 1.0, 400)
    vals = np.sinh(r) * np.exp(1j * r)
    d1 = np.cosh(r) * np.exp(1j * r) + 1j * vals
    p = RadialProfile.from_grid(r, vals, d1)
    assert p.consistency_residual() < 1e-4
    mid = 0.5 * (r[10] + r[11])
    assert abs(p(mid) - np.sinh(mid) * np.exp(1j * mid)) < 1e-9
    bad = RadialProfile.from_grid(r, vals, np.zeros_like(d1))
    assert bad.consistency_residual() > 0.1
    with pytest.raises(ValueError):
        RadialProfile.monomial(2).consistency_residual()


# ---------------------------------------------------------------------------
# block construction rules


def test_block_kind_validation():
    with pytest.raises(ValueError):
        OneFormModeBlock("A", ScalarMode(0.0, 0))
    with pytest.raises(ValueError):
        OneFormModeBlock("B", ScalarMode(2.0, 0))
    with pytest.raises(ValueError):
        TensorModeBlock("C", ScalarMode(1.0, 0))
    with pytest.raises(ValueError):
        TensorModeBlock("D", CoclosedMode(0.0, 0))
    with pytest.raises(ValueError):
        OneFormModeBlock("B", ScalarMode(0.0, 0),
                         {"omega": RadialProfile.constant(1.0)})


def test_missing_components_read_as_zero():
    b = TensorModeBlock("B", ScalarMode(0.0, 0),
                        {"g": RadialProfile.constant(1.0)})
    assert np.allclose(b.component("f")(np.array([0.5])), 0.0)


# ---------------------------------------------------------------------------
# operator values, frozen


def test_oneform_coclosed_constant_value():
    # flat co-closed profile: potential th^2 + (n-1) at mu = 0, p = 0
    block = OneFormModeBlock("C", CoclosedMode(0.0, 0),
                             {"varpi": RadialProfile.constant(1.0)})
    out = apply_L_oneform(MODEL3, block, 1.0)
    assert out["varpi"] == pytest.approx(2.5800256583859739, abs=1e-12)


def test_tensor_tt_constant_value():
    block = TensorModeBlock("D", TTMode(0.0, 0),
                            {"k4": RadialProfile.constant(1.0)})
    out = apply_P_tensor(MODEL3, block, 1.0)
    assert out["k4"] == pytest.approx(-0.8399486832280521, abs=1e-12)


def test_tensor_indicial_vector_cancellation():
    """Leading exponent pg + 2 with vector (-1, 1, 2i) kills the r^(kappa-2)
    term; the image decays two orders faster than a generic profile."""
    mode = ScalarMode(2.0, 1)
    kappa = MODEL3.gamma * mode.p + 2  # = 6
    block = TensorModeBlock("A", mode, {
        "f": RadialProfile.monomial(kappa, -1.0),
        "g": RadialProfile.monomial(kappa, 1.0),
        "h": RadialProfile.monomial(kappa, 2j),
    })
    radii = np.array([1e-3, 3e-3, 1e-2])
    out = apply_P_tensor(MODEL3, block, radii)
    err = np.max(np.abs(np.stack(list(out.values()))), axis=0)
    slope = np.polyfit(np.log(radii), np.log(err), 1)[0]
    assert abs(slope - kappa) < 0.3
    generic_scale = radii ** (kappa - 2)
    assert np.all(err < 1e-2 * generic_scale)


def test_apply_domain_checks():
    block = OneFormModeBlock("C", CoclosedMode(0.0, 0),
                             {"varpi": RadialProfile.constant(1.0)})
    with pytest.raises(DomainError):
        apply_L_oneform(MODEL3, block, 0.0)
    with pytest.raises(DomainError):
        apply_L_oneform(MODEL3, block, 1.5)


def test_apply_linearity():
    mode = ScalarMode(2.0, 1)
    u = {"f": expr_profile((1.0, ("sh",))), "g": expr_profile((1j, ("sh", "sh")))}
    v = {"f": expr_profile((2.0, ("th",))), "omega": expr_profile((1.0, ("sh", "inv_ch")))}
    r = np.linspace(0.2, 1.0, 5)
    a, b = 2.0 - 1j, 0.5j
    combo = {k: a * u.get(k, RadialProfile.zero()) + b * v.get(k, RadialProfile.zero())
             for k in ("f", "g", "omega")}
    out_u = apply_L_oneform(MODEL3, OneFormModeBlock("A", mode, u), r)
    out_v = apply_L_oneform(MODEL3, OneFormModeBlock("A", mode, v), r)
    out_c = apply_L_oneform(MODEL3, OneFormModeBlock("A", mode, combo), r)
    for k in out_c:
        assert np.max(np.abs(out_c[k] - a * out_u[k] - b * out_v[k])) < 1e-12


def test_conjugation_intertwines_sign_of_p():
    mode = ScalarMode(3.0, 2)
    profs = {
        "f": expr_profile((1 + 2j, ("sh",))),
        "g": expr_profile((0.5j, ("sh", "ch"))),
        "omega": expr_profile((1.0, ("sh", "inv_ch"))),
    }
    conj_profs = {k: RadialProfile(
        lambda r, p=p: np.conj(p(r)),
        lambda r, p=p: np.conj(p.d1(r)),
        lambda r, p=p: np.conj(p.d2(r))) for k, p in profs.items()}
    r = np.linspace(0.2, 1.0, 5)
    out = apply_L_oneform(MODEL3, OneFormModeBlock("A", mode, profs), r)
    out_conj = apply_L_oneform(
        MODEL3, OneFormModeBlock("A", mode.conjugate(), conj_profs), r)
    for k in out:
        assert np.max(np.abs(np.conj(out[k]) - out_conj[k])) < 1e-11


# ---------------------------------------------------------------------------
# formal self-adjointness in the weighted mode inner product


@pytest.mark.parametrize("family,kind,mode,n", [
    ("oneform", "A", ScalarMode(2.5, 1), 3),
    ("oneform", "B", ScalarMode(0.0, 2), 4),
    ("oneform", "C", CoclosedMode(1.5, 1), 3),
    ("tensor", "A", ScalarMode(2.5, 1), 5),
    ("tensor", "A", ScalarMode(4.0, 2), 3),
    ("tensor", "B", ScalarMode(0.0, 1), 4),
    ("tensor", "C", CoclosedMode(2.0, 1), 4),
    ("tensor", "C", CoclosedMode(0.5, 1), 3),
    ("tensor", "D", TTMode(3.0, 1), 5),
])
def test_potential_hermitian_in_weighted_product(family, kind, mode, n):
    model = ConeModel(n=n, alpha=2 * math.pi / 3, tube_radius=1.0)
    sysfun = oneform_system if family == "oneform" else tensor_system
    system = sysfun(model, mode, kind)
    w = component_weights(family, system.names)
    r = np.linspace(0.15, 1.0, 9)
    V = system.potential_at(r)
    k = system.arity
    for i in range(k):
        for j in range(k):
            lhs = w[i] * V[i, j]
            rhs = np.conj(w[j] * V[j, i])
            assert np.max(np.abs(lhs - rhs)) < 1e-11, (system.names[i], system.names[j])


def test_trace_intertwines_scalar_operator():
    """The metric trace of the tensor operator's value is the shifted scalar
    operator on the block's trace profile, identically in r."""
    mode = ScalarMode(2.0, 1)
    profs = {
        "f": expr_profile((1.0, ("sh", "sh"))),
        "g": expr_profile((1.0 + 1j, ("sh", "ch"))),
        "h": expr_profile((2j, ("sh", "sh"))),
        "sigma": expr_profile((1.0, ("sh", "sh", "sh"))),
        "eta": expr_profile((-1.0, ("sh", "sh", "th"))),
        "k1": expr_profile((0.7, ("ch", "ch"))),
        "k2": expr_profile((1.3, ("sh", "ch"))),
    }
    block = TensorModeBlock("A", mode, profs)
    r = np.linspace(0.1, 1.0, 12)
    out = apply_P_tensor(MODEL4, block, r)
    rn2 = math.sqrt(MODEL4.n - 2)
    traced = out["f"] + out["g"] + rn2 * out["k1"]
    tr_prof = trace_tensor_mode(MODEL4, block)
    expected = scalar_mode_operator(MODEL4, mode, tr_prof, r,
                                    shift=2.0 * (MODEL4.n - 1))
    scale = np.max(np.abs(expected))
    assert np.max(np.abs(traced - expected)) < 1e-9 * max(scale, 1.0)


def test_trace_vanishes_on_coclosed_and_tt():
    b = TensorModeBlock("C", CoclosedMode(0.0, 0),
                        {"eta_bar": RadialProfile.constant(1.0)})
    assert np.allclose(trace_tensor_mode(MODEL3, b)(np.array([0.5])), 0.0)
    assert trace_tensor_mode(
        MODEL4, TensorModeBlock("D", TTMode(1.0, 0),
                                {"k4": RadialProfile.constant(1.0)}))(0.7) == 0


# ---------------------------------------------------------------------------
# first-order displays


def test_grad_oneform_radial_example():
    block = OneFormModeBlock("B", ScalarMode(0.0, 0),
                             {"f": RadialProfile.constant(1.0)})
    out = grad_oneform(MODEL3, block, 1.0)
    assert out["eth_eth"] == pytest.approx(COTH1, abs=1e-12)
    assert out["er_er"] == pytest.approx(0.0, abs=1e-15)
    assert out["metric_trace"] == pytest.approx(TANH1, abs=1e-12)


def test_ext_d_oneform_frozen_value():
    model = ConeModel(n=3, alpha=math.pi, tube_radius=1.0)  # gamma = 2
    block = OneFormModeBlock("B", ScalarMode(0.0, 1),
                             {"f": RadialProfile.constant(1.0)})
    out = ext_d_oneform(model, block, 1.0)
    assert out["er_eth"] == pytest.approx(-2j / SINH1, abs=1e-12)


def test_ext_d_kills_gradients():
    # block of d(u psi) for u = sh^2: f = u', g = i p gamma u / sh, omega = sqrt(lam) u / ch
    model = ConeModel(n=3, alpha=3 * math.pi / 2, tube_radius=1.0)
    lam, p = 3.0, 2
    u_f = expr_profile((2.0, ("sh", "ch")))
    u_g = expr_profile((1j * p * model.gamma, ("sh",)))
    u_w = expr_profile((math.sqrt(lam), ("sh", "sh", "inv_ch")))
    block = OneFormModeBlock("A", ScalarMode(lam, p),
                             {"f": u_f, "g": u_g, "omega": u_w})
    r = np.linspace(0.05, 1.0, 20)
    out = ext_d_oneform(model, block, r)
    for key, vals in out.items():
        assert np.max(np.abs(vals)) < 1e-10, key


def test_antisymmetrized_grad_is_half_ext_d():
    model = ConeModel(n=3, alpha=3 * math.pi / 2, tube_radius=1.0)
    block = OneFormModeBlock("A", ScalarMode(2.0, 1), {
        "f": expr_profile((1.0, ("sh", "ch"))),
        "g": expr_profile((1j, ("sh", "sh"))),
        "omega": expr_profile((0.5, ("sh", "inv_ch"))),
    })
    r = np.array([0.3, 0.7, 1.0])
    gr = grad_oneform(model, block, r)
    dd = ext_d_oneform(model, block, r)
    for anti, pair in [("er_eth", ("er_eth", "eth_er")),
                       ("er_phi", ("er_phi", "phi_er")),
                       ("eth_phi", ("eth_phi", "phi_eth"))]:
        lhs = 0.5 * (gr[pair[0]] - gr[pair[1]])
        assert np.max(np.abs(lhs - 0.5 * dd[anti])) < 1e-12


def test_grad_coclosed_slots():
    block = OneFormModeBlock("C", CoclosedMode(0.0, 1),
                             {"varpi": RadialProfile.constant(2.0)})
    out = grad_oneform(MODEL3, block, 1.0)
    assert out["varphi_er"] == pytest.approx(-2.0 * TANH1, abs=1e-12)
    assert out["eth_varphi"] == pytest.approx(2j * MODEL3.gamma / SINH1, abs=1e-12)
    assert out["nabla_varphi"] == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# weighted tube quadrature


def test_norm_constant_profile_frozen():
    val = l2_norm_tube(MODEL3, [RadialProfile.constant(1.0)])
    assert val == pytest.approx(0.3807970779778824, abs=1e-12)


def test_norm_block_with_symmetrized_weights():
    b = TensorModeBlock("C", CoclosedMode(0.0, 0),
                        {"eta_bar": RadialProfile.constant(1.0)})
    full = l2_norm_tube(MODEL3, b)
    half = l2_norm_tube(MODEL3, b, weights="symmetrized")
    assert half == pytest.approx(0.5 * full, rel=1e-12)
    assert full == pytest.approx(0.3807970779778824, abs=1e-12)


def test_norm_divergent_profile_raises():
    with pytest.raises(QuadratureConvergenceError):
        l2_norm_tube(MODEL3, [RadialProfile.monomial(-1)])


def test_norm_log_divergence_rate():
    # |r^-1|^2 against the weight integrates like |log eps|
    p = RadialProfile.monomial(-1)
    vals = [l2_norm_tube(MODEL3, [p], inner_cutoff=eps, num_nodes=800, rtol=1e-5)
            for eps in (1e-2, 1e-3, 1e-4)]
    d1 = vals[1] - vals[0]
    d2 = vals[2] - vals[1]
    assert d2 == pytest.approx(d1, rel=0.1)


def test_norm_cutoff_validation():
    with pytest.raises(ValueError):
        l2_norm_tube(MODEL3, [RadialProfile.constant(1.0)], inner_cutoff=2.0)
    with pytest.raises(ValueError):
        l2_norm_tube(MODEL3, [RadialProfile.constant(1.0)], weights="bogus")


# ---------------------------------------------------------------------------
# standard deformation blocks


def test_angle_block():
    b = standard_deformation_block(MODEL3, "angle")
    assert b.kind == "B" and b.mode == ScalarMode(0.0, 0)
    assert np.allclose(b.component("g")(np.array([0.2, 0.9])), 1.0)
    assert set(b.profiles) == {"g"}


def test_locus_metric_block():
    b = standard_deformation_block(MODEL4, "locus_metric")
    assert set(b.profiles) == {"k1"}
    assert np.allclose(b.component("k1")(np.array([0.5])), 1.0)


def test_angle_gluing_block():
    b = standard_deformation_block(MODEL3, "angle_gluing")
    assert b.kind == "C" and b.mode == CoclosedMode(0.0, 0)
    prof = b.component("eta_bar")
    assert prof(1.0) == pytest.approx(1.0 / (SINH1 * math.cosh(1.0)), rel=1e-12)
    # r^2/(sh ch) -> r as r -> 0
    assert prof(1e-4) == pytest.approx(1e-4, rel=1e-6)


def test_unknown_standard_block():
    with pytest.raises(ValueError):
        standard_deformation_block(MODEL3, "twist")


# ---------------------------------------------------------------------------
# exact series data off the systems


def test_tensor_indicial_matrix_frozen():
    system = tensor_system(MODEL4, ScalarMode(2.0, 1), "A")
    assert system.names == ("f", "g", "h", "sigma", "eta", "k1", "k2")
    W = system.laurent_potential(2)
    pg2 = 16.0
    expected = np.zeros((7, 7), dtype=complex)
    expected[0, 0] = 2 + pg2
    expected[0, 1] = -2
    expected[0, 2] = 8j
    expected[1, 0] = -2
    expected[1, 1] = 2 + pg2
    expected[1, 2] = -8j
    expected[2, 0] = -16j
    expected[2, 1] = 16j
    expected[2, 2] = 4 + pg2
    expected[3, 3] = 1 + pg2
    expected[3, 4] = 8j
    expected[4, 3] = -8j
    expected[4, 4] = 1 + pg2
    expected[5, 5] = pg2
    expected[6, 6] = pg2
    assert np.max(np.abs(W[0] - expected)) < 1e-14
    assert np.max(np.abs(W[1])) == 0.0


def test_oneform_indicial_matrix_frozen():
    system = oneform_system(MODEL3, ScalarMode(2.0, 1), "A")
    W0 = system.laurent_potential(1)[0]
    pg = 4.0
    expected = np.array([
        [1 + pg**2, 2j * pg, 0],
        [-2j * pg, 1 + pg**2, 0],
        [0, 0, pg**2],
    ])
    assert np.max(np.abs(W0 - expected)) < 1e-14


def test_laurent_partial_sums_track_potential():
    system = tensor_system(MODEL3, ScalarMode(2.0, 1), "A")
    W = system.laurent_potential(8)
    r = 1e-2
    V = system.potential_at(np.array([r]))[:, :, 0]
    approx = sum(Wj * r**j for j, Wj in enumerate(W))
    assert np.max(np.abs(approx - r**2 * V)) < 1e-12


def test_laurent_drift_series():
    system = oneform_system(MODEL4, ScalarMode(0.0, 0), "B")
    s = system.laurent_drift(6)
    assert s.leading == 0
    assert complex(s.coeffs[0]) == pytest.approx(1.0)
    assert complex(s.coeffs[1]) == 0.0
    r = 5e-3
    rq = r * system.drift_at(np.array([r]))[0]
    assert s(r) == pytest.approx(rq, rel=1e-10)


@given(st.integers(min_value=-3, max_value=3),
       st.floats(min_value=0.1, max_value=8.0))
@settings(max_examples=25, deadline=None)
def test_expr_laurent_matches_evaluation(p, lam):
    model = ConeModel(n=3, alpha=1.1, tube_radius=1.0)
    system = oneform_system(model, ScalarMode(lam, p), "A")
    r = 1e-3
    for row in system.potential:
        for expr in row:
            if not expr.terms:
                continue
            s = expr.laurent(10)
            assert s(r) == pytest.approx(complex(expr(r)), rel=1e-9, abs=1e-12)


# ---------------------------------------------------------------------------
# serialization


def test_block_json_round_trip():
    grid = np.linspace(0.1, 1.0, 400)
    block = OneFormModeBlock("A", ScalarMode(2.0, -1), {
        "f": expr_profile((1.0, ("sh", "ch"))),
        "g": expr_profile((1j, ("sh", "sh"))),
    })
    d = block_to_dict(MODEL3, block, grid)
    assert d["mode"] == {"type": "scalar", "lambda": 2.0, "p": -1}
    back = block_from_dict(d)
    assert isinstance(back, OneFormModeBlock) and back.kind == "A"
    mids = 0.5 * (grid[:-1] + grid[1:])
    for name in ("f", "g"):
        orig = block.component(name)(mids)
        round_ = back.component(name)(mids)
        assert np.max(np.abs(orig - round_)) < 1e-8


def test_block_csv_rows():
    block = TensorModeBlock("B", ScalarMode(0.0, 0),
                            {"g": RadialProfile.constant(1.0),
                             "f": RadialProfile.constant(2j)})
    header, rows = block_csv_rows(MODEL3, block, np.array([0.5, 1.0]))
    assert header == ["r", "f_re", "f_im", "g_re", "g_im"]
    assert len(rows) == 2
    assert rows[0][0] == "0.5"
    assert rows[0][2] == "2"  # f imaginary part
    assert rows[1][3] == "1"  # g real part


def test_log_grid_shape():
    g = log_grid(MODEL3, num=50)
    assert len(g) == 50
    assert g[0] == pytest.approx(1e-6)
    assert g[-1] == pytest.approx(1.0)
