import math

import numpy as np
import pytest

from oaqg.params import PhysicalParams, ParamError
from oaqg.basis import (
    ResolutionSpec, ResolutionError, SpectralBasis, build_basis, jacobian,
    quad_points, COS, SIN,
)

import oracles


@pytest.fixture(scope="module")
def small_basis():
    return build_basis(ResolutionSpec(2, 2, 2, 2), PhysicalParams())


@pytest.fixture(scope="module")
def mid_basis():
    return build_basis(ResolutionSpec(3, 3, 3, 3), PhysicalParams())


def test_resolution_spec_roundtrip():
    res = ResolutionSpec.parse("8x8/6x4")
    assert (res.k_zonal, res.n_merid, res.m_ocn, res.p_ocn) == (8, 8, 6, 4)
    assert str(res) == "8x8/6x4"
    assert res.n_atm == 17 * 8
    assert res.n_ocn == 24
    with pytest.raises(ParamError, match="resolution"):
        ResolutionSpec.parse("8x8")
    with pytest.raises(ParamError, match="resolution"):
        ResolutionSpec(0, 1, 1, 1)


def test_eigenvalues_closed_form(small_basis):
    p = PhysicalParams()
    b = small_basis
    i = b.ocn.index[(1, 1)]
    expected = math.pi ** 2 * (1.0 / p.L ** 2 + 1.0 / (p.alpha * p.L) ** 2)
    assert b.eig_ocn[i] == pytest.approx(expected, rel=1e-14)
    j = b.atm.index[(0, 1, COS)]
    assert b.eig_atm[j] == pytest.approx(math.pi ** 2 / (p.alpha * p.L) ** 2,
                                         rel=1e-14)
    k = b.atm.index[(2, 1, SIN)]
    assert b.eig_atm[k] == pytest.approx(
        (2 * math.pi * 2 / p.L) ** 2 + math.pi ** 2 / (p.alpha * p.L) ** 2,
        rel=1e-14)
    assert b.lambda_1 == min(b.eig_atm.min(), b.eig_ocn.min())
    assert b.lambda_1 == pytest.approx(math.pi ** 2 / (p.alpha * p.L) ** 2)


def test_modes_vanish_on_walls(small_basis):
    b = small_basis
    alpha = b.alpha
    xs = np.linspace(0.0, math.pi, 17)
    for y in (0.0, alpha * math.pi):
        Ea = b.atm.evaluate(xs, np.full_like(xs, y))
        assert np.abs(Ea).max() < 1e-13
        Eo = b.ocn.evaluate(xs, np.full_like(xs, y))
        assert np.abs(Eo).max() < 1e-13
    ys = np.linspace(0.0, alpha * math.pi, 17)
    for x in (0.0, math.pi):
        Eo = b.ocn.evaluate(np.full_like(ys, x), ys)
        assert np.abs(Eo).max() < 1e-13
    # atmosphere is zonally periodic instead of wall-clamped in x
    Ea0 = b.atm.evaluate(np.zeros(5), np.linspace(0.3, 1.2, 5))
    Ea1 = b.atm.evaluate(np.full(5, math.pi), np.linspace(0.3, 1.2, 5))
    assert Ea0 == pytest.approx(Ea1, abs=1e-13)


def test_orthonormality(mid_basis):
    b = mid_basis
    x, y, w = quad_points(b.alpha, 48, 40)
    for fam in (b.atm, b.ocn):
        E = fam.evaluate(x, y)
        gram = E.T @ (E * w[:, None])
        assert np.abs(gram - np.eye(len(fam))).max() < 1e-12


def test_jacobian_self_is_zero(mid_basis):
    rng = np.random.default_rng(11)
    u = rng.standard_normal(len(mid_basis.atm))
    assert np.abs(jacobian(mid_basis, u, "atm", u, "atm", "atm")).max() < 1e-12
    v = rng.standard_normal(len(mid_basis.ocn))
    assert np.abs(jacobian(mid_basis, v, "ocn", v, "ocn", "ocn")).max() < 1e-12


def test_jacobian_antisymmetry(mid_basis):
    rng = np.random.default_rng(12)
    u = rng.standard_normal(len(mid_basis.atm))
    v = rng.standard_normal(len(mid_basis.atm))
    juv = jacobian(mid_basis, u, "atm", v, "atm", "atm")
    jvu = jacobian(mid_basis, v, "atm", u, "atm", "atm")
    assert juv == pytest.approx(-jvu, abs=1e-12)


def test_jacobian_cyclic_identity(mid_basis):
    # (J(u,v), w) = -(J(u,w), v): integration by parts with vanishing
    # boundary flux; this is the cancellation that conserves energy.
    rng = np.random.default_rng(13)
    for fam in ("atm", "ocn"):
        n = len(mid_basis.family(fam))
        u, v, w = rng.standard_normal((3, n))
        lhs = jacobian(mid_basis, u, fam, v, fam, fam) @ w
        rhs = jacobian(mid_basis, u, fam, w, fam, fam) @ v
        scale = max(abs(lhs), abs(rhs), 1e-30)
        assert abs(lhs + rhs) / scale < 1e-10


def test_jacobian_matches_quadrature_oracle(mid_basis):
    b = mid_basis
    la = oracles.atm_labels(3, 3)
    lo = oracles.ocn_labels(3, 3)
    assert la == b.atm.labels  # shared ordering contract
    assert lo == b.ocn.labels
    rng = np.random.default_rng(21)
    for _ in range(4):
        u = rng.standard_normal(len(la))
        v = rng.standard_normal(len(la))
        ours = jacobian(b, u, "atm", v, "atm", "atm")
        ref = oracles.jacobian_projection(u, v, ("atm", la), ("atm", la),
                                          ("atm", la), b.alpha)
        assert np.abs(ours - ref).max() < 1e-10 * max(1.0, np.abs(ref).max())
    for _ in range(4):
        u = rng.standard_normal(len(lo))
        v = rng.standard_normal(len(lo))
        ours = jacobian(b, u, "ocn", v, "ocn", "ocn")
        ref = oracles.jacobian_projection(u, v, ("ocn", lo), ("ocn", lo),
                                          ("ocn", lo), b.alpha)
        assert np.abs(ours - ref).max() < 1e-10 * max(1.0, np.abs(ref).max())


def test_mixed_jacobian_tensors(mid_basis):
    b = mid_basis
    la = oracles.atm_labels(3, 3)
    lo = oracles.ocn_labels(3, 3)
    rng = np.random.default_rng(22)
    u = rng.standard_normal(len(lo))
    v = rng.standard_normal(len(la))
    ours = jacobian(b, u, "ocn", v, "atm", "ocn")
    ref = oracles.jacobian_projection(u, v, ("ocn", lo), ("atm", la),
                                      ("ocn", lo), b.alpha)
    assert np.abs(ours - ref).max() < 1e-10 * max(1.0, np.abs(ref).max())
    ours2 = jacobian(b, v, "atm", u, "ocn", "atm")
    ref2 = oracles.jacobian_projection(v, u, ("atm", la), ("ocn", lo),
                                       ("atm", la), b.alpha)
    assert np.abs(ours2 - ref2).max() < 1e-10 * max(1.0, np.abs(ref2).max())


def test_jacobian_frozen_spot_values(small_basis):
    # regenerate with `python tests/oracles.py`
    b = small_basis
    u = np.zeros(len(b.atm)); u[b.atm.index[(0, 1, COS)]] = 1.0
    v = np.zeros(len(b.atm)); v[b.atm.index[(1, 1, COS)]] = 1.0
    ja = jacobian(b, u, "atm", v, "atm", "atm")
    assert ja[b.atm.index[(1, 2, SIN)]] == pytest.approx(6.930638233188e-01,
                                                         rel=1e-11)
    uo = np.zeros(len(b.ocn)); uo[b.ocn.index[(1, 1)]] = 1.0
    vo = np.zeros(len(b.ocn)); vo[b.ocn.index[(1, 2)]] = 1.0
    jo = jacobian(b, uo, "ocn", vo, "ocn", "ocn")
    assert jo[b.ocn.index[(2, 1)]] == pytest.approx(-7.351051938957e-01,
                                                    rel=1e-11)


def test_jacobian_shape_mismatch(small_basis):
    with pytest.raises(ParamError, match="lengths"):
        jacobian(small_basis, np.zeros(3), "atm",
                 np.zeros(len(small_basis.atm)), "atm", "atm")


def test_cross_mass_structure(mid_basis):
    b = mid_basis
    # meridional orthogonality: entries vanish unless n matches
    for (k, n, par) in b.atm.labels:
        i = b.atm.index[(k, n, par)]
        for (m, n2) in b.ocn.labels:
            j = b.ocn.index[(m, n2)]
            if n2 != n:
                assert abs(b.cross_mass[i, j]) < 1e-14
    # frozen spot value: zonal-mean column against the gravest ocean mode
    i = b.atm.index[(0, 1, COS)]
    j = b.ocn.index[(1, 1)]
    assert b.cross_mass[i, j] == pytest.approx(9.003163161571e-01, rel=1e-11)
    assert b.cross_mass[i, j] == pytest.approx(2.0 * math.sqrt(2.0) / math.pi,
                                               rel=1e-12)
    # sine-sine pairing is exact: sin(2kx) against m = 2k only
    i2 = b.atm.index[(1, 1, SIN)]
    j2 = b.ocn.index[(2, 1)]
    assert b.cross_mass[i2, j2] == pytest.approx(1.0, rel=1e-12)
    for m in (1, 3):
        assert abs(b.cross_mass[i2, b.ocn.index[(m, 1)]]) < 1e-14


def test_cross_mass_matches_oracle(mid_basis):
    b = mid_basis
    cases = [((0, 2, COS), (1, 2)), ((1, 1, COS), (3, 1)), ((1, 3, SIN), (2, 3))]
    for lab_a, lab_o in cases:
        ref = oracles.pair_integral("atm", lab_a, "ocn", lab_o, b.alpha)
        ours = b.cross_mass[b.atm.index[lab_a], b.ocn.index[lab_o]]
        assert ours == pytest.approx(ref, abs=1e-11)


def test_dx_matrices(mid_basis):
    b = mid_basis
    rng = np.random.default_rng(31)
    la = oracles.atm_labels(3, 3)
    u = rng.standard_normal(len(la))
    x, y, w = oracles.quad_grid(b.alpha, 96, 72)
    ux, _ = oracles.grad_on_grid(u, la, oracles.atm_grad, b.alpha, x, y)
    ref = oracles.project(ux, la, oracles.atm_value, b.alpha, x, y, w)
    assert b.dx_atm @ u == pytest.approx(ref, abs=1e-11)
    lo = oracles.ocn_labels(3, 3)
    v = rng.standard_normal(len(lo))
    vx, _ = oracles.grad_on_grid(v, lo, oracles.ocn_grad, b.alpha, x, y)
    ref_o = oracles.project(vx, lo, oracles.ocn_value, b.alpha, x, y, w)
    assert b.dx_ocn @ v == pytest.approx(ref_o, abs=1e-11)


def test_const_projection(mid_basis):
    b = mid_basis
    x, y, w = oracles.quad_grid(b.alpha, 64, 64)
    ones = np.ones_like(x)
    ref_a = oracles.project(ones, b.atm.labels, oracles.atm_value,
                            b.alpha, x, y, w)
    ref_o = oracles.project(ones, b.ocn.labels, oracles.ocn_value,
                            b.alpha, x, y, w)
    assert b.const_atm == pytest.approx(ref_a, abs=1e-12)
    assert b.const_ocn == pytest.approx(ref_o, abs=1e-12)
    # reconstructing the constant from its projection preserves the area
    area = math.pi ** 2 * b.alpha
    assert b.const_atm @ b.const_atm < area + 1e-12


def test_quadrature_weights_integrate_area():
    alpha = 0.75
    x, y, w = quad_points(alpha, 24, 24)
    assert w.sum() == pytest.approx(math.pi ** 2 * alpha, rel=1e-13)


def test_tensor_contraction_deterministic(mid_basis):
    rng = np.random.default_rng(41)
    u = rng.standard_normal(len(mid_basis.atm))
    v = rng.standard_normal(len(mid_basis.atm))
    a = jacobian(mid_basis, u, "atm", v, "atm", "atm")
    b_ = jacobian(mid_basis, u, "atm", v, "atm", "atm")
    assert np.array_equal(a, b_)


def test_overflow_guard():
    with pytest.raises(ResolutionError, match="cap"):
        build_basis(ResolutionSpec(24, 24, 8, 8), PhysicalParams(),
                    tensor_cap_mb=10.0)
