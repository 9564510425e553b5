import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import numeric_jacobian, twist_np, word_np
from uexpand import sl2
from uexpand.errors import ConfigError, FrameError, NumericalDriftError, PreconditionError
from uexpand.sl2 import Mat2
from uexpand.systems import (
    CharacterVarietySystem,
    ConstantCocycleSystem,
    MapWord,
    TorusPoint,
    TracePoint,
    cv_system,
    generator_set_16,
    omega_set,
)
from uexpand.systems.charvar import (
    FORWARD_WORDS,
    frame,
    kappa,
    normal,
    solve_third_coordinate,
    twist_apply,
    twist_jacobian,
    word_apply,
    word_diff,
)
from uexpand.systems.torus import std_apply, std_diff
from uexpand.systems.charvar import _reproject, frame_v, kappa_v, normal_v, region_v

S = 1.99


def shell_points(n, seed=0, s=S):
    return cv_system(s).random_points(n, np.random.default_rng(seed))


# -- torus ----------------------------------------------------------------


def test_torus_point_normalizes():
    p = TorusPoint(-0.5, 7.0)
    assert 0 <= p.x < 2 * math.pi and 0 <= p.y < 2 * math.pi
    assert p.x == pytest.approx(2 * math.pi - 0.5)


def test_std_apply_examples():
    q = std_apply(123.0, 0.0, TorusPoint(0, 0))
    assert (q.x, q.y) == (0.0, 0.0)
    q = std_apply(10.0, 0.0, TorusPoint(math.pi, 0))
    assert sl2.projective_distance(q.x / 2, 0.0) < 1e-12  # 2 pi wraps to 0
    assert q.y == pytest.approx(math.pi)
    q = std_apply(10.0, 0.1, TorusPoint(0, 0))
    assert q.x == pytest.approx(10 * math.sin(0.1) + 0.2)
    assert q.y == pytest.approx(0.1)


def test_std_diff_examples():
    np.testing.assert_allclose(std_diff(7.0, 0.0, TorusPoint(math.pi / 2, 0)).to_array(),
                               Mat2.shear(2.0).to_array(), atol=1e-14)
    np.testing.assert_array_equal(std_diff(10.0, 0.0, TorusPoint(0, 0)).to_array(), Mat2.shear(12.0).to_array())
    A = 1000 * math.cos(0.4 + 0.07) + 2
    t = sl2.contracting_direction(std_diff(1000.0, 0.07, TorusPoint(0.4, 1.0)))
    assert math.tan(2 * t) == pytest.approx(-2 / A, rel=1e-9)


@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi), st.floats(-0.5, 0.5))
def test_std_diff_is_finite_difference(x, y, om):
    L = 10.0
    f = lambda p: np.array([L * np.sin(p[0] + om) + 2 * (p[0] + om) - p[1], p[0] + om])
    J = numeric_jacobian(f, [x, y])
    D = std_diff(L, om, TorusPoint(x, y))
    assert D.det == 1.0
    np.testing.assert_allclose(D.to_array(), J, atol=1e-5)


def test_omega_set_examples(caplog):
    assert omega_set(0.035, 0) == [0.0]
    om = omega_set(0.035, 12, L=1000.0)
    assert len(om) == 25
    assert om[0] == pytest.approx(-12 * 0.035) and om[-1] == pytest.approx(12 * 0.035)
    with caplog.at_level(logging.WARNING):
        omega_set(0.05, 12, L=1000.0)
    assert "outside" in caplog.text


def test_std_system_shape(std):
    assert std.n_generators == 25
    assert np.all(std.weights == std.weights[0])
    assert std.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_std_vector_step_matches_scalar(std, rng):
    P = rng.uniform(0, 2 * math.pi, (20, 2))
    for g in (0, 7, 24):
        Q, mats = std.step(g, P)
        for p, q, m in zip(P, Q, mats):
            ref = std_apply(std.L, std.omegas[g], TorusPoint(*p))
            assert sl2.projective_distance(q[0] / 2, ref.x / 2) < 1e-9
            np.testing.assert_allclose(m, std_diff(std.L, std.omegas[g], TorusPoint(*p)).to_array())


def test_std_orbit_matches_step(std, rng):
    gens = rng.integers(0, 25, 50)
    orb = std.orbit((0.3, 0.4), gens)
    P = np.array([[0.3, 0.4]])
    for n, g in enumerate(gens, 1):
        P = std.apply(int(g), P)
        d = np.abs(orb[n] - P[0])
        assert np.all(np.minimum(d, 2 * math.pi - d) < 1e-6)


# -- trace coordinates ----------------------------------------------------


def test_kappa_examples():
    assert kappa((0, 0, 0)) == -2
    assert kappa((2, 2, 2)) == 2
    assert kappa((0, 0, math.sqrt(3.99))) == pytest.approx(1.99)


def test_trace_point_validation():
    TracePoint(0, 0, math.sqrt(3.99), s=1.99)
    with pytest.raises(NumericalDriftError):
        TracePoint(0, 0, 1.0, s=1.99)
    with pytest.raises(NumericalDriftError):
        TracePoint(2.5, 0.0, 0.0, s=kappa((2.5, 0, 0)))


def test_solve_third_coordinate_examples():
    r = solve_third_coordinate(0, 0, 1.99)
    assert r == pytest.approx([-math.sqrt(3.99), math.sqrt(3.99)])
    assert solve_third_coordinate(2, 2, 2) == pytest.approx([2.0])
    assert solve_third_coordinate(0, 0, -2.5) == []


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 1.999))
def test_solve_third_coordinate_substitutes(x, y, s):
    for z in solve_third_coordinate(x, y, s):
        assert -2 <= z <= 2
        assert abs(kappa((x, y, z)) - s) <= 1e-12 * 50


def test_su2_characters_fill_the_sublevel(rng):
    # traces of SU(2) pairs: x = tr A, y = tr B, z = tr AB
    for _ in range(200):
        q = rng.normal(size=(2, 4))
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        A, B = [np.array([[a + 1j * b, c + 1j * d], [-c + 1j * d, a - 1j * b]]) for a, b, c, d in q]
        x, y, z = np.trace(A).real, np.trace(B).real, np.trace(A @ B).real
        assert max(abs(x), abs(y), abs(z)) <= 2 + 1e-12
        assert kappa((x, y, z)) <= 2 + 1e-9


def test_twist_examples():
    p = TracePoint(0, 0, math.sqrt(3.99), s=S)
    q = twist_apply("X", p)
    assert (q.x, q.y, q.z) == pytest.approx((0, math.sqrt(3.99), 0))


def test_twist_inverses_and_invariance():
    for p in shell_points(200):
        tp = TracePoint(*p, s=S)
        for up, down in (("X", "x"), ("Y", "y"), ("x", "X"), ("y", "Y")):
            q = twist_apply(down, twist_apply(up, tp))
            assert np.allclose((q.x, q.y, q.z), p, atol=1e-12)
            assert abs(kappa(twist_np(up, p)) - S) < 1e-9


def test_twist_drift_guard():
    bad = np.array([[0.0, 0.0, math.sqrt(3.99) + 1e-6]])
    with pytest.raises(NumericalDriftError):
        _reproject(bad, S)


def test_map_words():
    w = MapWord("XXXXY")
    assert str(w) == "tau_XXXXY"
    assert w.inverse().letters == "yxxxx"
    with pytest.raises(ValueError):
        MapWord("")
    with pytest.raises(ValueError):
        MapWord("XZ")
    p = TracePoint(*shell_points(1, 3)[0], s=S)
    a = word_apply(MapWord("X") * MapWord("Y"), p)
    b = twist_apply("X", twist_apply("Y", p))
    assert (a.x, a.y, a.z) == pytest.approx((b.x, b.y, b.z), abs=1e-12)
    q = word_apply(MapWord("Y"), p)
    r = twist_apply("Y", p)
    assert (q.x, q.y, q.z) == (r.x, r.y, r.z)


def test_generator_set():
    gens = generator_set_16()
    assert len(gens) == 16
    assert str(gens[0][0]) == "tau_XXXXY" and str(gens[1][0]) == "tau_XXXYY"
    assert str(gens[7][0]) == "tau_YYYYX"
    assert sum(c for _, c in gens) == pytest.approx(1.0)
    for i in range(16):
        assert gens[15 - i][0].letters == gens[i][0].inverse().letters
    assert [str(w) for w, _ in gens[:8]] == [f"tau_{w}" for w in FORWARD_WORDS]


def test_inverse_generators_return_points(cv):
    P = shell_points(500, 4)
    for i in range(16):
        Q, M1 = cv.step(i, P)
        R, M2 = cv.step(15 - i, Q)
        assert np.abs(R - P).max() < 1e-9
        prod = np.einsum("nij,njk->nik", M2, M1)
        assert np.abs(prod - np.eye(2)).max() < 1e-6


# -- normals and frames ---------------------------------------------------


def test_normal_examples():
    assert normal((0, 0, 1.5)) == pytest.approx((0, 0, 3.0))
    for p in shell_points(50, 1):
        grad = numeric_jacobian(lambda q: np.array([kappa(q)]), p)[0]
        assert normal(p) == pytest.approx(grad, abs=1e-6)


def test_frame_example():
    f = frame((0.0, 0.0, 1.9975))
    assert f.region == 3
    n3 = 2 * 1.9975
    np.testing.assert_allclose(np.array(f.e1) * f.scale, [0, n3, 0], atol=1e-12)
    np.testing.assert_allclose(np.array(f.e2) * f.scale, [-n3, 0, 0], atol=1e-12)


def test_frame_properties():
    P = shell_points(2000, 2)
    n = normal_v(P)
    e1, e2, scale, sigma, k = frame_v(P)
    assert np.all(np.abs(n).max(axis=1) == np.abs(n[np.arange(len(P)), k]))
    assert np.abs(np.einsum("ni,ni->n", e1, n)).max() < 1e-12
    assert np.abs(np.einsum("ni,ni->n", e2, n)).max() < 1e-12
    eye = np.eye(3)
    v = np.stack([np.cross(n, eye[m]) for m in range(3)], axis=1)
    rel = np.einsum("nm,nmi->ni", n, v)
    assert np.abs(rel).max() < 1e-12
    # orientation: the frame area form n . (e1 x e2) / |n|^2 ... is positive
    vol = np.einsum("ni,ni->n", np.cross(e1, e2), n)
    assert np.all(vol > 0)


def test_frame_region_ties_go_to_smallest_index():
    # x = y = z gives |n_1| = |n_2| = |n_3|
    roots = np.roots([-1, 3, 0, -(2 + S)])
    x = float([r.real for r in roots if abs(r.imag) < 1e-12 and abs(r.real) <= 2][0])
    assert abs(kappa((x, x, x)) - S) < 1e-9
    assert region_v(np.array([[x, x, x]]))[0] == 0
    assert frame((x, x, x)).region == 1


def test_frame_singular_point():
    with pytest.raises(FrameError):
        frame((0.0, 0.0, 0.0))


def test_twist_jacobians_are_derivatives():
    for p in shell_points(20, 5):
        for c in "XYxy":
            np.testing.assert_allclose(twist_jacobian(c, p), numeric_jacobian(lambda q: twist_np(c, q), p),
                                       atol=1e-6)


def test_word_diff_single_twist_matches_displayed_pushforward():
    # region-3 point whose tau_X image is again region 3
    found = 0
    for p in shell_points(3000, 6):
        q = twist_np("X", p)
        if frame(p).region != 3 or frame(q).region != 3:
            continue
        n1p, _, n3p = normal(p)
        n3q = normal(q)[2]
        # D v1(P) = v1(Q);  D v2(P) = n1(P)/n3(Q) v1(Q) + n3(P)/n3(Q) v2(Q)
        sp, sq = np.sign(n3p), np.sign(n3q)
        a = math.sqrt(abs(n3q) / abs(n3p))
        b = sp * n1p * math.sqrt(abs(n3q)) / (n3q * math.sqrt(abs(n3p)))
        d = sp * sq * n3p * math.sqrt(abs(n3q)) / (n3q * math.sqrt(abs(n3p)))
        M = word_diff(TracePoint(*p, s=S), MapWord("X")).to_array()
        np.testing.assert_allclose(M, [[a, b], [0.0, d]], atol=1e-9)
        found += 1
        if found >= 20:
            break
    assert found >= 5


def test_word_diff_determinant_and_vector_path(cv):
    P = shell_points(300, 7)
    for i, (w, _) in enumerate(generator_set_16()):
        _, mats = cv.step(i, P)
        assert np.abs(sl2.det_v(mats) - 1).max() < 1e-9
        for p, m in zip(P[:10], mats[:10]):
            np.testing.assert_allclose(word_diff(TracePoint(*p, s=S), w).to_array(), m, atol=1e-9)


def test_word_diff_cocycle_identity():
    u, v = MapWord("XYx"), MapWord("yXX")
    for p in shell_points(100, 8):
        tp = TracePoint(*p, s=S)
        lhs = word_diff(tp, u * v).to_array()
        rhs = word_diff(word_apply(v, tp), u).to_array() @ word_diff(tp, v).to_array()
        np.testing.assert_allclose(lhs, rhs, atol=1e-9 * max(1.0, np.abs(lhs).max()))


def test_word_diff_is_framed_jacobian():
    # coordinates of J e1, J e2 in the image frame rebuild the ambient image vectors
    for p in shell_points(50, 9):
        w = "XXYYY"
        J = numeric_jacobian(lambda q: word_np(w, q), p)
        f0, f1 = frame(p), frame(word_np(w, p))
        M = word_diff(TracePoint(*p, s=S), MapWord(w)).to_array()
        for col, e in enumerate((f0.e1, f0.e2)):
            img = J @ np.array(e)
            np.testing.assert_allclose(M[0, col] * np.array(f1.e1) + M[1, col] * np.array(f1.e2), img, atol=1e-5)


def test_cv_system_shape(cv):
    assert cv.n_generators == 16
    assert np.all(cv.weights == 1 / 16)
    with pytest.raises(PreconditionError):
        CharacterVarietySystem(2.5)


def test_cv_lift_and_chart(cv, rng):
    for region in (1, 2, 3):
        t = rng.uniform(-2, 2, (500, 2))
        P, a, b = cv.lift(region, t[:, 0], t[:, 1])
        assert len(P)
        assert np.abs(kappa_v(P) - S).max() < 1e-12 * 10
        reg, ta, tb = cv.chart(P)
        assert np.all(reg == region)
        np.testing.assert_array_equal(ta, a)
        np.testing.assert_array_equal(tb, b)


def test_cv_relift_follows_sheet(cv):
    P = shell_points(200, 10)
    reg, a, b = cv.chart(P)
    for k in (1, 2, 3):
        m = reg == k
        Q = cv.relift(k, a[m] + 1e-7, b[m], P[m])
        assert np.abs(Q - P[m]).max() < 1e-4


def test_cv_orbit_stays_on_shell(cv, rng):
    orb = cv.orbit(shell_points(1, 11)[0], rng.integers(0, 16, 3000))
    assert np.abs(kappa_v(orb) - S).max() < 1e-9


# -- system abstraction ---------------------------------------------------


def test_weight_validation():
    with pytest.raises(ConfigError):
        ConstantCocycleSystem([np.eye(2), np.eye(2)], weights=[0.5, 0.6])
    with pytest.raises(ConfigError):
        ConstantCocycleSystem([np.eye(2), np.eye(2)], weights=[1.0, 0.0])


def test_reordered_system(cv):
    perm = list(range(15, -1, -1))
    rs = cv.reordered(perm)
    assert rs.names[0] == cv.names[15]
    P = shell_points(5, 12)
    np.testing.assert_array_equal(rs.step(0, P)[1], cv.step(15, P)[1])
    with pytest.raises(ConfigError):
        cv.reordered([0, 0, 1])


def test_surface_point(cv):
    p = shell_points(1, 13)[0]
    sp = cv.surface_point(p)
    d = sp.to_dict()
    assert d["region"] in (1, 2, 3)
    assert (d["x"], d["y"], d["z"]) == tuple(p)


def test_std_lift_wraps(std):
    P, a, b = std.lift(0, np.array([7.0]), np.array([-1.0]))
    assert 0 <= P[0, 0] < 2 * math.pi and 0 <= P[0, 1] < 2 * math.pi
