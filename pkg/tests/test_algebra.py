import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from clelab.algebra import (
    AlgebraError,
    ExtendedVector,
    LieAlgebraSpec,
    NotAnEquilibriumError,
    ShiftedCocycleSpec,
    algebra_from_dict,
    algebra_to_dict,
    b_operator,
    bracket,
    coadjoint,
    cocycle_identity_residual,
    definiteness_report,
    dual_euler_rhs,
    equilibrium_residual,
    extended_bracket,
    extended_euler_rhs,
    integrate_extended,
    jacobi_residual,
    load_algebra,
    make_sine_algebra,
    make_so3,
    orbit_first_variation,
    save_algebra,
    shifted_cocycle,
    test_form as tform,
    w_operator,
    write_trajectory_csv,
)

E = np.eye(3)
SO3 = make_so3()
SO3_DIAG = make_so3(np.diag([1.0, 2.0, 3.0]))
VS3 = ShiftedCocycleSpec(E[2])

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec3 = arrays(np.float64, 3, elements=finite)


def brute_b(alg, v3, v1):
    """Solve <B, e_j>_I = <[v1, e_j], v3>_I for all basis e_j."""
    rhs = np.array([alg.metric(bracket(alg, v1, e), v3) for e in np.eye(alg.dim)])
    return np.linalg.solve(alg.inertia, rhs)


def brute_w(alg, spec, u):
    rhs = np.array([shifted_cocycle(alg, spec, u, e) for e in np.eye(alg.dim)])
    return np.linalg.solve(alg.inertia, rhs)


def brute_coadjoint(alg, x, m):
    return np.array([m @ bracket(alg, x, e) for e in np.eye(alg.dim)])


@pytest.fixture(scope="module")
def sine5():
    return make_sine_algebra(5)


# --- bracket / coadjoint / cocycle examples ---

def test_bracket_so3_examples():
    np.testing.assert_array_equal(bracket(SO3, E[0], E[1]), E[2])
    np.testing.assert_array_equal(bracket(SO3, E[1], E[0]), -E[2])


@given(vec3)
def test_bracket_self_is_zero(x):
    np.testing.assert_allclose(bracket(SO3, x, x), 0.0, atol=1e-12)


@given(vec3, vec3)
def test_so3_bracket_is_cross_product(x, y):
    np.testing.assert_allclose(bracket(SO3, x, y), np.cross(x, y), atol=1e-10)


def test_bracket_dimension_mismatch():
    with pytest.raises(AlgebraError):
        bracket(SO3, np.ones(2), E[0])


def test_coadjoint_examples():
    np.testing.assert_allclose(coadjoint(SO3, E[2], E[0]), -E[1])
    np.testing.assert_allclose(coadjoint(SO3, E[2], E[0]), brute_coadjoint(SO3, E[2], E[0]))
    np.testing.assert_array_equal(coadjoint(SO3, E[0], np.zeros(3)), 0.0)


@given(vec3, vec3)
def test_coadjoint_orthogonal_to_x(x, m):
    assert abs(coadjoint(SO3, x, m) @ x) < 1e-9


def test_coadjoint_matches_brute_force_on_sine(sine5):
    rng = np.random.default_rng(3)
    for _ in range(10):
        x, m = rng.standard_normal((2, sine5.dim))
        np.testing.assert_allclose(coadjoint(sine5, x, m), brute_coadjoint(sine5, x, m), atol=1e-12)


def test_shifted_cocycle_examples():
    assert shifted_cocycle(SO3, VS3, E[0], E[1]) == -1.0
    assert shifted_cocycle(SO3, VS3, E[0], E[2]) == 0.0
    assert shifted_cocycle(SO3, VS3, E[1], E[1]) == 0.0


def test_cocycle_identity_so3_basis():
    for x, y, z in itertools.product(E, repeat=3):
        assert abs(cocycle_identity_residual(SO3, VS3, x, y, z)) < 1e-12
    x = np.array([0.3, -1.0, 2.0])
    assert cocycle_identity_residual(SO3, VS3, x, x, x) == 0.0


def test_cocycle_identity_sine_random(sine5):
    rng = np.random.default_rng(0)
    spec = ShiftedCocycleSpec(rng.standard_normal(sine5.dim))
    worst = max(abs(cocycle_identity_residual(sine5, spec, *rng.standard_normal((3, sine5.dim))))
                for _ in range(100))
    assert worst < 1e-10


def test_extended_bracket_examples():
    out = extended_bracket(SO3, VS3, ExtendedVector(E[0], 5), ExtendedVector(E[1], -7))
    np.testing.assert_array_equal(out.v, E[2])
    assert out.a == -1.0
    x = np.array([1.0, 2.0, 3.0])
    same = extended_bracket(SO3, VS3, ExtendedVector(x, 1), ExtendedVector(x, 2))
    np.testing.assert_array_equal(same.v, 0.0)
    assert same.a == 0.0
    outs = [extended_bracket(SO3, VS3, ExtendedVector(E[0], a), ExtendedVector(E[1], 0)) for a in (0, 1, 10)]
    assert all(np.array_equal(o.v, outs[0].v) and o.a == outs[0].a for o in outs)


# --- B and w ---

def test_b_operator_examples():
    np.testing.assert_allclose(b_operator(SO3, E[2], E[0]), E[1])
    v = np.array([0.4, -1.2, 2.0])
    np.testing.assert_allclose(b_operator(SO3, v, v), 0.0, atol=1e-15)
    np.testing.assert_array_equal(b_operator(SO3, np.zeros(3), v), 0.0)


@given(vec3, vec3)
def test_b_is_cross_product_for_identity_inertia(v3, v1):
    np.testing.assert_allclose(b_operator(SO3, v3, v1), np.cross(v3, v1), atol=1e-9)


@pytest.mark.parametrize("alg", [SO3, SO3_DIAG, make_sine_algebra(3, "laplacian")], ids=["so3", "so3diag", "sine3"])
def test_b_and_w_match_brute_force(alg):
    rng = np.random.default_rng(1)
    spec = ShiftedCocycleSpec(rng.standard_normal(alg.dim))
    for _ in range(20):
        v3, v1 = rng.standard_normal((2, alg.dim))
        np.testing.assert_allclose(b_operator(alg, v3, v1), brute_b(alg, v3, v1), atol=1e-12)
        np.testing.assert_allclose(w_operator(alg, spec, v1), brute_w(alg, spec, v1), atol=1e-12)


def test_w_operator_examples():
    np.testing.assert_allclose(w_operator(SO3, VS3, E[0]), -E[1])
    np.testing.assert_allclose(w_operator(SO3, VS3, E[2]), 0.0, atol=1e-15)
    np.testing.assert_array_equal(w_operator(SO3, VS3, np.zeros(3)), 0.0)


@given(vec3)
def test_w_is_cross_with_shift(u):
    np.testing.assert_allclose(w_operator(SO3, VS3, u), np.cross(u, E[2]), atol=1e-10)


# --- Euler right-hand sides ---

def test_extended_euler_rhs_examples():
    out = extended_euler_rhs(SO3, VS3, ExtendedVector(E[0], 1))
    np.testing.assert_allclose(out.v, -E[1])
    assert out.a == 0.0
    v = np.array([0.3, 2.0, -1.0])
    np.testing.assert_allclose(extended_euler_rhs(SO3, VS3, ExtendedVector(v, 0)).v, 0.0, atol=1e-15)
    np.testing.assert_allclose(extended_euler_rhs(SO3, VS3, ExtendedVector(2 * E[2], 1)).v, 0.0, atol=1e-15)


def test_dual_euler_rhs_examples():
    out = dual_euler_rhs(SO3, VS3, ExtendedVector(E[0], 1))
    np.testing.assert_allclose(out.v, -E[1])
    assert out.a == 0.0
    a = 1.7
    m = a * SO3.to_dual(VS3.v_s)
    np.testing.assert_allclose(dual_euler_rhs(SO3, VS3, ExtendedVector(m, a)).v, 0.0, atol=1e-15)


def test_dual_euler_reduces_to_rigid_body():
    inertia = np.diag([1.0, 2.0, 3.0])
    rng = np.random.default_rng(5)
    for m in [E[0], *rng.standard_normal((5, 3))]:
        got = dual_euler_rhs(SO3_DIAG, VS3, ExtendedVector(m, 0.0)).v
        omega = np.linalg.solve(inertia, m)
        np.testing.assert_allclose(got, brute_coadjoint(SO3_DIAG, omega, m), atol=1e-12)
        np.testing.assert_allclose(got, np.cross(m, omega), atol=1e-12)


@pytest.mark.parametrize("alg", [SO3, SO3_DIAG, make_sine_algebra(5, "laplacian")], ids=["so3", "so3diag", "sine5"])
def test_formulation_consistency(alg):
    rng = np.random.default_rng(2)
    spec = ShiftedCocycleSpec(rng.standard_normal(alg.dim))
    for _ in range(50):
        v, a = rng.standard_normal(alg.dim), rng.standard_normal()
        ext = extended_euler_rhs(alg, spec, ExtendedVector(v, a)).v
        dual = dual_euler_rhs(alg, spec, ExtendedVector(alg.to_dual(v), a)).v
        np.testing.assert_allclose(dual, alg.inertia @ ext, atol=1e-10)


def test_equilibrium_residual_examples():
    assert equilibrium_residual(SO3, VS3, ExtendedVector(2 * E[2], 1)) == 0.0
    for a in (0.0, 1.0, -3.0):
        assert equilibrium_residual(SO3, VS3, ExtendedVector(np.zeros(3), a)) == 0.0
    assert equilibrium_residual(SO3, VS3, ExtendedVector(E[0], 1)) == pytest.approx(1.0)


# --- test form and definiteness ---

def test_test_form_examples():
    eq = ExtendedVector(2 * E[2], 1)
    xi, t = tform(SO3, VS3, eq, E[0])
    np.testing.assert_allclose(xi, E[1])
    assert t == pytest.approx(-1.0)
    xi, t = tform(SO3, VS3, eq, np.zeros(3))
    np.testing.assert_array_equal(xi, 0.0)
    assert t == 0.0
    for zeta in E:
        xi, t = tform(SO3, VS3, ExtendedVector(E[2], 1), zeta)
        np.testing.assert_allclose(xi, 0.0, atol=1e-15)
        assert t == pytest.approx(0.0, abs=1e-15)


def test_test_form_rejects_non_equilibrium():
    with pytest.raises(NotAnEquilibriumError, match="residual"):
        tform(SO3, VS3, ExtendedVector(E[0], 1), E[1])


def test_test_form_depends_only_on_xi():
    # zeta and zeta + n with n in the kernel of zeta -> xi give the same T
    rng = np.random.default_rng(7)
    for alg in (SO3, SO3_DIAG):
        for s, a in [(2.0, 1.0), (-0.7, 0.3), (3.0, 2.5)]:
            eq = ExtendedVector(s * E[2], a)
            L = np.array([tform(alg, VS3, eq, e)[0] for e in E]).T
            _, sv, vt = np.linalg.svd(L)
            null = vt[sv < 1e-12 * max(sv.max(), 1.0)]
            if null.size == 0:
                null = vt[-1:]
            for _ in range(5):
                zeta = rng.standard_normal(3)
                zeta2 = zeta + rng.standard_normal() * null[0]
                x1, t1 = tform(alg, VS3, eq, zeta)
                x2, t2 = tform(alg, VS3, eq, zeta2)
                np.testing.assert_allclose(x1, x2, atol=1e-12)
                assert abs(t1 - t2) < 1e-10


def test_definiteness_report_examples():
    rep = definiteness_report(SO3, VS3, ExtendedVector(2 * E[2], 1))
    assert rep.subspace_dim == 2
    np.testing.assert_allclose(rep.eigenvalues, [-1.0, -1.0], atol=1e-10)
    assert rep.verdict == "negative-definite"
    for eq in (ExtendedVector(E[2], 1), ExtendedVector(np.zeros(3), 0)):
        rep = definiteness_report(SO3, VS3, eq)
        assert rep.subspace_dim == 0 and rep.eigenvalues == () and rep.verdict == "degenerate"


def test_definiteness_report_agrees_with_sampled_test_form():
    # brute force: sign of T over many random zeta must match the verdict
    rng = np.random.default_rng(11)
    for s, a in [(2.0, 1.0), (0.5, 1.0), (-1.0, 1.0), (3.0, 0.5)]:
        eq = ExtendedVector(s * E[2], a)
        rep = definiteness_report(SO3_DIAG, VS3, eq)
        ts = [tform(SO3_DIAG, VS3, eq, z)[1] for z in rng.standard_normal((200, 3))]
        assert len(rep.eigenvalues) == rep.subspace_dim
        if rep.verdict == "positive-definite":
            assert min(ts) > 0
        elif rep.verdict == "negative-definite":
            assert max(ts) < 0
        elif rep.verdict == "indefinite":
            assert min(ts) < 0 < max(ts)


# --- critical points ---

def test_orbit_first_variation_examples():
    eq = ExtendedVector(2 * E[2], 1)
    for e in E:
        for b in (0.0, 1.0):
            assert orbit_first_variation(SO3, VS3, eq, ExtendedVector(e, b)) == 0.0
    val = orbit_first_variation(SO3, VS3, ExtendedVector(E[0], 1), ExtendedVector(E[1], 0))
    assert val == pytest.approx(1.0)
    for b in (0.0, 2.0, -5.0):
        assert orbit_first_variation(SO3, VS3, ExtendedVector(E[0], 1), ExtendedVector(np.zeros(3), b)) == 0.0


def test_critical_points_are_equilibria():
    rng = np.random.default_rng(4)
    states = [ExtendedVector(rng.standard_normal(3), rng.standard_normal()) for _ in range(25)]
    states += [ExtendedVector(rng.standard_normal() * E[2], rng.standard_normal()) for _ in range(20)]
    states += [ExtendedVector(rng.standard_normal() * E[i], 0.0) for i in range(3) for _ in range(2)]
    for alg in (SO3, SO3_DIAG):
        for s in states:
            is_eq = equilibrium_residual(alg, VS3, s) < 1e-10
            crit = max(abs(orbit_first_variation(alg, VS3, s, ExtendedVector(e, 0))) for e in E) < 1e-9
            assert is_eq == crit


# --- integration ---

def test_integrate_precession_preserves_norm():
    traj = integrate_extended(SO3, VS3, ExtendedVector(E[0], 1), 1e-3, 10000)
    assert len(traj) == 10001
    norms = np.linalg.norm(traj.vs, axis=1)
    assert np.abs(norms - 1).max() < 1e-8
    # exact solution: rotation about e3 with unit rate
    t = traj.times[-1]
    expected = np.array([np.cos(t), -np.sin(t), 0.0])
    np.testing.assert_allclose(traj.vs[-1], expected, atol=1e-9)


def test_integrate_zero_steps_and_equilibrium():
    s0 = ExtendedVector(E[0], 1)
    traj = integrate_extended(SO3, VS3, s0, 1e-3, 0)
    assert len(traj) == 1 and traj.states[0] is s0
    traj = integrate_extended(SO3, VS3, ExtendedVector(2 * E[2], 1), 1e-2, 500)
    assert np.abs(traj.vs - 2 * E[2]).max() < 1e-12


def test_integrate_rejects_bad_input():
    with pytest.raises(AlgebraError):
        integrate_extended(SO3, VS3, ExtendedVector(E[0], 1), 0.0, 3)
    with pytest.raises(AlgebraError):
        integrate_extended(SO3, VS3, ExtendedVector(E[0], 1), 1e-3, -1)
    with pytest.raises(FloatingPointError, match="step"):
        integrate_extended(SO3_DIAG, VS3, ExtendedVector(np.array([1e200, 1e200, 1e200]), 1), 1.0, 5)


@pytest.mark.parametrize("alg", [SO3, SO3_DIAG, make_sine_algebra(5, "laplacian")], ids=["so3", "so3diag", "sine5"])
def test_integrate_conserves_energy_and_center(alg):
    rng = np.random.default_rng(8)
    spec = ShiftedCocycleSpec(np.eye(alg.dim)[-1])
    traj = integrate_extended(alg, spec, ExtendedVector(rng.standard_normal(alg.dim), 1.3), 1e-3, 10000)
    assert all(s.a == 1.3 for s in traj.states)
    H = traj.energies
    assert np.abs(H - H[0]).max() / abs(H[0]) < 1e-8


# --- generators ---

def test_make_so3():
    assert SO3.dim == 3 and jacobi_residual(SO3) == 0.0


@pytest.mark.parametrize("n", [3, 5])
def test_sine_algebra_jacobi_brute_force(n):
    alg = make_sine_algebra(n)
    assert alg.dim == n * n - 1
    basis = np.eye(alg.dim)
    worst = jacobi_residual(alg, [(basis[i], basis[j], basis[k])
                                  for i, j, k in itertools.product(range(alg.dim), repeat=3)])
    assert worst < 1e-12
    assert jacobi_residual(alg) < 1e-12


@pytest.mark.parametrize("n", [4, 1, 17, 2.0, True])
def test_sine_algebra_rejects_bad_n(n):
    with pytest.raises(AlgebraError):
        make_sine_algebra(n)


def test_spec_rejects_invalid_algebras():
    c = np.array(SO3.structure_constants)
    with pytest.raises(AlgebraError, match="antisymmetric"):
        c2 = c.copy(); c2[0, 1, 2] = 2.0
        LieAlgebraSpec(c2, np.eye(3))
    with pytest.raises(AlgebraError, match="positive definite"):
        LieAlgebraSpec(c, np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(AlgebraError, match="symmetric"):
        LieAlgebraSpec(c, np.array([[1, 0.5, 0], [0, 1, 0], [0, 0, 1.0]]))
    bad = c.copy()
    bad[0, 1, 0] += 1.0
    bad[1, 0, 0] -= 1.0
    with pytest.raises(AlgebraError, match="Jacobi"):
        LieAlgebraSpec(bad, np.eye(3))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([3, 5]), st.integers(0, 2 ** 32 - 1))
def test_random_triples_properties(n, seed):
    alg = make_sine_algebra(n)
    rng = np.random.default_rng(seed)
    x, y, z = rng.standard_normal((3, alg.dim))
    spec = ShiftedCocycleSpec(rng.standard_normal(alg.dim))
    np.testing.assert_allclose(bracket(alg, x, y), -bracket(alg, y, x), atol=1e-13)
    assert jacobi_residual(alg, [(x, y, z)]) < 1e-10
    omega = shifted_cocycle(alg, spec, x, y)
    assert abs(omega + alg.to_dual(spec.v_s) @ bracket(alg, x, y)) < 1e-12
    assert abs(alg.metric(bracket(alg, x, y), z) - alg.metric(b_operator(alg, z, x), y)) < 1e-12
    assert abs(omega - alg.metric(w_operator(alg, spec, x), y)) < 1e-12


# --- serialization ---

def test_algebra_round_trip(tmp_path):
    alg = make_sine_algebra(3, "laplacian")
    spec = ShiftedCocycleSpec(np.arange(alg.dim, dtype=float))
    path = tmp_path / "alg.toml"
    save_algebra(path, alg, spec)
    alg2, spec2 = load_algebra(path)
    np.testing.assert_array_equal(alg2.structure_constants, alg.structure_constants)
    np.testing.assert_array_equal(alg2.inertia, alg.inertia)
    np.testing.assert_array_equal(spec2.v_s, spec.v_s)


def test_algebra_from_dict_errors():
    d = algebra_to_dict(SO3, VS3)
    d["algebra"]["typo"] = 1
    with pytest.raises(AlgebraError, match="unknown"):
        algebra_from_dict(d)
    d = algebra_to_dict(SO3)
    d["algebra"]["structure_constants"] = d["algebra"]["structure_constants"][:-1]
    with pytest.raises(AlgebraError, match="entries"):
        algebra_from_dict(d)


def test_trajectory_csv(tmp_path):
    traj = integrate_extended(SO3, VS3, ExtendedVector(E[0], 1), 0.1, 3)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,v_1,v_2,v_3,a,H"
    assert len(lines) == 5
    row = [float(x) for x in lines[2].split(",")]
    assert row[0] == 0.1 and row[4] == 1.0
    np.testing.assert_array_equal(row[1:4], traj.states[1].v)
