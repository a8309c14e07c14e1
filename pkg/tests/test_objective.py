import numpy as np
import pytest

from bmlandscape.matkernel import vec
from bmlandscape.objective import QuadraticObjective, symmetric_basis

SEED = 91231


def make_objective(n, r_star, m, seed):
    rng = np.random.default_rng(seed)
    meas = rng.standard_normal((m, n, n))
    z = rng.standard_normal((n, r_star))
    return QuadraticObjective(meas, z), rng


def fd_gradient(obj, x, h_scale=1e-5):
    """Central-difference gradient, the independent oracle for f_grad."""
    h = h_scale * max(1.0, float(np.linalg.norm(x)))
    g = np.zeros_like(x)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            xp = x.copy()
            xm = x.copy()
            xp[i, j] += h
            xm[i, j] -= h
            g[i, j] = (obj.f_eval(xp) - obj.f_eval(xm)) / (2.0 * h)
    return g


def fd_quadform(obj, x, v, h=1e-3):
    """Second central difference of t -> f(X + tV), oracle for the Hessian."""
    return (obj.f_eval(x + h * v) - 2.0 * obj.f_eval(x) + obj.f_eval(x - h * v)) / (
        h * h
    )


# -- symmetric basis -----------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_symmetric_basis_orthonormal_and_complete(n):
    basis = symmetric_basis(n)
    assert len(basis) == n * (n + 1) // 2
    for i, bi in enumerate(basis):
        assert np.array_equal(bi, bi.T)
        for j, bj in enumerate(basis):
            want = 1.0 if i == j else 0.0
            assert abs(np.vdot(bi, bj) - want) <= 1e-15


def test_symmetric_basis_expands_any_symmetric_matrix():
    rng = np.random.default_rng(SEED)
    s = rng.standard_normal((4, 4))
    s = 0.5 * (s + s.T)
    basis = symmetric_basis(4)
    recon = sum(np.vdot(b, s) * b for b in basis)
    assert np.linalg.norm(recon - s) <= 1e-14


# -- construction and validation ----------------------------------------------


def test_constructor_rejects_bad_shapes():
    z = np.ones((3, 1))
    with pytest.raises(ValueError):
        QuadraticObjective(np.ones((2, 3, 4)), z)  # non-square
    with pytest.raises(ValueError):
        QuadraticObjective(np.ones((0, 3, 3)), z)  # empty stack
    with pytest.raises(ValueError):
        QuadraticObjective(np.ones((2, 2, 2)), z)  # row mismatch
    with pytest.raises(ValueError):
        QuadraticObjective(np.full((1, 3, 3), np.nan), z)


def test_attributes():
    obj, _ = make_objective(4, 2, 6, SEED)
    assert obj.n == 4
    assert obj.r_star == 2
    assert obj.measurements.shape == (6, 4, 4)
    assert np.allclose(obj.m_star, obj.ground_truth @ obj.ground_truth.T)


# -- matrix-space calculus ------------------------------------------------------


def test_phi_zero_at_ground_truth():
    obj, _ = make_objective(5, 2, 8, SEED + 1)
    assert obj.phi_eval(obj.m_star) == 0.0
    assert np.linalg.norm(obj.phi_grad(obj.m_star)) <= 1e-12


def test_phi_quadratic_taylor_is_exact():
    # phi is a quadratic polynomial, so the 2nd-order expansion has no error
    obj, rng = make_objective(4, 1, 5, SEED + 2)
    m = rng.standard_normal((4, 4))
    m = m + m.T
    e = rng.standard_normal((4, 4))
    e = e + e.T
    lhs = obj.phi_eval(m + e)
    rhs = (
        obj.phi_eval(m)
        + np.vdot(obj.phi_grad(m), e)
        + 0.5 * np.vdot(obj.hess_apply(e), e)
    )
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_phi_outputs_symmetric():
    obj, rng = make_objective(3, 1, 4, SEED + 3)
    m = rng.standard_normal((3, 3))
    g = obj.phi_grad(m)
    h = obj.hess_apply(rng.standard_normal((3, 3)))
    assert np.array_equal(g, g.T)
    assert np.array_equal(h, h.T)


def test_gram_symmetric_realizes_hess_apply():
    obj, rng = make_objective(4, 2, 7, SEED + 4)
    g = obj.gram_symmetric
    for _ in range(5):
        e = rng.standard_normal((4, 4))
        e = 0.5 * (e + e.T)
        assert np.linalg.norm(g @ vec(e) - vec(obj.hess_apply(e))) <= 1e-11


def test_measurement_gram_definition():
    obj, _ = make_objective(3, 1, 5, SEED + 5)
    want = sum(np.outer(vec(a), vec(a)) for a in obj.measurements)
    assert np.linalg.norm(obj.measurement_gram() - want) <= 1e-12


def test_asymmetric_measurements_act_through_symmetric_part():
    rng = np.random.default_rng(SEED + 6)
    meas = rng.standard_normal((6, 4, 4))
    z = rng.standard_normal((4, 2))
    raw = QuadraticObjective(meas, z)
    sym = QuadraticObjective(0.5 * (meas + meas.transpose(0, 2, 1)), z)
    x = rng.standard_normal((4, 3))
    assert abs(raw.f_eval(x) - sym.f_eval(x)) <= 1e-12
    assert np.linalg.norm(raw.f_grad(x) - sym.f_grad(x)) <= 1e-12


# -- smoothness bounds -----------------------------------------------------------


def test_smoothness_bounds_identity_family():
    # measurements forming an orthonormal symmetric basis give mu = L = 1
    basis = np.stack(symmetric_basis(3))
    obj = QuadraticObjective(basis, np.ones((3, 1)))
    mu, big = obj.smoothness_bounds()
    assert abs(mu - 1.0) <= 1e-12
    assert abs(big - 1.0) <= 1e-12


def test_smoothness_bounds_scaling():
    basis = np.stack(symmetric_basis(3))
    obj = QuadraticObjective(2.0 * basis, np.ones((3, 1)))
    mu, big = obj.smoothness_bounds()
    assert abs(mu - 4.0) <= 1e-12
    assert abs(big - 4.0) <= 1e-12


def test_smoothness_bounds_rejects_degenerate_family():
    single = np.eye(2)[None, :, :]
    obj = QuadraticObjective(single, np.ones((2, 1)))
    with pytest.raises(ValueError, match="positive-definite"):
        obj.smoothness_bounds()


# -- factored-space calculus -----------------------------------------------------


def test_f_zero_and_stationary_at_ground_truth():
    obj, _ = make_objective(5, 2, 30, SEED + 7)
    z = obj.ground_truth
    assert obj.f_eval(z) <= 1e-25
    assert np.linalg.norm(obj.f_grad(z)) <= 1e-12


def test_f_grad_rejects_wrong_rows():
    obj, _ = make_objective(4, 1, 3, SEED + 8)
    with pytest.raises(ValueError):
        obj.f_grad(np.ones((5, 2)))
    with pytest.raises(ValueError):
        obj.f_hess_quadform(np.ones((4, 2)), np.ones((4, 3)))


GRAD_CASES = [(3, 1, 2, 5), (4, 2, 2, 9), (5, 2, 3, 25), (6, 3, 4, 12)]


@pytest.mark.parametrize("n,r_star,r,m", GRAD_CASES)
def test_f_grad_matches_central_differences(n, r_star, r, m):
    obj, rng = make_objective(n, r_star, m, SEED + 11 * n + r)
    for _ in range(3):
        x = rng.standard_normal((n, r))
        g = obj.f_grad(x)
        g_fd = fd_gradient(obj, x)
        rel = np.linalg.norm(g - g_fd) / max(1.0, np.linalg.norm(g))
        assert rel <= 1e-5


@pytest.mark.parametrize("n,r_star,r,m", GRAD_CASES)
def test_f_hess_quadform_matches_second_differences(n, r_star, r, m):
    obj, rng = make_objective(n, r_star, m, SEED + 13 * n + r)
    for _ in range(3):
        x = rng.standard_normal((n, r))
        v = rng.standard_normal((n, r))
        quad = obj.f_hess_quadform(x, v)
        quad_fd = fd_quadform(obj, x, v)
        assert abs(quad - quad_fd) / max(1.0, abs(quad)) <= 1e-4


def test_f_hess_matrix_consistent_with_quadform():
    obj, rng = make_objective(4, 2, 8, SEED + 9)
    x = rng.standard_normal((4, 2))
    h = obj.f_hess_matrix(x)
    assert np.array_equal(h, h.T)
    for _ in range(4):
        v = rng.standard_normal((4, 2))
        dense = float(vec(v) @ h @ vec(v))
        direct = obj.f_hess_quadform(x, v)
        assert abs(dense - direct) <= 1e-9 * max(1.0, abs(direct))


def test_f_hess_min_eig_is_a_lower_bound():
    obj, rng = make_objective(4, 1, 6, SEED + 10)
    x = rng.standard_normal((4, 2))
    lo = obj.f_hess_min_eig(x)
    for _ in range(10):
        v = rng.standard_normal((4, 2))
        rayleigh = obj.f_hess_quadform(x, v) / float(np.vdot(v, v))
        assert rayleigh >= lo - 1e-9


# -- reporting and serialization -------------------------------------------------


def test_check_second_order_at_ground_truth():
    obj, _ = make_objective(4, 2, 20, SEED + 12)
    rep = obj.check_second_order(obj.ground_truth)
    assert rep.passed
    assert rep.objective_value == rep.gap
    assert rep.gap <= 1e-20
    assert rep.grad_tol == 1e-9 and rep.hess_tol == 1e-9


def test_check_second_order_flags_nonstationary_point():
    obj, rng = make_objective(4, 2, 20, SEED + 13)
    x = rng.standard_normal((4, 2))
    rep = obj.check_second_order(x, grad_tol=1e-9)
    assert rep.grad_norm > 1e-9
    assert not rep.passed
    d = rep.to_obj()
    assert d["passed"] is False
    assert set(d) == {
        "grad_norm",
        "hess_min_eig",
        "objective_value",
        "gap",
        "grad_tol",
        "hess_tol",
        "passed",
    }


def test_objective_round_trip():
    obj, rng = make_objective(4, 2, 9, SEED + 14)
    back = QuadraticObjective.from_obj(obj.to_obj())
    x = rng.standard_normal((4, 3))
    assert back.f_eval(x) == obj.f_eval(x)
    assert np.array_equal(back.measurements, obj.measurements)


def test_from_obj_rejects_inconsistent_record():
    obj, _ = make_objective(3, 1, 4, SEED + 15)
    record = obj.to_obj()
    record["n"] = 5
    with pytest.raises(ValueError):
        QuadraticObjective.from_obj(record)
    record = obj.to_obj()
    del record["Z"]
    with pytest.raises(ValueError):
        QuadraticObjective.from_obj(record)
