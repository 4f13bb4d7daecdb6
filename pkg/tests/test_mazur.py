import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bplab.finite import build_projective_plane, enumerate_quotient, perm_matrix, sign_isometry
from bplab.linalg import random_complex, schatten_norm, vec_norm
from bplab.mazur import (
    absolute, classical_mazur, equivariance_check, estimate_modulus, haar_unitary, is_unitary,
    mazur_inequality_suite, nc_mazur, nc_mazur_inverse, polar, psd_sqrt, random_s1_sphere,
    random_s2_sphere, tensor_matrix, tensor_translate, theory_bound_sq, theory_modulus,
)


def eig_power(h, power):
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.clip(vals, 0, None) ** power) @ vecs.conj().T


def mazur_oracle(t):
    # T (T*T)^(-1/4), valid for invertible T; no SVD involved
    return t @ eig_power(t.conj().T @ t, -0.25)


def inverse_oracle(s):
    # S |S| = S (S*S)^(1/2)
    return s @ eig_power(s.conj().T @ s, 0.5)


def test_polar_of_positive_and_unitary():
    rng = np.random.default_rng(0)
    g = random_complex(rng, (4, 4))
    pd = g @ g.conj().T + np.eye(4)
    dec = polar(pd)
    assert np.allclose(dec.u, np.eye(4), atol=1e-10)
    assert np.allclose(dec.modulus, pd, atol=1e-10)
    u = haar_unitary(5, rng)
    dec = polar(u)
    assert np.allclose(dec.u, u, atol=1e-10)
    assert np.allclose(dec.modulus, np.eye(5), atol=1e-10)


def test_polar_reconstruction_and_modulus():
    rng = np.random.default_rng(1)
    for n in (1, 3, 6, 9):
        t = random_complex(rng, (n, n))
        dec = polar(t)
        assert np.linalg.norm(dec.reconstruct() - t) <= 1e-7 * max(1, np.linalg.norm(t))
        assert is_unitary(dec.u)
        assert np.allclose(dec.modulus, dec.modulus.conj().T)
        assert np.linalg.eigvalsh(dec.modulus).min() >= -1e-10
        assert np.allclose(absolute(t), psd_sqrt(t.conj().T @ t), atol=1e-9)
    with pytest.raises(ValueError):
        polar(np.ones((2, 3)))


def test_mazur_map_examples():
    proj = np.outer([1, 1j], [1, -1j]) / 2
    assert np.allclose(nc_mazur(proj), proj)
    assert np.allclose(nc_mazur(0.25 * np.eye(3)), 0.5 * np.eye(3))
    assert np.allclose(nc_mazur(np.zeros((2, 2))), 0)
    assert np.allclose(nc_mazur_inverse(np.eye(4) / 2), np.eye(4) / 4)


def test_mazur_map_against_eigen_oracle():
    rng = np.random.default_rng(2)
    for n in (2, 4, 7):
        t = random_s1_sphere(n, rng)
        assert np.allclose(nc_mazur(t), mazur_oracle(t), atol=1e-8)
        s = random_s2_sphere(n, rng)
        assert np.allclose(nc_mazur_inverse(s), inverse_oracle(s), atol=1e-10)


def test_sphere_to_sphere_and_round_trip():
    rng = np.random.default_rng(3)
    for n in (3, 5, 8):
        t = random_s1_sphere(n, rng, rank=2)
        s = nc_mazur(t)
        assert schatten_norm(s, 2) == pytest.approx(1, abs=1e-10)
        assert np.linalg.norm(nc_mazur_inverse(s) - t) <= 1e-6
        t_full = random_s1_sphere(n, rng)
        assert np.linalg.norm(nc_mazur_inverse(nc_mazur(t_full)) - t_full) <= 1e-6


def test_round_trip_identity_over_n():
    s = nc_mazur(np.eye(5) / 5)
    assert np.allclose(s, np.eye(5) / math.sqrt(5))
    assert np.allclose(nc_mazur_inverse(s), np.eye(5) / 5)


def test_unitary_equivariance():
    rng = np.random.default_rng(4)
    t = random_s1_sphere(7, rng, rank=3)
    assert equivariance_check(t, np.eye(7)) < 1e-12
    plane = build_projective_plane(2)
    group = enumerate_quotient(2)
    for g in group[:20]:
        assert equivariance_check(t, perm_matrix(g, plane)) <= 1e-6
    assert equivariance_check(t, sign_isometry(plane)) <= 1e-6
    assert equivariance_check(t, haar_unitary(7, rng)) <= 1e-6
    with pytest.raises(ValueError, match="unitary"):
        equivariance_check(t, 2 * np.eye(7))


def test_inequality_suite_equal_points():
    rng = np.random.default_rng(5)
    t = random_s1_sphere(4, rng)
    r = mazur_inequality_suite(t, t)
    assert r.eps == pytest.approx(0, abs=1e-12)
    assert r.phi_gap_sq == pytest.approx(0, abs=1e-12)
    assert r.holds


def test_inequality_suite_commutative_case_is_hellinger():
    rng = np.random.default_rng(6)
    for _ in range(50):
        a, b = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
        r = mazur_inequality_suite(np.diag(a), np.diag(b))
        assert r.eps == pytest.approx(np.abs(a - b).sum())
        assert r.phi_gap_sq == pytest.approx(((np.sqrt(a) - np.sqrt(b)) ** 2).sum())
        assert r.holds


def test_inequality_suite_random_pairs():
    rng = np.random.default_rng(7)
    for k in range(200):
        n = 4 + k % 13
        s = random_s1_sphere(n, rng, rank=None if k % 2 else 2)
        t = random_s1_sphere(n, rng) if k % 3 == 0 else s + 10 ** rng.uniform(-6, 0) * random_s1_sphere(n, rng)
        t = t / schatten_norm(t, 1)
        r = mazur_inequality_suite(s, t)
        assert r.holds
        assert r.trace_identity_gap <= 1e-9


def test_inequality_suite_rejects_off_sphere():
    with pytest.raises(ValueError, match="sphere"):
        mazur_inequality_suite(np.eye(2), np.eye(2) / 2)


def test_theory_bound_values():
    assert theory_bound_sq(0.0) == 0
    assert theory_bound_sq(1.0) == pytest.approx(10)
    assert theory_modulus(1e-16) == pytest.approx(math.sqrt(2e-16 + 4e-8 + 4e-4))
    assert theory_modulus(3.0) == 2.0


def test_classical_mazur():
    v = np.array([0.6, -0.8])
    w = classical_mazur(v, 2, 1)
    assert np.allclose(w, [0.36, -0.64])
    assert vec_norm(w, 1) == pytest.approx(1)
    assert np.allclose(classical_mazur(w, 1, 2), v)
    z = np.array([1j, 0, -1]) / 2
    assert np.allclose(np.abs(classical_mazur(z, 2, 1)), [0.25, 0, 0.25])
    with pytest.raises(ValueError):
        classical_mazur(v, math.inf, 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=8))
def test_classical_mazur_preserves_the_sphere(xs):
    v = np.array(xs)
    if vec_norm(v, 2) < 1e-6:
        return
    v = v / vec_norm(v, 2)
    assert vec_norm(classical_mazur(v, 2, 1), 1) == pytest.approx(1, rel=1e-9)


def test_tensor_identification():
    rng = np.random.default_rng(8)
    xi, eta, zeta = (random_complex(rng, 4) for _ in range(3))
    m = tensor_matrix(xi, eta)
    # (xi (x) eta)(zeta) = (zeta, conj(xi)) eta
    assert np.allclose(m @ zeta, np.sum(zeta * xi) * eta)
    u = haar_unitary(4, rng)
    assert np.allclose(tensor_matrix(u @ xi, np.conj(u) @ eta), tensor_translate(m, u))
    xis, etas = random_complex(rng, (3, 4)), random_complex(rng, (3, 4))
    total = sum(np.outer(etas[i], xis[i]) for i in range(3))
    assert np.allclose(tensor_matrix(xis, etas), total)
    # phi commutes with U (x) conj(U)
    t = total / schatten_norm(total, 1)
    assert np.allclose(nc_mazur(tensor_translate(t, u)), tensor_translate(nc_mazur(t), u), atol=1e-8)


def test_modulus_estimates():
    rng = np.random.default_rng(9)
    fwd = estimate_modulus("nc_mazur", 600, (2, 3, 5), rng)
    assert fwd(0) == 0 and fwd(-1) == 0
    assert np.all(np.diff(fwd.envelope) >= 0)
    assert np.all(fwd.envelope <= theory_modulus(fwd.grid) + 1e-9)
    inv = estimate_modulus("nc_mazur_inverse", 600, (2, 3, 5), rng)
    assert np.all(inv.envelope <= (1 + math.sqrt(2)) * inv.grid + 1e-9)
    assert np.all(inv.envelope <= 3 * inv.grid + 1e-9)
    ball = estimate_modulus("classical_2to1", 300, 4, rng, domain="ball")
    assert np.all(ball.envelope <= 2 * ball.grid + 1e-9)
    text = fwd.to_csv()
    assert text.splitlines()[0] == "t,envelope,theory_bound"
    assert len(text.splitlines()) == len(fwd.grid) + 1
    assert fwd.to_json()["direction"] == "forward" and inv.direction == "inverse"
    with pytest.raises(ValueError):
        estimate_modulus("nope", 10, 2, rng)
    with pytest.raises(ValueError):
        estimate_modulus("nc_mazur", 10, 2, rng, domain="cube")


def test_modulus_lookup_does_not_undercut():
    rng = np.random.default_rng(10)
    mod = estimate_modulus("nc_mazur", 200, 3, rng)
    mid = (mod.grid[10] + mod.grid[11]) / 2
    assert mod(mid) == mod.envelope[11]
    assert mod(1e9) == mod.envelope[-1]
