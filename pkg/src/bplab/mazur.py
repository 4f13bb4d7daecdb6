"""
Polar decomposition and Mazur maps.

The noncommutative map sends T = W diag(s) V* to W diag(s^(1/2)) V*; it
carries the unit sphere of the trace class S_1 onto the unit sphere of the
Hilbert-Schmidt class S_2. The inverse squares the singular values.

Tensor convention: sum_i xi_i (x) eta_i is the matrix sum_i eta_i xi_i^T,
i.e. entry (s, t) is sum_i eta_i(s) xi_i(t). Under it, U (x) conj(U) acts
on matrices by M -> conj(U) M U^T, which is conjugation by the unitary
conj(U); for real permutations and sign flips this is M -> P M P^T.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, schatten_norm, random_complex, vec_norm

MAP_NAMES = ("nc_mazur", "nc_mazur_inverse", "classical_2to1", "classical_1to2")


@dataclass
class PolarDecomposition:
    u: np.ndarray
    modulus: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.u @ self.modulus


def _svd(t):
    a = as_matrix(t)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got {a.shape}")
    return np.linalg.svd(a)


def polar(t) -> PolarDecomposition:
    w, s, vh = _svd(t)
    v = vh.conj().T
    return PolarDecomposition(u=w @ vh, modulus=(v * s) @ vh)


def absolute(t) -> np.ndarray:
    """|T| = (T* T)^(1/2)."""
    return polar(t).modulus


def _spectral_power(t, power):
    w, s, vh = _svd(t)
    return (w * s**power) @ vh


def nc_mazur(t) -> np.ndarray:
    return _spectral_power(t, 0.5)


def nc_mazur_inverse(s) -> np.ndarray:
    return _spectral_power(s, 2.0)


def psd_sqrt(a) -> np.ndarray:
    """Square root of a Hermitian PSD matrix (negative rounding noise clipped)."""
    a = as_matrix(a)
    vals, vecs = np.linalg.eigh((a + a.conj().T) / 2)
    return (vecs * np.sqrt(np.clip(vals, 0, None))) @ vecs.conj().T


def is_unitary(u, tol: float = 1e-9) -> bool:
    u = as_matrix(u)
    return u.shape[0] == u.shape[1] and np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=tol)


def haar_unitary(n: int, rng) -> np.ndarray:
    q, r = np.linalg.qr(random_complex(rng, (n, n)))
    d = np.diag(r)
    return q * (d / np.abs(d))


def equivariance_check(t, u, tol: float = 1e-9) -> float:
    """||phi(U T U*) - U phi(T) U*||_2."""
    u = as_matrix(u)
    if not is_unitary(u, tol):
        raise ValueError("equivariance needs a unitary")
    t = as_matrix(t)
    uh = u.conj().T
    return schatten_norm(nc_mazur(u @ t @ uh) - u @ nc_mazur(t) @ uh, 2)


def tensor_matrix(xis, etas) -> np.ndarray:
    """Matrix of sum_i xi_i (x) eta_i: rows indexed by eta, columns by xi."""
    xis = np.atleast_2d(np.asarray(xis, dtype=complex))
    etas = np.atleast_2d(np.asarray(etas, dtype=complex))
    return etas.T @ xis


def tensor_translate(m, u) -> np.ndarray:
    """Action of U (x) conj(U) on the matrix of a tensor."""
    u = np.asarray(u)
    return np.conj(u) @ m @ u.T


@dataclass
class MazurInequalities:
    eps: float
    modulus_gap: float          # || |S| - |T| ||_1
    modulus_bound: float        # 2 eps^(1/2)
    root_gap: float             # || |S|^(1/2) - |T|^(1/2) ||_2
    root_bound: float           # 2 eps^(1/4)
    phi_gap_sq: float           # ||phi(S) - phi(T)||_2^2
    phi_bound: float            # 2 eps + 4 eps^(1/2) + 4 eps^(1/4)
    trace_identity_gap: float   # |phi_gap_sq - (2 - 2 Re Tr(phi(T)* phi(S)))|
    holds: bool

    def as_dict(self):
        return dict(self.__dict__)


def theory_bound_sq(eps):
    eps = np.asarray(eps, dtype=float)
    return 2 * eps + 4 * np.sqrt(eps) + 4 * eps**0.25


def theory_modulus(t):
    """Upper bound on the modulus of continuity of phi between unit spheres."""
    return np.minimum(np.sqrt(theory_bound_sq(t)), 2.0)


def mazur_inequality_suite(s, t, sphere_tol: float = 1e-8, tol: float = 1e-9) -> MazurInequalities:
    s, t = as_matrix(s), as_matrix(t)
    for name, x in (("S", s), ("T", t)):
        norm = schatten_norm(x, 1)
        if abs(norm - 1) > sphere_tol:
            raise ValueError(f"{name} is off the S_1 unit sphere (trace norm {norm})")
    eps = schatten_norm(s - t, 1)
    abs_s, abs_t = absolute(s), absolute(t)
    modulus_gap = schatten_norm(abs_s - abs_t, 1)
    root_gap = schatten_norm(psd_sqrt(abs_s) - psd_sqrt(abs_t), 2)
    ps, pt = nc_mazur(s), nc_mazur(t)
    phi_gap_sq = schatten_norm(ps - pt, 2) ** 2
    identity_rhs = 2 - 2 * np.real(np.trace(pt.conj().T @ ps))
    bounds = (2 * math.sqrt(eps), 2 * eps**0.25, float(theory_bound_sq(eps)))
    slack = tol * 8
    holds = (
        modulus_gap <= bounds[0] + slack
        and root_gap <= bounds[1] + slack
        and phi_gap_sq <= bounds[2] + slack
    )
    return MazurInequalities(
        eps, modulus_gap, bounds[0], root_gap, bounds[1], phi_gap_sq, bounds[2],
        abs(phi_gap_sq - identity_rhs), bool(holds),
    )


def classical_mazur(v, from_p: float, to_q: float) -> np.ndarray:
    """Coordinatewise sign(v) |v|^(from_p / to_q)."""
    if from_p < 1 or to_q < 1 or math.isinf(from_p) or math.isinf(to_q):
        raise ValueError("Mazur exponents must lie in [1, inf)")
    v = np.asarray(v)
    a = np.abs(v)
    phase = np.where(a > 0, v / np.where(a > 0, a, 1), 0)
    out = phase * a ** (from_p / to_q)
    return out.real if not np.iscomplexobj(v) else out


def random_s1_sphere(n: int, rng, rank: int | None = None) -> np.ndarray:
    if rank is None or rank >= n:
        t = random_complex(rng, (n, n))
    else:
        t = random_complex(rng, (n, rank)) @ random_complex(rng, (rank, n))
    return t / schatten_norm(t, 1)


def random_s2_sphere(n: int, rng, rank: int | None = None) -> np.ndarray:
    t = random_s1_sphere(n, rng, rank)
    return t / schatten_norm(t, 2)


# Each map: (sampler of a domain point, input distance, output distance, apply).
def _map_spec(name: str):
    if name == "nc_mazur":
        return (random_s1_sphere, lambda a, b: schatten_norm(a - b, 1),
                lambda a, b: schatten_norm(a - b, 2), nc_mazur, lambda x: x / schatten_norm(x, 1))
    if name == "nc_mazur_inverse":
        return (random_s2_sphere, lambda a, b: schatten_norm(a - b, 2),
                lambda a, b: schatten_norm(a - b, 1), nc_mazur_inverse, lambda x: x / schatten_norm(x, 2))
    if name == "classical_2to1":
        return (_vector_sampler(2), lambda a, b: vec_norm(a - b, 2),
                lambda a, b: vec_norm(a - b, 1), lambda v: classical_mazur(v, 2, 1), lambda x: x / vec_norm(x, 2))
    if name == "classical_1to2":
        return (_vector_sampler(1), lambda a, b: vec_norm(a - b, 1),
                lambda a, b: vec_norm(a - b, 2), lambda v: classical_mazur(v, 1, 2), lambda x: x / vec_norm(x, 1))
    raise ValueError(f"unknown map {name!r}; expected one of {MAP_NAMES}")


def _vector_sampler(p):
    def sample(n, rng, rank=None):
        v = rng.standard_normal(n)
        if rank is not None:
            # sparse points expose the worst case of x -> |x|^a near zero
            v[rng.permutation(n)[: max(n - rank, 0)]] = 0.0
            if not np.any(v):
                v[0] = 1.0
        return v / vec_norm(v, p)
    return sample


@dataclass
class ModulusOfContinuity:
    """Empirical omega(t): largest output distance seen over input distance <= t."""

    map_name: str
    direction: str
    domain: str
    grid: np.ndarray
    envelope: np.ndarray
    samples: int

    def __call__(self, t: float) -> float:
        # step lookup at the first grid point >= t, so the value never
        # undercuts the envelope between grid points
        if t <= 0:
            return 0.0
        i = int(np.searchsorted(self.grid, t, side="left"))
        return float(self.envelope[min(i, len(self.grid) - 1)])

    def pairs(self):
        return list(zip(self.grid.tolist(), self.envelope.tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "envelope", "theory_bound"])
        theory = self.map_name == "nc_mazur"
        for t, e in self.pairs():
            w.writerow([repr(t), repr(e), repr(float(theory_modulus(t))) if theory else ""])
        return buf.getvalue()

    def to_json(self):
        return {
            "map": self.map_name,
            "direction": self.direction,
            "domain": self.domain,
            "samples": self.samples,
            "grid": self.grid.tolist(),
            "envelope": self.envelope.tolist(),
        }


def default_grid(points: int = 49) -> np.ndarray:
    return np.concatenate([[0.0], np.logspace(-8, math.log10(2.0), points - 1)])


def estimate_modulus(map_name: str, samples: int, dims, rng, grid=None, domain: str = "sphere") -> ModulusOfContinuity:
    """Empirical modulus of continuity of one of the Mazur maps.

    Pairs are drawn as a random domain point plus a perturbation whose
    scale is log-uniform over [1e-8, 2], pulled back onto the sphere (or,
    for ``domain="ball"``, rescaled to a random radius). Half the base
    points are low rank / sparse. The returned envelope is monotone.
    """
    sampler, d_in, d_out, apply, project = _map_spec(map_name)
    if domain not in ("sphere", "ball"):
        raise ValueError(f"domain must be 'sphere' or 'ball', got {domain!r}")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    dims = [int(dims)] if np.ndim(dims) == 0 else [int(d) for d in dims]
    ins, outs = np.empty(samples), np.empty(samples)
    for k in range(samples):
        n = dims[k % len(dims)]
        rank = int(rng.integers(1, n + 1)) if k % 2 else None
        a = sampler(n, rng, rank)
        scale = 10 ** rng.uniform(-8, math.log10(2.0))
        b = project(a + scale * sampler(n, rng))
        if domain == "ball":
            radius = rng.uniform(0, 1)
            a = radius * a
            b = float(np.clip(radius + scale * rng.standard_normal(), 0, 1)) * b
        ins[k], outs[k] = d_in(a, b), d_out(apply(a), apply(b))
    order = np.argsort(ins)
    running = np.maximum.accumulate(outs[order])
    idx = np.searchsorted(ins[order], grid, side="right") - 1
    env = np.where(idx >= 0, running[np.clip(idx, 0, None)], 0.0)
    env[grid <= 0] = 0.0
    direction = "inverse" if map_name in ("nc_mazur_inverse", "classical_1to2") else "forward"
    return ModulusOfContinuity(map_name, direction, domain, grid, env, samples)
