"""
Rank obstruction for approximate diagonals.

Given T = sum_i a_i (x) b_i on l_p(Lambda_P), Lambda_P the disjoint union
of the projective planes over the primes in P, with sum_i a_i b_i = 1,
each prime l yields a certified lower bound on the number of pairs r:

  1. slice T at every column m into a |Lambda_l| x |Lambda_l| matrix,
  2. pick the slice least moved by the generators and the sign flip,
  3. normalise it onto the S_1 sphere and apply the Mazur map,
  4. project onto the invariants span{I, E} of the doubly transitive action,
  5. turn the distance to lambda I into r >= (1 - d^2/(1-d)^2) |Lambda_l|.

Every constant used is computed for the prime at hand (spectral Kazhdan
constant of pi (x) pi, measured or analytic Mazur modulus), so each step
is an inequality that can be checked numerically.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, asdict
from functools import lru_cache

import numpy as np

from .expanders import kazhdan_constant, tensor_square
from .finite import (
    build_projective_plane, check_prime, elementary_generators, perm_matrix, sign_isometry,
)
from .linalg import as_matrix, matrix_from_json, matrix_to_json, opnorm_value, schatten_norm
from .mazur import ModulusOfContinuity, estimate_modulus, nc_mazur, theory_modulus

SIGN_TAG = "g_v"
PROD_TOL = 1e-8


@dataclass
class TensorDecomposition:
    """T = sum_i a_i (x) b_i; ``a`` and ``b`` are stacked (r, N, N) arrays."""

    a: np.ndarray
    b: np.ndarray
    primes: tuple = (2,)
    p: float = 2.0

    def __post_init__(self):
        self.primes = tuple(check_prime(l) for l in self.primes)
        if len(set(self.primes)) != len(self.primes):
            raise ValueError(f"repeated prime in {self.primes}")
        self.a = np.asarray(self.a, dtype=complex)
        self.b = np.asarray(self.b, dtype=complex)
        n = self.dim
        if self.a.ndim != 3 or self.a.shape != self.b.shape or self.a.shape[1:] != (n, n):
            raise ValueError(
                f"pairs must be square of size {n} for primes {self.primes}, "
                f"got a{self.a.shape} b{self.b.shape}"
            )
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValueError("pairs contain NaN or infinite entries")

    @property
    def rank(self) -> int:
        return self.a.shape[0]

    @property
    def dim(self) -> int:
        return sum(plane_size(l) for l in self.primes)

    def block(self, l: int) -> slice:
        if l not in self.primes:
            raise ValueError(f"prime {l} is not one of {self.primes}")
        start = 0
        for q in self.primes:
            if q == l:
                return slice(start, start + plane_size(q))
            start += plane_size(q)

    @classmethod
    def from_pairs(cls, pairs, primes=(2,), p=2.0):
        pairs = list(pairs)
        if not pairs:
            n = sum(plane_size(l) for l in primes)
            return cls(np.zeros((0, n, n)), np.zeros((0, n, n)), primes, p)
        return cls(np.stack([as_matrix(a) for a, _ in pairs]), np.stack([as_matrix(b) for _, b in pairs]), primes, p)

    def to_json(self) -> dict:
        return {
            "p": _p_json(self.p),
            "primes": list(self.primes),
            "pairs": [{"a": matrix_to_json(a), "b": matrix_to_json(b)} for a, b in zip(self.a, self.b)],
        }

    @classmethod
    def from_json(cls, d):
        try:
            p = d.get("p", 2.0)
            p = math.inf if p in ("inf", "infinity") else float(p)
            pairs = [(matrix_from_json(x["a"]), matrix_from_json(x["b"])) for x in d["pairs"]]
            primes = tuple(int(l) for l in d.get("primes", (2,)))
        except (KeyError, TypeError, AttributeError) as err:
            raise ValueError(f"malformed tensor decomposition: {err!r}") from err
        return cls.from_pairs(pairs, primes, p)


def _p_json(p):
    return "inf" if math.isinf(p) else p


def plane_size(l: int) -> int:
    return l * l + l + 1


def product(t: TensorDecomposition) -> np.ndarray:
    return np.einsum("rij,rjk->ik", t.a, t.b)


def prod_check(t: TensorDecomposition) -> float:
    """Frobenius distance of sum_i a_i b_i from the identity."""
    return float(np.linalg.norm(product(t) - np.eye(t.dim)))


def commutator(t: TensorDecomposition, x) -> TensorDecomposition:
    """x.T - T.x as a decomposition with 2r pairs."""
    x = as_matrix(x)
    a = np.concatenate([x @ t.a, t.a])
    b = np.concatenate([t.b, -(t.b @ x)])
    return TensorDecomposition(a, b, t.primes, t.p)


def conjugate(t: TensorDecomposition, x) -> TensorDecomposition:
    """Conjugate both tensor factors: a_i -> x a_i x^-1, b_i -> x b_i x^-1."""
    x = as_matrix(x)
    xi = np.linalg.inv(x)
    return TensorDecomposition(x @ t.a @ xi, x @ t.b @ xi, t.primes, t.p)


def bimodule_translate(t: TensorDecomposition, x) -> TensorDecomposition:
    """x . T . x^-1 = sum_i x a_i (x) b_i x^-1."""
    x = as_matrix(x)
    return TensorDecomposition(x @ t.a, t.b @ np.linalg.inv(x), t.primes, t.p)


def projective_upper(t: TensorDecomposition) -> float:
    """sum_i ||a_i|| ||b_i|| in B(l_p): an upper bound for the projective norm of T."""
    return float(sum(opnorm_value(a, t.p) * opnorm_value(b, t.p) for a, b in zip(t.a, t.b)))


def renormalize(t: TensorDecomposition) -> TensorDecomposition:
    """Left-multiply every a_i by prod(T)^-1 so that prod becomes the identity."""
    inv = np.linalg.inv(product(t))
    return TensorDecomposition(inv @ t.a, t.b, t.primes, t.p)


def exact_diagonal(n: int | None = None, primes=(2,), p=2.0) -> TensorDecomposition:
    """sum_{s,t} e_st / n (x) e_ts: prod = 1 and x.T = T.x for every x."""
    primes = tuple(primes)
    dim = sum(plane_size(l) for l in primes)
    n = dim if n is None else n
    if n != dim:
        raise ValueError(f"dimension {n} does not match primes {primes} (total {dim})")
    a = np.zeros((n * n, n, n))
    b = np.zeros((n * n, n, n))
    for k, (s, t) in enumerate(np.ndindex(n, n)):
        a[k, s, t] = 1.0 / n
        b[k, t, s] = 1.0
    return TensorDecomposition(a, b, primes, p)


def identity_tensor(primes=(2,), p=2.0) -> TensorDecomposition:
    """1 (x) 1."""
    n = sum(plane_size(l) for l in primes)
    return TensorDecomposition(np.eye(n)[None], np.eye(n)[None], primes, p)


def truncated_diagonal(fraction: float, rng, primes=(2,), p=2.0) -> TensorDecomposition:
    """Keep a random ``fraction`` of the exact diagonal's pairs (at least one per row)."""
    full = exact_diagonal(primes=primes, p=p)
    n = full.dim
    keep = rng.random((n, n)) < fraction
    keep[np.arange(n), rng.integers(0, n, n)] = True
    idx = np.flatnonzero(keep.ravel())
    return renormalize(TensorDecomposition(full.a[idx], full.b[idx], primes, p))


def perturbed_diagonal(eta: float, rng, primes=(2,), p=2.0) -> TensorDecomposition:
    """Exact diagonal with Gaussian noise of size eta on every factor, renormalised."""
    full = exact_diagonal(primes=primes, p=p)
    a = full.a + eta * rng.standard_normal(full.a.shape) / full.dim
    b = full.b + eta * rng.standard_normal(full.b.shape)
    return renormalize(TensorDecomposition(a, b, primes, p))


def random_decomposition(r: int, rng, primes=(2,), p=2.0) -> TensorDecomposition:
    """r Gaussian pairs, renormalised so that prod = 1."""
    n = sum(plane_size(l) for l in primes)
    a = rng.standard_normal((r, n, n))
    b = rng.standard_normal((r, n, n))
    return renormalize(TensorDecomposition(a, b, primes, p))


@dataclass
class SliceMatrix:
    l: int
    m: int
    matrix: np.ndarray


def all_slices(t: TensorDecomposition, l: int) -> np.ndarray:
    """Stack of the slices T_l(m) for every column m of the big space.

    T_l(m) = sum_i P_l a_i e_m (x) P_l b_i^T e_m; as a matrix its (s, u)
    entry is sum_i b_i[m, s] a_i[u, m] (s, u in the block of l).
    """
    blk = t.block(l)
    xi = t.a[:, blk, :]          # xi[i, u, m] = a_i[u, m]
    eta = t.b[:, :, blk]         # eta[i, m, s] = b_i[m, s]
    return np.einsum("ims,ium->msu", eta, xi)


def slice_matrix(t: TensorDecomposition, l: int, m: int) -> SliceMatrix:
    if not 0 <= m < t.dim:
        raise IndexError(f"column {m} out of range for dimension {t.dim}")
    blk = t.block(l)
    mat = np.einsum("is,iu->su", t.b[:, m, blk], t.a[:, blk, m])
    return SliceMatrix(l, m, mat)


def slice_mass(t: TensorDecomposition, l: int, tol: float = PROD_TOL):
    """(sum_m ||T_l(m)||_S1, whether it reaches |Lambda_l|)."""
    total = float(sum(schatten_norm(s, 1) for s in all_slices(t, l)))
    return total, total >= plane_size(l) * (1 - tol)


def slice_trace_pairing(t: TensorDecomposition, l: int) -> complex:
    """sum_m tr T_l(m), which equals tr(P_l prod(T))."""
    return complex(np.einsum("mss->", all_slices(t, l)))


@dataclass(frozen=True, eq=False)
class PrimeContext:
    """Symmetry data for one prime: generator permutations, sign flip, Kazhdan constant."""

    l: int
    plane: object
    generators: tuple        # permutation matrices of the distinct generator images
    sign: np.ndarray
    kazhdan: object

    @property
    def n(self) -> int:
        return self.plane.size

    @property
    def sigma_plus(self) -> list:
        return list(self.generators) + [self.sign]

    @property
    def r_eff(self) -> float:
        return self.kazhdan.r_eff

    def operator(self, g) -> np.ndarray:
        if isinstance(g, str):
            if g != SIGN_TAG:
                raise ValueError(f"unknown generator tag {g!r}")
            return self.sign
        if isinstance(g, (int, np.integer)):
            return self.sigma_plus[int(g)]
        return perm_matrix(g, self.plane)


@lru_cache(maxsize=None)
def prime_context(l: int) -> PrimeContext:
    plane = build_projective_plane(l)
    gens = tuple(perm_matrix(g, plane) for g in elementary_generators().reduce(l))
    kaz = kazhdan_constant([tensor_square(g) for g in gens])
    return PrimeContext(l, plane, gens, sign_isometry(plane), kaz)


def translate(m, g) -> np.ndarray:
    """(pi(g) (x) pi(g)) acting on a slice matrix: M -> P M P^T."""
    g = np.asarray(g)
    return g @ m @ g.T


def slice_defect(t: TensorDecomposition, l: int, m: int, g) -> float:
    """||T_l(m) - (pi(g) (x) pi(g)) T_l(m)||_S1; ``g`` may be SIGN_TAG."""
    ctx = prime_context(l)
    mat = slice_matrix(t, l, m).matrix
    return schatten_norm(mat - translate(mat, ctx.operator(g)), 1)


def defect_table(slices: np.ndarray, ops) -> np.ndarray:
    """table[m, j] = ||M_m - g_j M_m g_j^T||_S1."""
    return np.array([[schatten_norm(s - translate(s, g), 1) for g in ops] for s in slices])


@dataclass
class SliceSelection:
    m: int
    normalized: np.ndarray
    ratio: float
    norm: float


def select_slice(t: TensorDecomposition, l: int, slices=None, table=None, zero_tol: float = 1e-12) -> SliceSelection:
    """The column whose slice is least moved by Sigma+, relative to its trace norm."""
    ctx = prime_context(l)
    slices = all_slices(t, l) if slices is None else slices
    table = defect_table(slices, ctx.sigma_plus) if table is None else table
    norms = np.array([schatten_norm(s, 1) for s in slices])
    live = norms > zero_tol
    if not live.any():
        raise ValueError(f"all slices vanish for prime {l}")
    ratios = np.full(len(slices), np.inf)
    ratios[live] = table[live].max(axis=1) / norms[live]
    m = int(np.argmin(ratios))
    return SliceSelection(m, slices[m] / norms[m], float(ratios[m]), float(norms[m]))


def invariant_basis(n: int):
    """I = n^-1/2 sum delta_s (x) delta_s and E = n^-1 sum delta_s (x) delta_t, as matrices."""
    return np.eye(n) / math.sqrt(n), np.full((n, n), 1.0 / n)


def invariant_projection(y):
    """Orthogonal projection of Y onto span{I, E}: (lambda, mu, residual)."""
    y = as_matrix(y)
    n = y.shape[0]
    if n < 2:
        raise ValueError("span{I, E} is one-dimensional for a single point")
    i_mat, e_mat = invariant_basis(n)
    gram = np.array([[1.0, 1 / math.sqrt(n)], [1 / math.sqrt(n), 1.0]])
    rhs = np.array([np.vdot(i_mat, y), np.vdot(e_mat, y)])
    lam, mu = np.linalg.solve(gram, rhs)
    residual = float(np.linalg.norm(y - lam * i_mat - mu * e_mat))
    return complex(lam), complex(mu), residual


def sign_flip_gap(plane) -> float:
    """||E - (v (x) v) E||_2, which equals (2 - 2 n^-2)^(1/2)."""
    _, e_mat = invariant_basis(plane.size)
    v = sign_isometry(plane)
    return float(np.linalg.norm(e_mat - translate(e_mat, v)))


def mu_bound_check(mu: complex, n: int, r_eff: float, delta0: float, tol: float = 1e-9):
    """(2 - 2 n^-2)^(1/2) |mu| <= (2R + 1) delta_0."""
    lhs = math.sqrt(2 - 2 / n**2) * abs(mu)
    rhs = (2 * r_eff + 1) * delta0
    return lhs, rhs, lhs <= rhs + tol


def rank_bound_value(delta1: float, n: int) -> float:
    """(1 - delta1^2 / (1 - delta1)^2) n, clamped at 0 (vacuous) for delta1 >= 1/2."""
    if delta1 >= 0.5:
        return 0.0
    return max(0.0, (1 - delta1**2 / (1 - delta1) ** 2) * n)


@dataclass
class RankBound:
    bound: float
    consistent: bool
    vacuous: bool
    lambda_ok: bool


def rank_bound(delta1: float, lam: complex, n: int, r_actual: int, tol: float = 1e-6) -> RankBound:
    bound = rank_bound_value(delta1, n)
    vacuous = bound <= 0
    lambda_ok = abs(lam) >= 1 - delta1 - tol
    return RankBound(bound, r_actual >= bound - tol, vacuous, lambda_ok)


def eckart_young_gap(y, lam: complex, r: int):
    """(||Y - lam I||_2^2, (1 - r/n)|lam|^2) for Y of rank <= r; the first dominates."""
    y = as_matrix(y)
    n = y.shape[0]
    i_mat, _ = invariant_basis(n)
    return float(np.linalg.norm(y - lam * i_mat) ** 2), (1 - r / n) * abs(lam) ** 2


def best_rank_r_distance_sq(lam: complex, n: int, r: int) -> float:
    """Squared distance from lam I to the rank-r matrices: (n - r) |lam|^2 / n."""
    return max(n - r, 0) * abs(lam) ** 2 / n


def eps_threshold(r_eff: float, sigma_plus: int, tol: float = 1e-14) -> float:
    """Largest eps with (3R + 1) omega(eps |Sigma+|) < 1/2 for the analytic modulus."""
    target = 0.5 / (3 * r_eff + 1)
    lo, hi = 0.0, 2.0
    if float(theory_modulus(hi)) < target:
        return hi / sigma_plus
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if float(theory_modulus(mid)) < target:
            lo = mid
        else:
            hi = mid
    return lo / sigma_plus


@dataclass
class PipelineConfig:
    seed: int = 0
    modulus_samples: int = 4000
    modulus_dims: tuple = (2, 3, 4, 6, 8)
    zero_tol: float = 1e-12


@dataclass
class PrimeRecord:
    l: int
    n: int
    ok: bool = True
    error: str | None = None
    m_l: int | None = None
    slice_mass: float | None = None
    slice_mass_ok: bool | None = None
    trace_pairing: float | None = None
    eps_slice: list = field(default_factory=list)
    eps: float | None = None
    delta_slice: float | None = None
    pigeonhole_ok: bool | None = None
    sigma_plus: int | None = None
    r_eff: float | None = None
    delta0_envelope: float | None = None
    delta0_direct: float | None = None
    delta0_theory: float | None = None
    delta0: float | None = None
    kazhdan_residual: float | None = None
    kazhdan_ok: bool | None = None
    lam: list | None = None
    mu: list | None = None
    mu_lhs: float | None = None
    mu_rhs: float | None = None
    mu_ok: bool | None = None
    sign_flip_gap: float | None = None
    delta1: float | None = None
    distance_to_lambda_i: float | None = None
    chain_ok: bool | None = None
    lambda_ok: bool | None = None
    phi_rank: int | None = None
    rank_lower_bound: float | None = None
    actual_rank: int | None = None
    vacuous: bool | None = None
    consistent: bool | None = None
    eps_threshold: float | None = None


@dataclass
class PipelineReport:
    p: float
    primes: list
    rank: int
    prod_defect: float
    projective_upper: float
    records: list
    seed: int

    @property
    def consistent(self) -> bool:
        return all(r.ok and r.consistent for r in self.records)

    def to_json(self) -> dict:
        return {
            "p": _p_json(self.p),
            "primes": self.primes,
            "rank": self.rank,
            "seed": self.seed,
            "prod_defect": self.prod_defect,
            "projective_upper": self.projective_upper,
            "consistent": self.consistent,
            "records": [asdict(r) for r in self.records],
        }

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["l", "r", "eps", "delta0", "delta1", "lambda", "mu", "bound"])
        for rec in self.records:
            lam = "" if rec.lam is None else repr(math.hypot(*rec.lam))
            mu = "" if rec.mu is None else repr(math.hypot(*rec.mu))
            w.writerow([rec.l, self.rank, _csv(rec.eps), _csv(rec.delta0), _csv(rec.delta1), lam, mu,
                        _csv(rec.rank_lower_bound)])
        return buf.getvalue()


def _csv(x):
    return "" if x is None else repr(x)


@lru_cache(maxsize=8)
def mazur_envelope(seed: int, samples: int, dims: tuple) -> ModulusOfContinuity:
    return estimate_modulus("nc_mazur", samples, dims, np.random.default_rng(seed))


def _clean(x: float, tol: float) -> float:
    return 0.0 if abs(x) < tol else float(x)


def _run_prime(t: TensorDecomposition, l: int, omega, cfg: PipelineConfig) -> PrimeRecord:
    ctx = prime_context(l)
    n = ctx.n
    rec = PrimeRecord(l=l, n=n, actual_rank=t.rank, r_eff=ctx.r_eff)
    ops = ctx.sigma_plus
    rec.sigma_plus = len(ops)

    slices = all_slices(t, l)
    norms = np.array([schatten_norm(s, 1) for s in slices])
    rec.slice_mass = float(norms.sum())
    rec.slice_mass_ok = rec.slice_mass >= n * (1 - PROD_TOL)
    rec.trace_pairing = float(np.real(np.einsum("mss->", slices)))

    table = defect_table(slices, ops)
    per_gen = table.sum(axis=0) / n
    rec.eps_slice = [_clean(x, cfg.zero_tol) for x in per_gen]
    rec.eps = max(rec.eps_slice)

    sel = select_slice(t, l, slices, table, cfg.zero_tol)
    rec.m_l = sel.m
    rec.delta_slice = _clean(sel.ratio, cfg.zero_tol)
    rec.pigeonhole_ok = rec.delta_slice <= rec.eps * len(ops) * (1 + 1e-9) + cfg.zero_tol

    y = nc_mazur(sel.normalized)
    rec.phi_rank = int(np.linalg.matrix_rank(y, tol=1e-10))
    t_arg = rec.eps * len(ops)
    rec.delta0_envelope = omega(t_arg)
    rec.delta0_theory = float(theory_modulus(t_arg))
    direct = [float(np.linalg.norm(y - translate(y, g))) for g in ops]
    rec.delta0_direct = _clean(max(direct), cfg.zero_tol)
    # the measured envelope is only a lower estimate of the true modulus,
    # so the exact defect of phi(S_l) is folded in to keep delta_0 an upper bound
    rec.delta0 = max(rec.delta0_envelope, rec.delta0_direct)

    lam, mu, residual = invariant_projection(y)
    lam, mu = (complex(_clean(lam.real, cfg.zero_tol), _clean(lam.imag, cfg.zero_tol)),
               complex(_clean(mu.real, cfg.zero_tol), _clean(mu.imag, cfg.zero_tol)))
    rec.lam, rec.mu = [lam.real, lam.imag], [mu.real, mu.imag]
    r_eff = ctx.r_eff
    rec.kazhdan_residual = _clean(residual, cfg.zero_tol)
    gen_defect = max(direct[:-1])
    rec.kazhdan_ok = rec.kazhdan_residual <= r_eff * gen_defect + 1e-9

    rec.sign_flip_gap = sign_flip_gap(ctx.plane)
    rec.mu_lhs, rec.mu_rhs, rec.mu_ok = mu_bound_check(mu, n, r_eff, rec.delta0)
    rec.delta1 = (3 * r_eff + 1) * rec.delta0
    i_mat, _ = invariant_basis(n)
    rec.distance_to_lambda_i = _clean(float(np.linalg.norm(y - lam * i_mat)), cfg.zero_tol)
    rec.chain_ok = rec.distance_to_lambda_i <= rec.delta1 + 1e-9

    rb = rank_bound(rec.delta1, lam, n, t.rank)
    rec.rank_lower_bound, rec.vacuous, rec.consistent, rec.lambda_ok = rb.bound, rb.vacuous, rb.consistent, rb.lambda_ok
    rec.eps_threshold = eps_threshold(r_eff, len(ops))
    rec.ok = bool(rec.slice_mass_ok and rec.pigeonhole_ok and rec.kazhdan_ok and rec.mu_ok
                  and rec.chain_ok and rec.lambda_ok)
    return rec


def run_pipeline(t: TensorDecomposition, primes=None, config: PipelineConfig | None = None) -> PipelineReport:
    cfg = PipelineConfig() if config is None else config
    primes = list(t.primes if primes is None else primes)
    defect = prod_check(t)
    if defect > PROD_TOL:
        raise ValueError(f"prod(T) differs from 1 by {defect:.3e} (> {PROD_TOL})")
    omega = mazur_envelope(cfg.seed, cfg.modulus_samples, tuple(cfg.modulus_dims))
    records = []
    for l in primes:
        try:
            records.append(_run_prime(t, l, omega, cfg))
        except Exception as err:  # recorded per prime; other primes still run
            records.append(PrimeRecord(l=l, n=plane_size(l), ok=False, error=f"{type(err).__name__}: {err}",
                                       actual_rank=t.rank))
    return PipelineReport(float(t.p), primes, t.rank, _clean(defect, 1e-15), projective_upper(t), records, cfg.seed)


def load_decomposition(path) -> TensorDecomposition:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValueError(f"{path}: not valid JSON ({err})") from err
    return TensorDecomposition.from_json(data)
