"""
Dense complex matrices: l_p operator norms, regular norms, Schatten norms
and the column-norm inequalities for pairs of truncated operators.

Exact operator norms exist for p in {1, 2, inf}; any other p falls back to
a power-iteration lower bound and the result is flagged ``exact=False``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

EXACT_P = (1.0, 2.0, math.inf)
REL_TOL = 1e-9
SVD_TOL = 1e-7


def as_matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has NaN or infinite entries")
    return a


def parse_p(p) -> float:
    if isinstance(p, str):
        p = math.inf if p.lower() in ("inf", "infinity") else float(p)
    p = float(p)
    if not p >= 1:
        raise ValueError(f"p must lie in [1, inf], got {p}")
    return p


def conjugate_exponent(p) -> float:
    p = parse_p(p)
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1)


def is_exact(p) -> bool:
    return parse_p(p) in EXACT_P


def vec_norm(v, p) -> float:
    p = parse_p(p)
    a = np.abs(np.asarray(v, dtype=complex).ravel())
    if a.size == 0:
        return 0.0
    if math.isinf(p):
        return float(a.max())
    if p == 1:
        return float(a.sum())
    if p == 2:
        return float(np.sqrt(np.sum(a * a)))
    scale = a.max()
    if scale == 0:
        return 0.0
    return float(scale * np.sum((a / scale) ** p) ** (1 / p))


def column_norms(x, p) -> np.ndarray:
    x = np.asarray(x)
    return np.array([vec_norm(x[:, j], p) for j in range(x.shape[1])])


@dataclass
class NormReport:
    p: float
    value: float
    exact: bool
    regular_value: float

    def to_json(self):
        d = asdict(self)
        d["p"] = "inf" if math.isinf(self.p) else self.p
        return d


def _exact_opnorm(a: np.ndarray, p: float) -> float:
    if p == 1:
        return float(np.abs(a).sum(axis=0).max())
    if math.isinf(p):
        return float(np.abs(a).sum(axis=1).max())
    return float(np.linalg.norm(a, 2))


def _dual_direction(y: np.ndarray, p: float) -> np.ndarray:
    # z with <z, y> = ||y||_p and ||z||_q = 1 (bilinear pairing)
    a = np.abs(y)
    scale = a.max()
    if scale == 0:
        return np.zeros_like(y)
    phase = np.where(a > 0, np.conj(y) / np.where(a > 0, a, 1), 0)
    z = phase * (a / scale) ** (p - 1)
    return z / vec_norm(z, conjugate_exponent(p))


def _power_opnorm(a: np.ndarray, p: float, rng, restarts: int, iters: int) -> float:
    """Lower bound for ||a||_{p->p} by Boyd's power iteration."""
    q = conjugate_exponent(p)
    rows, cols = a.shape
    starts = [np.eye(cols)[j] for j in range(cols)]
    _, _, vh = np.linalg.svd(a)
    starts.append(np.conj(vh[0]))
    for _ in range(restarts):
        starts.append(rng.standard_normal(cols) + 1j * rng.standard_normal(cols))
    best = 0.0
    for x in starts:
        x = x / vec_norm(x, p)
        for _ in range(iters):
            y = a @ x
            best = max(best, vec_norm(y, p))
            z = a.T @ _dual_direction(y, p)
            if not np.any(z):
                break
            x_new = _dual_direction(z, q)
            x_new = x_new / vec_norm(x_new, p)
            if np.allclose(x_new, x, atol=1e-13):
                break
            x = x_new
        best = max(best, vec_norm(a @ x, p))
    return best


def opnorm_value(x, p, rng=None, restarts: int = 4, iters: int = 200) -> float:
    a = as_matrix(x)
    if a.size == 0:
        raise ValueError("operator norm of an empty matrix")
    p = parse_p(p)
    if p in EXACT_P:
        return _exact_opnorm(a, p)
    rng = np.random.default_rng(0) if rng is None else rng
    return _power_opnorm(a, p, rng, restarts, iters)


def opnorm(x, p, rng=None) -> NormReport:
    """Induced norm of ``x`` as a map l_p^cols -> l_p^rows.

    For p outside {1, 2, inf} the value is a lower bound found by power
    iteration from several starts, and ``exact`` is False.
    """
    a = as_matrix(x)
    p = parse_p(p)
    value = opnorm_value(a, p, rng)
    reg = opnorm_value(np.abs(a), p, rng)
    return NormReport(p, value, p in EXACT_P, reg)


def regular_norm(x, p, rng=None) -> float:
    return opnorm_value(np.abs(as_matrix(x)), p, rng)


def schatten_norm(x, order) -> float:
    s = np.linalg.svd(as_matrix(x), compute_uv=False)
    if order == 1:
        return float(s.sum())
    if order == 2:
        return float(np.sqrt(np.sum(s * s)))
    raise ValueError(f"Schatten order must be 1 or 2, got {order}")


def random_complex(rng, shape) -> np.ndarray:
    """iid standard complex Gaussian entries (E|z|^2 = 1)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@dataclass
class InequalityCheck:
    lhs: float
    rhs: float
    holds: bool


def _column_norm_factors(x, y, p, rng):
    q = conjugate_exponent(p)
    return (
        opnorm_value(x, p, rng), regular_norm(x, p, rng),
        opnorm_value(y, q, rng), regular_norm(y, q, rng),
    )


def lemma21_check(x, y, p, variant: str, tol: float = REL_TOL, exact: bool = True, rng=None) -> InequalityCheck:
    """Column-norm inequality for x in B(l_p^M, l_p^N), y in B(l_q^M, l_q^N).

    variant "i":   sum_m ||x e_m||_q ||y e_m||_p <= N ||x|| ||y||
    variant "ii":  sum_m ||x e_m||_p ||y e_m||_q <= N ||x||_reg ||y||_reg
    variant "iii": sum_m ||x e_m||_2 ||y e_m||_2 <= N (||x|| ||x||_reg ||y|| ||y||_reg)^(1/2)
    """
    x, y = as_matrix(x), as_matrix(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    p = parse_p(p)
    if exact and p not in EXACT_P:
        raise ValueError(f"exact operator norms need p in {{1, 2, inf}}, got {p}")
    q = conjugate_exponent(p)
    n = x.shape[0]
    nx, rx, ny, ry = _column_norm_factors(x, y, p, rng)
    if variant == "i":
        lhs = float(column_norms(x, q) @ column_norms(y, p))
        rhs = n * nx * ny
    elif variant == "ii":
        lhs = float(column_norms(x, p) @ column_norms(y, q))
        rhs = n * rx * ry
    elif variant == "iii":
        lhs = float(column_norms(x, 2) @ column_norms(y, 2))
        rhs = n * math.sqrt(nx * rx * ny * ry)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return InequalityCheck(lhs, rhs, lhs <= rhs * (1 + tol))


def l2_column_ratio(x, y, p, rng=None) -> float:
    """sum_m ||x e_m||_2 ||y e_m||_2 / (N ||x||_{p->p} ||y||_{q->q})."""
    x, y = as_matrix(x), as_matrix(y)
    q = conjugate_exponent(p)
    lhs = float(column_norms(x, 2) @ column_norms(y, 2))
    denom = x.shape[0] * opnorm_value(x, p, rng) * opnorm_value(y, q, rng)
    return lhs / denom if denom > 0 else 0.0


def remark22_search(p, trials: int, dims, rng) -> dict:
    """Random search for the largest ratio of the l_2 column sum to N ||x|| ||y||.

    ``dims`` is an (N, M) pair or a list of them, cycled over trials.
    Returns the best ratio and where it was found; no outcome is asserted.
    """
    p = parse_p(p)
    shapes = [tuple(dims)] if np.ndim(dims) == 1 else [tuple(d) for d in dims]
    best, where = 0.0, None
    for t in range(trials):
        n, m = shapes[t % len(shapes)]
        x = random_complex(rng, (n, m))
        y = random_complex(rng, (n, m))
        ratio = l2_column_ratio(x, y, p, rng)
        if ratio > best:
            best, where = ratio, [n, m]
    return {
        "p": "inf" if math.isinf(p) else p,
        "exact": p in EXACT_P,
        "trials": trials,
        "best_ratio": best,
        "best_shape": where,
    }


def matrix_to_json(x) -> dict:
    a = as_matrix(x)
    return {"shape": list(a.shape), "data": [[float(z.real), float(z.imag)] for z in a.ravel()]}


def matrix_from_json(d) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in d["shape"])
        data = np.array(d["data"], dtype=float)
    except (KeyError, TypeError, ValueError) as err:
        raise ValueError(f"malformed matrix record: {err}") from err
    if len(shape) != 2 or data.shape != (shape[0] * shape[1], 2):
        raise ValueError(f"matrix record data does not match shape {shape}")
    return as_matrix((data[:, 0] + 1j * data[:, 1]).reshape(shape))
