"""
Seeded experiments behind the command line. Each returns ``(results, ok)``
where ``results`` is JSON-ready and ``ok`` says whether every asserted
inequality held. All randomness is drawn from the generator passed in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__
from .expanders import (
    BanachPointCloud, cayley_graph, cheeger_exact, cheeger_spectral, coarea_check,
    complete_bipartite_graph, complete_graph, concentration_banach, concentration_l1,
    concentration_median, cycle_graph, invariant_vector, kazhdan_constant, petersen_graph,
    spectral_report, tensor_square,
)
from .finite import (
    build_projective_plane, elementary_generators, enumerate_quotient, group_to_json,
    orbit_count_product_action, perm_matrix, sign_isometry, sl3_order,
)
from .linalg import EXACT_P, is_exact, lemma21_check, parse_p, random_complex, l2_column_ratio, remark22_search
from .mazur import (
    equivariance_check, estimate_modulus, haar_unitary, mazur_inequality_suite, nc_mazur,
    nc_mazur_inverse, random_s1_sphere, schatten_norm, theory_modulus,
)
from .pipeline import (
    PipelineConfig, best_rank_r_distance_sq, exact_diagonal, identity_tensor, perturbed_diagonal,
    random_decomposition, run_pipeline, truncated_diagonal,
)

TOPICS = {
    "plane": "finite projective planes",
    "group": "SL(3,F_l) quotients and doubly transitive action",
    "spectral": "Cayley graph expansion",
    "mazur": "noncommutative Mazur map",
    "lemma21": "lp column-norm inequalities",
    "remark22": "l2 column-norm bound search",
    "coarea": "co-area inequality",
    "concentration": "concentration for Lipschitz maps on expanders",
    "invariant": "invariant vectors of finite-image representations",
    "pipeline": "rank obstruction for approximate diagonals",
    "suite": "full acceptance suite",
}


@dataclass
class RunConfig:
    seed: int = 0
    primes: tuple = (2, 3)
    p: float = 2.0
    trials: int = 1000
    dims: tuple = (2, 16)
    group_cap: int = 10**6
    modulus_samples: int = 4000
    output: str | None = None
    fmt: str = "json"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 0 or self.group_cap <= 0 or self.modulus_samples <= 0:
            raise ValueError("trial counts and caps must be positive")

    def to_json(self):
        d = asdict(self)
        d.pop("output")
        d["p"] = "inf" if math.isinf(self.p) else self.p
        d["primes"] = list(self.primes)
        d["dims"] = list(self.dims)
        return d


def envelope(name: str, cfg: RunConfig, results, ok: bool) -> dict:
    return {
        "experiment": name,
        "topic": TOPICS[name],
        "seed": cfg.seed,
        "config": cfg.to_json(),
        "versions": {"bplab": __version__, "numpy": np.__version__},
        "ok": bool(ok),
        "results": results,
    }


def jsonable(x):
    """Recursively convert numpy scalars and non-finite floats for strict JSON."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, complex):
        return [jsonable(x.real), jsonable(x.imag)]
    return x


# ---------------------------------------------------------------- structures

def plane_experiment(l: int, cfg: RunConfig, rng=None):
    plane = build_projective_plane(l)
    out = plane.to_json()
    out["size"] = plane.size
    out["sign_set_size"] = int(plane.sign_set.sum())
    out["sign_trace"] = float(np.trace(sign_isometry(plane)))
    ok = plane.size == l * l + l + 1 and out["sign_set_size"] == (l * l + l) // 2
    return out, ok


def group_experiment(l: int, cfg: RunConfig, rng=None, dump: bool = False):
    elements = enumerate_quotient(l, cap=cfg.group_cap)
    sizes = orbit_count_product_action(l)
    n = l * l + l + 1
    out = {
        "l": l,
        "order": len(elements),
        "expected_order": sl3_order(l),
        "pair_orbits": sizes,
        "generators": len(elementary_generators().reduce(l)),
    }
    if dump:
        out["elements"] = group_to_json(elements)
    ok = len(elements) == sl3_order(l) and sizes == [n, n * (n - 1)]
    return out, ok


# ------------------------------------------------------------------ matrices

def column_norm_experiment(cfg: RunConfig, rng, ps=None):
    ps = [cfg.p] if ps is None else ps
    out, ok = {}, True
    for p in ps:
        p = parse_p(p)
        exact = is_exact(p)
        counts = {v: 0 for v in ("i", "ii", "iii")}
        worst = {v: 0.0 for v in counts}
        for _ in range(cfg.trials):
            n, m = int(rng.integers(1, 9)), int(rng.integers(1, 13))
            x, y = random_complex(rng, (n, m)), random_complex(rng, (n, m))
            for v in counts:
                chk = lemma21_check(x, y, p, v, exact=exact, rng=rng)
                counts[v] += chk.holds
                worst[v] = max(worst[v], chk.lhs / chk.rhs if chk.rhs > 0 else 0.0)
        key = "inf" if math.isinf(p) else repr(p)
        out[key] = {"exact": exact, "trials": cfg.trials, "holds": counts, "worst_ratio": worst}
        if not exact:
            out[key]["note"] = "estimate-only: operator norms are lower bounds"
        elif any(c != cfg.trials for c in counts.values()):
            ok = False
    return out, ok


def l2_column_experiment(cfg: RunConfig, rng, square_dim: int = 8, rect_shapes=((2, 12), (3, 16), (4, 24))):
    p = parse_p(cfg.p)
    square = [l2_column_ratio(random_complex(rng, (square_dim, square_dim)),
                             random_complex(rng, (square_dim, square_dim)), p, rng)
              for _ in range(cfg.trials)]
    rect = remark22_search(p, cfg.trials, [list(s) for s in rect_shapes], rng)
    out = {
        "p": "inf" if math.isinf(p) else p,
        "exact": p in EXACT_P,
        "square_dim": square_dim,
        "square_max_ratio": max(square) if square else 0.0,
        "rectangular_search": rect,
    }
    ok = not out["exact"] or out["square_max_ratio"] <= 1 + 1e-9
    return out, ok


# --------------------------------------------------------------------- mazur

def mazur_experiment(cfg: RunConfig, rng):
    lo, hi = cfg.dims
    dims = list(range(lo, hi + 1))
    trials = cfg.trials
    sphere_err = roundtrip_err = equiv_err = 0.0
    ineq_ok = 0
    worst_ratio = {"modulus": 0.0, "root": 0.0, "phi": 0.0}
    for k in range(trials):
        n = dims[k % len(dims)]
        rank = None if k % 3 else int(rng.integers(1, n + 1))
        t = random_s1_sphere(n, rng, rank)
        phi = nc_mazur(t)
        sphere_err = max(sphere_err, abs(schatten_norm(phi, 2) ** 2 - schatten_norm(t, 1)))
        roundtrip_err = max(roundtrip_err, schatten_norm(nc_mazur_inverse(phi) - t, 2))
        u = haar_unitary(n, rng)
        equiv_err = max(equiv_err, equivariance_check(t, u))
        s = t + 10 ** rng.uniform(-6, 0.3) * random_complex(rng, (n, n))
        s = s / schatten_norm(s, 1)
        res = mazur_inequality_suite(s, t)
        ineq_ok += res.holds
        if res.eps > 0:
            worst_ratio["modulus"] = max(worst_ratio["modulus"], res.modulus_gap / res.modulus_bound)
            worst_ratio["root"] = max(worst_ratio["root"], res.root_gap / res.root_bound)
            worst_ratio["phi"] = max(worst_ratio["phi"], res.phi_gap_sq / res.phi_bound)
    # finite-structure unitaries: permutations and the sign flip
    perm_err = 0.0
    plane = build_projective_plane(2)
    ops = [perm_matrix(g, plane) for g in elementary_generators().reduce(2)] + [sign_isometry(plane)]
    for g in ops:
        perm_err = max(perm_err, equivariance_check(random_s1_sphere(plane.size, rng), g))
    mod_samples = max(cfg.modulus_samples // 2, 1)
    fwd = estimate_modulus("nc_mazur", mod_samples, dims[: min(len(dims), 6)], rng)
    inv = estimate_modulus("nc_mazur_inverse", mod_samples, dims[: min(len(dims), 6)], rng)
    below_theory = bool(np.all(fwd.envelope <= theory_modulus(fwd.grid) + 1e-12))
    inverse_linear = bool(np.all(inv.envelope <= 3 * inv.grid + 1e-12))
    out = {
        "trials": trials,
        "dims": [lo, hi],
        "sphere_identity_max_err": sphere_err,
        "roundtrip_max_err": roundtrip_err,
        "haar_equivariance_max_defect": equiv_err,
        "structure_equivariance_max_defect": perm_err,
        "inequalities_hold": ineq_ok,
        "inequality_worst_ratio": worst_ratio,
        "forward_envelope_below_theory": below_theory,
        "inverse_envelope_below_3t": inverse_linear,
        "forward_modulus": fwd.to_json(),
        "inverse_modulus": inv.to_json(),
    }
    ok = (sphere_err <= 1e-9 and roundtrip_err <= 1e-6 and equiv_err <= 1e-6 and perm_err <= 1e-6
          and ineq_ok == trials and below_theory and inverse_linear)
    return out, ok


# ----------------------------------------------------------------- expanders

def sl3_cayley(l: int, cap: int = 10**6):
    elements = enumerate_quotient(l, cap=cap)
    return cayley_graph(elements, elementary_generators().reduce(l))


def small_graphs():
    return {
        "K4": complete_graph(4),
        "C6": cycle_graph(6),
        "K33": complete_bipartite_graph(3, 3),
        "Petersen": petersen_graph(),
    }


def spectral_experiment(cfg: RunConfig, rng=None, graph=None, l: int = 2):
    g = sl3_cayley(l, cfg.group_cap) if graph is None else graph
    rep = spectral_report(g)
    out = rep.to_json()
    out["n"] = g.n
    out["lambda_1_err"] = abs(rep.eigenvalues[0] - g.k)
    ok = rep.gap > 0 and out["lambda_1_err"] <= 1e-9
    if rep.cheeger_exact is not None:
        out["sandwich"] = rep.cheeger_lower - 1e-9 <= rep.cheeger_exact <= rep.cheeger_upper + 1e-9
        ok = ok and out["sandwich"]
    return out, ok


def random_half_support(n: int, rng, heavy: bool = False) -> np.ndarray:
    g = np.zeros(n)
    size = int(rng.integers(1, n // 2 + 1))
    idx = rng.choice(n, size, replace=False)
    g[idx] = rng.exponential(1.0, size) if heavy else rng.random(size)
    return g


def coarea_experiment(cfg: RunConfig, rng, cayley=None):
    graphs = dict(small_graphs())
    graphs["Cayley(SL3F2)"] = sl3_cayley(2, cfg.group_cap) if cayley is None else cayley
    out, ok = {}, True
    for name, g in graphs.items():
        lower, _ = cheeger_spectral(g)
        if g.n <= 24:
            h, source = cheeger_exact(g), "exact"
        else:
            h, source = lower, "spectral-lower"
        holds = worst = 0
        for _ in range(cfg.trials):
            lhs, rhs, good = coarea_check(g, random_half_support(g.n, rng), h)
            holds += good
            worst = max(worst, rhs / lhs if lhs > 0 else 0.0)
        out[name] = {"h": h, "h_source": source, "trials": cfg.trials, "holds": holds, "worst_rhs_over_lhs": worst}
        ok = ok and holds == cfg.trials
    return out, ok


def orbit_cloud(group, plane, xi) -> np.ndarray:
    return np.array([perm_matrix(g, plane) @ xi for g in group])


def lipschitz_clouds(g, rng, count: int):
    """Mixed family of vertex maps: orbit maps, distance functions, noise."""
    plane = build_projective_plane(g.labels[0].l) if g.labels else None
    for k in range(count):
        kind = k % 3
        if kind == 0 and plane is not None:
            xi = rng.standard_normal(plane.size)
            yield orbit_cloud(g.labels, plane, xi)
        elif kind == 1:
            anchors = rng.choice(g.n, int(rng.integers(1, 5)), replace=False)
            yield np.stack([g.distances_from(int(a)) for a in anchors], axis=1)
        else:
            yield rng.standard_normal((g.n, int(rng.integers(1, 6))))


def concentration_experiment(cfg: RunConfig, rng, cayley=None, cloud: str = "mixed", scale: float = 1.0):
    g = sl3_cayley(2, cfg.group_cap) if cayley is None else cayley
    h, _ = cheeger_spectral(g)
    source = "spectral-lower (exhaustive search infeasible)"
    out = {"graph": {"n": g.n, "k": g.k}, "h": h, "h_source": source}
    ok = True
    if cloud == "mixed":
        l1_hold = med_hold = 0
        for pts in lipschitz_clouds(g, rng, cfg.trials):
            l1_hold += concentration_l1(g, BanachPointCloud(pts, "l1"), h, source).holds
            f = np.abs(pts[:, 0])
            r0 = float(np.median(f))
            med_hold += concentration_median(g, f, r0, h, source).holds
        out["l1"] = {"trials": cfg.trials, "holds": l1_hold}
        out["median"] = {"trials": cfg.trials, "holds": med_hold}
        ok = l1_hold == cfg.trials and med_hold == cfg.trials
        cloud = "orbit"
    # Banach-space route: l_2 orbit cloud through the l_2 -> l_1 Mazur map
    plane = build_projective_plane(2)
    if cloud == "orbit":
        xi = rng.standard_normal(plane.size)
        pts = orbit_cloud(g.labels, plane, xi / np.linalg.norm(xi))
    elif cloud == "constant":
        xi = rng.standard_normal(plane.size)
        pts = np.tile(xi / np.linalg.norm(xi) / 2, (g.n, 1))
    elif cloud == "random":
        pts = rng.standard_normal((g.n, plane.size))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    else:
        raise ValueError(f"unknown cloud kind {cloud!r}")
    pts = pts * scale
    samples = cfg.modulus_samples
    omega = estimate_modulus("classical_2to1", samples, [plane.size, 3, 2], rng, domain="ball")
    omega_inv = estimate_modulus("classical_1to2", samples, [plane.size, 3, 2], rng, domain="ball")
    measured = concentration_banach(g, BanachPointCloud(pts, "l2"), h, omega, omega_inv, source)
    analytic = concentration_banach(g, BanachPointCloud(pts, "l2"), h, lambda t: 2 * t,
                                    lambda t: math.sqrt(2 * t), source)
    out["banach"] = {"cloud": cloud, "measured_moduli": measured.to_json(), "analytic_moduli": analytic.to_json()}
    ok = ok and analytic.holds and measured.extra["embedded_holds"] and (measured.holds or measured.extra["R"] is None)
    return out, ok


def invariant_experiment(cfg: RunConfig, rng, trials: int | None = None):
    trials = cfg.trials if trials is None else trials
    out, ok = {}, True
    plane = build_projective_plane(2)
    gens = [perm_matrix(g, plane) for g in elementary_generators().reduce(2)]
    group = [perm_matrix(g, plane) for g in enumerate_quotient(2, cap=cfg.group_cap)]
    for name, gmats, elems in (
        ("pi2", gens, group),
        ("pi2_tensor_pi2", [tensor_square(x) for x in gens], [tensor_square(x) for x in group]),
    ):
        kaz = kazhdan_constant(gmats)
        holds, defect = 0, 0.0
        for _ in range(trials):
            xi = rng.standard_normal(gmats[0].shape[0])
            res = invariant_vector(gmats, xi, kaz.r_eff, group=elems)
            holds += res.holds
            defect = max(defect, res.invariance_defect)
        out[name] = {"group_order": len(elems), "kazhdan": kaz.to_json(), "trials": trials,
                     "bound_holds": holds, "max_invariance_defect": defect}
        ok = ok and holds == trials and defect <= 1e-9
    dims = {}
    for l in cfg.primes:
        pl = build_projective_plane(l)
        kaz = kazhdan_constant([tensor_square(perm_matrix(g, pl)) for g in elementary_generators().reduce(l)])
        dims[str(l)] = {"invariant_dim": kaz.invariant_dim, "kappa": kaz.kappa, "r_eff": kaz.r_eff}
        ok = ok and kaz.invariant_dim == 2 and kaz.kappa > 0
    out["tensor_invariant_dims"] = dims
    return out, ok


# ------------------------------------------------------------------ pipeline

def pipeline_config(cfg: RunConfig) -> PipelineConfig:
    return PipelineConfig(seed=cfg.seed, modulus_samples=cfg.modulus_samples)


def builtin_decomposition(name: str, cfg: RunConfig, rng):
    primes = tuple(cfg.primes)
    if name == "exact":
        return exact_diagonal(primes=primes, p=cfg.p)
    if name == "rank1":
        return identity_tensor(primes=primes, p=cfg.p)
    if name == "truncated":
        return truncated_diagonal(0.5, rng, primes=primes, p=cfg.p)
    if name == "perturbed":
        return perturbed_diagonal(1e-3, rng, primes=primes, p=cfg.p)
    raise ValueError(f"unknown builtin decomposition {name!r}")


def pipeline_experiment(t, cfg: RunConfig):
    rep = run_pipeline(t, config=pipeline_config(cfg))
    return rep.to_json(), rep.consistent, rep


def candidate_sweep(cfg: RunConfig, rng, count: int = 20, extra_random: int = 4):
    """``count`` perturbed and truncated candidates plus a few random low-rank ones.

    A bound above the actual rank is a hard failure.
    """
    primes = tuple(cfg.primes)
    kinds = [("perturbed", "truncated")[k % 2] for k in range(count)] + ["random"] * extra_random
    rows, ok = [], True
    for k, kind in enumerate(kinds):
        if kind == "perturbed":
            t = perturbed_diagonal(10 ** rng.uniform(-6, -1), rng, primes, cfg.p)
        elif kind == "truncated":
            t = truncated_diagonal(rng.uniform(0.2, 0.9), rng, primes, cfg.p)
        else:
            t = random_decomposition(int(rng.integers(1, 12)), rng, primes, cfg.p)
        rep = run_pipeline(t, config=pipeline_config(cfg))
        for rec in rep.records:
            rows.append({"candidate": k, "kind": kind, "l": rec.l, "rank": t.rank, "eps": rec.eps,
                         "delta0": rec.delta0, "delta1": rec.delta1, "bound": rec.rank_lower_bound,
                         "ok": rec.ok, "consistent": rec.consistent})
            ok = ok and rec.ok and rec.consistent and rec.rank_lower_bound <= t.rank + 1e-9
    return rows, ok


def eckart_young_experiment(cfg: RunConfig, rng, count: int = 200):
    """||M - lam I||^2 >= (1 - r/n)|lam|^2 for rank-r M, via exact singular values."""
    worst, ok = math.inf, True
    for _ in range(count):
        n = int(rng.integers(2, 14))
        r = int(rng.integers(0, n + 1))
        lam = complex(*rng.standard_normal(2))
        m = random_complex(rng, (n, r)) @ random_complex(rng, (r, n)) if r else np.zeros((n, n))
        dist_sq = float(np.linalg.norm(m - lam * np.eye(n) / math.sqrt(n)) ** 2)
        floor = best_rank_r_distance_sq(lam, n, r)
        # the floor is attained by truncating lam I: check that too
        s = np.full(n, abs(lam) / math.sqrt(n))
        tail = float(np.sum(s[r:] ** 2))
        worst = min(worst, dist_sq - floor)
        ok = ok and dist_sq >= floor - 1e-9 and abs(tail - floor) <= 1e-12 and abs(floor - (1 - r / n) * abs(lam) ** 2) <= 1e-12
    return {"instances": count, "min_slack": worst}, ok


def suite(cfg: RunConfig):
    """Every experiment once, in a fixed order, from a single generator."""
    rng = np.random.default_rng(cfg.seed)
    results, ok = {}, True

    def record(name, res):
        nonlocal ok
        out, good = res[0], res[1]
        results[name] = {"ok": bool(good), "results": out}
        ok = ok and good

    for l in (2, 3, 5, 7, 11, 13):
        record(f"plane_{l}", plane_experiment(l, cfg))
    for l in (2, 3):
        record(f"group_{l}", group_experiment(l, cfg))
    for l in (5,):
        sizes = orbit_count_product_action(l)
        n = l * l + l + 1
        record(f"pair_orbits_{l}", ({"sizes": sizes}, sizes == [n, n * (n - 1)]))
    record("lemma21", column_norm_experiment(cfg, rng, ps=[1, 2, math.inf]))
    inf_cfg = RunConfig(**{**asdict(cfg), "p": math.inf})
    record("remark22", l2_column_experiment(inf_cfg, rng))
    record("mazur", mazur_experiment(cfg, rng))
    cay = sl3_cayley(2, cfg.group_cap)
    for name, g in small_graphs().items():
        record(f"spectral_{name}", spectral_experiment(cfg, graph=g))
    record("spectral_cayley", spectral_experiment(cfg, graph=cay))
    record("coarea", coarea_experiment(RunConfig(**{**asdict(cfg), "trials": min(cfg.trials, 500)}), rng, cay))
    record("concentration", concentration_experiment(RunConfig(**{**asdict(cfg), "trials": min(cfg.trials, 500)}), rng, cay))
    record("invariant", invariant_experiment(cfg, rng, trials=min(cfg.trials, 100)))
    for name in ("exact", "rank1"):
        j, good, _ = pipeline_experiment(builtin_decomposition(name, RunConfig(**{**asdict(cfg), "primes": (2,)}), rng), cfg)
        record(f"pipeline_{name}", (j, good))
    record("pipeline_sweep", candidate_sweep(RunConfig(**{**asdict(cfg), "primes": (2,)}), rng))
    record("eckart_young", eckart_young_experiment(cfg, rng))
    return results, ok
