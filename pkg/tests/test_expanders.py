import itertools
import json
import math

import numpy as np
import pytest

from bplab.expanders import (
    BanachPointCloud, GraphError, cayley_graph, cheeger_exact, cheeger_spectral, coarea_check,
    complete_bipartite_graph, complete_graph, concentration_banach, concentration_l1,
    concentration_median, cycle_graph, enumerate_image, graph_from_edge_list, graph_from_edges,
    graph_from_json, invariant_vector, kazhdan_constant, petersen_graph, smallest_concentration_constant,
    spectral_report, tensor_square,
)
from bplab.experiments import sl3_cayley
from bplab.finite import GroupElement, build_projective_plane, elementary_generators, perm_matrix


class Zmod:
    """Cyclic group element, enough for a Cayley graph."""

    def __init__(self, a, n):
        self.a, self.n = a % n, n

    def __mul__(self, other):
        return Zmod(self.a + other.a, self.n)

    def __eq__(self, other):
        return self.a == other.a

    def __hash__(self):
        return hash(self.a)


def brute_cheeger(graph):
    edges = graph.edges
    best = math.inf
    for size in range(1, graph.n // 2 + 1):
        for subset in itertools.combinations(range(graph.n), size):
            a = set(subset)
            boundary = sum((u in a) != (v in a) for u, v in edges)
            best = min(best, boundary / size)
    return best


def circulant(n, steps):
    return graph_from_edges(n, {tuple(sorted((i, (i + s) % n))) for i in range(n) for s in steps})


EXPECTED_H = {"K4": 2.0, "C6": 2 / 3, "K33": 5 / 3, "Petersen": 1.0}
GRAPHS = {"K4": complete_graph(4), "C6": cycle_graph(6), "K33": complete_bipartite_graph(3, 3),
          "Petersen": petersen_graph()}
SPECTRA = {
    "K4": [3, -1, -1, -1],
    "C6": [2, 1, 1, -1, -1, -2],
    "K33": [3, 0, 0, 0, 0, -3],
    "Petersen": [3, 1, 1, 1, 1, 1, -2, -2, -2, -2],
}


@pytest.mark.parametrize("name", sorted(GRAPHS))
def test_eigenvalues_match_closed_forms(name):
    assert np.max(np.abs(GRAPHS[name].eigenvalues() - np.array(SPECTRA[name], float))) <= 1e-9


@pytest.mark.parametrize("name", sorted(GRAPHS))
def test_cheeger_exact_values(name):
    g = GRAPHS[name]
    h = cheeger_exact(g)
    assert h == pytest.approx(EXPECTED_H[name], abs=1e-12)
    assert h == pytest.approx(brute_cheeger(g), abs=1e-12)
    lower, upper = cheeger_spectral(g)
    assert lower - 1e-9 <= h <= upper + 1e-9


@pytest.mark.parametrize("n, steps", [(8, (1, 3)), (9, (1, 2)), (10, (1, 4, 5)), (12, (2, 3, 6)), (11, (1, 3))])
def test_cheeger_exact_against_brute_force(n, steps):
    g = circulant(n, steps)
    assert cheeger_exact(g) == pytest.approx(brute_cheeger(g), abs=1e-12)


def test_cheeger_exact_small_chunks():
    g = petersen_graph()
    assert cheeger_exact(g, chunk=37) == pytest.approx(1.0)


def test_cheeger_exact_refuses_large_graphs():
    with pytest.raises(GraphError, match="limited"):
        cheeger_exact(cycle_graph(30))


def test_graph_validation():
    with pytest.raises(GraphError, match="regular"):
        graph_from_edges(3, [(0, 1), (1, 2)])
    with pytest.raises(GraphError):
        graph_from_edges(3, [(0, 0), (1, 2), (1, 2)])
    with pytest.raises(GraphError):
        graph_from_edges(4, [(0, 1), (0, 1), (2, 3), (2, 3)])
    # two disjoint triangles: regular but disconnected
    with pytest.raises(GraphError):
        graph_from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    with pytest.raises(GraphError):
        graph_from_edges(2, [(0, 5)])


def test_graph_serialisation_round_trip():
    g = petersen_graph()
    again = graph_from_json(json.loads(json.dumps(g.to_json())))
    assert np.array_equal(again.adjacency(), g.adjacency())
    again = graph_from_edge_list("# petersen\n" + g.to_edge_list())
    assert np.array_equal(again.adjacency(), g.adjacency())
    with pytest.raises(GraphError):
        graph_from_json({"edges": []})
    with pytest.raises(GraphError):
        graph_from_edge_list("")


def test_cayley_of_cyclic_group_is_cycle():
    elems = [Zmod(i, 6) for i in range(6)]
    g = cayley_graph(elems, [Zmod(1, 6), Zmod(5, 6)])
    assert np.array_equal(g.adjacency(), cycle_graph(6).adjacency())


def test_cayley_rejects_bad_generators():
    elems = [Zmod(i, 6) for i in range(6)]
    with pytest.raises(GraphError, match="identity"):
        cayley_graph(elems, [Zmod(0, 6)])
    with pytest.raises(GraphError, match="symmetric"):
        cayley_graph(elems, [Zmod(1, 6)])
    with pytest.raises(GraphError, match="closed"):
        cayley_graph(elems[:3], [Zmod(1, 6), Zmod(5, 6)])


def test_cayley_sl3_f2():
    g = sl3_cayley(2)
    assert g.n == 168 and g.k == 6
    assert abs(g.eigenvalues()[0] - 6) <= 1e-9
    # edges join g and g s with s an elementary matrix
    gens = set(elementary_generators().reduce(2))
    for u, v in g.edges[:100]:
        assert g.labels[u].inverse() * g.labels[v] in gens
    rep = spectral_report(g)
    assert rep.gap > 0 and rep.cheeger_exact is None
    assert rep.cheeger_lower <= rep.cheeger_upper


def test_spectral_report_with_exact():
    rep = spectral_report(cycle_graph(6))
    assert rep.gap == pytest.approx(1.0)
    assert rep.cheeger_lower == pytest.approx(0.5)
    assert rep.cheeger_upper == pytest.approx(math.sqrt(4))
    assert rep.cheeger_exact == pytest.approx(2 / 3)


def test_coarea_examples():
    k4 = complete_graph(4)
    lhs, rhs, ok = coarea_check(k4, [1, 0, 0, 0], 2.0)
    assert (lhs, rhs, ok) == (3.0, 2.0, True)
    assert coarea_check(k4, np.zeros(4), 2.0)[2]
    with pytest.raises(ValueError, match="support"):
        coarea_check(k4, [1, 1, 1, 0], 2.0)
    with pytest.raises(ValueError, match="nonnegative"):
        coarea_check(k4, [-1, 0, 0, 0], 2.0)


def test_coarea_identity_by_level_sets():
    # sum over edges of |g(s) - g(t)| equals the integral of |boundary {g > r}| dr
    rng = np.random.default_rng(0)
    g_graph = petersen_graph()
    edges = g_graph.edges
    h = cheeger_exact(g_graph)
    for _ in range(50):
        g = np.zeros(10)
        g[rng.choice(10, 5, replace=False)] = rng.random(5)
        levels = np.concatenate([[0.0], np.unique(g[g > 0])])
        integral = 0.0
        for lo, hi in zip(levels[:-1], levels[1:]):
            level_set = g > lo
            integral += (hi - lo) * sum(level_set[u] != level_set[v] for u, v in edges)
        lhs, rhs, ok = coarea_check(g_graph, g, h)
        assert lhs == pytest.approx(integral)
        assert ok and rhs <= integral + 1e-12


def test_concentration_l1_examples():
    c6 = cycle_graph(6)
    const = BanachPointCloud(np.ones((6, 2)), "l1")
    rep = concentration_l1(c6, const, 2 / 3)
    assert rep.mean_dev == 0 and rep.lip == 0 and rep.holds
    dist = BanachPointCloud(c6.distances_from(0).reshape(-1, 1), "l1")
    rep = concentration_l1(c6, dist, 2 / 3)
    # distances 0,1,2,3,2,1 with mean 1.5
    assert rep.mean_dev == pytest.approx(5 / 6)
    assert rep.bound == pytest.approx(6)
    assert rep.holds
    with pytest.raises(ValueError):
        concentration_l1(c6, BanachPointCloud(np.ones((5, 1))), 1.0)


def test_concentration_median_examples():
    c6 = cycle_graph(6)
    f = c6.distances_from(0).astype(float)
    rep = concentration_median(c6, f, 1.0, 2 / 3)
    assert rep.mean_dev == pytest.approx(1.5)
    assert rep.bound == pytest.approx(1 + 1.5)
    assert rep.holds
    with pytest.raises(ValueError, match="half"):
        concentration_median(c6, f + 5, 1.0, 2 / 3)


def test_smallest_concentration_constant():
    assert smallest_concentration_constant(3, 1.0, lambda t: 0.0, lambda t: 0.0) == pytest.approx(
        min(r for r in np.logspace(0, 12, 241) if r >= 30))
    assert smallest_concentration_constant(3, 1.0, lambda t: 1.0, lambda t: 1.0) is None
    r = smallest_concentration_constant(6, 0.5, lambda t: 2 * t, lambda t: math.sqrt(2 * t))
    assert r is not None and math.sqrt(2 * 16 * 12 * 2 * 5 / r) <= 1 / 9


def test_concentration_banach_routes():
    g = sl3_cayley(2)
    h, _ = cheeger_spectral(g)
    plane = build_projective_plane(2)
    rng = np.random.default_rng(1)
    xi = rng.standard_normal(7)
    pts = np.array([perm_matrix(x, plane) @ xi for x in g.labels]) / np.linalg.norm(xi)
    rep = concentration_banach(g, BanachPointCloud(pts), h, lambda t: 2 * t, lambda t: math.sqrt(2 * t))
    assert rep.holds and rep.extra["status"] == "certified"
    assert rep.extra["embedded_holds"] and rep.extra["embedded_lip_within_modulus"]
    const = concentration_banach(g, BanachPointCloud(np.tile(pts[0] / 2, (g.n, 1))), h,
                                 lambda t: 2 * t, lambda t: math.sqrt(2 * t))
    assert const.mean_dev == pytest.approx(0, abs=1e-15) and const.lip == 0 and const.holds
    stuck = concentration_banach(g, BanachPointCloud(pts), h, lambda t: 1.0, lambda t: 1.0)
    assert stuck.extra["status"] == "inconclusive" and not stuck.holds
    with pytest.raises(ValueError, match="unit ball"):
        concentration_banach(g, BanachPointCloud(2 * pts), h, lambda t: 2 * t, lambda t: t)


def test_enumerate_image_and_kazhdan():
    plane = build_projective_plane(2)
    gens = [perm_matrix(x, plane) for x in elementary_generators().reduce(2)]
    image = enumerate_image(gens)
    assert len(image) == 168
    kaz = kazhdan_constant(gens)
    assert kaz.invariant_dim == 1 and kaz.kappa > 0
    assert np.allclose(np.abs(kaz.invariant_basis[:, 0]), 1 / math.sqrt(7))
    trivial = kazhdan_constant([np.eye(3)])
    assert trivial.trivial and trivial.r_eff == math.inf


@pytest.mark.parametrize("l", [2, 3])
def test_tensor_square_invariants_are_identity_and_all_ones(l):
    plane = build_projective_plane(l)
    n = plane.size
    gens = [tensor_square(perm_matrix(x, plane)) for x in elementary_generators().reduce(l)]
    kaz = kazhdan_constant(gens)
    assert kaz.invariant_dim == 2
    basis = kaz.invariant_basis
    span = np.stack([np.eye(n).ravel(), np.ones((n, n)).ravel()], axis=1)
    # both spans agree: projecting one onto the other loses nothing
    proj = basis @ basis.conj().T
    assert np.allclose(proj @ span, span, atol=1e-9)


def test_kazhdan_constant_bounds_distance_to_invariants():
    plane = build_projective_plane(2)
    gens = [tensor_square(perm_matrix(x, plane)) for x in elementary_generators().reduce(2)]
    kaz = kazhdan_constant(gens)
    proj = kaz.invariant_basis @ kaz.invariant_basis.conj().T
    rng = np.random.default_rng(2)
    for _ in range(100):
        xi = rng.standard_normal(49)
        dist = np.linalg.norm(xi - proj @ xi)
        moved = max(np.linalg.norm(g @ xi - xi) for g in gens)
        assert dist <= kaz.r_eff * moved + 1e-9


def test_invariant_vector():
    plane = build_projective_plane(2)
    gens = [perm_matrix(x, plane) for x in elementary_generators().reduce(2)]
    res = invariant_vector(gens, np.ones(7))
    assert np.allclose(res.eta, np.ones(7)) and res.distance == 0 and res.holds
    rng = np.random.default_rng(3)
    xi = rng.standard_normal(7)
    res = invariant_vector(gens, xi)
    assert np.allclose(res.eta, xi.mean())
    assert res.invariance_defect <= 1e-12
    assert res.norm_factor == pytest.approx(1)
    assert res.holds


def test_group_element_labels_are_kept():
    g = sl3_cayley(2)
    assert isinstance(g.labels[0], GroupElement)
