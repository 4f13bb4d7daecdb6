"""
Regular graphs, Cayley graphs of finite groups, Cheeger constants, the
co-area inequality, concentration inequalities for Lipschitz maps out of
expanders, and invariant vectors of finite-image representations.
"""

from __future__ import annotations

import itertools
import math
import operator
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .finite import GroupTooLarge, GROUP_CAP
from .linalg import vec_norm

EIG_TOL = 1e-9
CHEEGER_MAX_N = 24
DENSE_CEILING = 6000


class GraphError(ValueError):
    pass


@dataclass(eq=False)
class Graph:
    """Simple, connected, k-regular graph on vertices 0..n-1."""

    n: int
    k: int
    neighbors: tuple
    labels: list | None = None
    _eigenvalues: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("empty graph")
        for v, nb in enumerate(self.neighbors):
            if v in nb:
                raise GraphError(f"loop at vertex {v}")
            if len(set(nb)) != len(nb):
                raise GraphError(f"multiple edge at vertex {v}")
            if len(nb) != self.k:
                raise GraphError(f"vertex {v} has degree {len(nb)}, expected {self.k}")
            for u in nb:
                if v not in self.neighbors[u]:
                    raise GraphError(f"edge {v}-{u} is not symmetric")
        if len(bfs_distances(self.neighbors, 0)) != self.n:
            raise GraphError("graph is disconnected")

    @property
    def edges(self) -> list:
        return [(u, v) for u in range(self.n) for v in self.neighbors[u] if u < v]

    def edge_array(self) -> np.ndarray:
        return np.array(self.edges, dtype=np.int64).reshape(-1, 2)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        e = self.edge_array()
        a[e[:, 0], e[:, 1]] = 1
        a[e[:, 1], e[:, 0]] = 1
        return a

    def eigenvalues(self) -> np.ndarray:
        """Adjacency spectrum, descending."""
        if self._eigenvalues is None:
            if self.n > DENSE_CEILING:
                raise GraphError(f"{self.n} vertices exceeds the dense eigensolver ceiling {DENSE_CEILING}")
            self._eigenvalues = np.linalg.eigvalsh(self.adjacency())[::-1].copy()
        return self._eigenvalues

    def distances_from(self, v: int) -> np.ndarray:
        d = bfs_distances(self.neighbors, v)
        return np.array([d[u] for u in range(self.n)], dtype=float)

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k, "edges": [list(e) for e in self.edges]}

    def to_edge_list(self) -> str:
        return "".join(f"{u} {v}\n" for u, v in self.edges)


def bfs_distances(neighbors, source: int) -> dict:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in neighbors[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def graph_from_edges(n: int, edges, labels=None) -> Graph:
    nb = [[] for _ in range(n)]
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) out of range for {n} vertices")
        nb[u].append(v)
        nb[v].append(u)
    degrees = {len(x) for x in nb}
    if len(degrees) != 1:
        raise GraphError(f"graph is not regular (degrees {sorted(degrees)})")
    return Graph(n, degrees.pop(), tuple(tuple(x) for x in nb), labels)


def graph_from_json(d: dict) -> Graph:
    try:
        return graph_from_edges(int(d["n"]), d["edges"])
    except (KeyError, TypeError) as err:
        raise GraphError(f"malformed graph record: {err}") from err


def graph_from_edge_list(text: str) -> Graph:
    edges = [tuple(int(x) for x in line.split()[:2]) for line in text.splitlines() if line.strip() and not line.startswith("#")]
    if not edges:
        raise GraphError("edge list is empty")
    n = max(max(e) for e in edges) + 1
    return graph_from_edges(n, edges)


def cycle_graph(n: int) -> Graph:
    return graph_from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return graph_from_edges(n, itertools.combinations(range(n), 2))


def complete_bipartite_graph(a: int, b: int) -> Graph:
    return graph_from_edges(a + b, [(i, a + j) for i in range(a) for j in range(b)])


def petersen_graph() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return graph_from_edges(10, outer + spokes + inner)


def cayley_graph(elements, gens, mul=operator.mul) -> Graph:
    """Cayley graph: g ~ h iff g^-1 h is a generator, i.e. h = g s.

    Generators that coincide as group elements are merged, so the degree
    is the number of distinct generators.
    """
    elements = list(elements)
    index = {g: i for i, g in enumerate(elements)}
    gens = list(dict.fromkeys(gens))
    nb = []
    for g in elements:
        row = []
        for s in gens:
            h = mul(g, s)
            if h == g:
                raise GraphError("generator set contains the identity (loops)")
            if h not in index:
                raise GraphError("element set is not closed under the generators")
            row.append(index[h])
        nb.append(tuple(row))
    for u, row in enumerate(nb):
        for v in row:
            if u not in nb[v]:
                raise GraphError("generator set is not symmetric")
    return Graph(len(elements), len(gens), tuple(nb), elements)


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x - ((x >> 1) & 0x55555555)
    x = (x & 0x33333333) + ((x >> 2) & 0x33333333)
    x = (x + (x >> 4)) & 0x0F0F0F0F
    return (x * 0x01010101 & 0xFFFFFFFF) >> 24


def cheeger_exact(graph: Graph, max_n: int = CHEEGER_MAX_N, chunk: int = 1 << 20) -> float:
    """min |boundary A| / |A| over nonempty A with |A| <= n/2, by enumeration."""
    n = graph.n
    if n > max_n:
        raise GraphError(
            f"exhaustive Cheeger search is limited to {max_n} vertices; "
            f"use cheeger_spectral for a graph with {n}"
        )
    if n < 2:
        raise GraphError("Cheeger constant needs at least 2 vertices")
    edges = graph.edge_array()
    best = math.inf
    half = n // 2
    for start in range(1, 1 << n, chunk):
        masks = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        size = _popcount(masks)
        keep = size <= half
        masks, size = masks[keep], size[keep]
        if masks.size == 0:
            continue
        boundary = np.zeros(masks.shape, dtype=np.int64)
        for u, v in edges:
            boundary += ((masks >> u) ^ (masks >> v)) & 1
        best = min(best, float(np.min(boundary / size)))
    return best


@dataclass
class SpectralReport:
    eigenvalues: list
    k: int
    gap: float
    cheeger_lower: float
    cheeger_upper: float
    cheeger_exact: float | None = None

    def to_json(self):
        return dict(self.__dict__)


def cheeger_spectral(graph: Graph) -> tuple:
    """(k - lambda_2)/2 <= h(G) <= sqrt(2 k (k - lambda_2))."""
    ev = graph.eigenvalues()
    if abs(ev[0] - graph.k) > 1e-8:
        raise GraphError(f"top eigenvalue {ev[0]} differs from degree {graph.k}")
    if graph.n == 1:
        raise GraphError("spectral gap undefined for a single vertex")
    gap = graph.k - ev[1]
    if gap <= EIG_TOL:
        raise GraphError("zero spectral gap: graph is disconnected")
    return gap / 2, math.sqrt(2 * graph.k * gap)


def spectral_report(graph: Graph, exact: bool | None = None) -> SpectralReport:
    lower, upper = cheeger_spectral(graph)
    ev = graph.eigenvalues()
    if exact is None:
        exact = graph.n <= 16
    return SpectralReport(
        eigenvalues=ev.tolist(),
        k=graph.k,
        gap=float(graph.k - ev[1]),
        cheeger_lower=lower,
        cheeger_upper=upper,
        cheeger_exact=cheeger_exact(graph) if exact else None,
    )


def coarea_check(graph: Graph, g, h: float, tol: float = 1e-9):
    """sum over edges |g(s) - g(t)| >= h sum_s g(s), for g >= 0 with small support."""
    g = np.asarray(g, dtype=float)
    if np.any(g < 0):
        raise ValueError("co-area check needs a nonnegative function")
    if np.count_nonzero(g) > graph.n / 2:
        raise ValueError(f"support {np.count_nonzero(g)} exceeds half of {graph.n} vertices")
    e = graph.edge_array()
    lhs = float(np.abs(g[e[:, 0]] - g[e[:, 1]]).sum())
    rhs = float(h * g.sum())
    return lhs, rhs, lhs >= rhs - tol * max(1.0, rhs)


@dataclass
class BanachPointCloud:
    """Vertex -> vector map; ``space`` is 'l1', 'l2' or a numeric p."""

    points: np.ndarray
    space: object = "l2"

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points))
        if self.points.ndim != 2 or self.points.shape[0] == 0:
            raise ValueError("a point cloud needs at least one point")

    @property
    def p(self) -> float:
        if self.space == "l1":
            return 1.0
        if self.space == "l2":
            return 2.0
        return float(self.space)

    def dist(self, a, b) -> float:
        return vec_norm(a - b, self.p)

    def lip(self, graph: Graph) -> float:
        e = graph.edge_array()
        if len(e) == 0:
            return 0.0
        return max(self.dist(self.points[u], self.points[v]) for u, v in e)

    def mean(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def mean_deviation(self) -> float:
        m = self.mean()
        return float(np.mean([self.dist(x, m) for x in self.points]))


@dataclass
class ConcentrationReport:
    mean_dev: float
    bound: float
    lip: float
    h: float
    h_source: str
    holds: bool
    extra: dict = field(default_factory=dict)

    def to_json(self):
        d = dict(self.__dict__)
        extra = d.pop("extra")
        d.update(extra)
        return d


def concentration_l1(graph: Graph, cloud: BanachPointCloud, h: float, h_source: str = "exact", tol: float = 1e-9):
    """(1/|G|) sum ||f(s) - m||_1 <= 2 (k/h) Lip(f)."""
    if cloud.points.shape[0] != graph.n:
        raise ValueError("cloud must have one point per vertex")
    cloud = BanachPointCloud(cloud.points, "l1")
    lip = cloud.lip(graph)
    dev = cloud.mean_deviation()
    bound = 2 * graph.k / h * lip
    return ConcentrationReport(dev, bound, lip, h, h_source, dev <= bound + tol * max(1.0, bound))


def concentration_median(graph: Graph, f, r0: float, h: float, h_source: str = "exact", tol: float = 1e-9):
    """mean f <= R0 + (k / 2h) Lip(f) when f <= R0 on at least half the vertices."""
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("f must be nonnegative")
    if np.count_nonzero(f <= r0) < graph.n / 2:
        raise ValueError(f"fewer than half the vertices satisfy f <= {r0}")
    e = graph.edge_array()
    lip = float(np.abs(f[e[:, 0]] - f[e[:, 1]]).max()) if len(e) else 0.0
    mean = float(f.mean())
    bound = r0 + graph.k / (2 * h) * lip
    return ConcentrationReport(mean, bound, lip, h, h_source, mean <= bound + tol * max(1.0, bound))


def smallest_concentration_constant(k: int, h: float, omega, omega_inv, r_grid=None):
    """Smallest R on a grid with R >= 10 k/h and omega_inv(16 (k/h) omega(5/R)) <= 1/9.

    Returns None when no grid value qualifies.
    """
    ratio = k / h
    r_grid = np.logspace(0, 12, 241) if r_grid is None else np.asarray(r_grid, dtype=float)
    for r in np.sort(r_grid):
        if r >= 10 * ratio and omega_inv(16 * ratio * omega(5 / r)) <= 1 / 9:
            return float(r)
    return None


def concentration_banach(graph: Graph, cloud: BanachPointCloud, h: float, omega, omega_inv,
                         h_source: str = "exact", r_grid=None) -> ConcentrationReport:
    """Concentration for a map into the unit ball of l_2, through the l_2 -> l_1 Mazur map.

    ``omega`` and ``omega_inv`` are moduli of continuity of the embedding
    of the l_2 unit ball into l_1 and of its inverse (measured or analytic).
    The report carries the constant R, the direct check, and the same
    cloud pushed through the embedding and checked in l_1.
    """
    from .mazur import classical_mazur

    pts = np.asarray(cloud.points, dtype=float)
    norms = np.linalg.norm(pts, axis=1)
    if np.any(norms > 1 + 1e-12):
        raise ValueError("cloud leaves the unit ball of l_2")
    l2 = BanachPointCloud(pts, "l2")
    lip = l2.lip(graph)
    dev = l2.mean_deviation()
    r = smallest_concentration_constant(graph.k, h, omega, omega_inv, r_grid)
    embedded = BanachPointCloud(np.array([classical_mazur(x, 2, 1) for x in pts]), "l1")
    via_l1 = concentration_l1(graph, embedded, h, h_source)
    extra = {
        "R": r,
        "status": "inconclusive" if r is None else "certified",
        "embedded_lip": via_l1.lip,
        "embedded_mean_dev": via_l1.mean_dev,
        "embedded_bound": via_l1.bound,
        "embedded_holds": via_l1.holds,
        "embedded_lip_within_modulus": via_l1.lip <= omega(lip) + 1e-12 if lip > 0 else via_l1.lip == 0,
    }
    if r is None:
        return ConcentrationReport(dev, math.nan, lip, h, h_source, False, extra)
    bound = r * lip
    return ConcentrationReport(dev, bound, lip, h, h_source, dev <= bound + 1e-12, extra)


def _matrix_key(m: np.ndarray, decimals: int = 9) -> bytes:
    # + 0.0 folds -0.0 into 0.0 so equal matrices hash equal
    return (np.round(np.asarray(m, dtype=complex), decimals) + 0.0).tobytes()


def enumerate_image(gen_matrices, cap: int = GROUP_CAP) -> list:
    """All products of the generator matrices (the finite image group)."""
    gens = [np.asarray(g) for g in gen_matrices]
    if not gens:
        raise ValueError("need at least one generator")
    ident = np.eye(gens[0].shape[0], dtype=np.result_type(*gens))
    seen = {_matrix_key(ident): ident}
    queue = deque([ident])
    while queue:
        x = queue.popleft()
        for g in gens:
            y = x @ g
            key = _matrix_key(y)
            if key not in seen:
                if len(seen) >= cap:
                    raise GroupTooLarge(f"image group exceeded cap {cap} (partial count {len(seen)})", list(seen.values()))
                seen[key] = y
                queue.append(y)
    return list(seen.values())


@dataclass
class KazhdanReport:
    kappa: float
    r_eff: float
    invariant_dim: int
    complement_dim: int
    trivial: bool
    invariant_basis: np.ndarray = field(repr=False)

    def to_json(self):
        return {k: v for k, v in self.__dict__.items() if k != "invariant_basis"}


def kazhdan_constant(gen_matrices, tol: float = 1e-9) -> KazhdanReport:
    """Spectral Kazhdan constant of a unitary representation on its invariant complement.

    kappa^2 is the least eigenvalue of (1/|S|) sum_g (2 - pi(g) - pi(g)*)
    on the orthogonal complement of the common fixed vectors, so every
    vector xi lies within (1/kappa) max_g ||pi(g) xi - xi|| of its
    projection onto the invariants.
    """
    gens = [np.asarray(g, dtype=complex) for g in gen_matrices]
    d = gens[0].shape[0]
    lap = np.zeros((d, d), dtype=complex)
    for g in gens:
        lap += 2 * np.eye(d) - g - g.conj().T
    lap /= len(gens)
    vals, vecs = np.linalg.eigh((lap + lap.conj().T) / 2)
    inv = vals < tol
    basis = vecs[:, inv]
    if inv.all():
        return KazhdanReport(0.0, math.inf, d, 0, True, basis)
    kappa = float(np.sqrt(vals[~inv].min()))
    return KazhdanReport(kappa, 1 / kappa, int(inv.sum()), int((~inv).sum()), False, basis)


@dataclass
class InvariantVectorResult:
    eta: np.ndarray
    invariance_defect: float
    distance: float
    displacement: float
    norm_factor: float
    r_eff: float
    bound: float
    holds: bool

    def to_json(self):
        d = {k: v for k, v in self.__dict__.items() if k != "eta"}
        return d


def invariant_vector(gen_matrices, xi, r_eff: float | None = None, group=None, cap: int = GROUP_CAP,
                     tol: float = 1e-9) -> InvariantVectorResult:
    """Orbit average of xi over the finite image group, with the almost-invariance bound.

    Checks ||xi - eta|| <= R max_g ||pi(g)||^2 max_h ||pi(h) xi - xi||, where
    R defaults to the spectral constant of the generators.
    """
    gens = [np.asarray(g) for g in gen_matrices]
    group = enumerate_image(gens, cap) if group is None else group
    xi = np.asarray(xi)
    eta = np.mean([g @ xi for g in group], axis=0)
    defect = max(vec_norm(g @ eta - eta, 2) for g in group)
    if r_eff is None:
        r_eff = kazhdan_constant(gens).r_eff
    displacement = max(vec_norm(h @ xi - xi, 2) for h in gens)
    norm_factor = max(np.linalg.norm(g, 2) for g in group) ** 2
    distance = vec_norm(xi - eta, 2)
    if displacement == 0:
        bound = 0.0
    else:
        bound = r_eff * norm_factor * displacement
    return InvariantVectorResult(eta, defect, distance, displacement, norm_factor, r_eff, bound,
                                 bool(distance <= bound * (1 + tol) + tol))


def tensor_square(m: np.ndarray) -> np.ndarray:
    """pi (x) pi acting on row-major vectorised matrices: vec(P Y P^T)."""
    return np.kron(m, m)
