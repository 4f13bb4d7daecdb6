"""
Prime fields, SL(3, F_l), finite projective planes and their permutation
actions.

Group elements are stored as flat row-major 9-tuples of residues; all
objects are immutable, so they can be shared freely between workers.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_PRIME = 13
GROUP_CAP = 10**6


class ModulusMismatch(ValueError):
    pass


class GenerationError(RuntimeError):
    """BFS closure did not produce the expected group.

    ``elements`` holds whatever was enumerated before giving up.
    """

    def __init__(self, message, elements=()):
        super().__init__(message)
        self.elements = list(elements)


class GroupTooLarge(GenerationError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def check_prime(l: int, max_prime: int = MAX_PRIME) -> int:
    if not isinstance(l, (int, np.integer)) or not is_prime(int(l)):
        raise ValueError(f"{l!r} is not a prime")
    if l > max_prime:
        raise ValueError(f"prime {l} exceeds configured maximum {max_prime}")
    return int(l)


@dataclass(frozen=True)
class FieldElement:
    value: int
    modulus: int

    def __post_init__(self):
        if not is_prime(self.modulus):
            raise ValueError(f"modulus {self.modulus} is not prime")
        object.__setattr__(self, "value", self.value % self.modulus)

    def _coerce(self, other):
        if isinstance(other, FieldElement):
            if other.modulus != self.modulus:
                raise ModulusMismatch(f"F_{self.modulus} vs F_{other.modulus}")
            return other.value
        return int(other)

    def __add__(self, other):
        return FieldElement(self.value + self._coerce(other), self.modulus)

    __radd__ = __add__

    def __sub__(self, other):
        return FieldElement(self.value - self._coerce(other), self.modulus)

    def __neg__(self):
        return FieldElement(-self.value, self.modulus)

    def __mul__(self, other):
        return FieldElement(self.value * self._coerce(other), self.modulus)

    __rmul__ = __mul__

    def inverse(self) -> "FieldElement":
        if self.value == 0:
            raise ZeroDivisionError("0 has no inverse in a field")
        return FieldElement(pow(self.value, -1, self.modulus), self.modulus)

    def __int__(self):
        return self.value


def _det3(e: Sequence[int]) -> int:
    a, b, c, d, f, g, h, i, j = e
    return a * (f * j - g * i) - b * (d * j - g * h) + c * (d * i - f * h)


def _mul3(x: Sequence[int], y: Sequence[int], l: int) -> tuple:
    return tuple(
        (x[3 * r] * y[c] + x[3 * r + 1] * y[3 + c] + x[3 * r + 2] * y[6 + c]) % l
        for r in range(3)
        for c in range(3)
    )


@dataclass(frozen=True)
class GroupElement:
    """An element of SL(3, F_l)."""

    entries: tuple
    l: int

    def __post_init__(self):
        e = tuple(int(v) % self.l for v in np.asarray(self.entries).ravel())
        if len(e) != 9:
            raise ValueError("a 3x3 matrix needs 9 entries")
        if _det3(e) % self.l != 1:
            raise ValueError(f"determinant is not 1 mod {self.l}")
        object.__setattr__(self, "entries", e)

    @classmethod
    def identity(cls, l: int) -> "GroupElement":
        return cls((1, 0, 0, 0, 1, 0, 0, 0, 1), l)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        if other.l != self.l:
            raise ModulusMismatch(f"SL(3,F_{self.l}) vs SL(3,F_{other.l})")
        # skip re-validation: a product of det-1 matrices has det 1
        out = object.__new__(GroupElement)
        object.__setattr__(out, "entries", _mul3(self.entries, other.entries, self.l))
        object.__setattr__(out, "l", self.l)
        return out

    def inverse(self) -> "GroupElement":
        # adjugate, since det = 1
        a, b, c, d, e, f, g, h, i = self.entries
        adj = (
            e * i - f * h, c * h - b * i, b * f - c * e,
            f * g - d * i, a * i - c * g, c * d - a * f,
            d * h - e * g, b * g - a * h, a * e - b * d,
        )
        return GroupElement(adj, self.l)

    def matrix(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64).reshape(3, 3)

    def field_entries(self):
        return [[FieldElement(self.entries[3 * r + c], self.l) for c in range(3)] for r in range(3)]

    def is_identity(self) -> bool:
        return self.entries == (1, 0, 0, 0, 1, 0, 0, 0, 1)


@dataclass(frozen=True)
class ProjPoint:
    """A line through the origin of F_l^3, first nonzero coordinate scaled to 1."""

    rep: tuple
    l: int

    def __post_init__(self):
        v = tuple(int(x) % self.l for x in self.rep)
        if len(v) != 3:
            raise ValueError("projective points live in F_l^3")
        nz = [x for x in v if x]
        if not nz:
            raise ValueError("the zero vector is not a projective point")
        inv = pow(nz[0], -1, self.l)
        object.__setattr__(self, "rep", tuple(x * inv % self.l for x in v))


@dataclass(frozen=True, eq=False)
class ProjectivePlane:
    l: int
    points: tuple
    index: dict = field(repr=False)
    sign_set: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.points)

    def to_json(self) -> dict:
        return {
            "l": self.l,
            "points": [list(p.rep) for p in self.points],
            "sign_set": [bool(b) for b in self.sign_set],
        }


def build_projective_plane(l: int, max_prime: int = MAX_PRIME) -> ProjectivePlane:
    l = check_prime(l, max_prime)
    return _plane(l)


@lru_cache(maxsize=None)
def _plane(l: int) -> ProjectivePlane:
    reps = sorted(
        v for v in itertools.product(range(l), repeat=3)
        if any(v) and next(x for x in v if x) == 1
    )
    points = tuple(ProjPoint(v, l) for v in reps)
    index = {p: i for i, p in enumerate(points)}
    n = len(points)
    sign_set = np.zeros(n, dtype=bool)
    sign_set[: (l * l + l) // 2] = True
    sign_set.setflags(write=False)
    return ProjectivePlane(l, points, index, sign_set)


def act(g: GroupElement, s: ProjPoint) -> ProjPoint:
    if g.l != s.l:
        raise ModulusMismatch(f"group over F_{g.l}, point over F_{s.l}")
    e, v = g.entries, s.rep
    return ProjPoint(tuple(e[3 * r] * v[0] + e[3 * r + 1] * v[1] + e[3 * r + 2] * v[2] for r in range(3)), g.l)


def permutation(g: GroupElement, plane: ProjectivePlane) -> np.ndarray:
    """Index array ``perm`` with ``g . points[i] == points[perm[i]]``."""
    if g.l != plane.l:
        raise ModulusMismatch(f"group over F_{g.l}, plane over F_{plane.l}")
    return np.array([plane.index[act(g, s)] for s in plane.points], dtype=np.int64)


def perm_matrix(g: GroupElement, plane: ProjectivePlane) -> np.ndarray:
    """Matrix of the induced isometry: column s is delta_{g.s}."""
    perm = permutation(g, plane)
    n = plane.size
    out = np.zeros((n, n))
    out[perm, np.arange(n)] = 1.0
    return out


def sign_isometry(plane: ProjectivePlane) -> np.ndarray:
    return np.diag(np.where(plane.sign_set, 1.0, -1.0))


@dataclass(frozen=True)
class GeneratorSet:
    """Integer 3x3 matrices of determinant 1, reducible to any F_l."""

    elements: tuple
    symmetric: bool = False

    def __post_init__(self):
        mats = tuple(tuple(int(v) for v in np.asarray(m).ravel()) for m in self.elements)
        for m in mats:
            if len(m) != 9 or _det3(m) != 1:
                raise ValueError(f"{m} is not an integer matrix of determinant 1")
        if self.symmetric:
            as_set = set(mats)
            for m in mats:
                if _int_inverse(m) not in as_set:
                    raise ValueError(f"generator set flagged symmetric but {m} has no inverse in it")
        object.__setattr__(self, "elements", mats)

    def __len__(self):
        return len(self.elements)

    def reduce(self, l: int) -> list:
        """Distinct images in SL(3, F_l), in first-seen order."""
        seen = {}
        for m in self.elements:
            g = GroupElement(m, l)
            seen.setdefault(g, None)
        return list(seen)


def _int_inverse(m: Sequence[int]) -> tuple:
    a, b, c, d, e, f, g, h, i = m
    return (
        e * i - f * h, c * h - b * i, b * f - c * e,
        f * g - d * i, a * i - c * g, c * d - a * f,
        d * h - e * g, b * g - a * h, a * e - b * d,
    )


def elementary_generators() -> GeneratorSet:
    """The twelve elementary matrices I +- E_ij, i != j."""
    mats = []
    for i, j in itertools.permutations(range(3), 2):
        for sgn in (1, -1):
            m = np.eye(3, dtype=np.int64)
            m[i, j] = sgn
            mats.append(m)
    return GeneratorSet(tuple(mats), symmetric=True)


def sl3_order(l: int) -> int:
    return (l**3 - 1) * (l**3 - l) * (l**3 - l**2) // (l - 1)


def closure(gens: Iterable, identity, cap: int = GROUP_CAP) -> list:
    """Breadth-first closure of ``identity`` under right multiplication."""
    gens = list(gens)
    seen = {identity: None}
    queue = deque([identity])
    while queue:
        x = queue.popleft()
        for s in gens:
            y = x * s
            if y not in seen:
                if len(seen) >= cap:
                    raise GroupTooLarge(
                        f"closure exceeded cap {cap} (partial count {len(seen)})", seen
                    )
                seen[y] = None
                queue.append(y)
    return list(seen)


def enumerate_quotient(l: int, gens: GeneratorSet | None = None, cap: int = GROUP_CAP) -> list:
    """Enumerate the image of <gens> in SL(3, F_l) and check it is all of it."""
    l = check_prime(l)
    gens = elementary_generators() if gens is None else gens
    elements = closure(gens.reduce(l), GroupElement.identity(l), cap)
    expected = sl3_order(l)
    if len(elements) != expected:
        raise GenerationError(
            f"closure has {len(elements)} elements, |SL(3,F_{l})| = {expected}", elements
        )
    return elements


def orbit_count_product_action(l: int, gens: GeneratorSet | None = None) -> list:
    """Orbit sizes of the diagonal action on ordered pairs of points, ascending."""
    plane = build_projective_plane(l)
    gens = elementary_generators() if gens is None else gens
    perms = [permutation(g, plane) for g in gens.reduce(plane.l)]
    n = plane.size
    orbit_of = -np.ones((n, n), dtype=np.int64)
    sizes = []
    for s, t in itertools.product(range(n), repeat=2):
        if orbit_of[s, t] >= 0:
            continue
        label = len(sizes)
        orbit_of[s, t] = label
        stack, count = [(s, t)], 0
        while stack:
            a, b = stack.pop()
            count += 1
            for perm in perms:
                c, d = perm[a], perm[b]
                if orbit_of[c, d] < 0:
                    orbit_of[c, d] = label
                    stack.append((c, d))
        sizes.append(count)
    return sorted(sizes)


def group_to_json(elements: Iterable[GroupElement]) -> list:
    return [list(g.entries) for g in elements]


def group_from_json(data: list, l: int) -> list:
    return [GroupElement(tuple(e), l) for e in data]
