"""Exhaustive ground truth over small finite groups.

Everything here is exact integer arithmetic on multiplication tables.  The
finite groups are not compact connected Lie groups, so only the group
theoretic skeleton of the degree/surjectivity arguments is checked, on the
orbits whose stabilizer is exactly the center.

K-orbits in the doubled model are keyed canonically: (e, c).x moves every
orbit into the slice c = e, where the residual freedom is diagonal
conjugation; the key is the lexicographically smallest conjugate of the
slice point.
"""
from __future__ import annotations

import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

from .errors import PreconditionViolation, SearchTooLarge
from .variety import SurfaceKind, SurfacePresentation

SEARCH_LIMIT = 10 ** 8
_CHUNK = 1 << 20


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    name: str
    table: np.ndarray
    inverse: np.ndarray
    center: tuple[int, ...]
    two_center: tuple[int, ...]
    sqrt_of_identity_in_center: tuple[int, ...]
    names: tuple[str, ...] = ()

    @property
    def order(self) -> int:
        return self.table.shape[0]

    @property
    def conj(self) -> np.ndarray:
        """conj[g, x] = g x g^{-1}."""
        T, inv = self.table, self.inverse
        return T[T[np.arange(self.order)[:, None], np.arange(self.order)[None, :]], inv[:, None]]

    def mul(self, *xs: int) -> int:
        out = 0
        for x in xs:
            out = int(self.table[out, x])
        return out

    def quotient_classes(self) -> list[tuple[int, ...]]:
        classes, seen = [], set()
        for z in self.center:
            if z in seen:
                continue
            coset = tuple(sorted({int(self.table[z, s]) for s in self.two_center}))
            seen.update(coset)
            classes.append(coset)
        return classes

    def class_of(self, z: int) -> int:
        for k, cls in enumerate(self.quotient_classes()):
            if z in cls:
                return k
        raise PreconditionViolation(f"{z} is not central in {self.name}")

    def label(self, i: int) -> str:
        return self.names[i] if self.names else str(i)


def from_elements(name: str, gens: Sequence, mul: Callable, key: Callable[[object], Hashable],
                  identity, namer: Callable | None = None) -> FiniteGroup:
    """Close a generating set under multiplication and build a verified table."""
    elems = {key(identity): identity}
    frontier = [identity]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = mul(x, g)
                k = key(y)
                if k not in elems:
                    elems[k] = y
                    nxt.append(y)
        frontier = nxt
    keys = [key(identity)] + sorted(k for k in elems if k != key(identity))
    index = {k: i for i, k in enumerate(keys)}
    table = np.array([[index[key(mul(elems[a], elems[b]))] for b in keys] for a in keys], dtype=np.int64)
    names = tuple(namer(elems[k]) for k in keys) if namer else ()
    return build_group(name, table, names)


def build_group(name: str, table: np.ndarray, names: Sequence[str] = ()) -> FiniteGroup:
    table = np.asarray(table, dtype=np.int64)
    n = table.shape[0]
    idx = np.arange(n)
    if not (np.array_equal(table[0], idx) and np.array_equal(table[:, 0], idx)):
        raise ValueError("element 0 must be the identity")
    # associativity, exhaustively
    if not np.array_equal(table[table[:, :, None], idx[None, None, :]],
                          table[idx[:, None, None], table[None, :, :]]):
        raise ValueError(f"{name}: table is not associative")
    inverse = np.argmax(table == 0, axis=1)
    if not np.all(table[idx, inverse] == 0):
        raise ValueError(f"{name}: missing inverses")
    center = tuple(int(g) for g in idx if np.array_equal(table[g], table[:, g]))
    two = tuple(sorted({int(table[z, z]) for z in center}))
    roots = tuple(z for z in center if table[z, z] == 0)
    table.setflags(write=False)
    inverse.setflags(write=False)
    return FiniteGroup(name, table, inverse, center, two, roots, tuple(names))


def _perm_mul(p, q):
    # apply q first, then p
    return tuple(p[i] for i in q)


def _cyclic(n: int, name: str) -> FiniteGroup:
    return from_elements(name, [1], lambda a, b: (a + b) % n, lambda a: a, 0, str)


_Q8_NAMES = {(1, 0, 0, 1): "1", (-1, 0, 0, -1): "-1", (1j, 0, 0, -1j): "i", (-1j, 0, 0, 1j): "-i",
             (0, 1, -1, 0): "j", (0, -1, 1, 0): "-j", (0, 1j, 1j, 0): "k", (0, -1j, -1j, 0): "-k"}


def _q8() -> FiniteGroup:
    i = np.array([[1j, 0], [0, -1j]])
    j = np.array([[0, 1], [-1, 0]], dtype=complex)

    def key(m):
        return tuple((int(round(z.real)), int(round(z.imag))) for z in m.ravel())

    def namer(m):
        return _Q8_NAMES[tuple(complex(round(z.real), round(z.imag)) for z in m.ravel())]

    return from_elements("Q8", [i, j], lambda a, b: a @ b, key, np.eye(2, dtype=complex), namer)


BUILTIN = ("Q8", "D4", "S3", "Z4", "Z3", "Z2xZ2")


def builtin_group(name: str) -> FiniteGroup:
    if name == "Q8":
        return _q8()
    if name == "D4":
        return from_elements("D4", [(1, 2, 3, 0), (0, 3, 2, 1)], _perm_mul, lambda p: p, (0, 1, 2, 3), str)
    if name == "S3":
        return from_elements("S3", [(1, 0, 2), (1, 2, 0)], _perm_mul, lambda p: p, (0, 1, 2), str)
    if name == "Z4":
        return _cyclic(4, "Z4")
    if name == "Z3":
        return _cyclic(3, "Z3")
    if name == "Z2xZ2":
        return from_elements("Z2xZ2", [(1, 0), (0, 1)], lambda a, b: ((a[0] + b[0]) % 2, (a[1] + b[1]) % 2),
                             lambda a: a, (0, 0), str)
    raise PreconditionViolation(f"unknown builtin group {name!r}; choose from {BUILTIN}")


# -------------------------------------------------------------- tuples


@dataclass(frozen=True)
class FiniteTuple:
    group: FiniteGroup = field(compare=False, hash=False, repr=False)
    surface: SurfacePresentation
    entries: tuple[int, ...]
    twist: int = 0

    def __post_init__(self):
        if len(self.entries) != self.surface.entry_count:
            raise PreconditionViolation("entry count does not match the surface")


def _grid(n: int, m: int, start: int, stop: int) -> np.ndarray:
    flat = np.arange(start, stop, dtype=np.int64)
    return np.stack(np.unravel_index(flat, (n,) * m), axis=1) if m else np.zeros((stop - start, 0), np.int64)


def _grid_chunks(n: int, m: int):
    total = n ** m
    for start in range(0, total, _CHUNK):
        yield _grid(n, m, start, min(total, start + _CHUNK))


def _comm_product(G: FiniteGroup, X: np.ndarray, ell: int, offset: int = 0) -> np.ndarray:
    T, inv = G.table, G.inverse
    out = np.zeros(X.shape[0], dtype=np.int64)
    for i in range(ell):
        a, b = X[:, offset + 2 * i], X[:, offset + 2 * i + 1]
        out = T[T[T[T[out, a], b], inv[a]], inv[b]]
    return out


def _nr_holds(G: FiniteGroup, surface: SurfacePresentation, X: np.ndarray, r: int) -> np.ndarray:
    T, inv = G.table, G.inverse
    ell = surface.ell
    lhs = _comm_product(G, X, ell)
    if surface.kind is SurfaceKind.RP2Sum:
        c = X[:, 2 * ell]
        rhs = T[T[c, c], r]
    elif surface.kind is SurfaceKind.KleinSum:
        d, c = X[:, 2 * ell], X[:, 2 * ell + 1]
        rhs = T[T[T[c, d], inv[c]], d]
    else:
        rhs = np.full(X.shape[0], r)
    return lhs == rhs


def _check_size(n: int, m: int):
    if n ** m > SEARCH_LIMIT:
        raise SearchTooLarge(f"{n}^{m} = {n ** m} candidates exceeds {SEARCH_LIMIT}")


def solution_array(G: FiniteGroup, surface: SurfacePresentation, r: int) -> np.ndarray:
    if r not in G.center:
        raise PreconditionViolation(f"twist {r} is not central in {G.name}")
    m = surface.entry_count
    _check_size(G.order, m)
    parts = [X[_nr_holds(G, surface, X, r)] for X in _grid_chunks(G.order, m)]
    return np.concatenate(parts) if parts else np.zeros((0, m), np.int64)


def enumerate_solutions(G: FiniteGroup, surface: SurfacePresentation, twist: int = 0) -> list[FiniteTuple]:
    """All tuples satisfying the twisted relation exactly, in lexicographic order."""
    X = solution_array(G, surface, twist)
    return [FiniteTuple(G, surface, tuple(int(v) for v in row), twist) for row in X]


# --------------------------------------------------------------- orbits


def _codes(X: np.ndarray, n: int) -> np.ndarray:
    weights = n ** np.arange(X.shape[1] - 1, -1, -1, dtype=np.int64)
    return X @ weights


def conjugation_keys(G: FiniteGroup, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Canonical conjugation-orbit code and stabilizer order for each row."""
    C = G.conj
    own = _codes(X, G.order)
    allc = np.stack([_codes(C[g][X], G.order) for g in range(G.order)])
    return allc.min(axis=0), (allc == own[None, :]).sum(axis=0)


def embed_array(G: FiniteGroup, surface: SurfacePresentation, X: np.ndarray, r: int) -> np.ndarray:
    """(V, c) -> (V, c, V, c r) row-wise."""
    minus = X.copy()
    minus[:, -1] = G.table[X[:, -1], r]
    return np.hstack([X, minus])


def slice_normalize(G: FiniteGroup, D: np.ndarray) -> np.ndarray:
    """Apply (e, c) to doubled rows so that c becomes the identity."""
    m = D.shape[1] // 2
    c = D[:, m - 1]
    cinv = G.inverse[c]
    T = G.table
    out = D.copy()
    out[:, m - 1] = 0
    out[:, m:2 * m - 1] = T[T[c[:, None], D[:, m:2 * m - 1]], cinv[:, None]]
    out[:, 2 * m - 1] = T[c, D[:, 2 * m - 1]]
    return out


def k_keys(G: FiniteGroup, D: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """K-orbit key and K-stabilizer order for doubled rows."""
    S = slice_normalize(G, D)
    return conjugation_keys(G, S)


def tau_array(D: np.ndarray) -> np.ndarray:
    m = D.shape[1] // 2
    return np.hstack([D[:, m:], D[:, :m]])


def doubled_holds(G: FiniteGroup, surface: SurfacePresentation, D: np.ndarray) -> np.ndarray:
    T, inv = G.table, G.inverse
    ell, m = surface.ell, surface.entry_count
    p1 = _comm_product(G, D, ell)
    p2 = _comm_product(G, D, ell, offset=m)
    if surface.kind is SurfaceKind.RP2Sum:
        c, cb = D[:, m - 1], D[:, 2 * m - 1]
        return (p1 == T[c, cb]) & (p2 == T[cb, c])
    d, c = D[:, m - 2], D[:, m - 1]
    db, cb = D[:, 2 * m - 2], D[:, 2 * m - 1]
    ok1 = p1 == T[T[T[c, db], inv[c]], d]
    ok2 = p2 == T[T[T[cb, d], inv[cb]], db]
    return ok1 & ok2


def slice_points(G: FiniteGroup, surface: SurfacePresentation) -> np.ndarray:
    """All points of the doubled variety M with c = e."""
    T, inv = G.table, G.inverse
    ell, m = surface.ell, surface.entry_count
    n = G.order
    free = 4 * ell + (2 if surface.kind is SurfaceKind.KleinSum else 0)
    _check_size(n, free)
    parts = []
    for F in _grid_chunks(n, free):
        D = np.zeros((F.shape[0], 2 * m), dtype=np.int64)
        if surface.kind is SurfaceKind.RP2Sum:
            D[:, :2 * ell] = F[:, :2 * ell]
            D[:, m:m + 2 * ell] = F[:, 2 * ell:]
            D[:, 2 * m - 1] = _comm_product(G, D, ell)  # cbar = prod [a, b] when c = e
        else:
            D[:, :2 * ell + 1] = F[:, :2 * ell + 1]  # V and d
            D[:, m:m + 2 * ell] = F[:, 2 * ell + 1:4 * ell + 1]
            D[:, 2 * m - 1] = F[:, 4 * ell + 1]  # cbar
            d = D[:, m - 2]
            D[:, 2 * m - 2] = T[_comm_product(G, D, ell), inv[d]]  # dbar = prod [a, b] d^{-1}
        parts.append(D[doubled_holds(G, surface, D)])
    return np.concatenate(parts)


def doubled_points(G: FiniteGroup, surface: SurfacePresentation, limit: int = 4_000_000) -> np.ndarray:
    """Every point of M, each exactly once.

    Points with c = c0 are (c0, e).S because the slice S is closed under
    diagonal conjugation, so M is the disjoint union of these translates.
    """
    S = slice_points(G, surface)
    if S.shape[0] * G.order > limit:
        raise SearchTooLarge(f"doubled variety has {S.shape[0] * G.order} points (limit {limit})")
    return np.concatenate([apply_action_array(G, c0, 0, S) for c0 in range(G.order)])


def apply_action_array(G: FiniteGroup, g1: int, g2: int, D: np.ndarray) -> np.ndarray:
    T, inv = G.table, G.inverse
    m = D.shape[1] // 2
    C = G.conj
    out = np.empty_like(D)
    out[:, :m - 1] = C[g1][D[:, :m - 1]]
    out[:, m - 1] = T[T[g1, D[:, m - 1]], inv[g2]]
    out[:, m:2 * m - 1] = C[g2][D[:, m:2 * m - 1]]
    out[:, 2 * m - 1] = T[T[g2, D[:, 2 * m - 1]], inv[g1]]
    return out


@dataclass
class Orbit:
    key: int
    members: list
    stabilizer_order: int
    orbit_size: int  # size of the full orbit in the ambient space


def orbit_decomposition(solutions: Sequence[FiniteTuple], action: str = "K_tau_diagonal") -> list[Orbit]:
    """Partition solutions into orbits, ordered by canonical key.

    K_full acts on the doubled embeddings (V, c, V, c r); K_tau_diagonal
    conjugates the one-basepoint tuples.
    """
    if not solutions:
        return []
    G = solutions[0].group
    X = np.array([s.entries for s in solutions], dtype=np.int64)
    if action == "K_full":
        D = np.vstack([embed_array(G, s.surface, X[i:i + 1], s.twist) for i, s in enumerate(solutions)])
        keys, stab = k_keys(G, D)
        ambient = G.order ** 2
    elif action == "K_tau_diagonal":
        keys, stab = conjugation_keys(G, X)
        ambient = G.order
    else:
        raise PreconditionViolation(f"unknown action {action!r}")
    groups = defaultdict(list)
    stabs = {}
    for s, k, st in zip(solutions, keys.tolist(), stab.tolist()):
        groups[k].append(s)
        stabs[k] = st
    return [Orbit(k, groups[k], stabs[k], ambient // stabs[k]) for k in sorted(groups)]


# ------------------------------------------------------------ fiber degree


@dataclass
class OracleReport:
    group: str
    surface: SurfacePresentation
    center: tuple[int, ...]
    quotient_order: int
    per_class: dict
    fixed_classes: int
    generic_fixed_classes: int
    uncovered_generic_fixed: int
    surjectivity_defect: list
    same_class_equal: bool
    generic_disjoint: bool
    degree_matches: bool
    predicted_degree: int = 0
    findings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"group": self.group, "surface": self.surface.to_dict(), "center": list(self.center),
                "quotient_order": self.quotient_order, "per_class": self.per_class,
                "fixed_classes": self.fixed_classes, "generic_fixed_classes": self.generic_fixed_classes,
                "uncovered_generic_fixed": self.uncovered_generic_fixed,
                "surjectivity_defect": self.surjectivity_defect,
                "same_class_equal": self.same_class_equal, "generic_disjoint": self.generic_disjoint,
                "degree_matches": self.degree_matches, "predicted_degree": self.predicted_degree,
                "findings": self.findings}


def exact_fiber_degree(G: FiniteGroup, surface: SurfacePresentation) -> OracleReport:
    """Fiber sizes of I over tau-fixed K-orbits, computed by exhaustion."""
    if surface.orientable:
        raise PreconditionViolation("exact_fiber_degree needs a nonorientable surface")
    zc = len(G.center)
    classes = G.quotient_classes()
    d = len(classes)

    # tau-fixed K-orbits of the whole doubled variety
    S = slice_points(G, surface)
    keys, stab = conjugation_keys(G, S)
    tkeys, _ = k_keys(G, tau_array(S))
    fixed = keys == tkeys
    fixed_keys = set(keys[fixed].tolist())
    generic_fixed = set(keys[fixed & (stab == zc)].tolist())

    # P(N_r) for each central r
    P: dict[int, set] = {}
    n_solutions: dict[int, int] = {}
    for r in G.center:
        X = solution_array(G, surface, r)
        n_solutions[r] = X.shape[0]
        P[r] = set(k_keys(G, embed_array(G, surface, X, r))[0].tolist()) if X.shape[0] else set()

    # fibers of I: conjugation classes of N_e grouped by their K-orbit image
    Xe = solution_array(G, surface, 0)
    ckeys, _ = conjugation_keys(G, Xe)
    images, _ = k_keys(G, embed_array(G, surface, Xe, 0))
    fiber = defaultdict(set)
    for ck, im in zip(ckeys.tolist(), images.tolist()):
        fiber[im].add(ck)

    findings = []
    per_class = {}
    PC = []
    for ci, cls in enumerate(classes):
        pc = set().union(*(P[r] for r in cls))
        PC.append(pc)
        gen = pc & generic_fixed
        hist = Counter(len(fiber.get(k, ())) for k in gen)
        label = "[" + G.label(cls[0]) + "]"
        per_class[label] = {
            "twists": [G.label(r) for r in cls],
            "solutions": sum(n_solutions[r] for r in cls),
            "orbits": len(pc),
            "generic_orbits": len(gen),
            "fiber_histogram": {str(k): v for k, v in sorted(hist.items())},
        }
        if not pc <= fixed_keys:
            findings.append(f"P({label}) contains classes that are not tau-fixed")

    same_class_equal = all(P[r1] == P[r2] for cls in classes for r1 in cls for r2 in cls)
    generic_disjoint = all(not (PC[i] & PC[j] & generic_fixed)
                           for i in range(d) for j in range(i + 1, d))
    covered = set().union(*PC) if PC else set()
    uncovered = generic_fixed - covered
    defect = generic_fixed - PC[0]
    e_hist = per_class["[" + G.label(classes[0][0]) + "]"]["fiber_histogram"]
    degree_matches = all(int(k) == d for k in e_hist)
    if uncovered:
        findings.append(f"{len(uncovered)} generic tau-fixed classes lie in no P([r])")
    for ci in range(1, d):
        if not PC[ci]:
            findings.append(f"N_r is empty for the class of {G.label(classes[ci][0])}: no square root of "
                            "the commutator product exists, unlike the connected case")
    return OracleReport(G.name, surface, G.center, d, per_class, len(fixed_keys), len(generic_fixed),
                        len(uncovered), sorted(defect), same_class_equal, generic_disjoint, degree_matches,
                        d, findings)


def check_tau_equivariance(G: FiniteGroup, surface: SurfacePresentation) -> bool:
    """tau(k.x) = tau(k).tau(x) for every k in K and every x in M."""
    D = doubled_points(G, surface).astype(np.uint8 if G.order <= 255 else np.int64)
    tD = tau_array(D)
    for g1, g2 in itertools.product(range(G.order), repeat=2):
        lhs = tau_array(apply_action_array(G, g1, g2, D))
        rhs = apply_action_array(G, g2, g1, tD)
        if not np.array_equal(lhs, rhs):
            return False
    return True
