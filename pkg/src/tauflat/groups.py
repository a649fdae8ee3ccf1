"""Compact matrix groups SU(n), SO(n), Sp(n): arithmetic, sampling and centers.

Sp(n) is realised as the 2n x 2n unitary matrices U with U^T J U = J, where
J = [[0, I], [-I, 0]].  Every matrix is stored as a complex numpy array, also
for SO(n), so that all modules share one code path.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .config import DEFAULT
from .errors import BranchCut, InvalidGroup, SingularProjection


class Family(str, enum.Enum):
    SU = "SU"
    SO = "SO"
    Sp = "Sp"

    @classmethod
    def parse(cls, name: str) -> "Family":
        for fam in cls:
            if fam.value.lower() == str(name).lower():
                return fam
        raise InvalidGroup(f"unknown group family {name!r}")


_MIN_RANK = {Family.SU: 2, Family.SO: 3, Family.Sp: 1}


@dataclass(frozen=True)
class GroupId:
    family: Family
    n: int

    def __post_init__(self):
        fam = self.family if isinstance(self.family, Family) else Family.parse(self.family)
        object.__setattr__(self, "family", fam)
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise InvalidGroup(f"rank must be an integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.n < _MIN_RANK[fam]:
            raise InvalidGroup(f"{fam.value}({self.n}) requires n >= {_MIN_RANK[fam]}")

    @classmethod
    def parse(cls, family: str, n) -> "GroupId":
        try:
            rank = int(n)
        except (TypeError, ValueError):
            raise InvalidGroup(f"rank must be an integer, got {n!r}") from None
        return cls(Family.parse(family), rank)

    @property
    def size(self) -> int:
        """Matrix dimension."""
        return 2 * self.n if self.family is Family.Sp else self.n

    @property
    def dim(self) -> int:
        """Real dimension of the Lie algebra."""
        n = self.n
        if self.family is Family.SU:
            return n * n - 1
        if self.family is Family.SO:
            return n * (n - 1) // 2
        return n * (2 * n + 1)

    def __str__(self) -> str:
        return f"{self.family.value}({self.n})"

    def to_dict(self) -> dict:
        return {"family": self.family.value, "n": self.n}

    @classmethod
    def from_dict(cls, d: dict) -> "GroupId":
        return cls.parse(d["family"], d["n"])


def SU(n: int) -> GroupId:
    return GroupId(Family.SU, n)


def SO(n: int) -> GroupId:
    return GroupId(Family.SO, n)


def Sp(n: int) -> GroupId:
    return GroupId(Family.Sp, n)


@dataclass(frozen=True, eq=False)
class GroupElement:
    group: GroupId
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.group.size, self.group.size):
            raise InvalidGroup(f"{self.group} expects a {self.group.size}x{self.group.size} matrix, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.group, self.matrix @ other.matrix)

    def inv(self) -> "GroupElement":
        return GroupElement(self.group, self.matrix.conj().T)

    def residual(self) -> float:
        return defining_residual(self.matrix, self.group)

    def to_dict(self) -> dict:
        return {"group": self.group.to_dict(), "matrix": matrix_to_json(self.matrix)}

    @classmethod
    def from_dict(cls, d: dict) -> "GroupElement":
        group = GroupId.from_dict(d["group"])
        return cls(group, matrix_from_json(d["matrix"], group.size))


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    group: GroupId
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def residual(self) -> float:
        return algebra_residual(self.matrix, self.group)


def matrix_to_json(m: np.ndarray) -> list:
    """Row-major list of [re, im] pairs."""
    return [[float(z.real), float(z.imag)] for z in np.asarray(m).ravel()]


def matrix_from_json(pairs: Sequence, size: int) -> np.ndarray:
    arr = np.array([complex(re, im) for re, im in pairs])
    if arr.size != size * size:
        raise InvalidGroup(f"expected {size * size} entries, got {arr.size}")
    return arr.reshape(size, size)


@lru_cache(maxsize=None)
def symplectic_form(n: int) -> np.ndarray:
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    J.setflags(write=False)
    return J


def identity(group: GroupId) -> GroupElement:
    return GroupElement(group, np.eye(group.size))


def defining_residual(m: np.ndarray, group: GroupId) -> float:
    """Frobenius residual of the defining equations (0 on the group)."""
    m = np.asarray(m)
    eye = np.eye(group.size)
    res = np.linalg.norm(m.conj().T @ m - eye)
    if group.family is Family.SU:
        res += abs(np.linalg.det(m) - 1.0)
    elif group.family is Family.SO:
        res += np.linalg.norm(m.imag) + abs(np.linalg.det(m) - 1.0)
    else:
        J = symplectic_form(group.n)
        res += np.linalg.norm(m.T @ J @ m - J)
    return float(res)


def in_group(m: np.ndarray, group: GroupId, tol: float = DEFAULT.group) -> bool:
    return defining_residual(m, group) < tol


def element(group: GroupId, matrix, tol: float = DEFAULT.group) -> GroupElement:
    """Construct a GroupElement, certifying the defining equations."""
    g = GroupElement(group, matrix)
    res = g.residual()
    if res >= tol:
        raise InvalidGroup(f"matrix is not in {group} (residual {res:.3e})")
    return g


# ---------------------------------------------------------------- Lie algebra


def _constraints(X: np.ndarray, group: GroupId) -> np.ndarray:
    parts = [X + X.conj().T]
    if group.family is Family.SU:
        parts.append(np.array([np.trace(X)]))
    elif group.family is Family.SO:
        parts.append(X.imag.astype(complex))
    else:
        J = symplectic_form(group.n)
        parts.append(X.T @ J + J @ X)
    flat = np.concatenate([p.ravel() for p in parts])
    return np.concatenate([flat.real, flat.imag])


@lru_cache(maxsize=None)
def algebra_basis(group: GroupId) -> np.ndarray:
    """Orthonormal real basis of the Lie algebra, shape (dim, N, N).

    Orthonormal for the real inner product Re tr(A^H B).
    """
    N = group.size
    cols = []
    for part in (1.0, 1j):
        for idx in range(N * N):
            E = np.zeros(N * N, dtype=complex)
            E[idx] = part
            cols.append(_constraints(E.reshape(N, N), group))
    C = np.array(cols).T
    null = sla.null_space(C)
    if null.shape[1] != group.dim:
        raise AssertionError(f"algebra of {group} has dimension {null.shape[1]}, expected {group.dim}")
    basis = (null[: N * N].T + 1j * null[N * N:].T).reshape(-1, N, N)
    basis.setflags(write=False)
    return basis


def algebra_coords(X: np.ndarray, group: GroupId) -> np.ndarray:
    B = algebra_basis(group)
    return np.real(np.einsum("kij,ij->k", B.conj(), X))


def algebra_from_coords(v: np.ndarray, group: GroupId) -> np.ndarray:
    return np.einsum("k,kij->ij", v, algebra_basis(group))


def project_to_algebra(X: np.ndarray, group: GroupId) -> np.ndarray:
    return algebra_from_coords(algebra_coords(X, group), group)


def algebra_residual(X: np.ndarray, group: GroupId) -> float:
    X = np.asarray(X)
    return float(np.linalg.norm(X - project_to_algebra(X, group)))


# -------------------------------------------------------------- sampling


def haar_sample(group: GroupId, seed=None) -> GroupElement:
    """Haar-distributed element; ``seed`` is an int or a numpy Generator."""
    rng = np.random.default_rng(seed)
    return GroupElement(group, _haar_matrix(group, rng))


def _haar_matrix(group: GroupId, rng: np.random.Generator) -> np.ndarray:
    n = group.n
    if group.family is Family.SO:
        Q, R = np.linalg.qr(rng.standard_normal((n, n)))
        Q = Q * np.sign(np.diag(R))
        if np.linalg.det(Q) < 0:
            Q[:, 0] = -Q[:, 0]
        return Q.astype(complex)
    if group.family is Family.SU:
        Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
        Q, R = np.linalg.qr(Z)
        d = np.diag(R)
        Q = Q * (d / np.abs(d))
        return Q / np.linalg.det(Q) ** (1.0 / n)
    # Sp(n): quaternionic Gram-Schmidt; the span of processed columns is
    # closed under v -> -J conj(v), so each partner is already orthogonal.
    J = symplectic_form(n)
    cols: list[np.ndarray] = []
    for _ in range(n):
        v = rng.standard_normal(2 * n) + 1j * rng.standard_normal(2 * n)
        for _ in range(2):
            for u in cols:
                v = v - u * (u.conj() @ v)
        v = v / np.linalg.norm(v)
        cols.extend([v, -J @ v.conj()])
    U = np.empty((2 * n, 2 * n), dtype=complex)
    U[:, :n] = np.array(cols[0::2]).T
    U[:, n:] = np.array(cols[1::2]).T
    return U


def project_array(m: np.ndarray, group: GroupId) -> np.ndarray:
    """Nearest-point projection (polar factor) followed by a determinant fix."""
    m = np.asarray(m, dtype=complex)
    if group.family is Family.SO:
        m = m.real.astype(complex)
    elif group.family is Family.Sp:
        J = symplectic_form(group.n)
        m = 0.5 * (m + J.T @ m.conj() @ J)
    W, s, Vh = np.linalg.svd(m)
    if s[-1] <= 1e-12 * max(1.0, s[0]):
        raise SingularProjection(f"polar factor is rank deficient (smallest singular value {s[-1]:.2e})")
    U = W @ Vh
    if group.family is Family.SU:
        det = np.linalg.det(U)
        U[:, 0] *= np.conj(det) / abs(det)
    elif group.family is Family.SO:
        U = U.real.astype(complex)
        if np.linalg.det(U.real) < 0:
            U[:, 0] = -U[:, 0]
    return U


def project_to_group(matrix, group: GroupId) -> GroupElement:
    return GroupElement(group, project_array(np.asarray(matrix), group))


def normalize_scalar(m: np.ndarray, group: GroupId) -> np.ndarray:
    """Strip an unknown nonzero scalar from a multiple of a group element.

    The result agrees with the group element up to a central factor.
    """
    m = np.asarray(m, dtype=complex)
    N = group.size
    if group.family is Family.SO:
        m = m.real.astype(complex)
        det = np.linalg.det(m.real)
        if det < 0 and N % 2:
            m, det = -m, -det
        return m / abs(det) ** (1.0 / N) if det != 0 else m
    if group.family is Family.Sp:
        J = symplectic_form(group.n)
        k = int(np.argmax(np.abs(m)))
        ratio = m.ravel()[k] / (J.T @ m.conj() @ J).ravel()[k]
        m = m / np.sqrt(ratio)
    det = np.linalg.det(m)
    if det == 0:
        return m
    if group.family is Family.SU:
        return m / det ** (1.0 / N)
    return m / abs(det) ** (1.0 / N)


# -------------------------------------------------------------- arithmetic


def commutator(a: GroupElement, b: GroupElement) -> GroupElement:
    """aba^{-1}b^{-1}."""
    if a.group != b.group:
        raise InvalidGroup("commutator of elements from different groups")
    A, B = a.matrix, b.matrix
    return GroupElement(a.group, A @ B @ A.conj().T @ B.conj().T)


def _eig_unitary(x: np.ndarray):
    T, Q = sla.schur(x, output="complex")
    return np.diag(T), Q


def _log_angles(x: np.ndarray, group: GroupId, branch_tol: float):
    lam, Q = _eig_unitary(x)
    theta = np.angle(lam)
    worst = np.min(np.pi - np.abs(theta))
    if worst < branch_tol:
        raise BranchCut(f"eigenvalue within {worst:.2e} rad of -1")
    if group.family is Family.SU:
        k = int(np.rint(theta.sum() / (2 * np.pi)))
        if k:
            # traceless branch: shift the extreme angle by a full turn
            j = int(np.argmax(theta)) if k > 0 else int(np.argmin(theta))
            theta = theta.copy()
            theta[j] -= 2 * np.pi * k
    return theta, Q


def _finish(m: np.ndarray, group: GroupId) -> np.ndarray:
    if group.family is Family.SO:
        return m.real.astype(complex)
    return m


def group_log(x: GroupElement, branch_tol: float = DEFAULT.branch) -> AlgebraElement:
    """Matrix logarithm with exp(log x) = x.

    This is the principal logarithm, except in SU(n) when the principal
    angles do not sum to zero: one extreme angle is then shifted by a full
    turn so the result is traceless.
    """
    theta, Q = _log_angles(x.matrix, x.group, branch_tol)
    X = (Q * (1j * theta)) @ Q.conj().T
    X = project_to_algebra(_finish(X, x.group), x.group)
    return AlgebraElement(x.group, X)


def group_exp(X) -> GroupElement:
    if isinstance(X, AlgebraElement):
        return GroupElement(X.group, _finish(sla.expm(X.matrix), X.group))
    raise TypeError("group_exp expects an AlgebraElement")


def exp_array(X: np.ndarray) -> np.ndarray:
    return sla.expm(X)


def principal_square_root(w: GroupElement, branch_tol: float = DEFAULT.branch) -> GroupElement:
    """c with c^2 = w, equal to exp(log(w)/2) for the logarithm above."""
    theta, Q = _log_angles(w.matrix, w.group, branch_tol)
    c = (Q * np.exp(0.5j * theta)) @ Q.conj().T
    return GroupElement(w.group, _finish(c, w.group))


def sqrt_array(w: np.ndarray, group: GroupId, branch_tol: float = DEFAULT.branch) -> np.ndarray:
    return principal_square_root(GroupElement(group, w), branch_tol).matrix


# -------------------------------------------------------------- centers


@dataclass(frozen=True, eq=False)
class CenterTable:
    group: GroupId
    elements: tuple[GroupElement, ...]
    squares: tuple[bool, ...]
    quotient_classes: tuple[tuple[int, ...], ...]
    sqrt_of_identity: tuple[int, ...]

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def two_center(self) -> tuple[int, ...]:
        return tuple(i for i, sq in enumerate(self.squares) if sq)

    @property
    def quotient_order(self) -> int:
        return len(self.quotient_classes)

    def nearest(self, m: np.ndarray) -> tuple[int, float]:
        """Index of the closest central element and its Frobenius distance."""
        dists = [float(np.linalg.norm(np.asarray(m) - z.matrix)) for z in self.elements]
        i = int(np.argmin(dists))
        return i, dists[i]

    def index_of(self, m, tol: float = DEFAULT.center) -> int:
        mat = m.matrix if isinstance(m, GroupElement) else m
        i, d = self.nearest(mat)
        if d >= tol:
            raise KeyError(f"matrix is not central (distance {d:.2e})")
        return i

    def class_index(self, element_index: int) -> int:
        for k, cls in enumerate(self.quotient_classes):
            if element_index in cls:
                return k
        raise KeyError(element_index)

    def quotient_class(self, element_index: int) -> "CenterQuotientClass":
        return CenterQuotientClass(self, self.class_index(element_index))

    def label(self, element_index: int) -> str:
        return _center_label(self.group, element_index)


def _center_label(group: GroupId, k: int) -> str:
    if k == 0:
        return "e"
    if group.family is Family.SU and group.n > 2:
        return f"zeta^{k}"
    return "-e"


@dataclass(frozen=True, eq=False)
class CenterQuotientClass:
    table: CenterTable
    class_index: int

    def __post_init__(self):
        if not 0 <= self.class_index < self.table.quotient_order:
            raise ValueError(f"class index {self.class_index} out of range")

    def __eq__(self, other):
        if not isinstance(other, CenterQuotientClass):
            return NotImplemented
        return self.table.group == other.table.group and self.class_index == other.class_index

    def __hash__(self):
        return hash((self.table.group, self.class_index))

    @property
    def representative(self) -> int:
        return self.table.quotient_classes[self.class_index][0]

    @property
    def is_trivial(self) -> bool:
        return self.class_index == 0

    def __repr__(self) -> str:
        return f"[{self.table.label(self.representative)}]"


def _center_matrices(group: GroupId) -> list[np.ndarray]:
    N = group.size
    if group.family is Family.SU:
        zeta = np.exp(2j * np.pi / N)
        return [zeta ** k * np.eye(N) for k in range(N)]
    if group.family is Family.SO and group.n % 2 == 1:
        return [np.eye(N, dtype=complex)]
    return [np.eye(N, dtype=complex), -np.eye(N, dtype=complex)]


@lru_cache(maxsize=None)
def center_table(group: GroupId) -> CenterTable:
    mats = _center_matrices(group)
    elems = tuple(GroupElement(group, m) for m in mats)

    def find(m):
        for i, z in enumerate(mats):
            if np.linalg.norm(m - z) < 1e-9:
                return i
        raise AssertionError("center is not closed under products")

    square_of = [find(z @ z) for z in mats]
    mult = [[find(a @ b) for b in mats] for a in mats]
    return _finite_abelian_table(group, elems, square_of, mult)


def _finite_abelian_table(group, elems, square_of, mult) -> CenterTable:
    order = len(elems)
    two = sorted(set(square_of))
    squares = tuple(i in two for i in range(order))
    classes: list[tuple[int, ...]] = []
    seen: set[int] = set()
    for i in range(order):
        if i in seen:
            continue
        coset = tuple(sorted({mult[i][s] for s in two}))
        seen.update(coset)
        classes.append(coset)
    roots = tuple(i for i in range(order) if square_of[i] == 0)
    return CenterTable(group, elems, squares, tuple(classes), roots)


@dataclass(frozen=True)
class AbstractCenterSummary:
    """Center data of an abstract finite abelian group (+) Z/n_i."""

    invariant_factors: tuple[int, ...]
    elements: tuple[tuple[int, ...], ...]
    two_center: tuple[tuple[int, ...], ...]
    quotient_classes: tuple[tuple[tuple[int, ...], ...], ...]
    sqrt_of_identity: tuple[tuple[int, ...], ...]

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def quotient_order(self) -> int:
        return len(self.quotient_classes)

    @property
    def kernel_size(self) -> int:
        return len(self.sqrt_of_identity)


def abstract_center_quotient(invariant_factors: Sequence[int]) -> AbstractCenterSummary:
    factors = tuple(int(f) for f in invariant_factors)
    if not factors or any(f < 2 for f in factors):
        raise ValueError("invariant factors must be a nonempty list of integers >= 2")
    elems = tuple(itertools.product(*(range(f) for f in factors)))

    def add(x, y):
        return tuple((a + b) % f for a, b, f in zip(x, y, factors))

    zero = tuple(0 for _ in factors)
    two = tuple(sorted({add(x, x) for x in elems}))
    classes, seen = [], set()
    for x in elems:
        if x in seen:
            continue
        coset = tuple(sorted({add(x, s) for s in two}))
        seen.update(coset)
        classes.append(coset)
    roots = tuple(x for x in elems if add(x, x) == zero)
    return AbstractCenterSummary(factors, elems, two, tuple(classes), roots)
