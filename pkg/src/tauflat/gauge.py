"""Gauge actions, conjugation invariants, orbit alignment and stabilizers.

Alignment is two-tier.  Word-trace invariants give a certificate of
non-equivalence; if they agree, a Riemannian Gauss-Newton search looks for
an explicit witness.  A failed search is evidence, not proof.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg as sla

from .config import DEFAULT, Tolerances
from .errors import PreconditionViolation, SingularProjection
from .groups import (Family, GroupElement, GroupId, algebra_basis, haar_sample, normalize_scalar,
                     project_array)
from .seeding import rng_for
from .solvers import WordSystem
from .variety import DoubledTuple, NTuple

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GaugePair:
    g1: GroupElement
    g2: GroupElement

    def __post_init__(self):
        if self.g1.group != self.g2.group:
            raise PreconditionViolation("gauge pair entries must share a group")

    def __matmul__(self, other: "GaugePair") -> "GaugePair":
        return GaugePair(self.g1 @ other.g1, self.g2 @ other.g2)

    def to_dict(self) -> dict:
        return {"g1": self.g1.to_dict(), "g2": self.g2.to_dict()}


@dataclass(frozen=True, eq=False)
class AlignmentResult:
    found: bool
    witness: Union[GaugePair, GroupElement, None]
    residual: float
    starts_used: int
    method: str = "optimize"  # or "invariant-reject"

    def to_dict(self) -> dict:
        w = self.witness.to_dict() if self.witness is not None else None
        return {"found": self.found, "witness": w, "residual": self.residual,
                "starts_used": self.starts_used, "method": self.method}


def _conj(g: np.ndarray, x: np.ndarray) -> np.ndarray:
    return g @ x @ g.conj().T


def apply_action(k: GaugePair, x: DoubledTuple) -> DoubledTuple:
    """(g1, g2).(V, c, Vbar, cbar) = (g1 V g1^-1, g1 c g2^-1, g2 Vbar g2^-1, g2 cbar g1^-1)."""
    if k.g1.group != x.group:
        raise PreconditionViolation("gauge pair and tuple live in different groups")
    g1, g2 = k.g1.matrix, k.g2.matrix
    plus = [_conj(g1, v.matrix) for v in x.plus[:-1]] + [g1 @ x.plus[-1].matrix @ g2.conj().T]
    minus = [_conj(g2, v.matrix) for v in x.minus[:-1]] + [g2 @ x.minus[-1].matrix @ g1.conj().T]
    return DoubledTuple(x.surface, x.group, tuple(plus), tuple(minus))


def apply_diagonal_action(g: GroupElement, x: NTuple) -> NTuple:
    if g.group != x.group:
        raise PreconditionViolation("conjugating element and tuple live in different groups")
    return x.replace(entries=[_conj(g.matrix, e.matrix) for e in x.entries])


def based_loops(x: DoubledTuple) -> list[np.ndarray]:
    """Loops at P+: V, c Vbar c^{-1} and c cbar.

    The K-action acts on these by conjugation with g1, so their invariants
    are K-invariants of the doubled tuple.
    """
    c, cb = x.plus[-1].matrix, x.minus[-1].matrix
    out = [v.matrix for v in x.plus[:-1]]
    out += [c @ v.matrix @ c.conj().T for v in x.minus[:-1]]
    out.append(c @ cb)
    return out


def _generators(x) -> list[np.ndarray]:
    if isinstance(x, DoubledTuple):
        return based_loops(x)
    if isinstance(x, NTuple):
        return x.mats
    return [e.matrix if isinstance(e, GroupElement) else np.asarray(e) for e in x]


def word_trace_invariants(x, max_word_length: int = 3) -> np.ndarray:
    """Traces of all reduced words in the entries and their inverses.

    Words are enumerated by length, then lexicographically in the letter
    order (x1, x1^-1, x2, x2^-1, ...).  Doubled tuples are reduced to their
    loops at P+ first.
    """
    if max_word_length > 6:
        raise PreconditionViolation("max_word_length must be <= 6")
    gens = _generators(x)
    letters = []
    for g in gens:
        letters += [g, g.conj().T]
    frontier = [((), np.eye(gens[0].shape[0], dtype=complex))]
    traces = []
    for _ in range(max_word_length):
        nxt = []
        for word, mat in frontier:
            for li, m in enumerate(letters):
                if word and word[-1] == li ^ 1:
                    continue
                prod = mat @ m
                nxt.append((word + (li,), prod))
                traces.append(np.trace(prod))
        frontier = nxt
    return np.array(traces)


def invariant_distance(x, y, max_word_length: int = 3) -> float:
    a = word_trace_invariants(x, max_word_length)
    b = word_trace_invariants(y, max_word_length)
    return float(np.max(np.abs(a - b)))


# ------------------------------------------------------------- alignment


def _real_vec(blocks: Sequence[np.ndarray]) -> np.ndarray:
    flat = np.concatenate([b.ravel() for b in blocks])
    return np.concatenate([flat.real, flat.imag])


def linear_intertwiner(xs: Sequence[np.ndarray], ys: Sequence[np.ndarray], group: GroupId) -> np.ndarray:
    """Least-singular solution g of g x_i = y_i g, normalised into the group.

    The equations are linear in g; for an irreducible tuple the solution
    space is spanned by the conjugating element, so this is an exact start
    for the descent rather than a random one.
    """
    N = group.size
    real = group.family is Family.SO
    units = [1.0] if real else [1.0, 1j]
    cols = []
    for u in units:
        for idx in range(N * N):
            E = np.zeros(N * N, dtype=complex)
            E[idx] = u
            E = E.reshape(N, N)
            cols.append(_real_vec([E @ x - y @ E for x, y in zip(xs, ys)]))
    A = np.array(cols).T
    _, _, Vh = np.linalg.svd(A, full_matrices=False)
    v = Vh[-1]
    g = v[: N * N].reshape(N, N).astype(complex)
    if not real:
        g = g + 1j * v[N * N:].reshape(N, N)
    try:
        return project_array(normalize_scalar(g, group), group)
    except SingularProjection:
        # degenerate tuples have a large kernel; any start will do
        return np.eye(N, dtype=complex)


def _conjugation_system(xs, ys, group) -> WordSystem:
    words = [[(0, 1), x, (0, -1), y.conj().T] for x, y in zip(xs, ys)]
    return WordSystem(group, words, 1)


def _stacked_norm(blocks) -> float:
    return float(np.sqrt(sum(np.linalg.norm(b) ** 2 for b in blocks)))


def align_conjugation(x: NTuple, y: NTuple, seed=None, starts: int = 20,
                      tol: Tolerances = DEFAULT, quick_reject: bool = True,
                      max_word_length: int = 3) -> AlignmentResult:
    """Search g with g x g^{-1} = y entrywise.

    Residual is the Frobenius norm of the stacked entry differences.
    """
    if x.surface != y.surface or x.group != y.group or x.twist != y.twist:
        raise PreconditionViolation("align_conjugation needs equal surface, group and twist")
    if quick_reject:
        dist = invariant_distance(x, y, max_word_length)
        if dist > 10 * tol.align:
            return AlignmentResult(False, None, dist, 0, "invariant-reject")
    return _align(x.mats, y.mats, x.group, seed, starts, tol)


def _align(xs, ys, group, seed, starts, tol: Tolerances) -> AlignmentResult:
    system = _conjugation_system(xs, ys, group)
    best = (np.inf, None)
    for k in range(starts):
        g0 = linear_intertwiner(xs, ys, group) if k == 0 else haar_sample(group, rng_for(seed, k)).matrix
        out = system.solve([g0], tol=tol.align_polish * 1e-2, max_iter=200)
        g = out.mats[0]
        res = _stacked_norm([_conj(g, a) - b for a, b in zip(xs, ys)])
        if res < best[0]:
            best = (res, g)
        if res < tol.align_polish:
            break
    res, g = best
    found = res < tol.align
    if not found:
        log.debug("alignment search failed (residual %.2e); not a proof of inequivalence", res)
    return AlignmentResult(found, GroupElement(group, g), float(res), k + 1)


def action_residual(k: GaugePair, x: DoubledTuple, y: DoubledTuple) -> float:
    kx = apply_action(k, x)
    return _stacked_norm([a.matrix - b.matrix for a, b in zip(kx.plus + kx.minus, y.plus + y.minus)])


def _two_point_system(x: DoubledTuple, y: DoubledTuple) -> WordSystem:
    words = []
    for v, w in zip(x.plus[:-1], y.plus[:-1]):
        words.append([(0, 1), v.matrix, (0, -1), w.matrix.conj().T])
    words.append([(0, 1), x.plus[-1].matrix, (1, -1), y.plus[-1].matrix.conj().T])
    for v, w in zip(x.minus[:-1], y.minus[:-1]):
        words.append([(1, 1), v.matrix, (1, -1), w.matrix.conj().T])
    words.append([(1, 1), x.minus[-1].matrix, (0, -1), y.minus[-1].matrix.conj().T])
    return WordSystem(x.group, words, 2)


def align_two_basepoint(x: DoubledTuple, y: DoubledTuple, seed=None, starts: int = 20,
                        tol: Tolerances = DEFAULT, quick_reject: bool = True,
                        max_word_length: int = 3) -> AlignmentResult:
    """Search k = (g1, g2) with k . x = y."""
    if x.surface != y.surface or x.group != y.group:
        raise PreconditionViolation("align_two_basepoint needs equal surface and group")
    if quick_reject:
        dist = invariant_distance(x, y, max_word_length)
        if dist > 10 * tol.align:
            return AlignmentResult(False, None, dist, 0, "invariant-reject")
    group = x.group
    system = _two_point_system(x, y)
    cx, cy = x.plus[-1].matrix, y.plus[-1].matrix
    best = (np.inf, None)
    for k in range(starts):
        if k == 0:
            # g1 conjugates the loops at P+; then g2 = c_y^{-1} g1 c_x
            g1 = linear_intertwiner(based_loops(x), based_loops(y), group)
            g2 = cy.conj().T @ g1 @ cx
        else:
            rng = rng_for(seed, k)
            g1, g2 = haar_sample(group, rng).matrix, haar_sample(group, rng).matrix
        out = system.solve([g1, g2], tol=tol.align_polish * 1e-2, max_iter=200)
        pair = GaugePair(GroupElement(group, out.mats[0]), GroupElement(group, out.mats[1]))
        res = action_residual(pair, x, y)
        if res < best[0]:
            best = (res, pair)
        if res < tol.align_polish:
            break
    res, pair = best
    return AlignmentResult(res < tol.align, pair, float(res), k + 1)


# ------------------------------------------------------------ stabilizers


def _ad_minus_id(X: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Columns: xi_k -> X xi_k X^{-1} - xi_k, as real vectors."""
    d = np.einsum("ij,bjk,lk->bil", X, B, X.conj()) - B
    flat = d.reshape(B.shape[0], -1).T
    return np.concatenate([flat.real, flat.imag], axis=0)


def stabilizer_dimension(x, sigma_tol: float = DEFAULT.sigma) -> int:
    """Dimension of the Lie algebra of the stabilizer (linearised test).

    NTuple or a plain sequence of elements: the centraliser of all entries.
    DoubledTuple: pairs (xi1, xi2) fixed by the K-action to first order.
    """
    if isinstance(x, DoubledTuple):
        group = x.group
        B = algebra_basis(group)
        dim = B.shape[0]
        blocks = []
        zero = np.zeros((2 * group.size ** 2, dim))
        for v in x.plus[:-1]:
            blocks.append(np.hstack([_ad_minus_id(v.matrix, B), zero]))
        for v in x.minus[:-1]:
            blocks.append(np.hstack([zero, _ad_minus_id(v.matrix, B)]))
        c, cb = x.plus[-1].matrix, x.minus[-1].matrix
        # g1 c g2^{-1} = c  <=>  c^{-1} xi1 c - xi2 = 0
        blocks.append(np.hstack([_ad_minus_id(c.conj().T, B) + _flat(B), -_flat(B)]))
        blocks.append(np.hstack([-_flat(B), _ad_minus_id(cb.conj().T, B) + _flat(B)]))
        A = np.vstack(blocks)
        total = 2 * dim
    else:
        mats = _generators(x)
        group = x.group if isinstance(x, NTuple) else x[0].group
        B = algebra_basis(group)
        A = np.vstack([_ad_minus_id(m, B) for m in mats])
        total = B.shape[0]
    s = sla.svdvals(A)
    return int(total - np.sum(s > sigma_tol))


def _flat(B: np.ndarray) -> np.ndarray:
    flat = B.reshape(B.shape[0], -1).T
    return np.concatenate([flat.real, flat.imag], axis=0)


def is_generic(x, sigma_tol: float = DEFAULT.sigma) -> bool:
    """Zero-dimensional stabilizer.

    A numerical proxy for "stabilizer equals the center": finite non-central
    stabilizers are not detected.
    """
    return stabilizer_dimension(x, sigma_tol) == 0


def random_gauge(group: GroupId, seed=None) -> GaugePair:
    rng = rng_for(seed)
    return GaugePair(haar_sample(group, rng), haar_sample(group, rng))
