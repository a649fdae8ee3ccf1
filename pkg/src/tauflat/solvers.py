"""Riemannian Gauss-Newton for systems of matrix-word equations.

A word is a sequence of tokens; a token is either ``(slot, +1/-1)``
referring to a variable matrix, or a constant numpy array.  Each word w
contributes the residual ``w - I``.  Variables live in a compact matrix
group; steps are taken in the Lie algebra (right trivialisation,
x -> x (I + xi)) and pulled back with the polar projection.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .groups import GroupId, algebra_basis, project_array

Token = Union[tuple, np.ndarray]
Word = Sequence[Token]


def _token_matrix(tok: Token, mats: Sequence[np.ndarray]) -> np.ndarray:
    if isinstance(tok, np.ndarray):
        return tok
    slot, exp = tok
    return mats[slot] if exp > 0 else mats[slot].conj().T


def evaluate(word: Word, mats: Sequence[np.ndarray], size: int) -> np.ndarray:
    out = np.eye(size, dtype=complex)
    for tok in word:
        out = out @ _token_matrix(tok, mats)
    return out


@dataclass
class SolveResult:
    mats: list
    residual: float
    iterations: int
    converged: bool


class WordSystem:
    """Equations ``word(mats) = I`` in a fixed group, solved over ``free`` slots."""

    def __init__(self, group: GroupId, words: Sequence[Word], n_slots: int, free: Sequence[int] | None = None):
        self.group = group
        self.words = [list(w) for w in words]
        self.n_slots = n_slots
        self.free = list(range(n_slots)) if free is None else list(free)
        self._col = {s: k for k, s in enumerate(self.free)}
        self.N = group.size

    def residual_blocks(self, mats) -> list[np.ndarray]:
        eye = np.eye(self.N)
        return [evaluate(w, mats, self.N) - eye for w in self.words]

    def residual_vector(self, mats) -> np.ndarray:
        flat = np.concatenate([b.ravel() for b in self.residual_blocks(mats)])
        return np.concatenate([flat.real, flat.imag])

    def residual(self, mats) -> float:
        """Sum of Frobenius norms of the word residuals."""
        return float(sum(np.linalg.norm(b) for b in self.residual_blocks(mats)))

    def jacobian(self, mats) -> np.ndarray:
        B = algebra_basis(self.group)
        dim = B.shape[0]
        N2 = self.N * self.N
        J = np.zeros((len(self.words), N2, len(self.free) * dim), dtype=complex)
        for wi, word in enumerate(self.words):
            ms = [_token_matrix(t, mats) for t in word]
            L = [np.eye(self.N, dtype=complex)]
            for m in ms:
                L.append(L[-1] @ m)
            R = [np.eye(self.N, dtype=complex)]
            for m in reversed(ms):
                R.append(m @ R[-1])
            R = R[::-1]  # R[p] = product of ms[p:]
            for p, tok in enumerate(word):
                if isinstance(tok, np.ndarray) or tok[0] not in self._col:
                    continue
                slot, exp = tok
                if exp > 0:
                    left, right, sign = L[p + 1], R[p + 1], 1.0
                else:
                    left, right, sign = L[p], R[p], -1.0
                k = self._col[slot]
                d = sign * np.einsum("ij,bjk,kl->bil", left, B, right)
                J[wi, :, k * dim:(k + 1) * dim] += d.reshape(dim, N2).T
        J = J.reshape(len(self.words) * N2, -1)
        return np.concatenate([J.real, J.imag], axis=0)

    def step(self, mats, delta: np.ndarray) -> list:
        B = algebra_basis(self.group)
        dim = B.shape[0]
        out = list(mats)
        eye = np.eye(self.N)
        for k, s in enumerate(self.free):
            xi = np.einsum("b,bij->ij", delta[k * dim:(k + 1) * dim], B)
            out[s] = project_array(mats[s] @ (eye + xi), self.group)
        return out

    def solve(self, mats, tol: float, max_iter: int = 500, stall: int = 25) -> SolveResult:
        """Gauss-Newton with backtracking; stops early on stagnation."""
        mats = [np.asarray(m, dtype=complex) for m in mats]
        res = self.residual(mats)
        best = res
        since_best = 0
        it = 0
        for it in range(max_iter):
            if res < tol:
                return SolveResult(mats, res, it, True)
            r = self.residual_vector(mats)
            J = self.jacobian(mats)
            delta = -np.linalg.lstsq(J, r, rcond=None)[0]
            norm = np.linalg.norm(delta)
            if not np.isfinite(norm) or norm < 1e-15:
                break
            if norm > 1.0:
                delta = delta / norm
            alpha = 1.0
            cost = r @ r
            accepted = False
            for _ in range(12):
                cand = self.step(mats, alpha * delta)
                rc = self.residual_vector(cand)
                if rc @ rc < cost:
                    mats, accepted = cand, True
                    break
                alpha *= 0.5
            if not accepted:
                break
            res = self.residual(mats)
            if res < best * 0.999:
                best, since_best = res, 0
            else:
                since_best += 1
                if since_best >= stall:
                    break
        else:
            it = max_iter
        return SolveResult(mats, res, it, res < tol)
