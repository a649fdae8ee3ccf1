"""Surface presentations, holonomy tuples and points on the relation varieties.

One-basepoint tuples (``NTuple``) carry a central twist r and satisfy

* RP2 sum:      prod [a_i, b_i] = c^2 r
* Klein sum:    prod [a_i, b_i] = c d c^{-1} d
* orientable:   prod [a_i, b_i] = r

Two-basepoint tuples (``DoubledTuple``) satisfy, for the RP2 sum,
prod [a_i, b_i] = c cbar and prod [abar_i, bbar_i] = cbar c, and for the
Klein sum prod [a_i, b_i] = c dbar c^{-1} d and
prod [abar_i, bbar_i] = cbar d cbar^{-1} dbar.  Commutators are
[a, b] = a b a^{-1} b^{-1}; products run over i = 1..l left to right.

For the Klein sum the doubled relations do not see r once the minus block is
(V, c r), so the one-basepoint Klein relation is the same for every twist;
the twist only enters through the embedding.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import DEFAULT
from .errors import (AlreadyOrientable, BranchCut, InvalidSurface, NoConvergence, OffVariety,
                     PreconditionViolation, SamplingExhausted)
from .groups import (GroupElement, GroupId, center_table, commutator, haar_sample, identity,
                     principal_square_root)
from .seeding import rng_for
from .solvers import WordSystem, evaluate


class SurfaceKind(str, enum.Enum):
    RP2Sum = "RP2Sum"
    KleinSum = "KleinSum"
    Orientable = "Orientable"

    @classmethod
    def parse(cls, name: str) -> "SurfaceKind":
        key = str(name).lower()
        aliases = {"rp2": cls.RP2Sum, "rp2sum": cls.RP2Sum, "klein": cls.KleinSum,
                   "kleinsum": cls.KleinSum, "orientable": cls.Orientable, "genus": cls.Orientable}
        if key not in aliases:
            raise InvalidSurface(f"unknown surface kind {name!r}")
        return aliases[key]


@dataclass(frozen=True)
class SurfacePresentation:
    kind: SurfaceKind
    ell: int

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, SurfaceKind) else SurfaceKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        if isinstance(self.ell, bool) or int(self.ell) != self.ell:
            raise InvalidSurface(f"ell must be an integer, got {self.ell!r}")
        object.__setattr__(self, "ell", int(self.ell))
        low = 1 if kind is SurfaceKind.Orientable else 0
        if self.ell < low:
            raise InvalidSurface(f"{kind.value} requires ell >= {low}")

    @property
    def orientable(self) -> bool:
        return self.kind is SurfaceKind.Orientable

    @property
    def entry_count(self) -> int:
        return {SurfaceKind.RP2Sum: 2 * self.ell + 1,
                SurfaceKind.KleinSum: 2 * self.ell + 2,
                SurfaceKind.Orientable: 2 * self.ell}[self.kind]

    @property
    def entry_names(self) -> list[str]:
        names = [f"{x}{i}" for i in range(1, self.ell + 1) for x in "ab"]
        if self.kind is SurfaceKind.KleinSum:
            names.append("d")
        if not self.orientable:
            names.append("c")
        return names

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "ell": self.ell}

    @classmethod
    def from_dict(cls, d: dict) -> "SurfacePresentation":
        return cls(SurfaceKind.parse(d["kind"]), d["ell"])

    def __str__(self) -> str:
        if self.orientable:
            return f"Sigma_{self.ell}"
        return f"Sigma_{self.ell}#{'RP2' if self.kind is SurfaceKind.RP2Sum else 'Klein'}"


def RP2(ell: int) -> SurfacePresentation:
    return SurfacePresentation(SurfaceKind.RP2Sum, ell)


def Klein(ell: int) -> SurfacePresentation:
    return SurfacePresentation(SurfaceKind.KleinSum, ell)


def Orientable(genus: int) -> SurfacePresentation:
    return SurfacePresentation(SurfaceKind.Orientable, genus)


def double_cover(surface: SurfacePresentation) -> SurfacePresentation:
    if surface.orientable:
        raise AlreadyOrientable(f"{surface} is already orientable")
    if surface.kind is SurfaceKind.RP2Sum:
        return Orientable(2 * surface.ell)
    return Orientable(2 * surface.ell + 1)


# ------------------------------------------------------------------ tuples


def _as_elements(group: GroupId, entries) -> tuple[GroupElement, ...]:
    return tuple(e if isinstance(e, GroupElement) else GroupElement(group, e) for e in entries)


@dataclass(frozen=True, eq=False)
class NTuple:
    surface: SurfacePresentation
    group: GroupId
    entries: tuple[GroupElement, ...]
    twist: int = 0  # index into center_table(group)

    def __post_init__(self):
        ents = _as_elements(self.group, self.entries)
        if len(ents) != self.surface.entry_count:
            raise InvalidSurface(f"{self.surface} needs {self.surface.entry_count} entries, got {len(ents)}")
        if not 0 <= self.twist < center_table(self.group).order:
            raise PreconditionViolation(f"twist index {self.twist} not in the center of {self.group}")
        object.__setattr__(self, "entries", ents)

    @property
    def mats(self) -> list[np.ndarray]:
        return [e.matrix for e in self.entries]

    @property
    def twist_element(self) -> GroupElement:
        return center_table(self.group).elements[self.twist]

    @property
    def V(self) -> tuple[GroupElement, ...]:
        return self.entries[:-1] if not self.surface.orientable else self.entries

    @property
    def c(self) -> GroupElement:
        if self.surface.orientable:
            raise AttributeError("orientable tuples have no c entry")
        return self.entries[-1]

    def replace(self, entries=None, twist=None) -> "NTuple":
        return NTuple(self.surface, self.group,
                      self.entries if entries is None else tuple(entries),
                      self.twist if twist is None else twist)

    def to_dict(self) -> dict:
        return {"surface": self.surface.to_dict(), "twist_index": self.twist,
                "entries": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, d: dict) -> "NTuple":
        entries = [GroupElement.from_dict(e) for e in d["entries"]]
        if not entries:
            raise InvalidSurface("tuple has no entries")
        return cls(SurfacePresentation.from_dict(d["surface"]), entries[0].group, tuple(entries),
                   int(d.get("twist_index", 0)))


@dataclass(frozen=True, eq=False)
class DoubledTuple:
    """(V, c, Vbar, cbar): the plus block is based at P+, the minus block at P-."""

    surface: SurfacePresentation
    group: GroupId
    plus: tuple[GroupElement, ...]
    minus: tuple[GroupElement, ...]

    def __post_init__(self):
        if self.surface.orientable:
            raise InvalidSurface("doubled tuples model nonorientable surfaces only")
        plus = _as_elements(self.group, self.plus)
        minus = _as_elements(self.group, self.minus)
        n = self.surface.entry_count
        if len(plus) != n or len(minus) != n:
            raise InvalidSurface(f"each block of a {self.surface} doubled tuple needs {n} entries")
        object.__setattr__(self, "plus", plus)
        object.__setattr__(self, "minus", minus)

    @property
    def mats(self) -> list[np.ndarray]:
        return [e.matrix for e in self.plus + self.minus]

    def to_dict(self) -> dict:
        return {"surface": self.surface.to_dict(),
                "plus": [e.to_dict() for e in self.plus],
                "minus": [e.to_dict() for e in self.minus]}

    @classmethod
    def from_dict(cls, d: dict) -> "DoubledTuple":
        plus = [GroupElement.from_dict(e) for e in d["plus"]]
        minus = [GroupElement.from_dict(e) for e in d["minus"]]
        return cls(SurfacePresentation.from_dict(d["surface"]), plus[0].group, tuple(plus), tuple(minus))


def max_entry_distance(xs: Sequence[GroupElement], ys: Sequence[GroupElement]) -> float:
    return max(float(np.linalg.norm(x.matrix - y.matrix)) for x, y in zip(xs, ys))


# -------------------------------------------------------------- relations


def _commutator_tokens(ell: int, offset: int = 0) -> list:
    toks = []
    for i in range(ell):
        a, b = offset + 2 * i, offset + 2 * i + 1
        toks += [(a, 1), (b, 1), (a, -1), (b, -1)]
    return toks


def ntuple_words(surface: SurfacePresentation, twist: np.ndarray) -> list[list]:
    """Relation words (LHS * RHS^{-1}) for a one-basepoint tuple, slots in entry order."""
    ell = surface.ell
    word = _commutator_tokens(ell)
    if surface.kind is SurfaceKind.RP2Sum:
        c = 2 * ell
        word += [(c, -1), (c, -1), twist.conj().T]
    elif surface.kind is SurfaceKind.KleinSum:
        d, c = 2 * ell, 2 * ell + 1
        word += [(d, -1), (c, 1), (d, -1), (c, -1)]
    else:
        word += [twist.conj().T]
    return [word]


def doubled_words(surface: SurfacePresentation) -> list[list]:
    """Both relation words of a doubled tuple; minus-block slots start at entry_count."""
    ell, m = surface.ell, surface.entry_count
    w1 = _commutator_tokens(ell)
    w2 = _commutator_tokens(ell, offset=m)
    if surface.kind is SurfaceKind.RP2Sum:
        c, cb = 2 * ell, m + 2 * ell
        w1 += [(cb, -1), (c, -1)]
        w2 += [(c, -1), (cb, -1)]
    else:
        d, c = 2 * ell, 2 * ell + 1
        db, cb = m + 2 * ell, m + 2 * ell + 1
        w1 += [(d, -1), (c, 1), (db, -1), (c, -1)]
        w2 += [(db, -1), (cb, 1), (d, -1), (cb, -1)]
    return [w1, w2]


def relation_system(x, free: Sequence[int] | None = None) -> WordSystem:
    if isinstance(x, DoubledTuple):
        return WordSystem(x.group, doubled_words(x.surface), 2 * x.surface.entry_count, free)
    return WordSystem(x.group, ntuple_words(x.surface, x.twist_element.matrix), x.surface.entry_count, free)


def relation_residual(x) -> float:
    """Sum over relations of ||LHS RHS^{-1} - I||_F."""
    return relation_system(x).residual(x.mats)


def commutator_product(entries: Sequence[GroupElement]) -> GroupElement:
    group = entries[0].group
    out = identity(group)
    for i in range(0, len(entries) - 1, 2):
        out = out @ commutator(entries[i], entries[i + 1])
    return out


def diagonal_embed(x: NTuple, tol: float = DEFAULT.rel) -> DoubledTuple:
    """(V, c) with twist r  ->  (V, c, V, c r)."""
    if x.surface.orientable:
        raise InvalidSurface("diagonal_embed needs a nonorientable tuple")
    res = relation_residual(x)
    if res >= tol:
        raise OffVariety(f"relation residual {res:.3e} >= {tol:.1e}")
    minus = x.entries[:-1] + (x.c @ x.twist_element,)
    return DoubledTuple(x.surface, x.group, x.entries, minus)


# ---------------------------------------------------------------- sampling


def solve_commutator(w: GroupElement, seed=None, restarts: int = 20, max_iter: int = 500,
                     tol: float = DEFAULT.rel) -> tuple[GroupElement, GroupElement]:
    """Find (a, b) with a b a^{-1} b^{-1} = w.

    The first start is (I, I); later starts are Haar pairs drawn from
    seeds derived from ``seed``.
    """
    group = w.group
    system = WordSystem(group, [[(0, 1), (1, 1), (0, -1), (1, -1), w.matrix.conj().T]], 2)
    eye = np.eye(group.size, dtype=complex)
    for k in range(restarts):
        if k == 0:
            start = [eye, eye]
        else:
            rng = rng_for(seed, k)
            start = [haar_sample(group, rng).matrix, haar_sample(group, rng).matrix]
        out = system.solve(start, tol=tol * 1e-2, max_iter=max_iter)
        if out.residual < tol:
            a, b = out.mats
            return GroupElement(group, a), GroupElement(group, b)
    raise NoConvergence(f"no commutator solution for w after {restarts} restarts")


def sample_point(surface: SurfacePresentation, group: GroupId, twist: int = 0, seed=None,
                 max_attempts: int = 20, tol: float = DEFAULT.rel) -> NTuple:
    """Random point of N_r for a nonorientable surface."""
    if surface.orientable:
        raise InvalidSurface("sample_point expects a nonorientable surface")
    table = center_table(group)
    if not 0 <= twist < table.order:
        raise PreconditionViolation(f"twist index {twist} not in the center of {group}")
    r = table.elements[twist]
    ell = surface.ell
    for attempt in range(max_attempts):
        rng = rng_for(seed, attempt)
        if surface.kind is SurfaceKind.RP2Sum:
            V = [haar_sample(group, rng) for _ in range(2 * ell)]
            w = commutator_product(V) @ r.inv() if ell else r.inv()
            try:
                c = principal_square_root(w)
            except BranchCut:
                if ell:
                    continue
                # w = r^{-1} is fixed, so resampling cannot leave the cut
                c = _solve_square_root(w, rng, tol)
                if c is None:
                    continue
            x = NTuple(surface, group, tuple(V) + (c,), twist)
        elif ell >= 1:
            head = [haar_sample(group, rng) for _ in range(2 * ell - 2)]
            d, c = haar_sample(group, rng), haar_sample(group, rng)
            prefix = commutator_product(head) if head else identity(group)
            target = prefix.inv() @ c @ d @ c.inv() @ d
            try:
                a, b = solve_commutator(target, seed=rng_for(seed, attempt, 1), tol=tol * 1e-2)
            except NoConvergence:
                continue
            x = NTuple(surface, group, tuple(head) + (a, b, d, c), twist)
        else:
            x = _klein_zero(group, twist, rng, tol)
            if x is None:
                continue
        if relation_residual(x) < tol:
            return x
    raise SamplingExhausted(f"no point of N_r on {surface} in {group} after {max_attempts} attempts")


def _solve_square_root(w: GroupElement, rng, tol: float):
    system = WordSystem(w.group, [[(0, 1), (0, 1), w.matrix.conj().T]], 1)
    out = system.solve([haar_sample(w.group, rng).matrix], tol=tol * 1e-2)
    if out.residual >= tol:
        return None
    return GroupElement(w.group, out.mats[0])


def _klein_zero(group: GroupId, twist: int, rng, tol: float):
    surface = Klein(0)
    start = [haar_sample(group, rng).matrix, haar_sample(group, rng).matrix]
    system = WordSystem(group, ntuple_words(surface, np.eye(group.size)), 2)
    out = system.solve(start, tol=tol * 1e-2)
    if out.residual >= tol:
        return None
    return NTuple(surface, group, tuple(out.mats), twist)


def refine(x, tol: float = 1e-12, max_iter: int = 100):
    """Newton polish of a tuple onto its relation variety."""
    system = relation_system(x)
    res = system.residual(x.mats)
    if res >= 0.1:
        raise PreconditionViolation(f"refine needs residual < 0.1, got {res:.3e}")
    if res < tol:
        return x
    out = system.solve(x.mats, tol=tol, max_iter=max_iter)
    if out.residual >= tol:
        raise NoConvergence(f"refine reached {out.residual:.3e}, wanted {tol:.1e}")
    if isinstance(x, DoubledTuple):
        m = x.surface.entry_count
        return DoubledTuple(x.surface, x.group, tuple(out.mats[:m]), tuple(out.mats[m:]))
    return x.replace(entries=out.mats)


def word_value(word, x) -> np.ndarray:
    return evaluate(word, x.mats, x.group.size)
