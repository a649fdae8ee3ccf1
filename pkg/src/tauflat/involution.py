"""The involution tau, the comparison map I, twist classes and the Phi map.

Points of the nonorientable moduli space are one-basepoint tuples (V, c);
I sends them to the diagonal doubled tuple (V, c, V, c).  A tau-fixed class
of the double cover carries a twist r (central) with k.x = tau(x) and
r^{-1} = g2 g1; only the class of r in Z/2Z is an invariant.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import (NonCentralObstruction, NonCentralTwist, NormalizationFailed, OffVariety,
                     PreconditionViolation)
from .gauge import (GaugePair, action_residual, align_conjugation, align_two_basepoint, apply_action,
                    is_generic)
from .groups import CenterQuotientClass, CenterTable, GroupElement, center_table, identity
from .seeding import rng_for
from .solvers import WordSystem
from .variety import (DoubledTuple, NTuple, Orientable, SurfaceKind, SurfacePresentation,
                      commutator_product, diagonal_embed, max_entry_distance, relation_residual)

log = logging.getLogger(__name__)


def tau_point(x: DoubledTuple) -> DoubledTuple:
    return DoubledTuple(x.surface, x.group, x.minus, x.plus)


def tau_gauge(k: GaugePair) -> GaugePair:
    return GaugePair(k.g2, k.g1)


# ------------------------------------------------------------ fixed classes


@dataclass(frozen=True, eq=False)
class FixedClassWitness:
    k: GaugePair
    twist: int  # index into the center table
    residual: float

    @property
    def twist_element(self) -> GroupElement:
        return center_table(self.k.g1.group).elements[self.twist]

    def to_dict(self) -> dict:
        return {"k": self.k.to_dict(), "twist_index": self.twist, "residual": self.residual}


def _constrained_witness(x: DoubledTuple, g1: np.ndarray, r: GroupElement, tol: Tolerances):
    """Re-solve k.x = tau(x) with g2 = r^{-1} g1^{-1} held fixed by construction."""
    rinv = r.matrix.conj().T
    y = tau_point(x)
    words = []
    for v, w in zip(x.plus[:-1], y.plus[:-1]):
        words.append([(0, 1), v.matrix, (0, -1), w.matrix.conj().T])
    # g1 c g2^{-1} = g1 c g1 r
    words.append([(0, 1), x.plus[-1].matrix, (0, 1), r.matrix, y.plus[-1].matrix.conj().T])
    out = WordSystem(x.group, words, 1).solve([g1], tol=tol.align_polish * 1e-2, max_iter=100)
    g1 = out.mats[0]
    k = GaugePair(GroupElement(x.group, g1), GroupElement(x.group, rinv @ g1.conj().T))
    return k, action_residual(k, x, y)


def find_fixed_witness(x: DoubledTuple, seed=None, tol: Tolerances = DEFAULT,
                       starts: int = 20) -> Optional[FixedClassWitness]:
    """Witness k with k.x = tau(x), or None when no witness is found.

    The twist r = (g2 g1)^{-1} is snapped to the center table and the
    witness re-solved with the snapped value.
    """
    res = relation_residual(x)
    if res >= tol.rel:
        raise OffVariety(f"relation residual {res:.3e} >= {tol.rel:.1e}")
    al = align_two_basepoint(x, tau_point(x), seed=seed, starts=starts, tol=tol)
    if not al.found:
        return None
    k = al.witness
    table = center_table(x.group)
    r_inv = k.g2.matrix @ k.g1.matrix
    idx, dist = table.nearest(r_inv.conj().T)
    if dist >= tol.center:
        kind = "generic point" if is_generic(x) else "non-generic point"
        raise NonCentralTwist(f"twist is {dist:.2e} from the center ({kind})")
    # (g1 z, g2 z) is a witness for every central z, with twist r z^{-2}; keep
    # the smallest twist index and then the g1 nearest e, so diagonal inputs
    # normalise to themselves
    eye = np.eye(x.group.size)
    r = table.elements[idx].matrix
    options = []
    for z in table.elements:
        g1z = z.matrix @ k.g1.matrix
        new_idx, _ = table.nearest(r @ z.matrix.conj().T @ z.matrix.conj().T)
        options.append((new_idx, float(np.linalg.norm(g1z - eye)), g1z))
    idx, _, g1 = min(options, key=lambda o: o[:2])
    k2, res2 = _constrained_witness(x, g1, table.elements[idx], tol)
    if res2 >= tol.align:
        raise NonCentralTwist(f"snapped twist does not reproduce the witness (residual {res2:.2e})")
    return FixedClassWitness(k2, idx, res2)


def twist_class(x: DoubledTuple, w: FixedClassWitness) -> CenterQuotientClass:
    return center_table(x.group).quotient_class(w.twist)


def normalize_to_Nr(x: DoubledTuple, w: FixedClassWitness, seed=None,
                    tol: Tolerances = DEFAULT) -> NTuple:
    """Gauge x to (V, c', V, c' r) and return (V, c') with twist r.

    With g = g1 this is (e, g^{-1}).x; the result is checked to be
    K-equivalent to x.
    """
    g = w.k.g1
    y = apply_action(GaugePair(identity(x.group), g.inv()), x)
    t = NTuple(x.surface, x.group, y.plus, w.twist)
    if relation_residual(t) >= tol.rel:
        raise NormalizationFailed(f"normalised tuple residual {relation_residual(t):.2e}")
    check = align_two_basepoint(diagonal_embed(t, tol.rel), x, seed=seed, tol=tol)
    if not check.found:
        raise NormalizationFailed(f"normalised tuple is not K-equivalent to x (residual {check.residual:.2e})")
    return t


def map_I(x: NTuple, tol: Tolerances = DEFAULT) -> DoubledTuple:
    """[[(V, c)]] -> [(V, c, V, c)]; on classes this is well defined because
    (g, g) in K^tau carries diagonal tuples to diagonal tuples."""
    if x.twist != 0:
        raise PreconditionViolation("map_I is defined on untwisted tuples")
    return diagonal_embed(x, tol.rel)


# ------------------------------------------------------------------ fibers


@dataclass
class FiberResult:
    classes: list  # NTuple representatives, one per K^tau-class
    candidates: list
    degree: int
    certified: bool  # every pairwise decision carried a certificate
    evidence: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"degree_observed": self.degree, "certified": self.certified,
                "candidates": [c.to_dict() for c in self.candidates],
                "dedup_evidence": self.evidence}


def fiber_of_I(x: NTuple, seed=None, tol: Tolerances = DEFAULT) -> FiberResult:
    """Classes in the fiber of I through I([[x]]).

    Candidates are (V, c s) for central s with s^2 = e; each is K-equivalent
    to x upstairs via k = (e, s).  Candidates are merged when an explicit
    conjugator is found and kept apart when trace invariants separate them;
    anything else leaves the trial uncertified.
    """
    if x.twist != 0:
        raise PreconditionViolation("fiber_of_I expects an untwisted tuple")
    table = center_table(x.group)
    base = diagonal_embed(x, tol.rel)
    e = identity(x.group)
    candidates, evidence = [], []
    for s_idx in table.sqrt_of_identity:
        s = table.elements[s_idx]
        cand = x.replace(entries=x.entries[:-1] + (x.c @ s,))
        upstairs = apply_action(GaugePair(e, s), base)
        gap = max_entry_distance(upstairs.plus + upstairs.minus,
                                 diagonal_embed(cand, tol.rel).plus + diagonal_embed(cand, tol.rel).minus)
        if gap >= 10 * tol.rel:
            raise AssertionError(f"fiber candidate is not K-equivalent upstairs (gap {gap:.2e})")
        candidates.append(cand)
    classes: list[NTuple] = []
    certified = True
    for i, cand in enumerate(candidates):
        merged = False
        for j, rep in enumerate(classes):
            al = align_conjugation(rep, cand, seed=rng_for(seed, i, j), tol=tol)
            evidence.append({"candidate": i, "class": j, "found": al.found,
                             "method": al.method, "residual": al.residual})
            if al.found:
                merged = True
                break
            if al.method != "invariant-reject":
                certified = False
        if not merged:
            classes.append(cand)
    if not certified:
        log.info("fiber trial uncertified: optimisation failed without an invariant certificate")
    return FiberResult(classes, candidates, len(classes), certified, evidence)


# ---------------------------------------------------------------------- Phi


def phi_map(x: DoubledTuple, tol: Tolerances = DEFAULT) -> NTuple:
    """Two-basepoint RP2-sum model -> one-basepoint genus-2l model.

    (a_i, b_i, c, a'_i, b'_i, c') -> (a_1, b_1, ..., a_l, b_l,
    c'^{-1} b'_l c', c'^{-1} a'_l c', ..., c'^{-1} b'_1 c', c'^{-1} a'_1 c').
    """
    if x.surface.kind is not SurfaceKind.RP2Sum:
        raise PreconditionViolation("phi_map is defined for RP2-sum tuples")
    if x.surface.ell < 1:
        raise PreconditionViolation("phi_map needs ell >= 1")
    res = relation_residual(x)
    if res >= tol.rel:
        raise OffVariety(f"relation residual {res:.3e} >= {tol.rel:.1e}")
    return _phi(x)


def _phi(x: DoubledTuple) -> NTuple:
    ell = x.surface.ell
    cp = x.minus[-1]
    cpi = cp.inv()
    head = list(x.plus[:-1])
    tail = []
    for i in reversed(range(ell)):
        a, b = x.minus[2 * i], x.minus[2 * i + 1]
        tail += [cpi @ b @ cp, cpi @ a @ cp]
    return NTuple(Orientable(2 * ell), x.group, tuple(head + tail), 0)


def lift_commutator_residual(x: NTuple) -> float:
    """Residual of the genus-2l relation for Phi(V, c, V, c r)."""
    if x.surface.kind is not SurfaceKind.RP2Sum:
        raise PreconditionViolation("lift identity concerns RP2-sum tuples")
    minus = x.entries[:-1] + (x.c @ x.twist_element,)
    doubled = DoubledTuple(x.surface, x.group, x.entries, minus)
    return relation_residual(_phi(doubled))


def verify_lift_commutator_identity(x: NTuple, seed=None, tol: Tolerances = DEFAULT) -> bool:
    """prod [a_i, b_i] prod [c^{-1} b_i c, c^{-1} a_i c] = e for the Phi-image.

    This holds exactly when the commutator product commutes with c, which
    an on-variety tuple guarantees; a corrupted tuple generically fails.
    """
    return lift_commutator_residual(x) < tol.rel


# ------------------------------------------------------------ PSU lifting


@dataclass(frozen=True, eq=False)
class CosetTuple:
    """A tuple over G / Z(G), stored as a canonical representative over G."""

    representative: NTuple
    modulus: CenterTable

    def __eq__(self, other):
        if not isinstance(other, CosetTuple):
            return NotImplemented
        a, b = self.representative, other.representative
        if a.group != b.group or a.surface != b.surface:
            return False
        return all(_coset_distance(x.matrix, y.matrix, self.modulus) < 1e-8
                   for x, y in zip(a.entries, b.entries))

    __hash__ = None


def _coset_distance(a: np.ndarray, b: np.ndarray, table: CenterTable) -> float:
    return min(float(np.linalg.norm(a - z.matrix @ b)) for z in table.elements)


def _canonical_entry(m: np.ndarray, table: CenterTable) -> np.ndarray:
    flat = m.ravel()
    mod = np.abs(flat)
    k = int(np.argmax(mod >= mod.max() - 1e-9))
    width = 2 * np.pi / table.order
    best, best_phase = None, np.inf
    for z in table.elements:
        cand = z.matrix @ m
        phase = np.angle(cand.ravel()[k]) % (2 * np.pi)
        if phase >= 2 * np.pi - 1e-12:
            phase = 0.0
        if phase < width - 1e-12 and phase < best_phase:
            best, best_phase = cand, phase
    return best if best is not None else m


def project_center(x: NTuple) -> CosetTuple:
    """Canonical representative modulo per-entry central factors.

    Each entry is multiplied by the central element that puts the phase of
    its first maximal-modulus matrix entry in [0, 2 pi / |Z|).
    """
    table = center_table(x.group)
    if table.order < 2:
        raise PreconditionViolation(f"{x.group} has trivial center")
    ents = [_canonical_entry(e.matrix, table) for e in x.entries]
    return CosetTuple(x.replace(entries=ents), table)


def lift_and_obstruct(h: CosetTuple, seed=None, tol: Tolerances = DEFAULT):
    """Obstruction to lifting h from G/Z to a solution over G.

    Orientable: the central element prod [a~_i, b~_i] (returned as a
    GroupElement).  RP2 / Klein sums: the class of prod [a~_i, b~_i]
    times the inverse of c~^2 (resp. c~ d~ c~^{-1} d~) in Z/2Z, because
    re-lifting c or d changes the value by a square.  With a seed, lifts are
    randomised by central factors.
    """
    x = h.representative
    table = h.modulus
    ents = list(x.entries)
    if seed is not None:
        rng = rng_for(seed)
        ents = [table.elements[int(rng.integers(table.order))] @ e for e in ents]
    surface = x.surface
    if surface.orientable:
        mu = commutator_product(ents)
    else:
        ell = surface.ell
        V = ents[: 2 * ell]
        prod = commutator_product(V) if ell else identity(x.group)
        if surface.kind is SurfaceKind.RP2Sum:
            c = ents[-1]
            mu = prod @ (c @ c).inv()
        else:
            d, c = ents[-2], ents[-1]
            mu = prod @ (c @ d @ c.inv() @ d).inv()
    idx, dist = table.nearest(mu.matrix)
    if dist >= tol.center:
        raise NonCentralObstruction(f"lifted relation is {dist:.2e} from the center")
    if surface.orientable:
        return table.elements[idx]
    return table.quotient_class(idx)
