import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tauflat.errors import OffVariety, PreconditionViolation
from tauflat.gauge import (GaugePair, align_conjugation, align_two_basepoint, apply_action,
                           apply_diagonal_action, random_gauge, word_trace_invariants)
from tauflat.groups import SO, SU, Sp, center_table, haar_sample, identity
from tauflat.involution import (CosetTuple, fiber_of_I, find_fixed_witness, lift_and_obstruct,
                                lift_commutator_residual, map_I, normalize_to_Nr, phi_map, project_center,
                                tau_gauge, tau_point, twist_class, verify_lift_commutator_identity)
from tauflat.variety import (DoubledTuple, Klein, NTuple, Orientable, RP2, diagonal_embed, relation_residual,
                             sample_point, solve_commutator)

from .conftest import MATRIX_GROUPS


def twisted_double(x):
    table = center_table(x.group)
    return DoubledTuple(x.surface, x.group, x.entries, x.entries[:-1] + (x.c @ table.elements[x.twist],))


def same_entries(xs, ys):
    return all(np.array_equal(a.matrix, b.matrix) for a, b in zip(xs, ys))


def test_tau_point_examples(group):
    d = diagonal_embed(sample_point(Klein(1), group, 0, seed=0))
    t = tau_point(d)
    assert same_entries(t.plus + t.minus, d.plus + d.minus)
    y = apply_action(random_gauge(group, 1), d)
    assert same_entries(tau_point(tau_point(y)).plus, y.plus)
    assert relation_residual(tau_point(y)) == pytest.approx(relation_residual(y), abs=1e-15)


def test_tau_gauge():
    g = SU(2)
    h = haar_sample(g, 0)
    k = GaugePair(identity(g), h)
    assert same_entries([tau_gauge(k).g1, tau_gauge(k).g2], [h, identity(g)])
    k2 = random_gauge(g, 3)
    assert same_entries([tau_gauge(tau_gauge(k2)).g1, tau_gauge(tau_gauge(k2)).g2], [k2.g1, k2.g2])


@pytest.mark.parametrize("surface", [RP2(1), Klein(1)], ids=str)
def test_tau_equivariance_exact(surface):
    rng = np.random.default_rng(0)
    for t in range(100):
        g = MATRIX_GROUPS[t % 4]
        x = apply_action(random_gauge(g, rng), diagonal_embed(sample_point(surface, g, 0, seed=t)))
        k = random_gauge(g, rng)
        lhs = tau_point(apply_action(k, x))
        rhs = apply_action(tau_gauge(k), tau_point(x))
        assert same_entries(lhs.plus + lhs.minus, rhs.plus + rhs.minus)


def test_witness_trivial_twist(group):
    d = diagonal_embed(sample_point(RP2(1), group, 0, seed=2))
    w = find_fixed_witness(d, seed=0)
    assert w is not None and w.twist == 0 and w.residual < 1e-6
    assert twist_class(d, w).is_trivial


@pytest.mark.parametrize("surface", [RP2(1), Klein(1), RP2(2)], ids=str)
def test_witness_minus_identity(surface):
    g = SU(2)
    x = sample_point(surface, g, 1, seed=4)
    d = twisted_double(x)
    w = find_fixed_witness(d, seed=0)
    assert w.twist == 1
    assert repr(twist_class(d, w)) == "[-e]"
    assert twist_class(d, w) != center_table(g).quotient_class(0)
    # the planted witness (e, r^{-1}) works exactly
    r = center_table(g).elements[1]
    y = apply_action(GaugePair(identity(g), r.inv()), d)
    t = tau_point(d)
    assert max(np.linalg.norm(a.matrix - b.matrix) for a, b in zip(y.plus + y.minus, t.plus + t.minus)) < 1e-14


def test_witness_absent_for_non_fixed_point():
    from tauflat.variety import commutator_product
    g = SU(2)
    rng = np.random.default_rng(0)
    a, b, c = (haar_sample(g, rng) for _ in range(3))
    cbar = c.inv() @ commutator_product([a, b])
    ab, bb = solve_commutator(cbar @ c, seed=0)
    x = DoubledTuple(RP2(1), g, (a, b, c), (ab, bb, cbar))
    assert find_fixed_witness(x, seed=0) is None


def test_witness_rejects_off_variety():
    g = SU(2)
    rng = np.random.default_rng(1)
    x = DoubledTuple(RP2(1), g, tuple(haar_sample(g, rng) for _ in range(3)),
                     tuple(haar_sample(g, rng) for _ in range(3)))
    with pytest.raises(OffVariety):
        find_fixed_witness(x)


def test_twist_class_stable_under_gauge():
    g = SU(2)
    for seed in range(3):
        d = twisted_double(sample_point(RP2(1), g, 1, seed=seed))
        for j in range(20):
            y = apply_action(random_gauge(g, 100 * seed + j), d)
            w = find_fixed_witness(y, seed=j)
            assert repr(twist_class(y, w)) == "[-e]"


def test_normalize_examples(group):
    x = sample_point(RP2(1), group, 0, seed=5)
    d = diagonal_embed(x)
    t = normalize_to_Nr(d, find_fixed_witness(d, seed=0))
    assert max(np.linalg.norm(a.matrix - b.matrix) for a, b in zip(t.entries, x.entries)) < 1e-10


@pytest.mark.parametrize("twist", [0, 1])
def test_normalize_planted_roundtrip(twist):
    g = SU(2)
    table = center_table(g)
    for seed in range(5):
        t = sample_point(RP2(1), g, twist, seed=seed)
        x = apply_action(random_gauge(g, seed + 50), twisted_double(t))
        w = find_fixed_witness(x, seed=seed)
        t2 = normalize_to_Nr(x, w, seed=seed)
        assert relation_residual(t2) < 1e-8 and t2.twist == twist
        # the normal form is fixed up to conjugation and c -> c z with z central
        hits = []
        for z in table.elements:
            cand = t2.replace(entries=t2.entries[:-1] + (t2.c @ z,))
            hits.append(align_conjugation(t, cand, seed=seed).found)
        assert any(hits)


def test_normalize_identity_tuple():
    g = SU(2)
    e = identity(g)
    x = diagonal_embed(NTuple(RP2(1), g, (e, e, e)))
    w = find_fixed_witness(x, seed=0)
    assert w.twist == 0
    t = normalize_to_Nr(x, w)
    assert all(np.allclose(v.matrix, np.eye(2)) for v in t.entries)


def test_map_I_examples():
    g = SU(2)
    e = identity(g)
    out = map_I(NTuple(RP2(1), g, (e, e, e)))
    assert all(np.array_equal(v.matrix, np.eye(2)) for v in out.plus + out.minus)
    x = sample_point(RP2(1), g, 0, seed=3)
    assert find_fixed_witness(map_I(x), seed=0).twist == 0
    y = apply_diagonal_action(haar_sample(g, 9), x)
    assert align_two_basepoint(map_I(x), map_I(y), seed=0).found
    with pytest.raises(PreconditionViolation):
        map_I(sample_point(RP2(1), g, 1, seed=0))


@pytest.mark.parametrize("g,degree", [(SU(2), 2), (SO(3), 1), (SU(3), 1), (Sp(1), 2)], ids=str)
def test_fiber_degree(g, degree):
    for seed in range(5):
        f = fiber_of_I(sample_point(RP2(1), g, 0, seed=seed), seed=seed)
        assert f.certified and f.degree == degree
        assert len(f.candidates) == center_table(g).quotient_order


def test_fiber_candidates_equivalent_upstairs(group):
    table = center_table(group)
    e = identity(group)
    for seed in range(10):
        x = sample_point(RP2(1), group, 0, seed=seed)
        base = diagonal_embed(x)
        for i in table.sqrt_of_identity:
            s = table.elements[i]
            up = apply_action(GaugePair(e, s), base)
            cand = diagonal_embed(x.replace(entries=x.entries[:-1] + (x.c @ s,)))
            gap = max(np.linalg.norm(a.matrix - b.matrix) for a, b in zip(up.plus + up.minus, cand.plus + cand.minus))
            assert gap < 1e-12


def test_su2_candidates_separated_by_invariants():
    g = SU(2)
    ok = 0
    for seed in range(100):
        x = sample_point(RP2(1), g, 0, seed=seed)
        y = x.replace(entries=x.entries[:-1] + (-1 * x.c.matrix,))
        ok += np.max(np.abs(word_trace_invariants(x) - word_trace_invariants(y))) > 1e-5
    assert ok >= 95


def test_phi_examples():
    g = SU(2)
    e = identity(g)
    out = phi_map(diagonal_embed(NTuple(RP2(2), g, (e,) * 5)))
    assert out.surface == Orientable(4)
    assert all(np.array_equal(v.matrix, np.eye(2)) for v in out.entries)
    for seed in range(10):
        d = diagonal_embed(sample_point(RP2(1), g, 0, seed=seed))
        assert relation_residual(phi_map(d)) < 1e-8


def test_phi_entry_order():
    g = SU(2)
    x = sample_point(RP2(2), g, 1, seed=1)
    d = twisted_double(x)
    out = phi_map(d).entries
    a1, b1, a2, b2, c = d.minus
    cinv = c.inv()
    expected = list(d.plus[:4]) + [cinv @ b2 @ c, cinv @ a2 @ c, cinv @ b1 @ c, cinv @ a1 @ c]
    assert same_entries(out, expected)


@pytest.mark.parametrize("ell", [1, 2])
def test_phi_equivariance(ell):
    g = SU(2)
    for seed in range(20):
        d = twisted_double(sample_point(RP2(ell), g, seed % 2, seed=seed))
        k = random_gauge(g, seed + 1)
        res = align_conjugation(phi_map(d), phi_map(apply_action(k, d)), seed=seed)
        assert res.found and res.residual < 1e-8


def test_phi_preconditions():
    g = SU(2)
    with pytest.raises(PreconditionViolation):
        phi_map(diagonal_embed(sample_point(Klein(1), g, 0, seed=0)))
    with pytest.raises(PreconditionViolation):
        phi_map(diagonal_embed(sample_point(RP2(0), g, 0, seed=0)))
    d = diagonal_embed(sample_point(RP2(1), g, 0, seed=0))
    bad = DoubledTuple(d.surface, g, d.plus, d.minus[:-1] + (haar_sample(g, 1),))
    with pytest.raises(OffVariety):
        phi_map(bad)


def test_project_center_examples():
    g = SU(2)
    x = sample_point(RP2(1), g, 1, seed=0)
    z = center_table(g).elements[1]
    flipped = x.replace(entries=[x.entries[0] @ z, x.entries[1], x.entries[2] @ z])
    assert project_center(x) == project_center(flipped)
    minus = NTuple(RP2(0), g, (z,), 0)
    np.testing.assert_allclose(project_center(minus).representative.entries[0].matrix, np.eye(2), atol=1e-15)
    once = project_center(x)
    twice = project_center(once.representative)
    assert same_entries(once.representative.entries, twice.representative.entries)
    assert project_center(x) != project_center(sample_point(RP2(1), g, 1, seed=1))
    with pytest.raises(PreconditionViolation):
        project_center(sample_point(RP2(1), SO(3), 0, seed=0))


def test_project_center_su3_idempotent():
    g = SU(3)
    x = sample_point(RP2(1), g, 0, seed=2)
    zeta = center_table(g).elements[1]
    y = x.replace(entries=[e @ zeta for e in x.entries])
    assert project_center(x) == project_center(y)


def test_obstruction_orientable():
    g = SU(2)
    a, b = solve_commutator(identity(g), seed=0)
    a2 = haar_sample(g, 1)
    x = NTuple(Orientable(2), g, (a2, a2, haar_sample(g, 2), haar_sample(g, 2)))
    out = lift_and_obstruct(project_center(x), seed=3)
    np.testing.assert_allclose(out.matrix, np.eye(2), atol=1e-10)


@pytest.mark.parametrize("surface", [RP2(1), Klein(1)], ids=str)
def test_obstruction_tracks_twist(surface):
    g = SU(2)
    classes = set()
    for twist in (0, 1):
        for seed in range(5):
            x = sample_point(surface, g, twist, seed=seed)
            h = project_center(x)
            got = {repr(lift_and_obstruct(h, seed=s)) for s in (None, 1, 2, 3)}
            assert len(got) == 1  # independent of the lift
            classes |= got
            if surface.kind.value == "RP2Sum":
                assert got == {repr(center_table(g).quotient_class(twist))}
    # the Klein relation does not involve r, so every honest lift is unobstructed
    assert classes == ({"[e]", "[-e]"} if surface.kind.value == "RP2Sum" else {"[e]"})


@pytest.mark.parametrize("twist", [0, 1])
def test_lift_identity(twist):
    g = SU(2)
    for seed in range(10):
        x = sample_point(RP2(1 + seed % 2), g, twist, seed=seed)
        assert verify_lift_commutator_identity(x)
        assert lift_commutator_residual(x) < 1e-8


def test_lift_identity_detects_corruption():
    g = SU(2)
    x = sample_point(RP2(1), g, 1, seed=0)
    from tauflat.groups import exp_array
    bump = exp_array(0.1 * np.array([[1j, 1], [-1, -1j]]) / np.sqrt(3))
    bad = x.replace(entries=(x.entries[0].matrix @ bump,) + x.entries[1:])
    assert not verify_lift_commutator_identity(bad)


def test_cosettuple_not_hashable():
    x = project_center(sample_point(RP2(1), SU(2), 0, seed=0))
    assert isinstance(x, CosetTuple)
    with pytest.raises(TypeError):
        hash(x)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), twist=st.integers(0, 1))
def test_witness_recovers_twist_property(seed, twist):
    g = SU(2)
    d = apply_action(random_gauge(g, seed + 1), twisted_double(sample_point(RP2(1), g, twist, seed=seed)))
    w = find_fixed_witness(d, seed=seed)
    assert w is not None and w.twist == twist and w.residual < 1e-6
