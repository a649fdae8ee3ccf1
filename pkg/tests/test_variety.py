import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tauflat.errors import AlreadyOrientable, InvalidSurface, OffVariety, PreconditionViolation
from tauflat.groups import (SU, center_table, commutator, element, exp_array, haar_sample, identity,
                            project_to_algebra)
from tauflat.variety import (DoubledTuple, Klein, NTuple, Orientable, RP2, SurfaceKind, SurfacePresentation,
                             commutator_product, diagonal_embed, double_cover, refine, relation_residual,
                             sample_point, solve_commutator)

from .conftest import MATRIX_GROUPS

SURFACES = [RP2(0), RP2(1), RP2(2), Klein(0), Klein(1), Klein(2)]


def identity_tuple(surface, group, twist=0):
    e = identity(group)
    return NTuple(surface, group, (e,) * surface.entry_count, twist)


@pytest.mark.parametrize("surface,count", [(RP2(0), 1), (RP2(2), 5), (Klein(0), 2), (Klein(1), 4),
                                           (Orientable(3), 6)])
def test_entry_counts(surface, count):
    assert surface.entry_count == count == len(surface.entry_names)


def test_surface_validation():
    with pytest.raises(InvalidSurface):
        Orientable(0)
    with pytest.raises(InvalidSurface):
        RP2(-1)
    with pytest.raises(InvalidSurface):
        SurfaceKind.parse("torus")
    s = Klein(2)
    assert SurfacePresentation.from_dict(s.to_dict()) == s


@pytest.mark.parametrize("surface,cover", [(RP2(3), Orientable(6)), (Klein(1), Orientable(3)),
                                           (RP2(1), Orientable(2)), (Klein(0), Orientable(1))])
def test_double_cover(surface, cover):
    assert double_cover(surface) == cover


def test_double_cover_rejects_orientable():
    with pytest.raises(AlreadyOrientable):
        double_cover(Orientable(2))


def test_identity_residuals():
    assert relation_residual(identity_tuple(RP2(1), SU(2))) == 0
    twisted = identity_tuple(RP2(1), SU(2), twist=1)
    assert relation_residual(twisted) == pytest.approx(2 * np.sqrt(2), abs=1e-14)


def test_wrong_entry_count():
    with pytest.raises(InvalidSurface):
        NTuple(RP2(1), SU(2), (identity(SU(2)),) * 2)


@pytest.mark.parametrize("surface", SURFACES, ids=str)
def test_sample_point_all_groups_and_twists(surface, group):
    for r in range(center_table(group).order):
        for seed in range(50):
            x = sample_point(surface, group, r, seed=seed)
            assert relation_residual(x) < 1e-8
            assert all(e.residual() < 1e-10 for e in x.entries)


def test_sample_examples():
    x = sample_point(RP2(0), SU(2), 0, seed=0)
    np.testing.assert_allclose(x.c.matrix, np.eye(2), atol=1e-14)
    assert relation_residual(sample_point(RP2(1), SU(2), 1, seed=3)) < 1e-10
    assert relation_residual(sample_point(Klein(1), SU(2), 0, seed=3)) < 1e-8


def test_sample_point_deterministic():
    a = sample_point(Klein(1), SU(3), 0, seed=12)
    b = sample_point(Klein(1), SU(3), 0, seed=12)
    for u, v in zip(a.entries, b.entries):
        np.testing.assert_array_equal(u.matrix, v.matrix)


def test_sample_rejects_orientable_and_bad_twist():
    with pytest.raises(InvalidSurface):
        sample_point(Orientable(1), SU(2), 0, seed=0)
    with pytest.raises(PreconditionViolation):
        sample_point(RP2(1), SU(2), 5, seed=0)


def test_diagonal_embed_examples():
    g = SU(2)
    x = sample_point(RP2(1), g, 0, seed=1)
    d = diagonal_embed(x)
    assert relation_residual(d) < 1e-10
    for u, v in zip(d.plus, d.minus):
        np.testing.assert_array_equal(u.matrix, v.matrix)
    y = sample_point(RP2(1), g, 1, seed=1)
    dy = diagonal_embed(y)
    np.testing.assert_allclose(dy.minus[-1].matrix, -y.c.matrix, atol=1e-15)
    assert relation_residual(dy) < 1e-10
    bad = y.replace(entries=y.entries[:-1] + (haar_sample(g, 99),))
    with pytest.raises(OffVariety):
        diagonal_embed(bad)


@pytest.mark.parametrize("surface", SURFACES, ids=str)
def test_diagonal_embed_is_tau_fixed_for_trivial_twist(surface):
    x = sample_point(surface, SU(2), 0, seed=4)
    d = diagonal_embed(x)
    assert relation_residual(d) < 1e-8
    assert all(np.array_equal(u.matrix, v.matrix) for u, v in zip(d.plus, d.minus))


def test_solve_commutator_examples():
    g = SU(2)
    a, b = solve_commutator(identity(g), seed=0)
    np.testing.assert_array_equal(a.matrix, np.eye(2))
    np.testing.assert_array_equal(b.matrix, np.eye(2))
    minus = element(g, -np.eye(2))
    a, b = solve_commutator(minus, seed=0)
    assert np.linalg.norm(commutator(a, b).matrix + np.eye(2)) < 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_solve_commutator_su3(seed):
    w = haar_sample(SU(3), seed)
    a, b = solve_commutator(w, seed=seed)
    assert np.linalg.norm(commutator(a, b).matrix - w.matrix) < 1e-8


def test_refine_examples():
    x = sample_point(Klein(1), SU(2), 0, seed=2)
    y = refine(x, tol=1e-12)
    assert relation_residual(y) < 1e-12
    e = identity_tuple(RP2(1), SU(2))
    assert refine(e) is e
    g = SU(2)
    twisted = identity_tuple(RP2(1), g, twist=1)  # residual 2*sqrt(2)
    with pytest.raises(PreconditionViolation):
        refine(twisted)


def test_refine_recovers_perturbed_point():
    rng = np.random.default_rng(0)
    x = sample_point(RP2(1), SU(3), 0, seed=5)
    bumped = [e.matrix @ exp_array(project_to_algebra(1e-3 * rng.standard_normal((3, 3)), SU(3)))
              for e in x.entries]
    y = x.replace(entries=bumped)
    assert 1e-6 < relation_residual(y) < 0.1
    assert relation_residual(refine(y)) < 1e-12


def test_product_order_matters():
    x = sample_point(RP2(2), SU(2), 0, seed=8)
    a1, b1, a2, b2, c = x.entries
    swapped = x.replace(entries=(a2, b2, a1, b1, c))
    assert relation_residual(x) < 1e-10
    assert relation_residual(swapped) > 1e-3
    np.testing.assert_allclose(commutator_product([a1, b1, a2, b2]).matrix,
                               (commutator(a1, b1) @ commutator(a2, b2)).matrix, atol=1e-14)


def test_klein_relation_matches_direct_evaluation():
    x = sample_point(Klein(1), SU(2), 0, seed=6)
    a, b, d, c = x.entries
    lhs = commutator(a, b).matrix
    rhs = (c @ d @ c.inv() @ d).matrix
    assert np.linalg.norm(lhs - rhs) < 1e-8


def test_doubled_relations_direct():
    x = sample_point(RP2(1), SU(2), 1, seed=6)
    d = diagonal_embed(x)
    a, b, c = d.plus
    ab, bb, cb = d.minus
    assert np.linalg.norm(commutator(a, b).matrix - (c @ cb).matrix) < 1e-10
    assert np.linalg.norm(commutator(ab, bb).matrix - (cb @ c).matrix) < 1e-10


def test_serialization_roundtrip():
    x = sample_point(Klein(1), SU(2), 1, seed=0)
    y = NTuple.from_dict(x.to_dict())
    assert y.twist == 1 and y.surface == x.surface
    assert relation_residual(y) == pytest.approx(relation_residual(x), abs=1e-15)
    d = diagonal_embed(sample_point(RP2(1), SU(2), 0, seed=0))
    e = DoubledTuple.from_dict(d.to_dict())
    assert relation_residual(e) < 1e-10


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), idx=st.integers(0, 3), ell=st.integers(0, 2), klein=st.booleans())
def test_sampler_property(seed, idx, ell, klein):
    g = MATRIX_GROUPS[idx]
    surface = Klein(ell) if klein else RP2(ell)
    r = seed % center_table(g).order
    x = sample_point(surface, g, r, seed=seed)
    assert relation_residual(x) < 1e-8
    assert relation_residual(diagonal_embed(x)) < 1e-8
