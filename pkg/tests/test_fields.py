from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest

from _oracles import brute_force_lambda1_sq
from orbitlab.errors import NotAUnit, PreconditionViolated
from orbitlab.fields import (
    CatalogEntry,
    NumberField,
    builtin_catalog,
    compact_orbit_probe,
    diagonal_translate,
    dump_catalog,
    embedding_matrix,
    lattice_of,
    load_catalog,
    log_embedding,
    sweep_systole_2d,
    unit_action_matrix,
    units_independent,
    wall_avoidance_check,
)
from orbitlab.lattices import systole


def test_field_invariants(cubic81):
    assert cubic81.disc == 81
    roots = cubic81.roots(64)
    mids = [float(r.mid) for r in roots]
    assert mids == sorted(mids)
    assert np.allclose(sorted(2 * np.cos(np.pi * k / 9) for k in (1, 7, 13)), mids)
    assert all(a.hi < b.lo for a, b in zip(roots, roots[1:]))


def test_rejects_reducible_and_complex():
    with pytest.raises(PreconditionViolated):
        NumberField([1, 0, -1])
    with pytest.raises(PreconditionViolated):
        NumberField([1, 0, 1])
    with pytest.raises(PreconditionViolated):
        NumberField([2, 0, -1])


def test_embedding_matrix(cubic81):
    emb = embedding_matrix(cubic81)
    assert emb.vandermonde_det.contains(9)
    assert abs(float(emb.scale.mid) - 9 ** (-1 / 3)) < 1e-15
    assert abs(abs(np.linalg.det(emb.lattice.basis)) - 1) < 1e-12
    col0 = [float(row[0].mid) / float(emb.scale.mid) for row in emb.matrix]
    assert np.allclose(col0, 1)


def test_embedding_quadratic():
    F = NumberField([1, 0, -2])
    emb = embedding_matrix(F)
    d = emb.vandermonde_det
    assert d.lo ** 2 <= 8 <= d.hi ** 2


def test_unit_action_companion(cubic81):
    ua = unit_action_matrix(cubic81, (0, 1, 0))
    assert ua.M == [[0, 0, 1], [1, 0, 3], [0, 1, 0]]
    assert ua.det == 1 and ua.norm == 1
    assert ua.residual < Fraction(1, 10 ** 10)
    one = unit_action_matrix(cubic81, (1, 0, 0))
    assert one.M == [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    assert all(d.lo == d.hi == 1 for d in one.D)


def test_multiplicativity(cubic81, cubic49):
    for F in (cubic81, cubic49):
        u, v = (0, 1, 0), builtin_catalog()[F.label].units[1]
        Mu = np.array(unit_action_matrix(F, u).M)
        Mv = np.array(unit_action_matrix(F, v).M)
        Muv = np.array(unit_action_matrix(F, F.mul(u, v)).M)
        assert np.array_equal(Mu @ Mv, Muv)
    sq = unit_action_matrix(cubic81, (0, 0, 1))
    assert sq.det == 1 and np.array_equal(np.array(sq.M), np.linalg.matrix_power(np.array([[0, 0, 1], [1, 0, 3], [0, 1, 0]]), 2))


def test_norm_matches_determinant(cubic81):
    for u in [(0, 1, 0), (1, 1, 0), (-1, 1, 0), (2, 0, 1), (3, -1, 2)]:
        M = cubic81.multiplication_matrix(u)
        assert cubic81.norm(u) == round(np.linalg.det(np.array(M, dtype=float)))


def test_not_a_unit(cubic81):
    assert cubic81.norm((-1, 1, 0)) == 3
    with pytest.raises(NotAUnit):
        unit_action_matrix(cubic81, (-1, 1, 0))


def test_wall_avoidance(cubic81, cubic49):
    rep = wall_avoidance_check(cubic81, [(0, 1, 0), (1, 1, 0), (-1, 0, 0)])
    assert rep.passed
    assert rep.skipped_torsion == [(-1, 0, 0)]
    assert rep.min_separation > 1
    assert wall_avoidance_check(cubic49, builtin_catalog()["cubic-49"].units).passed


def test_wall_avoidance_needs_prime_degree():
    F = NumberField([1, 0, -4, 0, 2])  # x^4 - 4x^2 + 2, totally real, degree 4
    with pytest.raises(PreconditionViolated):
        wall_avoidance_check(F, [(1, 0, 0, 0)])


def test_units_independent(cubic81):
    assert units_independent(cubic81, [(0, 1, 0), (1, 1, 0)])
    assert not units_independent(cubic81, [(0, 1, 0), (0, 0, 1)])  # theta^2 is a power of theta


def test_probe_single_point(cubic81):
    probe = compact_orbit_probe(cubic81, [(0, 1, 0), (1, 1, 0)], 1)
    base = float(systole(embedding_matrix(cubic81).lattice).length.mid)
    assert probe.count == 1 and abs(probe.min_systole - base) < 1e-12


def test_probe_quadratic_matches_sweep():
    F = NumberField([1, 0, -2], "quadratic-8")
    probe = compact_orbit_probe(F, [(1, 1)], 200)
    lo, hi = sweep_systole_2d(F, (1, 1), 200)
    assert abs(probe.min_systole - lo) < 1e-9
    assert abs(probe.max_systole - hi) < 1e-9


def test_unit_translation_invariance(cubic81, rng):
    emb = embedding_matrix(cubic81)
    for u in [(0, 1, 0), (1, 1, 0)]:
        logs_u = [float(v.mid) for v in log_embedding(cubic81, [u])[0]]
        for _ in range(10):
            x = rng.uniform(-1, 1, size=2)
            base = [Fraction(float(x[0])), Fraction(float(x[1]))]
            base.append(-base[0] - base[1])
            shifted = [b + Fraction(lu) for b, lu in zip(base, logs_u)]
            shifted[-1] = -shifted[0] - shifted[1]
            a = systole(lattice_of(diagonal_translate(emb, base))).length
            b = systole(lattice_of(diagonal_translate(emb, shifted))).length
            assert abs(float(a.mid) - float(b.mid)) < 1e-9


def test_embedding_lattice_brute_force(cubic81):
    L = embedding_matrix(cubic81).lattice
    res = systole(L)
    assert res.squared > 0
    assert brute_force_lambda1_sq(L.exact, 5) == res.squared


def test_catalog_roundtrip(tmp_path):
    entries = list(builtin_catalog().values())
    p = tmp_path / "fields.json"
    p.write_text(dump_catalog(entries))
    loaded = load_catalog(p)
    assert list(loaded.values()) == entries
    assert CatalogEntry.from_json(json.loads(dump_catalog(entries))[0]) == entries[0]
