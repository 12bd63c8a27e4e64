from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from _oracles import box_radii, brute_force_lambda1_sq, random_unimodular_int
from orbitlab.errors import RankDeficient
from orbitlab.lattices import UnimodularLattice, gauss_reduce_2d, lll_reduce, quotient_distance, systole


def rational_lattice(n, rng, noise=1.0):
    """Random unimodular lattice; small ``noise`` keeps it close to Z^n."""
    while True:
        B = np.eye(n) * (noise < 1) + noise * rng.standard_normal((n, n))
        if abs(np.linalg.det(B)) > 0.2:
            return UnimodularLattice.normalized(B)


def test_identity_systole():
    for n in range(1, 7):
        res = systole(UnimodularLattice.identity(n))
        assert res.squared == 1
        assert res.length.lo == res.length.hi == 1


def test_diagonal_systole():
    L = UnimodularLattice([[2, 0], [0, Fraction(1, 2)]])
    res = systole(L)
    assert res.squared == Fraction(1, 4)
    assert res.achieving_vector == (0, 1)
    assert res.as_json() == {"length_lo": 0.5, "length_hi": 0.5, "vector": [0, 1]}


def test_lll_identity_and_swap():
    rep = lll_reduce(UnimodularLattice.identity(3))
    assert np.array_equal(rep.unimodular_transform, np.eye(3, dtype=np.int64))
    P = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]])
    L = UnimodularLattice(np.diag([1, 2, 0.5]) @ P)
    rep = lll_reduce(L)
    assert round(abs(np.linalg.det(rep.unimodular_transform))) == 1
    assert np.allclose(L.basis @ rep.unimodular_transform, rep.reduced_basis)
    assert rep.lovasz_ok()


def test_lll_rank_deficient():
    with pytest.raises(RankDeficient):
        lll_reduce(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_systole_matches_brute_force(rng):
    for _ in range(5):
        L = rational_lattice(5, rng, noise=0.3)
        res = systole(L)
        radii = box_radii(L.basis, float(res.squared))
        assert brute_force_lambda1_sq(L.exact, radii) == res.squared


def test_systole_invariant_under_unimodular(rng):
    L = rational_lattice(4, rng)
    base = systole(L).squared
    for _ in range(10):
        assert systole(L.right_multiply(random_unimodular_int(4, rng))).squared == base


def test_text_roundtrip(tmp_path):
    L = UnimodularLattice([[2, "1/3"], [0, "0.5"]])
    p = tmp_path / "lat.txt"
    L.save(p)
    assert UnimodularLattice.load(p).exact == L.exact
    assert UnimodularLattice.from_text("# comment\n2\n1 0\n0 1\n").exact == UnimodularLattice.identity(2).exact


def test_determinant_check():
    with pytest.raises(ValueError):
        UnimodularLattice([[2, 0], [0, 1]])


def test_gauss_2d_gives_shortest(rng):
    for _ in range(20):
        L = rational_lattice(2, rng)
        red = gauss_reduce_2d(L.basis)
        assert abs(np.linalg.norm(red[:, 0]) - float(systole(L).length.mid)) < 1e-9


def test_quotient_distance(rng):
    L1 = rational_lattice(3, rng)
    assert quotient_distance(L1, L1) < 1e-12
    g = random_unimodular_int(3, rng, steps=3)
    assert quotient_distance(L1, L1.right_multiply(g)) < 1e-9
    L2 = rational_lattice(3, rng)
    d = [quotient_distance(L1, L2, r) for r in (0, 1, 2)]
    assert d[0] == math.inf
    assert d[2] <= d[1]
