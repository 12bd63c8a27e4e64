"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""

from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np

from _oracles import box_radii, brute_force_lambda1_sq, random_unimodular_int
from orbitlab.exact import ALPHA, QuarticInt, RealInterval, imatmul, imatsub, imax_abs, quartic_mul, sigma
from orbitlab.experiments import run
from orbitlab.fields import (
    NumberField,
    builtin_catalog,
    diagonal_translate,
    embedding_matrix,
    lattice_of,
    unit_action_matrix,
    wall_avoidance_check,
)
from orbitlab.homogeneous import (
    DiagonalElement,
    commutation_check,
    compact_twin_check,
    density_probe,
    generators,
    inclusion_check,
    k_membership_decompose,
    random_product,
    random_unimodular,
    su_membership,
)
from orbitlab.lattices import UnimodularLattice, lll_reduce, systole
from orbitlab.torus import (
    RelationCertificate,
    RelationCounterexample,
    TorusParams,
    certify_no_relation,
    verify_nondensity,
)

P23 = TorusParams((2, 3), 4)


def test_torus_nondensity(criterion):
    t0 = time.perf_counter()
    rep = verify_nondensity(P23, Fraction(1, 1000), window=10)
    dt = time.perf_counter() - t0
    ok = rep.failures == 0 and rep.status == "certified" and dt < 300
    assert criterion(1, ok, f"L={rep.L}, checked={rep.checked_count}, failures={rep.failures}, "
                            f"worst margin={float(rep.worst_margin):.3e}, {dt:.1f}s")


def test_rational_independence(criterion):
    t0 = time.perf_counter()
    res = certify_no_relation(P23, 10)
    planted = certify_no_relation(P23, 10, overrides={1: Fraction(1, 2)})
    dt = time.perf_counter() - t0
    ok = (isinstance(res, RelationCertificate) and res.min_abs_lower > 0
          and isinstance(planted, RelationCounterexample) and planted.candidate == (2, 0, 0, 0, 1)
          and dt < 600)
    detail = (f"H=10 candidates={res.checked_count}, min |value| >= {float(res.min_abs_lower):.3e}; "
              f"planted relation {planted.candidate}; {dt:.1f}s") if ok else f"{res!r} / {planted!r}"
    assert criterion(2, ok, detail)


def test_alpha_identity(criterion):
    prod = quartic_mul(ALPHA, sigma(ALPHA))
    ok = prod == QuarticInt(1, 0, 0, 0) and prod.coords == (1, 0, 0, 0)
    assert criterion(3, ok, f"alpha*sigma(alpha) = {prod.coords}")


def test_lattice_structure(criterion):
    rng = np.random.default_rng(4)
    gens6 = generators(6)
    products = [random_product(6, 8, rng, gens6) for _ in range(100)]
    members = sum(su_membership(M).ok for M in products)
    g3 = generators(3)
    samples = [(random_product(3, 6, rng, g3), random_product(3, 6, rng, g3), int(rng.integers(-2, 3)))
               for _ in range(20)]
    inc = inclusion_check(samples)
    twins = [compact_twin_check(M.to_pair()) for M in products]
    twins += [compact_twin_check(M.to_pair()) for a, b, _ in samples for M in (a, b)]
    worst = max(t.max_entry_modulus for t in twins)
    ok = members == 100 and inc.all_passed and inc.checked == 20 and all(t.ok for t in twins)
    ok = ok and worst <= 1 + Fraction(1, 10 ** 9)
    assert criterion(4, ok, f"{members}/100 products members, {inc.checked}/20 inclusions, "
                            f"max twin entry modulus <= {float(worst):.12f}")


def test_commutation(criterion):
    grid = [Fraction(-3) + Fraction(6 * i, 9) for i in range(10)]
    worst = max(commutation_check(s, t) for s in grid for t in grid)
    ok = worst < Fraction(1, 10 ** 12)
    assert criterion(5, ok, f"max residual over 10x10 grid <= {float(worst):.3e}")


def _as_intervals(M):
    return [[RealInterval(v, v) for v in row] for row in M]


def test_k_membership(criterion):
    rng = np.random.default_rng(6)
    cat = builtin_catalog()
    fields = [NumberField.from_catalog(cat["cubic-81"]), NumberField.from_catalog(cat["cubic-49"])]
    passed, worst = 0, Fraction(0)
    for i in range(100):
        F = fields[i % 2]
        s = -Fraction(int(rng.integers(0, 1000)), 100)
        d = DiagonalElement.in_N(3, [Fraction(int(rng.integers(-200, 201)), 100)])
        dec = k_membership_decompose(s, d, F)
        ok_t = 0 < dec.t_prime.lo and dec.t_prime.hi <= 1
        passed += dec.passed and ok_t
        worst = max(worst, dec.residual)

    # unit translation: d D_u g and d g M_u are the same matrix, and right-multiplying by M_u keeps the lattice
    F = fields[0]
    emb = embedding_matrix(F)
    inv_ok = True
    max_gap = 0.0
    for u in cat["cubic-81"].units:
        ua = unit_action_matrix(F, u)
        for _ in range(10):
            x = [Fraction(int(v), 100) for v in rng.integers(-100, 101, size=2)]
            logs = x + [-x[0] - x[1]]
            dg = diagonal_translate(emb, logs)
            Dd = [[ua.D[j] * v for v in row] for j, row in enumerate(dg)]  # D_u commutes with d
            dgM = imatmul(dg, _as_intervals(ua.M))
            res = imax_abs(imatsub(Dd, dgM))
            L = lattice_of(dg)
            a = systole(L).squared
            b = systole(L.right_multiply(ua.M)).squared
            c = systole(lattice_of(Dd)).length
            gap = abs(float(c.mid) - math.sqrt(a))
            max_gap = max(max_gap, gap)
            inv_ok &= a == b and res < Fraction(1, 10 ** 10) and gap < 1e-9
    ok = passed == 100 and worst < Fraction(1, 10 ** 12) and inv_ok
    assert criterion(6, ok, f"{passed}/100 decompositions, max residual <= {float(worst):.3e}; "
                            f"unit translation systole gap {max_gap:.2e}")


def test_avoidance(criterion):
    cfg = {"params": {"fields": ["cubic-81", "cubic-49"], "s_min": -5, "s_max": 5, "s_step": "1/2",
                      "d_values": [-1, "-1/2", 0, "1/2", 1], "control_s": 3}}
    rec = run("avoidance", cfg)
    p = rec.payload
    control_rows = [r for r in rec.rows if r["status"] == "statistical"]
    ok = (rec.status == "certified" and p["passed"] == p["samples"] and p["samples"] > 0
          and p["control"]["status"] == "statistical" and p["control"]["precondition_violated"]
          and len(control_rows) == 1)
    assert criterion(7, ok, f"{p['passed']}/{p['samples']} decompositions; s=3 control margin "
                            f"{p['control']['net_distance_margin']:.4f} (statistical)")


def test_lattice_core(criterion):
    rng = np.random.default_rng(8)
    zn = all(systole(UnimodularLattice.identity(n)).squared == 1 for n in range(1, 7))
    matches, lll_ok = 0, True
    lattices = []
    for _ in range(20):
        L = UnimodularLattice.normalized(np.eye(5) + 0.3 * rng.standard_normal((5, 5)))
        lattices.append(L)
        lam2 = systole(L).squared
        matches += brute_force_lambda1_sq(L.exact, box_radii(L.basis, float(lam2))) == lam2
        first = np.linalg.norm(lll_reduce(L).reduced_basis[:, 0])
        lll_ok &= first <= 2 ** 2 * math.sqrt(lam2) * (1 + 1e-12)
    inv = 0
    for k in range(50):
        L = lattices[k % 20]
        inv += systole(L.right_multiply(random_unimodular_int(5, rng))).squared == systole(L).squared
    ok = zn and matches == 20 and inv == 50 and lll_ok
    assert criterion(8, ok, f"Z^n ok={zn}, oracle matches {matches}/20, invariance {inv}/50, LLL bound ok={lll_ok}")


def test_number_field_engine(criterion):
    F = NumberField.from_catalog(builtin_catalog()["cubic-81"])
    ua = unit_action_matrix(F, (0, 1, 0))
    wall = wall_avoidance_check(F, builtin_catalog()["cubic-81"].units)
    ok = ua.residual < Fraction(1, 10 ** 10) and ua.det == 1 and wall.passed
    assert criterion(9, ok, f"residual <= {float(ua.residual):.2e}, det M = {ua.det}, "
                            f"min embedding separation {float(wall.min_separation):.4f}")


def test_density_probe(criterion):
    F = NumberField.from_catalog(builtin_catalog()["cubic-81"])
    rng = np.random.default_rng(10)
    targets = [random_unimodular(3, rng) for _ in range(3)]
    series = density_probe(F, [1, 5, 10, 20, 40], targets)
    ok = all(s.weakly_decreasing() for s in series) and len(series) == 3
    text = "; ".join(" >= ".join(f"{d:.3f}" for d in s.distances) for s in series)
    assert criterion(10, ok, f"closest approach per target (statistical): {text}")
