import math
from fractions import Fraction

import numpy as np
import pytest

from rrtpark.car_laws import CarLaw, GeneralFamily, binary_family, binary_law
from rrtpark.exact_kit import (
    MAX_PLANE_N,
    catalan,
    count_fpt,
    enum_plane_trees,
    exact_expected_flux,
    first_moment_bound,
    fpt_table,
    iter_fpt,
    root_empty_bound,
    spine_bound,
    subcritical_constants,
)
from rrtpark.parking_engine import park
from rrtpark.rrt_core import RecursiveTree


def test_plane_tree_counts_and_order():
    for n in range(1, MAX_PLANE_N + 1):
        trees = list(enum_plane_trees(n))
        assert len(trees) == catalan(n - 1)
        assert len(set(trees)) == len(trees)
    words = [t.to_brackets() for t in enum_plane_trees(6)]
    assert len(words) == 42
    assert [t.to_brackets() for t in enum_plane_trees(3)] == ["((()))", "(()())"]
    for bad in (0, 13):
        with pytest.raises(ValueError):
            list(enum_plane_trees(bad))


def test_catalan_closed_form():
    for k in range(12):
        assert catalan(k) == math.factorial(2 * k) // (math.factorial(k) * math.factorial(k + 1))


def test_fpt_fixtures():
    assert count_fpt(1, 1, 1) == 1
    assert count_fpt(2, 2, 2) == 2
    assert sorted(i.cars for i in iter_fpt(2, 2, 2)) == [(0, 2), (1, 1)]
    assert count_fpt(2, 3, 3) == 3
    assert sorted(i.cars for i in iter_fpt(2, 3, 3)) == [(0, 3), (1, 2), (2, 1)]
    with pytest.raises(ValueError):
        count_fpt(2, 1, 2)
    with pytest.raises(ValueError):
        count_fpt(10, 10, 2)


def test_fpt_instances_are_fully_parked():
    for n in range(1, 6):
        for m in range(n, 2 * n + 1):
            for inst in iter_fpt(n, m, 2):
                r = park(RecursiveTree(np.array(inst.shape.parent)), inst.cars)
                assert r.occupied.all()
                assert r.root_visits == m - n + 1
                assert inst.n == n and inst.m == m


def test_fpt_table_matches_counts():
    table = fpt_table(4, 2)
    for n, m, c in table:
        assert c == count_fpt(n, m, 2)


def test_exact_flux_small_cases():
    for a in (0.2, 0.5, 1.0):
        p = a / 2
        assert exact_expected_flux(1, binary_law(a)) == pytest.approx(p, abs=1e-15)
        assert exact_expected_flux(2, binary_law(a)) == pytest.approx(p + p * p, abs=1e-15)
    assert exact_expected_flux(2, binary_law(0.5)) == 0.3125
    assert exact_expected_flux(6, CarLaw.point_mass(0)) == 0.0
    with pytest.raises(ValueError):
        exact_expected_flux(8, binary_law(0.5))


def test_exact_flux_n3_by_hand():
    # two shapes (path, cherry), each with weight 1/2; rational check
    p = Fraction(1, 4)
    pmf = {0: 1 - p, 2: p}
    total = Fraction(0)
    for parent in ([-1, 0, 1], [-1, 0, 0]):
        tree = RecursiveTree(np.array(parent))
        for cars in np.ndindex(3, 3, 3):
            if any(c not in pmf for c in cars):
                continue
            w = pmf[cars[0]] * pmf[cars[1]] * pmf[cars[2]]
            total += w * park(tree, list(cars)).flux / 2
    assert exact_expected_flux(3, binary_law(0.5)) == pytest.approx(float(total), abs=1e-14)


def test_subcritical_constants():
    C, c = subcritical_constants(binary_family())
    assert C == 12.0 and c == 1 / 24
    fam = GeneralFamily(K=4, C={2: 0.25, 3: 0.1}, beta={2: 0.5, 3: 0.4})
    assert subcritical_constants(fam) == (40 * 0.25, 1 / 20)


def test_first_moment_bound_alpha_zero():
    b = first_moment_bound(1.0, binary_family(), 0.0, 5, 5)
    assert b.truncated_sum == 0.0 and b.coarse_sum == 0.0
    assert not b.diverged
    assert b.closed_form == 1.0


def test_first_moment_bound_single_instance_term():
    b = first_moment_bound(1.0, binary_family(), 0.01, 1, 2)
    # only FPT(1, 2): (m - n + 1) mu(2) t^0 = 2 * 0.005
    assert b.truncated_sum == pytest.approx(0.01, abs=1e-15)
    full = first_moment_bound(1.0, binary_family(), 0.01, 5, 5)
    assert full.truncated_sum >= 0.01
    assert full.coarse_sum >= full.truncated_sum
    assert full.alpha_small


def test_first_moment_bound_divergence_marker():
    # C t alpha^(1/2) = 12 * 1 * 0.1 >= 1
    assert first_moment_bound(1.0, binary_family(), 0.01, 3, 3).diverged
    b = first_moment_bound(1.0, binary_family(), 1e-4, 3, 3)
    assert not b.diverged
    x, a = 12 * 1e-2, 1e-2
    assert b.closed_form == pytest.approx(1 / (1 - a) ** 2 / (1 - x) ** 2, rel=1e-12)
    assert b.tail >= 0
    assert first_moment_bound(1.0, binary_family(), 1e-4, 3, 3, cst=2.0).closed_form == pytest.approx(
        2 * b.closed_form
    )


def test_analytic_bounds():
    assert spine_bound(0.25, 0) == 1.0
    assert spine_bound(0.25, 10) == pytest.approx(0.10737418, abs=1e-8)
    assert root_empty_bound(0.5, 0.0) == 1.0
    assert root_empty_bound(0.5, 4.0) == pytest.approx(math.exp(-2))
