#!/usr/bin/env python3
"""
Tests for multiplier norms
==========================

Exact p = 2 norms, interpolation upper bounds, witnessed lower bounds, the
rank constants, the telescoping bound and affine invariance.
"""

import math
import unittest
from fractions import Fraction

import numpy as np

from homeo_mnorm import (
    REFLECTION,
    GridAffineMap,
    MultiplierSymbol,
    SymbolCertificate,
    affine_invariance_check,
    apply,
    dual_exponent,
    estimate_c,
    estimate_norm,
    lower_bound,
    norm_m2,
    rank_labels,
    reflect,
    telescope_bound,
    upper_bound,
)
from homeo_modulus import Modulus, unit_c_model
from homeo_nets import net_alpha
from homeo_spectral import GridSignal, SymbolGrid, integer_frequencies, lp_norm, random_signal


def random_sign_symbol(n, seed, dim=1):
    rng = np.random.default_rng(seed)
    return MultiplierSymbol(rng.choice([-1.0, 1.0], size=(n,) * dim))


class TestSymbols(unittest.TestCase):

    def test_dual_exponent(self):
        """Test dual exponents"""
        self.assertEqual(dual_exponent(2), 2)
        self.assertAlmostEqual(dual_exponent(4), 4 / 3)
        self.assertEqual(dual_exponent(1.5), 3.0)
        self.assertEqual(dual_exponent(1), math.inf)
        self.assertEqual(dual_exponent(math.inf), 1.0)
        with self.assertRaises(ValueError):
            dual_exponent(0.5)

    def test_symbol_validation(self):
        """Test symbol shape and finiteness"""
        with self.assertRaises(ValueError):
            MultiplierSymbol(np.ones((4, 8)))
        with self.assertRaises(ValueError):
            MultiplierSymbol(np.array([1.0, np.inf]))

    def test_certificate_must_reproduce_values(self):
        """Test certificate consistency"""
        labels = np.array([0, 1, 1, 0])
        MultiplierSymbol(np.array([2.0, -1.0, -1.0, 2.0]), SymbolCertificate(labels, np.array([2.0, -1.0])))
        with self.assertRaises(ValueError):
            MultiplierSymbol(np.array([2.0, -1.0, 1.0, 2.0]), SymbolCertificate(labels, np.array([2.0, -1.0])))

    def test_apply_constant_symbol(self):
        """Test constant multiplier"""
        f = random_signal(16, 1, np.random.default_rng(1))
        np.testing.assert_allclose(apply(MultiplierSymbol(np.full(16, 3.0)), f).values, 3 * f.values, atol=1e-12)
        with self.assertRaises(ValueError):
            apply(MultiplierSymbol(np.ones(8)), f)

    def test_reflect(self):
        """Test index reflection"""
        np.testing.assert_array_equal(reflect(np.arange(4)), [0, 3, 2, 1])
        x = np.arange(16).reshape(4, 4)
        self.assertEqual(reflect(x)[1, 2], x[3, 2])


class TestBounds(unittest.TestCase):

    def test_norm_m2_is_sup(self):
        """Test M_2 norm is the sup"""
        rng = np.random.default_rng(2)
        for _ in range(10):
            m = MultiplierSymbol(rng.standard_normal(32) + 1j * rng.standard_normal(32))
            self.assertAlmostEqual(norm_m2(m), np.max(np.abs(m.values)), places=12)
            self.assertAlmostEqual(upper_bound(m, 2), norm_m2(m), places=12)

    def test_constant_symbol_bounds(self):
        """Test bounds of a constant symbol"""
        m = MultiplierSymbol(np.full(32, -2.0))
        for p in (1.0, 4 / 3, 3.0):
            self.assertAlmostEqual(upper_bound(m, p), 2.0, places=10)
            if p > 1:
                self.assertAlmostEqual(lower_bound(m, p, 5, 2).value, 2.0, places=10)

    def test_upper_bound_duality(self):
        """Test upper bound is symmetric in p and q"""
        m = random_sign_symbol(64, 3)
        self.assertAlmostEqual(upper_bound(m, 4.0), upper_bound(m, 4 / 3), places=10)
        self.assertGreaterEqual(upper_bound(m, 4.0), norm_m2(m) - 1e-12)
        with self.assertRaises(ValueError):
            upper_bound(m, 0.5)

    def test_lower_bound_is_witnessed(self):
        """Test lower bound is reproduced by its witness"""
        m = random_sign_symbol(64, 4)
        for p in (4 / 3, 3.0):
            result = lower_bound(m, p, iterations=15, restarts=3, seed=1)
            witness = result.witness
            measured = lp_norm(apply(m, GridSignal(witness)).values, p) / lp_norm(witness, p)
            self.assertAlmostEqual(result.value, measured, places=12)
            self.assertGreaterEqual(result.value, norm_m2(m) * (1 - 1e-12))
            self.assertLessEqual(result.value, upper_bound(m, p) * (1 + 1e-9))
            self.assertTrue(result.history)

    def test_lower_bound_is_reproducible(self):
        """Test seeded lower bound"""
        m = random_sign_symbol(32, 5)
        first = lower_bound(m, 3.0, iterations=8, restarts=3, seed=9).value
        self.assertEqual(first, lower_bound(m, 3.0, iterations=8, restarts=3, seed=9).value)

    def test_lower_bound_range(self):
        """Test lower bound exponent range"""
        m = random_sign_symbol(8, 0)
        for p in (1.0, math.inf):
            with self.assertRaises(ValueError):
                lower_bound(m, p)

    def test_interval_indicators_stay_bounded(self):
        """Witnessed norms of a frequency interval indicator do not grow as the grid is refined."""
        for p in (4 / 3, 2.0, 4.0):
            values = []
            for n in (256, 1024, 4096):
                freqs = integer_frequencies(n)
                m = MultiplierSymbol(((freqs >= n // 16) & (freqs < n // 4)).astype(float))
                values.append(lower_bound(m, p, iterations=6, restarts=2, seed=0).value)
            self.assertTrue(all(1 - 1e-9 <= v < 10 for v in values), (p, values))
            self.assertLess(max(values) / min(values), 3.0, p)

    def test_zero_symbol(self):
        """Test zero symbol"""
        self.assertEqual(lower_bound(MultiplierSymbol(np.zeros(8)), 3.0, 4, 2).value, 0.0)


class TestEstimates(unittest.TestCase):

    def test_p2_estimate_is_exact(self):
        """Test p = 2 estimate"""
        m = random_sign_symbol(32, 6)
        estimate = estimate_norm(m, 2)
        self.assertEqual(estimate.lower, estimate.upper)
        self.assertEqual(estimate.methods, ("sup",))

    def test_sandwich(self):
        """Test lower <= upper and the record fields"""
        m = random_sign_symbol(32, 7, dim=2)
        estimate = estimate_norm(m, 4.0, iterations=10, restarts=2, seed=3)
        self.assertLessEqual(estimate.lower, estimate.upper)
        self.assertGreater(estimate.lower, 0)
        record = estimate.to_dict()
        self.assertEqual(set(record), {"p", "lower", "upper", "N", "methods", "seed", "iterations",
                                       "restarts", "clipped"})
        self.assertEqual(record["N"], 32)
        self.assertFalse(record["clipped"])

    def test_estimate_c(self):
        """Test c(p, nu) estimate"""
        grid = SymbolGrid(16, 1, 8, Fraction(1, 3))
        self.assertEqual(estimate_c(2.0, 1, net_alpha(), grid), 1.0)
        c = estimate_c(3.0, 2, net_alpha(), grid, trials=3, iterations=5, restarts=2)
        self.assertGreaterEqual(c, 1 - 1e-9)
        with self.assertRaises(ValueError):
            estimate_c(1.0, 1, net_alpha(), grid)

    def test_rank_labels(self):
        """Test rank rectangle labels"""
        grid = SymbolGrid(8, 1, 4, Fraction(1, 3))
        np.testing.assert_array_equal(rank_labels(grid, net_alpha(), 1), [0, 1, 2, 2, 3, 3, 4, 0])
        plane = rank_labels(SymbolGrid(8, 2, 4, Fraction(1, 3)), net_alpha(), 1)
        self.assertEqual(plane.shape, (8, 8))
        self.assertEqual(len(np.unique(plane)), 25)


class TestTelescope(unittest.TestCase):

    def setUp(self):
        self.deltas = [2.0 ** -(k + 2) for k in range(1, 7)]
        self.bound = telescope_bound(self.deltas, Modulus.lipschitz(1.0), 4.0, unit_c_model)

    def test_terms(self):
        """Test telescope terms"""
        self.assertEqual(sorted(self.bound.terms), [2, 3, 4, 5, 6])
        for nu, term in self.bound.terms.items():
            self.assertAlmostEqual(term, 2.0 ** -nu)
        self.assertTrue(self.bound.summable)
        self.assertEqual(self.bound.certified_from, 4)
        self.assertEqual(telescope_bound(self.deltas, Modulus.lipschitz(1.0), 1.5, unit_c_model).certified_from, 3)

    def test_segment_and_tail(self):
        """Test segment and tail sums"""
        self.assertAlmostEqual(self.bound.segment(2, 3), 2.0 ** -3 + 2.0 ** -4 + 2.0 ** -5)
        with self.assertRaises(ValueError):
            self.bound.segment(4, 3)
        self.assertAlmostEqual(self.bound.tail(4), 2.0 ** -5 + 2.0 ** -6 + 2.0 * 2.0 ** -6)
        self.assertAlmostEqual(self.bound.total(), sum(2.0 ** -nu for nu in range(2, 7)) + 2.0 ** -5)

    def test_not_summable(self):
        """Test unsummable model is reported"""
        bound = telescope_bound([1.0] * 5, Modulus.lipschitz(1.0), 3.0, unit_c_model)
        self.assertFalse(bound.summable)
        with self.assertRaises(ValueError):
            telescope_bound([0.5], Modulus.lipschitz(1.0), 3.0, unit_c_model)


class TestAffineInvariance(unittest.TestCase):

    def test_grid_affine_map(self):
        """Test grid affine map"""
        np.testing.assert_array_equal(GridAffineMap(3, 1).index(8), [1, 4, 7, 2, 5, 0, 3, 6])
        with self.assertRaises(ValueError):
            GridAffineMap(2)

    def test_compose(self):
        """Test composition with a grid affine map"""
        m = MultiplierSymbol(np.arange(8.0))
        np.testing.assert_array_equal(REFLECTION.compose(m).values, [0, 7, 6, 5, 4, 3, 2, 1])

    def test_estimates_are_invariant(self):
        """Test estimates under affine maps"""
        m = random_sign_symbol(32, 8)
        for l in (REFLECTION, GridAffineMap(1, 3), GridAffineMap(5, 2)):
            for p in (4 / 3, 4.0):
                result = affine_invariance_check(m, l, p, iterations=8, restarts=2, seed=1)
                self.assertLess(result.gap, 1e-6)
                self.assertAlmostEqual(result.upper, result.upper_mapped, places=9)

    def test_two_dimensional_invariance(self):
        """Test affine invariance in the plane"""
        m = random_sign_symbol(8, 9, dim=2)
        result = affine_invariance_check(m, GridAffineMap(3, 1), 3.0, iterations=6, restarts=2)
        self.assertLess(result.gap, 1e-6)

    def test_p2_invariance_is_exact(self):
        """Test exact invariance at p = 2"""
        m = random_sign_symbol(16, 10)
        result = affine_invariance_check(m, REFLECTION, 2.0)
        self.assertEqual(result.lower, result.lower_mapped)


if __name__ == '__main__':
    unittest.main()
