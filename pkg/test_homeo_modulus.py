#!/usr/bin/env python3
"""
Tests for moduli of continuity
==============================

Analytic moduli, grid estimates, the built-in families and the bisection
driven selections of shell scales and net widths.
"""

import math
import unittest
from fractions import Fraction

import numpy as np

from homeo_modulus import (
    BisectionError,
    Modulus,
    build_family,
    character_family,
    default_c_model,
    estimate_modulus,
    family_modulus,
    format_scale,
    gamma_sequence,
    largest_delta_below,
    select_b,
    select_delta,
    unit_c_model,
    weierstrass_holder_constant,
)


class TestModulus(unittest.TestCase):

    def test_zero_at_zero(self):
        """Test omega(0) = 0"""
        omega = Modulus.lipschitz(3.0)
        self.assertEqual(omega(0.0), 0.0)
        self.assertAlmostEqual(omega(0.5), 1.5)
        self.assertIsInstance(omega(0.5), float)

    def test_array_evaluation(self):
        """Test vectorized evaluation"""
        omega = Modulus.holder(0.5, cap=1.0)
        values = omega(np.array([0.0, 0.25, 4.0]))
        np.testing.assert_allclose(values, [0.0, 0.5, 1.0])

    def test_negative_argument_raises(self):
        """Test negative arguments"""
        with self.assertRaises(ValueError):
            Modulus.lipschitz(1.0)(-0.1)

    def test_holder_exponent_range(self):
        """Test Holder exponent range"""
        with self.assertRaises(ValueError):
            Modulus.holder(1.5)

    def test_weierstrass_modulus_saturates(self):
        """Test Weierstrass modulus saturation"""
        omega = Modulus.weierstrass(0.5, 4.0, 3)
        self.assertAlmostEqual(omega(10.0), 2.0 * (1 + 0.5 + 0.25))
        self.assertAlmostEqual(omega(0.01), 0.01 * (1 + 2 + 4))

    def test_weierstrass_holder_constant(self):
        """Test Holder constant of Weierstrass sums"""
        self.assertIsNone(weierstrass_holder_constant(0.25, 4.0))
        constant = weierstrass_holder_constant(0.5, 4.0)
        omega = Modulus.weierstrass(0.5, 4.0, 30)
        for delta in (1e-6, 1e-3, 0.1, 1.0):
            self.assertLessEqual(omega(delta), constant * math.sqrt(delta))

    def test_closed_form_matches_float_evaluation(self):
        """The log2 closed forms agree with direct evaluation inside the float range."""
        moduli = [
            Modulus.lipschitz(3.0, cap=2.0),
            Modulus.holder(0.3, constant=0.5, cap=1.0),
            Modulus.weierstrass(0.5, 4.0, 6),
            Modulus.zero(),
            build_family({"kind": "holder", "alpha": 0.1}).modulus,
            character_family({"kind": "log", "shift": 2}, 8).modulus,
        ]
        for omega in moduli:
            for x in (1.0, -3.0, -10.5, -40.0):
                direct = omega(2.0 ** x)
                expected = math.log2(direct) if direct > 0 else -math.inf
                self.assertAlmostEqual(omega.log2_func(x), expected, places=9, msg=f"{omega.name} at 2^{x}")

    def test_log2_below_float_floor(self):
        """Below the float floor a modulus is evaluated through its closed form."""
        self.assertAlmostEqual(Modulus.holder(0.1).log2_at(-5000.0), -500.0)
        self.assertEqual(Modulus.zero().log2_at(-5000.0), -math.inf)
        grid_only = Modulus(lambda d: 2 * d, source="grid-estimated", name="grid")
        self.assertAlmostEqual(grid_only.log2_at(-20.0), -19.0)
        with self.assertRaisesRegex(BisectionError, "float floor"):
            grid_only.log2_at(-2000.0)

    def test_scaled(self):
        """scaled(c) evaluates omega(c delta) in both scales."""
        omega = Modulus.lipschitz(1.0).scaled(4.0)
        self.assertAlmostEqual(omega(0.5), 2.0)
        self.assertAlmostEqual(omega.log2_at(-2000.0), -1998.0)


class TestEstimateModulus(unittest.TestCase):

    def test_linear_samples(self):
        """Test grid modulus of a line"""
        t = np.arange(0, 10, 0.01)
        estimate = estimate_modulus(2.0 * t, 0.05, 0.01)
        self.assertAlmostEqual(estimate.value, 0.1, places=9)
        self.assertFalse(estimate.underestimate)

    def test_spacing_larger_than_delta_is_flagged(self):
        """Test underestimate flag"""
        estimate = estimate_modulus(np.arange(10.0), 0.5, 1.0)
        self.assertEqual(estimate.value, 0.0)
        self.assertTrue(estimate.underestimate)

    def test_periodic_wraps(self):
        """Test cyclic grid modulus"""
        ramp = np.arange(16.0)
        self.assertEqual(estimate_modulus(ramp, 1.0, 1.0, periodic=False).value, 1.0)
        self.assertEqual(estimate_modulus(ramp, 1.0, 1.0, periodic=True).value, 15.0)

    def test_two_dimensional(self):
        """Test grid modulus in the plane"""
        x = np.arange(8.0)
        values = np.add.outer(x, 2 * x)
        self.assertAlmostEqual(estimate_modulus(values, 1.0, 1.0).value, 2.0)

    def test_estimate_below_analytic(self):
        """Test grid estimate stays below the analytic modulus"""
        family = build_family({"kind": "weierstrass", "a": 0.5, "b": 4.0, "terms": 6})
        grid = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
        for delta in (0.01, 0.1):
            self.assertLessEqual(family_modulus(family, grid, delta), family.modulus(delta) + 1e-12)


class TestFamilies(unittest.TestCase):

    def test_bounds_hold(self):
        """Test family sup bounds"""
        t = np.linspace(-20, 20, 2001)
        for spec in ({"kind": "constant", "value": -2.0}, {"kind": "lipschitz"}, {"kind": "holder"},
                     {"kind": "weierstrass"}, {"kind": "trigonometric", "seed": 3}, {"kind": "chirp"}):
            family = build_family(spec)
            for member in family.members:
                self.assertLessEqual(np.max(np.abs(member(t))), family.bound + 1e-12, spec)

    def test_members_average_axes(self):
        """Test members average the coordinates"""
        family = build_family({"kind": "lipschitz"})
        u = family.members[0]
        x, y = np.array([0.3]), np.array([1.1])
        np.testing.assert_allclose(u(x, y), (u(x) + u(y)) / 2)

    def test_chirp_has_only_shell_moduli(self):
        """Test chirp family"""
        family = build_family({"kind": "chirp"})
        self.assertIsNone(family.modulus)
        self.assertAlmostEqual(family.shell(3)(0.1), 0.8)

    def test_unknown_family(self):
        """Test unknown family kind"""
        with self.assertRaises(ValueError):
            build_family({"kind": "sawtooth"})

    def test_weierstrass_parameters_checked(self):
        """Test Weierstrass parameter validation"""
        with self.assertRaises(ValueError):
            build_family({"kind": "weierstrass", "a": 0.1, "b": 4.0})

    def test_character_family(self):
        """Test character family"""
        family = character_family({"kind": "log", "shift": 2.0}, 4)
        self.assertEqual(len(family.members), 9)
        self.assertEqual(family.domain, "torus")
        self.assertAlmostEqual(family.bound, 1 / math.log(2.0))
        t = np.linspace(0, 2 * np.pi, 512, endpoint=False)
        spacing = t[1] - t[0]
        for delta in (spacing, 4 * spacing):
            measured = max(estimate_modulus(m(t), delta, spacing, periodic=True).value for m in family.members)
            self.assertLessEqual(measured, family.modulus(delta) + 1e-12)

    def test_gamma_sequences(self):
        """Test gamma sequences"""
        n = np.arange(5)
        np.testing.assert_allclose(gamma_sequence({"kind": "log", "shift": 2})(n), np.log(n + 2.0))
        np.testing.assert_allclose(gamma_sequence({"kind": "power", "exponent": 0.5, "shift": 1})(n),
                                   np.sqrt(n + 1.0))
        with self.assertRaises(ValueError):
            gamma_sequence({"kind": "log", "shift": 1})
        with self.assertRaises(ValueError):
            gamma_sequence({"kind": "constant"})


class TestSelections(unittest.TestCase):

    def test_largest_delta_below_lipschitz(self):
        """Test largest delta of a Lipschitz modulus"""
        delta = largest_delta_below(Modulus.lipschitz(4.0), 0.5)
        self.assertLessEqual(4.0 * delta, 0.5)
        self.assertAlmostEqual(delta, 0.125, delta=0.125 * 2 ** -18)

    def test_largest_delta_returns_hi_when_small(self):
        """Test search top is returned when it already qualifies"""
        self.assertEqual(largest_delta_below(Modulus.lipschitz(0.1), 0.5), 1.0)

    def test_flat_modulus_raises(self):
        """A modulus that never vanishes and has no closed form stops at the float floor."""
        flat = Modulus(lambda d: np.ones_like(d), name="flat")
        with self.assertRaisesRegex(BisectionError, "float floor"):
            largest_delta_below(flat, 0.5)

    def test_flat_closed_form_hits_the_search_floor(self):
        """With a closed form the walk goes on down to the search floor and names it."""
        flat = Modulus(lambda d: np.ones_like(d), name="flat", log2_func=lambda x: 0.0)
        with self.assertRaisesRegex(BisectionError, "floor of the width search"):
            largest_delta_below(flat, 0.5)

    def test_widths_below_the_float_range(self):
        """A slowly vanishing modulus with the power model gets exact Fraction widths."""
        omega = build_family({"kind": "holder", "alpha": 0.1}).modulus
        c_model = default_c_model(8.0, 1)
        deltas = select_delta(omega, c_model, 1, 12)
        self.assertEqual(len(deltas), 12)
        self.assertIsInstance(deltas[-1], Fraction)
        self.assertLess(deltas[-1], 2.0 ** -1000)
        self.assertTrue(format_scale(deltas[-1]).startswith("2^-10"))
        for nu, delta in enumerate(deltas, start=1):
            log2_delta = (math.log2(delta.numerator) - math.log2(delta.denominator)
                          if isinstance(delta, Fraction) else math.log2(delta))
            bound = math.log2(c_model(1 + 1 / (nu + 1), nu + 1)) + omega.log2_at(log2_delta)
            self.assertLessEqual(bound, -(nu + 1) + 1e-9, f"nu={nu}")
            if nu > 1:
                self.assertLessEqual(delta, deltas[nu - 2])

    def test_select_b(self):
        """Test shell scales"""
        omegas = [Modulus.lipschitz(2.0 * (j + 1), cap=2.0) for j in range(6)]
        b = select_b(omegas)
        self.assertLessEqual(b[0], 0.5)
        for j, (omega, value) in enumerate(zip(omegas, b)):
            self.assertLessEqual(omega(value), 1.0 / (j + 1))
            if j:
                self.assertLess(value, b[j - 1])

    def test_select_delta(self):
        """Test net widths"""
        omega = Modulus.holder(0.5)
        c_model = default_c_model(8.0, 2)
        deltas = select_delta(omega, c_model, 2, 5)
        self.assertEqual(len(deltas), 5)
        for nu, delta in enumerate(deltas, start=1):
            self.assertLessEqual(c_model(1 + 1 / (nu + 1), nu + 1) * omega(delta * math.sqrt(2)),
                                 2.0 ** -(nu + 1))
            if nu > 1:
                self.assertLessEqual(delta, deltas[nu - 2])

    def test_select_delta_zero_modulus(self):
        """Test zero modulus widths"""
        self.assertEqual(select_delta(Modulus.zero(), unit_c_model, 1, 3), [1.0, 1.0, 1.0])

    def test_c_models(self):
        """Test c models"""
        self.assertAlmostEqual(default_c_model(8.0, 1)(4.0, 2), 32.0 ** 2)
        self.assertAlmostEqual(default_c_model(8.0, 1)(4 / 3, 1), 32.0)
        self.assertEqual(unit_c_model(3.0, 5), 1.0)


if __name__ == '__main__':
    unittest.main()
