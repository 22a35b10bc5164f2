#!/usr/bin/env python3
"""
Tests for the interval nets
===========================

Dyadic rules, block-and-tail children of net beta, look-ups and framed
coordinates. All arithmetic is exact, so every comparison is an equality.
"""

import unittest
from fractions import Fraction

from homeo_nets import (
    BlockPartition,
    DyadicLinePartition,
    EndpointHit,
    Interval,
    NetAddress,
    UniformLinePartition,
    dyadic_interval,
    dyadic_line,
    floor_log2,
    locate,
    net_alpha,
    net_beta,
    product_rectangles,
)


class TestIntervals(unittest.TestCase):

    def test_interval_requires_increasing_endpoints(self):
        """Test interval validation"""
        with self.assertRaises(ValueError):
            Interval(1, 1)
        with self.assertRaises(ValueError):
            Interval(2, 1)

    def test_floats_become_exact(self):
        """Test float conversion is exact"""
        interval = Interval(0.5, 0.75)
        self.assertEqual(interval.lo, Fraction(1, 2))
        self.assertEqual(interval.length, Fraction(1, 4))
        self.assertEqual(interval.midpoint, Fraction(5, 8))

    def test_floor_log2(self):
        """Test floor log2"""
        self.assertEqual(floor_log2(Fraction(1)), 0)
        self.assertEqual(floor_log2(Fraction(3)), 1)
        self.assertEqual(floor_log2(Fraction(1, 3)), -2)
        self.assertEqual(floor_log2(Fraction(1, 4)), -2)
        with self.assertRaises(ValueError):
            floor_log2(Fraction(0))


class TestDyadicRules(unittest.TestCase):

    def test_dyadic_line_pieces(self):
        """Test dyadic pieces of the line"""
        self.assertEqual(dyadic_line(0), Interval(-1, 1))
        self.assertEqual(dyadic_line(1), Interval(1, 2))
        self.assertEqual(dyadic_line(3), Interval(4, 8))
        self.assertEqual(dyadic_line(-1), Interval(-2, -1))
        self.assertEqual(dyadic_line(-3), Interval(-8, -4))

    def test_dyadic_line_pieces_are_consecutive(self):
        """Test dyadic line pieces tile"""
        for k in range(-10, 10):
            self.assertEqual(dyadic_line(k).hi, dyadic_line(k + 1).lo)

    def test_dyadic_interval_of_unit_interval(self):
        """Test dyadic children of [0, 1]"""
        unit = Interval(0, 1)
        self.assertEqual(dyadic_interval(unit, 0), Interval(Fraction(1, 4), Fraction(3, 4)))
        self.assertEqual(dyadic_interval(unit, 1), Interval(Fraction(3, 4), Fraction(7, 8)))
        self.assertEqual(dyadic_interval(unit, -1), Interval(Fraction(1, 8), Fraction(1, 4)))

    def test_dyadic_interval_is_affine(self):
        """Test dyadic children are affine images"""
        parent = Interval(2, 6)
        for k in range(-5, 6):
            unit = dyadic_interval(Interval(0, 1), k)
            child = dyadic_interval(parent, k)
            self.assertEqual(child.lo, 2 + 4 * unit.lo)
            self.assertEqual(child.hi, 2 + 4 * unit.hi)
            self.assertEqual(child.hi, dyadic_interval(parent, k + 1).lo)

    def test_dyadic_line_locate(self):
        """Test locating points on the line"""
        partition = DyadicLinePartition()
        self.assertEqual(partition.locate(Fraction(3, 2)), (1, False))
        self.assertEqual(partition.locate(Fraction(2)), (1, True))
        self.assertEqual(partition.locate(Fraction(0)), (0, False))
        self.assertEqual(partition.locate(Fraction(-1)), (-1, True))
        self.assertEqual(partition.locate(Fraction(-3)), (-2, False))


class TestBlockPartition(unittest.TestCase):

    def test_uniform_partition(self):
        """Test uniform partition"""
        partition = UniformLinePartition(Fraction(1, 2))
        self.assertEqual(partition.piece(1), Interval(0, Fraction(1, 2)))
        self.assertEqual(partition.locate(Fraction(0)), (0, True))
        self.assertEqual(partition.locate(Fraction(3, 4)), (2, False))

    def test_two_block_children(self):
        """Test two-block children"""
        partition = BlockPartition(Interval(0, 1), Fraction(1, 2))
        self.assertEqual(partition.piece(0), Interval(Fraction(1, 2), Fraction(3, 4)))
        self.assertEqual(partition.piece(-1), Interval(Fraction(1, 4), Fraction(1, 2)))
        self.assertEqual(partition.piece(-2), Interval(Fraction(1, 8), Fraction(1, 4)))
        self.assertEqual(partition.piece(1), Interval(Fraction(3, 4), Fraction(7, 8)))

    def test_pieces_are_consecutive_and_short(self):
        """Test width-bounded pieces tile the parent"""
        for key in (None, (3, 1, 0)):
            partition = BlockPartition(Interval(Fraction(-1, 3), Fraction(2)), Fraction(1, 5), key)
            for k in range(-12, 30):
                piece = partition.piece(k)
                self.assertLessEqual(piece.length, Fraction(1, 5))
                self.assertEqual(piece.hi, partition.piece(k + 1).lo)

    def test_locate_matches_pieces(self):
        """Test locate agrees with piece"""
        for key in (None, (0, 1, 4)):
            partition = BlockPartition(Interval(0, Fraction(7, 3)), Fraction(1, 2), key)
            for k in range(-8, 16):
                piece = partition.piece(k)
                self.assertEqual(partition.locate(piece.midpoint), (k, False))
                self.assertEqual(partition.locate(piece.hi), (k, True))

    def test_jitter_is_deterministic(self):
        """Test seeded jitter"""
        first = BlockPartition(Interval(0, 1), Fraction(1, 8), (5, 1, 2))
        second = BlockPartition(Interval(0, 1), Fraction(1, 8), (5, 1, 2))
        self.assertEqual([first.piece(k) for k in range(-6, 20)],
                         [second.piece(k) for k in range(-6, 20)])

    def test_locate_outside_parent_raises(self):
        """Test locate outside the parent"""
        partition = BlockPartition(Interval(0, 1), Fraction(1, 2))
        with self.assertRaises(ValueError):
            partition.locate(Fraction(1))


class TestNets(unittest.TestCase):

    def setUp(self):
        self.alpha = net_alpha()
        self.beta = net_beta([1, Fraction(1, 2), Fraction(1, 4)])

    def test_alpha_intervals(self):
        """Test alpha net intervals"""
        self.assertEqual(self.alpha.interval(NetAddress((1,))), Interval(1, 2))
        self.assertEqual(self.alpha.interval(NetAddress((1, 0))), Interval(Fraction(5, 4), Fraction(7, 4)))
        self.assertEqual(self.alpha.interval(NetAddress((0, 0))), Interval(Fraction(-1, 2), Fraction(1, 2)))

    def test_beta_intervals(self):
        """Test beta net intervals"""
        self.assertEqual(self.beta.interval(NetAddress((1,))), Interval(0, 1))
        self.assertEqual(self.beta.interval(NetAddress((1, 0))), Interval(Fraction(1, 2), Fraction(3, 4)))
        self.assertEqual(self.beta.interval(NetAddress((1, -1))), Interval(Fraction(1, 4), Fraction(1, 2)))
        self.assertEqual(self.beta.interval(NetAddress((-2,))), Interval(-3, -2))

    def test_beta_widths_bounded_by_delta(self):
        """Test beta widths at each rank"""
        for jitter in (False, True):
            beta = net_beta([1, Fraction(1, 3), Fraction(1, 7)], jitter=jitter, seed=4)
            for s1 in range(-2, 3):
                for s2 in range(-4, 5):
                    self.assertLessEqual(beta.interval(NetAddress((s1, s2))).length, Fraction(1, 3))
                    for s3 in (-3, 0, 3):
                        self.assertLessEqual(beta.interval(NetAddress((s1, s2, s3))).length, Fraction(1, 7))

    def test_children_nest_in_parent(self):
        """Test children nest in their parent"""
        for net in (self.alpha, self.beta):
            parent = net.interval(NetAddress((2,)))
            for child in net.child_intervals(NetAddress((2,)), range(-6, 7)):
                self.assertTrue(parent.lo <= child.lo < child.hi <= parent.hi)

    def test_beta_rejects_bad_deltas(self):
        """Test delta sequence validation"""
        with self.assertRaises(ValueError):
            net_beta([])
        with self.assertRaises(ValueError):
            net_beta([1, 2])
        with self.assertRaises(ValueError):
            net_beta([1, 0])
        with self.assertRaises(ValueError):
            self.beta.width(4)

    def test_locate_interior_point(self):
        """Test locating an interior point"""
        self.assertEqual(locate(self.alpha, Fraction(3, 2), 2), NetAddress((1, 0)))
        self.assertEqual(locate(self.beta, Fraction(5, 8), 2), NetAddress((1, 0)))

    def test_locate_endpoint(self):
        """Test locating an endpoint"""
        hit = locate(self.alpha, 1, 1)
        self.assertIsInstance(hit, EndpointHit)
        self.assertEqual((hit.left, hit.right, hit.rank), (NetAddress((0,)), NetAddress((1,)), 1))
        hit = locate(self.alpha, Fraction(5, 4), 2)
        self.assertIsInstance(hit, EndpointHit)
        self.assertEqual((hit.left, hit.right), (NetAddress((1, -1)), NetAddress((1, 0))))

    def test_locate_agrees_with_interval(self):
        """Test locate agrees with interval"""
        for net in (self.alpha, self.beta):
            for x in (Fraction(-7, 3), Fraction(1, 3), Fraction(22, 7)):
                address = net.locate(x, 3)
                self.assertIsInstance(address, NetAddress)
                self.assertTrue(net.interval(address).contains(x))

    def test_locate_rank_must_be_positive(self):
        """Test locate rank validation"""
        with self.assertRaises(ValueError):
            self.alpha.locate(Fraction(1, 3), 0)

    def test_split_join(self):
        """Test split and join"""
        for x in (Fraction(-5), Fraction(-1, 3), Fraction(0), Fraction(9, 4)):
            self.assertEqual(self.alpha.join(self.alpha.split(x)), x)
            self.assertEqual(self.beta.join(self.beta.split(x)), x)

    def test_alpha_interpolate(self):
        """Test interpolation in framed coordinates"""
        point = self.alpha.interpolate(self.alpha.split(-3), self.alpha.split(5), Fraction(1, 2))
        self.assertEqual(self.alpha.join(point), 1)
        point = self.alpha.interpolate(self.alpha.split(1), self.alpha.split(2), Fraction(1, 4))
        self.assertEqual(self.alpha.join(point), Fraction(5, 4))

    def test_product_rectangles(self):
        """Test product rectangles"""
        rectangles = product_rectangles(self.alpha, 1, [0, 1], dim=2)
        self.assertEqual(len(rectangles), 4)
        self.assertEqual(rectangles[0].center, (Fraction(0), Fraction(0)))
        self.assertEqual(rectangles[-1].center, (Fraction(3, 2), Fraction(3, 2)))
        self.assertEqual(rectangles[-1].rank, 1)


if __name__ == '__main__':
    unittest.main()
