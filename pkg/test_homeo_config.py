#!/usr/bin/env python3
"""
Tests for experiment configuration
==================================
"""

import json
import os
import tempfile
import unittest
from fractions import Fraction
from unittest.mock import patch

from homeo_config import (
    ExperimentConfig,
    default_out_dir,
    load_config,
    parallel_map,
    worker_count,
)


class TestEnvironment(unittest.TestCase):

    @patch.dict(os.environ, {"MULTIHOMEO_THREADS": "4"})
    def test_worker_count(self):
        """Test worker count read from the environment"""
        self.assertEqual(worker_count(), 4)

    @patch.dict(os.environ, {"MULTIHOMEO_THREADS": "many"})
    def test_worker_count_must_be_an_integer(self):
        """Test non-integer thread counts are rejected"""
        with self.assertRaises(ValueError):
            worker_count()

    @patch.dict(os.environ, {"MULTIHOMEO_THREADS": "0"})
    def test_worker_count_must_be_positive(self):
        """Test zero threads are rejected"""
        with self.assertRaises(ValueError):
            worker_count()

    @patch.dict(os.environ, {"MULTIHOMEO_OUT": "/tmp/multihomeo-test"})
    def test_out_dir_from_environment(self):
        """Test output directory override"""
        self.assertEqual(default_out_dir(), "/tmp/multihomeo-test")
        self.assertEqual(ExperimentConfig().out_dir, "/tmp/multihomeo-test")

    def test_parallel_map_keeps_order(self):
        """Test pooled map returns results in input order"""
        items = list(range(20))
        self.assertEqual(parallel_map(lambda x: x * x, items, workers=4), [x * x for x in items])
        self.assertEqual(parallel_map(lambda x: -x, items, workers=1), [-x for x in items])


class TestExperimentConfig(unittest.TestCase):

    def test_defaults_are_valid(self):
        """Test default configuration"""
        config = ExperimentConfig()
        config.validate()
        self.assertEqual(config.offset_fraction(), Fraction(1, 3))
        self.assertFalse(config.use_jitter())

    def test_jitter_defaults_on_for_characters(self):
        """Test jitter follows the scenario unless set"""
        self.assertTrue(ExperimentConfig(scenario="remark5").use_jitter())
        self.assertFalse(ExperimentConfig(scenario="remark5", jitter=False).use_jitter())

    def test_invalid_fields(self):
        """Test each bad field raises ValueError"""
        cases = [
            {"scenario": "thm3"},
            {"dim": 4},
            {"grid": 1000},
            {"grid_sweep": [64, 96]},
            {"symbol_offset": "3/2"},
            {"p_values": [1.0]},
            {"character_p": [float("inf")]},
            {"bohr_pal_p": [0.5]},
            {"family": {"kind": "sawtooth"}},
            {"family": {"kind": "weierstrass", "a": 0.2, "b": 4}},
            {"family": {"kind": "holder", "alpha": 2}},
            {"c_model": "cubic"},
            {"check_ranks": 13},
            {"max_rank": 1, "check_ranks": 1},
            {"homeomorphism": "radial"},
            {"trials": 0},
            {"gamma": {"kind": "constant"}},
            {"c_ranks": [0]},
        ]
        for case in cases:
            with self.assertRaises(ValueError, msg=str(case)):
                ExperimentConfig(**case).validate()

    def test_telescoping_needs_two_ranks(self):
        """A single-rank net leaves nothing to telescope and is rejected up front."""
        for scenario in ("thm1", "remark5"):
            with self.assertRaisesRegex(ValueError, "max_rank must be >= 2"):
                ExperimentConfig(scenario=scenario, max_rank=1, check_ranks=1).validate()
        ExperimentConfig(max_rank=2, check_ranks=2).validate()

    def test_c_models(self):
        """Test unit and power c models"""
        self.assertEqual(ExperimentConfig(c_model="unit").c_model_fn()(4.0, 3), 1.0)
        self.assertAlmostEqual(ExperimentConfig(dim=1).c_model_fn()(4.0, 1), 32.0)

    def test_dict_round_trip(self):
        """Test config survives to_dict and from_dict"""
        config = ExperimentConfig(grid=256, p_values=[1.5])
        self.assertEqual(ExperimentConfig.from_dict(config.to_dict()), config)

    def test_unknown_keys_rejected(self):
        """Test unknown keys are rejected"""
        with self.assertRaises(ValueError):
            ExperimentConfig.from_dict({"grid": 64, "grids": [64]})


class TestLoadConfig(unittest.TestCase):

    def test_load_from_file(self):
        """Test loading a JSON config"""
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "config.json")
            with open(path, "w", encoding="utf-8") as f:
                json.dump({"grid": 128, "family": {"kind": "chirp"}, "seed": 3}, f)
            config = load_config(path)
        self.assertEqual(config.grid, 128)
        self.assertEqual(config.family, {"kind": "chirp"})
        self.assertEqual(config.seed, 3)
        self.assertEqual(config.dim, 1)

    def test_missing_file(self):
        """Test missing config file"""
        with self.assertRaises(FileNotFoundError):
            load_config("/nonexistent/multihomeo.json")


if __name__ == '__main__':
    unittest.main()
