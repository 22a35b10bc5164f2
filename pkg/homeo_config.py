#!/usr/bin/env python3
"""
Experiment Configuration
========================

Configuration of the multihomeo experiments: a JSON file loaded into an
``ExperimentConfig``, environment settings read from ``.env`` and the
process environment, and the worker pool used by estimator trials.

Environment variables:
    MULTIHOMEO_THREADS: worker cap for trial evaluation (default 1)
    MULTIHOMEO_OUT: default output directory (default ``results``)
"""

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional

from dotenv import load_dotenv

from homeo_modulus import CModel, default_c_model, gamma_sequence, unit_c_model
from homeo_spectral import is_power_of_two

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_FILE = "multihomeo_config.json"
SCENARIOS = ("thm1", "thm2", "remark5", "bohr-pal", "lp-audit", "selftest")
FAMILY_KINDS = ("constant", "lipschitz", "holder", "weierstrass", "trigonometric", "chirp", "characters")
GAMMA_KINDS = ("log", "power", "loglog")


def load_environment(dotenv_path: Optional[str] = None) -> None:
    """Read ``.env`` into the process environment without overriding it."""
    load_dotenv(dotenv_path, override=False)


def worker_count() -> int:
    raw = os.getenv("MULTIHOMEO_THREADS", "1")
    try:
        count = int(raw)
    except ValueError:
        raise ValueError(f"MULTIHOMEO_THREADS must be an integer, got {raw!r}")
    if count < 1:
        raise ValueError(f"MULTIHOMEO_THREADS must be >= 1, got {count}")
    return count


def default_out_dir() -> str:
    return os.getenv("MULTIHOMEO_OUT", "results")


def parallel_map(func: Callable, items: Iterable, workers: Optional[int] = None) -> List:
    """
    Order-preserving map over a thread pool of at most MULTIHOMEO_THREADS workers.

    Results come back in input order, so seeded trials give the same
    aggregate regardless of scheduling.
    """
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))


@dataclass
class ExperimentConfig:
    """
    Parameters of one experiment run.

    Attributes:
        scenario: Subcommand the config is meant for
        dim: Dimension d in {1, 2, 3}
        grid: Grid size N (power of two)
        grid_sweep: Grid sizes of stability sweeps
        box: Half width B of the truncated symbol box
        symbol_offset: Offset theta of the symbol grid, as a fraction string
        p_values: Exponents of the norm estimates
        family: Function family spec, ``{"kind": ..., **params}``
        c_constant: Constant C of the power c_model
        c_model: ``power`` (C max(p, q))^(d nu) or ``unit``
        max_rank: Deepest net rank used by phi
        tolerance: Target-length cutoff of phi descents
        check_ranks: Ranks nu checked by the approximation suite
        jitter: Use jittered beta children (None: on for remark5 only)
        homeomorphism: ``net`` or ``identity``
        seed: Master seed
        trials: Random trials of empirical constants and c estimates
        iterations: Power iterations per start
        restarts: Starts per lower bound
        gamma: Growth sequence spec for the character family
        n_max: Largest |n| of the character family
        character_p: Exponents of the character experiment
        bohr_pal_p: Exponents of the coefficient sums
        piecewise_linear_control: Add the piecewise-linear circle map control
        check_tolerance: Absolute slack of floating-point inequality checks, per unit of the family bound
        radial_shells: Shells certified by the radial Lipschitz check
        radial_pairs: Sample pairs per shell
        radial_grid: Grid points of the composed-modulus check
        c_ranks: Ranks of the reported c(p, nu) estimates
        out_dir: Output directory
    """

    scenario: str = "thm1"
    dim: int = 1
    grid: int = 1024
    grid_sweep: List[int] = field(default_factory=lambda: [512, 1024, 2048])
    box: float = 64.0
    symbol_offset: str = "1/3"
    p_values: List[float] = field(default_factory=lambda: [4 / 3, 1.5, 2.0, 3.0, 4.0])
    family: Dict = field(default_factory=lambda: {"kind": "weierstrass", "a": 0.5, "b": 4.0, "terms": 8})
    c_constant: float = 8.0
    c_model: str = "power"
    max_rank: int = 12
    tolerance: float = 2.0 ** -16
    check_ranks: int = 6
    jitter: Optional[bool] = None
    homeomorphism: str = "net"
    seed: int = 0
    trials: int = 50
    iterations: int = 50
    restarts: int = 8
    gamma: Dict = field(default_factory=lambda: {"kind": "log", "shift": 2.0})
    n_max: int = 64
    character_p: List[float] = field(default_factory=lambda: [4 / 3, 4.0])
    bohr_pal_p: List[float] = field(default_factory=lambda: [1.1, 1.5, 2.0])
    piecewise_linear_control: bool = True
    check_tolerance: float = 1e-12
    radial_shells: int = 10
    radial_pairs: int = 10000
    radial_grid: int = 2 ** 14
    c_ranks: List[int] = field(default_factory=lambda: [1, 2])
    out_dir: str = field(default_factory=default_out_dir)

    def validate(self) -> None:
        """
        Check every field.

        Raises:
            ValueError: naming the first offending field
        """
        if self.scenario not in SCENARIOS:
            raise ValueError(f"Unknown scenario '{self.scenario}', expected one of {SCENARIOS}")
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        for n in [self.grid] + list(self.grid_sweep):
            if not is_power_of_two(int(n)) or n < 2:
                raise ValueError(f"Grid size must be a power of two >= 2, got {n}")
        if self.box <= 0:
            raise ValueError(f"box must be positive, got {self.box}")
        offset = self.offset_fraction()
        if not 0 <= offset < 1:
            raise ValueError(f"symbol_offset must lie in [0, 1), got {self.symbol_offset}")
        for p in list(self.p_values) + list(self.character_p):
            if not 1 < p < math.inf:
                raise ValueError(f"p values must lie in (1, inf), got {p}")
        for p in self.bohr_pal_p:
            if not 1 <= p < math.inf:
                raise ValueError(f"bohr_pal_p values must lie in [1, inf), got {p}")
        self._validate_family(self.family)
        if self.c_model not in ("power", "unit"):
            raise ValueError(f"c_model must be 'power' or 'unit', got {self.c_model!r}")
        if self.c_constant <= 0:
            raise ValueError(f"c_constant must be positive, got {self.c_constant}")
        if self.max_rank < 2:
            raise ValueError(f"max_rank must be >= 2 (the telescoping bound starts at rank 2), got {self.max_rank}")
        if self.check_ranks < 1:
            raise ValueError(f"check_ranks must be >= 1, got {self.check_ranks}")
        if self.check_ranks > self.max_rank:
            raise ValueError(f"check_ranks {self.check_ranks} exceeds max_rank {self.max_rank}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.homeomorphism not in ("net", "identity"):
            raise ValueError(f"homeomorphism must be 'net' or 'identity', got {self.homeomorphism!r}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        for name in ("trials", "iterations", "restarts", "n_max", "radial_shells", "radial_pairs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not is_power_of_two(self.radial_grid):
            raise ValueError(f"radial_grid must be a power of two, got {self.radial_grid}")
        if self.gamma.get("kind", "log") not in GAMMA_KINDS:
            raise ValueError(f"gamma kind must be one of {GAMMA_KINDS} (diverging sequences only)")
        gamma_sequence(self.gamma)
        if any(r < 1 for r in self.c_ranks):
            raise ValueError("c_ranks must be >= 1")

    @staticmethod
    def _validate_family(spec: Dict) -> None:
        kind = spec.get("kind")
        if kind not in FAMILY_KINDS:
            raise ValueError(f"Unknown family kind {kind!r}, expected one of {FAMILY_KINDS}")
        if kind == "holder":
            alpha = float(spec.get("alpha", 0.5))
            if not 0 < alpha <= 1:
                raise ValueError(f"Holder alpha must lie in (0, 1], got {alpha}")
        if kind == "weierstrass":
            a, b = float(spec.get("a", 0.5)), float(spec.get("b", 4.0))
            if not 0 < a < 1:
                raise ValueError(f"Weierstrass a must lie in (0, 1), got {a}")
            if not (b >= 2 and b.is_integer()):
                raise ValueError(f"Weierstrass b must be an integer >= 2, got {b}")
            if a * b < 1:
                raise ValueError(f"Weierstrass parameters need a * b >= 1, got {a * b}")

    def use_jitter(self) -> bool:
        if self.jitter is None:
            return self.scenario == "remark5"
        return bool(self.jitter)

    def offset_fraction(self) -> Fraction:
        return Fraction(self.symbol_offset)

    def c_model_fn(self) -> CModel:
        if self.c_model == "unit":
            return unit_c_model
        return default_c_model(self.c_constant, self.dim)

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> "ExperimentConfig":
        """
        Build a config from a dict.

        Raises:
            ValueError: the dict contains unknown keys
        """
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"Unknown configuration keys: {unknown}")
        return cls(**data)


def load_config(config_path: Optional[str] = None) -> ExperimentConfig:
    """
    Load configuration from a JSON file.

    Without a path, ``multihomeo_config.json`` next to this module is used
    when it exists, otherwise the defaults.

    Args:
        config_path: Path to the configuration file

    Returns:
        Unvalidated ExperimentConfig
    """
    if config_path is None:
        candidate = os.path.join(os.path.dirname(os.path.abspath(__file__)), DEFAULT_CONFIG_FILE)
        if not os.path.exists(candidate):
            return ExperimentConfig()
        config_path = candidate
    if not os.path.exists(config_path):
        raise FileNotFoundError(f"Configuration file not found: {config_path}")
    with open(config_path, "r", encoding="utf-8") as f:
        data = json.load(f)
    logger.debug(f"Loaded configuration from {config_path}")
    return ExperimentConfig.from_dict(data)
