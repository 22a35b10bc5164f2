#!/usr/bin/env python3
"""
Experiment Pipelines
====================

One pipeline per subcommand. Each pipeline builds its constructions from an
``ExperimentConfig``, runs named inequality checks and collects norm
estimates and plot series into a ``RunReport``:

- thm1: radial homeomorphism psi (when needed), net widths, phi and h, approximants g_nu,
  telescoping bound, norm estimates of g = f o h and a grid-size sweep;
- thm2: the same on the torus through phi_1 and h_2, with the periodized
  cube restriction compared against the direct torus symbol;
- remark5: norms of e^(i n phi_1) against a slowly growing gamma(n);
- bohr-pal: partial sums of |c_k|^p for f and f o h;
- lp-audit: empirical Littlewood-Paley constants under dyadic refinement;
- selftest: a fast subset of the exactness and sandwich checks.
"""

import csv
import json
import logging
import math
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from homeo_config import ExperimentConfig, parallel_map
from homeo_maps import (
    TWO_PI,
    CoordinateHomeo,
    LineHomeo,
    NetHomeo,
    PiecewiseLinearHomeo,
    RadialHomeo,
    TorusHomeo,
    collinear_endpoint_triples,
    composed_modulus,
    composition_bound,
    identity_homeo,
    radial_build,
    radial_lipschitz_check,
    symbol_from_family,
)
from homeo_mnorm import (
    REFLECTION,
    GridAffineMap,
    MultiplierSymbol,
    affine_invariance_check,
    estimate_c,
    estimate_norm,
    lower_bound,
    norm_m2,
    telescope_bound,
    upper_bound,
)
from homeo_modulus import (
    FunctionFamily,
    Modulus,
    build_family,
    character_family,
    estimate_modulus,
    format_scale,
    gamma_sequence,
    select_delta,
)
from homeo_nets import (
    AlphaNet,
    BetaNet,
    EndpointHit,
    Interval,
    NetAddress,
    dyadic_interval,
    dyadic_line,
    net_alpha,
    net_beta,
    pow2,
)
from homeo_spectral import (
    GridSignal,
    SymbolGrid,
    approximant,
    cube_grid,
    cube_indicator,
    dyadic_partition,
    empirical_lp_constants,
    full_band_partition,
    oscillation,
    periodize,
    random_signal,
    refine_partition_dyadic,
    spectrum,
    square_function,
    torus_grid,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
CHECK_COLUMNS = ["name", "passed", "measured", "bound", "slack", "p", "N", "n", "rank", "acceptance", "note"]
SERIES_COLUMNS = ["series", "x", "y", "p", "N"]


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``cause`` is the original error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"Stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class CheckResult:
    """
    One named inequality measured <= bound.

    Attributes:
        name: Check name
        passed: Whether the inequality held
        measured: Measured left-hand side
        bound: Right-hand side, slack included
        slack: bound - measured
        acceptance: Whether the check decides the exit status
        p: Exponent, when the check is per exponent
        N: Grid size
        n: Index (shell, character, ...)
        rank: Net rank
        note: Free text
    """

    name: str
    passed: bool
    measured: float
    bound: float
    slack: float
    acceptance: bool = True
    p: Optional[float] = None
    N: Optional[int] = None
    n: Optional[int] = None
    rank: Optional[int] = None
    note: str = ""


@dataclass
class RunReport:
    scenario: str
    config: Dict
    checks: List[CheckResult] = field(default_factory=list)
    estimates: List[Dict] = field(default_factory=list)
    series: List[Dict] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)
    operations_log: List[str] = field(default_factory=list)
    error: Optional[Dict] = None

    @property
    def success(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks if c.acceptance)

    def failed_checks(self) -> List[CheckResult]:
        return [c for c in self.checks if c.acceptance and not c.passed]


class ReportFormatter:
    """
    Formats run reports as JSON and CSV.

    The ``timing`` block is the only wall-clock field of a report.
    """

    def __init__(self):
        self.start_time = time.time()

    def format_output(self, report: RunReport) -> Dict:
        elapsed = time.time() - self.start_time
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": report.scenario,
            "success": report.success,
            "config": report.config,
            "checks": [asdict(c) for c in report.checks],
            "estimates": report.estimates,
            "series": report.series,
            "flags": report.flags,
            "operations_log": report.operations_log,
            "error": report.error,
            "timing": {"execution_time": f"{elapsed:.2f}s"},
        }

    def write(self, report: RunReport, out_dir: str) -> Dict[str, str]:
        """
        Write ``<scenario>.json``, ``<scenario>_checks.csv`` and ``<scenario>_series.csv``.

        Returns:
            Mapping of artifact kind to path
        """
        os.makedirs(out_dir, exist_ok=True)
        stem = report.scenario.replace("-", "_")
        paths = {
            "report": os.path.join(out_dir, f"{stem}.json"),
            "checks": os.path.join(out_dir, f"{stem}_checks.csv"),
            "series": os.path.join(out_dir, f"{stem}_series.csv"),
        }
        with open(paths["report"], "w", encoding="utf-8") as f:
            json.dump(self.format_output(report), f, indent=2, ensure_ascii=False)
        with open(paths["checks"], "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=CHECK_COLUMNS)
            writer.writeheader()
            for check in report.checks:
                writer.writerow({k: v for k, v in asdict(check).items() if k in CHECK_COLUMNS})
        with open(paths["series"], "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=SERIES_COLUMNS)
            writer.writeheader()
            for row in report.series:
                writer.writerow({k: row.get(k) for k in SERIES_COLUMNS})
        logger.info(f"Report written to {paths['report']}")
        return paths


class _ImageCache:
    """
    phi values at points, computed once per point.

    Descents that hit max_rank before the tolerance are counted together
    with the widest target interval they stopped in.
    """

    def __init__(self, phi):
        self.phi = phi
        self._values: Dict = {}
        self.unconverged = 0
        self.widest = 0.0

    def __call__(self, points: Sequence) -> np.ndarray:
        out = np.empty(len(points))
        for i, x in enumerate(points):
            value = self._values.get(x)
            if value is None:
                result = self.phi.evaluate(x)
                if not result.converged:
                    self.unconverged += 1
                    self.widest = max(self.widest, result.width)
                value = result.value
                self._values[x] = value
            out[i] = value
        return out


class ExperimentRunner:
    """
    Runs the experiment pipelines for one configuration.
    """

    def __init__(self, config: ExperimentConfig):
        """
        Initialize the runner.

        Args:
            config: Experiment configuration, validated here
        """
        config.validate()
        self.config = config
        self.operations_log: List[str] = []
        self.checks: List[CheckResult] = []
        self.estimates: List[Dict] = []
        self.series: List[Dict] = []
        self.flags: List[str] = []
        self.mapper: Callable = parallel_map
        self.c_model = config.c_model_fn()

    def get_operations_log(self) -> List[str]:
        """
        Get the operations log.

        Returns:
            List of operation log entries
        """
        return self.operations_log

    # plumbing -----------------------------------------------------------
    @contextmanager
    def _stage(self, name: str):
        self.operations_log.append(f"Stage started: {name}")
        logger.info(f"Stage: {name}")
        try:
            yield
        except StageError:
            raise
        except Exception as e:
            self.operations_log.append(f"ERROR: stage {name}: {e}")
            raise StageError(name, e) from e
        self.operations_log.append(f"Stage completed: {name}")

    def _check(self, name: str, measured: float, bound: float, acceptance: bool = True,
               **context) -> CheckResult:
        measured, bound = float(measured), float(bound)
        passed = bool(np.isfinite(measured) and measured <= bound)
        result = CheckResult(name, passed, measured, bound, bound - measured, acceptance, **context)
        self.checks.append(result)
        if not passed:
            level = logging.WARNING if acceptance else logging.INFO
            logger.log(level, f"Check {name} failed: {measured:.6g} > {bound:.6g} {context}")
        return result

    def _flag(self, flag: str) -> None:
        if flag not in self.flags:
            self.flags.append(flag)
            self.operations_log.append(f"WARNING: {flag}")
            logger.warning(flag)

    def _descent_flag(self, images: _ImageCache, stage: str) -> None:
        if images.unconverged:
            self._flag(f"{images.unconverged} phi evaluations in {stage} stopped at max_rank={self.config.max_rank} "
                       f"above tolerance {self.config.tolerance:g}, widest target interval {images.widest:.3g}")
            images.unconverged, images.widest = 0, 0.0

    def _series(self, series: str, x, y, p: Optional[float] = None, n: Optional[int] = None) -> None:
        self.series.append({"series": series, "x": x, "y": float(y), "p": p, "N": n})

    def _report(self, scenario: str) -> RunReport:
        return RunReport(scenario, self.config.to_dict(), self.checks, self.estimates, self.series,
                         self.flags, self.operations_log)

    def _slack(self, scale: float) -> float:
        return self.config.check_tolerance * max(scale, 1.0)

    # shared constructions ------------------------------------------------
    def _nets(self, omega: Modulus):
        cfg = self.config
        deltas = select_delta(omega, self.c_model, cfg.dim, cfg.max_rank)
        self.operations_log.append(f"delta_1..delta_{len(deltas)} selected, delta_1 = {format_scale(deltas[0])}, "
                                   f"delta_{len(deltas)} = {format_scale(deltas[-1])}")
        alpha = net_alpha()
        beta = net_beta(deltas, jitter=cfg.use_jitter(), seed=cfg.seed)
        return alpha, beta, deltas

    def _phi(self, alpha: AlphaNet, beta: BetaNet) -> LineHomeo:
        cfg = self.config
        if cfg.homeomorphism == "identity":
            self.operations_log.append("Using the identity homeomorphism")
            return identity_homeo()
        return NetHomeo(alpha, beta, cfg.max_rank, Fraction(cfg.tolerance), min_rank=cfg.check_ranks)

    def _estimate(self, values: np.ndarray, p: float, label: str, **extra):
        cfg = self.config
        symbol = MultiplierSymbol(values)
        estimate = estimate_norm(symbol, p, cfg.iterations, cfg.restarts, cfg.seed,
                                 mapper=self.mapper)
        entry = {"label": label, **extra, **estimate.to_dict()}
        self.estimates.append(entry)
        self._check("estimate-sandwich", estimate.lower, estimate.upper, p=p, N=estimate.n,
                    note=label)
        return estimate

    def _radial_map(self, family: FunctionFamily):
        """Radial homeomorphism for a family that is only equicontinuous on shells."""
        cfg = self.config
        shells = cfg.radial_shells + 1
        omegas = [family.shell(j) for j in range(shells + 1)]
        psi = radial_build(omegas)
        self.operations_log.append(f"Radial homeomorphism built with {psi.shells} shells, "
                                   f"r_{psi.shells} = {psi.r[-1]:.6g}")
        for j in range(cfg.radial_shells + 1):
            ratio = radial_lipschitz_check(psi, j, cfg.radial_pairs, cfg.seed, cfg.dim)
            self._check("radial-shell-lipschitz", ratio, psi.b[j] * (1 + 1e-9), n=j)
        spacing = 2.0 ** -9
        offsets = spacing * (np.arange(cfg.radial_grid) - cfg.radial_grid // 2)
        slack = self._slack(family.bound)
        for j in range(1, cfg.radial_shells + 1):
            t = psi.r[j] + offsets
            moved = psi(t)
            values = [np.asarray(member(moved)) for member in family.members]
            for k in range(1, 9):
                delta = 2.0 ** -k
                found = [estimate_modulus(v, delta, spacing) for v in values]
                if any(e.underestimate for e in found):
                    self._flag(f"grid spacing {spacing:g} exceeds delta {delta:g}, composed modulus underestimated")
                measured = max(e.value for e in found)
                self._check("radial-composed-modulus", measured,
                            composition_bound(psi, omegas, delta) + slack, n=j, note=f"delta=2^-{k}")
        return psi, composed_modulus(psi, omegas)

    def _symbol(self, member: Callable, images: _ImageCache, psi: Optional[RadialHomeo]):
        def symbol(axis_points):
            axes = [images(points) for points in axis_points]
            return symbol_from_family(member, axes, psi)
        return symbol

    def _net_checks(self, phi: LineHomeo, alpha: AlphaNet, beta: BetaNet, deltas: Sequence[float]) -> None:
        cfg = self.config
        if not isinstance(phi, NetHomeo):
            return
        window = range(-2, 3)
        mismatches = over_width = 0
        paths = [()]
        for rank in range(1, min(3, cfg.check_ranks) + 1):
            paths = [path + (s,) for path in paths for s in window]
            width = Fraction(deltas[rank - 1])
            for path in paths:
                address = NetAddress(path)
                source, target = alpha.interval(address), beta.interval(address)
                if phi.evaluate(source.lo).exact != target.lo or phi.evaluate(source.hi).exact != target.hi:
                    mismatches += 1
                if target.length > width:
                    over_width += 1
        self._check("phi-endpoints-exact", mismatches, 0)
        self._check("net-width", over_width, 0)

        rng = np.random.default_rng([cfg.seed, 3])
        samples = sorted({Fraction(x) for x in rng.uniform(-cfg.box, cfg.box, size=1000)})
        images = [phi.evaluate(x).exact for x in samples]
        decreasing = sum(1 for a, b in zip(images, images[1:]) if not a < b)
        self._check("phi-strictly-increasing", decreasing, 0, n=len(samples))

        inverse = phi.inverse()
        too_far = 0
        worst = Fraction(0)
        for x, y in zip(samples[:128], images[:128]):
            back = inverse.evaluate(y).exact
            found = alpha.locate(x, cfg.check_ranks)
            allowed = Fraction(0) if isinstance(found, EndpointHit) else alpha.interval(found).length
            worst = max(worst, abs(back - x))
            if abs(back - x) > allowed:
                too_far += 1
        self._check("phi-round-trip", too_far, 0, rank=cfg.check_ranks, note=f"max error {float(worst):.3g}")

    # pipelines ----------------------------------------------------------
    def run_thm1(self) -> RunReport:
        """Homeomorphism, approximants and norm estimates of g = f o h on R^d."""
        cfg = self.config
        with self._stage("family"):
            family = build_family(cfg.family)
            self.operations_log.append(f"Family '{family.name}' with {len(family.members)} members")
        psi = None
        omega = family.modulus
        if omega is None:
            with self._stage("radial_map"):
                psi, omega = self._radial_map(family)
        with self._stage("select_delta"):
            alpha, beta, deltas = self._nets(omega)
        with self._stage("homeomorphism"):
            phi = self._phi(alpha, beta)
            self._net_checks(phi, alpha, beta, deltas)
        root_d = math.sqrt(cfg.dim)
        on_net = isinstance(phi, NetHomeo)
        slack = self._slack(family.bound)
        images = _ImageCache(phi)
        symbols = [self._symbol(member, images, psi) for member in family.members]
        grid = SymbolGrid(cfg.grid, cfg.dim, cfg.box, cfg.offset_fraction())
        self._flag(f"symbol truncated to the box [-{cfg.box:g}, {cfg.box:g})^{cfg.dim}")
        with self._stage("symbol"):
            g = [np.asarray(fn(grid.axes())) for fn in symbols]
        self._descent_flag(images, "symbol")
        approximants: List[np.ndarray] = []
        with self._stage("approximation"):
            previous = None
            for nu in range(1, cfg.check_ranks + 1):
                current = [approximant(grid, nu, alpha, fn) for fn in symbols]
                if current[0].hits:
                    self.operations_log.append(f"{current[0].hits} grid points on rank-{nu} endpoints")
                error = max(float(np.max(np.abs(gi - a.values))) for gi, a in zip(g, current))
                self._check("approximation-error", error, omega(deltas[nu - 1] * root_d) + slack,
                            N=cfg.grid, rank=nu, acceptance=on_net)
                self._series("approximation-error", nu, error, n=cfg.grid)
                if previous is not None:
                    step = max(float(np.max(np.abs(a.values - b.values))) for a, b in zip(current, previous))
                    self._check("approximant-increment", step, 2 * omega(deltas[nu - 2] * root_d) + slack,
                                N=cfg.grid, rank=nu, acceptance=on_net)
                previous = current
                approximants.append(current[0].values)
            self._oscillation_checks(grid, g, phi, alpha, omega, slack, deltas, on_net)
        with self._stage("telescope"):
            p_top = max(cfg.p_values)
            for p in cfg.p_values:
                bound = telescope_bound(deltas, omega, p, self.c_model, cfg.dim)
                self._check("telescope-summable", 0 if bound.summable else 1, 0, p=p)
                for n in range(1, bound.last):
                    tail = bound.tail(n)
                    self._series("telescope-tail", n, tail, p=p)
                    if n >= bound.certified_from:
                        self._check("telescope-geometric-tail", tail, 2.0 * 2.0 ** -n * (1 + 1e-9), p=p, n=n)
                if p == p_top and p != 2:
                    for nu in range(2, len(approximants) + 1):
                        diff = approximants[nu - 1] - approximants[nu - 2]
                        measured = lower_bound(MultiplierSymbol(diff), p, cfg.iterations, cfg.restarts,
                                               cfg.seed, mapper=self.mapper).value
                        self._check("increment-norm-measured", measured, bound.segment(nu - 1, 1), acceptance=False,
                                    p=p, N=cfg.grid, rank=nu, note="grid lower estimate vs model term")
        with self._stage("norm_estimates"):
            for p in cfg.p_values:
                estimate = self._estimate(g[0], p, "g", member=0)
                self._check("estimate-finite", 0 if np.isfinite(estimate.lower) else 1, 0, p=p, N=cfg.grid)
        with self._stage("c_estimates"):
            for p in cfg.p_values:
                for rank in cfg.c_ranks:
                    value = estimate_c(p, rank, alpha, grid, cfg.trials, cfg.seed, cfg.iterations,
                                       cfg.restarts, mapper=self.mapper)
                    self.estimates.append({"label": "c", "p": p, "rank": rank, "N": cfg.grid,
                                           "value": value, "model": self.c_model(p, rank),
                                           "trials": cfg.trials, "seed": cfg.seed})
                    self._check("c-estimate-at-least-one", 1.0 - value, 1e-12, p=p, rank=rank)
        with self._stage("sweep"):
            self._sweep(symbols[0], max(cfg.p_values), "sweep-g", lambda n: SymbolGrid(
                n, cfg.dim, cfg.box, cfg.offset_fraction()).axes())
        self._descent_flag(images, "sweep")
        return self._report("thm1")

    def _oscillation_checks(self, grid: SymbolGrid, g: List[np.ndarray], phi: LineHomeo,
                            alpha: AlphaNet, omega: Modulus, slack: float,
                            deltas: Sequence[float], on_net: bool) -> None:
        cfg = self.config
        axis = grid.floats()
        h = CoordinateHomeo(phi, cfg.dim)
        for rank in (1, 2):
            addresses = []
            for x in grid.points():
                found = alpha.locate(x, rank)
                if isinstance(found, NetAddress) and found not in addresses:
                    addresses.append(found)
                if len(addresses) == 16:
                    break
            width = Fraction(deltas[rank - 1])
            widest = Fraction(0)
            for address in addresses:
                interval = alpha.interval(address)
                image = h.image_rectangle([interval] * cfg.dim)
                widest = max(widest, max(side.length for side in image))
                diam = math.sqrt(sum(float(side.length) ** 2 for side in image))
                try:
                    measured = max(oscillation(gi, [axis] * cfg.dim, [interval] * cfg.dim) for gi in g)
                except ValueError:
                    continue
                self._check("oscillation", measured, omega(diam) + slack, rank=rank, N=cfg.grid)
            if addresses:
                # diam h(R) <= delta_rank sqrt(d) is side length <= delta_rank on a cube
                self._check("rectangle-diameter", float(widest / width), 1.0, acceptance=on_net, rank=rank,
                            note="diam h(R) / (delta sqrt(d))")

    def _sweep(self, symbol: Callable, p: float, series: str, axes_for: Callable) -> None:
        cfg = self.config
        values = []
        for n in cfg.grid_sweep:
            m = MultiplierSymbol(np.asarray(symbol(axes_for(n))))
            if p == 2:
                value = norm_m2(m)
            else:
                value = lower_bound(m, p, cfg.iterations, cfg.restarts, cfg.seed, mapper=self.mapper).value
            values.append(value)
            self._series(series, n, value, p=p, n=n)
        if len(values) > 1 and min(values) > 0:
            self._check("sweep-stability", max(values) / min(values), 2.0, p=p,
                        note=f"grid sizes {list(cfg.grid_sweep)}")

    def run_thm2(self) -> RunReport:
        """The same construction on the torus through phi_1 and h_2."""
        cfg = self.config
        with self._stage("family"):
            family = build_family(cfg.family)
            if family.domain != "torus":
                raise ValueError(f"Family '{family.name}' is not 2 pi-periodic")
        with self._stage("select_delta"):
            alpha, beta, deltas = self._nets(family.modulus)
        with self._stage("torus_adapt"):
            phi = self._phi(alpha, beta)
            phi1 = TorusHomeo(phi)
            lo, hi = phi1.endpoint_images()
            exact = lo == 0 and hi == TWO_PI
            self._check("phi1-endpoints-exact", 0 if exact else 1, 0,
                        note=f"phi_1(0) = {float(lo)!r}, phi_1(2 pi) = {float(hi)!r}")
        member = family.members[0]
        slack = self._slack(family.bound)

        def direct(axis_values: np.ndarray) -> np.ndarray:
            return np.asarray(member(*np.meshgrid(*[axis_values] * cfg.dim, indexing="ij")))

        sizes = sorted(set(cfg.grid_sweep) | {cfg.grid})
        cache = _ImageCache(phi1)
        p_top = max(cfg.p_values)
        transformed_top = []
        for n in sizes:
            with self._stage(f"torus_symbol_N{n}"):
                t = torus_grid(n)
                images = cache(t)
                plain, moved = direct(t), direct(images)
                if n == cfg.grid:
                    self._periodize_check(phi1, member, moved, slack)
            with self._stage(f"norm_estimates_N{n}"):
                for p in cfg.p_values:
                    self._estimate(plain, p, "f", N=n)
                    estimate = self._estimate(moved, p, "f o h2", N=n)
                    if p == p_top:
                        transformed_top.append(estimate.lower)
                        self._series("thm2-transformed", n, estimate.lower, p=p, n=n)
        self._descent_flag(cache, "torus_symbol")
        if len(transformed_top) > 1 and min(transformed_top) > 0:
            self._check("sweep-stability", max(transformed_top) / min(transformed_top), 2.0, p=p_top,
                        note=f"grid sizes {sizes}")
        return self._report("thm2")

    def _periodize_check(self, phi1: TorusHomeo, member: Callable, direct: np.ndarray, slack: float) -> None:
        """1_[0, 2 pi)^d (f o h_1) on the cube grid, folded, against the torus symbol."""
        cfg = self.config
        n = cfg.grid
        t = cube_grid(n)
        inside = cube_indicator(t)
        axis = np.zeros_like(t)
        for j in np.flatnonzero(inside):
            axis[j] = phi1.evaluate(t[j]).value
        mesh = np.meshgrid(*[axis] * cfg.dim, indexing="ij")
        mask = np.ones(mesh[0].shape)
        for m in np.meshgrid(*[inside] * cfg.dim, indexing="ij"):
            mask = mask * m
        m0 = np.asarray(member(*mesh)) * mask
        folded = periodize(m0, n, (-(n // 2),) * cfg.dim)
        self._check("periodize-consistency", float(np.max(np.abs(folded - direct))), slack, N=n)

    def run_remark5(self) -> RunReport:
        """Character norms ||e^(i n h)||_{M_p} against gamma(n)."""
        cfg = self.config
        with self._stage("config"):
            if cfg.dim != 1:
                raise ValueError("remark5 runs on the circle (dim 1)")
        gamma = gamma_sequence(cfg.gamma)
        with self._stage("family"):
            family = character_family(cfg.gamma, cfg.n_max)
            if gamma(cfg.n_max) < 2 * gamma(0):
                self._flag(f"gamma grows less than twofold up to n_max={cfg.n_max}")
        with self._stage("select_delta"):
            alpha, beta, deltas = self._nets(family.modulus)
        with self._stage("torus_adapt"):
            phi = self._phi(alpha, beta)
            phi1 = TorusHomeo(phi)
            t = torus_grid(cfg.grid)
            cache = _ImageCache(phi1)
            images = cache(t)
        self._descent_flag(cache, "torus_adapt")
        ns = np.arange(cfg.n_max + 1)
        ratios: Dict[float, np.ndarray] = {}
        with self._stage("character_norms"):
            for p in cfg.character_p:
                lowers = np.array([self._character_lower(images, int(n), p) for n in ns])
                ratios[p] = lowers / gamma(ns)
                for n, r in zip(ns, ratios[p]):
                    self._series("character-ratio", int(n), r, p=p, n=cfg.grid)
                self._check("character-constant", abs(lowers[0] - 1.0), 1e-12, p=p, n=0)
                slope = float(np.polyfit(ns.astype(float), ratios[p], 1)[0])
                self._check("character-slope", slope, 0.05, p=p, N=cfg.grid,
                            note="desk-scale proxy of ||e^(inh)|| = O(gamma(n))")
                self._check("character-spread", float(np.max(ratios[p]) / np.min(ratios[p])), 20.0,
                            p=p, N=cfg.grid)
                total = telescope_bound(deltas, family.modulus, p, self.c_model).total()
                model = self.c_model(p, 1) * family.bound + total
                self.estimates.append({"label": "character-model-bound", "p": p, "value": model,
                                       "c_p_1": self.c_model(p, 1), "telescope_total": total})
                self._check("character-model-bound", float(np.max(ratios[p])), model, acceptance=False, p=p)
            for p in cfg.character_p:
                q = p / (p - 1.0)
                partner = next((r for r in cfg.character_p if abs(r - q) < 1e-12 and r > p), None)
                if partner is None:
                    continue
                gap = np.abs(ratios[p] - ratios[partner]) / np.maximum(ratios[p], ratios[partner])
                self._check("character-duality", float(np.max(gap)), 0.1, p=p, N=cfg.grid)
        if cfg.piecewise_linear_control:
            with self._stage("piecewise_linear_control"):
                control = PiecewiseLinearHomeo([0, TWO_PI / 3, 2 * TWO_PI / 3, TWO_PI],
                                               [0, TWO_PI / 2, 3 * TWO_PI / 4, TWO_PI])
                pl_images = control.evaluate_many(t)
                for p in cfg.character_p:
                    for n in ns:
                        self._series("pl-control", int(n), self._character_lower(pl_images, int(n), p),
                                     p=p, n=cfg.grid)
        with self._stage("nowhere_linearity"):
            if isinstance(phi, NetHomeo):
                self._collinearity_audit(alpha, deltas)
        return self._report("remark5")

    def _character_lower(self, images: np.ndarray, n: int, p: float) -> float:
        cfg = self.config
        m = MultiplierSymbol(np.exp(1j * n * images))
        if p == 2:
            return norm_m2(m)
        return lower_bound(m, p, cfg.iterations, cfg.restarts, cfg.seed, mapper=self.mapper).value

    def _collinearity_audit(self, alpha: AlphaNet, deltas: Sequence[float]) -> None:
        cfg = self.config
        for jitter in (False, True):
            beta = net_beta(deltas, jitter=jitter, seed=cfg.seed)
            phi = NetHomeo(alpha, beta, cfg.max_rank, Fraction(cfg.tolerance), min_rank=cfg.check_ranks)
            count = sum(collinear_endpoint_triples(phi, NetAddress(path), range(-8, 9))
                        for path in [(1,), (1, 0), (2, -1)])
            self.estimates.append({"label": "collinear-triples", "jitter": jitter, "value": count})
            self.operations_log.append(f"Collinear endpoint triples with jitter={jitter}: {count}")
            if jitter and count:
                self._flag(f"{count} collinear endpoint triples remain with jitter")

    def run_bohr_pal(self) -> RunReport:
        """Partial sums of |c_k|^p for f and f o h on grids N and 2N."""
        cfg = self.config
        with self._stage("config"):
            if cfg.dim != 1:
                raise ValueError("bohr-pal runs on the circle (dim 1)")
        with self._stage("family"):
            family = build_family(cfg.family)
            if family.domain != "torus":
                raise ValueError(f"Family '{family.name}' is not 2 pi-periodic")
            member = family.members[0]
        with self._stage("torus_adapt"):
            alpha, beta, _ = self._nets(family.modulus)
            cache = _ImageCache(TorusHomeo(self._phi(alpha, beta)))
        exponents = [1.0] + [p for p in cfg.bohr_pal_p if p != 1.0]
        for n in (cfg.grid, 2 * cfg.grid):
            with self._stage(f"coefficients_N{n}"):
                t = torus_grid(n)
                for label, values in (("plain", member(t)), ("h", member(cache(t)))):
                    spec = spectrum(GridSignal(np.asarray(values)))
                    coeffs, freqs = np.abs(spec.coefficients), np.abs(spec.frequencies())
                    for p in exponents:
                        sums = []
                        for j in range(int(math.log2(n // 2))):
                            k = 2 ** j
                            s = float(np.sum(coeffs[freqs <= k] ** p))
                            sums.append(s)
                            self._series(f"bohr-pal-{label}", k, s, p=p, n=n)
                        finite = all(np.isfinite(sums))
                        self._check("bohr-pal-finite", 0 if finite else 1, 0, p=p, N=n, note=label)
                        self.estimates.append({"label": f"bohr-pal-{label}", "p": p, "N": n,
                                               "value": sums[-1] if sums else 0.0,
                                               "last_increment": sums[-1] - sums[-2] if len(sums) > 1 else 0.0})
        self._descent_flag(cache, "coefficients")
        return self._report("bohr-pal")

    def run_lp_audit(self) -> RunReport:
        """Empirical Littlewood-Paley constants across dyadic refinement."""
        cfg = self.config
        with self._stage("config"):
            if cfg.dim != 1:
                raise ValueError("lp-audit runs on the line of frequencies (dim 1)")
        with self._stage("partitions"):
            base = dyadic_partition(cfg.grid)
            refined = refine_partition_dyadic(base)
            twice = refine_partition_dyadic(refined)
            partitions = [("dyadic", base), ("refined", refined), ("refined2", twice),
                          ("full-band", full_band_partition(cfg.grid))]
            for name, partition in partitions:
                partition.validate()
                self._check("partition-valid", 0, 0, N=cfg.grid, note=f"{name}: {len(partition)} intervals")
        with self._stage("lp_constants"):
            for p in cfg.p_values:
                found = {}
                for level, (name, partition) in enumerate(partitions):
                    a, b = empirical_lp_constants(partition, p, cfg.trials, cfg.seed, mapper=self.mapper)
                    found[name] = (a, b)
                    self.estimates.append({"label": "lp-constants", "partition": name, "p": p,
                                           "N": cfg.grid, "a_p": a, "b_p": b,
                                           "trials": cfg.trials, "seed": cfg.seed})
                    self._check("lp-finite", 0 if np.isfinite(a) and np.isfinite(b) else 1, 0,
                                p=p, note=name)
                    if name != "full-band":
                        self._series("lp-b", level, b, p=p, n=cfg.grid)
                    if p == 2 or name == "full-band":
                        self._check("lp-unit", max(abs(a - 1), abs(b - 1)), 1e-8, p=p, note=name)
                if p != 2:
                    drift = found["refined"][1] / found["dyadic"][1]
                    self._check("lp-refinement-drift", drift, 10.0, p=p, N=cfg.grid)
        return self._report("lp-audit")

    def run_selftest(self) -> RunReport:
        """Fast exactness and sandwich checks."""
        cfg = self.config
        with self._stage("dyadic_exactness"):
            self._check("dyadic-exact", _dyadic_mismatches(), 0)
        with self._stage("phi_endpoints"):
            omega = Modulus.lipschitz(1.0, cap=2.0)
            deltas = select_delta(omega, self.c_model, 1, 4)
            alpha, beta = net_alpha(), net_beta(deltas, jitter=cfg.use_jitter(), seed=cfg.seed)
            phi = NetHomeo(alpha, beta, max_rank=4, min_rank=3)
            mismatches = 0
            paths = [()]
            for _ in range(3):
                paths = [path + (s,) for path in paths for s in range(-3, 4)]
                for path in paths:
                    source, target = alpha.interval(NetAddress(path)), beta.interval(NetAddress(path))
                    if phi.evaluate(source.hi).exact != target.hi:
                        mismatches += 1
            self._check("phi-endpoints-exact", mismatches, 0)
        with self._stage("sandwich"):
            rng = np.random.default_rng([cfg.seed, 5])
            for trial in range(8):
                m = MultiplierSymbol(rng.standard_normal(64) + 1j * rng.standard_normal(64))
                for p in (4 / 3, 4.0):
                    low = lower_bound(m, p, 10, 2, cfg.seed + trial).value
                    self._check("sandwich", low, upper_bound(m, p) * (1 + 1e-9), p=p, n=trial)
                self._check("norm-m2", abs(norm_m2(m) - lower_bound(m, 2.0, 3, 1).value), 1e-6, n=trial)
        with self._stage("affine_invariance"):
            rng = np.random.default_rng([cfg.seed, 7])
            m = MultiplierSymbol(rng.choice([-1.0, 1.0], size=64))
            for l in (REFLECTION, GridAffineMap(1, 5), GridAffineMap(3, 1)):
                for p in (4 / 3, 4.0):
                    result = affine_invariance_check(m, l, p, 10, 2, cfg.seed)
                    self._check("affine-invariance", result.gap, 1e-6, p=p,
                                note=f"scale={l.scale} shift={l.shift}")
        with self._stage("parseval"):
            rng = np.random.default_rng([cfg.seed, 6])
            partition = dyadic_partition(256)
            for trial in range(4):
                f = random_signal(256, 1, rng)
                ratio = square_function(f, partition).norm(2) / f.norm(2)
                self._check("parseval", abs(ratio - 1.0), 1e-8, n=trial)
        return self._report("selftest")


def _dyadic_mismatches() -> int:
    """dyadic_line and three nested dyadic_interval ranks against the closed forms."""
    mismatches = 0
    for k in range(-20, 21):
        if k >= 1:
            expected = (pow2(k - 1), pow2(k))
        elif k == 0:
            expected = (Fraction(-1), Fraction(1))
        else:
            expected = (-pow2(-k), -pow2(-k - 1))
        if (dyadic_line(k).lo, dyadic_line(k).hi) != expected:
            mismatches += 1
    parents = [dyadic_line(k) for k in (-2, 0, 3)]
    for _ in range(3):
        children = []
        for parent in parents:
            a, length = parent.lo, parent.length
            for k in range(-20, 21):
                if k >= 1:
                    u = (1 - pow2(-k - 1), 1 - pow2(-k - 2))
                elif k == 0:
                    u = (Fraction(1, 4), Fraction(3, 4))
                else:
                    u = (pow2(k - 2), pow2(k - 1))
                child = dyadic_interval(parent, k)
                if (child.lo, child.hi) != (a + length * u[0], a + length * u[1]):
                    mismatches += 1
            children.extend(dyadic_interval(parent, k) for k in (-1, 0, 2))
        parents = children
    return mismatches


RUNNERS = {
    "thm1": ExperimentRunner.run_thm1,
    "thm2": ExperimentRunner.run_thm2,
    "remark5": ExperimentRunner.run_remark5,
    "bohr-pal": ExperimentRunner.run_bohr_pal,
    "lp-audit": ExperimentRunner.run_lp_audit,
    "selftest": ExperimentRunner.run_selftest,
}


def run_scenario(config: ExperimentConfig) -> RunReport:
    """
    Run the pipeline named by ``config.scenario``.

    Stage errors become a failed report carrying the stage tag.
    """
    runner = ExperimentRunner(config)
    try:
        return RUNNERS[config.scenario](runner)
    except StageError as e:
        logger.error(str(e))
        report = runner._report(config.scenario)
        report.error = {"stage": e.stage, "type": type(e.cause).__name__, "message": str(e.cause)}
        return report


def run_thm1(config: ExperimentConfig) -> RunReport:
    return ExperimentRunner(config).run_thm1()


def run_thm2(config: ExperimentConfig) -> RunReport:
    return ExperimentRunner(config).run_thm2()


def run_remark5(config: ExperimentConfig) -> RunReport:
    return ExperimentRunner(config).run_remark5()


def run_bohr_pal(config: ExperimentConfig) -> RunReport:
    return ExperimentRunner(config).run_bohr_pal()


def run_lp_audit(config: ExperimentConfig) -> RunReport:
    return ExperimentRunner(config).run_lp_audit()


def run_selftest(config: ExperimentConfig) -> RunReport:
    return ExperimentRunner(config).run_selftest()
