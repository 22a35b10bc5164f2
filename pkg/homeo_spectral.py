#!/usr/bin/env python3
"""
Spectral Tools
==============

Discrete Fourier machinery on cyclic grids of N^d points (N a power of two):

- grid signals and their spectra (``scipy.fft`` with ``norm="forward"``),
- band projections S_I, square functions S^Delta and empirical
  Littlewood-Paley constants,
- dyadic frequency partitions and their dyadic refinement,
- the sampled symbol grid with net approximants g_nu and oscillations,
- periodization of a cube-supported symbol onto the torus grid.

Frequencies are integers in [-N/2, N/2) stored in ``fftfreq`` order.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sfft
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist

from homeo_nets import EndpointHit, Interval, Net, Number, as_fraction

logger = logging.getLogger(__name__)

_FFT_WORKERS = 1


def set_fft_workers(workers: int) -> None:
    """Worker count handed to every scipy.fft call."""
    global _FFT_WORKERS
    if workers < 1:
        raise ValueError(f"FFT worker count must be >= 1, got {workers}")
    _FFT_WORKERS = workers


def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def integer_frequencies(n: int) -> np.ndarray:
    """Integer frequencies -N/2..N/2-1 in fft order."""
    return np.rint(sfft.fftfreq(n, 1.0 / n)).astype(np.int64)


@dataclass
class GridSignal:
    """
    Complex samples on a uniform cyclic grid.

    Attributes:
        values: Array of shape (N,) * d
        domain: ``torus`` or ``box`` (a truncated box of R^d)
        box: Half width B of the box for ``domain == "box"``
    """

    values: np.ndarray
    domain: str = "torus"
    box: Optional[float] = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        shape = self.values.shape
        if not shape or len(set(shape)) != 1 or not is_power_of_two(shape[0]) or shape[0] < 2:
            raise ValueError(f"Grid signals need shape (N,)*d with N a power of two >= 2, got {shape}")
        if self.domain not in ("torus", "box"):
            raise ValueError(f"Unknown signal domain '{self.domain}'")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Grid signal contains non-finite samples")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.ndim

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def norm(self, p: float) -> float:
        """Unnormalized l^p norm of the samples."""
        return lp_norm(self.values, p)

    def like(self, values: np.ndarray) -> "GridSignal":
        return GridSignal(values, self.domain, self.box)


def lp_norm(values: np.ndarray, p: float) -> float:
    flat = np.abs(np.ravel(values))
    if math.isinf(p):
        return float(np.max(flat))
    scale = float(np.max(flat)) if flat.size else 0.0
    if scale == 0.0:
        return 0.0
    return scale * float(np.sum((flat / scale) ** p)) ** (1.0 / p)


@dataclass
class Spectrum:
    """Fourier coefficients c_n = N^-d sum_t f(t) e^(-2 pi i n.t / N), fft order."""

    coefficients: np.ndarray

    @property
    def n(self) -> int:
        return self.coefficients.shape[0]

    def frequencies(self) -> np.ndarray:
        return integer_frequencies(self.n)


def spectrum(f: GridSignal) -> Spectrum:
    return Spectrum(sfft.fftn(f.values, norm="forward", workers=_FFT_WORKERS))


def synthesize(s: Spectrum, like: Optional[GridSignal] = None) -> GridSignal:
    values = sfft.ifftn(s.coefficients, norm="forward", workers=_FFT_WORKERS)
    if like is None:
        return GridSignal(values)
    return like.like(values)


# ---------------------------------------------------------------------------
# Frequency rectangles and partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyRectangle:
    """Integer rectangle prod_i [lo_i, hi_i) of frequencies."""

    lo: Tuple[int, ...]
    hi: Tuple[int, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("Rectangle bounds have different dimensions")
        if any(b <= a for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"Empty frequency rectangle [{self.lo}, {self.hi})")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def size(self) -> int:
        return math.prod(b - a for a, b in zip(self.lo, self.hi))

    def axis_masks(self, n: int) -> List[np.ndarray]:
        freqs = integer_frequencies(n)
        return [(freqs >= a) & (freqs < b) for a, b in zip(self.lo, self.hi)]

    def mask(self, n: int) -> np.ndarray:
        masks = self.axis_masks(n)
        out = masks[0]
        for m in masks[1:]:
            out = np.multiply.outer(out, m)
        return out

    def contains(self, freq: Sequence[int]) -> bool:
        return all(a <= k < b for k, a, b in zip(freq, self.lo, self.hi))


def band(n: int, dim: int = 1) -> FrequencyRectangle:
    """The full band [-N/2, N/2)^d."""
    return FrequencyRectangle((-n // 2,) * dim, (n // 2,) * dim)


@dataclass
class FrequencyPartition:
    """Disjoint frequency rectangles covering the band of an N^d grid."""

    rectangles: List[FrequencyRectangle]
    n: int
    name: str = ""
    dim: int = field(init=False)

    def __post_init__(self):
        if not self.rectangles:
            raise ValueError("A frequency partition needs at least one rectangle")
        self.dim = self.rectangles[0].dim
        if any(r.dim != self.dim for r in self.rectangles):
            raise ValueError("Partition rectangles have mixed dimensions")

    def validate(self) -> None:
        """Raise ValueError unless every frequency lies in exactly one rectangle."""
        full = band(self.n, self.dim)
        counts = np.zeros((self.n,) * self.dim, dtype=np.int64)
        for rect in self.rectangles:
            if any(a < fa or b > fb for a, b, fa, fb in zip(rect.lo, rect.hi, full.lo, full.hi)):
                raise ValueError(f"Rectangle [{rect.lo}, {rect.hi}) leaves the band of N={self.n}")
            counts[np.ix_(*[np.flatnonzero(m) for m in rect.axis_masks(self.n)])] += 1
        if counts.min() != 1 or counts.max() != 1:
            raise ValueError(f"Partition '{self.name}' is not disjoint and covering "
                             f"(multiplicity {counts.min()}..{counts.max()})")

    def __len__(self) -> int:
        return len(self.rectangles)


def full_band_partition(n: int, dim: int = 1) -> FrequencyPartition:
    return FrequencyPartition([band(n, dim)], n, "full-band")


def dyadic_cuts(n: int) -> List[int]:
    """-N/2, ..., -4, -2, -1, 0, 1, 2, 4, ..., N/2."""
    if not is_power_of_two(n) or n < 2:
        raise ValueError(f"N must be a power of two >= 2, got {n}")
    positive = [1 << j for j in range(int(math.log2(n)))]
    return sorted({0} | set(positive) | {-c for c in positive})


def dyadic_partition(n: int) -> FrequencyPartition:
    """Discrete dyadic partition of the frequency line: [0,1), [1,2), [2,4), ... and mirror."""
    cuts = dyadic_cuts(n)
    rects = [FrequencyRectangle((a,), (b,)) for a, b in zip(cuts, cuts[1:])]
    return FrequencyPartition(rects, n, "dyadic")


def product_partition(parts: Sequence[FrequencyPartition]) -> FrequencyPartition:
    """Products of 1-D partitions, one per axis."""
    n = parts[0].n
    if any(p.n != n or p.dim != 1 for p in parts):
        raise ValueError("Product partitions need 1-D factors on the same grid")
    rects = [FrequencyRectangle(tuple(r.lo[0] for r in combo), tuple(r.hi[0] for r in combo))
             for combo in _product([p.rectangles for p in parts])]
    return FrequencyPartition(rects, n, "x".join(p.name for p in parts))


def _product(lists):
    if not lists:
        yield ()
        return
    for head in lists[0]:
        for tail in _product(lists[1:]):
            yield (head,) + tail


def _unit_dyadic_endpoints(length: int) -> List[Fraction]:
    points = []
    for j in range(2, length.bit_length() + 2):
        points.append(Fraction(1, 1 << j))
        points.append(1 - Fraction(1, 1 << j))
    return points


def refine_partition_dyadic(partition: FrequencyPartition) -> FrequencyPartition:
    """
    Replace every interval [L, H) by its discrete dyadic children.

    The cut points are L + floor((H - L) t) for the endpoints t of the unit
    dyadic rule, together with L and H; intervals shorter than two
    frequencies are kept whole.
    """
    if partition.dim != 1:
        raise ValueError("Dyadic refinement is defined for 1-D partitions only")
    rects: List[FrequencyRectangle] = []
    for rect in partition.rectangles:
        lo, hi = rect.lo[0], rect.hi[0]
        length = hi - lo
        if length < 2:
            rects.append(rect)
            continue
        cuts = {lo, hi} | {lo + math.floor(length * t) for t in _unit_dyadic_endpoints(length)}
        ordered = sorted(cuts)
        rects.extend(FrequencyRectangle((a,), (b,)) for a, b in zip(ordered, ordered[1:]))
    return FrequencyPartition(rects, partition.n, f"refined({partition.name})")


# ---------------------------------------------------------------------------
# Projections and square functions
# ---------------------------------------------------------------------------

def project(f: GridSignal, rect: FrequencyRectangle) -> GridSignal:
    """S_I f: spectrum restricted to the rectangle."""
    if rect.dim != f.dim:
        raise ValueError(f"Rectangle of dimension {rect.dim} on a {f.dim}-D signal")
    coeffs = spectrum(f).coefficients * rect.mask(f.n)
    return synthesize(Spectrum(coeffs), f)


def square_function(f: GridSignal, partition: FrequencyPartition) -> GridSignal:
    """S^Delta f = (sum_I |S_I f|^2)^(1/2)."""
    if partition.n != f.n or partition.dim != f.dim:
        raise ValueError("Partition and signal live on different grids")
    coeffs = spectrum(f).coefficients
    total = np.zeros(f.values.shape, dtype=float)
    for rect in partition.rectangles:
        part = sfft.ifftn(coeffs * rect.mask(f.n), norm="forward", workers=_FFT_WORKERS)
        total += np.abs(part) ** 2
    return f.like(np.sqrt(total))


def random_signal(n: int, dim: int, rng: np.random.Generator) -> GridSignal:
    """Signal with a standard complex Gaussian spectrum."""
    shape = (n,) * dim
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return synthesize(Spectrum(coeffs))


def empirical_lp_constants(partition: FrequencyPartition, p: float, trials: int = 50,
                           seed: int = 0, mapper: Callable = map) -> Tuple[float, float]:
    """
    Min and max of ||S^Delta f||_p / ||f||_p over seeded random signals.

    Args:
        partition: Frequency partition
        p: Exponent in (1, inf)
        trials: Number of trial signals
        seed: Seed of the trial streams (one child stream per trial)
        mapper: ``map``-like callable used to evaluate trials

    Returns:
        (a_p_est, b_p_est)
    """
    if not 1 < p < math.inf:
        raise ValueError(f"p must lie in (1, inf), got {p}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(trials)

    def ratio(stream):
        f = random_signal(partition.n, partition.dim, np.random.default_rng(stream))
        return square_function(f, partition).norm(p) / f.norm(p)

    ratios = list(mapper(ratio, streams))
    return float(min(ratios)), float(max(ratios))


# ---------------------------------------------------------------------------
# Symbol grid, approximants, oscillation
# ---------------------------------------------------------------------------

class SymbolGrid:
    """
    Sample points xi_n = (n + offset) * 2B / N of the box [-B, B), n in fft
    order, exact rationals. One axis description serves every axis.
    """

    def __init__(self, n: int, dim: int = 1, box: Number = 64, offset: Number = Fraction(1, 3)):
        if not is_power_of_two(n) or n < 2:
            raise ValueError(f"N must be a power of two >= 2, got {n}")
        self.n = n
        self.dim = dim
        self.box = as_fraction(box)
        self.offset = as_fraction(offset)
        if self.box <= 0:
            raise ValueError("Box half width must be positive")
        if not 0 <= self.offset < 1:
            raise ValueError("Offset must lie in [0, 1)")
        step = 2 * self.box / n
        self.step = step
        self._points = [(int(k) + self.offset) * step for k in integer_frequencies(n)]
        self._floats = np.array([float(x) for x in self._points])

    def points(self) -> List[Fraction]:
        return list(self._points)

    def floats(self) -> np.ndarray:
        return self._floats.copy()

    def axes(self) -> List[List[Fraction]]:
        shared = self._points
        return [shared] * self.dim


AxisSymbol = Callable[[Sequence[Sequence[Fraction]]], np.ndarray]


@dataclass
class Approximant:
    """g_nu on a symbol grid: values, rank and the number of endpoint hits."""

    values: np.ndarray
    rank: int
    hits: int = 0


def approximant(grid: SymbolGrid, rank: int, net: Net, symbol: AxisSymbol) -> Approximant:
    """
    g_nu: the value of g at the center of the rank-``rank`` net rectangle
    containing each grid point.

    Grid points on a net endpoint keep g at the point itself.

    Args:
        grid: Symbol grid
        rank: Net rank nu >= 1
        net: Net whose product rectangles carry the approximant
        symbol: Evaluates g on the product of per-axis point lists

    Returns:
        Approximant with values of shape (N,) * d
    """
    centers: List[Fraction] = []
    hits = 0
    cache = {}
    for x in grid.points():
        found = net.locate(x, rank)
        if isinstance(found, EndpointHit):
            centers.append(x)
            hits += 1
            continue
        center = cache.get(found.path)
        if center is None:
            center = net.interval(found).midpoint
            cache[found.path] = center
        centers.append(center)
    if hits:
        logger.debug(f"{hits} grid points hit rank-{rank} endpoints; g kept there")
    unique = sorted(set(centers))
    slot = {c: i for i, c in enumerate(unique)}
    inverse = np.array([slot[c] for c in centers])
    compact = np.asarray(symbol([unique] * grid.dim))
    values = compact[np.ix_(*[inverse] * grid.dim)]
    return Approximant(values, rank, hits)


def oscillation(values: np.ndarray, axes: Sequence[np.ndarray], rect: Sequence[Interval]) -> float:
    """
    osc_I g = sup |g(t1) - g(t2)| over grid points of the open rectangle I.

    Raises:
        ValueError: no grid point lies in I
    """
    values = np.asarray(values)
    selectors = []
    for axis, factor in zip(axes, rect):
        axis = np.asarray(axis, dtype=float)
        selectors.append(np.flatnonzero((axis > float(factor.lo)) & (axis < float(factor.hi))))
    if any(s.size == 0 for s in selectors):
        raise ValueError(f"No grid point lies in {list(rect)}")
    inside = values[np.ix_(*selectors)].ravel()
    if not np.iscomplexobj(inside):
        return float(np.max(inside) - np.min(inside))
    return _diameter(np.column_stack([inside.real, inside.imag]))


def _diameter(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    if len(points) > 256:
        try:
            points = points[ConvexHull(points).vertices]
        except RuntimeError:
            pass
    return float(np.max(pdist(points)))


# ---------------------------------------------------------------------------
# Periodization
# ---------------------------------------------------------------------------

def periodize(m0: np.ndarray, period: int, origin: Sequence[int]) -> np.ndarray:
    """
    Fold a symbol sampled on a cube grid onto the cyclic grid of ``period``
    points per axis: sample i of axis a lands in cell (origin_a + i) mod period.

    Raises:
        ValueError: two nonzero samples land in the same cell (support
            larger than one period)
    """
    m0 = np.asarray(m0)
    if len(origin) != m0.ndim:
        raise ValueError("origin needs one offset per axis")
    index = [(int(o) + np.arange(size)) % period for o, size in zip(origin, m0.shape)]
    mesh = np.meshgrid(*index, indexing="ij")
    counts = np.zeros((period,) * m0.ndim, dtype=np.int64)
    np.add.at(counts, tuple(mesh), (m0 != 0).astype(np.int64))
    if counts.max(initial=0) > 1:
        raise ValueError("Support overflow: the symbol is not supported in one period cube")
    out = np.zeros((period,) * m0.ndim, dtype=np.result_type(m0.dtype, float))
    np.add.at(out, tuple(mesh), m0)
    return out


def cube_grid(n: int, period: float = math.tau) -> np.ndarray:
    """2N points t_j = period * (j - N/2) / N covering [-period/2, 3 period/2)."""
    return np.array([period * (j - n // 2) / n for j in range(2 * n)])


def torus_grid(n: int, period: float = math.tau) -> np.ndarray:
    """N points t_j = period * j / N of [0, period)."""
    return np.array([period * j / n for j in range(n)])


def cube_indicator(points: np.ndarray, lo: float = 0.0, hi: float = math.tau) -> np.ndarray:
    """1_[lo, hi) sampled at the points."""
    points = np.asarray(points, dtype=float)
    return ((points >= lo) & (points < hi)).astype(float)
