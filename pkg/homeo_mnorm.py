#!/usr/bin/env python3
"""
Multiplier Norms
================

Fourier multiplier norms on cyclic grids Z_N^d. The operator of a symbol m
is Q f = ifft(m * fft f), a cyclic convolution with kernel k = ifft(m).

- p = 2: the norm is max |m|, exactly;
- upper bounds: interpolation between p = 1 (||k||_1) and p = 2 (max |m|),
  with the p -> p / (p - 1) duality for p > 2;
- lower bounds: nonlinear power iteration on the l^p norm, every reported
  value backed by a stored witness that is re-applied once.

Also the rank constants c(p, nu) estimated from random piecewise-constant
symbols, the telescoping bound of the approximation scheme and the affine
invariance checks.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sfft

import homeo_spectral
from homeo_modulus import CModel, Modulus
from homeo_nets import EndpointHit, Net
from homeo_spectral import GridSignal, SymbolGrid, lp_norm

logger = logging.getLogger(__name__)

CLIP_RTOL = 1e-9
DEFAULT_ITERATIONS = 50
DEFAULT_RESTARTS = 8


def dual_exponent(p: float) -> float:
    """q = p / (p - 1), with 1 <-> inf."""
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    if p < 1:
        raise ValueError(f"Exponent must be >= 1, got {p}")
    return p / (p - 1.0)


@dataclass
class SymbolCertificate:
    """Piecewise-constant description: values == levels[labels]."""

    labels: np.ndarray
    levels: np.ndarray


@dataclass
class MultiplierSymbol:
    """
    Bounded symbol on the integer frequency grid, fft order.

    Attributes:
        values: Array of shape (N,) * d
        certificate: Optional piecewise-constant certificate
    """

    values: np.ndarray
    certificate: Optional[SymbolCertificate] = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        shape = self.values.shape
        if not shape or len(set(shape)) != 1:
            raise ValueError(f"Symbols need shape (N,)*d, got {shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Symbol contains non-finite values")
        if self.certificate is not None:
            rebuilt = np.asarray(self.certificate.levels)[self.certificate.labels]
            if rebuilt.shape != shape or not np.array_equal(rebuilt, self.values):
                raise ValueError("Certificate does not reproduce the symbol values")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.ndim

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def conjugate(self) -> "MultiplierSymbol":
        return MultiplierSymbol(np.conj(self.values))


def _convolve(m: MultiplierSymbol, x: np.ndarray) -> np.ndarray:
    workers = homeo_spectral._FFT_WORKERS
    return sfft.ifftn(m.values * sfft.fftn(x, workers=workers), workers=workers)


def apply(m: MultiplierSymbol, f: GridSignal) -> GridSignal:
    """
    Q f with Q^f = m * f^.

    Raises:
        ValueError: the symbol and the signal live on different grids
    """
    if m.values.shape != f.values.shape:
        raise ValueError(f"Symbol grid {m.values.shape} does not match signal grid {f.values.shape}")
    return f.like(_convolve(m, f.values))


def norm_m2(m: MultiplierSymbol) -> float:
    """||m||_{M_2} = max |m|."""
    return m.sup()


def kernel(m: MultiplierSymbol) -> np.ndarray:
    """Convolution kernel k = ifft(m)."""
    return sfft.ifftn(m.values, workers=homeo_spectral._FFT_WORKERS)


def upper_bound(m: MultiplierSymbol, p: float) -> float:
    """
    Interpolation bound ||k||_1^(2/p - 1) * (max |m|)^(2 - 2/p) for 1 <= p <= 2,
    the same value at q = p / (p - 1) for p > 2.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if p > 2:
        p = dual_exponent(p)
    sup = m.sup()
    if p == 2:
        return sup
    k1 = float(np.sum(np.abs(kernel(m))))
    if p == 1:
        return k1
    if sup == 0:
        return 0.0
    return k1 ** (2.0 / p - 1.0) * sup ** (2.0 - 2.0 / p)


def reflect(x: np.ndarray) -> np.ndarray:
    """(R x)(t) = x(-t) on the cyclic grid."""
    axes = tuple(range(x.ndim))
    return np.roll(np.flip(x, axis=axes), 1, axis=axes)


def _norming(v: np.ndarray, p: float) -> Optional[np.ndarray]:
    """sign(v) |v|^(p - 1), scaled by max |v|; None for the zero vector."""
    mag = np.abs(v)
    scale = float(np.max(mag))
    if scale == 0.0:
        return None
    phase = np.divide(v, mag, out=np.zeros_like(v, dtype=complex), where=mag > 0)
    return phase * (mag / scale) ** (p - 1.0)


def _ratio(m: MultiplierSymbol, x: np.ndarray, p: float) -> float:
    nx = lp_norm(x, p)
    if nx == 0.0:
        return 0.0
    return lp_norm(_convolve(m, x), p) / nx


def tone(m: MultiplierSymbol) -> np.ndarray:
    """Pure frequency at argmax |m|; its ratio is max |m| at every p."""
    spike = np.zeros(m.values.shape, dtype=complex)
    spike[np.unravel_index(int(np.argmax(np.abs(m.values))), m.values.shape)] = 1.0
    return sfft.ifftn(spike, norm="forward")


def default_starts(m: MultiplierSymbol, restarts: int, seed: int) -> List[np.ndarray]:
    """The tone at argmax |m| followed by seeded complex Gaussian vectors."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    starts = [tone(m)]
    for stream in np.random.SeedSequence(seed).spawn(restarts - 1):
        rng = np.random.default_rng(stream)
        starts.append(rng.standard_normal(m.values.shape) + 1j * rng.standard_normal(m.values.shape))
    return starts


def _iterates(m: MultiplierSymbol, x0: np.ndarray, p: float, iterations: int):
    """
    Power iteration for the l^p operator norm.

    Yields (x, d): the normalized iterate and the dual vector of Q x.
    """
    adjoint = m.conjugate()
    q = dual_exponent(p)
    x = x0
    for _ in range(iterations + 1):
        nx = lp_norm(x, p)
        if nx == 0.0:
            return
        x = x / nx
        y = _convolve(m, x)
        d = _norming(y, p)
        yield x, d
        if d is None:
            return
        z = _convolve(adjoint, d)
        x = _norming(z, q)
        if x is None:
            return


@dataclass
class LowerBound:
    value: float
    witness: Optional[np.ndarray]
    history: List[float] = field(default_factory=list)


def lower_bound(m: MultiplierSymbol, p: float, iterations: int = DEFAULT_ITERATIONS,
                restarts: int = DEFAULT_RESTARTS, seed: int = 0,
                starts: Optional[Sequence[np.ndarray]] = None,
                transfer_dual: bool = True, mapper: Callable = map) -> LowerBound:
    """
    Witnessed lower bound on the l^p operator norm of Q.

    Each start runs the power iteration at p; with ``transfer_dual`` it also
    runs at q = p / (p - 1), where every dual vector d turns into the
    p-witness R conj(d) with the same ratio. The running maximum over all
    candidates is kept and re-verified with one more application of Q.

    Args:
        m: Multiplier symbol
        p: Exponent in (1, inf)
        iterations: Iterations per start
        restarts: Number of default starts (tone plus Gaussian vectors)
        seed: Seed of the Gaussian starts
        starts: Explicit start vectors, replacing the defaults
        transfer_dual: Also run the q iteration
        mapper: ``map``-like callable over starts

    Returns:
        LowerBound with the verified value, its witness and the running
        maxima per start
    """
    if not 1 < p < math.inf:
        raise ValueError(f"p must lie in (1, inf), got {p}")
    if starts is None:
        starts = default_starts(m, restarts, seed)
    q = dual_exponent(p)

    def run(x0):
        best, witness = 0.0, None
        trail = []
        for x, _ in _iterates(m, x0, p, iterations):
            value = _ratio(m, x, p)
            if value > best:
                best, witness = value, x
            trail.append(best)
        if transfer_dual:
            for _, d in _iterates(m, x0, q, iterations):
                if d is None:
                    break
                w = reflect(np.conj(d))
                value = _ratio(m, w, p)
                if value > best:
                    best, witness = value, w
                trail.append(best)
        return best, witness, trail

    best, witness, history = 0.0, None, []
    for value, w, trail in mapper(run, starts):
        if w is None:
            logger.debug("Degenerate start skipped")
            continue
        history.extend(trail)
        if value > best:
            best, witness = value, w
    if witness is None:
        return LowerBound(0.0, None, history)
    return LowerBound(_ratio(m, witness, p), witness, history)


@dataclass
class NormEstimate:
    """
    Sandwich lower <= ||m||_{M_p} (grid) <= upper.

    Attributes:
        p: Exponent
        lower: Witnessed lower bound
        upper: Interpolation upper bound
        n: Grid size N
        methods: Method tags
        seed: Seed of the random starts
        iterations: Power iterations per start
        restarts: Number of starts
        clipped: Whether a rounding excess of lower over upper was clipped
    """

    p: float
    lower: float
    upper: float
    n: int
    methods: Tuple[str, ...]
    seed: int = 0
    iterations: int = DEFAULT_ITERATIONS
    restarts: int = DEFAULT_RESTARTS
    clipped: bool = False

    def to_dict(self) -> Dict:
        return {"p": self.p, "lower": self.lower, "upper": self.upper, "N": self.n,
                "methods": list(self.methods), "seed": self.seed, "iterations": self.iterations,
                "restarts": self.restarts, "clipped": self.clipped}


def estimate_norm(m: MultiplierSymbol, p: float, iterations: int = DEFAULT_ITERATIONS,
                  restarts: int = DEFAULT_RESTARTS, seed: int = 0,
                  starts: Optional[Sequence[np.ndarray]] = None, mapper: Callable = map) -> NormEstimate:
    """
    Lower and upper estimates of the grid multiplier norm at p.

    Raises:
        RuntimeError: the lower estimate exceeds the upper bound beyond rounding
    """
    if p == 2:
        sup = norm_m2(m)
        return NormEstimate(2.0, sup, sup, m.n, ("sup",), seed, 0, 0)
    upper = upper_bound(m, p)
    lower = lower_bound(m, p, iterations, restarts, seed, starts, mapper=mapper).value
    clipped = False
    if lower > upper:
        if lower - upper <= CLIP_RTOL * max(upper, 1e-300):
            logger.warning(f"Clipping lower bound {lower!r} to upper bound {upper!r} at p={p}")
            lower, clipped = upper, True
        else:
            raise RuntimeError(f"Lower bound {lower} exceeds upper bound {upper} at p={p}")
    return NormEstimate(float(p), lower, upper, m.n, ("power-iteration", "dual-transfer", "interpolation"),
                        seed, iterations, len(starts) if starts is not None else restarts, clipped)


# ---------------------------------------------------------------------------
# Rank constants and telescoping bound
# ---------------------------------------------------------------------------

def rank_labels(grid: SymbolGrid, net: Net, rank: int) -> np.ndarray:
    """Integer label of the rank-``rank`` net rectangle of every symbol-grid point."""
    keys = []
    for x in grid.points():
        found = net.locate(x, rank)
        keys.append(("hit", x) if isinstance(found, EndpointHit) else found.path)
    index: Dict = {}
    axis = np.array([index.setdefault(k, len(index)) for k in keys], dtype=np.int64)
    count = len(index)
    mesh = np.meshgrid(*[axis] * grid.dim, indexing="ij")
    return np.ravel_multi_index(tuple(mesh), (count,) * grid.dim)


def estimate_c(p: float, rank: int, net: Net, grid: SymbolGrid, trials: int = 50, seed: int = 0,
               iterations: int = DEFAULT_ITERATIONS, restarts: int = DEFAULT_RESTARTS,
               mapper: Callable = map) -> float:
    """
    Lower estimate of c(p, nu): max of lower_bound / sup over the constant
    symbol and seeded random +-1 symbols constant on rank-nu net rectangles.
    """
    if not 1 < p < math.inf:
        raise ValueError(f"p must lie in (1, inf), got {p}")
    if p == 2:
        return 1.0
    labels = rank_labels(grid, net, rank)
    count = int(labels.max()) + 1
    symbols = [MultiplierSymbol(np.ones(labels.shape), SymbolCertificate(labels, np.ones(count)))]
    for stream in np.random.SeedSequence([seed, rank]).spawn(trials):
        levels = np.random.default_rng(stream).choice([-1.0, 1.0], size=count)
        symbols.append(MultiplierSymbol(levels[labels], SymbolCertificate(labels, levels)))

    def ratio(symbol):
        return lower_bound(symbol, p, iterations, restarts, seed).value / symbol.sup()

    best = max(mapper(ratio, symbols))
    logger.debug(f"c({p:g}, {rank}) >= {best:.4g} over {trials} random symbols")
    return float(best)


@dataclass
class TelescopeBound:
    """
    Terms 2 c(p, nu) omega(delta_(nu-1) sqrt(d)) for nu = 2..V and the
    resulting tail and segment bounds.
    """

    p: float
    terms: Dict[int, float]
    summable: bool
    certified_from: int

    @property
    def last(self) -> int:
        return max(self.terms)

    def segment(self, n: int, m: int) -> float:
        """Bound on ||g_(n+m) - g_n||_{M_p}: sum of terms n+1..n+m."""
        if n + m > self.last:
            raise ValueError(f"Segment {n}..{n + m} goes past the last computed term {self.last}")
        return sum(self.terms[nu] for nu in range(n + 1, n + m + 1))

    def tail(self, n: int) -> float:
        """sum_(nu > n) of the computed terms plus 2 * 2^-V for the rest."""
        return sum(t for nu, t in self.terms.items() if nu > n) + 2.0 * 2.0 ** -self.last

    def total(self) -> float:
        return self.tail(1)


def telescope_bound(deltas: Sequence[float], omega: Modulus, p: float, c_model: CModel,
                    dim: int = 1) -> TelescopeBound:
    """
    Telescoping bound for the approximants g_nu.

    Summability is certified when every computed term with
    nu >= ceil(max(p, q)) is at most 2 * 2^-nu, the guarantee of
    ``select_delta`` transported to p by monotonicity toward 2.

    Args:
        deltas: delta_1..delta_V
        omega: Modulus used to choose the deltas
        p: Exponent
        c_model: Model of c(p, nu)
        dim: Dimension d

    Returns:
        TelescopeBound with terms nu = 2..V
    """
    if len(deltas) < 2:
        raise ValueError("telescope_bound needs at least two deltas")
    root_d = math.sqrt(dim)
    terms = {nu: 2.0 * c_model(p, nu) * float(omega(deltas[nu - 2] * root_d))
             for nu in range(2, len(deltas) + 1)}
    start = max(2, math.ceil(max(p, dual_exponent(p))))
    summable = all(t <= 2.0 * 2.0 ** -nu * (1 + 1e-12) for nu, t in terms.items() if nu >= start)
    if not summable:
        logger.warning(f"Telescope terms at p={p:g} exceed 2^(1-nu) from nu={start}; the model is not summable")
    return TelescopeBound(float(p), terms, summable, start)


# ---------------------------------------------------------------------------
# Affine invariance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridAffineMap:
    """l(k) = scale * k + shift on Z_N, applied on every axis; scale odd."""

    scale: int
    shift: int = 0

    def __post_init__(self):
        if self.scale % 2 == 0:
            raise ValueError(f"Scale {self.scale} is not invertible on a power-of-two grid")

    def index(self, n: int) -> np.ndarray:
        return (self.scale * np.arange(n) + self.shift) % n

    def compose(self, m: MultiplierSymbol) -> MultiplierSymbol:
        """m o l."""
        idx = self.index(m.n)
        return MultiplierSymbol(m.values[np.ix_(*[idx] * m.dim)])

    def intertwine(self, x: np.ndarray) -> np.ndarray:
        """x'(t) = e^(-2 pi i s b t / N) x(b t), b = scale^-1 mod N; Q' x' matches Q x."""
        n = x.shape[0]
        b = pow(self.scale % n, -1, n)
        t = np.arange(n)
        src = (b * t) % n
        phase = np.exp(-2j * np.pi * ((self.shift * b * t) % n) / n)
        out = x
        for axis in range(x.ndim):
            out = np.take(out, src, axis=axis)
            shape = [1] * x.ndim
            shape[axis] = n
            out = out * phase.reshape(shape)
        return out


REFLECTION = GridAffineMap(-1, 0)


@dataclass
class AffineCheck:
    p: float
    lower: float
    lower_mapped: float
    upper: float
    upper_mapped: float

    @property
    def gap(self) -> float:
        """Relative gap of the lower estimates."""
        scale = max(abs(self.lower), 1e-300)
        return abs(self.lower_mapped - self.lower) / scale


def affine_invariance_check(m: MultiplierSymbol, l: GridAffineMap, p: float,
                            iterations: int = DEFAULT_ITERATIONS, restarts: int = DEFAULT_RESTARTS,
                            seed: int = 0) -> AffineCheck:
    """Estimates for m and m o l from intertwined starts."""
    mapped = l.compose(m)
    starts = default_starts(m, restarts, seed)
    if p == 2:
        lower, lower_mapped = norm_m2(m), norm_m2(mapped)
    else:
        lower = lower_bound(m, p, iterations, starts=starts).value
        lower_mapped = lower_bound(mapped, p, iterations, starts=[l.intertwine(x) for x in starts]).value
    return AffineCheck(float(p), lower, lower_mapped, upper_bound(m, p), upper_bound(mapped, p))
