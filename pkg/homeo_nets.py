#!/usr/bin/env python3
"""
Interval Nets
=============

Ordered interval partitions of the line, the dyadic partitions of the line
and of a bounded interval, and the two recursively nested nets used to build
the coordinate homeomorphism:

- net alpha: dyadic rank-1 partition of the line, dyadic children;
- net beta: uniform rank-1 partition of width delta_1, block-and-tail
  children whose pieces are no longer than delta_r at rank r.

All endpoints are exact rationals (``fractions.Fraction``). Descent through a
net happens in the local frame of its rank-1 piece, so points far out on the
line never have to be materialized as huge rationals.
"""

import itertools
import logging
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

Number = Union[int, float, Fraction]
Endpoint = Union[Fraction, float]

# Exponent span above which alpha affine combinations drop the smaller term.
EXACT_EXPONENT_SPAN = 4096

# Jitter grid for beta children: cut offsets in sixty-fourths of a block and
# tail ratios in sixty-fourths, ratio one half excluded.
JITTER_OFFSETS = tuple(range(-16, 17))
JITTER_RATIOS = tuple(r for r in range(24, 41) if r != 32)
MAX_TAIL_STEPS = 4096


def as_fraction(x: Number) -> Fraction:
    """Convert an int, float or Fraction to an exact Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    value = float(x)
    if not math.isfinite(value):
        raise ValueError(f"Cannot convert non-finite value {x!r} to an exact rational")
    return Fraction(value)


def floor_log2(x: Fraction) -> int:
    """Exact floor(log2(x)) for a positive rational."""
    if x <= 0:
        raise ValueError(f"floor_log2 needs a positive argument, got {x}")
    n, d = x.numerator, x.denominator
    e = n.bit_length() - d.bit_length()
    if e >= 0:
        if n < (d << e):
            e -= 1
    elif (n << -e) < d:
        e -= 1
    return e


def pow2(e: int) -> Fraction:
    """2**e as an exact Fraction, e of either sign."""
    return Fraction(1 << e) if e >= 0 else Fraction(1, 1 << -e)


def zigzag(k: int) -> int:
    """Map a signed integer onto the naturals (0, -1, 1, -2, ... -> 0, 1, 2, 3, ...)."""
    return 2 * k if k >= 0 else -2 * k - 1


@dataclass(frozen=True)
class Interval:
    """
    Open interval (lo, hi) with exact rational endpoints.

    Either endpoint may be infinite (``-math.inf`` / ``math.inf``).
    """

    lo: Endpoint
    hi: Endpoint

    def __post_init__(self):
        lo = self.lo if _is_infinite(self.lo) else as_fraction(self.lo)
        hi = self.hi if _is_infinite(self.hi) else as_fraction(self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if not lo < hi:
            raise ValueError(f"Interval needs lo < hi, got ({lo}, {hi})")

    @property
    def bounded(self) -> bool:
        return not (_is_infinite(self.lo) or _is_infinite(self.hi))

    @property
    def length(self) -> Endpoint:
        if not self.bounded:
            return math.inf
        return self.hi - self.lo

    @property
    def midpoint(self) -> Fraction:
        if not self.bounded:
            raise ValueError(f"Unbounded interval {self} has no midpoint")
        return (self.lo + self.hi) / 2

    def contains(self, x: Number) -> bool:
        """Open-interval membership."""
        return self.lo < x < self.hi

    def affine_image(self, origin: Fraction, scale: Fraction) -> "Interval":
        """Image under t -> origin + scale * t, scale > 0."""
        return Interval(origin + scale * self.lo, origin + scale * self.hi)

    def __repr__(self) -> str:
        return f"Interval({self.lo}, {self.hi})"


def _is_infinite(x) -> bool:
    return isinstance(x, float) and math.isinf(x)


@dataclass(frozen=True)
class NetAddress:
    """Address (s_1, ..., s_rank) of a net interval."""

    path: Tuple[int, ...]

    def __post_init__(self):
        path = tuple(int(s) for s in self.path)
        if not path:
            raise ValueError("A net address needs rank >= 1")
        object.__setattr__(self, "path", path)

    @property
    def rank(self) -> int:
        return len(self.path)


@dataclass(frozen=True)
class EndpointHit:
    """
    Result of a look-up that lands on a shared partition endpoint.

    ``left`` and ``right`` are the addresses of the two neighbouring intervals
    at ``rank``; ``point`` is the endpoint itself.
    """

    left: NetAddress
    right: NetAddress
    point: Fraction
    rank: int


@dataclass(frozen=True)
class FramedPoint:
    """
    A point of the line given by its rank-1 piece index and its coordinate in
    the local frame of that piece. The coordinate may equal the local hi of
    the piece, which stands for the shared endpoint with piece index + 1.
    """

    index: int
    local: Fraction


@dataclass(frozen=True)
class RankedRectangle:
    """Product of same-rank net intervals, with its componentwise center."""

    addresses: Tuple[NetAddress, ...]
    factors: Tuple[Interval, ...]
    center: Optional[Tuple[Fraction, ...]]

    @property
    def rank(self) -> int:
        return self.addresses[0].rank


# ---------------------------------------------------------------------------
# Ordered partitions
# ---------------------------------------------------------------------------

class OrderedPartition:
    """
    Integer-indexed ordered partition of an interval.

    ``locate(x)`` returns ``(k, on_endpoint)``; when ``on_endpoint`` is true,
    x equals the hi endpoint of piece k (the lo endpoint of piece k + 1).
    """

    def piece(self, k: int) -> Interval:
        raise NotImplementedError

    def locate(self, x: Fraction) -> Tuple[int, bool]:
        raise NotImplementedError


class DyadicLinePartition(OrderedPartition):
    """Dyadic partition of the line: (2^(k-1), 2^k), (-1, 1), (-2^-k, -2^(-k-1))."""

    def piece(self, k: int) -> Interval:
        return dyadic_line(k)

    def locate(self, x: Fraction) -> Tuple[int, bool]:
        x = as_fraction(x)
        if x == 1:
            return 0, True
        if x == -1:
            return -1, True
        if -1 < x < 1:
            return 0, False
        if x > 1:
            e = floor_log2(x)
            if x == pow2(e):
                return e, True
            return e + 1, False
        y = -x
        e = floor_log2(y)
        if y == pow2(e):
            return -e - 1, True
        return -e - 1, False


def _unit_dyadic(k: int) -> Tuple[Fraction, Fraction]:
    if k >= 1:
        return 1 - pow2(-k - 1), 1 - pow2(-k - 2)
    if k == 0:
        return Fraction(1, 4), Fraction(3, 4)
    return pow2(k - 2), pow2(k - 1)


class DyadicPartition(OrderedPartition):
    """Dyadic partition of a bounded interval, the affine image of the (0, 1) rule."""

    def __init__(self, parent: Interval):
        if not parent.bounded:
            raise ValueError(f"Dyadic partition needs a bounded parent, got {parent}")
        self.parent = parent

    def piece(self, k: int) -> Interval:
        lo, hi = _unit_dyadic(k)
        return Interval(lo, hi).affine_image(self.parent.lo, self.parent.length)

    def locate(self, x: Fraction) -> Tuple[int, bool]:
        if not self.parent.contains(x):
            raise ValueError(f"{x} is outside {self.parent}")
        t = (as_fraction(x) - self.parent.lo) / self.parent.length
        return _locate_unit_dyadic(t)


def _locate_unit_dyadic(t: Fraction) -> Tuple[int, bool]:
    quarter = Fraction(1, 4)
    if t == quarter:
        return -1, True
    if t == 3 * quarter:
        return 0, True
    if quarter < t < 3 * quarter:
        return 0, False
    if t > 3 * quarter:
        u = 1 - t
        e = floor_log2(u)
        if u == pow2(e):
            return -e - 2, True
        return -e - 2, False
    e = floor_log2(t)
    if t == pow2(e):
        return e + 1, True
    return e + 2, False


class UniformLinePartition(OrderedPartition):
    """Translates ((k - 1) w, k w) of a fixed width w."""

    def __init__(self, width: Fraction):
        width = as_fraction(width)
        if width <= 0:
            raise ValueError(f"Uniform partition width must be positive, got {width}")
        self.width = width

    def piece(self, k: int) -> Interval:
        return Interval((k - 1) * self.width, k * self.width)

    def locate(self, x: Fraction) -> Tuple[int, bool]:
        q = as_fraction(x) / self.width
        if q.denominator == 1:
            return q.numerator, True
        return math.floor(q) + 1, False


class BlockPartition(OrderedPartition):
    """
    Integer-indexed partition of a bounded interval (a, b) into pieces of
    length at most ``width_bound``.

    The interval is cut into m blocks; interior blocks 1..m-2 are the pieces
    k = 0..m-3, the first block is split geometrically towards a (pieces
    k = -1, -2, ...) and the last one towards b (pieces k = m-2, m-1, ...).

    Without jitter there are n = max(2, ceil(|J| / width_bound)) equal blocks
    and tail ratio 1/2. With jitter there are 2n blocks whose interior cuts
    move by a seeded offset of at most a quarter block, and each tail step
    uses a seeded ratio from JITTER_RATIOS / 64.
    """

    def __init__(self, parent: Interval, width_bound: Fraction,
                 jitter_key: Optional[Tuple[int, ...]] = None):
        if not parent.bounded:
            raise ValueError(f"Block partition needs a bounded parent, got {parent}")
        width_bound = as_fraction(width_bound)
        if width_bound <= 0:
            raise ValueError(f"Width bound must be positive, got {width_bound}")
        self.parent = parent
        self.width_bound = width_bound
        self.jitter_key = jitter_key
        n = max(2, math.ceil(parent.length / width_bound))
        self.blocks = 2 * n if jitter_key is not None else n
        self._left_tail: List[Fraction] = []
        self._right_tail: List[Fraction] = []
        self._lock = threading.Lock()

    def _draw(self, stream: int, i: int, choices: Sequence[int]) -> int:
        rng = np.random.default_rng([*self.jitter_key, stream, i])
        return choices[int(rng.integers(len(choices)))]

    def cut(self, i: int) -> Fraction:
        a, b, m = self.parent.lo, self.parent.hi, self.blocks
        if i <= 0:
            return a
        if i >= m:
            return b
        offset = Fraction(0)
        if self.jitter_key is not None:
            offset = Fraction(self._draw(0, i, JITTER_OFFSETS), 64)
        return a + (b - a) * (i + offset) / m

    def _ratio(self, side: int, j: int) -> Fraction:
        if self.jitter_key is None:
            return Fraction(1, 2)
        return Fraction(self._draw(side, j, JITTER_RATIOS), 64)

    def _tail(self, side: int, j: int) -> Fraction:
        """j-th tail point: t_0 = cut(1) on the left, e_0 = cut(m - 1) on the right."""
        a, b = self.parent.lo, self.parent.hi
        if self.jitter_key is None:
            if side == 1:
                return a + (self.cut(1) - a) * pow2(-j)
            return b - (b - self.cut(self.blocks - 1)) * pow2(-j)
        if j > MAX_TAIL_STEPS:
            raise RuntimeError(f"Tail index {j} exceeds {MAX_TAIL_STEPS} steps")
        with self._lock:
            tail = self._left_tail if side == 1 else self._right_tail
            if not tail:
                tail.append(self.cut(1) if side == 1 else self.cut(self.blocks - 1))
            while len(tail) <= j:
                rho = self._ratio(side, len(tail) - 1)
                prev = tail[-1]
                tail.append(a + (prev - a) * rho if side == 1 else b - (b - prev) * rho)
            return tail[j]

    def piece(self, k: int) -> Interval:
        m = self.blocks
        if k <= -1:
            j = -1 - k
            return Interval(self._tail(1, j + 1), self._tail(1, j))
        if k >= m - 2:
            j = k - (m - 2)
            return Interval(self._tail(2, j), self._tail(2, j + 1))
        return Interval(self.cut(k + 1), self.cut(k + 2))

    def locate(self, x: Fraction) -> Tuple[int, bool]:
        x = as_fraction(x)
        if not self.parent.contains(x):
            raise ValueError(f"{x} is outside {self.parent}")
        a, m = self.parent.lo, self.blocks
        i = min(max(math.floor((x - a) * m / self.parent.length), 0), m - 1)
        while i > 0 and x < self.cut(i):
            i -= 1
        while i < m - 1 and x >= self.cut(i + 1):
            i += 1
        if i >= 1 and x == self.cut(i):
            return i - 2, True
        if i == 0:
            return self._locate_left(x)
        if i == m - 1:
            return self._locate_right(x)
        return i - 1, False

    def _locate_left(self, x: Fraction) -> Tuple[int, bool]:
        a = self.parent.lo
        if self.jitter_key is None:
            r = (x - a) / (self._tail(1, 0) - a)
            e = floor_log2(r)
            return e - 1 if r == pow2(e) else e, r == pow2(e)
        j = 0
        while True:
            nxt = self._tail(1, j + 1)
            if x == nxt:
                return -2 - j, True
            if x > nxt:
                return -1 - j, False
            j += 1

    def _locate_right(self, x: Fraction) -> Tuple[int, bool]:
        b, m = self.parent.hi, self.blocks
        if self.jitter_key is None:
            r = (b - x) / (b - self._tail(2, 0))
            e = floor_log2(r)
            return m - 3 - e, r == pow2(e)
        j = 0
        while True:
            nxt = self._tail(2, j + 1)
            if x == nxt:
                return m - 2 + j, True
            if x < nxt:
                return m - 2 + j, False
            j += 1


# ---------------------------------------------------------------------------
# Dyadic rules
# ---------------------------------------------------------------------------

def dyadic_line(k: int) -> Interval:
    """
    k-th interval of the dyadic partition of the line.

    Args:
        k: Signed piece index

    Returns:
        (2^(k-1), 2^k) for k >= 1, (-1, 1) for k = 0, (-2^-k, -2^(-k-1)) for k < 0
    """
    k = int(k)
    if k >= 1:
        return Interval(pow2(k - 1), pow2(k))
    if k == 0:
        return Interval(-1, 1)
    return Interval(-pow2(-k), -pow2(-k - 1))


def dyadic_interval(parent: Interval, k: int) -> Interval:
    """
    k-th interval of the dyadic partition of a bounded parent interval.

    Args:
        parent: Bounded interval
        k: Signed piece index

    Returns:
        Affine image of the (0, 1) rule onto the parent
    """
    return DyadicPartition(parent).piece(int(k))


# ---------------------------------------------------------------------------
# Nets
# ---------------------------------------------------------------------------

class Net:
    """
    Lazily generated tree of ordered interval partitions.

    Subclasses fix the rank-1 partition, the local frame of every rank-1
    piece and the child rule. A rank-1 piece k is the image of its local
    piece under t -> origin(k) + 2**scale_exp(k) * t; child rules commute
    with that map, so descent can run entirely in local coordinates.
    """

    kind = "net"

    def __init__(self):
        self._child_cache: Dict[Tuple[int, ...], OrderedPartition] = {}

    # rank-1 frame -------------------------------------------------------
    def root_partition(self) -> OrderedPartition:
        raise NotImplementedError

    def root_local(self, k: int) -> Interval:
        raise NotImplementedError

    def root_scale_exp(self, k: int) -> int:
        raise NotImplementedError

    def root_origin(self, k: int) -> Fraction:
        raise NotImplementedError

    def child_partition(self, prefix: Tuple[int, ...], parent: Interval) -> OrderedPartition:
        """Ordered partition of the local interval ``parent`` at address ``prefix``."""
        raise NotImplementedError

    def split(self, x: Number) -> FramedPoint:
        """Framed coordinates of an ordinary point of the line."""
        x = as_fraction(x)
        k, on_endpoint = self.root_partition().locate(x)
        local = self.root_local(k)
        if on_endpoint:
            return FramedPoint(k, local.hi)
        y = (x - self.root_origin(k)) / pow2(self.root_scale_exp(k))
        return FramedPoint(k, y)

    def join(self, point: FramedPoint) -> Fraction:
        """Absolute value of a framed point."""
        k = point.index
        return self.root_origin(k) + pow2(self.root_scale_exp(k)) * point.local

    def interpolate(self, p0: FramedPoint, p1: FramedPoint, s: Fraction) -> FramedPoint:
        """Framed coordinates of (1 - s) p0 + s p1."""
        s = as_fraction(s)
        if s == 0:
            return p0
        if s == 1:
            return p1
        return self.split((1 - s) * self.join(p0) + s * self.join(p1))

    # addresses ----------------------------------------------------------
    def local_interval(self, address: NetAddress) -> Interval:
        """Interval of ``address`` in the local frame of its rank-1 piece."""
        path = address.path
        interval = self.root_local(path[0])
        for r in range(1, len(path)):
            interval = self.child_partition(path[:r], interval).piece(path[r])
        return interval

    def interval(self, address: NetAddress) -> Interval:
        local = self.local_interval(address)
        k = address.path[0]
        return Interval(self.join(FramedPoint(k, local.lo)), self.join(FramedPoint(k, local.hi)))

    def children(self, address: NetAddress) -> OrderedPartition:
        """Child partition of ``address`` in local coordinates."""
        return self.child_partition(address.path, self.local_interval(address))

    def child_intervals(self, address: NetAddress, window: Iterable[int]) -> List[Interval]:
        """Absolute child intervals of ``address`` for the indices in ``window``."""
        k = address.path[0]
        partition = self.children(address)
        result = []
        for s in window:
            local = partition.piece(s)
            result.append(Interval(self.join(FramedPoint(k, local.lo)),
                                   self.join(FramedPoint(k, local.hi))))
        return result

    def locate(self, x: Number, rank: int) -> Union[NetAddress, EndpointHit]:
        if rank < 1:
            raise ValueError(f"Rank must be >= 1, got {rank}")
        x = as_fraction(x)
        point = self.split(x)
        k, y = point.index, point.local
        parent = self.root_local(k)
        if y == parent.hi:
            return EndpointHit(NetAddress((k,)), NetAddress((k + 1,)), x, 1)
        path = [k]
        for r in range(2, rank + 1):
            partition = self.child_partition(tuple(path), parent)
            s, on_endpoint = partition.locate(y)
            if on_endpoint:
                return EndpointHit(NetAddress(tuple(path) + (s,)),
                                   NetAddress(tuple(path) + (s + 1,)), x, r)
            path.append(s)
            parent = partition.piece(s)
        return NetAddress(tuple(path))


class AlphaNet(Net):
    """Net alpha: dyadic rank-1 partition with dyadic children."""

    kind = "alpha"

    def __init__(self):
        super().__init__()
        self._root = DyadicLinePartition()

    def root_partition(self) -> OrderedPartition:
        return self._root

    def root_local(self, k: int) -> Interval:
        return Interval(0, 1)

    def root_scale_exp(self, k: int) -> int:
        if k >= 1:
            return k - 1
        if k == 0:
            return 1
        return -k - 1

    def root_origin(self, k: int) -> Fraction:
        if k >= 1:
            return pow2(k - 1)
        if k == 0:
            return Fraction(-1)
        return -pow2(-k)

    def child_partition(self, prefix: Tuple[int, ...], parent: Interval) -> OrderedPartition:
        return DyadicPartition(parent)

    def split_scaled(self, w: Fraction, exp: int) -> FramedPoint:
        """Framed coordinates of w * 2**exp without forming the product."""
        if w == 0:
            return self.split(0)
        sign = 1 if w > 0 else -1
        magnitude = abs(w)
        f = floor_log2(magnitude)
        ratio = magnitude / pow2(f)
        e = f + exp
        if e >= 1 or (e == 0 and ratio > 1):
            if sign > 0:
                if ratio == 1:
                    return FramedPoint(e, Fraction(1))
                return FramedPoint(e + 1, ratio - 1)
            if ratio == 1:
                return FramedPoint(-e - 1, Fraction(1))
            return FramedPoint(-e - 1, 2 - ratio)
        if abs(exp) > EXACT_EXPONENT_SPAN:
            raise ValueError(f"Point of magnitude <= 1 with exponent {exp} is out of range")
        return self.split(w * pow2(exp))

    def _mantissa(self, point: FramedPoint) -> Tuple[Fraction, int]:
        k, y = point.index, point.local
        if k >= 1:
            return 1 + y, k - 1
        if k == 0:
            return 2 * y - 1, 0
        return -(2 - y), -k - 1

    def interpolate(self, p0: FramedPoint, p1: FramedPoint, s: Fraction) -> FramedPoint:
        s = as_fraction(s)
        if s == 0:
            return p0
        if s == 1:
            return p1
        m0, e0 = self._mantissa(p0)
        m1, e1 = self._mantissa(p1)
        top = max(e0, e1)
        if top - min(e0, e1) > EXACT_EXPONENT_SPAN:
            logger.debug(f"Dropping the term 2^{min(e0, e1)} against 2^{top} in an affine combination")
            w = (1 - s) * m0 if e0 == top else s * m1
        else:
            w = (1 - s) * m0 * pow2(e0 - top) + s * m1 * pow2(e1 - top)
        return self.split_scaled(w, top)


class BetaNet(Net):
    """
    Net beta: uniform rank-1 partition of width delta_1 and block-and-tail
    children of length at most delta_r at rank r.
    """

    kind = "beta"

    def __init__(self, delta: Sequence[Number], jitter: bool = False, seed: int = 0):
        super().__init__()
        delta = [as_fraction(d) for d in delta]
        if not delta:
            raise ValueError("Net beta needs at least one delta value")
        if any(d <= 0 for d in delta):
            raise ValueError(f"delta values must be positive, got {[float(d) for d in delta]}")
        if any(b > a for a, b in zip(delta, delta[1:])):
            raise ValueError("delta sequence must be nonincreasing")
        if seed < 0:
            raise ValueError(f"Seed must be nonnegative, got {seed}")
        self.delta = delta
        self.jitter = jitter
        self.seed = seed
        self._root = UniformLinePartition(delta[0])

    def width(self, rank: int) -> Fraction:
        if rank > len(self.delta):
            raise ValueError(f"delta sequence of length {len(self.delta)} is too short for rank {rank}")
        return self.delta[rank - 1]

    def root_partition(self) -> OrderedPartition:
        return self._root

    def root_local(self, k: int) -> Interval:
        return Interval(0, self.delta[0])

    def root_scale_exp(self, k: int) -> int:
        return 0

    def root_origin(self, k: int) -> Fraction:
        return (k - 1) * self.delta[0]

    def child_partition(self, prefix: Tuple[int, ...], parent: Interval) -> OrderedPartition:
        cached = self._child_cache.get(prefix)
        if cached is not None:
            return cached
        key = None
        if self.jitter:
            key = (self.seed, len(prefix)) + tuple(zigzag(s) for s in prefix)
        partition = BlockPartition(parent, self.width(len(prefix) + 1), key)
        self._child_cache[prefix] = partition
        return partition


def net_alpha() -> AlphaNet:
    """Net alpha: dyadic_line at rank 1, dyadic_interval for children."""
    return AlphaNet()


def net_beta(delta: Sequence[Number], jitter: bool = False, seed: int = 0) -> BetaNet:
    """
    Net beta for a positive nonincreasing sequence delta_1, delta_2, ...

    Args:
        delta: Length bounds per rank
        jitter: Use seeded unequal blocks and tail ratios
        seed: Seed of the jitter streams

    Returns:
        BetaNet whose rank-r intervals have length at most delta_r
    """
    return BetaNet(delta, jitter=jitter, seed=seed)


def locate(net: Net, x: Number, rank: int) -> Union[NetAddress, EndpointHit]:
    """Address of the rank-``rank`` interval containing x, or the endpoint hit."""
    return net.locate(x, rank)


def product_rectangles(net: Net, rank: int, window: Iterable[int], dim: int = 1) -> List[RankedRectangle]:
    """
    All rank-``rank`` product rectangles whose factor indices lie in ``window``.

    Args:
        net: Net providing the factors
        rank: Common rank of all factors
        window: Finite set of indices used at every level of every axis
        dim: Number of factors

    Returns:
        List of RankedRectangle in lexicographic address order
    """
    window = sorted(set(int(k) for k in window))
    if not window:
        return []
    addresses = [NetAddress(path) for path in itertools.product(window, repeat=rank)]
    intervals = {a: net.interval(a) for a in addresses}
    rectangles = []
    for combo in itertools.product(addresses, repeat=dim):
        factors = tuple(intervals[a] for a in combo)
        center = None
        if all(f.bounded for f in factors):
            center = tuple(f.midpoint for f in factors)
        rectangles.append(RankedRectangle(tuple(combo), factors, center))
    return rectangles
