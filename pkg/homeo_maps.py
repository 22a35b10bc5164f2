#!/usr/bin/env python3
"""
Homeomorphisms
==============

The changes of variable used by the experiments:

- ``RadialHomeo``: psi(x) = g(|x|) x / |x| with a piecewise-linear profile g
  that slows a family down shell by shell;
- ``NetHomeo``: the increasing line map phi sending every interval of one net
  onto the interval with the same address in another net;
- ``CoordinateHomeo``: h(t) = (phi(t_1), ..., phi(t_d));
- ``TorusHomeo``: phi_1 = phi o l on [0, 2 pi], l affine, phi_1 fixing 0 and 2 pi.

Line maps share a small point protocol (``point``, ``image``, ``preimage``,
``interpolate``) so the torus adaptation works for net maps, whose far
preimages only exist in framed coordinates, as well as for plain maps.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from homeo_modulus import Modulus
from homeo_nets import (
    EXACT_EXPONENT_SPAN,
    FramedPoint,
    Interval,
    Net,
    NetAddress,
    Number,
    as_fraction,
    floor_log2,
    pow2,
)

logger = logging.getLogger(__name__)

TWO_PI = Fraction(math.tau)


@dataclass(frozen=True)
class MapValue:
    """
    Result of evaluating a line map at one point.

    Attributes:
        value: Float image
        exact: Exact rational image (None when out of float range)
        rank: Deepest net rank used (0 for maps without nets)
        width: Length of the target interval the value was interpolated in
        converged: Whether the width reached the tolerance
        endpoint: Whether the point was a net endpoint with an exact image
    """

    value: float
    exact: Optional[Fraction]
    rank: int = 0
    width: float = 0.0
    converged: bool = True
    endpoint: bool = False


def _scaled_float(length: Fraction, exp: int) -> float:
    if length == 0:
        return 0.0
    f = floor_log2(length)
    try:
        return math.ldexp(float(length / pow2(f)), f + exp)
    except OverflowError:
        return math.inf


def _length_at_most(length: Fraction, exp: int, tolerance: Fraction) -> bool:
    """length * 2**exp <= tolerance without forming huge numbers."""
    if exp == 0:
        return length <= tolerance
    lg = floor_log2(length) + exp
    top = floor_log2(tolerance)
    if lg > top:
        return False
    if lg < top:
        return True
    return length * pow2(exp) <= tolerance


class LineHomeo:
    """
    Strictly increasing self-map of the line.

    Points of the source side are plain Fractions unless a subclass says
    otherwise; ``image`` evaluates at such a point.
    """

    def point(self, x: Number):
        return as_fraction(x)

    def image(self, point) -> MapValue:
        raise NotImplementedError

    def preimage(self, y: Number):
        return self.inverse().evaluate(y).exact

    def interpolate(self, p0, p1, s: Fraction):
        return p0 + as_fraction(s) * (p1 - p0)

    def inverse(self) -> "LineHomeo":
        raise NotImplementedError

    def evaluate(self, x: Number) -> MapValue:
        return self.image(self.point(x))

    def __call__(self, x: Number) -> float:
        return self.evaluate(x).value

    def evaluate_many(self, xs: Sequence[Number]) -> np.ndarray:
        return np.array([self.evaluate(x).value for x in xs], dtype=float)


class AffineLineMap(LineHomeo):
    """x -> scale * x + shift, scale > 0."""

    def __init__(self, scale: Number = 1, shift: Number = 0):
        self.scale = as_fraction(scale)
        self.shift = as_fraction(shift)
        if self.scale <= 0:
            raise ValueError(f"Affine line map needs a positive scale, got {self.scale}")

    def image(self, point: Fraction) -> MapValue:
        exact = self.scale * point + self.shift
        return MapValue(float(exact), exact)

    def inverse(self) -> "AffineLineMap":
        return AffineLineMap(1 / self.scale, -self.shift / self.scale)


def identity_homeo() -> AffineLineMap:
    return AffineLineMap(1, 0)


class PiecewiseLinearHomeo(LineHomeo):
    """
    Increasing piecewise-linear map through the given knots, extended
    beyond the outer knots with the outer slopes.
    """

    def __init__(self, xs: Sequence[Number], ys: Sequence[Number]):
        self.xs = [as_fraction(x) for x in xs]
        self.ys = [as_fraction(y) for y in ys]
        if len(self.xs) != len(self.ys) or len(self.xs) < 2:
            raise ValueError("Piecewise-linear map needs at least two matching knots")
        if any(b <= a for a, b in zip(self.xs, self.xs[1:])) or any(b <= a for a, b in zip(self.ys, self.ys[1:])):
            raise ValueError("Knots must be strictly increasing in both coordinates")
        self._xf = np.array([float(x) for x in self.xs])
        self._yf = np.array([float(y) for y in self.ys])

    def image(self, point: Fraction) -> MapValue:
        i = int(np.searchsorted(self._xf, float(point)))
        i = min(max(i, 1), len(self.xs) - 1)
        x0, x1, y0, y1 = self.xs[i - 1], self.xs[i], self.ys[i - 1], self.ys[i]
        exact = y0 + (point - x0) * (y1 - y0) / (x1 - x0)
        return MapValue(float(exact), exact, endpoint=point in self.xs)

    def evaluate_many(self, xs: Sequence[Number]) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        inside = np.interp(xs, self._xf, self._yf)
        lo_slope = (self._yf[1] - self._yf[0]) / (self._xf[1] - self._xf[0])
        hi_slope = (self._yf[-1] - self._yf[-2]) / (self._xf[-1] - self._xf[-2])
        inside = np.where(xs < self._xf[0], self._yf[0] + lo_slope * (xs - self._xf[0]), inside)
        return np.where(xs > self._xf[-1], self._yf[-1] + hi_slope * (xs - self._xf[-1]), inside)

    def inverse(self) -> "PiecewiseLinearHomeo":
        return PiecewiseLinearHomeo(self.ys, self.xs)


@dataclass(frozen=True)
class Transfer:
    point: FramedPoint
    rank: int
    local_width: Fraction
    converged: bool
    endpoint: bool


class NetHomeo(LineHomeo):
    """
    The increasing map phi with phi(I_s) = J_s for every address s.

    Evaluation descends both nets along the address of x until the interval
    on the stop side is no longer than ``tolerance`` (and the rank is at least
    ``min_rank``), or until ``max_rank``. Points on a partition endpoint get
    the exact matching endpoint; other points are interpolated affinely in
    the deepest matched pair. The stop side is the target net for the
    forward map and stays the same net for its inverse, so both directions
    descend to the same rank and invert each other exactly.
    """

    def __init__(self, source: Net, target: Net, max_rank: int = 12,
                 tolerance: Number = Fraction(1, 2 ** 16), min_rank: int = 1,
                 stop_on: str = "target"):
        if max_rank < 1 or min_rank < 1:
            raise ValueError("max_rank and min_rank must be >= 1")
        if min_rank > max_rank:
            raise ValueError(f"min_rank {min_rank} exceeds max_rank {max_rank}")
        if stop_on not in ("source", "target"):
            raise ValueError(f"stop_on must be 'source' or 'target', got {stop_on!r}")
        self.source = source
        self.target = target
        self.max_rank = max_rank
        self.min_rank = min_rank
        self.tolerance = as_fraction(tolerance)
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        self.stop_on = stop_on
        self.unconverged = 0

    def point(self, x: Number) -> FramedPoint:
        return self.source.split(x)

    def interpolate(self, p0: FramedPoint, p1: FramedPoint, s: Fraction) -> FramedPoint:
        return self.source.interpolate(p0, p1, s)

    def preimage(self, y: Number) -> FramedPoint:
        inverse = self.inverse()
        return inverse.transfer(inverse.point(y)).point

    def inverse(self) -> "NetHomeo":
        return NetHomeo(self.target, self.source, self.max_rank, self.tolerance, self.min_rank,
                        "source" if self.stop_on == "target" else "target")

    def transfer(self, point: FramedPoint) -> Transfer:
        """Carry a framed source point to framed target coordinates."""
        k, y = point.index, point.local
        src, tgt = self.source.root_local(k), self.target.root_local(k)
        if y == src.hi:
            return Transfer(FramedPoint(k, tgt.hi), 1, tgt.length, True, True)
        if y == src.lo:
            return Transfer(FramedPoint(k, tgt.lo), 1, tgt.length, True, True)
        stop_net = self.target if self.stop_on == "target" else self.source
        stop_exp = stop_net.root_scale_exp(k)
        path = (k,)
        rank = 1
        while True:
            stop_interval = tgt if self.stop_on == "target" else src
            small = _length_at_most(stop_interval.length, stop_exp, self.tolerance)
            if rank >= self.min_rank and small:
                converged = True
                break
            if rank >= self.max_rank:
                converged = small
                break
            src_children = self.source.child_partition(path, src)
            tgt_children = self.target.child_partition(path, tgt)
            s, on_endpoint = src_children.locate(y)
            if on_endpoint:
                hit = tgt_children.piece(s)
                return Transfer(FramedPoint(k, hit.hi), rank + 1, hit.length, True, True)
            path = path + (s,)
            src, tgt = src_children.piece(s), tgt_children.piece(s)
            rank += 1
        z = tgt.lo + (y - src.lo) * tgt.length / src.length
        return Transfer(FramedPoint(k, z), rank, tgt.length, converged, False)

    def image(self, point: FramedPoint) -> MapValue:
        result = self.transfer(point)
        k = result.point.index
        exp = self.target.root_scale_exp(k)
        width = _scaled_float(result.local_width, exp)
        if not result.converged:
            self.unconverged += 1
            level = logging.WARNING if self.unconverged == 1 else logging.DEBUG
            logger.log(level, f"phi descent stopped at max_rank {result.rank} with width {width:.3g} "
                              f"above tolerance {float(self.tolerance):.3g}")
        if exp > EXACT_EXPONENT_SPAN:
            sign = 1.0 if k > 0 else -1.0
            return MapValue(sign * math.inf, None, result.rank, width, result.converged, result.endpoint)
        exact = self.target.join(result.point)
        return MapValue(float(exact), exact, result.rank, width, result.converged, result.endpoint)

    def interval_image(self, address: NetAddress) -> Interval:
        """phi(I_s) = J_s."""
        return self.target.interval(address)


def phi_eval(phi: NetHomeo, x: Number) -> MapValue:
    """
    Evaluate phi at x.

    Returns:
        MapValue with the exact image for net endpoints, or the affine
        interpolation in the deepest matched pair; ``converged`` is False
        and ``width`` holds the achieved target length when the descent hit
        ``max_rank`` first
    """
    return phi.evaluate(x)


class CoordinateHomeo:
    """h(t) = (phi(t_1), ..., phi(t_d)) for an increasing line map phi."""

    def __init__(self, phi, dim: int):
        if dim < 1:
            raise ValueError(f"Dimension must be >= 1, got {dim}")
        self.phi = phi
        self.dim = dim

    def __call__(self, t: Sequence[Number]) -> np.ndarray:
        if len(t) != self.dim:
            raise ValueError(f"Expected a point with {self.dim} coordinates, got {len(t)}")
        return np.array([self.phi.evaluate(x).value for x in t])

    def image_rectangle(self, factors: Sequence[Interval]) -> List[Interval]:
        """Exact image of a product of bounded intervals."""
        return [Interval(self.phi.evaluate(f.lo).exact, self.phi.evaluate(f.hi).exact) for f in factors]


def h_eval(h: CoordinateHomeo, t: Sequence[Number]) -> np.ndarray:
    """Componentwise phi evaluation."""
    return h(t)


class TorusHomeo:
    """
    Circle homeomorphism phi_1 = phi o l, with l the increasing affine map
    of [0, period] onto [phi^-1(0), phi^-1(period)].
    """

    def __init__(self, phi: LineHomeo, period: Number = TWO_PI):
        self.phi = phi
        self.period = as_fraction(period)
        self.lower = phi.preimage(0)
        self.upper = phi.preimage(self.period)

    def line_point(self, x: Number):
        """l(x) for x in [0, period], in the source point representation of phi."""
        s = as_fraction(x) / self.period
        if not 0 <= s <= 1:
            raise ValueError(f"{x} is outside [0, {float(self.period)}]")
        return self.phi.interpolate(self.lower, self.upper, s)

    def evaluate(self, x: Number) -> MapValue:
        """phi_1 at x reduced modulo the period."""
        x = as_fraction(x) % self.period
        return self.phi.image(self.line_point(x))

    def __call__(self, x: Number) -> float:
        return self.evaluate(x).value

    def evaluate_many(self, xs: Sequence[Number]) -> np.ndarray:
        return np.array([self.evaluate(x).value for x in xs], dtype=float)

    def endpoint_images(self) -> Tuple[Fraction, Fraction]:
        """(phi_1(0), phi_1(period)) computed through l, exact."""
        return self.phi.image(self.lower).exact, self.phi.image(self.upper).exact


def torus_adapt(phi: LineHomeo, period: Number = TWO_PI, dim: int = 1) -> Tuple[TorusHomeo, CoordinateHomeo]:
    """
    Adapt an increasing line map to the torus.

    Returns:
        (phi_1, h_2) with h_2 acting componentwise on the d-torus
    """
    phi1 = TorusHomeo(phi, period)
    return phi1, CoordinateHomeo(phi1, dim)


# ---------------------------------------------------------------------------
# Radial homeomorphism
# ---------------------------------------------------------------------------

class RadialHomeo:
    """
    psi(x) = g(|x|) x / |x| with g piecewise linear, g(r_j) = j and slope
    a_(j+1) = b_(j+1) / (j + 3) on [r_j, r_(j+1)].

    Attributes:
        b: b_0 > b_1 > ... > b_J in (0, 1)
        a: a_j = b_j / (j + 2), j = 1..J (index 0 unused)
        r: r_0 = 0, r_j = sum_(s <= j) 1 / a_s
    """

    def __init__(self, b: Sequence[Number]):
        b_exact = [as_fraction(v) for v in b]
        if len(b_exact) < 2:
            raise ValueError("Radial homeomorphism needs at least b_0 and b_1")
        if any(not 0 < v < 1 for v in b_exact):
            raise ValueError("b_j must lie in (0, 1)")
        if any(w >= v for v, w in zip(b_exact, b_exact[1:])):
            raise ValueError("b_j must be strictly decreasing")
        self.b_exact = b_exact
        self.a_exact = [Fraction(0)] + [b_exact[j] / (j + 2) for j in range(1, len(b_exact))]
        r = [Fraction(0)]
        for j in range(1, len(b_exact)):
            r.append(r[-1] + 1 / self.a_exact[j])
        self.r_exact = r
        self.b = np.array([float(v) for v in b_exact])
        self.a = np.array([float(v) for v in self.a_exact])
        self.r = np.array([float(v) for v in r])

    @property
    def shells(self) -> int:
        """Number J of shells with a certified slope."""
        return len(self.b) - 1

    def profile(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        levels = np.arange(len(self.r), dtype=float)
        inside = np.interp(s, self.r, levels)
        last = self.shells
        return np.where(s > self.r[-1], last + self.a[last] * (s - self.r[-1]), inside)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """psi on points of shape (..., d); a 1-D array is read as scalar points."""
        x = np.asarray(x, dtype=float)
        if x.ndim <= 1:
            return np.sign(x) * self.profile(np.abs(x))
        radius = np.linalg.norm(x, axis=-1)
        scale = np.divide(self.profile(radius), radius, out=np.zeros_like(radius), where=radius > 0)
        return x * scale[..., None]


def radial_build(omegas: Sequence[Modulus]) -> RadialHomeo:
    """RadialHomeo from shell moduli via ``select_b``."""
    from homeo_modulus import select_b

    return RadialHomeo(select_b(omegas))


def radial_eval(psi: RadialHomeo, x: np.ndarray) -> np.ndarray:
    return psi(x)


def radial_lipschitz_check(psi: RadialHomeo, j: int, samples: int = 10000,
                           seed: int = 0, dim: int = 1) -> float:
    """
    Max of |psi(x) - psi(y)| / |x - y| over seeded pairs in the shell
    r_j <= |x|, |y| <= r_(j+1).
    """
    if not 0 <= j < psi.shells:
        raise ValueError(f"Shell {j} needs 0 <= j < {psi.shells}")
    rng = np.random.default_rng([seed, j])
    lo, hi = psi.r[j], psi.r[j + 1]

    def draw():
        radius = rng.uniform(lo, hi, size=samples)
        direction = rng.standard_normal((samples, dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        return direction * radius[:, None]

    x, y = draw(), draw()
    gap = np.linalg.norm(x - y, axis=1)
    keep = gap > 0
    ratio = np.linalg.norm(psi(x) - psi(y), axis=1)[keep] / gap[keep]
    return float(np.max(ratio)) if ratio.size else 0.0


def composition_bound(psi: RadialHomeo, omegas: Sequence[Modulus], delta: float) -> float:
    """2 * max_j omega_j(b_j * delta) over the computed shells, 0 < delta <= 1."""
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    count = min(len(omegas), len(psi.b))
    return 2.0 * max(omegas[j](psi.b[j] * delta) for j in range(count))


def composed_modulus(psi: RadialHomeo, omegas: Sequence[Modulus]) -> Modulus:
    """Modulus of f o psi: ceil(delta) * 2 max_j omega_j(b_j min(delta, 1))."""

    def one(v: float) -> float:
        return math.ceil(v) * composition_bound(psi, omegas, min(v, 1.0)) if v > 0 else 0.0

    return Modulus(np.vectorize(one, otypes=[float]), name="composed")


def count_collinear_triples(xs: Sequence[Fraction], ys: Sequence[Fraction]) -> int:
    """Consecutive knot triples (x_i, y_i) lying on one line, exact arithmetic."""
    count = 0
    for i in range(len(xs) - 2):
        left = (ys[i + 1] - ys[i]) * (xs[i + 2] - xs[i + 1])
        right = (ys[i + 2] - ys[i + 1]) * (xs[i + 1] - xs[i])
        if left == right:
            count += 1
    return count


def collinear_endpoint_triples(phi: NetHomeo, address: NetAddress, window: Sequence[int]) -> int:
    """Collinear triples among (e, phi(e)) for the child endpoints of an address."""
    intervals = phi.source.child_intervals(address, sorted(window))
    xs = [intervals[0].lo] + [iv.hi for iv in intervals]
    ys = [phi.evaluate(x).exact for x in xs]
    return count_collinear_triples(xs, ys)


def symbol_from_family(member: Callable[..., np.ndarray], axis_images: Sequence[np.ndarray],
                       psi: Optional[RadialHomeo] = None) -> np.ndarray:
    """Values of f(psi(h(t))) on the product mesh of per-axis images of h."""
    mesh = np.meshgrid(*axis_images, indexing="ij")
    if psi is not None:
        stacked = np.stack(mesh, axis=-1)
        moved = psi(stacked) if len(mesh) > 1 else psi(mesh[0])
        mesh = [moved[..., i] for i in range(len(mesh))] if len(mesh) > 1 else [moved]
    return np.asarray(member(*mesh))
