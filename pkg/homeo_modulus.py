#!/usr/bin/env python3
"""
Moduli of Continuity
====================

Moduli of continuity of sampled functions and function families, the
built-in test families used by the experiments, and the two sequence
selections driving the constructions:

- ``select_b``: shell scales b_j with omega_j(b_j) <= 1 / (j + 1);
- ``select_delta``: net widths delta_nu with
  c_model(1 + 1/(nu+1), nu+1) * omega(delta_nu * sqrt(d)) <= 2^-(nu+1).

Every bisection goes through ``scipy.optimize.bisect`` on log2 delta and is
followed by a check of the returned point. Scales below the float floor come
back as exact dyadic Fractions.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d
from scipy.optimize import bisect

logger = logging.getLogger(__name__)

BISECTION_XTOL = 2.0 ** -30
# Accepted points clear the target by this much in log2 scale.
VERIFY_MARGIN = 2.0 ** -36
# Below 2^FLOAT_FLOOR_EXP widths are exact dyadic Fractions and moduli are
# evaluated through their closed form in log2 scale.
FLOAT_FLOOR_EXP = -1000
SEARCH_FLOOR_EXP = -(2 ** 16)
BACKOFF_STEPS = 64

CModel = Callable[[float, int], float]
Scale = Union[float, Fraction]


class BisectionError(ValueError):
    """Raised when a modulus does not vanish at 0 within the search range."""


def _power_log2(constant: float, exponent: float, cap: Optional[float] = None) -> Callable[[float], float]:
    """x -> log2 min(constant * 2^(exponent x), cap)."""
    if constant <= 0:
        return lambda x: -math.inf
    base = math.log2(constant)
    top = math.inf if cap is None else math.log2(cap)
    return lambda x: min(base + exponent * x, top)


@dataclass(frozen=True)
class Modulus:
    """
    Nondecreasing function omega on [0, inf) with omega(0) = 0.

    Attributes:
        func: Vectorized evaluation on nonnegative arrays
        source: ``analytic`` or ``grid-estimated``
        name: Label used in reports
        log2_func: x -> log2 omega(2^x), needed below the float floor only
    """

    func: Callable[[np.ndarray], np.ndarray]
    source: str = "analytic"
    name: str = ""
    log2_func: Optional[Callable[[float], float]] = field(default=None, compare=False)

    def __call__(self, delta):
        d = np.asarray(delta, dtype=float)
        if np.any(d < 0):
            raise ValueError("Modulus argument must be nonnegative")
        values = np.where(d == 0, 0.0, self.func(d))
        return float(values) if values.ndim == 0 else values

    def log2_at(self, x: float) -> float:
        """
        log2 omega(2^x).

        Raises:
            BisectionError: x is below the float floor and the modulus has no closed form
        """
        if x >= FLOAT_FLOOR_EXP:
            value = self(2.0 ** x)
            return math.log2(value) if value > 0 else -math.inf
        if self.log2_func is None:
            raise BisectionError(f"Modulus '{self.name}' has no closed form below the float floor "
                                 f"2^{FLOAT_FLOOR_EXP}, so it cannot be resolved at 2^{x:.1f}")
        return float(self.log2_func(x))

    def scaled(self, factor: float) -> "Modulus":
        """delta -> omega(factor * delta)."""
        if not factor > 0:
            raise ValueError(f"Scale factor must be positive, got {factor}")
        shift = math.log2(factor)
        log2_func = None
        if self.log2_func is not None:
            log2_func = lambda x: self.log2_func(x + shift)  # noqa: E731
        return Modulus(lambda d: self.func(d * factor), self.source, self.name, log2_func)

    @classmethod
    def lipschitz(cls, constant: float, cap: Optional[float] = None) -> "Modulus":
        log2_func = _power_log2(constant, 1.0, cap)
        if cap is None:
            return cls(lambda d: constant * d, name=f"lipschitz({constant:g})", log2_func=log2_func)
        return cls(lambda d: np.minimum(constant * d, cap), name=f"lipschitz({constant:g})", log2_func=log2_func)

    @classmethod
    def holder(cls, alpha: float, constant: float = 1.0, cap: Optional[float] = None) -> "Modulus":
        if not 0 < alpha <= 1:
            raise ValueError(f"Holder exponent must lie in (0, 1], got {alpha}")
        log2_func = _power_log2(constant, alpha, cap)
        if cap is None:
            return cls(lambda d: constant * d ** alpha, name=f"holder({alpha:g})", log2_func=log2_func)
        return cls(lambda d: np.minimum(constant * d ** alpha, cap), name=f"holder({alpha:g})", log2_func=log2_func)

    @classmethod
    def weierstrass(cls, a: float, b: float, terms: int) -> "Modulus":
        """omega(delta) = sum_k a^k min(b^k delta, 2), the sharp bound for sum a^k cos(b^k t + c)."""
        weights = a ** np.arange(terms)
        freqs = b ** np.arange(terms, dtype=float)
        ks = np.arange(terms, dtype=float)

        def func(d):
            d = np.asarray(d, dtype=float)
            return np.sum(weights * np.minimum(np.multiply.outer(d, freqs), 2.0), axis=-1)

        def log2_func(x):
            return float(np.logaddexp2.reduce(ks * math.log2(a) + np.minimum(ks * math.log2(b) + x, 1.0)))

        return cls(func, name=f"weierstrass(a={a:g}, b={b:g}, K={terms})", log2_func=log2_func)

    @classmethod
    def zero(cls) -> "Modulus":
        return cls(lambda d: np.zeros_like(np.asarray(d, dtype=float)), name="zero",
                   log2_func=lambda x: -math.inf)


def weierstrass_holder_constant(a: float, b: float) -> Optional[float]:
    """
    C with sum_k a^k min(b^k delta, 2) <= C delta^alpha, alpha = log(1/a) / log(b).

    Returns None when a * b == 1 (the exponent is 1 and the bound is logarithmic).
    """
    if a * b <= 1:
        return None
    alpha = math.log(1.0 / a) / math.log(b)
    return b ** (1.0 - alpha) / (a * b - 1.0) + 2.0 / (1.0 - a)


@dataclass(frozen=True)
class ModulusEstimate:
    delta: float
    value: float
    underestimate: bool


def estimate_modulus(values: np.ndarray, delta: float, spacing: float,
                     periodic: bool = False) -> ModulusEstimate:
    """
    Grid modulus: sup |f(t1) - f(t2)| over grid pairs with |t1 - t2| <= delta.

    Args:
        values: Samples on a uniform grid (any dimension, equal spacing per axis)
        delta: Distance bound
        spacing: Grid step
        periodic: Treat every axis as cyclic

    Returns:
        ModulusEstimate, flagged as an underestimate when spacing > delta
    """
    values = np.asarray(values)
    if values.size == 0:
        raise ValueError("Cannot estimate a modulus on an empty grid")
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    underestimate = delta > 0 and spacing > delta
    reach = int(math.floor(delta / spacing * (1 + 1e-12)))
    reach = min(reach, max(values.shape) - 1)
    if reach <= 0:
        return ModulusEstimate(delta, 0.0, underestimate)
    if values.ndim == 1 and not np.iscomplexobj(values):
        mode = "wrap" if periodic else "nearest"
        width = reach + 1
        spread = maximum_filter1d(values, width, mode=mode) - minimum_filter1d(values, width, mode=mode)
        return ModulusEstimate(delta, float(np.max(spread)), underestimate)
    best = 0.0
    for offset in _half_ball(values.ndim, reach):
        best = max(best, _max_shift_difference(values, offset, periodic))
    return ModulusEstimate(delta, best, underestimate)


def _half_ball(ndim: int, reach: int):
    """Integer offsets with 0 < |o| <= reach, one of each +-pair."""
    for offset in np.ndindex(*[2 * reach + 1] * ndim):
        o = tuple(c - reach for c in offset)
        if sum(c * c for c in o) > reach * reach:
            continue
        first = next((c for c in o if c != 0), 0)
        if first > 0:
            yield o


def _max_shift_difference(values: np.ndarray, offset, periodic: bool) -> float:
    if periodic:
        shifted = np.roll(values, shift=offset, axis=tuple(range(values.ndim)))
        return float(np.max(np.abs(values - shifted)))
    src, dst = [], []
    for o, n in zip(offset, values.shape):
        if abs(o) >= n:
            return 0.0
        src.append(slice(max(0, -o), n - max(0, o)))
        dst.append(slice(max(0, o), n - max(0, -o)))
    return float(np.max(np.abs(values[tuple(dst)] - values[tuple(src)])))


@dataclass
class FunctionFamily:
    """
    A bounded family of functions on a common domain.

    Members take per-axis coordinate arrays (broadcastable) and return values.

    Attributes:
        name: Family label
        members: Evaluable members
        bound: Common sup-norm bound
        modulus: Uniform modulus on the whole space, None when the family is
            not uniformly equicontinuous there
        shell_modulus: omega_j on the shell j <= |x| <= j + 1
        domain: ``line`` or ``torus``
        params: Generator parameters, echoed in reports
    """

    name: str
    members: List[Callable[..., np.ndarray]]
    bound: float
    modulus: Optional[Modulus] = None
    shell_modulus: Optional[Callable[[int], Modulus]] = None
    domain: str = "line"
    params: Dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.members:
            raise ValueError(f"Function family '{self.name}' has no members")

    def shell(self, j: int) -> Modulus:
        if self.shell_modulus is not None:
            return self.shell_modulus(j)
        if self.modulus is None:
            raise ValueError(f"Family '{self.name}' carries no modulus")
        return self.modulus

    def evaluate(self, index: int, *axes: np.ndarray) -> np.ndarray:
        return self.members[index](*axes)


def _axis_mean(u: Callable[[np.ndarray], np.ndarray]) -> Callable[..., np.ndarray]:
    """f(t) = mean_i u(t_i); inherits the modulus of u."""

    def member(*axes):
        total = u(np.asarray(axes[0]))
        for t in axes[1:]:
            total = total + u(np.asarray(t))
        return total / len(axes)

    return member


PHASES = (0.0, 0.7, 1.9)


def constant_family(value: float = 1.0) -> FunctionFamily:
    return FunctionFamily(
        name="constant",
        members=[_axis_mean(lambda t: np.full(np.shape(t), value, dtype=float))],
        bound=abs(value),
        modulus=Modulus.zero(),
        domain="torus",
        params={"kind": "constant", "value": value},
    )


def lipschitz_family(constant: float = 1.0) -> FunctionFamily:
    members = [_axis_mean(lambda t, c=c: np.cos(constant * t + c)) for c in PHASES]
    periodic = float(constant).is_integer()
    return FunctionFamily(
        name="lipschitz",
        members=members,
        bound=1.0,
        modulus=Modulus.lipschitz(constant, cap=2.0),
        domain="torus" if periodic else "line",
        params={"kind": "lipschitz", "constant": constant},
    )


def holder_family(alpha: float = 0.5) -> FunctionFamily:
    members = [_axis_mean(lambda t, c=c: np.abs(np.sin((t - c) / 2)) ** alpha) for c in PHASES]
    return FunctionFamily(
        name="holder",
        members=members,
        bound=1.0,
        modulus=Modulus.holder(alpha, constant=2.0 ** -alpha, cap=1.0),
        domain="torus",
        params={"kind": "holder", "alpha": alpha},
    )


def weierstrass_family(a: float = 0.5, b: float = 4.0, terms: int = 8) -> FunctionFamily:
    """Three Weierstrass-type sums sum_k a^k cos(b^k t + c) with different phases c."""
    if not 0 < a < 1:
        raise ValueError(f"Weierstrass a must lie in (0, 1), got {a}")
    if a * b < 1:
        raise ValueError(f"Weierstrass parameters need a * b >= 1, got {a * b}")
    weights = a ** np.arange(terms)
    freqs = b ** np.arange(terms, dtype=float)

    def make(c):
        def u(t):
            t = np.asarray(t, dtype=float)
            return np.sum(weights * np.cos(np.multiply.outer(t, freqs) + c), axis=-1)
        return _axis_mean(u)

    periodic = float(b).is_integer()
    return FunctionFamily(
        name="weierstrass",
        members=[make(c) for c in PHASES],
        bound=float(np.sum(weights)),
        modulus=Modulus.weierstrass(a, b, terms),
        domain="torus" if periodic else "line",
        params={"kind": "weierstrass", "a": a, "b": b, "terms": terms,
                "holder_exponent": math.log(1.0 / a) / math.log(b),
                "holder_constant": weierstrass_holder_constant(a, b)},
    )


def trigonometric_family(seed: int = 0, degree: int = 8) -> FunctionFamily:
    """Seeded random trigonometric polynomials with coefficients decaying like 1/k^2."""
    rng = np.random.default_rng(seed)
    members, bounds, slopes = [], [], []
    ks = np.arange(1, degree + 1)
    for _ in PHASES:
        cos_c = rng.standard_normal(degree) / ks ** 2
        sin_c = rng.standard_normal(degree) / ks ** 2

        def u(t, cos_c=cos_c, sin_c=sin_c):
            arg = np.multiply.outer(np.asarray(t, dtype=float), ks)
            return np.sum(cos_c * np.cos(arg) + sin_c * np.sin(arg), axis=-1)

        members.append(_axis_mean(u))
        bounds.append(float(np.sum(np.abs(cos_c) + np.abs(sin_c))))
        slopes.append(float(np.sum(ks * (np.abs(cos_c) + np.abs(sin_c)))))
    bound = max(bounds)
    return FunctionFamily(
        name="trigonometric",
        members=members,
        bound=bound,
        modulus=Modulus.lipschitz(max(slopes), cap=2 * bound),
        domain="torus",
        params={"kind": "trigonometric", "seed": seed, "degree": degree},
    )


def chirp_family() -> FunctionFamily:
    """cos(t^2 + c): bounded, not uniformly equicontinuous on the line."""
    members = [_axis_mean(lambda t, c=c: np.cos(np.asarray(t, dtype=float) ** 2 + c)) for c in PHASES]
    return FunctionFamily(
        name="chirp",
        members=members,
        bound=1.0,
        modulus=None,
        shell_modulus=lambda j: Modulus.lipschitz(2.0 * (j + 1), cap=2.0),
        domain="line",
        params={"kind": "chirp"},
    )


def gamma_sequence(spec: Dict) -> Callable[[np.ndarray], np.ndarray]:
    """Positive growth sequence gamma(n) from a config spec."""
    kind = spec.get("kind", "log")
    shift = float(spec.get("shift", 2.0))
    if kind == "log":
        if shift <= 1:
            raise ValueError("gamma kind 'log' needs shift > 1")
        return lambda n: np.log(shift + np.asarray(n, dtype=float))
    if kind == "power":
        exponent = float(spec.get("exponent", 0.5))
        if shift <= 0 or exponent <= 0:
            raise ValueError("gamma kind 'power' needs shift > 0 and exponent > 0")
        return lambda n: (shift + np.asarray(n, dtype=float)) ** exponent
    if kind == "loglog":
        if shift <= 1:
            raise ValueError("gamma kind 'loglog' needs shift > 1")
        return lambda n: np.log1p(np.log(shift + np.asarray(n, dtype=float)))
    raise ValueError(f"Unknown gamma kind '{kind}'")


def character_family(gamma_spec: Dict, n_max: int) -> FunctionFamily:
    """e^{i n t} / gamma(|n|) for |n| <= n_max, with its exact family modulus."""
    gamma = gamma_sequence(gamma_spec)
    ns = np.arange(-n_max, n_max + 1)
    weights = 1.0 / gamma(np.abs(ns))
    members = [(lambda *axes, n=n, w=w: w * np.exp(1j * n * np.asarray(axes[0], dtype=float)))
               for n, w in zip(ns, weights)]
    abs_n = np.abs(ns).astype(float)

    def func(d):
        d = np.asarray(d, dtype=float)
        return np.max(np.minimum(np.multiply.outer(d, abs_n), 2.0) * weights, axis=-1)

    moving = abs_n > 0
    log2_weights = np.log2(weights[moving])
    log2_n = np.log2(abs_n[moving])

    def log2_func(x):
        return float(np.max(log2_weights + np.minimum(log2_n + x, 1.0)))

    return FunctionFamily(
        name="characters",
        members=members,
        bound=float(np.max(weights)),
        modulus=Modulus(func, name="characters", log2_func=log2_func),
        domain="torus",
        params={"kind": "characters", "gamma": dict(gamma_spec), "n_max": n_max},
    )


def build_family(spec: Dict) -> FunctionFamily:
    """Built-in family from a config spec ``{"kind": ..., **params}``."""
    kind = spec.get("kind", "weierstrass")
    if kind == "constant":
        return constant_family(float(spec.get("value", 1.0)))
    if kind == "lipschitz":
        return lipschitz_family(float(spec.get("constant", 1.0)))
    if kind == "holder":
        return holder_family(float(spec.get("alpha", 0.5)))
    if kind == "weierstrass":
        return weierstrass_family(float(spec.get("a", 0.5)), float(spec.get("b", 4.0)),
                                  int(spec.get("terms", 8)))
    if kind == "trigonometric":
        return trigonometric_family(int(spec.get("seed", 0)), int(spec.get("degree", 8)))
    if kind == "chirp":
        return chirp_family()
    if kind == "characters":
        return character_family(spec.get("gamma", {"kind": "log", "shift": 2}),
                                int(spec.get("n_max", 64)))
    raise ValueError(f"Unknown function family '{kind}'")


def family_modulus(family: FunctionFamily, grid: np.ndarray, delta: float,
                   periodic: bool = False) -> float:
    """
    Grid modulus of a family: sup over members of ``estimate_modulus``.

    One-dimensional only: members are sampled on a single axis and the
    modulus is taken along it.

    Args:
        family: Function family
        grid: Uniform 1-D sample points, equally spaced
        delta: Distance bound
        periodic: Treat the grid as cyclic

    Returns:
        Pointwise sup of the member moduli at delta
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2:
        raise ValueError("family_modulus needs at least two grid points")
    spacing = float(grid[1] - grid[0])
    estimates = [estimate_modulus(member(grid), delta, spacing, periodic) for member in family.members]
    if any(e.underestimate for e in estimates):
        logger.warning(f"Grid spacing {spacing:.3g} exceeds delta {delta:.3g}, "
                       f"modulus of '{family.name}' underestimated")
    return max(e.value for e in estimates)


def format_scale(delta: Scale) -> str:
    """Readable scale; exact Fractions below the float floor print as 2^x."""
    if isinstance(delta, Fraction) and delta < 2.0 ** FLOAT_FLOOR_EXP:
        return f"2^{_log2_scale(delta):.4f}"
    return f"{float(delta):.6g}"


def _log2_scale(delta: Scale) -> float:
    if isinstance(delta, Fraction):
        return math.log2(delta.numerator) - math.log2(delta.denominator)
    return math.log2(delta)


def _scale_from_log2(x: float) -> Scale:
    if x >= FLOAT_FLOOR_EXP:
        return 2.0 ** x
    e = math.floor(x)
    return Fraction(2.0 ** (x - e)) / (1 << -e)


def _largest_log2_below(omega: Modulus, level: float, top: float) -> Scale:
    """Largest delta in (0, 2^top] with log2 omega(delta) <= level."""

    def excess(x: float) -> float:
        return omega.log2_at(x) - level

    def verified(delta: Scale) -> bool:
        if isinstance(delta, Fraction):
            return excess(_log2_scale(delta)) <= -VERIFY_MARGIN
        value = omega(delta)
        return value == 0 or math.log2(value) <= level - VERIFY_MARGIN

    upper, span = top, 1.0
    while True:
        lower = max(top - span, float(SEARCH_FLOOR_EXP))
        if excess(lower) <= 0:
            break
        if lower <= SEARCH_FLOOR_EXP:
            raise BisectionError(
                f"Modulus '{omega.name}' stays above 2^{level:.4g} down to delta = 2^{SEARCH_FLOOR_EXP}, "
                "the floor of the width search")
        upper, span = lower, 2 * span
    root = bisect(excess, lower, upper, xtol=BISECTION_XTOL)
    for k in range(BACKOFF_STEPS):
        candidate = _scale_from_log2(root - (BISECTION_XTOL * 2 ** k if k else 0.0))
        if verified(candidate):
            return candidate
    candidate = _scale_from_log2(lower)
    if verified(candidate):
        return candidate
    raise BisectionError(f"Bisection on '{omega.name}' did not return a verified point")


def largest_delta_below(omega: Modulus, target: float, hi: float = 1.0) -> Scale:
    """
    Largest delta in (0, hi] with omega(delta) <= target.

    A geometric walk on log2 delta brackets the crossing, scipy's bisection
    refines it and the result is backed off until the inequality is verified.
    Below 2^FLOAT_FLOOR_EXP the modulus is evaluated through its closed form
    and delta comes back as an exact dyadic Fraction.

    Raises:
        BisectionError: omega stays above target down to 2^SEARCH_FLOOR_EXP,
            or the search passes the float floor on a modulus without a closed form
    """
    if not target > 0:
        raise ValueError(f"Target must be positive, got {target}")
    if omega(hi) <= target:
        return hi
    return _largest_log2_below(omega, math.log2(target), math.log2(hi))


def select_b(omegas: Sequence[Modulus]) -> List[Scale]:
    """
    Decreasing shell scales b_0 > b_1 > ... in (0, 1/2] with omega_j(b_j) <= 1 / (j + 1).

    b_j is the bisection value when it is below b_(j-1), otherwise b_(j-1) / 2.

    Args:
        omegas: Shell moduli omega_0, omega_1, ...

    Returns:
        List of b_j
    """
    b: List[Scale] = []
    for j, omega in enumerate(omegas):
        candidate = largest_delta_below(omega, 1.0 / (j + 1), hi=0.5)
        if b and candidate >= b[-1]:
            candidate = b[-1] / 2
        b.append(candidate)
        logger.debug(f"b_{j} = {format_scale(candidate)}")
    return b


def default_c_model(constant: float = 8.0, dim: int = 1) -> CModel:
    """c_model(p, nu) = (C * max(p, p / (p - 1)))^(d * nu)."""

    def c_model(p: float, nu: int) -> float:
        return (constant * max(p, p / (p - 1.0))) ** (dim * nu)

    return c_model


def unit_c_model(p: float, nu: int) -> float:
    return 1.0


def select_delta(omega: Modulus, c_model: CModel, dim: int, count: int) -> List[Scale]:
    """
    Net widths delta_1 >= delta_2 >= ... >= delta_count in (0, 1] with
    c_model(1 + 1/(nu+1), nu+1) * omega(delta_nu * sqrt(d)) <= 2^-(nu+1).

    The inequality is solved in log2 scale, so widths far below the float
    range (slowly vanishing moduli with a steep c_model) are exact Fractions.

    Args:
        omega: Uniform modulus of the family
        c_model: Model of the rank constants c(p, nu)
        dim: Dimension d
        count: Number of widths

    Returns:
        List of delta_nu, nu = 1..count
    """
    scaled = omega.scaled(math.sqrt(dim))
    deltas: List[Scale] = []
    for nu in range(1, count + 1):
        c = c_model(1.0 + 1.0 / (nu + 1), nu + 1)
        if not 0 < c < math.inf:
            raise ValueError(f"c_model must be positive and finite, got {c} at nu={nu + 1}")
        level = -(nu + 1) - math.log2(c)
        if scaled(1.0) <= 2.0 ** level:
            candidate: Scale = 1.0
        else:
            candidate = _largest_log2_below(scaled, level, 0.0)
        if deltas:
            candidate = min(candidate, deltas[-1])
        deltas.append(candidate)
        logger.debug(f"delta_{nu} = {format_scale(candidate)}")
    return deltas
