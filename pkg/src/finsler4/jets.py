"""Forward-mode truncated Taylor jets over the eight phase-space variables.

A :class:`JetScalar` holds the Taylor coefficients of a smooth scalar
quantity around a base point of the slit tangent bundle.  Slots 0..3 are
the position variables ``x1..x4``, slots 4..7 the direction variables
``y1..y4``.  Total degree is capped separately per group (see
:class:`DegreeCaps`); one evaluation of a fundamental function in this
ring yields every mixed partial the downstream tensor calculus reads.

Coefficients are stored in Taylor normalisation: the entry for a
multi-index ``a`` equals the mixed partial divided by ``a!``, which keeps
multiplication a plain truncated convolution.  :func:`partial_extract`
multiplies the factorial back.

All values are immutable; every operation allocates a fresh jet, so jets
are safe to share between concurrent evaluators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence, Union

import numpy as np

N_VARS = 8
X_SLOTS = (0, 1, 2, 3)
Y_SLOTS = (4, 5, 6, 7)

Number = Union[int, float]


class JetError(Exception):
    """Base class for jet arithmetic failures."""


class DomainViolation(JetError):
    """An elementary function was evaluated outside its real domain."""


class CapMismatch(JetError):
    """Binary operation between jets carrying different degree caps."""


class CapTooSmall(JetError):
    """A requested construction needs more degrees than the caps allow."""


class OrderExceedsCaps(JetError):
    """A partial of higher order than the stored truncation was requested."""


@dataclass(frozen=True)
class DegreeCaps:
    """Per-group total-degree caps: x-degree <= x_max, y-degree <= y_max."""

    x_max: int = 1
    y_max: int = 4

    def __post_init__(self) -> None:
        if self.x_max < 0 or self.y_max < 0:
            raise ValueError("degree caps must be non-negative")

    @property
    def series_order(self) -> int:
        # highest total degree a stored monomial can carry
        return self.x_max + self.y_max


DEFAULT_CAPS = DegreeCaps(1, 4)


def _group_monos(n: int, max_total: int) -> list[tuple[int, ...]]:
    monos: list[tuple[int, ...]] = []

    def rec(prefix: tuple[int, ...], remaining: int, budget: int) -> None:
        if remaining == 0:
            monos.append(prefix)
            return
        for d in range(budget + 1):
            rec(prefix + (d,), remaining - 1, budget - d)

    rec((), n, max_total)
    return monos


class _Tables:
    """Cached index/multiplication tables for one caps configuration."""

    def __init__(self, caps: DegreeCaps) -> None:
        self.caps = caps
        xs = _group_monos(4, caps.x_max)
        ys = _group_monos(4, caps.y_max)
        monos = sorted((x + y for x in xs for y in ys), key=lambda m: (sum(m), m))
        self.monos = monos
        self.n = len(monos)
        self.index = {m: i for i, m in enumerate(monos)}
        self.fact = np.array(
            [math.prod(math.factorial(d) for d in m) for m in monos], dtype=float
        )
        ii, jj, kk = [], [], []
        for i, a in enumerate(monos):
            for j, b in enumerate(monos):
                s = tuple(p + q for p, q in zip(a, b))
                if sum(s[:4]) <= caps.x_max and sum(s[4:]) <= caps.y_max:
                    ii.append(i)
                    jj.append(j)
                    kk.append(self.index[s])
        self.mul_i = np.array(ii, dtype=np.intp)
        self.mul_j = np.array(jj, dtype=np.intp)
        self.mul_k = np.array(kk, dtype=np.intp)
        self._shift_cache: dict = {}
        self._restrict_cache: dict = {}

    def shift_map(self, beta: tuple[int, ...], dst: "_Tables"):
        """Index/scale arrays realising the derivative-by-beta extraction."""
        key = (beta, dst.caps)
        hit = self._shift_cache.get(key)
        if hit is not None:
            return hit
        src_idx = np.empty(dst.n, dtype=np.intp)
        scale = np.empty(dst.n, dtype=float)
        for d, alpha in enumerate(dst.monos):
            full = tuple(a + b for a, b in zip(alpha, beta))
            src_idx[d] = self.index[full]
            scale[d] = math.prod(
                math.factorial(a + b) // math.factorial(a)
                for a, b in zip(alpha, beta)
            )
        self._shift_cache[key] = (src_idx, scale)
        return src_idx, scale

    def restrict_map(self, dst: "_Tables") -> np.ndarray:
        key = dst.caps
        hit = self._restrict_cache.get(key)
        if hit is not None:
            return hit
        src_idx = np.array([self.index[m] for m in dst.monos], dtype=np.intp)
        self._restrict_cache[key] = src_idx
        return src_idx


@lru_cache(maxsize=None)
def _tables(caps: DegreeCaps) -> _Tables:
    return _Tables(caps)


OrderLike = Union[Sequence[int], Mapping[int, int]]


def multi(*slots: int) -> tuple[int, ...]:
    """Multi-index from a list of slots, e.g. ``multi(4, 4, 5)`` = y1^2 y2."""
    order = [0] * N_VARS
    for s in slots:
        if not 0 <= s < N_VARS:
            raise OrderExceedsCaps(f"variable slot {s} out of range 0..7")
        order[s] += 1
    return tuple(order)


def _as_order(order: OrderLike) -> tuple[int, ...]:
    if isinstance(order, Mapping):
        out = [0] * N_VARS
        for slot, deg in order.items():
            if not 0 <= slot < N_VARS:
                raise OrderExceedsCaps(f"variable slot {slot} out of range 0..7")
            out[slot] = int(deg)
        return tuple(out)
    order = tuple(int(d) for d in order)
    if len(order) != N_VARS or any(d < 0 for d in order):
        raise OrderExceedsCaps("order must be 8 non-negative integers")
    return order


class JetScalar:
    """Truncated Taylor expansion of a scalar at a fixed base point."""

    __slots__ = ("caps", "c")

    def __init__(self, caps: DegreeCaps, coeffs: np.ndarray) -> None:
        self.caps = caps
        self.c = coeffs

    @property
    def base(self) -> float:
        return float(self.c[0])

    def __repr__(self) -> str:
        return f"JetScalar(base={self.base!r}, caps={self.caps})"

    # -- arithmetic ----------------------------------------------------

    def _coerce(self, other) -> "JetScalar":
        if isinstance(other, JetScalar):
            if other.caps != self.caps:
                raise CapMismatch(
                    f"operands carry caps {self.caps} and {other.caps}"
                )
            return other
        if isinstance(other, (int, float)):
            return const(float(other), self.caps)
        return NotImplemented  # type: ignore[return-value]

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return JetScalar(self.caps, self.c + o.c)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return JetScalar(self.caps, self.c - o.c)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return JetScalar(self.caps, o.c - self.c)

    def __neg__(self):
        return JetScalar(self.caps, -self.c)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return JetScalar(self.caps, self.c * float(other))
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        t = _tables(self.caps)
        prod = self.c[t.mul_i] * o.c[t.mul_j]
        return JetScalar(self.caps, np.bincount(t.mul_k, weights=prod, minlength=t.n))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            if other == 0:
                raise DomainViolation("division by zero constant")
            return JetScalar(self.caps, self.c / float(other))
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self * _recip(o)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o * _recip(self)

    def __pow__(self, r):
        if isinstance(r, (int, float)):
            return power(self, r)
        return NotImplemented


def const(value: float, caps: DegreeCaps = DEFAULT_CAPS) -> JetScalar:
    c = np.zeros(_tables(caps).n)
    c[0] = value
    return JetScalar(caps, c)


def variable(slot: int, value: float, caps: DegreeCaps = DEFAULT_CAPS) -> JetScalar:
    """Jet of the coordinate function of one slot at the given value."""
    if not 0 <= slot < N_VARS:
        raise OrderExceedsCaps(f"variable slot {slot} out of range 0..7")
    group_cap = caps.x_max if slot in X_SLOTS else caps.y_max
    if group_cap < 1:
        raise CapTooSmall(f"slot {slot} needs degree >= 1 in its group, caps {caps}")
    t = _tables(caps)
    c = np.zeros(t.n)
    c[0] = value
    c[t.index[multi(slot)]] = 1.0
    return JetScalar(caps, c)


def partial_extract(f: JetScalar, order: OrderLike) -> float:
    """Mixed partial of f at the base point (coefficient times factorials)."""
    order = _as_order(order)
    t = _tables(f.caps)
    idx = t.index.get(order)
    if idx is None:
        raise OrderExceedsCaps(f"order {order} exceeds caps {f.caps}")
    return float(f.c[idx] * t.fact[idx])


def derivative_jet(f: JetScalar, order: OrderLike) -> JetScalar:
    """Jet of the derivative-by-`order` of f, with correspondingly reduced caps."""
    beta = _as_order(order)
    dx = sum(beta[:4])
    dy = sum(beta[4:])
    if dx > f.caps.x_max or dy > f.caps.y_max:
        raise OrderExceedsCaps(f"order {beta} exceeds caps {f.caps}")
    dst_caps = DegreeCaps(f.caps.x_max - dx, f.caps.y_max - dy)
    src = _tables(f.caps)
    dst = _tables(dst_caps)
    src_idx, scale = src.shift_map(beta, dst)
    return JetScalar(dst_caps, f.c[src_idx] * scale)


def restrict(f: JetScalar, caps: DegreeCaps) -> JetScalar:
    """Truncate a jet to smaller (or equal) caps."""
    if caps == f.caps:
        return f
    if caps.x_max > f.caps.x_max or caps.y_max > f.caps.y_max:
        raise CapMismatch(f"cannot restrict caps {f.caps} to larger {caps}")
    src = _tables(f.caps)
    dst = _tables(caps)
    return JetScalar(caps, f.c[src.restrict_map(dst)].copy())


# -- elementary functions ----------------------------------------------


def _compose(f: JetScalar, derivs: Sequence[float]) -> JetScalar:
    """h(f) for a univariate h given its derivatives at f.base.

    ``derivs[k]`` is the k-th derivative of h at the base value; the series
    is evaluated by Horner recursion in the jet ring.  Orders beyond the
    caps' total degree are nilpotent and never requested.
    """
    caps = f.caps
    m = min(len(derivs) - 1, caps.series_order)
    coeffs = [derivs[k] / math.factorial(k) for k in range(m + 1)]
    s = JetScalar(caps, f.c.copy())
    s.c[0] = 0.0
    r = const(coeffs[m], caps)
    for k in range(m - 1, -1, -1):
        r = r * s + coeffs[k]
    return r


def _recip(f: JetScalar) -> JetScalar:
    b = f.base
    if b == 0.0:
        raise DomainViolation("reciprocal of a jet with zero base value")
    m = f.caps.series_order
    derivs = [(-1) ** k * math.factorial(k) / b ** (k + 1) for k in range(m + 1)]
    return _compose(f, derivs)


def exp(f):
    if not isinstance(f, JetScalar):
        return math.exp(f)
    m = f.caps.series_order
    e = math.exp(f.base)
    return _compose(f, [e] * (m + 1))


def log(f):
    if not isinstance(f, JetScalar):
        if f <= 0:
            raise DomainViolation("log of a non-positive value")
        return math.log(f)
    b = f.base
    if b <= 0.0:
        raise DomainViolation("log of a jet with non-positive base value")
    m = f.caps.series_order
    derivs = [math.log(b)] + [
        (-1) ** (k - 1) * math.factorial(k - 1) / b**k for k in range(1, m + 1)
    ]
    return _compose(f, derivs)


def power(f, r: Number):
    """f**r for a constant exponent.

    Integer exponents reduce to repeated multiplication (valid for any
    base); fractional exponents go through exp(r*log(f)) and therefore
    require a strictly positive base.
    """
    if not isinstance(f, JetScalar):
        if float(r) != int(r) and f <= 0:
            raise DomainViolation("fractional power of a non-positive value")
        return float(f) ** float(r)
    if float(r) == int(r):
        n = int(r)
        if n == 0:
            return const(1.0, f.caps)
        inv = n < 0
        n = abs(n)
        acc = None
        base = f
        while n:
            if n & 1:
                acc = base if acc is None else acc * base
            n >>= 1
            if n:
                base = base * base
        return _recip(acc) if inv else acc
    return exp(log(f) * float(r))


def sqrt(f):
    if not isinstance(f, JetScalar):
        if f <= 0:
            raise DomainViolation("sqrt of a non-positive value")
        return math.sqrt(f)
    return power(f, 0.5)


def sin(f):
    if not isinstance(f, JetScalar):
        return math.sin(f)
    m = f.caps.series_order
    s, c = math.sin(f.base), math.cos(f.base)
    cycle = [s, c, -s, -c]
    return _compose(f, [cycle[k % 4] for k in range(m + 1)])


def cos(f):
    if not isinstance(f, JetScalar):
        return math.cos(f)
    m = f.caps.series_order
    s, c = math.sin(f.base), math.cos(f.base)
    cycle = [c, -s, -c, s]
    return _compose(f, [cycle[k % 4] for k in range(m + 1)])


def base_of(v) -> float:
    """Base value of a jet, or the number itself."""
    return v.base if isinstance(v, JetScalar) else float(v)
