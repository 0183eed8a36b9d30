"""Kernel-projection filter F and kernel-reflection polynomial K.

Both are even polynomials of degree 2l in x built from the Chebyshev
polynomial T_l evaluated at u(x) = (1 + d^2 - 2x^2) / (1 - d^2), d being the
filter width. T_l(u(0)) overflows float64 long before the orders used in
practice (l ~ 10^4), so everything here works with hyperbolic angles:

    u(x) = 1 - 2 s,  s = (x^2 - d^2) / (1 - d^2)
    s >= 0:  T_l(u) = cos(2 l asin(sqrt(s)))
    s <  0:  T_l(u) = cosh(2 l asinh(sqrt(-s)))

and ratios of cosh values are taken as exp(a - b) (1 + e^-2a) / (1 + e^-2b).
"""

from dataclasses import dataclass, field
import math

import numpy as np

from qlspb.errors import DomainError

KINDS = ("KP", "KR")


def order_for(delta, eta):
    """Chebyshev order l = ceil(ln(2/eta) / (2 delta)), at least 1."""
    if not 0 < delta < 1:
        raise DomainError(f"filter width {delta} outside (0, 1)")
    if not 0 < eta <= 1:
        raise DomainError(f"eta {eta} outside (0, 1]")
    v = math.log(2.0 / eta) / (2.0 * delta)
    # absorb rounding in ln() so exact integers are not pushed up a step
    return max(1, math.ceil(v - 1e-9 * max(1.0, v)))


@dataclass(frozen=True)
class FilterSpec:
    kind: str
    delta: float
    eta: float
    order: int = field(default=0)
    overridden: bool = field(default=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"filter kind must be one of {KINDS}, got {self.kind!r}")
        lstar = order_for(self.delta, self.eta)
        if self.order == 0:
            object.__setattr__(self, "order", lstar)
        elif self.order < 1:
            raise DomainError("order must be >= 1")
        else:
            object.__setattr__(self, "overridden", self.order != lstar)

    @property
    def degree(self):
        return 2 * self.order

    @property
    def edge_value(self):
        """F(delta) = 1 / T_l(u(0)), never larger than eta for a formula order."""
        return inv_edge_chebyshev(self.delta, self.order)

    def F(self, x):
        return eval_f(self.delta, self.order, x)

    def K(self, x):
        return eval_k(self.delta, self.order, x)

    def __call__(self, x):
        return self.F(x) if self.kind == "KP" else self.K(x)


def chebyshev_t(l, y):
    """T_l(y) for real y. Raises OverflowError where log_chebyshev_t is needed."""
    if l < 0:
        raise DomainError("Chebyshev order must be >= 0")
    y = float(y)
    if abs(y) <= 1.0:
        return math.cos(l * math.acos(y))
    a = l * math.acosh(abs(y))
    if a > 700:
        raise OverflowError(f"T_{l}({y}) overflows; use log_chebyshev_t")
    sign = -1.0 if (y < 0 and l % 2) else 1.0
    return sign * math.cosh(a)


def log_chebyshev_t(l, y):
    """(sign, log|T_l(y)|); -inf magnitude when T_l(y) is exactly zero."""
    if l < 0:
        raise DomainError("Chebyshev order must be >= 0")
    y = float(y)
    if abs(y) <= 1.0:
        v = math.cos(l * math.acos(y))
        if v == 0.0:
            return 0.0, -math.inf
        return math.copysign(1.0, v), math.log(abs(v))
    a = l * math.acosh(abs(y))
    sign = -1.0 if (y < 0 and l % 2) else 1.0
    return sign, a + math.log1p(math.exp(-2.0 * a)) - math.log(2.0)


def _edge_angle(delta, l):
    # l * acosh(u(0)) = 2 l asinh(d / sqrt(1 - d^2))
    return 2.0 * l * math.asinh(delta / math.sqrt(1.0 - delta * delta))


def inv_edge_chebyshev(delta, l):
    """1 / T_l((1 + d^2) / (1 - d^2)) without forming T_l."""
    b = _edge_angle(delta, l)
    e = math.exp(-b)
    return 2.0 * e / (1.0 + e * e)


def eval_f(delta, l, x):
    """Filter F_{delta,l}(x); accepts scalars or arrays, x in [-1, 1]."""
    xa = np.abs(np.asarray(x, dtype=np.float64))
    if np.any(xa > 1.0 + 1e-12):
        raise DomainError("filter argument outside [-1, 1]")
    d2 = delta * delta
    s = (xa * xa - d2) / (1.0 - d2)
    b = _edge_angle(delta, l)
    eb = math.exp(-2.0 * b)
    out = np.empty_like(xa)
    band = s >= 0
    theta = 2.0 * np.arcsin(np.sqrt(np.clip(s[band], 0.0, 1.0)))
    out[band] = np.cos(l * theta) * (2.0 * math.exp(-b) / (1.0 + eb))
    inner = ~band
    a = 2.0 * l * np.arcsinh(np.sqrt(-s[inner]))
    out[inner] = np.exp(a - b) * (1.0 + np.exp(-2.0 * a)) / (1.0 + eb)
    out[xa == 0] = 1.0  # the two asinh paths can differ by an ulp here
    return out if out.ndim else float(out)


def eval_k(delta, l, x):
    """Reflection polynomial K = (2F(x) - 1 + F(d)) / (1 + F(d))."""
    fd = inv_edge_chebyshev(delta, l)
    f = eval_f(delta, l, x)
    return (2.0 * f - 1.0 + fd) / (1.0 + fd)


def kr_envelope(eta):
    """Upper limit of K + 1 on [delta, 1] for a formula order: 4 eta / (1 + eta)."""
    return 4.0 * eta / (1.0 + eta)


def delta_prime(eta, delta1, delta2, edge=None):
    """KR corrections (d1', d2') from the KP corrections (d1, d2).

    ``edge`` is F(delta); the default takes it equal to eta, which yields the
    looser textbook relations. Pass ``spec.edge_value`` for the exact ones.
    """
    e = eta if edge is None else edge
    return 2.0 * (e + delta1) / (1.0 + e), 2.0 * delta2 / (1.0 + e)
