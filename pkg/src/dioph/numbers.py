"""Exact real inputs and certified rational enclosures.

Two layers live here:

* :class:`QuadSurd`, an exact element ``a + b*sqrt(c)`` of a real quadratic
  field, used wherever a construction must stay exact at an irrational
  parameter (e.g. the golden-ratio boundary).
* :class:`RealExpr`, the user-facing description of an input real together
  with :func:`enclose`, which returns rational intervals of any requested
  width.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import Union

from .errors import DomainError, ExprSyntaxError, PrecisionBudgetExceeded

MAX_RETRIES = 16
BASE_BITS = 32
BASE_TERMS = 8


def _squarefree_split(n: int) -> tuple[int, int]:
    """Return (f, c) with n == f*f*c and c squarefree (trial division)."""
    if n < 0:
        raise DomainError(f"negative radicand {n}")
    if n == 0:
        return 0, 1
    f, c = 1, n
    p = 2
    while p * p <= c:
        while c % (p * p) == 0:
            c //= p * p
            f *= p
        p += 1 if p == 2 else 2
    return f, c


def _sign(x) -> int:
    return (x > 0) - (x < 0)


@total_ordering
class QuadSurd:
    """Exact number ``a + b*sqrt(c)`` with rational a, b and squarefree c >= 2.

    Arithmetic mixes freely with ``int`` and ``Fraction``. Operands with two
    different radicands are only allowed when one of them is rational.
    """

    __slots__ = ("a", "b", "c")

    def __init__(self, a, b=0, c: int = 5):
        a, b = Fraction(a), Fraction(b)
        if c < 2:
            raise DomainError(f"radicand must be >= 2, got {c}")
        f, cc = _squarefree_split(c)
        if cc == 1:
            # perfect square: the value is rational, the radicand is a placeholder
            a, b, cc = a + b * f, Fraction(0), 2
        else:
            b = b * f
        self.a, self.b, self.c = a, b, cc

    @classmethod
    def sqrt(cls, n: int) -> Union["QuadSurd", Fraction]:
        f, c = _squarefree_split(n)
        if c == 1:
            return Fraction(f)
        return cls(0, f, c)

    def is_rational(self) -> bool:
        return self.b == 0

    def _coerce(self, other) -> "QuadSurd":
        if isinstance(other, QuadSurd):
            if other.b != 0 and self.b != 0 and other.c != self.c:
                raise DomainError(f"mixed radicands sqrt({self.c}) and sqrt({other.c})")
            return other
        if isinstance(other, (int, Fraction)):
            return QuadSurd(other, 0, self.c)
        return NotImplemented

    def _radicand(self, other: "QuadSurd") -> int:
        return self.c if self.b != 0 else other.c

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QuadSurd(self.a + o.a, self.b + o.b, self._radicand(o))

    __radd__ = __add__

    def __neg__(self):
        return QuadSurd(-self.a, -self.b, self.c)

    def __pos__(self):
        return self

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QuadSurd(self.a - o.a, self.b - o.b, self._radicand(o))

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        c = self._radicand(o)
        return QuadSurd(self.a * o.a + self.b * o.b * c, self.a * o.b + self.b * o.a, c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        c = self._radicand(o)
        den = o.a * o.a - o.b * o.b * c
        if den == 0:
            raise ZeroDivisionError("division by zero surd")
        num = self * QuadSurd(o.a, -o.b, c)
        return QuadSurd(num.a / den, num.b / den, c)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o / self

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return 1 / (self ** (-n))
        out = QuadSurd(1, 0, self.c)
        for _ in range(n):
            out = out * self
        return out

    def sign(self) -> int:
        sa, sb = _sign(self.a), _sign(self.b)
        if sb == 0:
            return sa
        if sa == 0 or sa == sb:
            return sb
        return sa if self.a * self.a > self.b * self.b * self.c else sb

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __eq__(self, other):
        if isinstance(other, float):
            return False if self.b != 0 else float(self.a) == other
        o = self._coerce(other) if not isinstance(other, QuadSurd) else other
        if o is NotImplemented:
            return NotImplemented
        if self.b == 0 and o.b == 0:
            return self.a == o.a
        return self.a == o.a and self.b == o.b and self.c == o.c

    def __lt__(self, other):
        if isinstance(other, float):
            if math.isinf(other):
                return other > 0
            return float(self) < other
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return (self - o).sign() < 0

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b, self.c))

    def __float__(self):
        if self.b == 0:
            return float(self.a)
        enc = _enclose_surd(self, Fraction(1, 2**80))
        return float((enc[0] + enc[1]) / 2)

    def __repr__(self):
        return f"QuadSurd({self.a!s}, {self.b!s}, {self.c})"

    def __str__(self):
        return format_exact(self)


Exact = Union[Fraction, QuadSurd]


def as_exact(x) -> Exact:
    """Coerce ints/Fractions/QuadSurds; a rational QuadSurd collapses to Fraction."""
    if isinstance(x, QuadSurd):
        return x.a if x.b == 0 else x
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    raise TypeError(f"not an exact number: {x!r}")


def format_exact(x) -> str:
    """Render exactly: ``p/q`` for rationals, ``a+b*sqrt(c)`` for surds."""
    x = as_exact(x)
    if isinstance(x, Fraction):
        return str(x)
    b = str(x.b) if x.b >= 0 else f"({x.b})"
    return f"{x.a}+{b}*sqrt({x.c})"


_EXACT_RE = re.compile(
    r"^\s*(?P<a>-?\d+(?:/\d+)?)\s*(?:\+\s*\(?(?P<b>-?\d+(?:/\d+)?)\)?\s*\*\s*sqrt\((?P<c>\d+)\))?\s*$"
)


def parse_exact(text: str) -> Exact:
    """Inverse of :func:`format_exact`."""
    m = _EXACT_RE.match(text)
    if not m:
        raise ExprSyntaxError(f"not an exact number: {text!r}")
    a = Fraction(m["a"])
    if m["b"] is None:
        return a
    return as_exact(QuadSurd(a, Fraction(m["b"]), int(m["c"])))


def to_float(x) -> float:
    if isinstance(x, float):
        return x
    return float(x)


# ---------------------------------------------------------------------------
# enclosures


@dataclass(frozen=True)
class RationalEnclosure:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty enclosure [{self.lo}, {self.hi}]")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def __contains__(self, value) -> bool:
        return self.lo <= value <= self.hi


def _isqrt_enclosure(n: int, bits: int) -> tuple[Fraction, Fraction]:
    scale = 1 << bits
    r = math.isqrt(n << (2 * bits))
    lo = Fraction(r, scale)
    hi = lo if r * r == n << (2 * bits) else Fraction(r + 1, scale)
    return lo, hi


def _icbrt(n: int) -> int:
    if n < 2:
        return n
    x = 1 << ((n.bit_length() + 2) // 3)
    while True:
        y = (2 * x + n // (x * x)) // 3
        if y >= x:
            break
        x = y
    while x * x * x > n:
        x -= 1
    while (x + 1) ** 3 <= n:
        x += 1
    return x


def _icbrt_enclosure(n: int, bits: int) -> tuple[Fraction, Fraction]:
    scale = 1 << bits
    m = n << (3 * bits)
    r = _icbrt(m)
    lo = Fraction(r, scale)
    hi = lo if r**3 == m else Fraction(r + 1, scale)
    return lo, hi


def _scale_interval(lo: Fraction, hi: Fraction, k: Fraction) -> tuple[Fraction, Fraction]:
    a, b = lo * k, hi * k
    return (a, b) if a <= b else (b, a)


def _enclose_surd(x: QuadSurd, eps: Fraction) -> tuple[Fraction, Fraction]:
    if x.b == 0:
        return x.a, x.a
    need = eps / (2 * abs(x.b))
    bits = max(BASE_BITS, -math.floor(math.log2(need)) + 2)
    slo, shi = _isqrt_enclosure(x.c, bits)
    lo, hi = _scale_interval(slo, shi, x.b)
    return x.a + lo, x.a + hi


def cf_convergents(terms):
    """Yield successive convergents p_k/q_k of [a0; a1, a2, ...]."""
    p0, q0, p1, q1 = 1, 0, None, None
    pm2, qm2, pm1, qm1 = 0, 1, 1, 0
    for a in terms:
        p, q = a * pm1 + pm2, a * qm1 + qm2
        yield Fraction(p, q)
        pm2, qm2, pm1, qm1 = pm1, qm1, p, q


def _cf_terms(preperiod, period, count):
    out = list(preperiod[:count])
    i = 0
    while len(out) < count:
        out.append(period[i % len(period)])
        i += 1
    return out


# ---------------------------------------------------------------------------
# RealExpr


KINDS = ("rational", "sqrt", "cbrt", "quad_surd", "decimal", "periodic_cf")


@dataclass(frozen=True)
class RealExpr:
    """Exact description of one real number.

    ``args`` depends on ``kind``:
    rational ``(p, q)``; sqrt/cbrt ``(n,)``; quad_surd ``(a, b, c, d)`` for
    (a + b*sqrt(c))/d; decimal ``(digits, exponent)``; periodic_cf
    ``(preperiod, period)`` as tuples of ints.
    """

    kind: str
    args: tuple

    def __post_init__(self):
        k, a = self.kind, self.args
        if k not in KINDS:
            raise DomainError(f"unknown kind {k!r}")
        if k == "rational":
            p, q = a
            if q == 0:
                raise DomainError("zero denominator")
            g = math.gcd(p, q) * (1 if q > 0 else -1)
            object.__setattr__(self, "args", (p // g, q // g))
        elif k in ("sqrt", "cbrt"):
            if a[0] < 0:
                raise DomainError(f"{k} of negative number")
        elif k == "quad_surd":
            object.__setattr__(self, "args", _canonical_surd(*a))
        elif k == "decimal":
            digits, exp = a
            if not re.fullmatch(r"-?\d+", digits):
                raise DomainError(f"bad digit string {digits!r}")
        elif k == "periodic_cf":
            pre, per = tuple(a[0]), tuple(a[1])
            if not per:
                raise DomainError("empty period")
            if any(t < 1 for t in per) or any(t < 1 for t in pre[1:]):
                raise DomainError("partial quotients must be >= 1")
            if pre and pre[0] < 0:
                raise DomainError("leading partial quotient must be >= 0")
            object.__setattr__(self, "args", (pre, per))

    # constructors -----------------------------------------------------
    @classmethod
    def rational(cls, p: int, q: int = 1) -> "RealExpr":
        return cls("rational", (p, q))

    @classmethod
    def sqrt(cls, n: int) -> "RealExpr":
        return cls("sqrt", (n,))

    @classmethod
    def cbrt(cls, n: int) -> "RealExpr":
        return cls("cbrt", (n,))

    @classmethod
    def quad_surd(cls, a: int, b: int, c: int, d: int) -> "RealExpr":
        return cls("quad_surd", (a, b, c, d))

    @classmethod
    def periodic_cf(cls, preperiod, period) -> "RealExpr":
        return cls("periodic_cf", (tuple(preperiod), tuple(period)))

    # views ------------------------------------------------------------
    def exact(self) -> Exact | None:
        """Exact value as Fraction/QuadSurd, or None for irrational cube roots."""
        k, a = self.kind, self.args
        if k == "rational":
            return Fraction(a[0], a[1])
        if k == "decimal":
            digits, exp = a
            return Fraction(int(digits)) * Fraction(10) ** exp
        if k == "sqrt":
            return as_exact(QuadSurd.sqrt(a[0]))
        if k == "cbrt":
            r = _icbrt(a[0])
            return Fraction(r) if r**3 == a[0] else None
        if k == "quad_surd":
            aa, bb, cc, dd = a
            if bb == 0:
                return Fraction(aa, dd)
            return as_exact(QuadSurd(Fraction(aa, dd), Fraction(bb, dd), cc))
        return _periodic_cf_value(*a)

    def is_rational(self) -> bool:
        return isinstance(self.exact(), Fraction)

    def to_text(self) -> str:
        k, a = self.kind, self.args
        if k == "rational":
            return f"{a[0]}/{a[1]}"
        if k in ("sqrt", "cbrt"):
            return f"{k}({a[0]})"
        if k == "quad_surd":
            return "surd:" + ",".join(str(t) for t in a)
        if k == "decimal":
            return f"dec:{a[0]}e{a[1]}"
        pre, per = a
        head = f"{pre[0]};" + ",".join(str(t) for t in pre[1:]) if pre else ";"
        return f"cf:[{head}|" + ",".join(str(t) for t in per) + "]"

    def __float__(self):
        enc = enclose(self, Fraction(1, 2**60))
        return float((enc.lo + enc.hi) / 2)

    def __str__(self):
        return self.to_text()


def _canonical_surd(a: int, b: int, c: int, d: int) -> tuple:
    if d == 0:
        raise DomainError("zero denominator")
    if c < 0:
        raise DomainError("negative radicand")
    if b != 0:
        f, cc = _squarefree_split(c)
        if cc == 1:
            raise DomainError(f"radicand {c} is a perfect square")
        b, c = b * f, cc
    else:
        c = 0
    if d < 0:
        a, b, d = -a, -b, -d
    g = math.gcd(math.gcd(a, b), d)
    return (a // g, b // g, c, d // g)


def _periodic_cf_value(preperiod, period) -> Exact:
    # purely periodic tail y = [p1; ..., pm, y] solves Q*y^2 + (Q' - P)*y - P' = 0
    pm2, qm2, pm1, qm1 = 0, 1, 1, 0
    for t in period:
        pm2, qm2, pm1, qm1 = pm1, qm1, t * pm1 + pm2, t * qm1 + qm2
    P, Q, P_, Q_ = pm1, qm1, pm2, qm2
    A, B, C = Q, Q_ - P, -P_
    disc = B * B - 4 * A * C
    y = (QuadSurd.sqrt(disc) - B) / (2 * A)
    pm2, qm2, pm1, qm1 = 0, 1, 1, 0
    for t in preperiod:
        pm2, qm2, pm1, qm1 = pm1, qm1, t * pm1 + pm2, t * qm1 + qm2
    return as_exact((pm1 * y + pm2) / (qm1 * y + qm2))


_RAT_RE = re.compile(r"^(-?\d+)/(\d+)$")
_FUN_RE = re.compile(r"^(sqrt|cbrt)\((-?\d+)\)$")
_DEC_RE = re.compile(r"^dec:(-?)(\d+)(?:\.(\d+))?(?:e([+-]?\d+))?$")
_CF_RE = re.compile(r"^cf:\[(\d+);([\d,\s]*)\|([\d,\s]+)\]$")
_SURD_RE = re.compile(r"^surd:(-?\d+),(-?\d+),(\d+),(-?\d+)$")


def _int_list(text: str) -> list[int]:
    parts = [p.strip() for p in text.split(",")]
    if parts == [""]:
        return []
    if any(not p.isdigit() for p in parts):
        raise ExprSyntaxError(f"bad partial quotient list {text!r}")
    return [int(p) for p in parts]


def parse_real(text: str) -> RealExpr:
    """Parse ``sqrt(n)``, ``cbrt(n)``, ``p/q``, ``dec:...``, ``cf:[a0;..|..]``
    or ``surd:a,b,c,d`` into a :class:`RealExpr`."""
    s = text.strip()
    if m := _RAT_RE.match(s):
        return RealExpr.rational(int(m[1]), int(m[2]))
    if m := _FUN_RE.match(s):
        return RealExpr(m[1], (int(m[2]),))
    if m := _DEC_RE.match(s):
        sign, whole, frac, exp = m[1], m[2], m[3] or "", int(m[4] or 0)
        return RealExpr("decimal", (sign + whole + frac, exp - len(frac)))
    if m := _CF_RE.match(s):
        pre = [int(m[1])] + _int_list(m[2])
        return RealExpr.periodic_cf(pre, _int_list(m[3]))
    if m := _SURD_RE.match(s):
        return RealExpr.quad_surd(*(int(g) for g in m.groups()))
    raise ExprSyntaxError(f"unrecognised real expression {text!r}")


def _enclose_at(x: RealExpr, attempt: int) -> tuple[Fraction, Fraction]:
    bits = BASE_BITS << attempt
    k, a = x.kind, x.args
    if k == "sqrt":
        return _isqrt_enclosure(a[0], bits)
    if k == "cbrt":
        return _icbrt_enclosure(a[0], bits)
    if k == "quad_surd":
        aa, bb, cc, dd = a
        if bb == 0:
            v = Fraction(aa, dd)
            return v, v
        slo, shi = _isqrt_enclosure(cc, bits)
        lo, hi = _scale_interval(slo, shi, Fraction(bb, dd))
        return Fraction(aa, dd) + lo, Fraction(aa, dd) + hi
    # periodic continued fraction: the last two convergents bracket the value
    terms = _cf_terms(a[0], a[1], BASE_TERMS << attempt)
    convs = list(cf_convergents(terms))
    lo, hi = convs[-2], convs[-1]
    return (lo, hi) if lo <= hi else (hi, lo)


def enclose(x: RealExpr, eps) -> RationalEnclosure:
    """Rational interval of width <= eps containing the value of ``x``.

    Working precision doubles per retry; after MAX_RETRIES the call fails
    with :class:`PrecisionBudgetExceeded`.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise DomainError("eps must be positive")
    if x.kind in ("rational", "decimal"):
        v = x.exact()
        return RationalEnclosure(v, v)
    for attempt in range(MAX_RETRIES + 1):
        lo, hi = _enclose_at(x, attempt)
        if hi - lo <= eps:
            return RationalEnclosure(lo, hi)
    raise PrecisionBudgetExceeded(f"could not enclose {x} to width {eps}")


def nearest_int(v: RationalEnclosure) -> tuple[int, bool]:
    """Nearest integer to an enclosed value and whether it is certain."""
    mid = (v.lo + v.hi) / 2
    n = math.floor(mid + Fraction(1, 2))
    half = Fraction(1, 2)
    certain = v.width < half and n - half < v.lo and v.hi < n + half
    return n, certain
