"""Exact sparse univariate polynomials, Wronskians, and positive-root isolation.

Coefficients are `fractions.Fraction` throughout, so statements about leading
coefficients and sign constancy are certificates rather than floating-point
observations.  Wronskian determinants are computed by fraction-free (Bareiss)
elimination on the derivative matrix; root isolation is an exact sign scan on
a rational grid followed by bisection.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence, Union

Rat = Union[int, Fraction]


class ExactDivisionError(ArithmeticError):
    """A polynomial division that had to be exact left a remainder."""


class MonomialSum:
    """Polynomial in normal form: strictly increasing integer exponents,
    nonzero rational coefficients.  The zero polynomial has no terms."""

    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[tuple[int, Rat]] = ()):
        acc: dict[int, Fraction] = {}
        for e, c in terms:
            ei = int(e)
            if ei != e or ei < 0:
                raise ValueError(f"exponent must be a non-negative integer, got {e!r}")
            c = Fraction(c)
            if c:
                acc[ei] = acc.get(ei, Fraction(0)) + c
        self.terms: tuple[tuple[int, Fraction], ...] = tuple(
            sorted((e, c) for e, c in acc.items() if c)
        )

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero() -> "MonomialSum":
        return MonomialSum()

    @staticmethod
    def one() -> "MonomialSum":
        return MonomialSum([(0, 1)])

    @staticmethod
    def monomial(exponent: int, coefficient: Rat = 1) -> "MonomialSum":
        return MonomialSum([(exponent, coefficient)])

    # -- structure ----------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Largest exponent; -1 for the zero polynomial."""
        return self.terms[-1][0] if self.terms else -1

    def min_exponent(self) -> int:
        """Smallest exponent; -1 for the zero polynomial."""
        return self.terms[0][0] if self.terms else -1

    def trailing_term(self) -> tuple[int, Fraction]:
        """(exponent, coefficient) of the lowest-order term, which dominates
        as the variable tends to 0+."""
        if self.is_zero:
            raise ValueError("zero polynomial has no trailing term")
        return self.terms[0]

    def coefficient(self, exponent: int) -> Fraction:
        for e, c in self.terms:
            if e == exponent:
                return c
        return Fraction(0)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other: "MonomialSum") -> "MonomialSum":
        return MonomialSum(self.terms + other.terms)

    def __neg__(self) -> "MonomialSum":
        return MonomialSum([(e, -c) for e, c in self.terms])

    def __sub__(self, other: "MonomialSum") -> "MonomialSum":
        return self + (-other)

    def __mul__(self, other: Union["MonomialSum", Rat]) -> "MonomialSum":
        if isinstance(other, MonomialSum):
            out: dict[int, Fraction] = {}
            for e1, c1 in self.terms:
                for e2, c2 in other.terms:
                    e = e1 + e2
                    out[e] = out.get(e, Fraction(0)) + c1 * c2
            return MonomialSum(out.items())
        return MonomialSum([(e, c * Fraction(other)) for e, c in self.terms])

    def __rmul__(self, other: Rat) -> "MonomialSum":
        return self.__mul__(other)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MonomialSum) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(self.terms)

    def derivative(self) -> "MonomialSum":
        return MonomialSum([(e - 1, c * e) for e, c in self.terms if e > 0])

    def evaluate(self, x: Rat) -> Fraction:
        """Exact evaluation at a rational point."""
        x = Fraction(x)
        return sum((c * x**e for e, c in self.terms), Fraction(0))

    def evaluate_float(self, x: float) -> float:
        return sum(float(c) * x**e for e, c in self.terms)

    def float_terms(self) -> list[tuple[int, float]]:
        return [(e, float(c)) for e, c in self.terms]

    def shift_down(self, n: int) -> "MonomialSum":
        """Divide by x**n; every exponent must be >= n."""
        if self.terms and self.terms[0][0] < n:
            raise ExactDivisionError(f"cannot shift exponents down by {n}")
        return MonomialSum([(e - n, c) for e, c in self.terms])

    def divexact(self, other: "MonomialSum") -> "MonomialSum":
        """Exact polynomial division; raises ExactDivisionError on remainder."""
        if other.is_zero:
            raise ZeroDivisionError("division by zero polynomial")
        if self.is_zero:
            return MonomialSum.zero()
        rem = dict(self.terms)
        quot: dict[int, Fraction] = {}
        de, dc = other.terms[-1]
        while rem:
            e = max(rem)
            c = rem[e]
            if e < de:
                raise ExactDivisionError("inexact polynomial division")
            qe, qc = e - de, c / dc
            quot[qe] = quot.get(qe, Fraction(0)) + qc
            for oe, oc in other.terms:
                ne = qe + oe
                nc = rem.get(ne, Fraction(0)) - qc * oc
                if nc:
                    rem[ne] = nc
                else:
                    rem.pop(ne, None)
        return MonomialSum(quot.items())

    def __repr__(self) -> str:
        if self.is_zero:
            return "MonomialSum(0)"
        bits = []
        for e, c in self.terms:
            if e == 0:
                bits.append(f"{c}")
            elif e == 1:
                bits.append(f"{c}*x")
            else:
                bits.append(f"{c}*x^{e}")
        return "MonomialSum(" + " + ".join(bits) + ")"


def differentiate(p: MonomialSum) -> MonomialSum:
    """Term-wise derivative in normal form."""
    return p.derivative()


# ---------------------------------------------------------------------------
# Wronskians
# ---------------------------------------------------------------------------


def wronskian(fs: Sequence[MonomialSum]) -> MonomialSum:
    """Exact Wronskian determinant of an ordered family of polynomials.

    Row i of the matrix holds the i-th derivatives; the determinant is
    computed by fraction-free Bareiss elimination with row pivoting, so all
    intermediate divisions are exact.
    """
    n = len(fs)
    if n == 0:
        raise ValueError("wronskian of an empty family")
    rows = [list(fs)]
    for _ in range(n - 1):
        rows.append([p.derivative() for p in rows[-1]])
    return _bareiss_determinant(rows)


def _bareiss_determinant(mat: list[list[MonomialSum]]) -> MonomialSum:
    n = len(mat)
    if n == 1:
        return mat[0][0]
    m = [row[:] for row in mat]
    sign = 1
    prev = MonomialSum.one()
    for p in range(n - 1):
        piv = next((i for i in range(p, n) if not m[i][p].is_zero), None)
        if piv is None:
            return MonomialSum.zero()
        if piv != p:
            m[p], m[piv] = m[piv], m[p]
            sign = -sign
        for i in range(p + 1, n):
            for j in range(p + 1, n):
                num = m[p][p] * m[i][j] - m[i][p] * m[p][j]
                m[i][j] = num.divexact(prev)
            m[i][p] = MonomialSum.zero()
        prev = m[p][p]
    det = m[n - 1][n - 1]
    return det if sign == 1 else -det


def monomial_wronskian_closed_form(
    exponents: Sequence[Rat],
) -> tuple[Fraction, Fraction]:
    """Coefficient and exponent of the Wronskian of pure powers x**a_i.

    Returns (prod_{i<j} (a_j - a_i), sum a_i - l(l-1)/2) for the exponents in
    the order given.  Duplicate exponents are rejected: the product would be
    zero, and every caller in this package requires distinctness.
    """
    a = [Fraction(x) for x in exponents]
    if len(set(a)) != len(a):
        raise ValueError("duplicate exponents")
    coeff = Fraction(1)
    for i in range(len(a)):
        for j in range(i + 1, len(a)):
            coeff *= a[j] - a[i]
    ell = len(a)
    rho = sum(a, Fraction(0)) - Fraction(ell * (ell - 1), 2)
    return coeff, rho


# ---------------------------------------------------------------------------
# Root isolation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RootBracket:
    lo: Fraction
    hi: Fraction
    multiplicity: str  # "simple" | "unknown"


@dataclass(frozen=True)
class RootIsolation:
    interval: tuple[Fraction, Fraction]
    roots: tuple[RootBracket, ...]

    def count_simple(self) -> int:
        return sum(1 for b in self.roots if b.multiplicity == "simple")


def scan_sign_changes(
    sign_at: Callable[[Fraction], int],
    lo: Rat,
    hi: Rat,
    n_cells: int,
    bracket_width: Fraction,
) -> tuple[RootBracket, ...]:
    """Bracket every sign change of `sign_at` on a uniform grid over [lo, hi].

    `sign_at` must return -1, 0, or +1 exactly.  Exact zeros at interior grid
    points become their own brackets (simple when the half-step neighbours
    have opposite signs, "unknown" otherwise); zeros at the interval endpoints
    are ignored.  Sign-change cells are refined by bisection to the requested
    width.
    """
    lo, hi = Fraction(lo), Fraction(hi)
    if not hi > lo:
        raise ValueError("empty interval")
    h = (hi - lo) / n_cells
    grid = [lo + i * h for i in range(n_cells + 1)]
    signs = [sign_at(x) for x in grid]

    brackets: list[RootBracket] = []
    for i in range(1, n_cells):
        if signs[i] == 0:
            # the grid point itself is a root; the bracket is already tight
            a, b = grid[i] - bracket_width / 2, grid[i] + bracket_width / 2
            flag = "simple" if sign_at(a) * sign_at(b) < 0 else "unknown"
            brackets.append(RootBracket(a, b, flag))
    for i in range(n_cells):
        si, sj = signs[i], signs[i + 1]
        if si * sj < 0:
            a, b, sa = grid[i], grid[i + 1], si
            flag = "simple"
            while b - a > bracket_width:
                mid = (a + b) / 2
                sm = sign_at(mid)
                if sm == 0:
                    a, b = mid - bracket_width / 2, mid + bracket_width / 2
                    if sign_at(a) * sign_at(b) >= 0:
                        flag = "unknown"
                    break
                if sm == sa:
                    a = mid
                else:
                    b = mid
            brackets.append(RootBracket(a, b, flag))
    brackets.sort(key=lambda r: r.lo)
    for u, v in zip(brackets, brackets[1:]):
        if v.lo < u.hi:
            raise ValueError("overlapping root brackets; refine the grid")
    return tuple(brackets)


def polynomial_sign_function(p: MonomialSum) -> Callable[[Fraction], int]:
    """Exact sign of p at positive rational points.

    The common power x**min_exponent is factored out first; it never changes
    the sign for x > 0 and keeps the remaining exponents small.
    """
    reduced = p.shift_down(p.min_exponent()) if not p.is_zero else p

    def sign_at(x: Fraction) -> int:
        v = reduced.evaluate(x)
        return (v > 0) - (v < 0)

    return sign_at


def isolate_positive_roots(
    p: MonomialSum,
    interval: tuple[Rat, Rat],
    *,
    grid_per_unit: int = 2048,
    bracket_width: Fraction = Fraction(1, 10**12),
) -> RootIsolation:
    """Isolate roots of p on an open interval inside (0, +inf).

    Every sign change on the grid is bracketed and bisected down to
    `bracket_width`; a bracket is flagged "simple" exactly when p has opposite
    signs at its endpoints.
    """
    if p.is_zero:
        raise ValueError("zero polynomial")
    lo, hi = Fraction(interval[0]), Fraction(interval[1])
    if lo < 0 or hi <= lo:
        raise ValueError("interval must lie within (0, +inf)")
    n_cells = max(2, int(grid_per_unit * (hi - lo)) + 1)
    brackets = scan_sign_changes(
        polynomial_sign_function(p), lo, hi, n_cells, bracket_width
    )
    return RootIsolation(interval=(lo, hi), roots=brackets)
