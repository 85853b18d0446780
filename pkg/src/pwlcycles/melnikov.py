"""First- and second-order Melnikov functions for the two-zone family.

Two independent routes to the same object:

* a quadrature engine that integrates the polar standard form of the slow
  radial equation segment by segment (switching angles included), and
* a closed-form evaluator P(u)/Q(u) whose numerator is a linear combination
  of fixed even/odd power families.

The first-order function vanishes identically; the second-order one is, for
this family, exactly linear in the perturbation parameters
(alpha, beta, gamma, c_1..c_m).  The quadrature engine therefore integrates
the linear-in-parameters part of the second-order integrand: the bilinear
self-interaction of the first-order term is dropped at integrand level, which
is what makes the closed form an exact oracle rather than an asymptotic one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from numpy.polynomial.chebyshev import Chebyshev
from scipy.integrate import quad
from scipy.optimize import brentq

from .poly import MonomialSum


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested error estimate."""


# ---------------------------------------------------------------------------
# Geometry of the switching curve in polar coordinates
# ---------------------------------------------------------------------------


def radius_from_u(u: float, k: int) -> float:
    """Radius of the circle meeting the switching curve at abscissa u."""
    return u * math.sqrt(1.0 + u ** (4 * k))


def u_from_radius(r: float, k: int) -> float:
    """Inverse of radius_from_u on u > 0."""
    if r <= 0:
        raise ValueError("radius must be positive")
    return brentq(lambda u: u * math.sqrt(1.0 + u ** (4 * k)) - r, 0.0, r,
                  xtol=1e-16, rtol=8.9e-16)


def crossing_angle(u: float, k: int) -> float:
    """First-quadrant angle where the switching curve meets the circle of
    radius radius_from_u(u); the second intersection sits at this angle + pi."""
    if u <= 0:
        raise ValueError("u must be positive")
    return math.atan(u ** (2 * k))


def crossing_angle_dr(u: float, k: int) -> float:
    """Derivative of the crossing angle with respect to the radius,
    evaluated at the point parameterized by u."""
    if u <= 0:
        raise ValueError("u must be positive")
    u4k = u ** (4 * k)
    return 2.0 * k * u ** (2 * k - 1) / ((1.0 + (2 * k + 1) * u4k) * math.sqrt(1.0 + u4k))


# ---------------------------------------------------------------------------
# Polar standard form
# ---------------------------------------------------------------------------


def _eval_terms(terms, x):
    acc = 0.0 if np.isscalar(x) else np.zeros_like(x)
    for e, c in terms:
        acc = acc + c * x**e
    return acc


@dataclass(frozen=True)
class PolarField:
    """Evaluators of the slow radial equation dr/dtheta in the two angular
    zones, split into the parameter-free part and the part linear in
    (alpha, beta, gamma, c).

    The plus zone is the angular arc where the upper vector field acts; its
    first-order term carries r*(beta*sin - cos)*sin, the minus zone carries
    -beta*r*cos**2.  The second-order minus-zone term is identically zero.
    """

    k: int
    h: MonomialSum
    alpha: float
    beta: float
    gamma: float
    _h: tuple = field(init=False, repr=False)
    _hp: tuple = field(init=False, repr=False)
    _hpp: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        hp = self.h.derivative()
        object.__setattr__(self, "_h", tuple(self.h.float_terms()))
        object.__setattr__(self, "_hp", tuple(hp.float_terms()))
        object.__setattr__(self, "_hpp", tuple(hp.derivative().float_terms()))

    # parameter-free first-order parts
    def f1_free_plus(self, theta, r):
        return -r * np.cos(theta) * np.sin(theta)

    def f1_free_minus(self, theta, r):
        return np.zeros_like(np.asarray(theta, dtype=float)) if not np.isscalar(theta) else 0.0

    def dr_f1_free_plus(self, theta, r):
        return -np.cos(theta) * np.sin(theta)

    def dr_f1_free_minus(self, theta, r):
        return self.f1_free_minus(theta, r)

    # parameter-linear first-order parts
    def _curve_core(self, theta, r):
        c, s = np.cos(theta), np.sin(theta)
        x = r * c
        return r * _eval_terms(self._hp, x) * s * s - _eval_terms(self._h, x) * c

    def _dr_curve_core(self, theta, r):
        c, s = np.cos(theta), np.sin(theta)
        x = r * c
        return (_eval_terms(self._hp, x) * s * s
                + r * c * s * s * _eval_terms(self._hpp, x)
                - c * c * _eval_terms(self._hp, x))

    def f1_lin_plus(self, theta, r):
        s = np.sin(theta)
        return self._curve_core(theta, r) + self.beta * r * s * s

    def f1_lin_minus(self, theta, r):
        c = np.cos(theta)
        return self._curve_core(theta, r) - self.beta * r * c * c

    def dr_f1_lin_plus(self, theta, r):
        s = np.sin(theta)
        return self._dr_curve_core(theta, r) + self.beta * s * s

    def dr_f1_lin_minus(self, theta, r):
        c = np.cos(theta)
        return self._dr_curve_core(theta, r) - self.beta * c * c

    # full first-order fields
    def f1_plus(self, theta, r):
        return self.f1_free_plus(theta, r) + self.f1_lin_plus(theta, r)

    def f1_minus(self, theta, r):
        return self.f1_lin_minus(theta, r)

    def dr_f1_plus(self, theta, r):
        return self.dr_f1_free_plus(theta, r) + self.dr_f1_lin_plus(theta, r)

    def dr_f1_minus(self, theta, r):
        return self.dr_f1_lin_minus(theta, r)

    # second-order fields
    def f2_plus(self, theta, r):
        c, s = np.cos(theta), np.sin(theta)
        x = r * c
        return (2.0 * r * c * c * s * s * _eval_terms(self._hp, x)
                - 0.5 * (np.cos(theta) + np.cos(3.0 * theta)) * _eval_terms(self._h, x)
                + r * c * s**3
                - self.alpha * c
                + self.beta * r * np.cos(2.0 * theta) * s * s
                - self.gamma * r * s * s)

    def f2_minus(self, theta, r):
        return self.f1_free_minus(theta, r)


def polar_field(k: int, h: MonomialSum, alpha: float, beta: float,
                gamma: float) -> PolarField:
    return PolarField(k=k, h=h, alpha=alpha, beta=beta, gamma=gamma)


# ---------------------------------------------------------------------------
# Quadrature engine
# ---------------------------------------------------------------------------

#: default absolute tolerance per quadrature segment
SEGMENT_TOL = 1e-12
#: total error-estimate budget before giving up
ESTIMATE_BUDGET = 1e-11


def _segments(field_: PolarField, r: float):
    u = u_from_radius(r, field_.k)
    th1 = crossing_angle(u, field_.k)
    th2 = th1 + math.pi
    return u, th1, th2, (
        (0.0, th1, "minus"),
        (th1, th2, "plus"),
        (th2, 2.0 * math.pi, "minus"),
    )


def melnikov1_quadrature(r: float, field_: PolarField, *,
                         tol: float = SEGMENT_TOL) -> float:
    """First-order Melnikov function by adaptive quadrature of the full
    first-order term over the three angular segments."""
    if r <= 0:
        raise ValueError("r must be positive")
    _, _, _, segs = _segments(field_, r)
    total, est = 0.0, 0.0
    for a, b, zone in segs:
        f = field_.f1_minus if zone == "minus" else field_.f1_plus
        val, err = quad(lambda t: f(t, r), a, b, epsabs=tol, epsrel=tol, limit=200)
        total += val
        est += err
    if est > ESTIMATE_BUDGET:
        raise QuadratureError(f"first-order quadrature error estimate {est:.2e} "
                              f"exceeds {ESTIMATE_BUDGET:.0e}")
    return total


def _chebyshev_antiderivatives(field_: PolarField, r: float, segs, degree: int):
    """Per-segment Chebyshev models of the parameter-linear first-order term,
    integrated so that evaluation at theta gives the running integral from 0."""
    models = []
    offset = 0.0
    for a, b, zone in segs:
        f = field_.f1_lin_minus if zone == "minus" else field_.f1_lin_plus
        fit = Chebyshev.interpolate(lambda t: f(t, r), degree, domain=[a, b])
        anti = fit.integ(lbnd=a)
        models.append((a, b, anti, offset))
        offset += float(anti(b))
    return models, offset


def _running_integral(models, theta: float) -> float:
    for a, b, anti, offset in models:
        if theta <= b:
            return offset + float(anti(max(theta, a)))
    a, b, anti, offset = models[-1]
    return offset + float(anti(b))


def _free_running_integral(th1: float, th2: float, r: float, theta: float) -> float:
    # running integral of the parameter-free first-order term: zero up to the
    # first switching angle, then the arc of -r*cos*sin
    if theta <= th1:
        return 0.0
    t = min(theta, th2)
    return -0.5 * r * (math.sin(t) ** 2 - math.sin(th1) ** 2)


def melnikov2_quadrature(r: float, field_: PolarField, *,
                         tol: float = SEGMENT_TOL,
                         inner_degree: int | None = None) -> float:
    """Second-order Melnikov function: three double-integral segments plus the
    two switching-jump terms.

    The inner running integral of the parameter-linear first-order term is
    pre-tabulated per segment with a Chebyshev model (the integrands are
    entire, so the models converge geometrically); the outer integrals use
    adaptive quadrature.  Products of two parameter-linear factors are
    excluded from the integrand, keeping the result exactly linear in
    (alpha, beta, gamma, c).
    """
    if r <= 0:
        raise ValueError("r must be positive")
    u, th1, th2, segs = _segments(field_, r)
    if inner_degree is None:
        inner_degree = 96 + 2 * max(0, field_.h.degree())
    models, _ = _chebyshev_antiderivatives(field_, r, segs, inner_degree)

    total, est = 0.0, 0.0
    for a, b, zone in segs:
        if zone == "minus":
            dr_free, dr_lin, f2 = (field_.dr_f1_free_minus,
                                   field_.dr_f1_lin_minus, field_.f2_minus)
        else:
            dr_free, dr_lin, f2 = (field_.dr_f1_free_plus,
                                   field_.dr_f1_lin_plus, field_.f2_plus)

        def integrand(t):
            ia = _free_running_integral(th1, th2, r, t)
            ib = _running_integral(models, t)
            return dr_free(t, r) * (ia + ib) + dr_lin(t, r) * ia + f2(t, r)

        val, err = quad(integrand, a, b, epsabs=tol, epsrel=tol, limit=200)
        total += val
        est += err
    if est > ESTIMATE_BUDGET:
        raise QuadratureError(f"second-order quadrature error estimate {est:.2e} "
                              f"exceeds {ESTIMATE_BUDGET:.0e}")

    # switching jumps; the angle moves with r at the same rate at both points
    dth = crossing_angle_dr(u, field_.k)
    jump = 0.0
    for theta, before, after in (
        (th1, ("f1_free_minus", "f1_lin_minus"), ("f1_free_plus", "f1_lin_plus")),
        (th2, ("f1_free_plus", "f1_lin_plus"), ("f1_free_minus", "f1_lin_minus")),
    ):
        dfree = (getattr(field_, before[0])(theta, r)
                 - getattr(field_, after[0])(theta, r))
        dlin = (getattr(field_, before[1])(theta, r)
                - getattr(field_, after[1])(theta, r))
        ia = _free_running_integral(th1, th2, r, theta)
        ib = _running_integral(models, theta)
        jump += dth * (dfree * (ia + ib) + dlin * ia)
    return total + jump


# ---------------------------------------------------------------------------
# Closed form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MelnikovForm:
    """Closed-form pieces of the second-order Melnikov function.

    The numerator is alpha*b_alpha + pi*(beta*b_beta + gamma*b_gamma)
    + sum c_i * mode_i, all exact polynomials in u; the denominator
    q(u) = 4*(1 + (2k+1)u**(4k)) * sqrt(1 + u**(4k)) is positive for u >= 0.
    b_beta and b_gamma carry the factor pi separately so that downstream sign
    work can stay in the rationals adjoined with a single pi symbol.
    """

    k: int
    p: tuple[int, ...]
    b_alpha: MonomialSum
    b_beta: MonomialSum   # multiplies pi
    b_gamma: MonomialSum  # multiplies pi
    modes: tuple[MonomialSum, ...]

    def q_value(self, u: float) -> float:
        u4k = u ** (4 * self.k)
        return 4.0 * (1.0 + (2 * self.k + 1) * u4k) * math.sqrt(1.0 + u4k)

    def numerator_value(self, u: float, alpha: float, beta: float, gamma: float,
                        c: Sequence[float]) -> float:
        if len(c) != len(self.modes):
            raise ValueError(f"expected {len(self.modes)} mode coefficients, got {len(c)}")
        val = alpha * self.b_alpha.evaluate_float(u)
        val += math.pi * (beta * self.b_beta.evaluate_float(u)
                          + gamma * self.b_gamma.evaluate_float(u))
        for ci, g in zip(c, self.modes):
            val += ci * g.evaluate_float(u)
        return val

    def numerator_exact(self, alpha, beta, gamma, c) -> tuple[MonomialSum, MonomialSum]:
        """Numerator as (rational part, coefficient of pi), exact in the
        binary rationals of the given float parameters."""
        if len(c) != len(self.modes):
            raise ValueError(f"expected {len(self.modes)} mode coefficients, got {len(c)}")
        rational = Fraction(alpha) * self.b_alpha
        for ci, g in zip(c, self.modes):
            rational = rational + Fraction(ci) * g
        pi_part = Fraction(beta) * self.b_beta + Fraction(gamma) * self.b_gamma
        return rational, pi_part


def melnikov_form(k: int, p: Sequence[int]) -> MelnikovForm:
    """Build the closed-form evaluator for curve modes x**(2 p_i)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pl = tuple(int(x) for x in p)
    if any(x < 1 for x in pl) or any(b <= a for a, b in zip(pl, pl[1:])):
        raise ValueError("p must be a strictly increasing list of positive integers")
    b_alpha = MonomialSum([(2 * k, 8), (6 * k, 8 * (2 * k + 1))])
    b_beta = MonomialSum([(1, -1), (4 * k + 1, -2 * (3 * k + 1)), (8 * k + 1, -(2 * k + 1))])
    b_gamma = MonomialSum([(1, -2), (4 * k + 1, -4 * (k + 1)), (8 * k + 1, -2 * (2 * k + 1))])
    modes = tuple(MonomialSum([(2 * (k + pi), 8)]) for pi in pl)
    return MelnikovForm(k=k, p=pl, b_alpha=b_alpha, b_beta=b_beta,
                        b_gamma=b_gamma, modes=modes)


def melnikov2_closed_form(u: float, form: MelnikovForm, alpha: float, beta: float,
                          gamma: float, c: Sequence[float]) -> float:
    """Second-order Melnikov value at the point parameterized by u > 0."""
    if u <= 0:
        raise ValueError("u must be positive")
    return form.numerator_value(u, alpha, beta, gamma, c) / form.q_value(u)


def mode_contribution(u: float, k: int, p: int, *, tol: float = 1e-12) -> float:
    """Closed-form weight of one curve mode in the second-order function.

    Evaluated two ways (trigonometric form at the switching point, and the
    rational u-form); the two must agree to `tol`, and disagreement beyond
    1e-9 is an internal consistency failure.
    """
    if u <= 0:
        raise ValueError("u must be positive")
    if p < 1:
        raise ValueError("p must be >= 1")
    r = radius_from_u(u, k)
    th1 = crossing_angle(u, k)
    dth = crossing_angle_dr(u, k)
    cth, sth = math.cos(th1), math.sin(th1)
    trig = (r ** (2 * p) * 2.0 * cth ** (2 * p + 1) * sth
            * (cth - r * dth * sth))
    u4k = u ** (4 * k)
    uform = 8.0 * u ** (2 * (k + p)) / (4.0 * (1.0 + (2 * k + 1) * u4k)
                                        * math.sqrt(1.0 + u4k))
    if abs(trig - uform) > 1e-9:
        raise ArithmeticError(
            f"mode weight mismatch: trig={trig!r} vs u-form={uform!r}")
    if abs(trig - uform) > tol:
        raise QuadratureError(
            f"mode weight agreement {abs(trig - uform):.2e} worse than {tol:.0e}")
    return uform


def cosine_power_antiderivative_check(p: int, theta: float) -> tuple[float, float]:
    """Quadrature vs evaluated antiderivative of
    cos**(2p-1)(phi) * (cos**2(phi) - 2p sin**2(phi)) from 0 to theta."""
    if p < 1 or p != int(p):
        raise ValueError("p must be a positive integer")
    lhs, _ = quad(lambda t: math.cos(t) ** (2 * p - 1)
                  * (math.cos(t) ** 2 - 2 * p * math.sin(t) ** 2),
                  0.0, theta, epsabs=1e-13, epsrel=1e-13, limit=200)
    rhs = math.cos(theta) ** (2 * p) * math.sin(theta)
    return lhs, rhs


def chebyshev_basis(k: int, p: Sequence[int]) -> list[MonomialSum]:
    """Ordered polynomial family spanning the closed-form numerators:

        [u + (2k+1) u**(8k+1),  u**(2k) + (2k+1) u**(6k),  u**(4k+1),
         u**(2(k+p_1)), ..., u**(2(k+p_m))]
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    pl = list(p)
    if any(x < 1 for x in pl) or any(b <= a for a, b in zip(pl, pl[1:])):
        raise ValueError("p must be a strictly increasing list of positive integers")
    basis = [
        MonomialSum([(1, 1), (8 * k + 1, 2 * k + 1)]),
        MonomialSum([(2 * k, 1), (6 * k, 2 * k + 1)]),
        MonomialSum([(4 * k + 1, 1)]),
    ]
    basis.extend(MonomialSum([(2 * (k + pi), 1)]) for pi in pl)
    return basis
