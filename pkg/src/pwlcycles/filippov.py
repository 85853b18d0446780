"""Event-driven simulation of the two-zone piecewise-linear field.

The flow is integrated zone by zone with an embedded Runge-Kutta pair;
boundary hits are located by root-finding on the curve residual along the
dense output, classified through the one-sided Lie derivatives, and handled
as crossings, sliding segments (convex-combination sliding field), or
grazes.  A Poincare return map on the positive y-axis turns cycle detection
into one-dimensional root isolation of the return displacement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import curve as curve_mod
from .curve import SystemParams
from .melnikov import radius_from_u

DEFAULT_RTOL = 1e-12
DEFAULT_ATOL = 1e-14
TANGENCY_TOL = 1e-12


class EscapeError(RuntimeError):
    """Trajectory left the working window."""


class NoReturnError(RuntimeError):
    """Trajectory did not return to the section within the time budget."""


class TangencyError(RuntimeError):
    """Integration could not proceed past a tangency point."""


# ---------------------------------------------------------------------------
# Fields and boundary data
# ---------------------------------------------------------------------------


def upper_field(params: SystemParams, eps: float) -> Callable:
    a, b, g = params.alpha, params.beta, params.gamma

    def f(t, z):
        x, y = z
        return (y + eps * y + eps * eps * a,
                -x - eps * b * y + eps * eps * g * y)

    return f


def lower_field(params: SystemParams, eps: float) -> Callable:
    b, mu = params.beta, params.mu

    def f(t, z):
        x, y = z
        return (y + eps * b * x, mu - x)

    return f


def lie_derivatives(x: float, params: SystemParams, eps: float | None = None
                    ) -> tuple[float, float]:
    """One-sided normal components of the two fields along the boundary,
    against the normal (-slope, 1)."""
    e = params.eps if eps is None else eps
    y = curve_mod.implicit_branch(x, params, e)
    slope = curve_mod.branch_slope(x, params, e)
    xv = upper_field(params, e)(0.0, (x, y))
    yv = lower_field(params, e)(0.0, (x, y))
    lx = -slope * xv[0] + xv[1]
    ly = -slope * yv[0] + yv[1]
    return lx, ly


def classify_boundary(x: float, params: SystemParams, eps: float | None = None,
                      *, tol: float = TANGENCY_TOL) -> str:
    lx, ly = lie_derivatives(x, params, eps)
    prod = lx * ly
    if abs(prod) <= tol:
        return "tangency"
    return "crossing" if prod > 0 else "sliding"


# ---------------------------------------------------------------------------
# Zone-hopping integrator
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryEvent:
    time: float
    state: tuple[float, float]
    kind: str  # crossing | tangency | sliding-entry | sliding-exit | section-hit
    zone_before: int | None
    zone_after: int | None


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (2, n)
    events: list[TrajectoryEvent]
    status: str  # "t_end" | "section-hit" | "no-return"


def integrate(
    state: Sequence[float],
    params: SystemParams,
    eps: float | None = None,
    t_span: tuple[float, float] = (0.0, 2.0 * math.pi),
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    escape_radius: float = 1.4,
    section: bool = False,
    tangency_tol: float = TANGENCY_TOL,
    max_legs: int = 600,
    reverse: bool = False,
) -> Trajectory:
    """Integrate across the discontinuity with event handling.

    With `section=True` the integration stops at the first genuine return to
    the positive y-axis (armed only on upper-zone legs entering from x < 0,
    so the start point itself never triggers it).  `reverse=True` runs the
    time-reversed flow through the same event machinery.
    """
    e = params.eps if eps is None else eps
    fx = upper_field(params, e)
    fy = lower_field(params, e)
    if reverse:
        fx, fy = _negate(fx), _negate(fy)

    z = np.array(state, dtype=float)
    t0, t_end = t_span
    t = t0
    resid0 = curve_mod.curve_residual(z[0], z[1], params, e)
    zone = 1 if resid0 >= 0 else -1

    times = [t]
    path = [z.copy()]
    events: list[TrajectoryEvent] = []

    legs = 0
    while t < t_end and legs < max_legs:
        legs += 1
        f = fx if zone == 1 else fy

        def ev_curve(tt, zz):
            return curve_mod.curve_residual(zz[0], zz[1], params, e)

        ev_curve.terminal = True
        ev_curve.direction = -zone

        def ev_escape(tt, zz):
            return zz[0] ** 2 + zz[1] ** 2 - escape_radius**2

        ev_escape.terminal = True
        ev_escape.direction = 1

        evs = [ev_curve, ev_escape]
        section_armed = section and zone == 1 and z[0] < -1e-9
        if section_armed:
            def ev_section(tt, zz):
                return zz[0]

            ev_section.terminal = True
            ev_section.direction = 1
            evs.append(ev_section)

        sol = solve_ivp(f, (t, t_end), z, method="DOP853", events=evs,
                        rtol=rtol, atol=atol)
        times.extend(sol.t[1:])
        path.extend(sol.y.T[1:])
        if sol.status == 0:
            return _finish(times, path, events, "t_end")
        if sol.status != 1:
            raise RuntimeError(f"integrator failure: {sol.message}")
        if len(sol.t_events[1]):
            raise EscapeError(f"escaped the working window at t={sol.t_events[1][0]:.6f}")
        if section_armed and len(sol.t_events[2]):
            t = float(sol.t_events[2][0])
            z = sol.y_events[2][0].copy()
            events.append(TrajectoryEvent(t, (z[0], z[1]), "section-hit", zone, zone))
            times.append(t)
            path.append(z.copy())
            return _finish(times, path, events, "section-hit")

        t = float(sol.t_events[0][0])
        z = sol.y_events[0][0].copy()
        times.append(t)
        path.append(z.copy())

        kind = classify_boundary(z[0], params, e, tol=tangency_tol)
        if reverse and kind == "sliding":
            kind = "crossing"  # backward flow crosses where forward flow slides out
        if kind == "crossing":
            events.append(TrajectoryEvent(t, (z[0], z[1]), "crossing", zone, -zone))
            zone = -zone
        elif kind == "tangency":
            # graze: continue in the same zone after a micro-step
            events.append(TrajectoryEvent(t, (z[0], z[1]), "tangency", zone, zone))
            t, z = _micro_advance(f, t, z, params, e)
        else:
            events.append(TrajectoryEvent(t, (z[0], z[1]), "sliding-entry", zone, 0))
            t, z, exit_zone = _slide(z[0], params, e, t, t_end, fx, fy,
                                     rtol=rtol, atol=atol)
            times.append(t)
            path.append(z.copy())
            events.append(TrajectoryEvent(t, (z[0], z[1]), "sliding-exit", 0, exit_zone))
            fexit = fx if exit_zone == 1 else fy
            t, z = _micro_advance(fexit, t, z, params, e)
            zone = 1 if curve_mod.curve_residual(z[0], z[1], params, e) >= 0 else -1
    if legs >= max_legs:
        return _finish(times, path, events, "no-return")
    return _finish(times, path, events, "t_end")


def _negate(f):
    def g(t, z):
        dx, dy = f(t, z)
        return (-dx, -dy)

    return g


def _finish(times, path, events, status) -> Trajectory:
    return Trajectory(times=np.asarray(times), states=np.asarray(path).T,
                      events=events, status=status)


def _micro_advance(f, t, z, params, e, *, dt=1e-9, max_steps=200):
    """March a whisker off the boundary so the next leg's events re-arm."""
    for _ in range(max_steps):
        k1 = np.asarray(f(t, z))
        k2 = np.asarray(f(t + dt / 2, z + dt / 2 * k1))
        z = z + dt * k2
        t += dt
        if abs(curve_mod.curve_residual(z[0], z[1], params, e)) > 1e-13:
            return t, z
        dt *= 2.0
    raise TangencyError(f"stuck on the boundary near ({z[0]:.6g}, {z[1]:.6g})")


def _slide(x0, params, e, t0, t_end, fx, fy, *, rtol, atol):
    """Follow the convex-combination sliding field along the boundary until a
    one-sided tangency releases the trajectory."""

    def rhs(tt, xx):
        x = float(xx[0])
        lx, ly = lie_derivatives(x, params, e)
        lam = ly / (ly - lx)
        y = curve_mod.implicit_branch(x, params, e)
        vx_u = fx(tt, (x, y))[0]
        vx_l = fy(tt, (x, y))[0]
        return [lam * vx_u + (1.0 - lam) * vx_l]

    def ev_lx(tt, xx):
        return lie_derivatives(float(xx[0]), params, e)[0]

    def ev_ly(tt, xx):
        return lie_derivatives(float(xx[0]), params, e)[1]

    ev_lx.terminal = True
    ev_ly.terminal = True
    sol = solve_ivp(rhs, (t0, t_end), [x0], method="DOP853",
                    events=[ev_lx, ev_ly], rtol=rtol, atol=atol)
    if sol.status != 1:
        raise TangencyError("sliding segment did not release within the time budget")
    if len(sol.t_events[0]):
        t, x_exit, exit_zone = float(sol.t_events[0][0]), float(sol.y_events[0][0][0]), 1
    else:
        t, x_exit, exit_zone = float(sol.t_events[1][0]), float(sol.y_events[1][0][0]), -1
    y_exit = curve_mod.implicit_branch(x_exit, params, e)
    return t, np.array([x_exit, y_exit]), exit_zone


# ---------------------------------------------------------------------------
# Return map and cycle detection
# ---------------------------------------------------------------------------


def poincare_return(v: float, params: SystemParams, eps: float | None = None,
                    *, t_max: float = 80.0, rtol: float = DEFAULT_RTOL,
                    atol: float = DEFAULT_ATOL, escape_radius: float = 1.4,
                    tangency_tol: float = TANGENCY_TOL) -> Trajectory:
    """Trajectory from (0, v) to its first return to the positive y-axis."""
    if v <= 0:
        raise ValueError("section coordinate must be positive")
    traj = integrate((0.0, v), params, eps, (0.0, t_max), section=True,
                     rtol=rtol, atol=atol, escape_radius=escape_radius,
                     tangency_tol=tangency_tol)
    if traj.status != "section-hit":
        raise NoReturnError(f"no section return from v={v} within t={t_max}")
    return traj


def poincare_map(v: float, params: SystemParams, eps: float | None = None,
                 **kwargs) -> float:
    """First-return value of the section coordinate on the positive y-axis."""
    traj = poincare_return(v, params, eps, **kwargs)
    return float(traj.states[1, -1])


@dataclass
class Cycle:
    section_coordinate: float
    mean_radius: float
    period: float
    multiplier: float        # return-map derivative at the fixed point
    multiplier_step: float   # central-difference step used
    stability: str           # attracting | repelling

    def as_dict(self) -> dict:
        return {
            "section_coordinate": self.section_coordinate,
            "mean_radius": self.mean_radius,
            "period": self.period,
            "multiplier": self.multiplier,
            "multiplier_step": self.multiplier_step,
            "stability": self.stability,
        }


@dataclass
class SlidingSegment:
    x_lo: float
    x_hi: float
    stability: str  # attracting | repelling

    @property
    def width(self) -> float:
        return self.x_hi - self.x_lo

    def as_dict(self) -> dict:
        return {"x_lo": self.x_lo, "x_hi": self.x_hi,
                "width": self.width, "stability": self.stability}


@dataclass
class PredictionMatch:
    target_radius: float
    matched: bool
    section_coordinate: float | None
    relative_error: float | None

    def as_dict(self) -> dict:
        return {"target_radius": self.target_radius, "matched": self.matched,
                "section_coordinate": self.section_coordinate,
                "relative_error": self.relative_error}


@dataclass
class CycleReport:
    eps: float
    mu: float
    cycles: list[Cycle]
    sliding_segments: list[SlidingSegment]
    predicted: list[PredictionMatch]
    degenerate_center: bool
    grid: list[tuple[float, float | None]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "eps": self.eps,
            "mu": self.mu,
            "cycles": [c.as_dict() for c in self.cycles],
            "sliding_segments": [s.as_dict() for s in self.sliding_segments],
            "predicted": [p.as_dict() for p in self.predicted],
            "degenerate_center": self.degenerate_center,
        }


def find_cycles(
    params: SystemParams,
    eps: float | None = None,
    search_interval: tuple[float, float] = (0.05, 0.6),
    *,
    predicted_u: Sequence[float] | None = None,
    n_grid: int | None = None,
    bisect_tol: float = 1e-8,
    derivative_step: float = 1e-5,
    degenerate_tol: float = 1e-9,
    match_rtol: float = 0.10,
    t_max: float = 80.0,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    escape_radius: float = 1.4,
    tangency_tol: float = TANGENCY_TOL,
) -> CycleReport:
    """Scan the section for fixed points of the return map.

    Grid points whose trajectory escapes or never returns are recorded with a
    missing displacement and excluded from bracketing; an all-but-flat
    displacement marks a degenerate center (no isolated cycles).
    """
    e = params.eps if eps is None else eps
    lo, hi = search_interval
    if not 0 < lo < hi:
        raise ValueError("search interval must satisfy 0 < lo < hi")
    if n_grid is None:
        n_grid = max(9, int(math.ceil((hi - lo) / 0.02)) + 1)

    kw = dict(t_max=t_max, rtol=rtol, atol=atol, escape_radius=escape_radius,
              tangency_tol=tangency_tol)

    def displacement(v: float) -> float | None:
        try:
            return poincare_map(v, params, e, **kw) - v
        except (NoReturnError, EscapeError):
            return None

    grid_v = np.linspace(lo, hi, n_grid)
    grid = [(float(v), displacement(float(v))) for v in grid_v]

    valid = [(v, d) for v, d in grid if d is not None]
    degenerate = bool(valid) and all(abs(d) < degenerate_tol for _, d in valid)

    cycles: list[Cycle] = []
    if not degenerate:
        for (va, da), (vb, db) in zip(grid, grid[1:]):
            if da is None or db is None or da * db >= 0:
                continue
            a, b, sa = va, vb, da
            while b - a > bisect_tol:
                mid = 0.5 * (a + b)
                dm = displacement(mid)
                if dm is None:
                    break
                if dm * sa > 0:
                    a = mid
                else:
                    b = mid
            vstar = 0.5 * (a + b)
            cycles.append(_cycle_at(vstar, params, e, derivative_step, kw))

    predicted = []
    if predicted_u is not None:
        k = params.k
        for u in predicted_u:
            r_target = radius_from_u(float(u), k)
            best = None
            for c in cycles:
                relerr = abs(c.section_coordinate - r_target) / r_target
                if best is None or relerr < best[1]:
                    best = (c, relerr)
            if best is not None and best[1] <= match_rtol:
                predicted.append(PredictionMatch(r_target, True,
                                                 best[0].section_coordinate, best[1]))
            else:
                predicted.append(PredictionMatch(r_target, False, None,
                                                 None if best is None else best[1]))

    segments = []
    seg = sliding_segment(params, e, tangency_tol=tangency_tol)
    if seg is not None:
        segments.append(seg)

    return CycleReport(eps=e, mu=params.mu, cycles=cycles,
                       sliding_segments=segments, predicted=predicted,
                       degenerate_center=degenerate, grid=grid)


def _cycle_at(vstar, params, e, derivative_step, kw) -> Cycle:
    traj = poincare_return(vstar, params, e, **kw)
    period = float(traj.times[-1])
    radii = np.hypot(traj.states[0], traj.states[1])
    mean_radius = float(np.mean(radii))
    h = derivative_step * vstar
    lam = (poincare_map(vstar + h, params, e, **kw)
           - poincare_map(vstar - h, params, e, **kw)) / (2.0 * h)
    return Cycle(section_coordinate=float(vstar), mean_radius=mean_radius,
                 period=period, multiplier=float(lam), multiplier_step=h,
                 stability="attracting" if lam < 1.0 else "repelling")


# ---------------------------------------------------------------------------
# Sliding segment and the mu-sweep
# ---------------------------------------------------------------------------


def sliding_segment(params: SystemParams, eps: float | None = None,
                    *, x_scan: float | None = None, n_scan: int = 600,
                    tangency_tol: float = TANGENCY_TOL) -> SlidingSegment | None:
    """Locate the sliding segment near the origin, if any.

    The segment endpoints are simple roots of the one-sided Lie derivatives;
    its interior has the two derivatives with opposite signs.
    """
    e = params.eps if eps is None else eps
    mu = params.mu
    if x_scan is None:
        x_scan = max(4.0 * abs(mu), 1e-6)
    xs = np.linspace(-x_scan, x_scan, n_scan)

    def product(x):
        lx, ly = lie_derivatives(float(x), params, e)
        return lx * ly

    vals = [product(x) for x in xs]
    neg = [i for i, v in enumerate(vals) if v < -tangency_tol]
    if not neg:
        return None
    i0, i1 = neg[0], neg[-1]
    x_lo = brentq(product, xs[i0 - 1], xs[i0], xtol=1e-15) if i0 > 0 else xs[0]
    x_hi = brentq(product, xs[i1], xs[i1 + 1], xtol=1e-15) if i1 < len(xs) - 1 else xs[-1]
    mid = 0.5 * (x_lo + x_hi)
    lx, ly = lie_derivatives(mid, params, e)
    stability = "attracting" if (lx < 0 < ly) else "repelling"
    return SlidingSegment(x_lo=float(x_lo), x_hi=float(x_hi), stability=stability)


@dataclass
class PseudoHopfPoint:
    mu: float
    segment: SlidingSegment | None
    h2_opposite_signs: bool
    lx_midpoint_sign: int
    cycle: Cycle | None

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "segment": None if self.segment is None else self.segment.as_dict(),
            "h2_opposite_signs": self.h2_opposite_signs,
            "lx_midpoint_sign": self.lx_midpoint_sign,
            "cycle": None if self.cycle is None else self.cycle.as_dict(),
        }


@dataclass
class PseudoHopfSweep:
    eps: float
    points: list[PseudoHopfPoint]

    def cycle_signs(self) -> set[int]:
        return {int(math.copysign(1, pt.mu)) for pt in self.points
                if pt.cycle is not None and pt.mu != 0.0}

    def one_sided(self) -> bool:
        return len(self.cycle_signs()) == 1

    def as_dict(self) -> dict:
        return {"eps": self.eps,
                "points": [pt.as_dict() for pt in self.points],
                "cycle_signs": sorted(self.cycle_signs()),
                "one_sided": self.one_sided()}


def pseudo_hopf_sweep(
    params: SystemParams,
    eps: float | None = None,
    mu_values: Sequence[float] = (),
    *,
    window_factor: float = 5.0,
    n_grid: int = 13,
    t_max: float = 250.0,
    mu_bound_factor: float = 0.1,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> PseudoHopfSweep:
    """For each mu: locate the sliding segment near the origin, verify the
    opposite-sign condition on it, and search the band just outside it
    (sliding width up to window_factor times it) for a small cycle."""
    e = params.eps if eps is None else eps
    pts = []
    for mu in mu_values:
        if abs(mu) > mu_bound_factor * abs(e) * (1 + 1e-9):
            raise ValueError(f"|mu|={abs(mu)} exceeds {mu_bound_factor}*|eps|")
        pmu = replace(params, mu=float(mu))
        # sliding geometry uses a tighter tangency band than plain crossing runs
        seg = sliding_segment(pmu, e, tangency_tol=1e-13)
        if seg is None or mu == 0.0:
            pts.append(PseudoHopfPoint(mu=float(mu), segment=seg,
                                       h2_opposite_signs=False,
                                       lx_midpoint_sign=0, cycle=None))
            continue
        mid = 0.5 * (seg.x_lo + seg.x_hi)
        lx, ly = lie_derivatives(mid, pmu, e)
        h2 = lx * ly < 0
        w = seg.width
        report = find_cycles(pmu, e, (w, window_factor * w), n_grid=n_grid,
                             t_max=t_max, rtol=rtol, atol=atol,
                             tangency_tol=1e-13)
        cyc = report.cycles[0] if report.cycles else None
        pts.append(PseudoHopfPoint(mu=float(mu), segment=seg,
                                   h2_opposite_signs=h2,
                                   lx_midpoint_sign=int(math.copysign(1, lx)),
                                   cycle=cyc))
    return PseudoHopfSweep(eps=e, points=pts)
