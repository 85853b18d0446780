"""Discontinuity-curve machinery.

The boundary between the two linear zones is the zero set of

    residual(x, y) = y - x**(2k+1) - eps * H(x, y),

where H is a bivariate polynomial with only even-degree monomials
x**i * y**(2j-i).  Substituting y = x**(2k+1) collapses H to a univariate
even polynomial h(x) whose exponent lattice p(i,j) = 2(2k+1)j - 2k i drives
everything downstream: for odd parity all lattice values are distinct, for
even parity exactly two pairs collide.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .poly import MonomialSum

PARITIES = ("odd", "even")

#: default validity window for the implicit boundary solve
DEFAULT_EPS_MAX = 0.1
DEFAULT_X_MAX = 1.2


class BranchSolveError(RuntimeError):
    """Newton iteration for the boundary branch failed to converge."""


def _j_max(k: int, parity: str) -> int:
    return k if parity == "odd" else k + 1


def coefficient_keys(k: int, parity: str) -> list[tuple[int, int]]:
    """All (i, j) indices of the perturbation, j = 1..j_max, i = 0..2j."""
    jm = _j_max(k, parity)
    return [(i, j) for j in range(1, jm + 1) for i in range(2 * j + 1)]


@dataclass(frozen=True)
class SystemParams:
    """One member of the two-zone family.

    `c` maps (i, j) to the coefficient of x**i * y**(2j-i) in the curve
    perturbation; missing keys are filled with zero so the key set always
    matches the parity (k**2 + 2k keys for odd, (k+1)**2 + 2(k+1) for even).
    """

    k: int
    parity: str = "odd"
    eps: float = 0.0
    mu: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    c: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.parity not in PARITIES:
            raise ValueError(f"parity must be one of {PARITIES}, got {self.parity!r}")
        keys = coefficient_keys(self.k, self.parity)
        allowed = set(keys)
        for key in self.c:
            if key not in allowed:
                raise ValueError(f"coefficient index {key} out of range for "
                                 f"k={self.k}, parity={self.parity}")
        full = {key: float(self.c.get(key, 0.0)) for key in keys}
        object.__setattr__(self, "c", full)

    def curve_degree(self) -> int:
        return 2 * self.k + 1 if self.parity == "odd" else 2 * self.k + 2


@dataclass(frozen=True)
class ExponentLattice:
    k: int
    parity: str
    entries: tuple[tuple[int, int, int], ...]        # (i, j, exponent)
    merged: Mapping[int, tuple[tuple[int, int], ...]]  # exponent -> (i, j) class

    def distinct_count(self) -> int:
        return len(self.merged)

    def mode_exponents(self) -> list[int]:
        """Sorted half-exponents p with h(x) = sum c_p x**(2p)."""
        return sorted(e // 2 for e in self.merged)


def lattice_exponent(i: int, j: int, k: int) -> int:
    """Exponent picked up by x**i y**(2j-i) on the unperturbed curve."""
    if k < 1 or j < 1 or not 0 <= i <= 2 * j:
        raise ValueError(f"require k>=1, j>=1, 0<=i<=2j; got i={i}, j={j}, k={k}")
    return i + (2 * k + 1) * (2 * j - i)


def build_lattice(k: int, parity: str = "odd") -> ExponentLattice:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if parity not in PARITIES:
        raise ValueError(f"parity must be one of {PARITIES}, got {parity!r}")
    entries = []
    merged: dict[int, list[tuple[int, int]]] = {}
    for i, j in coefficient_keys(k, parity):
        p = lattice_exponent(i, j, k)
        entries.append((i, j, p))
        merged.setdefault(p, []).append((i, j))
    return ExponentLattice(
        k=k,
        parity=parity,
        entries=tuple(entries),
        merged={p: tuple(sorted(v, key=lambda ij: (ij[1], ij[0])))
                for p, v in sorted(merged.items())},
    )


def reduced_perturbation(params: SystemParams) -> MonomialSum:
    """Substitute y = x**(2k+1) into the perturbation; colliding exponents
    merge by coefficient addition.  Exact: float coefficients are taken as
    the binary rationals they are."""
    terms = []
    for (i, j), cij in params.c.items():
        if cij:
            terms.append((lattice_exponent(i, j, params.k), Fraction(cij)))
    return MonomialSum(terms)


def assign_mode_coefficients(
    k: int, parity: str, modes: Sequence[int], coefficients: Sequence[float]
) -> dict[tuple[int, int], float]:
    """Place per-mode coefficients c_p (h = sum c_p x**(2p)) onto lattice
    representatives; for merged classes the first representative carries the
    whole coefficient."""
    if len(modes) != len(coefficients):
        raise ValueError("modes and coefficients must have equal length")
    lattice = build_lattice(k, parity)
    out: dict[tuple[int, int], float] = {}
    for p, cp in zip(modes, coefficients):
        reps = lattice.merged.get(2 * p)
        if reps is None:
            raise ValueError(f"mode exponent p={p} not in the (k={k}, {parity}) lattice")
        out[reps[0]] = out.get(reps[0], 0.0) + float(cp)
    return out


# ---------------------------------------------------------------------------
# Pointwise curve geometry (float)
# ---------------------------------------------------------------------------


def perturbation_value(x: float, y: float, params: SystemParams) -> float:
    """H(x, y) = sum c_ij x**i y**(2j-i)."""
    acc = 0.0
    for (i, j), cij in params.c.items():
        if cij:
            acc += cij * x**i * y ** (2 * j - i)
    return acc


def perturbation_dy(x: float, y: float, params: SystemParams) -> float:
    acc = 0.0
    for (i, j), cij in params.c.items():
        m = 2 * j - i
        if cij and m:
            acc += cij * m * x**i * y ** (m - 1)
    return acc


def perturbation_dx(x: float, y: float, params: SystemParams) -> float:
    acc = 0.0
    for (i, j), cij in params.c.items():
        if cij and i:
            acc += cij * i * x ** (i - 1) * y ** (2 * j - i)
    return acc


def curve_residual(x: float, y: float, params: SystemParams,
                   eps: float | None = None) -> float:
    """Signed residual of the discontinuity curve; > 0 in the upper zone."""
    e = params.eps if eps is None else eps
    return y - x ** (2 * params.k + 1) - e * perturbation_value(x, y, params)


def implicit_branch(
    x: float,
    params: SystemParams,
    eps: float | None = None,
    *,
    eps_max: float = DEFAULT_EPS_MAX,
    x_max: float = DEFAULT_X_MAX,
    tol: float = 1e-14,
    max_iter: int = 50,
) -> float:
    """The y with residual(x, y) = 0 on the branch through y = x**(2k+1).

    Newton iteration seeded at x**(2k+1) + eps*h(x); the perturbation is
    polynomial in y so the derivative is exact and convergence quadratic.
    """
    e = params.eps if eps is None else eps
    if abs(e) > eps_max * (1 + 1e-12):
        raise ValueError(f"|eps|={abs(e)} exceeds the validity bound {eps_max}")
    if abs(x) > x_max * (1 + 1e-12):
        raise ValueError(f"|x|={abs(x)} outside the working window [{-x_max}, {x_max}]")
    base = x ** (2 * params.k + 1)
    h = reduced_perturbation(params)
    y = base + e * h.evaluate_float(x)
    for _ in range(max_iter):
        g = y - base - e * perturbation_value(x, y, params)
        if abs(g) <= tol:
            return y
        dg = 1.0 - e * perturbation_dy(x, y, params)
        y -= g / dg
    if abs(y - base - e * perturbation_value(x, y, params)) <= tol:
        return y
    raise BranchSolveError(f"branch solve failed at x={x}, eps={e}")


def branch_slope(x: float, params: SystemParams, eps: float | None = None,
                 **window) -> float:
    """dy/dx along the boundary branch (implicit differentiation)."""
    e = params.eps if eps is None else eps
    y = implicit_branch(x, params, eps, **window)
    k = params.k
    num = (2 * k + 1) * x ** (2 * k) + e * perturbation_dx(x, y, params)
    den = 1.0 - e * perturbation_dy(x, y, params)
    return num / den
