"""Constant-scalar-curvature metrics on S^1(L) x S^(n-1) via 1-D reduction.

Metrics of the form u(t)^(4/(n-2)) (dt^2 + g_sphere) with u a positive
periodic profile have constant scalar curvature lam exactly when

    -a u'' + r0 u = lam u^(p-1),    a = 4(n-1)/(n-2),
                                    r0 = (n-1)(n-2)/radius^2,
                                    p = 2n/(n-2).

The constant branch is u = const with lam = r0 u^(2-p).  Nonconstant
periodic profiles branch off the constant one when the circumference
passes multiples of L* = 2 pi sqrt(a / ((p-2) r0)); they are found by a
shooting method with periodic closure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, root

from .charts import sphere_volume

__all__ = [
    "BranchPoint",
    "ShootingFailure",
    "ScanResult",
    "cylinder_shoot",
    "bifurcation_scan",
    "first_bifurcation_length",
    "cylinder_csc_residual",
    "constant_branch",
]

CLOSURE_TOL = 1e-8


def _coefficients(n: int, sphere_radius: float = 1.0):
    a = 4.0 * (n - 1) / (n - 2)
    r0 = (n - 1) * (n - 2) / sphere_radius**2
    p = 2.0 * n / (n - 2)
    return a, r0, p


def first_bifurcation_length(n: int, sphere_radius: float = 1.0) -> float:
    """Circumference at which the first nonconstant branch appears."""
    a, r0, p = _coefficients(n, sphere_radius)
    return 2.0 * math.pi * math.sqrt(a / ((p - 2.0) * r0))


@dataclass
class BranchPoint:
    """One periodic CSC profile on the cylinder of circumference L."""

    L: float
    kind: str                    # "constant" or "nonconstant"
    u: np.ndarray                # profile samples on a uniform [0, L) grid
    lam: float
    dim: int
    sphere_radius: float = 1.0
    closure_error: float = 0.0
    bumps: int = 1               # number of periods of the profile within [0, L)

    def __post_init__(self):
        if np.any(self.u <= 0):
            raise ValueError("cylinder profile must be positive")

    @property
    def samples(self) -> int:
        return len(self.u)

    def grid(self) -> np.ndarray:
        return np.arange(self.samples) * (self.L / self.samples)

    def volume(self) -> float:
        """Riemannian volume of the lifted metric."""
        _, _, p = _coefficients(self.dim, self.sphere_radius)
        cross = sphere_volume(self.dim - 1, self.sphere_radius)
        return cross * float(np.mean(self.u**p)) * self.L

    def normalized_unit_volume(self) -> "BranchPoint":
        """Rescale the profile so the lifted metric has volume 1.

        Scaling u -> s u maps lam -> lam s^(2-p) and leaves the equation
        satisfied.
        """
        _, _, p = _coefficients(self.dim, self.sphere_radius)
        s = self.volume() ** (-1.0 / p)
        return BranchPoint(self.L, self.kind, s * self.u, self.lam * s ** (2.0 - p),
                           self.dim, self.sphere_radius, self.closure_error,
                           self.bumps)

    def aligned(self) -> "BranchPoint":
        """Roll the profile so its maximum sits at t = 0 (quotients translation)."""
        shift = int(np.argmax(self.u))
        return BranchPoint(self.L, self.kind, np.roll(self.u, -shift), self.lam,
                           self.dim, self.sphere_radius, self.closure_error,
                           self.bumps)


@dataclass
class ShootingFailure:
    """Closest miss of the periodic-closure root find."""

    message: str
    residual: float
    u0: float
    lam: float


@dataclass
class ScanResult:
    branches: list = field(default_factory=list)   # list of BranchPoint
    l_star: float | None = None                    # first bifurcation estimate
    scanned: list = field(default_factory=list)    # the circumferences visited


def constant_branch(L: float, n: int, u0: float = 1.0,
                    sphere_radius: float = 1.0, samples: int = 512) -> BranchPoint:
    """The constant profile u = u0 with lam = r0 u0^(2-p)."""
    _, r0, p = _coefficients(n, sphere_radius)
    lam = r0 * u0 ** (2.0 - p)
    return BranchPoint(L, "constant", np.full(samples, float(u0)), lam, n,
                       sphere_radius)


def _integrate(L: float, n: int, u0: float, du0: float, lam: float,
               sphere_radius: float, dense: bool = False, rtol: float = 1e-11):
    a, r0, _p = _coefficients(n, sphere_radius)

    def rhs(_t, y):
        u, du = y
        return (du, (r0 * u - lam * u ** (_p - 1.0)) / a)

    def blow_up(_t, y):
        return y[0] - 1e-8

    blow_up.terminal = True
    return solve_ivp(rhs, (0.0, L), (u0, du0), method="DOP853", rtol=rtol,
                     atol=1e-13, dense_output=dense, events=blow_up,
                     max_step=L / 256.0)


def cylinder_shoot(L: float, n: int, u0: float, du0: float = 0.0,
                   lam0: float | None = None, sphere_radius: float = 1.0,
                   samples: int = 512):
    """Find a periodic CSC profile by a 2-parameter root find in (u0, lam).

    Integrates the reduced ODE with an adaptive 4/5-order scheme and
    solves the closure conditions u(L) = u(0), u'(L) = u'(0).  Returns a
    BranchPoint on success, or a ShootingFailure holding the closest
    miss.
    """
    if n < 3:
        raise ValueError("cylinder reduction needs dimension >= 3")
    if L <= 0:
        raise ValueError("circumference must be positive")
    if u0 <= 0:
        raise ValueError("initial profile value must be positive")
    _a, r0, _p = _coefficients(n, sphere_radius)
    if lam0 is None:
        lam0 = r0

    def closure(x):
        ustart, lam = x
        if ustart <= 0 or lam <= 0:
            return (1e3, 1e3)
        sol = _integrate(L, n, ustart, du0, lam, sphere_radius)
        if sol.t[-1] < L:   # profile hit zero: heavily penalize
            return (1e3, 1e3)
        return (sol.y[0, -1] - ustart, sol.y[1, -1] - du0)

    result = root(closure, x0=(u0, lam0), method="lm",
                  options={"xtol": 1e-13, "ftol": 1e-14, "maxiter": 400})
    miss = float(np.max(np.abs(result.fun)))
    ustar, lam = float(result.x[0]), float(result.x[1])
    if miss > CLOSURE_TOL or ustar <= 0 or lam <= 0:
        return ShootingFailure("periodic closure not achieved", miss, ustar, lam)
    sol = _integrate(L, n, ustar, du0, lam, sphere_radius, dense=True)
    ts = np.arange(samples) * (L / samples)
    u = sol.sol(ts)[0]
    if np.any(u <= 0):
        return ShootingFailure("profile lost positivity", miss, ustar, lam)
    # closure alone admits degenerate near-zero orbits; require the
    # sampled profile to satisfy the CSC equation itself
    residual = cylinder_csc_residual(u, L, n, lam, sphere_radius)
    if residual > 1e-4 * max(lam, r0):
        return ShootingFailure("closed orbit fails the CSC equation",
                               miss, ustar, lam)
    spread = float(np.max(u) - np.min(u))
    kind = "nonconstant" if spread > 1e-6 * float(np.max(u)) else "constant"
    return BranchPoint(L, kind, u, lam, n, sphere_radius, miss).aligned()


def _half_period(amp: float, n: int, lam: float, sphere_radius: float,
                 t_cap: float) -> float:
    """Time for the orbit through (amp, 0) to reach its next turning point."""
    a, r0, p = _coefficients(n, sphere_radius)

    def rhs(_t, y):
        u, du = y
        return (du, (r0 * u - lam * u ** (p - 1.0)) / a)

    def turning(t, y):
        return y[1]

    turning.terminal = True
    turning.direction = 1.0 if amp > 1.0 else -1.0
    sol = solve_ivp(rhs, (1e-9, t_cap), (amp, 0.0), method="DOP853",
                    rtol=1e-11, atol=1e-13, events=turning)
    if sol.t_events[0].size == 0:
        return math.inf
    return float(sol.t_events[0][0])


def _nonconstant_by_period(L: float, n: int, bumps: int,
                           sphere_radius: float, samples: int):
    """Locate the amplitude whose orbit period equals L / bumps, then polish.

    Works at the fixed lam = r0 (center at u = 1); the amplitude runs
    between the center and the value whose orbit energy matches the
    saddle at u = 0 (where the period diverges).
    """
    a, r0, p = _coefficients(n, sphere_radius)
    target = L / bumps
    lstar = first_bifurcation_length(n, sphere_radius)
    if target <= lstar:
        return None
    amp_hom = (p * r0 / (2.0 * r0)) ** (1.0 / (p - 2.0))  # energy matches u=0 saddle
    t_cap = 4.0 * target

    def period_gap(amp):
        return 2.0 * _half_period(amp, n, r0, sphere_radius, t_cap) - target

    lo = 1.0 + 1e-6
    glo = period_gap(lo)
    if not np.isfinite(glo) or glo > 0:
        return None
    # walk hi down from the homoclinic until the period is finite yet above target
    hi = amp_hom - 1e-10
    for _ in range(200):
        ghi = period_gap(hi)
        if np.isfinite(ghi) and ghi > 0:
            break
        if np.isfinite(ghi) and ghi <= 0:
            return None
        hi = 1.0 + 0.9 * (hi - 1.0)
        if hi - lo < 1e-12:
            return None
    else:
        return None
    amp = brentq(period_gap, lo, hi, xtol=1e-12, rtol=1e-14)
    result = cylinder_shoot(L, n, amp, 0.0, r0, sphere_radius, samples)
    if isinstance(result, BranchPoint) and result.kind == "nonconstant":
        result.bumps = bumps
        return result
    return None


def bifurcation_scan(l_min: float, l_max: float, steps: int, n: int,
                     sphere_radius: float = 1.0, samples: int = 512) -> ScanResult:
    """Sweep circumferences and report the branch structure.

    The first bifurcation is located by the sign change, in L, of the
    lowest nonconstant-mode eigenvalue of the linearized operator around
    the constant branch, discretized with the 4th-order periodic stencil
    and then bisected to machine tolerance.
    """
    if l_min <= 0 or l_max <= l_min or steps < 2:
        raise ValueError("need 0 < l_min < l_max and steps >= 2")
    a, r0, p = _coefficients(n, sphere_radius)

    def mode_one_eigenvalue(L, nodes=64):
        # symbol of the 4th-order periodic second-derivative stencil at k = 1
        h = L / nodes
        theta = 2.0 * math.pi / nodes
        q = (2.5 - (8.0 / 3.0) * math.cos(theta) + (1.0 / 6.0) * math.cos(2 * theta)) / h**2
        return a * q - (p - 2.0) * r0

    ls = np.linspace(l_min, l_max, steps)
    l_star = None
    for left, right in zip(ls[:-1], ls[1:]):
        if mode_one_eigenvalue(left) > 0 >= mode_one_eigenvalue(right):
            l_star = brentq(mode_one_eigenvalue, left, right,
                            xtol=1e-12, rtol=1e-14)
            break

    branches = []
    for L in ls:
        L = float(L)
        branches.append(constant_branch(L, n, 1.0, sphere_radius, samples))
        if l_star is not None:
            max_bumps = int(L / l_star)
            for k in range(1, max_bumps + 1):
                found = _nonconstant_by_period(L, n, k, sphere_radius, samples)
                if found is not None:
                    branches.append(found)
    return ScanResult(branches, l_star, [float(L) for L in ls])


def cylinder_csc_residual(u: np.ndarray, L: float, n: int, lam: float,
                          sphere_radius: float = 1.0) -> float:
    """max |R(g) - lam| of the lifted metric u^(4/(n-2)) (dt^2 + g_sphere).

    The scalar curvature is evaluated through the conformal law with the
    4th-order periodic difference for u'' on the profile grid.
    """
    a, r0, p = _coefficients(n, sphere_radius)
    m = len(u)
    h = L / m
    d2 = (-30.0 * u + 16.0 * (np.roll(u, 1) + np.roll(u, -1))
          - (np.roll(u, 2) + np.roll(u, -2))) / (12.0 * h**2)
    r_field = u ** (1.0 - p) * (-a * d2 + r0 * u)
    return float(np.max(np.abs(r_field - lam)))
