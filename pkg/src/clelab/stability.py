"""Steady 2D CL flows and the energy-Casimir a priori estimate.

A steady state is described by the stream function ``psi_e`` of the shifted
field, the stream function ``psi_e_star = psi_e - phi_s`` of ``v_e - V_s`` and
a profile ``F`` with ``psi_e = F(lap psi_e_star)``.  For a perturbation
``psi~ = psi - psi_e`` the functional

    C(psi~) = |grad psi~|^2 / 2 + int P(q_e + lap psi~) - P(q_e) - F(q_e) lap psi~

(``P' = F``, ``q_e = lap psi_e_star``) is conserved, and bounds on ``F'``
turn that into the estimate checked by :func:`apriori_check`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .dynamics import FlowState, StokesDrift, run
from .spectral import (
    FieldError,
    Grid2D,
    ScalarField2D,
    VectorField2D,
    _check_zero_mean,
    curl,
    divergence,
    gradient,
    integrate_domain,
    jacobian,
    l2_inner,
    l2_norm_sq,
    laplacian,
    velocity_from_stream,
)

__all__ = [
    "StabilityError",
    "HypothesisViolation",
    "ProfileF",
    "SteadyState",
    "AprioriReport",
    "make_shear_steady",
    "validate_steady",
    "steady_residual",
    "ratio_bounds",
    "second_variation",
    "gamma_functional",
    "c_functional",
    "first_variation_gamma",
    "apriori_check",
    "write_apriori_csv",
]

STEADY_TOL = 1e-10
PROFILE_TOL = 1e-9
SATISFIED_RTOL = 1e-4
SANDWICH_TOL = 1e-9


class StabilityError(ValueError):
    pass


class HypothesisViolation(StabilityError):
    pass


@dataclass(frozen=True, eq=False)
class ProfileF:
    """Profile ``F`` with primitive ``P`` (``P(0) = 0``).

    ``kind="linear"`` uses ``F(x) = slope x + intercept``; ``kind="tabulated"``
    interpolates a strictly monotone table with a shape-preserving cubic.
    """

    kind: str
    slope: float = 0.0
    intercept: float = 0.0
    x_samples: tuple = ()
    f_samples: tuple = ()
    _interp: object = field(default=None, init=False, repr=False)
    _prim: object = field(default=None, init=False, repr=False)
    _deriv: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.kind == "linear":
            if not (math.isfinite(self.slope) and math.isfinite(self.intercept)):
                raise StabilityError("linear profile needs finite slope and intercept")
        elif self.kind == "tabulated":
            x = np.asarray(self.x_samples, float)
            y = np.asarray(self.f_samples, float)
            if x.ndim != 1 or x.shape != y.shape or x.size < 2:
                raise StabilityError("tabulated profile needs matching 1-d sample arrays")
            if not np.all(np.diff(x) > 0):
                raise StabilityError("tabulated profile arguments must be strictly increasing")
            interp = PchipInterpolator(x, y, extrapolate=True)
            prim = interp.antiderivative()
            object.__setattr__(self, "_interp", interp)
            object.__setattr__(self, "_prim", prim)
            object.__setattr__(self, "_deriv", interp.derivative())
        else:
            raise StabilityError(f"unknown profile kind {self.kind!r}")

    @classmethod
    def linear(cls, slope: float, intercept: float = 0.0) -> "ProfileF":
        return cls("linear", slope=float(slope), intercept=float(intercept))

    @classmethod
    def tabulated(cls, x, f) -> "ProfileF":
        return cls("tabulated", x_samples=tuple(map(float, x)), f_samples=tuple(map(float, f)))

    def __call__(self, x):
        if self.kind == "linear":
            return self.slope * np.asarray(x) + self.intercept
        return self._interp(x)

    def primitive(self, x):
        if self.kind == "linear":
            x = np.asarray(x)
            return 0.5 * self.slope * x * x + self.intercept * x
        return self._prim(x) - self._prim(0.0)

    def derivative(self, x):
        if self.kind == "linear":
            return np.full(np.shape(x), self.slope)
        return self._deriv(x)


@dataclass(frozen=True, eq=False)
class SteadyState:
    psi_e: ScalarField2D
    psi_e_star: ScalarField2D
    profile: ProfileF
    c1: float
    c2: float

    @property
    def grid(self) -> Grid2D:
        return self.psi_e.grid

    @property
    def q_e(self) -> ScalarField2D:
        """``lap psi_e_star``, the vorticity of the physical steady flow."""
        return laplacian(self.psi_e_star)


@dataclass
class AprioriReport:
    times: list
    lhs: list
    rhs: float
    gamma_drift: float
    c_drift: float
    satisfied: bool
    tol: float = SATISFIED_RTOL
    two_c: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    grad_sq: list = field(default_factory=list)
    lap_sq: list = field(default_factory=list)
    max_cfl: float = 0.0

    def to_dict(self) -> dict:
        return {
            "times": list(map(float, self.times)),
            "lhs": list(map(float, self.lhs)),
            "rhs": float(self.rhs),
            "gamma_drift": float(self.gamma_drift),
            "c_drift": float(self.c_drift),
            "satisfied": bool(self.satisfied),
            "tol": float(self.tol),
            "max_lhs_over_rhs": _ratio(max(self.lhs, default=0.0), self.rhs),
            "equality_drift": float(self.equality_drift()),
            "max_cfl": float(self.max_cfl),
        }

    def equality_drift(self) -> float:
        """Relative drift of ``|grad psi~|^2 + |lap psi~|^2`` (constant when c1 = c2 = 1)."""
        s = np.asarray(self.grad_sq) + np.asarray(self.lap_sq)
        return _rel_drift(s)


def _ratio(a: float, b: float) -> float:
    if b == 0:
        return 0.0 if a == 0 else math.inf
    return float(a / b)


def _rel_drift(values) -> float:
    v = np.asarray(values, float)
    if v.size == 0:
        return 0.0
    ref = abs(v[0])
    dev = float(np.abs(v - v[0]).max())
    if ref == 0:
        return 0.0 if dev == 0 else math.inf
    return dev / ref


def _grad_sq(f: ScalarField2D) -> float:
    return l2_norm_sq(gradient(f))


# --- construction ---------------------------------------------------------------

def _shear(grid: Grid2D, amp: float, m: float) -> ScalarField2D:
    # amp cos(m y) with the k=0 coefficient pinned, so differences of these
    # fields are exactly zero-mean
    hat = np.array(ScalarField2D.from_function(grid, lambda x, y: amp * np.cos(m * y)).spectral)
    hat[0, 0] = 0.0
    return ScalarField2D.from_spectral(grid, hat)


def make_shear_steady(grid: Grid2D, u_amp: float, w_amp: float, mode: int = 1):
    """One-mode shear ``v_e = (u_amp sin(mode y), 0)`` under the drift
    ``V_s = (w_amp sin(mode y), 0)``.  Returns ``(steady, drift)``."""
    if not (math.isfinite(u_amp) and math.isfinite(w_amp)):
        raise StabilityError("amplitudes must be finite")
    if isinstance(mode, bool) or not isinstance(mode, (int, np.integer)) or mode < 1:
        raise StabilityError(f"mode must be a positive integer, got {mode!r}")
    if mode > min(grid.nx, grid.ny) // 4:
        raise StabilityError(f"mode {mode} exceeds a quarter of the grid size")
    if u_amp == w_amp:
        raise StabilityError("u_amp == w_amp: the shifted stream function vanishes (degenerate)")
    slope = -u_amp / (mode * mode * (u_amp - w_amp))
    if not slope > 0:
        raise HypothesisViolation(
            f"positivity hypothesis violated: profile slope {slope:.6g} is not positive")
    m = float(mode)
    psi_e = _shear(grid, u_amp / m, m)
    psi_star = _shear(grid, (u_amp - w_amp) / m, m)
    phi_s = _shear(grid, w_amp / m, m)
    drift = StokesDrift(phi_s)
    steady = SteadyState(psi_e, psi_star, ProfileF.linear(slope), slope, slope)
    validate_steady(steady, drift)
    return steady, drift


def validate_steady(steady: SteadyState, drift: StokesDrift, tol: float = STEADY_TOL) -> None:
    """Check the relations a steady state must satisfy before it is used."""
    if steady.grid != drift.grid:
        raise FieldError("grid mismatch between steady state and drift")
    vel = velocity_from_stream(steady.psi_e)
    rel = velocity_from_stream(steady.psi_e_star)
    vs = drift.velocity()
    mismatch = max(np.abs(rel.u_x.values + vs.u_x.values - vel.u_x.values).max(),
                   np.abs(rel.u_y.values + vs.u_y.values - vel.u_y.values).max())
    if mismatch > 1e-11 * max(1.0, np.abs(vel.u_x.values).max(), np.abs(vel.u_y.values).max()):
        raise StabilityError(f"perp_grad(psi_e_star) + V_s != perp_grad(psi_e): {mismatch:.3e}")
    prof = np.abs(steady.psi_e.values - steady.profile(steady.q_e.values)).max()
    if prof > PROFILE_TOL:
        raise StabilityError(f"psi_e != F(lap psi_e_star): sup error {prof:.3e}")
    if not 0 < steady.c1 <= steady.c2:
        raise StabilityError(f"need 0 < c1 <= c2, got c1={steady.c1}, c2={steady.c2}")
    res = steady_residual(steady, drift)
    if res > tol:
        raise StabilityError(f"steady residual {res:.3e} exceeds {tol:.1e}")


def steady_residual(steady: SteadyState, drift: StokesDrift) -> float:
    """L2 norm of ``J(psi_e, lap psi_e - lap phi_s)``."""
    if steady.grid != drift.grid:
        raise FieldError("grid mismatch between steady state and drift")
    q = laplacian(steady.psi_e) - drift.curl_cache
    return math.sqrt(l2_norm_sq(jacobian(steady.psi_e, q)))


def ratio_bounds(steady: SteadyState, drift: StokesDrift, threshold: float = 1e-3):
    """Essential bounds of ``grad psi_e / grad lap psi_e_star`` over points where
    ``|grad lap psi_e_star| > threshold * max``."""
    g_e = gradient(steady.psi_e)
    g_q = gradient(steady.q_e)
    gx, gy = g_q.u_x.values, g_q.u_y.values
    mag = np.hypot(gx, gy)
    admissible = mag > threshold * mag.max()
    if not admissible.any():
        raise StabilityError("ratio undefined everywhere: no admissible points")
    if steady.profile.kind == "linear":
        s = steady.profile.slope
        return s, s
    num = g_e.u_x.values * gx + g_e.u_y.values * gy
    ratio = num[admissible] / mag[admissible] ** 2
    return float(ratio.min()), float(ratio.max())


def _ratio_field(steady: SteadyState) -> np.ndarray:
    return np.asarray(steady.profile.derivative(steady.q_e.values), float)


def second_variation(steady: SteadyState, drift: StokesDrift, xi: VectorField2D) -> float:
    """``1/2 int |xi|^2 + F'(lap psi_e_star) (curl xi)^2 dA`` for solenoidal xi."""
    div = np.abs(divergence(xi).values).max()
    if div > 1e-9:
        raise StabilityError(f"variation field is not divergence-free (max |div| = {div:.3e})")
    w = curl(xi).values
    return 0.5 * (l2_norm_sq(xi) + float(np.sum(_ratio_field(steady) * w * w)) * xi.grid.cell_area)


def gamma_functional(psi: ScalarField2D, drift: StokesDrift, profile: ProfileF) -> float:
    _check_zero_mean(psi, "stream function")
    q = laplacian(psi - drift.phi_s)
    return 0.5 * _grad_sq(psi) + integrate_domain(q.map(profile.primitive))


def c_functional(psi_t: ScalarField2D, steady: SteadyState, drift: StokesDrift,
                 profile: ProfileF | None = None) -> float:
    _check_zero_mean(psi_t, "perturbation")
    profile = profile or steady.profile
    qe = steady.q_e.values
    dq = laplacian(psi_t).values
    P = profile.primitive
    remainder = P(qe + dq) - P(qe) - profile(qe) * dq
    return 0.5 * _grad_sq(psi_t) + float(np.sum(remainder)) * psi_t.grid.cell_area


def first_variation_gamma(steady: SteadyState, drift: StokesDrift, profile: ProfileF | None,
                          psi_t: ScalarField2D) -> float:
    _check_zero_mean(psi_t, "perturbation")
    profile = profile or steady.profile
    g_t, g_e = gradient(psi_t), gradient(steady.psi_e)
    dq = laplacian(psi_t).values
    term = float(np.sum(profile(steady.q_e.values) * dq)) * psi_t.grid.cell_area
    return l2_inner(g_t.u_x, g_e.u_x) + l2_inner(g_t.u_y, g_e.u_y) + term


def apriori_check(steady: SteadyState, drift: StokesDrift, psi_t0: ScalarField2D, dt: float,
                  t_end: float, monitor_stride: int = 50, tol: float = SATISFIED_RTOL) -> AprioriReport:
    """Evolve ``psi_e + psi_t0`` with the full nonlinear solver and compare
    ``|grad psi~|^2 + c1 |lap psi~|^2`` against its initial bound."""
    if not steady.c1 > 0:
        raise HypothesisViolation(f"c1 must be positive, got {steady.c1}")
    validate_steady(steady, drift)
    _check_zero_mean(psi_t0, "perturbation")
    profile = steady.profile
    c1, c2 = steady.c1, steady.c2

    def observe(state: FlowState):
        psi = state.stream()
        psi_t = psi - steady.psi_e
        return (state.t, _grad_sq(psi_t), l2_norm_sq(laplacian(psi_t)),
                c_functional(psi_t, steady, drift, profile),
                gamma_functional(psi, drift, profile))

    omega0 = laplacian(steady.psi_e + psi_t0)
    result = run(FlowState(omega0, 0.0), drift, dt, t_end, monitor_stride,
                 casimir_powers=(1, 2), observer=observe)
    times, grad_sq, lap_sq, cs, gammas = map(list, zip(*result.observations))
    lhs = [g + c1 * l for g, l in zip(grad_sq, lap_sq)]
    rhs = grad_sq[0] + c2 * lap_sq[0]
    two_c = [2.0 * c for c in cs]

    # per-time algebraic sandwich: lhs(t) <= 2C(t) and 2C(0) <= rhs
    scale = max(1.0, rhs)
    for t, l, tc in zip(times, lhs, two_c):
        if l > tc + SANDWICH_TOL * scale:
            raise AssertionError(f"lower sandwich bound fails at t={t}: {l!r} > 2C={tc!r}")
    if two_c[0] > rhs + SANDWICH_TOL * scale:
        raise AssertionError(f"upper sandwich bound fails: 2C(0)={two_c[0]!r} > rhs={rhs!r}")

    satisfied = max(lhs) <= rhs * (1.0 + tol)
    return AprioriReport(
        times=times, lhs=lhs, rhs=rhs,
        gamma_drift=_rel_drift(gammas), c_drift=_rel_drift(cs),
        satisfied=bool(satisfied), tol=tol, two_c=two_c, gamma=gammas,
        grad_sq=grad_sq, lap_sq=lap_sq, max_cfl=result.max_cfl,
    )


def write_apriori_csv(report: AprioriReport, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("t,lhs,two_c,gamma,grad_sq,lap_sq\n")
        for row in zip(report.times, report.lhs, report.two_c, report.gamma,
                       report.grad_sq, report.lap_sq):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
