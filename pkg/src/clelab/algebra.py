"""Finite-dimensional Lie algebras, their shifted central extensions and the
extended Euler dynamics.

Conventions
-----------
Vectors are coordinate arrays in the basis ``e_0 .. e_{dim-1}``.  Two pairings
are used:

* the *dual* pairing of a covector ``m`` with a vector ``y`` is the plain dot
  product ``m @ y`` (used by :func:`coadjoint` and the dual formulation);
* the *metric* on the algebra is ``<x, y> = x @ I @ y`` with ``I`` the inertia
  matrix.  It identifies the algebra with its dual (``m = I v``) and is the
  pairing behind :func:`b_operator`, :func:`w_operator`, :func:`test_form` and
  the kinetic energy ``H = <v, v> / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable

import numpy as np
import scipy.linalg

__all__ = [
    "AlgebraError",
    "NotAnEquilibriumError",
    "LieAlgebraSpec",
    "ExtendedVector",
    "ShiftedCocycleSpec",
    "DefinitenessReport",
    "Trajectory",
    "bracket",
    "coadjoint",
    "shifted_cocycle",
    "cocycle_identity_residual",
    "extended_bracket",
    "b_operator",
    "w_operator",
    "extended_euler_rhs",
    "dual_euler_rhs",
    "equilibrium_residual",
    "test_form",
    "definiteness_report",
    "orbit_first_variation",
    "integrate_extended",
    "energy",
    "jacobi_residual",
    "make_so3",
    "make_sine_algebra",
    "algebra_to_dict",
    "algebra_from_dict",
    "save_algebra",
    "load_algebra",
    "write_trajectory_csv",
    "identity_sweep",
]

EQUILIBRIUM_TOL = 1e-10


class AlgebraError(ValueError):
    """Contract violation (bad dimensions, invalid structure constants...)."""


class NotAnEquilibriumError(AlgebraError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LieAlgebraSpec:
    """Structure constants ``c[i, j, k]`` with ``[e_i, e_j] = sum_k c[i, j, k] e_k``
    together with an SPD inertia matrix."""

    structure_constants: np.ndarray
    inertia: np.ndarray
    name: str = "custom"
    jacobi_tol: float = 1e-12

    def __post_init__(self):
        c = _frozen(self.structure_constants)
        dim = c.shape[0]
        if c.ndim != 3 or c.shape != (dim, dim, dim) or dim < 1:
            raise AlgebraError(f"structure constants must have shape (n, n, n), got {c.shape}")
        inertia = _frozen(self.inertia)
        if inertia.shape != (dim, dim):
            raise AlgebraError(f"inertia must be {dim}x{dim}, got {inertia.shape}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(inertia))):
            raise AlgebraError("non-finite entries")
        if not np.array_equal(c, -c.transpose(1, 0, 2)):
            raise AlgebraError("structure constants are not antisymmetric in (i, j)")
        if not np.allclose(inertia, inertia.T, rtol=0, atol=1e-14 * max(1.0, np.abs(inertia).max())):
            raise AlgebraError("inertia is not symmetric")
        if np.linalg.eigvalsh(inertia).min() <= 0:
            raise AlgebraError("inertia is not positive definite")
        object.__setattr__(self, "structure_constants", c)
        object.__setattr__(self, "inertia", inertia)
        res = jacobi_residual(self)
        if res > self.jacobi_tol:
            raise AlgebraError(f"Jacobi identity fails: residual {res:.3e} > {self.jacobi_tol:.1e}")

    @property
    def dim(self) -> int:
        return self.structure_constants.shape[0]

    def metric(self, x, y) -> float:
        """Inner product ``<x, y> = x . I y``."""
        return float(self._vec(x) @ self.inertia @ self._vec(y))

    def to_dual(self, v) -> np.ndarray:
        return self.inertia @ self._vec(v)

    def from_dual(self, m) -> np.ndarray:
        return np.linalg.solve(self.inertia, self._vec(m))

    def _vec(self, x, name: str = "vector") -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise AlgebraError(f"{name} has shape {x.shape}, expected ({self.dim},)")
        return x


@dataclass(frozen=True, eq=False)
class ExtendedVector:
    """Element ``(v, a)`` of the central extension (or of its dual, read as
    ``(m, a)``)."""

    v: np.ndarray
    a: float = 0.0

    def __post_init__(self):
        v = _frozen(self.v)
        if v.ndim != 1:
            raise AlgebraError("ExtendedVector.v must be one-dimensional")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "a", float(self.a))

    def as_array(self) -> np.ndarray:
        return np.append(self.v, self.a)


@dataclass(frozen=True, eq=False)
class ShiftedCocycleSpec:
    v_s: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v_s", _frozen(self.v_s))


@dataclass(frozen=True)
class DefinitenessReport:
    subspace_dim: int
    eigenvalues: tuple[float, ...]
    verdict: str

    VERDICTS = ("positive-definite", "negative-definite", "indefinite", "degenerate")


def _check_shift(alg: LieAlgebraSpec, spec: ShiftedCocycleSpec) -> np.ndarray:
    return alg._vec(spec.v_s, "v_s")


def _check_state(alg: LieAlgebraSpec, state: ExtendedVector) -> np.ndarray:
    return alg._vec(state.v, "state.v")


# --- brackets and cocycles -------------------------------------------------

def bracket(alg: LieAlgebraSpec, x, y) -> np.ndarray:
    x, y = alg._vec(x, "x"), alg._vec(y, "y")
    return np.einsum("i,j,ijk->k", x, y, alg.structure_constants)


def coadjoint(alg: LieAlgebraSpec, x, m) -> np.ndarray:
    """``ad*_x m`` defined by ``(ad*_x m) . y = m . [x, y]`` for all ``y``."""
    x, m = alg._vec(x, "x"), alg._vec(m, "m")
    return np.einsum("i,ijk,k->j", x, alg.structure_constants, m)


def shifted_cocycle(alg: LieAlgebraSpec, spec: ShiftedCocycleSpec, x, y) -> float:
    """``omega(x, y) = -<I V_s, [x, y]>``, a coboundary."""
    return -float(alg.to_dual(_check_shift(alg, spec)) @ bracket(alg, x, y))


def cocycle_identity_residual(alg, spec, x, y, z) -> float:
    w = lambda p, q: shifted_cocycle(alg, spec, p, q)
    return (w(bracket(alg, x, y), z) + w(bracket(alg, y, z), x)
            + w(bracket(alg, z, x), y))


def extended_bracket(alg, spec, p: ExtendedVector, q: ExtendedVector) -> ExtendedVector:
    return ExtendedVector(bracket(alg, p.v, q.v), shifted_cocycle(alg, spec, p.v, q.v))


def jacobi_residual(alg: LieAlgebraSpec, triples: Iterable | None = None) -> float:
    """Max |[x,[y,z]] + [y,[z,x]] + [z,[x,y]]|.  Without ``triples`` every basis
    triple is checked in one vectorised pass."""
    c = alg.structure_constants
    if triples is None:
        nnz_per_pair = np.count_nonzero(c, axis=2)
        if nnz_per_pair.max(initial=0) <= 1:
            return _jacobi_monomial(c)
        return _jacobi_dense(c)
    worst = 0.0
    for x, y, z in triples:
        r = (bracket(alg, x, bracket(alg, y, z)) + bracket(alg, y, bracket(alg, z, x))
             + bracket(alg, z, bracket(alg, x, y)))
        worst = max(worst, float(np.abs(r).max()))
    return worst


def _jacobi_dense(c: np.ndarray) -> float:
    # J[i,j,l,m] = sum_k c[j,l,k] c[i,k,m] + cyclic(i,j,l), one i-slab at a time
    worst = 0.0
    for i in range(c.shape[0]):
        jac = (np.einsum("jlk,km->jlm", c, c[i])
               + np.einsum("lk,jkm->jlm", c[:, i, :], c)
               + np.einsum("jk,lkm->jlm", c[i], c))
        worst = max(worst, float(np.abs(jac).max()))
    return worst


def _jacobi_monomial(c: np.ndarray) -> float:
    """Jacobi check when every basis bracket is a multiple of one basis vector."""
    dim = c.shape[0]
    tgt = np.abs(c).argmax(axis=2)
    coef = np.take_along_axis(c, tgt[..., None], axis=2)[..., 0]
    jj, ll = np.meshgrid(np.arange(dim), np.arange(dim), indexing="ij")
    worst = 0.0
    for i in range(dim):
        # [e_i, [e_j, e_l]], [e_j, [e_l, e_i]], [e_l, [e_i, e_j]]
        t1, v1 = tgt[i, tgt[jj, ll]], coef[jj, ll] * coef[i, tgt[jj, ll]]
        t2, v2 = tgt[jj, tgt[ll, i]], coef[ll, i] * coef[jj, tgt[ll, i]]
        t3, v3 = tgt[ll, tgt[i, jj]], coef[i, jj] * coef[ll, tgt[i, jj]]
        r1 = v1 + np.where(t2 == t1, v2, 0.0) + np.where(t3 == t1, v3, 0.0)
        r2 = np.where(t2 == t1, 0.0, v2 + np.where(t3 == t2, v3, 0.0))
        r3 = np.where((t3 == t1) | (t3 == t2), 0.0, v3)
        worst = max(worst, float(np.abs(r1).max()), float(np.abs(r2).max()),
                    float(np.abs(r3).max()))
    return worst


# --- operators induced by the metric ---------------------------------------

def b_operator(alg: LieAlgebraSpec, v3, v1) -> np.ndarray:
    """Unique ``B(v3, v1)`` with ``<[v1, v2], v3> = <B(v3, v1), v2>`` for all v2."""
    v3, v1 = alg._vec(v3, "v3"), alg._vec(v1, "v1")
    # functional v2 -> (I v3) . [v1, v2] has coordinates ad*_{v1}(I v3)
    return alg.from_dual(coadjoint(alg, v1, alg.to_dual(v3)))


def w_operator(alg: LieAlgebraSpec, spec: ShiftedCocycleSpec, u) -> np.ndarray:
    """Unique ``w(u)`` with ``<w(u), v> = omega(u, v)`` for all v."""
    u = alg._vec(u, "u")
    return -alg.from_dual(coadjoint(alg, u, alg.to_dual(_check_shift(alg, spec))))


def extended_euler_rhs(alg, spec, state: ExtendedVector) -> ExtendedVector:
    v = _check_state(alg, state)
    return ExtendedVector(b_operator(alg, v, v) + state.a * w_operator(alg, spec, v), 0.0)


def dual_euler_rhs(alg, spec, state: ExtendedVector) -> ExtendedVector:
    """Euler equation on the dual of the extension, ``state = (m, a)``.

    ``dm/dt = ad*_{I^-1 m} (m - a I V_s)``; with ``m = I v`` this is ``I`` times
    :func:`extended_euler_rhs` (and the classical ``M x Omega`` on so(3)).
    """
    m = _check_state(alg, state)
    shifted = m - state.a * alg.to_dual(_check_shift(alg, spec))
    return ExtendedVector(coadjoint(alg, alg.from_dual(m), shifted), 0.0)


def equilibrium_residual(alg, spec, state: ExtendedVector) -> float:
    return float(np.linalg.norm(extended_euler_rhs(alg, spec, state).v))


def energy(alg: LieAlgebraSpec, v) -> float:
    return 0.5 * alg.metric(v, v)


# --- stability ---------------------------------------------------------------

def _require_equilibrium(alg, spec, eq: ExtendedVector, tol: float) -> None:
    res = equilibrium_residual(alg, spec, eq)
    if not res < tol:
        raise NotAnEquilibriumError(
            f"state is not an equilibrium: residual {res:.3e} >= tol {tol:.1e}")


def _xi_map(alg, spec, eq: ExtendedVector) -> np.ndarray:
    """Matrix of zeta -> B(v_e, zeta) + a_e w(zeta)."""
    basis = np.eye(alg.dim)
    cols = [b_operator(alg, eq.v, e) + eq.a * w_operator(alg, spec, e) for e in basis]
    return np.array(cols).T


def test_form(alg, spec, eq: ExtendedVector, zeta, tol: float = EQUILIBRIUM_TOL):
    """Return ``(xi, T)`` with ``xi = B(v_e, zeta) + a_e w(zeta)`` and
    ``T = <xi, xi> + <[zeta, v_e], xi>``."""
    _check_state(alg, eq)
    zeta = alg._vec(zeta, "zeta")
    _require_equilibrium(alg, spec, eq, tol)
    xi = b_operator(alg, eq.v, zeta) + eq.a * w_operator(alg, spec, zeta)
    t_value = alg.metric(xi, xi) + alg.metric(bracket(alg, zeta, eq.v), xi)
    return xi, t_value


test_form.__test__ = False  # not a pytest test


def definiteness_report(alg, spec, eq: ExtendedVector, tol: float = EQUILIBRIUM_TOL,
                        rank_rtol: float = 1e-10) -> DefinitenessReport:
    """Sign analysis of the test form on the image of ``zeta -> xi``.

    T only depends on xi at an equilibrium, so every xi is evaluated at its
    least-squares preimage.  Eigenvalues are taken relative to the inertia
    metric restricted to the image, after symmetrising the form.
    """
    _check_state(alg, eq)
    _require_equilibrium(alg, spec, eq, tol)
    L = _xi_map(alg, spec, eq)
    u, s, _ = np.linalg.svd(L)
    scale = max(s.max(initial=0.0), np.abs(eq.v).max(initial=0.0), abs(eq.a), 1.0)
    rank = int(np.sum(s > rank_rtol * scale))
    if rank == 0:
        return DefinitenessReport(0, (), "degenerate")
    Q = u[:, :rank]
    # [zeta, v_e] = -ad_{v_e} zeta
    ad_ve = np.einsum("i,jik->kj", eq.v, alg.structure_constants)  # zeta -> [zeta, v_e]
    G = alg.inertia
    form = G + (ad_ve @ np.linalg.pinv(L, rcond=rank_rtol)).T @ G
    A = Q.T @ form @ Q
    A = 0.5 * (A + A.T)
    eig = scipy.linalg.eigh(A, Q.T @ G @ Q, eigvals_only=True)
    eig_tol = 1e-9 * max(1.0, np.abs(eig).max())
    if np.all(eig > eig_tol):
        verdict = "positive-definite"
    elif np.all(eig < -eig_tol):
        verdict = "negative-definite"
    elif np.any(np.abs(eig) <= eig_tol):
        verdict = "degenerate"
    else:
        verdict = "indefinite"
    return DefinitenessReport(rank, tuple(float(e) for e in eig), verdict)


def orbit_first_variation(alg, spec, state: ExtendedVector, direction: ExtendedVector) -> float:
    """Variation of the kinetic energy along the adjoint action of ``direction``:
    ``<(v, a), [(u, b), (v, a)]^>`` with ``<(x, al), (y, be)> = <x, y> + al*be``."""
    _check_state(alg, state)
    alg._vec(direction.v, "direction.v")
    d = extended_bracket(alg, spec, direction, state)
    return alg.metric(state.v, d.v) + state.a * d.a


# --- integration -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: list = field(repr=False)
    energies: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.states)

    @property
    def vs(self) -> np.ndarray:
        return np.array([s.v for s in self.states])


def integrate_extended(alg, spec, state0: ExtendedVector, dt: float, steps: int) -> Trajectory:
    """Classical RK4 for the extended Euler equation.  The central coordinate
    is a constant of motion and is never updated."""
    if not dt > 0:
        raise AlgebraError(f"dt must be positive, got {dt}")
    if steps < 0:
        raise AlgebraError(f"steps must be >= 0, got {steps}")
    v = _check_state(alg, state0).copy()
    a = state0.a
    # rhs(v) = I^-1 ad*_v (I (v - a V_s)) in matrix form
    c = alg.structure_constants
    inv_inertia = np.linalg.inv(alg.inertia)
    shift = a * _check_shift(alg, spec)
    G = alg.inertia

    def rhs(x):
        return inv_inertia @ np.einsum("i,ijk,k->j", x, c, G @ (x - shift))

    states = [state0]
    energies = [energy(alg, v)]
    for n in range(steps):
        k1 = rhs(v)
        k2 = rhs(v + 0.5 * dt * k1)
        k3 = rhs(v + 0.5 * dt * k2)
        k4 = rhs(v + dt * k3)
        v = v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(v)):
            raise FloatingPointError(f"non-finite state at step {n + 1}")
        states.append(ExtendedVector(v, a))
        energies.append(0.5 * float(v @ G @ v))
    times = _frozen(np.arange(steps + 1) * dt)
    return Trajectory(times, states, _frozen(energies))


def write_trajectory_csv(traj: Trajectory, path) -> None:
    dim = len(traj.states[0].v)
    header = ["t"] + [f"v_{i + 1}" for i in range(dim)] + ["a", "H"]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for t, s, h in zip(traj.times, traj.states, traj.energies):
            row = [t, *s.v, s.a, h]
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


# --- generators --------------------------------------------------------------

def make_so3(inertia=None) -> LieAlgebraSpec:
    c = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        c[i, j, k] = 1.0
        c[j, i, k] = -1.0
    return LieAlgebraSpec(c, np.eye(3) if inertia is None else inertia, name="so3")


def sine_modes(n: int) -> list[tuple[int, int]]:
    return [m for m in product(range(n), repeat=2) if m != (0, 0)]


def make_sine_algebra(n: int, inertia: str | np.ndarray = "identity") -> LieAlgebraSpec:
    """Sine-bracket truncation on nonzero modes of (Z/nZ)^2:
    ``[e_m, e_k] = (n / 2pi) sin(2pi (m x k) / n) e_{m+k}``.

    ``inertia`` is a matrix, ``"identity"`` or ``"laplacian"`` (diag |m|^2 with
    centred mode representatives).
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n % 2 == 0 or not 3 <= n <= 15:
        raise AlgebraError(f"sine algebra needs odd n in [3, 15], got {n!r}")
    n = int(n)
    modes = sine_modes(n)
    index = {m: i for i, m in enumerate(modes)}
    dim = len(modes)
    c = np.zeros((dim, dim, dim))
    for (i, m), (j, k) in product(enumerate(modes), repeat=2):
        s = (m[0] + k[0]) % n, (m[1] + k[1]) % n
        if s == (0, 0):
            continue
        cross = (m[0] * k[1] - m[1] * k[0]) % n
        c[i, j, index[s]] = n / (2 * math.pi) * math.sin(2 * math.pi * cross / n)
    # enforce exact antisymmetry against sin rounding
    c = 0.5 * (c - c.transpose(1, 0, 2))
    if isinstance(inertia, str):
        if inertia == "identity":
            inertia = np.eye(dim)
        elif inertia == "laplacian":
            centred = lambda q: q - n if q > n // 2 else q
            inertia = np.diag([centred(a) ** 2 + centred(b) ** 2 for a, b in modes]).astype(float)
        else:
            raise AlgebraError(f"unknown inertia preset {inertia!r}")
    return LieAlgebraSpec(c, inertia, name=f"sine{n}", jacobi_tol=1e-10)


# --- serialization ------------------------------------------------------------

def algebra_to_dict(alg: LieAlgebraSpec, spec: ShiftedCocycleSpec | None = None) -> dict:
    out = {
        "algebra": {
            "name": alg.name,
            "dim": alg.dim,
            "structure_constants": [float(x) for x in alg.structure_constants.ravel()],
            "inertia": [float(x) for x in alg.inertia.ravel()],
        }
    }
    if spec is not None:
        out["algebra"]["v_s"] = [float(x) for x in spec.v_s]
    return out


def algebra_from_dict(data: dict) -> tuple[LieAlgebraSpec, ShiftedCocycleSpec | None]:
    d = data.get("algebra", data)
    allowed = {"name", "dim", "structure_constants", "inertia", "v_s"}
    unknown = set(d) - allowed
    if unknown:
        raise AlgebraError(f"unknown algebra keys: {sorted(unknown)}")
    try:
        dim = int(d["dim"])
        c = np.asarray(d["structure_constants"], dtype=float)
        inertia = np.asarray(d["inertia"], dtype=float)
    except KeyError as exc:
        raise AlgebraError(f"missing algebra key {exc.args[0]!r}") from None
    if c.size != dim ** 3:
        raise AlgebraError(f"structure_constants has {c.size} entries, expected {dim ** 3}")
    if inertia.size != dim * dim:
        raise AlgebraError(f"inertia has {inertia.size} entries, expected {dim * dim}")
    alg = LieAlgebraSpec(c.reshape(dim, dim, dim), inertia.reshape(dim, dim),
                         name=str(d.get("name", "custom")), jacobi_tol=1e-10)
    spec = None
    if "v_s" in d:
        spec = ShiftedCocycleSpec(np.asarray(d["v_s"], dtype=float))
        _check_shift(alg, spec)
    return alg, spec


def save_algebra(path, alg: LieAlgebraSpec, spec: ShiftedCocycleSpec | None = None) -> None:
    import tomli_w

    with open(path, "wb") as fh:
        tomli_w.dump(algebra_to_dict(alg, spec), fh)


def load_algebra(path):
    from .config import load_toml

    return algebra_from_dict(load_toml(path))


def identity_sweep(alg: LieAlgebraSpec, spec: ShiftedCocycleSpec, rng: np.random.Generator,
                   samples: int = 200) -> dict:
    """Worst residuals of the defining identities over random triples
    ``(x, y, z)`` and random central coordinates."""
    X, Y, Z = (rng.standard_normal((samples, alg.dim)) for _ in range(3))
    A = rng.standard_normal(samples)
    G = alg.inertia
    ivs = alg.to_dual(spec.v_s)
    out = dict.fromkeys(("jacobi", "cocycle", "coboundary", "b_identity", "w_identity",
                         "formulation"), 0.0)
    for x, y, z, a in zip(X, Y, Z, A):
        xy = bracket(alg, x, y)
        omega = shifted_cocycle(alg, spec, x, y)
        ext = extended_euler_rhs(alg, spec, ExtendedVector(x, a))
        dual = dual_euler_rhs(alg, spec, ExtendedVector(G @ x, a))
        vals = {
            "jacobi": jacobi_residual(alg, [(x, y, z)]),
            "cocycle": abs(cocycle_identity_residual(alg, spec, x, y, z)),
            "coboundary": abs(omega + ivs @ xy),
            "b_identity": abs(alg.metric(xy, z) - alg.metric(b_operator(alg, z, x), y)),
            "w_identity": abs(omega - alg.metric(w_operator(alg, spec, x), y)),
            "formulation": float(np.abs(dual.v - G @ ext.v).max()),
        }
        for k, v in vals.items():
            out[k] = max(out[k], float(v))
    return out
