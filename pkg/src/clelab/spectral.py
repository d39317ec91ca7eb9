"""Doubly periodic scalar fields on [0, 2pi)^2 with Fourier-spectral calculus.

Sign conventions used throughout the package:

* ``perp_grad(psi) = (-psi_y, psi_x)``
* ``curl(u) = d(u_y)/dx - d(u_x)/dy`` so that ``curl(perp_grad(psi)) = lap(psi)``
* ``J(f, g) = f_x g_y - f_y g_x`` so that ``perp_grad(psi) . grad(q) = J(psi, q)``

Samples are stored as ``values[i, j] = f(x_i, y_j)`` with ``x_i = 2 pi i / nx``.
"""
from __future__ import annotations

import functools
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "FieldError",
    "Grid2D",
    "ScalarField2D",
    "VectorField2D",
    "laplacian",
    "inv_laplacian",
    "jacobian",
    "velocity_from_stream",
    "divergence",
    "curl",
    "gradient",
    "integrate_domain",
    "l2_inner",
    "l2_inner_vec",
    "l2_norm_sq",
    "random_bandlimited",
    "read_field_csv",
    "write_field_csv",
    "read_field_clf2",
    "write_field_clf2",
]

TWO_PI = 2.0 * math.pi
CLF2_MAGIC = b"CLF2"


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
                raise FieldError(f"{name} must be an integer, got {n!r}")
            if n < 8 or n % 2:
                raise FieldError(f"{name} must be even and >= 8, got {n}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def area(self) -> float:
        return TWO_PI * TWO_PI

    @property
    def cell_area(self) -> float:
        return (TWO_PI / self.nx) * (TWO_PI / self.ny)

    @property
    def dx(self) -> float:
        return TWO_PI / self.nx

    @property
    def dy(self) -> float:
        return TWO_PI / self.ny

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.nx) * self.dx
        y = np.arange(self.ny) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    @property
    def ops(self) -> "_SpectralOps":
        return _spectral_ops(self.nx, self.ny)


class _SpectralOps:
    """Wavenumber tables for one grid (rfft2 layout, last axis halved)."""

    def __init__(self, nx: int, ny: int):
        kx = np.fft.fftfreq(nx, 1.0 / nx)[:, None]
        ky = np.fft.rfftfreq(ny, 1.0 / ny)[None, :]
        self.k2 = kx ** 2 + ky ** 2
        self.inv_k2 = np.zeros_like(self.k2)
        self.inv_k2[self.k2 > 0] = 1.0 / self.k2[self.k2 > 0]
        # Nyquist rows/cols have no odd-derivative partner
        self.ikx = 1j * np.where(np.abs(kx) == nx // 2, 0.0, kx) * np.ones_like(ky)
        self.iky = 1j * np.where(np.abs(ky) == ny // 2, 0.0, ky) * np.ones_like(kx)
        self.dealias = (3 * np.abs(kx) < nx) & (3 * np.abs(ky) < ny)
        self.shape = (nx, ny)
        for a in (self.k2, self.inv_k2, self.ikx, self.iky, self.dealias):
            a.setflags(write=False)

    def forward(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(values)

    def inverse(self, hat: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(hat, s=self.shape)

    def jacobian_hat(self, fh: np.ndarray, gh: np.ndarray) -> np.ndarray:
        inv = self.inverse
        prod = inv(self.ikx * fh) * inv(self.iky * gh) - inv(self.iky * fh) * inv(self.ikx * gh)
        out = self.forward(prod)
        out *= self.dealias
        return out


@functools.lru_cache(maxsize=32)
def _spectral_ops(nx: int, ny: int) -> _SpectralOps:
    return _SpectralOps(nx, ny)


class ScalarField2D:
    """Immutable real field.  Holds physical samples, spectral coefficients, or
    both; the missing representation is computed on first access."""

    __slots__ = ("grid", "_values", "_hat")

    def __init__(self, grid: Grid2D, values):
        values = np.array(values, dtype=float)
        if values.shape != grid.shape:
            raise FieldError(f"values shape {values.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise FieldError("field contains non-finite samples")
        values.setflags(write=False)
        self.grid = grid
        self._values = values
        self._hat = None

    @classmethod
    def from_spectral(cls, grid: Grid2D, hat) -> "ScalarField2D":
        hat = np.array(hat, dtype=complex)
        if hat.shape != (grid.nx, grid.ny // 2 + 1):
            raise FieldError(f"spectral shape {hat.shape} does not match grid {grid.shape}")
        hat.setflags(write=False)
        obj = cls.__new__(cls)
        obj.grid = grid
        obj._values = None
        obj._hat = hat
        return obj

    @classmethod
    def from_function(cls, grid: Grid2D, fn) -> "ScalarField2D":
        x, y = grid.coords()
        return cls(grid, np.broadcast_to(fn(x, y), grid.shape))

    @classmethod
    def zeros(cls, grid: Grid2D) -> "ScalarField2D":
        return cls.from_spectral(grid, np.zeros((grid.nx, grid.ny // 2 + 1), complex))

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            v = self.grid.ops.inverse(self._hat)
            if not np.all(np.isfinite(v)):
                raise FieldError("field contains non-finite samples")
            v.setflags(write=False)
            self._values = v
        return self._values

    @property
    def spectral(self) -> np.ndarray:
        if self._hat is None:
            h = self.grid.ops.forward(self._values)
            h.setflags(write=False)
            self._hat = h
        return self._hat

    def mean(self) -> float:
        return float(self.spectral[0, 0].real) / (self.grid.nx * self.grid.ny)

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    def _same_grid(self, other: "ScalarField2D") -> None:
        if other.grid != self.grid:
            raise FieldError(f"grid mismatch: {self.grid} vs {other.grid}")

    def _combine_spectral(self, other, op):
        if isinstance(other, ScalarField2D):
            self._same_grid(other)
            return ScalarField2D.from_spectral(self.grid, op(self.spectral, other.spectral))
        return NotImplemented

    def __add__(self, other):
        return self._combine_spectral(other, np.add)

    def __sub__(self, other):
        return self._combine_spectral(other, np.subtract)

    def __neg__(self):
        return ScalarField2D.from_spectral(self.grid, -self.spectral)

    def __mul__(self, other):
        if isinstance(other, ScalarField2D):
            self._same_grid(other)
            return ScalarField2D(self.grid, self.values * other.values)
        if np.isscalar(other):
            return ScalarField2D.from_spectral(self.grid, self.spectral * float(other))
        return NotImplemented

    __rmul__ = __mul__

    def map(self, fn) -> "ScalarField2D":
        """Pointwise ``fn(values)``."""
        return ScalarField2D(self.grid, fn(self.values))

    def __repr__(self):
        return f"ScalarField2D({self.grid.nx}x{self.grid.ny}, max|f|={self.max_abs():.3g})"


@dataclass(frozen=True, eq=False)
class VectorField2D:
    u_x: ScalarField2D
    u_y: ScalarField2D

    def __post_init__(self):
        self.u_x._same_grid(self.u_y)

    @property
    def grid(self) -> Grid2D:
        return self.u_x.grid


def _spectral_op(f: ScalarField2D, symbol) -> ScalarField2D:
    return ScalarField2D.from_spectral(f.grid, f.spectral * symbol)


def laplacian(f: ScalarField2D) -> ScalarField2D:
    return _spectral_op(f, -f.grid.ops.k2)


def _check_zero_mean(f: ScalarField2D, what: str = "field", rtol: float = 1e-12) -> None:
    mean = f.mean()
    if abs(mean) > rtol * f.max_abs():
        raise FieldError(f"{what} has nonzero mean {mean:.3e}")


def inv_laplacian(f: ScalarField2D) -> ScalarField2D:
    """Zero-mean solution ``g`` of ``lap(g) = f``; ``f`` must have zero mean."""
    _check_zero_mean(f)
    return _spectral_op(f, -f.grid.ops.inv_k2)


def gradient(f: ScalarField2D) -> VectorField2D:
    ops = f.grid.ops
    return VectorField2D(_spectral_op(f, ops.ikx), _spectral_op(f, ops.iky))


def jacobian(f: ScalarField2D, g: ScalarField2D) -> ScalarField2D:
    """Dealiased ``f_x g_y - f_y g_x`` (2/3 rule)."""
    f._same_grid(g)
    return ScalarField2D.from_spectral(f.grid, f.grid.ops.jacobian_hat(f.spectral, g.spectral))


def velocity_from_stream(psi: ScalarField2D) -> VectorField2D:
    ops = psi.grid.ops
    return VectorField2D(_spectral_op(psi, -ops.iky), _spectral_op(psi, ops.ikx))


def divergence(u: VectorField2D) -> ScalarField2D:
    ops = u.grid.ops
    return ScalarField2D.from_spectral(u.grid, ops.ikx * u.u_x.spectral + ops.iky * u.u_y.spectral)


def curl(u: VectorField2D) -> ScalarField2D:
    ops = u.grid.ops
    return ScalarField2D.from_spectral(u.grid, ops.ikx * u.u_y.spectral - ops.iky * u.u_x.spectral)


def integrate_domain(f: ScalarField2D) -> float:
    return f.mean() * f.grid.area


def l2_inner(f: ScalarField2D, g: ScalarField2D) -> float:
    f._same_grid(g)
    return float(np.vdot(f.values, g.values)) * f.grid.cell_area


def l2_inner_vec(u: VectorField2D, w: VectorField2D) -> float:
    return l2_inner(u.u_x, w.u_x) + l2_inner(u.u_y, w.u_y)


def l2_norm_sq(f) -> float:
    if isinstance(f, VectorField2D):
        return l2_inner_vec(f, f)
    return l2_inner(f, f)


def random_bandlimited(grid: Grid2D, rng: np.random.Generator, kmax: int,
                       norm: float | None = None) -> ScalarField2D:
    """Zero-mean random field with Fourier support in ``max(|kx|, |ky|) <= kmax``.

    If ``norm`` is given the field is scaled so that its L2 norm squared equals it.
    """
    if not 1 <= kmax < min(grid.nx, grid.ny) // 3:
        raise FieldError(f"kmax={kmax} outside the dealiased band of {grid}")
    hat = np.fft.rfft2(rng.standard_normal(grid.shape))
    kx = np.fft.fftfreq(grid.nx, 1.0 / grid.nx)[:, None]
    ky = np.fft.rfftfreq(grid.ny, 1.0 / grid.ny)[None, :]
    hat[(np.abs(kx) > kmax) | (ky > kmax)] = 0.0
    hat[0, 0] = 0.0
    f = ScalarField2D.from_spectral(grid, hat)
    if norm is not None:
        f = f * math.sqrt(norm / l2_norm_sq(f))
    return f


# --- file formats -------------------------------------------------------------

def write_field_csv(f: ScalarField2D, path) -> None:
    """Two header lines ``nx,<nx>`` and ``ny,<ny>`` then ``nx`` rows of ``ny``
    samples (row index = x index)."""
    with open(path, "w", newline="") as fh:
        fh.write(f"nx,{f.grid.nx}\nny,{f.grid.ny}\n")
        for row in f.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_field_csv(path) -> ScalarField2D:
    lines = Path(path).read_text().splitlines()
    try:
        key_x, nx = lines[0].split(",")
        key_y, ny = lines[1].split(",")
        if (key_x.strip(), key_y.strip()) != ("nx", "ny"):
            raise ValueError
        grid = Grid2D(int(nx), int(ny))
        rows = [[float(v) for v in line.split(",")] for line in lines[2:] if line.strip()]
    except (ValueError, IndexError):
        raise FieldError(f"{path}: malformed field CSV") from None
    return ScalarField2D(grid, np.array(rows))


def write_field_clf2(f: ScalarField2D, path) -> None:
    """Little-endian: magic ``CLF2``, u32 nx, u32 ny, nx*ny f64 samples row-major."""
    with open(path, "wb") as fh:
        fh.write(CLF2_MAGIC + struct.pack("<II", f.grid.nx, f.grid.ny))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_field_clf2(path) -> ScalarField2D:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != CLF2_MAGIC:
        raise FieldError(f"{path}: not a CLF2 file")
    nx, ny = struct.unpack("<II", data[4:12])
    grid = Grid2D(nx, ny)
    body = data[12:]
    if len(body) != 8 * nx * ny:
        raise FieldError(f"{path}: expected {8 * nx * ny} sample bytes, found {len(body)}")
    return ScalarField2D(grid, np.frombuffer(body, dtype="<f8").reshape(nx, ny))
