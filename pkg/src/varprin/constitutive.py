"""Complex constitutive algebra.

A constitutive operator ``Z`` maps the field ``(F, f)`` (gradient-like block
``F`` with ``m*d`` entries and value block ``f`` with ``m`` entries) to the
flux ``(G, g)``. It is stored as a dense complex symmetric matrix of size
``m*(d+1)``, one per cell, with the gradient components first. The blocks
``L``, ``K`` and ``M`` are views into that matrix.

The convexified operator ``calL`` turns the complex law ``G = Z F`` into a
real positive definite relation between mixed real/imaginary parts::

    (G'', F'') = calL (F', -G')
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CoercivityError,
    DimensionError,
    InfeasibleRotationError,
    ValidationError,
)

__all__ = [
    "BlockZ",
    "CoercivityReport",
    "RotationParams",
    "ConvexBlock",
    "split",
    "check_coercivity",
    "default_alpha",
    "rotate",
    "min_imag_eig",
    "select_theta",
    "build_calL",
    "calL_inverse",
    "build_calE",
]


@dataclass(frozen=True)
class BlockZ:
    """Per-cell complex symmetric constitutive matrices.

    Parameters
    ----------
    Z : ndarray, shape (ncell, k, k) or (k, k)
        Complex symmetric matrices with ``k = m*(d+1)``. A single matrix is
        promoted to a batch of one.
    m, d : int
        Potential components and spatial dimension.
    """

    Z: np.ndarray
    m: int
    d: int

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=complex)
        if Z.ndim == 2:
            Z = Z[None]
        k = self.m * (self.d + 1)
        if self.m < 1 or self.d < 1:
            raise DimensionError("m and d must be positive")
        if Z.ndim != 3 or Z.shape[1:] != (k, k):
            raise DimensionError(
                f"Z has shape {np.shape(self.Z)}, expected (ncell, {k}, {k}) for m={self.m}, d={self.d}"
            )
        object.__setattr__(self, "Z", Z)

    @property
    def size(self) -> int:
        return self.m * (self.d + 1)

    @property
    def ncell(self) -> int:
        return self.Z.shape[0]

    @property
    def L(self) -> np.ndarray:
        md = self.m * self.d
        return self.Z[:, :md, :md]

    @property
    def K(self) -> np.ndarray:
        md = self.m * self.d
        return self.Z[:, :md, md:]

    @property
    def M(self) -> np.ndarray:
        md = self.m * self.d
        return self.Z[:, md:, md:]

    def symmetry_defect(self) -> float:
        """Largest ``|Z - Z^T|`` entry relative to the largest ``|Z|`` entry."""
        scale = max(np.abs(self.Z).max(initial=0.0), np.finfo(float).tiny)
        return float(np.abs(self.Z - np.swapaxes(self.Z, 1, 2)).max(initial=0.0) / scale)

    def restrict(self, components) -> np.ndarray:
        """Sub-block on the given component indices (for constrained subspaces)."""
        idx = np.asarray(components, dtype=int)
        return self.Z[:, idx[:, None], idx[None, :]]


@dataclass(frozen=True)
class CoercivityReport:
    min_eig: float
    alpha: float
    passing: bool
    worst_cell: int


@dataclass(frozen=True)
class RotationParams:
    theta: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.theta) and np.isfinite(self.tau)):
            raise ValidationError("rotation parameters must be finite")


@dataclass(frozen=True)
class ConvexBlock:
    """``calL`` and its inverse, batched over cells (shape (ncell, 2k, 2k))."""

    calL: np.ndarray
    calL_inv: np.ndarray


def _as_batch(Z) -> np.ndarray:
    if isinstance(Z, BlockZ):
        return Z.Z
    Z = np.asarray(Z, dtype=complex)
    if Z.ndim == 0:
        Z = Z.reshape(1, 1, 1)
    elif Z.ndim == 2:
        Z = Z[None]
    if Z.ndim != 3 or Z.shape[1] != Z.shape[2]:
        raise DimensionError(f"expected square matrices, got shape {Z.shape}")
    return Z


def split(Z):
    """Real and imaginary parts ``(Z', Z'')`` of a constitutive batch."""
    Zb = _as_batch(Z)
    return Zb.real.copy(), Zb.imag.copy()


def default_alpha(Z) -> float:
    """Scale-relative coercivity floor: ``1e-10`` times the largest ``|Z|`` entry."""
    Zb = _as_batch(Z)
    return 1e-10 * float(np.abs(Zb).max(initial=0.0))


def check_coercivity(Z_imag, alpha: float) -> CoercivityReport:
    """Smallest eigenvalue of ``Z''`` over all cells against the floor ``alpha``."""
    if not alpha > 0:
        raise ValidationError(f"alpha must be positive, got {alpha}")
    Zi = np.asarray(Z_imag, dtype=float)
    if Zi.ndim == 2:
        Zi = Zi[None]
    if Zi.shape[0] == 0:
        raise ValidationError("no cells to check")
    eigs = np.linalg.eigvalsh(0.5 * (Zi + np.swapaxes(Zi, 1, 2)))[:, 0]
    worst = int(np.argmin(eigs))
    min_eig = float(eigs[worst])
    return CoercivityReport(min_eig=min_eig, alpha=float(alpha), passing=min_eig >= alpha, worst_cell=worst)


def rotate(Z, theta: float):
    """Multiply ``Z`` by ``exp(i theta)``; returns the same container type."""
    phase = np.exp(1j * theta)
    if isinstance(Z, BlockZ):
        return BlockZ(phase * Z.Z, Z.m, Z.d)
    return phase * np.asarray(Z, dtype=complex)


def min_imag_eig(Z, theta: float = 0.0) -> float:
    """``min over cells of lambda_min(Im(exp(i theta) Z))``."""
    Zb = _as_batch(Z)
    Zi = (np.exp(1j * theta) * Zb).imag
    return float(np.linalg.eigvalsh(0.5 * (Zi + np.swapaxes(Zi, 1, 2)))[:, 0].min())


def _golden_max(f, a, b, tol):
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def select_theta(Z, step: float = 1e-2, tol: float = 1e-8) -> float:
    """Rotation angle maximising the coercivity margin of ``exp(i theta) Z``.

    A coarse scan over ``(-pi, pi)`` picks the best grid point, then a
    golden-section search refines inside the neighbouring bracket.

    Raises
    ------
    InfeasibleRotationError
        If no angle gives a positive definite imaginary part.
    """
    Zb = _as_batch(Z)
    n = int(np.ceil(2 * np.pi / step))
    grid = -np.pi + step * (np.arange(n) + 0.5)
    # batch the scan: eigenvalues of Im(e^{i t} Z) = sin(t) Z' + cos(t) Z''
    Zr, Zi = Zb.real, Zb.imag
    Zr = 0.5 * (Zr + np.swapaxes(Zr, 1, 2))
    Zi = 0.5 * (Zi + np.swapaxes(Zi, 1, 2))
    vals = np.empty(n)
    for k, t in enumerate(grid):
        vals[k] = np.linalg.eigvalsh(np.sin(t) * Zr + np.cos(t) * Zi)[:, 0].min()
    best = int(np.argmax(vals))
    f = lambda t: min_imag_eig(Zb, t)
    theta = _golden_max(f, grid[best] - step, grid[best] + step, tol)
    if f(grid[best]) > f(theta):
        theta = float(grid[best])
    margin = f(theta)
    if not margin > 0:
        raise InfeasibleRotationError(
            f"no rotation makes the imaginary part positive definite (best margin {margin:.3e})"
        )
    # wrap into (-pi, pi]
    return float(np.angle(np.exp(1j * theta)))


def build_calL(Z) -> ConvexBlock:
    """Convexified operator ``calL`` (and its inverse) for each cell.

    ``calL = [[Z'' + Z'(Z'')^-1 Z', Z'(Z'')^-1], [(Z'')^-1 Z', (Z'')^-1]]``
    """
    Zb = _as_batch(Z)
    Zr, Zi = Zb.real, Zb.imag
    eigs = np.linalg.eigvalsh(0.5 * (Zi + np.swapaxes(Zi, 1, 2)))
    lo = eigs[:, 0]
    hi = np.maximum(np.abs(eigs).max(axis=1), np.finfo(float).tiny)
    bad = np.flatnonzero(lo <= 1e-14 * np.maximum(hi, np.abs(Zb).reshape(len(Zb), -1).max(axis=1)))
    if bad.size:
        c = int(bad[np.argmin(lo[bad])])
        raise CoercivityError(
            f"imaginary part of Z is not positive definite in cell {c} (min eigenvalue {lo[c]:.3e})",
            cell=c,
            min_eig=float(lo[c]),
        )
    Zi_inv = np.linalg.inv(Zi)
    A = Zi + Zr @ Zi_inv @ Zr
    B = Zr @ Zi_inv
    top = np.concatenate([A, B], axis=2)
    bot = np.concatenate([np.swapaxes(B, 1, 2), Zi_inv], axis=2)
    calL = np.concatenate([top, bot], axis=1)
    calL = 0.5 * (calL + np.swapaxes(calL, 1, 2))
    return ConvexBlock(calL=calL, calL_inv=calL_inverse(Zb))


def calL_inverse(Z) -> np.ndarray:
    """Closed form of ``calL^-1 = [[(Z'')^-1, -(Z'')^-1 Z'], [-Z'(Z'')^-1, Z'' + Z'(Z'')^-1 Z']]``."""
    Zb = _as_batch(Z)
    Zr, Zi = Zb.real, Zb.imag
    Zi_inv = np.linalg.inv(Zi)
    top = np.concatenate([Zi_inv, -Zi_inv @ Zr], axis=2)
    bot = np.concatenate([-Zr @ Zi_inv, Zi + Zr @ Zi_inv @ Zr], axis=2)
    out = np.concatenate([top, bot], axis=1)
    return 0.5 * (out + np.swapaxes(out, 1, 2))


def build_calE(eps):
    """Two-block convex matrix for a scalar or matrix permittivity.

    For scalar ``eps`` returns the 2x2 matrix
    ``[[eps'' + eps'^2/eps'', eps'/eps''], [eps'/eps'', 1/eps'']]``; for a
    ``(d, d)`` matrix the analogous ``(2d, 2d)`` block matrix.
    """
    e = np.asarray(eps, dtype=complex)
    scalar = e.ndim == 0
    if e.ndim not in (0, 2):
        raise DimensionError("eps must be a scalar or a square matrix")
    try:
        out = build_calL(e.reshape(1, 1, 1) if scalar else e[None]).calL[0]
    except CoercivityError as exc:
        raise CoercivityError(f"eps'' must be positive definite: {exc}", min_eig=exc.min_eig) from None
    return out
