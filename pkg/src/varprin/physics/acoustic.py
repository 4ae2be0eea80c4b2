"""Acoustics ``-div(rho^-1 grad P) = omega^2 P / kappa`` in the general framework.

Identifications: ``u = P``, ``Z = e^{i theta} diag(-rho^-1, omega^2/kappa)``
and ``G = -i e^{i theta} omega v``, so at ``theta = 0`` the real part of the
flux is ``omega v''``. The same equation covers TE/TM electromagnetism in two
dimensions after relabelling the moduli.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..assembly import (
    LosslessRegion,
    QuadraticForm,
    assemble_Y,
    assemble_Y_lossless,
    cauchy_data,
)
from ..constitutive import BlockZ, build_calL, rotate
from ..errors import (
    CoercivityError,
    IncompatibleDataError,
    InversionError,
    ValidationError,
    WrongPrincipleError,
)
from ..grid import StaggeredGrid
from ..scene import Scene, physical_sites

__all__ = [
    "AcousticMedium",
    "AcousticZ",
    "acoustic_to_Z",
    "acoustic_assemble_Y",
    "acoustic_rho_real_Y",
    "acoustic_kappa_real_Y",
    "rho_real_pressure",
    "acoustic_pde_residual",
    "em_scene",
    "em_to_acoustic",
]


@dataclass(frozen=True)
class AcousticMedium:
    """Density (scalar or 2x2 per cell), bulk modulus per cell, frequency."""

    rho: np.ndarray
    kappa: np.ndarray
    omega: float

    def to_scene(self, grid: StaggeredGrid, bc_kind, bc_value, source=None, theta=0.0, tau=0.0, label="") -> Scene:
        return Scene(
            physics="acoustic", grid=grid, moduli={"rho": self.rho, "kappa": self.kappa},
            bc_kind=bc_kind, bc_value=bc_value, omega=self.omega, theta=theta, tau=tau,
            source=source, label=label,
        )


@dataclass(frozen=True)
class AcousticZ:
    Z: BlockZ
    theta: float
    omega: float

    def velocity(self, G):
        """``v`` from the flux ``G = -i e^{i theta} omega v``."""
        return np.asarray(G) / (-1j * np.exp(1j * self.theta) * self.omega)

    def flux(self, v):
        return -1j * np.exp(1j * self.theta) * self.omega * np.asarray(v)


def acoustic_to_Z(medium: AcousticMedium, theta: float = 0.0) -> AcousticZ:
    rho = np.asarray(medium.rho, dtype=complex)
    kappa = np.atleast_1d(np.asarray(medium.kappa, dtype=complex))
    nc = kappa.size
    if rho.ndim == 0 or rho.ndim == 1:
        rho_t = np.broadcast_to(np.atleast_1d(rho)[:, None, None] * np.eye(2), (nc, 2, 2))
    else:
        rho_t = np.broadcast_to(rho, (nc, 2, 2))
    det = rho_t[:, 0, 0] * rho_t[:, 1, 1] - rho_t[:, 0, 1] * rho_t[:, 1, 0]
    if np.any(det == 0):
        raise InversionError(f"density tensor is singular in cell {int(np.flatnonzero(det == 0)[0])}")
    if np.any(kappa == 0):
        raise InversionError("bulk modulus vanishes in some cell")
    Z = np.zeros((nc, 3, 3), dtype=complex)
    Z[:, :2, :2] = -np.linalg.inv(rho_t)
    Z[:, 2, 2] = medium.omega**2 / kappa
    return AcousticZ(Z=rotate(BlockZ(Z, 1, 2), theta), theta=float(theta), omega=float(medium.omega))


def _regime(scene: Scene, need_rho_lossy=True, need_kappa_lossy=True):
    if scene.physics != "acoustic":
        raise WrongPrincipleError("an acoustic scene is required")
    rho = scene.moduli["rho"]
    kappa = scene.moduli["kappa"]
    if need_rho_lossy:
        ri = rho.imag if rho.ndim == 1 else np.linalg.eigvalsh(0.5 * (rho.imag + np.swapaxes(rho.imag, 1, 2)))[:, 0]
        if np.any(ri <= 0):
            raise CoercivityError(
                "density needs a positive definite imaginary part at theta = 0; "
                "use select_theta with the general convex functional",
                cell=int(np.flatnonzero(ri <= 0)[0]),
            )
    if need_kappa_lossy and np.any(kappa.imag >= 0):
        raise CoercivityError(
            "bulk modulus needs a negative imaginary part at theta = 0; "
            "use select_theta with the general convex functional",
            cell=int(np.flatnonzero(kappa.imag >= 0)[0]),
        )


def _velocity_layout(form: QuadraticForm, scene: Scene, kind: str) -> QuadraticForm:
    g = scene.grid
    s = np.r_[np.ones(g.npot), np.full(g.nface, scene.omega)]
    return form.rescaled(s, layout={"P": slice(0, g.npot), "v": slice(g.npot, g.npot + g.nface)}, kind=kind)


def acoustic_assemble_Y(scene: Scene, boundary=None) -> QuadraticForm:
    """Convex functional in ``(P', v'')`` at ``theta = tau = 0``."""
    _regime(scene)
    sc0 = scene.with_theta(0.0, 0.0)
    return _velocity_layout(assemble_Y(sc0, boundary=boundary), scene, "Y_acoustic")


def acoustic_kappa_real_Y(scene: Scene, boundary=None) -> QuadraticForm:
    """Convex functional for real ``kappa``: cells lossless, ``P' = kappa div v'' / omega``.

    The pressure entries are dependent; the free unknowns are ``v''`` on
    interior faces.
    """
    if scene.physics != "acoustic":
        raise WrongPrincipleError("an acoustic scene is required")
    if np.any(scene.moduli["kappa"].imag != 0):
        raise WrongPrincipleError("this principle needs a real bulk modulus")
    _regime(scene, need_kappa_lossy=False)
    sc0 = scene.with_theta(0.0, 0.0)
    form = assemble_Y_lossless(sc0, LosslessRegion.value(scene.grid), boundary=boundary)
    return _velocity_layout(form, scene, "Y_kappa_real")


def _check_rho_real(scene: Scene):
    if scene.physics != "acoustic":
        raise WrongPrincipleError("an acoustic scene is required")
    rho = scene.moduli["rho"]
    if np.any(rho.imag != 0):
        raise WrongPrincipleError("this principle needs a real density")
    rr = rho.real if rho.ndim == 1 else np.linalg.eigvalsh(0.5 * (rho.real + np.swapaxes(rho.real, 1, 2)))[:, 0]
    if np.any(rr <= 0):
        raise ValidationError("density must be positive definite")
    _regime(scene, need_rho_lossy=False)


def acoustic_rho_real_Y(scene: Scene, boundary=None) -> QuadraticForm:
    """Convex functional in ``P'`` alone for real density.

    With faces lossless, ``omega v'' = r' grad P'`` (``r = -rho^-1``). The
    pinned normal flux fixes ``P'`` in every boundary-adjacent cell, so the
    free unknowns are the remaining interior cells.
    """
    _check_rho_real(scene)
    g = scene.grid
    if boundary is None:
        boundary = cauchy_data(scene)
    u0, q0 = (np.asarray(b, dtype=complex) for b in boundary)
    sd = physical_sites(scene, (u0, q0))
    nf, nc, npot = g.nface, g.ncell, g.npot
    V = g.volume
    r = sd.z.real[:nf]
    zc = sd.z[nf:]
    bf = g.boundary_faces
    bcell = g.boundary_cell
    half = 0.5 * g.face_spacing[bf]
    fixed = np.zeros(nc, dtype=bool)
    pv = np.zeros(npot)
    pv[nc:] = u0.real
    for k in range(g.nbface):
        c = bcell[k]
        val = u0.real[k] - q0.real[k] * half[k] / r[bf[k]]
        if fixed[c]:
            scale = max(abs(val), abs(pv[c]), abs(q0.real[k]) * half[k] / abs(r[bf[k]]), 1.0)
            if abs(val - pv[c]) > 1e-8 * scale:
                raise IncompatibleDataError(
                    f"boundary data disagree on the pressure of corner cell {c} ({pv[c]:.6g} vs {val:.6g})"
                )
            continue
        fixed[c] = True
        pv[c] = val
    inner = g.interior_faces
    Gm = g.grad_matrix.tocsr()
    Dv = g.div_matrix.tocsc()
    L = (Dv[:, inner] @ sp.diags(r[inner]) @ Gm[inner, :]).tocsr()
    l0 = Dv[:, bf] @ (q0.real * g.boundary_normal) - sd.h.real
    calL = build_calL(zc.reshape(-1, 1, 1)).calL
    a, b, c = calL[:, 0, 0], calL[:, 0, 1], calL[:, 1, 1]
    Ic = sp.eye(nc, npot, format="csr")
    A = V * (Ic.T @ sp.diags(a) @ Ic - Ic.T @ sp.diags(b) @ L - L.T @ sp.diags(b) @ Ic + L.T @ sp.diags(c) @ L)
    A = A.tocsr()
    A = ((A + A.T) * 0.5).tocsr()
    bvec = V * (-(Ic.T @ (b * l0)) + L.T @ (c * l0) + Ic.T @ sd.h.imag)
    cval = float(V * np.sum(c * l0 * l0))
    free = np.r_[~fixed, np.zeros(g.nbface, dtype=bool)]
    return QuadraticForm(
        A=A, b=np.asarray(bvec).ravel(), c=cval, free_mask=free, pinned_values=pv,
        layout={"P": slice(0, npot)}, kind="Y_rho_real",
    )


def rho_real_pressure(scene: Scene, x, boundary=None) -> np.ndarray:
    """Complex cell pressure from a minimiser of :func:`acoustic_rho_real_Y`.

    ``P''`` follows from the convex relation at the (lossy) cell sites.
    """
    g = scene.grid
    if boundary is None:
        boundary = cauchy_data(scene)
    u0, q0 = (np.asarray(b, dtype=complex) for b in boundary)
    sd = physical_sites(scene, (u0, q0))
    nf = g.nface
    r = sd.z.real[:nf]
    Pr = np.asarray(x)[: g.npot]
    Gp = r * (g.grad_matrix @ Pr)
    Gp[g.boundary_faces] = q0.real * g.boundary_normal
    calG = g.div_matrix @ Gp - sd.h.real
    zc = sd.z[nf:]
    Pi = (zc.real * Pr[: g.ncell] - calG) / zc.imag
    return Pr[: g.ncell] + 1j * Pi


def acoustic_pde_residual(scene: Scene, P_cells, traces) -> float:
    """Relative residual of ``div(rho^-1 grad P) + omega^2 P/kappa + h = 0`` per cell."""
    g = scene.grid
    sd = physical_sites(scene)
    u = np.r_[np.asarray(P_cells), np.asarray(traces)]
    K = (g.P.T @ sp.diags(g.site_weight * sd.z) @ g.P).tocsr()
    r = (K @ u)[: g.ncell] + g.volume * scene.source
    scale = float(abs(K).sum(axis=1).max()) * np.abs(u).max() + g.volume * np.abs(scene.source).max(initial=0.0)
    return float(np.abs(r).max() / scale) if scale > 0 else 0.0


def em_to_acoustic(polarization: str, eps, mu):
    """Map TE/TM electromagnetic moduli to acoustic ``(rho, kappa)``.

    TE (electric field along the axis): ``rho = mu``, ``kappa = 1/eps``.
    TM (magnetic field along the axis): ``rho = eps``, ``kappa = 1/mu``.
    """
    p = polarization.upper()
    eps = np.asarray(eps, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    if p == "TE":
        return mu, 1.0 / eps
    if p == "TM":
        return eps, 1.0 / mu
    raise ValidationError(f"polarization must be 'TE' or 'TM', got {polarization!r}")


def em_scene(grid, polarization, eps, mu, omega, bc_kind, bc_value, source=None, theta=0.0, tau=0.0) -> Scene:
    """Acoustic scene carrying a TE/TM electromagnetic problem (label only differs)."""
    rho, kappa = em_to_acoustic(polarization, eps, mu)
    return AcousticMedium(rho, kappa, omega).to_scene(
        grid, bc_kind, bc_value, source=source, theta=theta, tau=tau, label=polarization.upper()
    )
