"""Time-averaged dissipation ``sum w (F'.Z''F' + F''.Z''F'')`` and its boundary form.

Summing the key identity over a solution of ``cup G + h = 0`` gives

    sum w conj(F).Z F = sum |f| q0 conj(u0) - sum V h conj(u),

so the dissipation is also the imaginary part of the boundary pairing minus
the work of the source. With a rotation both sides pick up ``e^{i theta}``.
"""
from __future__ import annotations

import numpy as np

from ..scene import physical_sites

__all__ = ["dissipation", "boundary_dissipation", "dtn_dissipation"]


def _elastic_parts(scene, solution):
    from .elastic import ElasticMedium, _operators, _pinned_dofs, gauss_Z, strain_operator

    g = scene.grid
    u = np.asarray(solution.u, dtype=complex).ravel()
    F = (strain_operator(g) @ u).reshape(g.ncell, 4, 5)
    Z = gauss_Z(ElasticMedium.from_scene(scene))
    bulk = (g.hx * g.hy / 4) * np.einsum("nga,nab,ngb->", F.conj(), Z, F)
    K, f, _ = _operators(scene, 0.0)
    dofs, _ = _pinned_dofs(scene)
    react = (K @ u + f)[dofs]
    bnd = np.sum(react * u[dofs].conj()) - np.sum(f * u.conj())
    return bulk, bnd


def dissipation(scene, solution, theta: float = 0.0) -> float:
    """Volume form ``Im(e^{i theta} sum w conj(F).Z F)``.

    At ``theta = 0`` this is ``sum w (F'.Z''F' + F''.Z''F'')`` with the
    physical ``Z``.
    """
    if scene.physics == "elastic":
        bulk, _ = _elastic_parts(scene, solution)
    else:
        g = scene.grid
        z = physical_sites(scene).z
        F = g.P @ np.asarray(solution.u, dtype=complex)
        bulk = np.sum(g.site_weight * F.conj() * z * F)
    return float((np.exp(1j * theta) * bulk).imag)


def boundary_dissipation(scene, solution, theta: float = 0.0) -> float:
    """Boundary form ``Im(e^{i theta} (sum |f| q0 conj(u0) - sum V h conj(u)))``."""
    if scene.physics == "elastic":
        _, bnd = _elastic_parts(scene, solution)
    else:
        g = scene.grid
        area = g.face_area[g.boundary_faces]
        bnd = np.sum(area * solution.q0 * solution.traces.conj()) - g.volume * np.sum(
            scene.source * solution.cells.conj()
        )
    return float((np.exp(1j * theta) * bnd).imag)


def dtn_dissipation(dtn, u0) -> float:
    """``<u0', N'' u0'> + <u0'', N'' u0''>`` in the face-weighted pairing."""
    u0 = np.asarray(u0, dtype=complex)
    Fi = dtn.form.imag
    Fi = 0.5 * (Fi + Fi.T)
    return float(u0.real @ Fi @ u0.real + u0.imag @ Fi @ u0.imag)
